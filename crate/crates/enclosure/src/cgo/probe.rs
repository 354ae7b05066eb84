use num_complex::Complex64 as C64;

use super::amplitude::{Amplitudes, Jet};
use super::phase::{Frame, PhaseSpec};
use crate::error::{invalid, Error, Result};
use crate::geometry::{dot, norm, scale, sub, Grid, NodeKind, Point};
use crate::media::MediumSpec;
use crate::solver::{Field, ForwardSolver, NavierData, SolveReport};

/// Largest admissible (t − φ)/h on Ω̄.
pub const OVERFLOW_LIMIT: f64 = 700.0;

const ZERO: C64 = C64::new(0.0, 0.0);

/// Closed-form evaluation of vapp = e^{(t − log z)/h}(a0 − h a1 + h² a2)
/// truncated at `order`.
pub struct ProbeEvaluator<'a> {
    pub amps: &'a Amplitudes,
    pub order: usize,
    pub t: f64,
    pub h: f64,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ProbePoint {
    pub v: C64,
    pub lap: C64,
    pub grad: [C64; 3],
}

impl<'a> ProbeEvaluator<'a> {
    pub fn new(amps: &'a Amplitudes, order: usize, t: f64, h: f64) -> Result<Self> {
        if order > amps.order {
            return invalid(format!("order {order} exceeds the built amplitude order {}", amps.order));
        }
        if !(h > 0.0) {
            return invalid("h must be positive");
        }
        Ok(ProbeEvaluator { amps, order, t, h })
    }

    fn frame(&self) -> &Frame {
        &self.amps.frame
    }

    /// (t − φ(x))/h
    pub fn exponent(&self, x: &Point) -> f64 {
        let y = sub(x, &self.frame().x0);
        (self.t - norm(&y).ln()) / self.h
    }

    fn combined(&self, jets: &[Jet; 3]) -> Jet {
        let mut b = Jet::default();
        let mut c = 1.0;
        for j in jets.iter().take(self.order + 1) {
            b.v += c * j.v;
            b.dz += c * j.dz;
            b.dzb += c * j.dzb;
            b.dzzb += c * j.dzzb;
            c *= -self.h;
        }
        b
    }

    pub fn eval(&self, x: &Point) -> Result<ProbePoint> {
        let f = self.frame();
        let y = sub(x, &f.x0);
        let x1 = dot(&f.w, &y);
        let perp = sub(&y, &scale(&f.w, x1));
        let r = norm(&perp);
        if r == 0.0 {
            return invalid("probe evaluated on its axis");
        }
        let z = C64::new(x1, r);
        let b = self.combined(&self.amps.jets(z)?);
        let e = ((self.t - z.ln()) / self.h).exp();
        let n2 = f.dim as f64 - 2.0;
        let rho = C64::new(0.0, 2.0 * r);
        let lap_b = 4.0 * b.dzzb - 2.0 * n2 / rho * (b.dz - b.dzb);
        let t_b = 2.0 / z * (b.dzb - 0.5 * n2 * b.v / rho);
        let vz = e * (b.dz - b.v / (self.h * z));
        let vzb = e * b.dzb;
        let mut grad = [ZERO; 3];
        for k in 0..f.dim {
            let th = perp[k] / r;
            grad[k] = vz * C64::new(f.w[k], th) + vzb * C64::new(f.w[k], -th);
        }
        Ok(ProbePoint { v: e * b.v, lap: e * (lap_b - 2.0 / self.h * t_b), grad })
    }
}

/// A CGO probe on a grid: the truncated ansatz, its Navier data and the
/// exact discrete background solution sharing that data.
#[derive(Debug, Clone)]
pub struct CgoAnsatz {
    pub phase: PhaseSpec,
    pub order: usize,
    /// vapp and Δvapp at active nodes, zero elsewhere.
    pub vapp: Vec<C64>,
    pub lap_vapp: Vec<C64>,
    pub data: NavierData,
    pub v_exact: Field,
    pub m_exact: Field,
    pub report: SolveReport,
    pub max_exponent: f64,
}

/// Builds the probe for `spec` and solves the background problem with its
/// traces. `solver` must be a background solver on `grid`.
pub fn build_probe_with(
    solver: &ForwardSolver<'_>,
    spec: &PhaseSpec,
    amps: &Amplitudes,
    order: usize,
) -> Result<CgoAnsatz> {
    let grid = solver.grid;
    if spec.frame() != amps.frame {
        return invalid("phase spec and amplitudes use different frames");
    }
    if !solver.operator().is_background() {
        return invalid("probe solves need the background medium");
    }
    spec.check_unit()?;
    let ev = ProbeEvaluator::new(amps, order, spec.t, spec.h)?;
    let active: Vec<usize> = (0..grid.n_nodes()).filter(|&i| grid.kinds[i] != NodeKind::Exterior).collect();
    let max_exponent = active
        .iter()
        .map(|&i| ev.exponent(&grid.position(i)))
        .fold(f64::NEG_INFINITY, f64::max);
    if max_exponent > OVERFLOW_LIMIT {
        return Err(Error::Overflow {
            max_exponent,
            limit: OVERFLOW_LIMIT,
            suggested_shift: (max_exponent - OVERFLOW_LIMIT) * spec.h,
        });
    }
    let n = grid.n_nodes();
    let mut vapp = vec![ZERO; n];
    let mut lap_vapp = vec![ZERO; n];
    for &i in &active {
        let p = ev.eval(&grid.position(i))?;
        vapp[i] = p.v;
        lap_vapp[i] = p.lap;
    }
    let data = NavierData {
        f1: grid.boundary.iter().map(|b| vapp[b.node]).collect(),
        f2: grid.boundary.iter().map(|b| lap_vapp[b.node]).collect(),
    };
    let sol = solver.solve(&data, None)?;
    Ok(CgoAnsatz {
        phase: *spec,
        order,
        vapp,
        lap_vapp,
        data,
        v_exact: sol.u,
        m_exact: sol.m,
        report: sol.report,
        max_exponent,
    })
}

pub fn build_probe(grid: &Grid, spec: &PhaseSpec, amps: &Amplitudes, order: usize) -> Result<CgoAnsatz> {
    let medium = MediumSpec::background(amps.kappa);
    let solver = ForwardSolver::new(grid, &medium)?;
    build_probe_with(&solver, spec, amps, order)
}
