//! The indicator functional I_{x0}(h, t) from boundary data, its volume
//! counterpart and norm diagnostics of the probes on D.

use num_complex::Complex64 as C64;
use serde::{Deserialize, Serialize};

use crate::cgo::{build_probe_with, Amplitudes, CgoAnsatz, ProbeEvaluator};
use crate::error::{invalid, Result};
use crate::geometry::{Grid, ObstacleShape, Point};
use crate::media::MediumSpec;
use crate::solver::{
    extract_dtn, laplacian, DtnTrace, ForwardSolver, KrylovConfig, NavierData, Solution,
};
use crate::sum::{pairwise, pairwise_map};

/// Floor applied inside log|I|.
pub const LOG_FLOOR: f64 = 1e-300;

/// ∫∂Ω (∂νu · f̄₂ + ∂ν(Δu) · f̄₁) dS by the boundary quadrature.
pub fn pair_dtn(grid: &Grid, dtn: &DtnTrace, f: &NavierData) -> Result<C64> {
    let nb = grid.boundary.len();
    if [dtn.du_dnu.len(), dtn.dlap_dnu.len(), f.f1.len(), f.f2.len()].iter().any(|&l| l != nb) {
        return invalid("boundary arrays are not aligned with the grid");
    }
    Ok(pairwise_map(nb, |k| {
        grid.boundary[k].weight * (dtn.du_dnu[k] * f.f2[k].conj() + dtn.dlap_dnu[k] * f.f1[k].conj())
    }))
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct IndicatorSample {
    pub x0: Point,
    pub w: Point,
    pub h: f64,
    pub t: f64,
    pub value: C64,
    pub value_volume_oracle: C64,
    pub iterations: usize,
    pub residual: f64,
}

impl IndicatorSample {
    /// max(|I|, LOG_FLOOR)
    pub fn modulus(&self) -> f64 {
        self.value.norm().max(LOG_FLOOR)
    }

    pub fn is_floored(&self) -> bool {
        !(self.value.norm() > LOG_FLOOR)
    }

    pub fn oracle_gap(&self) -> f64 {
        (self.value - self.value_volume_oracle).norm() / self.value.norm().max(LOG_FLOOR)
    }
}

/// Reflected-field route: I = pair(dtn(w), f) with w = u − v solved from its
/// own homogeneous problem. Returns the value and the reflected solution.
pub fn indicator_boundary_with(solver: &ForwardSolver<'_>, ansatz: &CgoAnsatz) -> Result<(C64, Solution)> {
    let grid = solver.grid;
    let v = &ansatz.v_exact.values;
    let m_v = &ansatz.m_exact.values;
    let refl = solver.solve_reflected(v, m_v)?;
    let dtn = extract_dtn(grid, solver.medium.kappa, &refl.u.values, &refl.m.values, None);
    Ok((pair_dtn(grid, &dtn, &ansatz.data)?, refl))
}

pub fn indicator_boundary(grid: &Grid, medium: &MediumSpec, ansatz: &CgoAnsatz) -> Result<C64> {
    let solver = ForwardSolver::new(grid, medium)?;
    Ok(indicator_boundary_with(&solver, ansatz)?.0)
}

/// Literal route: solve for u with the probe's data and subtract the two
/// pairings. Loses digits to cancellation once |I| ≪ |pair(dtn(v), f)|.
pub fn indicator_boundary_direct(grid: &Grid, medium: &MediumSpec, ansatz: &CgoAnsatz) -> Result<C64> {
    let u = ForwardSolver::new(grid, medium)?.solve(&ansatz.data, None)?;
    let du = extract_dtn(grid, medium.kappa, &u.u.values, &u.m.values, None);
    let dv = extract_dtn(grid, medium.kappa, &ansatz.v_exact.values, &ansatz.m_exact.values, None);
    Ok(pair_dtn(grid, &du, &ansatz.data)? - pair_dtn(grid, &dv, &ansatz.data)?)
}

/// −∫(γ̃−1)ΔuΔv̄ − κ²∫(ñ−1)uv̄ − ∫(Ã·Du)v̄ by the interior node rule, with
/// Δu = m_u/γ̃ and Δv = m_v.
pub fn indicator_volume_oracle(
    solver: &ForwardSolver<'_>,
    u: &[C64],
    m_u: &[C64],
    v: &[C64],
    m_v: &[C64],
) -> C64 {
    let op = solver.operator();
    let k2 = op.kappa * op.kappa;
    let interior = solver.grid.interior();
    let mut terms: Vec<C64> = interior
        .iter()
        .map(|&i| (1.0 - op.ginv[i]) * m_u[i] * m_v[i].conj() + (op.k2n[i] - k2) * u[i] * v[i].conj())
        .collect();
    for (i, coef) in &op.first_order {
        terms.push(op.a_dot_d(coef, u, *i) * v[*i].conj());
    }
    -crate::sum::pairwise_c(&terms) * solver.grid.cell_volume()
}

/// Medium and background solvers on one grid; produces indicator samples.
pub struct IndicatorEngine<'a> {
    pub grid: &'a Grid,
    pub medium: &'a MediumSpec,
    background: MediumSpec,
    config: KrylovConfig,
}

impl<'a> IndicatorEngine<'a> {
    pub fn new(grid: &'a Grid, medium: &'a MediumSpec, config: KrylovConfig) -> Result<Self> {
        medium.validate(&grid.domain)?;
        Ok(IndicatorEngine { grid, medium, background: medium.background_of(), config })
    }

    pub fn probe(&self, amps: &Amplitudes, order: usize, h: f64, t: f64) -> Result<CgoAnsatz> {
        let bg = ForwardSolver::with_config(self.grid, &self.background, self.config)?;
        build_probe_with(&bg, &amps.frame.with_level(t, h), amps, order)
    }

    /// Indicator for an already built probe.
    pub fn evaluate(&self, ansatz: &CgoAnsatz) -> Result<(IndicatorSample, Solution)> {
        let solver = ForwardSolver::with_config(self.grid, self.medium, self.config)?;
        let (value, refl) = indicator_boundary_with(&solver, ansatz)?;
        let v = &ansatz.v_exact.values;
        let m_v = &ansatz.m_exact.values;
        let u: Vec<C64> = v.iter().zip(&refl.u.values).map(|(a, b)| a + b).collect();
        let m_u: Vec<C64> = m_v.iter().zip(&refl.m.values).map(|(a, b)| a + b).collect();
        let oracle = indicator_volume_oracle(&solver, &u, &m_u, v, m_v);
        let p = &ansatz.phase;
        let sample = IndicatorSample {
            x0: p.x0,
            w: p.w,
            h: p.h,
            t: p.t,
            value,
            value_volume_oracle: oracle,
            iterations: ansatz.report.iterations + refl.report.iterations,
            residual: ansatz.report.residual.max(refl.report.residual),
        };
        Ok((sample, refl))
    }

    pub fn sample(&self, amps: &Amplitudes, order: usize, h: f64, t: f64) -> Result<IndicatorSample> {
        Ok(self.evaluate(&self.probe(amps, order, h, t)?)?.0)
    }
}

/// Squared L²(D) norms of v, ∇v and Δv.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct NormDiagnostics {
    pub h: f64,
    pub v: f64,
    pub grad: f64,
    pub lap: f64,
}

/// Closed-form derivatives of vapp plus differenced derivatives of the
/// correction v_exact − vapp, integrated over the nodes of D.
pub fn cgo_norm_diagnostics(
    grid: &Grid,
    ansatz: &CgoAnsatz,
    amps: &Amplitudes,
    shape: &ObstacleShape,
) -> Result<NormDiagnostics> {
    let p = &ansatz.phase;
    let ev = ProbeEvaluator::new(amps, ansatz.order, p.t, p.h)?;
    let v = &ansatz.v_exact.values;
    let corr: Vec<C64> = v.iter().zip(&ansatz.vapp).map(|(a, b)| a - b).collect();
    let (mut nv, mut ng, mut nl) = (Vec::new(), Vec::new(), Vec::new());
    for &i in grid.interior() {
        let x = grid.position(i);
        if !shape.contains(&x) {
            continue;
        }
        let pt = ev.eval(&x)?;
        let mut g2 = 0.0;
        for k in 0..grid.dim {
            let (a, b) = match (grid.neighbor(i, k, 1), grid.neighbor(i, k, -1)) {
                (Some(a), Some(b)) => (a, b),
                _ => return invalid("obstacle touches the grid edge"),
            };
            let d = (corr[a] - corr[b]) / (2.0 * grid.spacing[k]);
            g2 += (pt.grad[k] + d).norm_sqr();
        }
        nv.push(v[i].norm_sqr());
        ng.push(g2);
        nl.push((pt.lap + laplacian(grid, &corr, i)).norm_sqr());
    }
    let dv = grid.cell_volume();
    Ok(NormDiagnostics { h: p.h, v: pairwise(&nv) * dv, grad: pairwise(&ng) * dv, lap: pairwise(&nl) * dv })
}

/// Samples keyed by (x0, w, h, t), plus run metadata.
#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct IndicatorTable {
    pub resolution: usize,
    pub order: usize,
    pub medium: String,
    pub samples: Vec<IndicatorSample>,
}

fn key(s: &IndicatorSample) -> [u64; 8] {
    [
        s.x0[0].to_bits(),
        s.x0[1].to_bits(),
        s.x0[2].to_bits(),
        s.w[0].to_bits(),
        s.w[1].to_bits(),
        s.w[2].to_bits(),
        s.t.to_bits(),
        s.h.to_bits(),
    ]
}

impl IndicatorTable {
    pub fn insert(&mut self, s: IndicatorSample) -> Result<()> {
        if !(s.h > 0.0) {
            return invalid("indicator samples need h > 0");
        }
        if self.samples.iter().any(|o| key(o) == key(&s)) {
            return invalid("duplicate indicator sample key");
        }
        self.samples.push(s);
        Ok(())
    }

    /// Samples grouped by (x0, w, t), each group sorted by decreasing h.
    pub fn groups(&self) -> Vec<Vec<IndicatorSample>> {
        let mut groups: Vec<Vec<IndicatorSample>> = Vec::new();
        for s in &self.samples {
            let k = &key(s)[..7];
            match groups.iter_mut().find(|g| &key(&g[0])[..7] == k) {
                Some(g) => g.push(*s),
                None => groups.push(vec![*s]),
            }
        }
        for g in &mut groups {
            g.sort_by(|a, b| b.h.total_cmp(&a.h));
        }
        groups
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::geometry::{build_grid, Domain};

    #[test]
    fn zero_trace_pairs_to_zero() {
        let g = build_grid(&Domain::unit_box(2), 10).unwrap();
        let z = NavierData::zeros(&g);
        let dtn = DtnTrace { du_dnu: z.f1.clone(), dlap_dnu: z.f2.clone() };
        let f = NavierData::from_fn(&g, |x| C64::new(x[0], 1.0), |_| C64::new(2.0, 0.0));
        assert_eq!(pair_dtn(&g, &dtn, &f).unwrap(), C64::new(0.0, 0.0));
        let short = NavierData { f1: vec![], f2: vec![] };
        assert!(pair_dtn(&g, &dtn, &short).is_err());
    }

    #[test]
    fn pairing_is_conjugate_linear() {
        let g = build_grid(&Domain::unit_box(2), 10).unwrap();
        let dtn = DtnTrace {
            du_dnu: g.boundary.iter().map(|b| C64::new(b.position[0], 0.3)).collect(),
            dlap_dnu: g.boundary.iter().map(|b| C64::new(1.0, b.position[1])).collect(),
        };
        let f = NavierData::from_fn(&g, |x| C64::new(x[1], x[0]), |x| C64::new(1.0 - x[0], 0.5));
        let a = C64::new(0.3, -1.7);
        let lhs = pair_dtn(&g, &dtn, &f.scaled(a)).unwrap();
        let rhs = a.conj() * pair_dtn(&g, &dtn, &f).unwrap();
        assert!((lhs - rhs).norm() < 1e-14 * rhs.norm());
    }

    #[test]
    fn table_rejects_duplicates_and_groups() {
        let s = IndicatorSample {
            x0: [2.0, 0.0, 0.0],
            w: [0.0, 1.0, 0.0],
            h: 0.1,
            t: 0.0,
            value: C64::new(1.0, 0.0),
            value_volume_oracle: C64::new(1.0, 0.0),
            iterations: 0,
            residual: 0.0,
        };
        let mut t = IndicatorTable::default();
        t.insert(s).unwrap();
        assert!(t.insert(s).is_err());
        t.insert(IndicatorSample { h: 0.2, ..s }).unwrap();
        t.insert(IndicatorSample { t: 1.0, ..s }).unwrap();
        let g = t.groups();
        assert_eq!(g.len(), 2);
        assert_eq!(g[0].iter().map(|s| s.h).collect::<Vec<_>>(), vec![0.2, 0.1]);
    }
}
