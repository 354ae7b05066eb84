use num_complex::Complex64 as C64;
use serde::{Deserialize, Serialize};

use crate::error::{invalid, Result};
use crate::geometry::{dot, norm, scale, sub, Domain, Grid, NodeKind, Point};

/// Minimum angular clearance of ψ from 0 and π over the grid.
pub const PSI_CLEARANCE: f64 = 1e-3;

/// Tolerance on the eikonal identities for closed-form gradients.
pub const EIKONAL_TOL: f64 = 1e-10;

/// Probe centre and axis; everything about a CGO that does not depend on (t, h).
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Frame {
    pub dim: usize,
    pub x0: Point,
    pub w: Point,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct PhaseSpec {
    pub dim: usize,
    pub x0: Point,
    pub w: Point,
    pub t: f64,
    pub h: f64,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct PhaseValues {
    pub phi: f64,
    pub psi: f64,
    pub grad_phi: Point,
    pub grad_psi: Point,
    pub lap_phi: f64,
    pub lap_psi: f64,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct EikonalReport {
    /// max | |∇ψ|² − |∇φ|² |
    pub norm_gap: f64,
    /// max |∇φ·∇ψ|
    pub orthogonality: f64,
    pub flagged: bool,
}

/// Rotated-frame coordinates: z = x₁ + i r, θ the unit direction of the
/// component orthogonal to w.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Cylindrical {
    pub z: C64,
    pub theta: Point,
    pub r: f64,
}

impl Frame {
    pub fn new(dim: usize, x0: Point, w: Point) -> Self {
        Frame { dim, x0, w }
    }

    /// Axis perpendicular to the direction from x0 to `target`.
    pub fn perpendicular(dim: usize, x0: Point, target: Point) -> Result<Self> {
        let e = sub(&target, &x0);
        let d = norm(&e);
        if !(d > 0.0) {
            return invalid("probe point coincides with the target");
        }
        let e = scale(&e, 1.0 / d);
        let w = if dim == 2 {
            [-e[1], e[0], 0.0]
        } else {
            let k = (0..3)
                .min_by(|&a, &b| e[a].abs().total_cmp(&e[b].abs()))
                .unwrap();
            let mut axis = [0.0; 3];
            axis[k] = 1.0;
            let c = [
                e[1] * axis[2] - e[2] * axis[1],
                e[2] * axis[0] - e[0] * axis[2],
                e[0] * axis[1] - e[1] * axis[0],
            ];
            scale(&c, 1.0 / norm(&c))
        };
        Ok(Frame { dim, x0, w })
    }

    pub fn with_level(&self, t: f64, h: f64) -> PhaseSpec {
        PhaseSpec { dim: self.dim, x0: self.x0, w: self.w, t, h }
    }

    /// z = x₁ + i r without the axis-clearance check.
    pub fn z_of(&self, x: &Point) -> C64 {
        let y = sub(x, &self.x0);
        let x1 = dot(&self.w, &y);
        let perp = sub(&y, &scale(&self.w, x1));
        C64::new(x1, norm(&perp))
    }
}

impl PhaseSpec {
    pub fn frame(&self) -> Frame {
        Frame { dim: self.dim, x0: self.x0, w: self.w }
    }

    pub fn check_unit(&self) -> Result<()> {
        let n = norm(&self.w);
        if (n - 1.0).abs() > 1e-12 {
            return invalid(format!("|w| = {n} is not 1"));
        }
        if self.dim == 2 && self.w[2] != 0.0 {
            return invalid("w has a third component in 2D");
        }
        Ok(())
    }

    /// Full validation against Ω and its grid.
    pub fn validate(&self, domain: &Domain, grid: &Grid) -> Result<()> {
        if !(self.h > 0.0) || !self.t.is_finite() {
            return invalid("h must be positive and t finite");
        }
        self.check_unit()?;
        if !domain.outside_hull(&self.x0) {
            return invalid("x0 lies inside the convex hull of the domain");
        }
        let clearance = self.psi_clearance(grid);
        if clearance < PSI_CLEARANCE {
            return invalid(format!(
                "ψ comes within {clearance:.2e} of 0 or π on the grid; choose another w"
            ));
        }
        Ok(())
    }

    /// min over active nodes of min(ψ, π − ψ).
    pub fn psi_clearance(&self, grid: &Grid) -> f64 {
        (0..grid.n_nodes())
            .filter(|&i| grid.kinds[i] != NodeKind::Exterior)
            .map(|i| {
                let y = sub(&grid.position(i), &self.x0);
                let c = (dot(&self.w, &y) / norm(&y)).clamp(-1.0, 1.0);
                let psi = c.acos();
                psi.min(std::f64::consts::PI - psi)
            })
            .fold(f64::INFINITY, f64::min)
    }
}

/// Closed-form phases φ = ½log|x−x0|², ψ = arccos(w·(x−x0)/|x−x0|) and
/// their derivatives. `w` is used as given, so a non-unit w shows up in
/// the eikonal residuals.
pub fn eval_phase(x: &Point, spec: &PhaseSpec) -> Result<PhaseValues> {
    let y = sub(x, &spec.x0);
    let r2 = dot(&y, &y);
    if r2 == 0.0 {
        return invalid("phase evaluated at x0");
    }
    let ry = r2.sqrt();
    let n = spec.dim as f64;
    let c = dot(&spec.w, &y) / ry;
    let mut grad_c = [0.0; 3];
    let mut grad_phi = [0.0; 3];
    for k in 0..spec.dim {
        grad_c[k] = spec.w[k] / ry - c * y[k] / r2;
        grad_phi[k] = y[k] / r2;
    }
    let sn = (1.0 - c * c).max(0.0).sqrt();
    let grad_psi = scale(&grad_c, -1.0 / sn);
    let x1 = dot(&spec.w, &y);
    let rho = norm(&sub(&y, &scale(&spec.w, x1)));
    Ok(PhaseValues {
        phi: 0.5 * r2.ln(),
        psi: c.clamp(-1.0, 1.0).acos(),
        grad_phi,
        grad_psi,
        lap_phi: (n - 2.0) / r2,
        lap_psi: (n - 2.0) * x1 / (rho * r2),
    })
}

/// Max eikonal residuals over all active grid nodes.
pub fn verify_eikonal(spec: &PhaseSpec, grid: &Grid) -> EikonalReport {
    let mut norm_gap: f64 = 0.0;
    let mut orthogonality: f64 = 0.0;
    for i in (0..grid.n_nodes()).filter(|&i| grid.kinds[i] != NodeKind::Exterior) {
        let Ok(p) = eval_phase(&grid.position(i), spec) else {
            norm_gap = f64::INFINITY;
            continue;
        };
        let gap = dot(&p.grad_psi, &p.grad_psi) - dot(&p.grad_phi, &p.grad_phi);
        norm_gap = norm_gap.max(gap.abs());
        orthogonality = orthogonality.max(dot(&p.grad_phi, &p.grad_psi).abs());
    }
    let flagged = !(norm_gap <= EIKONAL_TOL && orthogonality <= EIKONAL_TOL);
    EikonalReport { norm_gap, orthogonality, flagged }
}

/// (z, θ, r) in the frame with x0 at the origin and w = e₁.
pub fn cylindrical_coords(x: &Point, spec: &PhaseSpec, r_min: f64) -> Result<Cylindrical> {
    let y = sub(x, &spec.x0);
    let x1 = dot(&spec.w, &y);
    let perp = sub(&y, &scale(&spec.w, x1));
    let r = norm(&perp);
    if !(r >= r_min) || r == 0.0 {
        return invalid(format!("axis clearance r = {r:.3e} is below r_min = {r_min:.3e}"));
    }
    Ok(Cylindrical { z: C64::new(x1, r), theta: scale(&perp, 1.0 / r), r })
}

#[cfg(test)]
mod tests {
    use super::*;
    use std::f64::consts::{E, FRAC_PI_2, FRAC_PI_4};

    fn spec3() -> PhaseSpec {
        PhaseSpec { dim: 3, x0: [0.0; 3], w: [1.0, 0.0, 0.0], t: 0.0, h: 0.1 }
    }

    #[test]
    fn phase_examples() {
        let s = spec3();
        let p = eval_phase(&[1.0, 0.0, 0.0], &s).unwrap();
        assert!(p.phi.abs() < 1e-15 && p.psi.abs() < 1e-15);
        let p = eval_phase(&[0.0, 0.7, 0.1], &s).unwrap();
        assert!((p.psi - FRAC_PI_2).abs() < 1e-15);
        let p = eval_phase(&[0.0, E, 0.0], &s).unwrap();
        assert!((p.phi - 1.0).abs() < 1e-15);
        assert!(eval_phase(&[0.0; 3], &s).is_err());
    }

    #[test]
    fn cylindrical_examples() {
        let s = spec3();
        assert!(cylindrical_coords(&[2.0, 0.0, 0.0], &s, 1e-2).is_err());
        let c = cylindrical_coords(&[1.0, 1.0, 0.0], &s, 1e-2).unwrap();
        assert!((c.z - C64::new(1.0, 1.0)).norm() < 1e-15);
        let l = c.z.ln();
        assert!((l.re - 0.5 * 2f64.ln()).abs() < 1e-15);
        assert!((l.im - FRAC_PI_4).abs() < 1e-15);
    }

    #[test]
    fn laplacians_match_finite_differences() {
        let s = PhaseSpec { dim: 3, x0: [2.3, -0.4, 0.2], w: [0.0, 0.6, 0.8], t: 0.0, h: 0.1 };
        let x = [0.1, 0.2, -0.3];
        let p = eval_phase(&x, &s).unwrap();
        let d = 1e-4;
        let mut lphi = 0.0;
        let mut lpsi = 0.0;
        for k in 0..3 {
            let mut a = x;
            let mut b = x;
            a[k] += d;
            b[k] -= d;
            let pa = eval_phase(&a, &s).unwrap();
            let pb = eval_phase(&b, &s).unwrap();
            lphi += (pa.phi - 2.0 * p.phi + pb.phi) / (d * d);
            lpsi += (pa.psi - 2.0 * p.psi + pb.psi) / (d * d);
            assert!(((pa.psi - pb.psi) / (2.0 * d) - p.grad_psi[k]).abs() < 1e-7);
        }
        assert!((lphi - p.lap_phi).abs() < 1e-5);
        assert!((lpsi - p.lap_psi).abs() < 1e-5);
    }

    #[test]
    fn perpendicular_frame() {
        let f = Frame::perpendicular(3, [2.2, 0.3, 0.0], [0.0; 3]).unwrap();
        assert!((norm(&f.w) - 1.0).abs() < 1e-15);
        assert!(dot(&f.w, &[2.2, 0.3, 0.0]).abs() < 1e-15);
        let f = Frame::perpendicular(2, [0.0, -3.0, 0.0], [0.0; 3]).unwrap();
        assert_eq!(f.w, [-1.0, 0.0, 0.0]);
    }
}
