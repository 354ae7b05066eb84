use std::f64::consts::FRAC_PI_2;

use num_complex::Complex64 as C64;
use serde::{Deserialize, Serialize};

use super::dbar::{CauchyTransform, ZRect};
use super::phase::Frame;
use crate::error::{invalid, Result};
use crate::geometry::{Grid, NodeKind};

const ZERO: C64 = C64::new(0.0, 0.0);

/// coeff · z^z · z̄^zb · ρ^(rho2/2) with ρ = z − z̄.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Monomial {
    pub coeff: C64,
    pub z: i32,
    pub zb: i32,
    pub rho2: i32,
}

/// Finite sum of monomials in (z, z̄, ρ); closed under ∂z, ∂z̄ and the
/// transport operators.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct Expr {
    terms: Vec<Monomial>,
}

/// ρ^(e2/2) for Im z > 0, where ρ = 2i·Im z.
pub fn rho_pow(z: C64, e2: i32) -> C64 {
    let e = 0.5 * e2 as f64;
    C64::from_polar((2.0 * z.im).powf(e), FRAC_PI_2 * e)
}

impl Monomial {
    fn eval(&self, z: C64) -> C64 {
        self.coeff * z.powi(self.z) * z.conj().powi(self.zb) * rho_pow(z, self.rho2)
    }
}

impl Expr {
    pub fn monomial(coeff: C64, z: i32, zb: i32, rho2: i32) -> Self {
        Expr::from_terms(vec![Monomial { coeff, z, zb, rho2 }])
    }

    fn from_terms(mut terms: Vec<Monomial>) -> Self {
        terms.sort_by_key(|m| (m.z, m.zb, m.rho2));
        let mut out: Vec<Monomial> = Vec::with_capacity(terms.len());
        for m in terms {
            match out.last_mut() {
                Some(l) if (l.z, l.zb, l.rho2) == (m.z, m.zb, m.rho2) => l.coeff += m.coeff,
                _ => out.push(m),
            }
        }
        out.retain(|m| m.coeff != ZERO);
        Expr { terms: out }
    }

    pub fn terms(&self) -> &[Monomial] {
        &self.terms
    }

    pub fn add(&self, other: &Expr) -> Expr {
        Expr::from_terms(self.terms.iter().chain(&other.terms).copied().collect())
    }

    pub fn sub(&self, other: &Expr) -> Expr {
        self.add(&other.scale(C64::new(-1.0, 0.0)))
    }

    pub fn scale(&self, c: C64) -> Expr {
        self.mul_mono(c, 0, 0, 0)
    }

    pub fn mul_mono(&self, c: C64, z: i32, zb: i32, rho2: i32) -> Expr {
        Expr::from_terms(
            self.terms
                .iter()
                .map(|m| Monomial { coeff: m.coeff * c, z: m.z + z, zb: m.zb + zb, rho2: m.rho2 + rho2 })
                .collect(),
        )
    }

    pub fn dz(&self) -> Expr {
        let mut out = Vec::new();
        for m in &self.terms {
            if m.z != 0 {
                out.push(Monomial { coeff: m.coeff * m.z as f64, z: m.z - 1, ..*m });
            }
            if m.rho2 != 0 {
                out.push(Monomial { coeff: m.coeff * (0.5 * m.rho2 as f64), rho2: m.rho2 - 2, ..*m });
            }
        }
        Expr::from_terms(out)
    }

    pub fn dzb(&self) -> Expr {
        let mut out = Vec::new();
        for m in &self.terms {
            if m.zb != 0 {
                out.push(Monomial { coeff: m.coeff * m.zb as f64, zb: m.zb - 1, ..*m });
            }
            if m.rho2 != 0 {
                out.push(Monomial { coeff: m.coeff * (-0.5 * m.rho2 as f64), rho2: m.rho2 - 2, ..*m });
            }
        }
        Expr::from_terms(out)
    }

    /// Axisymmetric Laplacian in n dimensions:
    /// 4 f_zz̄ − (2(n−2)/ρ)(f_z − f_z̄).
    pub fn lap(&self, dim: usize) -> Expr {
        let n2 = dim as f64 - 2.0;
        let dz = self.dz();
        let first = dz.dzb().scale(C64::new(4.0, 0.0));
        first.add(&dz.sub(&self.dzb()).mul_mono(C64::new(-2.0 * n2, 0.0), 0, 0, -2))
    }

    /// T f = (2/z)(f_z̄ − m f/ρ), m = (n−2)/2.
    pub fn t_op(&self, dim: usize) -> Expr {
        let m = 0.5 * (dim as f64 - 2.0);
        let inner = self.dzb().sub(&self.mul_mono(C64::new(m, 0.0), 0, 0, -2));
        inner.mul_mono(C64::new(2.0, 0.0), -1, 0, 0)
    }

    pub fn eval(&self, z: C64) -> C64 {
        self.terms.iter().map(|m| m.eval(z)).sum()
    }
}

/// a0 = ρ^{−m}(g0 + g1 z̄). With g1 = 0 this is the axis-symmetric
/// seed ρ^{−m} g0.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct AmplitudeSeed {
    pub g0: C64,
    pub g1: C64,
}

impl Default for AmplitudeSeed {
    fn default() -> Self {
        AmplitudeSeed { g0: C64::new(1.0, 0.0), g1: C64::new(1.0, 0.0) }
    }
}

impl AmplitudeSeed {
    pub fn constant(g0: C64) -> Self {
        AmplitudeSeed { g0, g1: ZERO }
    }

    pub fn a0(&self, dim: usize) -> Expr {
        let e2 = 2 - dim as i32;
        Expr::from_terms(vec![
            Monomial { coeff: self.g0, z: 0, zb: 0, rho2: e2 },
            Monomial { coeff: self.g1, z: 0, zb: 1, rho2: e2 },
        ])
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct AmplitudeOptions {
    /// Cells per axis of the z-rectangle.
    pub cells: usize,
    /// Cells of padding around the image of Ω.
    pub margin: usize,
    /// Axis clearance, as a fraction of diam Ω.
    pub r_min_fraction: f64,
}

impl Default for AmplitudeOptions {
    fn default() -> Self {
        AmplitudeOptions { cells: 128, margin: 12, r_min_fraction: 1e-2 }
    }
}

/// Value and first/mixed derivatives of one amplitude at a point.
#[derive(Debug, Clone, Copy, PartialEq, Default)]
pub struct Jet {
    pub v: C64,
    pub dz: C64,
    pub dzb: C64,
    pub dzzb: C64,
}

/// Axisymmetric operators on z-rectangle fields, by finite differences.
pub(crate) struct RectOps<'a> {
    pub rect: &'a ZRect,
    pub dim: usize,
    z: Vec<C64>,
}

impl<'a> RectOps<'a> {
    pub fn new(rect: &'a ZRect, dim: usize) -> Self {
        RectOps { rect, dim, z: rect.nodes() }
    }

    pub fn lap(&self, f: &[C64]) -> Vec<C64> {
        let n2 = self.dim as f64 - 2.0;
        let fz = self.rect.dz(f);
        let fzb = self.rect.dzb(f);
        let fzzb = self.rect.dzb(&fz);
        (0..f.len())
            .map(|i| {
                let rho = self.z[i] - self.z[i].conj();
                4.0 * fzzb[i] - 2.0 * n2 / rho * (fz[i] - fzb[i])
            })
            .collect()
    }

    pub fn t_op(&self, f: &[C64]) -> Vec<C64> {
        let m = 0.5 * (self.dim as f64 - 2.0);
        let fzb = self.rect.dzb(f);
        (0..f.len())
            .map(|i| {
                let z = self.z[i];
                2.0 / z * (fzb[i] - m * f[i] / (z - z.conj()))
            })
            .collect()
    }

    /// (ΔT + TΔ) f
    pub fn mixed(&self, f: &[C64]) -> Vec<C64> {
        let a = self.lap(&self.t_op(f));
        let b = self.t_op(&self.lap(f));
        a.iter().zip(&b).map(|(x, y)| x + y).collect()
    }
}

/// h-independent WKB amplitudes a0 (closed form) and a1, a2 (sampled on a
/// z-rectangle covering the image of Ω̄).
#[derive(Debug, Clone)]
pub struct Amplitudes {
    pub frame: Frame,
    pub kappa: f64,
    pub order: usize,
    pub seed: AmplitudeSeed,
    pub rect: ZRect,
    /// Rectangle node ranges [i0, i1) × [j0, j1) covering the image of Ω̄.
    pub image: [[usize; 2]; 2],
    pub a0: Expr,
    a0_jet: [Expr; 4],
    /// Per order k ≥ 1: value, ∂z, ∂z̄, ∂z∂z̄ on the rectangle.
    fields: Vec<[Vec<C64>; 4]>,
}

fn jet_fields(rect: &ZRect, a: Vec<C64>) -> [Vec<C64>; 4] {
    let dz = rect.dz(&a);
    let dzb = rect.dzb(&a);
    let dzzb = rect.dzb(&dz);
    [a, dz, dzb, dzzb]
}

/// Solves T²a = (4/z²)F for the particular solution a = ρ^{−m}C(C(ρ^m F)),
/// C the solid Cauchy transform.
fn invert_t2(ct: &CauchyTransform, dim: usize, z: &[C64], f: &[C64]) -> Vec<C64> {
    let e2 = dim as i32 - 2;
    let g: Vec<C64> = f.iter().zip(z).map(|(v, z)| v * rho_pow(*z, e2)).collect();
    let g = ct.apply(&ct.apply(&g));
    g.iter().zip(z).map(|(v, z)| v * rho_pow(*z, -e2)).collect()
}

/// Amplitudes up to `order` for the background operator with wave number κ.
pub fn build_amplitudes(
    grid: &Grid,
    frame: &Frame,
    kappa: f64,
    seed: AmplitudeSeed,
    order: usize,
    opts: &AmplitudeOptions,
) -> Result<Amplitudes> {
    if order > 2 {
        return invalid(format!("amplitude order {order} is not in 0..=2"));
    }
    let dim = frame.dim;
    let image: Vec<C64> = (0..grid.n_nodes())
        .filter(|&i| grid.kinds[i] != NodeKind::Exterior)
        .map(|i| frame.z_of(&grid.position(i)))
        .collect();
    let r_lo = image.iter().map(|z| z.im).fold(f64::INFINITY, f64::min);
    let r_min = opts.r_min_fraction * grid.domain.diameter();
    if !(r_lo >= r_min) {
        return invalid(format!(
            "axis clearance {r_lo:.3e} below r_min {r_min:.3e}: amplitudes would be ill-conditioned"
        ));
    }
    let rect = ZRect::covering(&image, opts.cells, opts.margin, 0.5 * r_lo)?;
    let cover = |lo: f64, s: f64, a: f64, b: f64, n: usize| -> [usize; 2] {
        let i0 = (((a - lo) / s).floor().max(0.0)) as usize;
        let i1 = ((((b - lo) / s).ceil()) as usize + 1).min(n);
        [i0, i1]
    };
    let (mut zlo, mut zhi) = (image[0], image[0]);
    for p in &image {
        zlo = C64::new(zlo.re.min(p.re), zlo.im.min(p.im));
        zhi = C64::new(zhi.re.max(p.re), zhi.im.max(p.im));
    }
    let image_range = [
        cover(rect.lo.re, rect.spacing[0], zlo.re, zhi.re, rect.counts[0]),
        cover(rect.lo.im, rect.spacing[1], zlo.im, zhi.im, rect.counts[1]),
    ];

    let a0 = seed.a0(dim);
    let a0_dz = a0.dz();
    let a0_jet = [a0.clone(), a0_dz.clone(), a0.dzb(), a0_dz.dzb()];
    let mut fields = Vec::new();
    if order >= 1 {
        let z = rect.nodes();
        let ct = CauchyTransform::new(&rect);
        let ops = RectOps::new(&rect, dim);
        let s0 = a0.t_op(dim).lap(dim).add(&a0.lap(dim).t_op(dim));
        let f1 = s0.mul_mono(C64::new(-0.125, 0.0), 2, 0, 0);
        let f1v: Vec<C64> = z.iter().map(|z| f1.eval(*z)).collect();
        let a1 = invert_t2(&ct, dim, &z, &f1v);
        if order >= 2 {
            let base = a0.lap(dim).lap(dim).add(&a0.scale(C64::new(kappa * kappa, 0.0)));
            let mixed = ops.mixed(&a1);
            let f2v: Vec<C64> = z
                .iter()
                .zip(&mixed)
                .map(|(z, m)| -(z * z) / 16.0 * (base.eval(*z) + 2.0 * m))
                .collect();
            let a2 = invert_t2(&ct, dim, &z, &f2v);
            fields.push(jet_fields(&rect, a1));
            fields.push(jet_fields(&rect, a2));
        } else {
            fields.push(jet_fields(&rect, a1));
        }
    }
    Ok(Amplitudes { frame: *frame, kappa, order, seed, rect, image: image_range, a0, a0_jet, fields })
}

impl Amplitudes {
    pub fn dim(&self) -> usize {
        self.frame.dim
    }

    /// a_k sampled on the rectangle nodes (k = 0 evaluated from closed form).
    pub fn field(&self, k: usize) -> Option<Vec<C64>> {
        match k {
            0 => Some(self.rect.sample(|z| self.a0.eval(z))),
            k if k <= self.order => Some(self.fields[k - 1][0].clone()),
            _ => None,
        }
    }

    /// Jets of a0, a1, a2 at z; orders above `order` are zero.
    pub fn jets(&self, z: C64) -> Result<[Jet; 3]> {
        let mut out = [Jet::default(); 3];
        let [v, dz, dzb, dzzb] = &self.a0_jet;
        out[0] = Jet { v: v.eval(z), dz: dz.eval(z), dzb: dzb.eval(z), dzzb: dzzb.eval(z) };
        for (k, f) in self.fields.iter().enumerate() {
            out[k + 1] = Jet {
                v: self.rect.interpolate(&f[0], z)?,
                dz: self.rect.interpolate(&f[1], z)?,
                dzb: self.rect.interpolate(&f[2], z)?,
                dzzb: self.rect.interpolate(&f[3], z)?,
            };
        }
        Ok(out)
    }

    pub(crate) fn ops(&self) -> RectOps<'_> {
        RectOps::new(&self.rect, self.dim())
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn close(a: C64, b: C64, tol: f64) -> bool {
        (a - b).norm() <= tol * b.norm().max(1.0)
    }

    #[test]
    fn derivatives_match_finite_differences() {
        let e = Expr::from_terms(vec![
            Monomial { coeff: C64::new(0.3, -1.0), z: 2, zb: 1, rho2: -3 },
            Monomial { coeff: C64::new(1.0, 0.5), z: -1, zb: 0, rho2: 1 },
        ]);
        let z = C64::new(0.4, 1.3);
        let d = 1e-6;
        let fx = (e.eval(z + d) - e.eval(z - d)) / (2.0 * d);
        let fy = (e.eval(z + C64::new(0.0, d)) - e.eval(z - C64::new(0.0, d))) / (2.0 * d);
        assert!(close(e.dz().eval(z), 0.5 * (fx - C64::i() * fy), 1e-8));
        assert!(close(e.dzb().eval(z), 0.5 * (fx + C64::i() * fy), 1e-8));
    }

    #[test]
    fn seed_solves_first_transport_equation() {
        for dim in [2, 3] {
            let a0 = AmplitudeSeed { g0: C64::new(1.0, 0.2), g1: C64::new(-0.5, 1.0) }.a0(dim);
            let t2 = a0.t_op(dim).t_op(dim);
            for z in [C64::new(0.3, 0.8), C64::new(-1.2, 2.1)] {
                assert!(t2.eval(z).norm() < 1e-13);
            }
        }
    }

    #[test]
    fn axis_seed_in_three_dimensions() {
        let a0 = AmplitudeSeed::constant(C64::new(1.0, 0.0)).a0(3);
        let z = C64::new(0.7, 1.9);
        let exact = C64::new(0.0, 2.0 * z.im).powf(-0.5);
        assert!(close(a0.eval(z), exact, 1e-14));
        assert!(a0.t_op(3).eval(z).norm() < 1e-14);
    }

    #[test]
    fn two_dimensional_seed_is_holomorphic_part() {
        let a0 = AmplitudeSeed::constant(C64::new(2.0, -1.0)).a0(2);
        assert_eq!(a0.terms().len(), 1);
        assert_eq!(a0.eval(C64::new(0.1, 0.9)), C64::new(2.0, -1.0));
    }

    #[test]
    fn laplacian_matches_cartesian_form() {
        // f = ρ^{-1/2} = (2ir)^{-1/2}; in 3D Δf = f_rr + f_r/r.
        let f = Expr::monomial(C64::new(1.0, 0.0), 0, 0, -1);
        let z = C64::new(0.2, 0.9);
        let r = z.im;
        let c = C64::new(0.0, 2.0).powf(-0.5);
        let exact = c * (0.75 * r.powf(-2.5) - 0.5 * r.powf(-2.5));
        assert!(close(f.lap(3).eval(z), exact, 1e-13));
    }
}
