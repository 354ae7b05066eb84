use std::f64::consts::PI;
use std::sync::Arc;

use num_complex::Complex64 as C64;
use rustfft::{Fft, FftPlanner};

use crate::error::{invalid, Result};

const ZERO: C64 = C64::new(0.0, 0.0);

/// Uniform node lattice on a rectangle of the z-plane. Node (i, j) sits at
/// lo + i·sx + i·j·sy and owns the cell of size sx × sy centred on it.
#[derive(Debug, Clone, PartialEq)]
pub struct ZRect {
    pub lo: C64,
    pub spacing: [f64; 2],
    pub counts: [usize; 2],
}

impl ZRect {
    pub fn new(lo: C64, hi: C64, counts: [usize; 2]) -> Result<Self> {
        if counts[0] < 5 || counts[1] < 5 {
            return invalid("z-rectangle needs at least 5 nodes per axis");
        }
        if !(hi.re > lo.re && hi.im > lo.im) {
            return invalid("z-rectangle has non-positive extent");
        }
        Ok(ZRect {
            lo,
            spacing: [
                (hi.re - lo.re) / (counts[0] - 1) as f64,
                (hi.im - lo.im) / (counts[1] - 1) as f64,
            ],
            counts,
        })
    }

    /// Rectangle with `cells` cells per axis whose central part, `margin`
    /// cells in from each edge, covers the points. The lower margin is cut
    /// back so the rectangle stays above Im z = floor_im.
    pub fn covering(points: &[C64], cells: usize, margin: usize, floor_im: f64) -> Result<Self> {
        if points.is_empty() {
            return invalid("no points to cover");
        }
        if cells < 2 * margin + 4 {
            return invalid("z-rectangle margin leaves no room for the image");
        }
        let (mut lo, mut hi) = (points[0], points[0]);
        for p in points {
            lo = C64::new(lo.re.min(p.re), lo.im.min(p.im));
            hi = C64::new(hi.re.max(p.re), hi.im.max(p.im));
        }
        if lo.im <= floor_im {
            return invalid("points reach below the admissible floor");
        }
        let inner = (cells - 2 * margin) as f64;
        let sx = (hi.re - lo.re).max(1e-12) / inner;
        let sy = (hi.im - lo.im).max(1e-12) / inner;
        let below = (((lo.im - floor_im) / sy).floor() as usize).min(margin);
        let above = 2 * margin - below;
        ZRect::new(
            C64::new(lo.re - margin as f64 * sx, lo.im - below as f64 * sy),
            C64::new(hi.re + margin as f64 * sx, hi.im + above as f64 * sy),
            [cells + 1, cells + 1],
        )
    }

    pub fn len(&self) -> usize {
        self.counts[0] * self.counts[1]
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    pub fn node(&self, i: usize, j: usize) -> C64 {
        self.lo + C64::new(i as f64 * self.spacing[0], j as f64 * self.spacing[1])
    }

    pub fn nodes(&self) -> Vec<C64> {
        let mut out = Vec::with_capacity(self.len());
        for j in 0..self.counts[1] {
            for i in 0..self.counts[0] {
                out.push(self.node(i, j));
            }
        }
        out
    }

    pub fn hi(&self) -> C64 {
        self.node(self.counts[0] - 1, self.counts[1] - 1)
    }

    /// Samples `f` at every node.
    pub fn sample(&self, f: impl Fn(C64) -> C64) -> Vec<C64> {
        self.nodes().into_iter().map(f).collect()
    }

    /// 4-point Lagrange interpolation per axis (bicubic).
    pub fn interpolate(&self, field: &[C64], z: C64) -> Result<C64> {
        let fx = (z.re - self.lo.re) / self.spacing[0];
        let fy = (z.im - self.lo.im) / self.spacing[1];
        let tol = 1e-9;
        let (nx, ny) = (self.counts[0] as f64, self.counts[1] as f64);
        if fx < -tol || fy < -tol || fx > nx - 1.0 + tol || fy > ny - 1.0 + tol {
            return invalid(format!("point {z} lies outside the z-rectangle"));
        }
        let (i0, wx) = lagrange4(fx, self.counts[0]);
        let (j0, wy) = lagrange4(fy, self.counts[1]);
        let mut acc = ZERO;
        for (b, wyb) in wy.iter().enumerate() {
            let row = (j0 + b) * self.counts[0];
            for (a, wxa) in wx.iter().enumerate() {
                acc += field[row + i0 + a] * (wxa * wyb);
            }
        }
        Ok(acc)
    }

    /// Fourth-order derivative along Re z (axis 0) or Im z (axis 1), with
    /// one-sided stencils next to the edges.
    pub fn derivative(&self, f: &[C64], axis: usize) -> Vec<C64> {
        let [nx, ny] = self.counts;
        let (n, stride) = if axis == 0 { (nx, 1) } else { (ny, nx) };
        let s = 12.0 * self.spacing[axis];
        let mut out = vec![ZERO; f.len()];
        for idx in 0..f.len() {
            let k = if axis == 0 { idx % nx } else { idx / nx };
            let at = |o: i64| f[(idx as i64 + o * stride as i64) as usize];
            out[idx] = if k >= 2 && k + 2 < n {
                at(-2) - 8.0 * at(-1) + 8.0 * at(1) - at(2)
            } else if k == 0 {
                -25.0 * at(0) + 48.0 * at(1) - 36.0 * at(2) + 16.0 * at(3) - 3.0 * at(4)
            } else if k == 1 {
                -3.0 * at(-1) - 10.0 * at(0) + 18.0 * at(1) - 6.0 * at(2) + at(3)
            } else if k + 1 == n {
                25.0 * at(0) - 48.0 * at(-1) + 36.0 * at(-2) - 16.0 * at(-3) + 3.0 * at(-4)
            } else {
                3.0 * at(1) + 10.0 * at(0) - 18.0 * at(-1) + 6.0 * at(-2) - at(-3)
            } / s;
        }
        let _ = ny;
        out
    }

    /// ∂/∂z = ½(∂x − i∂y).
    pub fn dz(&self, f: &[C64]) -> Vec<C64> {
        let fx = self.derivative(f, 0);
        let fy = self.derivative(f, 1);
        fx.iter().zip(&fy).map(|(a, b)| 0.5 * (a - C64::i() * b)).collect()
    }

    /// ∂/∂z̄ = ½(∂x + i∂y).
    pub fn dzb(&self, f: &[C64]) -> Vec<C64> {
        let fx = self.derivative(f, 0);
        let fy = self.derivative(f, 1);
        fx.iter().zip(&fy).map(|(a, b)| 0.5 * (a + C64::i() * b)).collect()
    }
}

fn lagrange4(f: f64, n: usize) -> (usize, [f64; 4]) {
    let i0 = (f.floor() as i64 - 1).clamp(0, n as i64 - 4) as usize;
    let x = f - i0 as f64;
    let mut w = [1.0; 4];
    for (a, wa) in w.iter_mut().enumerate() {
        for b in 0..4 {
            if a != b {
                *wa *= (x - b as f64) / (a as f64 - b as f64);
            }
        }
    }
    (i0, w)
}

/// ∬ over [x1,x2]×[y1,y2] of 1/(X + iY) dX dY, from the corner values of
/// the antiderivatives of X/(X²+Y²) and Y/(X²+Y²).
fn rect_integral(x1: f64, x2: f64, y1: f64, y2: f64) -> C64 {
    let g = |x: f64, y: f64| -> C64 {
        let r2 = x * x + y * y;
        let l = if r2 > 0.0 { r2.ln() } else { 0.0 };
        let g1 = 0.5 * y * l + if x != 0.0 { x * (y / x).atan() } else { 0.0 };
        let g2 = 0.5 * x * l + if y != 0.0 { y * (x / y).atan() } else { 0.0 };
        C64::new(g1, -g2)
    };
    g(x2, y2) - g(x1, y2) - g(x2, y1) + g(x1, y1)
}

/// Weight of a unit density on the cell centred at offset −(p, q) for
/// the transform evaluated at the origin: (1/π)∬_cell dA/(z − ζ).
pub fn cell_kernel(p: f64, q: f64, sx: f64, sy: f64) -> C64 {
    rect_integral(p - 0.5 * sx, p + 0.5 * sx, q - 0.5 * sy, q + 0.5 * sy) / PI
}

/// Solid Cauchy transform on a fixed rectangle: density constant on each
/// node cell, exact cell integrals, linear convolution by zero-padded FFT.
pub struct CauchyTransform {
    rect: ZRect,
    pad: [usize; 2],
    kernel_hat: Vec<C64>,
    row: (Arc<dyn Fft<f64>>, Arc<dyn Fft<f64>>),
    col: (Arc<dyn Fft<f64>>, Arc<dyn Fft<f64>>),
}

impl CauchyTransform {
    pub fn new(rect: &ZRect) -> Self {
        let [nx, ny] = rect.counts;
        let pad = [2 * nx, 2 * ny];
        let mut planner = FftPlanner::new();
        let row = (planner.plan_fft_forward(pad[0]), planner.plan_fft_inverse(pad[0]));
        let col = (planner.plan_fft_forward(pad[1]), planner.plan_fft_inverse(pad[1]));
        let mut kernel = vec![ZERO; pad[0] * pad[1]];
        let [sx, sy] = rect.spacing;
        for b in -(ny as i64 - 1)..ny as i64 {
            for a in -(nx as i64 - 1)..nx as i64 {
                let ia = a.rem_euclid(pad[0] as i64) as usize;
                let ib = b.rem_euclid(pad[1] as i64) as usize;
                kernel[ia + pad[0] * ib] = cell_kernel(a as f64 * sx, b as f64 * sy, sx, sy);
            }
        }
        let mut ct = CauchyTransform { rect: rect.clone(), pad, kernel_hat: Vec::new(), row, col };
        ct.fft2(&mut kernel, false);
        ct.kernel_hat = kernel;
        ct
    }

    pub fn rect(&self) -> &ZRect {
        &self.rect
    }

    fn fft2(&self, buf: &mut [C64], inverse: bool) {
        let [px, py] = self.pad;
        let (rf, cf) = if inverse { (&self.row.1, &self.col.1) } else { (&self.row.0, &self.col.0) };
        for r in buf.chunks_exact_mut(px) {
            rf.process(r);
        }
        let mut column = vec![ZERO; py];
        for i in 0..px {
            for j in 0..py {
                column[j] = buf[i + px * j];
            }
            cf.process(&mut column);
            for j in 0..py {
                buf[i + px * j] = column[j];
            }
        }
    }

    /// u(z) = (1/π)∬ f(ζ)/(z − ζ) dA(ζ) at every node.
    pub fn apply(&self, f: &[C64]) -> Vec<C64> {
        let [nx, ny] = self.rect.counts;
        let [px, py] = self.pad;
        assert_eq!(f.len(), nx * ny, "density does not match the rectangle");
        let mut buf = vec![ZERO; px * py];
        for j in 0..ny {
            buf[px * j..px * j + nx].copy_from_slice(&f[nx * j..nx * (j + 1)]);
        }
        self.fft2(&mut buf, false);
        for (b, k) in buf.iter_mut().zip(&self.kernel_hat) {
            *b *= k;
        }
        self.fft2(&mut buf, true);
        let scale = 1.0 / (px * py) as f64;
        let mut out = vec![ZERO; nx * ny];
        for j in 0..ny {
            for i in 0..nx {
                out[i + nx * j] = buf[i + px * j] * scale;
            }
        }
        out
    }
}

/// One solution of ∂u/∂z̄ = f on the rectangle.
pub fn solve_dbar(rect: &ZRect, f: &[C64]) -> Vec<C64> {
    CauchyTransform::new(rect).apply(f)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn kernel_far_field() {
        let (sx, sy) = (0.01, 0.02);
        let k = cell_kernel(3.0, -2.0, sx, sy);
        let n = 200;
        let mut mid = C64::new(0.0, 0.0);
        for i in 0..n {
            for j in 0..n {
                let x = 3.0 - 0.5 * sx + (i as f64 + 0.5) * sx / n as f64;
                let y = -2.0 - 0.5 * sy + (j as f64 + 0.5) * sy / n as f64;
                mid += 1.0 / C64::new(x, y);
            }
        }
        let mid = mid * sx * sy / (n * n) as f64 / PI;
        assert!((k - mid).norm() < 1e-8 * mid.norm());
    }

    #[test]
    fn kernel_self_cell_vanishes_for_square() {
        assert!(cell_kernel(0.0, 0.0, 0.1, 0.1).norm() < 1e-15);
    }

    #[test]
    fn zero_density() {
        let r = ZRect::new(C64::new(-1.0, 0.5), C64::new(1.0, 2.0), [17, 13]).unwrap();
        let u = solve_dbar(&r, &vec![ZERO; r.len()]);
        assert!(u.iter().all(|v| v.norm() == 0.0));
    }

    #[test]
    fn derivative_exact_on_quartics() {
        let r = ZRect::new(C64::new(-1.0, 0.5), C64::new(1.0, 2.0), [11, 9]).unwrap();
        let f = r.sample(|z| z * z * z * z.conj());
        let d = r.dzb(&f);
        for (v, z) in d.iter().zip(r.nodes()) {
            assert!((v - z * z * z).norm() < 1e-10);
        }
    }

    #[test]
    fn interpolation_exact_on_cubics() {
        let r = ZRect::new(C64::new(0.0, 1.0), C64::new(2.0, 3.0), [9, 9]).unwrap();
        let p = |z: C64| z * z * z + z.conj() * z;
        let f = r.sample(p);
        for z in [C64::new(0.01, 1.0), C64::new(1.33, 2.71), C64::new(2.0, 3.0)] {
            assert!((r.interpolate(&f, z).unwrap() - p(z)).norm() < 1e-11);
        }
        assert!(r.interpolate(&f, C64::new(2.5, 2.0)).is_err());
    }
}
