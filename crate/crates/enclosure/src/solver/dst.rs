//! Fast solver for the background split operator on box grids.
//!
//! With homogeneous Dirichlet rows the discrete Laplacian on the interior
//! sub-box is diagonal in the DST-I basis, so the coupled system
//! Δu − m = b1, Δm + κ²u = b2 decouples per mode.

use std::sync::Arc;

use num_complex::Complex64 as C64;
use rustfft::{Fft, FftPlanner};

use super::krylov::Preconditioner;
use crate::geometry::Grid;

pub struct DstSolver {
    dims: [usize; 3],
    plans: Vec<Option<Arc<dyn Fft<f64>>>>,
    lambda: Vec<f64>,
    kappa2: f64,
    norm: f64,
    /// Full-grid node index of each compact interior entry.
    map: Vec<usize>,
}

impl DstSolver {
    pub fn new(grid: &Grid, kappa: f64) -> Self {
        assert!(grid.is_fitted_box(), "DST solver needs a box grid");
        let mut dims = [1; 3];
        for (a, d) in dims.iter_mut().enumerate().take(grid.dim) {
            *d = grid.counts[a] - 2;
        }
        let mut planner = FftPlanner::new();
        let plans = (0..3)
            .map(|a| (dims[a] > 1 || a < grid.dim).then(|| planner.plan_fft_forward(2 * (dims[a] + 1))))
            .collect();
        let eig: Vec<Vec<f64>> = (0..3)
            .map(|a| {
                if a >= grid.dim {
                    return vec![0.0];
                }
                let s = grid.spacing[a];
                (1..=dims[a])
                    .map(|j| {
                        let t = (std::f64::consts::PI * j as f64 / (2.0 * (dims[a] + 1) as f64)).sin();
                        4.0 / (s * s) * t * t
                    })
                    .collect()
            })
            .collect();
        let mut lambda = Vec::with_capacity(dims.iter().product());
        for k in 0..dims[2] {
            for j in 0..dims[1] {
                for i in 0..dims[0] {
                    lambda.push(eig[0][i] + eig[1][j] + eig[2][k]);
                }
            }
        }
        let norm = (0..grid.dim).map(|a| 2.0 / (dims[a] + 1) as f64).product();
        let mut map = Vec::with_capacity(lambda.len());
        for k in 0..dims[2] {
            for j in 0..dims[1] {
                for i in 0..dims[0] {
                    let ijk = if grid.dim == 2 { [i + 1, j + 1, 0] } else { [i + 1, j + 1, k + 1] };
                    map.push(grid.index(ijk));
                }
            }
        }
        DstSolver { dims, plans, lambda, kappa2: kappa * kappa, norm, map }
    }

    pub fn len(&self) -> usize {
        self.lambda.len()
    }

    pub fn is_empty(&self) -> bool {
        self.lambda.is_empty()
    }

    fn transform(&self, data: &mut [C64]) {
        let half = C64::new(0.0, 0.5);
        for axis in 0..3 {
            let Some(plan) = &self.plans[axis] else { continue };
            let m = self.dims[axis];
            let len = 2 * (m + 1);
            let stride: usize = self.dims[..axis].iter().product();
            let lines = data.len() / m;
            let mut buf = vec![C64::new(0.0, 0.0); lines * len];
            let mut starts = Vec::with_capacity(lines);
            for base in 0..data.len() {
                if (base / stride) % m == 0 {
                    starts.push(base);
                }
            }
            for (l, &st) in starts.iter().enumerate() {
                let line = &mut buf[l * len..(l + 1) * len];
                for j in 0..m {
                    let v = data[st + j * stride];
                    line[j + 1] = v;
                    line[len - 1 - j] = -v;
                }
            }
            plan.process(&mut buf);
            for (l, &st) in starts.iter().enumerate() {
                let line = &buf[l * len..(l + 1) * len];
                for j in 0..m {
                    data[st + j * stride] = line[j + 1] * half;
                }
            }
        }
    }

    /// Solves the interior system with zero boundary values; inputs and
    /// outputs are compact interior arrays.
    pub fn solve_compact(&self, b1: &mut [C64], b2: &mut [C64]) {
        self.transform(b1);
        self.transform(b2);
        for i in 0..self.lambda.len() {
            let lam = self.lambda[i];
            let u = (b2[i] - lam * b1[i]) / (lam * lam + self.kappa2);
            let m = -lam * u - b1[i];
            b1[i] = u * self.norm;
            b2[i] = m * self.norm;
        }
        self.transform(b1);
        self.transform(b2);
    }

    /// Same as `solve_compact` on full-grid arrays laid out as [u; m].
    pub fn solve_full(&self, r: &[C64], z: &mut [C64]) {
        let n = z.len() / 2;
        let mut b1: Vec<C64> = self.map.iter().map(|&i| r[i]).collect();
        let mut b2: Vec<C64> = self.map.iter().map(|&i| r[n + i]).collect();
        self.solve_compact(&mut b1, &mut b2);
        z.iter_mut().for_each(|v| *v = C64::new(0.0, 0.0));
        for (k, &i) in self.map.iter().enumerate() {
            z[i] = b1[k];
            z[n + i] = b2[k];
        }
    }
}

impl Preconditioner for DstSolver {
    fn apply(&self, r: &[C64], z: &mut [C64]) {
        self.solve_full(r, z);
    }
}
