//! Discrete split operator: unknowns (u, m) with m = γ̃Δu.

use num_complex::Complex64 as C64;

use super::krylov::LinearOperator;
use super::sparse::CsrMatrix;
use crate::error::{invalid, Result};
use crate::geometry::{Grid, NodeKind};
use crate::media::MediumSpec;

const I: C64 = C64::new(0.0, 1.0);
const ZERO: C64 = C64::new(0.0, 0.0);

/// Node-wise coefficients of the split system on one grid.
#[derive(Debug, Clone)]
pub struct SplitOperator<'a> {
    pub grid: &'a Grid,
    pub kappa: f64,
    /// 1/γ̃ per node.
    pub ginv: Vec<C64>,
    /// κ²ñ per node.
    pub k2n: Vec<C64>,
    /// Nodes where Ã ≠ 0.
    pub first_order: Vec<(usize, [C64; 3])>,
    background: bool,
}

impl<'a> SplitOperator<'a> {
    pub fn new(grid: &'a Grid, medium: &MediumSpec) -> Result<Self> {
        let n = grid.n_nodes();
        let k2 = medium.kappa * medium.kappa;
        let mut ginv = vec![C64::new(1.0, 0.0); n];
        let mut k2n = vec![C64::new(k2, 0.0); n];
        let mut first_order = Vec::new();
        let mut background = true;
        if medium.shape.is_some() {
            for i in 0..n {
                if grid.kinds[i] == NodeKind::Exterior {
                    continue;
                }
                let c = medium.evaluate_coefficients(&grid.position(i));
                if c.is_background() {
                    continue;
                }
                if c.gamma.norm() < 1e-14 {
                    return invalid("gamma vanishes at a grid node; the split system is singular");
                }
                if grid.kinds[i] == NodeKind::Boundary {
                    return invalid("coefficients must equal the background on the boundary");
                }
                background = false;
                ginv[i] = 1.0 / c.gamma;
                k2n[i] = k2 * c.n;
                if c.a.iter().any(|a| a.norm() > 0.0) {
                    first_order.push((i, c.a));
                }
            }
        }
        Ok(SplitOperator { grid, kappa: medium.kappa, ginv, k2n, first_order, background })
    }

    pub fn is_background(&self) -> bool {
        self.background
    }

    /// Five/seven-point Laplacian at an interior node.
    #[inline]
    pub fn laplacian(&self, a: &[C64], i: usize) -> C64 {
        laplacian(self.grid, a, i)
    }

    /// Ã·D a with D = −i∇, centred differences.
    #[inline]
    pub fn a_dot_d(&self, coef: &[C64; 3], a: &[C64], i: usize) -> C64 {
        let g = self.grid;
        let mut acc = ZERO;
        for k in 0..g.dim {
            let st = g.stride(k);
            acc += coef[k] * (a[i + st] - a[i - st]) / (2.0 * g.spacing[k]);
        }
        -I * acc
    }
}

#[inline]
pub fn laplacian(g: &Grid, a: &[C64], i: usize) -> C64 {
    let mut acc = ZERO;
    for k in 0..g.dim {
        let st = g.stride(k);
        let h2 = g.spacing[k] * g.spacing[k];
        acc += (a[i + st] - 2.0 * a[i] + a[i - st]) / h2;
    }
    acc
}

impl LinearOperator for SplitOperator<'_> {
    fn dim(&self) -> usize {
        2 * self.grid.n_nodes()
    }

    /// Full-grid layout [u; m]; non-interior rows act as the identity.
    fn apply(&self, x: &[C64], y: &mut [C64]) {
        let n = self.grid.n_nodes();
        let (u, m) = x.split_at(n);
        y.copy_from_slice(x);
        let (yu, ym) = y.split_at_mut(n);
        for &i in self.grid.interior() {
            yu[i] = laplacian(self.grid, u, i) - self.ginv[i] * m[i];
            ym[i] = laplacian(self.grid, m, i) + self.k2n[i] * u[i];
        }
        for (i, coef) in &self.first_order {
            ym[*i] += self.a_dot_d(coef, u, *i);
        }
    }
}

/// Assembled system over active (interior and boundary) nodes, ordered
/// [u rows; m rows].
#[derive(Debug, Clone)]
pub struct SplitSystem {
    pub matrix: CsrMatrix,
    pub rhs: Vec<C64>,
    /// Grid node of each compact index.
    pub active: Vec<usize>,
}

/// Boundary rows carry f1 and f2 when given, interior rows 0 and −source.
pub fn assemble_split_system(
    grid: &Grid,
    medium: &MediumSpec,
    source: Option<&[C64]>,
    data: Option<(&[C64], &[C64])>,
) -> Result<SplitSystem> {
    let op = SplitOperator::new(grid, medium)?;
    let n = grid.n_nodes();
    let mut compact = vec![usize::MAX; n];
    let mut active = Vec::with_capacity(grid.n_active());
    for i in 0..n {
        if grid.kinds[i] != NodeKind::Exterior {
            compact[i] = active.len();
            active.push(i);
        }
    }
    let na = active.len();
    let mut first: Vec<Option<[C64; 3]>> = vec![None; n];
    for (i, c) in &op.first_order {
        first[*i] = Some(*c);
    }
    let mut urows = Vec::with_capacity(na);
    let mut mrows = Vec::with_capacity(na);
    let mut rhs = vec![ZERO; 2 * na];
    for (c, &i) in active.iter().enumerate() {
        if grid.kinds[i] == NodeKind::Boundary {
            urows.push(vec![(c, C64::new(1.0, 0.0))]);
            mrows.push(vec![(na + c, C64::new(1.0, 0.0))]);
            if let Some((f1, f2)) = data {
                let b = grid.boundary_slot(i).unwrap();
                rhs[c] = f1[b];
                rhs[na + c] = f2[b];
            }
            continue;
        }
        let mut lap = Vec::with_capacity(2 * grid.dim + 1);
        let mut diag = 0.0;
        for k in 0..grid.dim {
            let h2 = grid.spacing[k] * grid.spacing[k];
            diag -= 2.0 / h2;
            for d in [-1, 1] {
                let j = grid.neighbor(i, k, d).unwrap();
                lap.push((compact[j], C64::new(1.0 / h2, 0.0)));
            }
        }
        lap.push((c, C64::new(diag, 0.0)));
        let mut ur = lap.clone();
        ur.push((na + c, -op.ginv[i]));
        let mut mr: Vec<(usize, C64)> = lap.iter().map(|(j, v)| (na + j, *v)).collect();
        mr.push((c, op.k2n[i]));
        if let Some(coef) = first[i] {
            for k in 0..grid.dim {
                let w = -I * coef[k] / (2.0 * grid.spacing[k]);
                mr.push((compact[grid.neighbor(i, k, 1).unwrap()], w));
                mr.push((compact[grid.neighbor(i, k, -1).unwrap()], -w));
            }
        }
        urows.push(ur);
        mrows.push(mr);
        if let Some(src) = source {
            rhs[na + c] = -src[i];
        }
    }
    urows.extend(mrows);
    Ok(SplitSystem { matrix: CsrMatrix::from_rows(urows), rhs, active })
}
