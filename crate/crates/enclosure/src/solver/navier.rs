use num_complex::Complex64 as C64;
use serde::{Deserialize, Serialize};

use super::dst::DstSolver;
use super::krylov::{bicgstab, gmres, KrylovConfig, LinearOperator};
use super::sparse::Ilu0;
use super::system::{assemble_split_system, laplacian, SplitOperator};
use crate::error::{invalid, Error, Result};
use crate::geometry::{Grid, NodeKind};
use crate::media::MediumSpec;
use crate::sum::norm2;

const ZERO: C64 = C64::new(0.0, 0.0);

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum FieldRole {
    U,
    WSplit,
    Reflected,
}

/// One complex value per grid node; exterior nodes hold zero.
#[derive(Debug, Clone)]
pub struct Field {
    pub role: FieldRole,
    pub values: Vec<C64>,
}

/// Navier boundary data aligned with `Grid::boundary`.
#[derive(Debug, Clone, PartialEq)]
pub struct NavierData {
    pub f1: Vec<C64>,
    pub f2: Vec<C64>,
}

impl NavierData {
    pub fn from_fn(grid: &Grid, f1: impl Fn(&[f64; 3]) -> C64, f2: impl Fn(&[f64; 3]) -> C64) -> Self {
        NavierData {
            f1: grid.boundary.iter().map(|b| f1(&b.position)).collect(),
            f2: grid.boundary.iter().map(|b| f2(&b.position)).collect(),
        }
    }

    pub fn zeros(grid: &Grid) -> Self {
        NavierData { f1: vec![ZERO; grid.boundary.len()], f2: vec![ZERO; grid.boundary.len()] }
    }

    pub fn scaled(&self, s: C64) -> Self {
        NavierData {
            f1: self.f1.iter().map(|v| v * s).collect(),
            f2: self.f2.iter().map(|v| v * s).collect(),
        }
    }
}

/// Normal derivatives of u and Δu on the boundary nodes.
#[derive(Debug, Clone, PartialEq)]
pub struct DtnTrace {
    pub du_dnu: Vec<C64>,
    pub dlap_dnu: Vec<C64>,
}

#[derive(Debug, Clone, Default, Serialize, Deserialize)]
pub struct SolveReport {
    pub iterations: usize,
    pub residual: f64,
    pub history: Vec<f64>,
}

#[derive(Debug, Clone)]
pub struct Solution {
    pub u: Field,
    pub m: Field,
    pub report: SolveReport,
}

enum Backend {
    Dst(DstSolver),
    Sparse,
}

/// Forward solver for one (grid, medium) pair; reusable across data.
pub struct ForwardSolver<'a> {
    pub grid: &'a Grid,
    pub medium: &'a MediumSpec,
    op: SplitOperator<'a>,
    backend: Backend,
    pub config: KrylovConfig,
}

impl<'a> ForwardSolver<'a> {
    pub fn new(grid: &'a Grid, medium: &'a MediumSpec) -> Result<Self> {
        Self::with_config(grid, medium, KrylovConfig::default())
    }

    pub fn with_config(grid: &'a Grid, medium: &'a MediumSpec, config: KrylovConfig) -> Result<Self> {
        let op = SplitOperator::new(grid, medium)?;
        let backend = if grid.is_fitted_box() {
            Backend::Dst(DstSolver::new(grid, medium.kappa))
        } else {
            Backend::Sparse
        };
        Ok(ForwardSolver { grid, medium, op, backend, config })
    }

    /// Solves the interior rows for the correction to `lift`, whose
    /// boundary rows already hold the Navier data.
    fn solve_lifted(&self, lift: Vec<C64>, rhs_int: Vec<C64>) -> Result<(Vec<C64>, SolveReport)> {
        let n = self.grid.n_nodes();
        let mut ax = vec![ZERO; 2 * n];
        self.op.apply(&lift, &mut ax);
        let mut b = vec![ZERO; 2 * n];
        for &i in self.grid.interior() {
            b[i] = rhs_int[i] - ax[i];
            b[n + i] = rhs_int[n + i] - ax[n + i];
        }
        let out = match &self.backend {
            Backend::Dst(dst) if self.op.is_background() => {
                let mut z = vec![ZERO; 2 * n];
                dst.solve_full(&b, &mut z);
                let bn = norm2(&b);
                let res = if bn == 0.0 {
                    0.0
                } else {
                    let mut az = vec![ZERO; 2 * n];
                    self.op.apply(&z, &mut az);
                    let r: Vec<C64> = self.grid.interior().iter().flat_map(|&i| [b[i] - az[i], b[n + i] - az[n + i]]).collect();
                    norm2(&r) / bn
                };
                super::krylov::KrylovOutcome { x: z, iterations: 1, residual: res, history: vec![1.0, res], converged: res <= self.config.tol }
            }
            Backend::Dst(dst) => gmres(&self.op, dst, &b, &self.config),
            Backend::Sparse => return self.solve_sparse(lift, rhs_int),
        };
        if !out.converged {
            return Err(Error::Solver { iterations: out.iterations, residual: out.residual, history: out.history });
        }
        let mut x = lift;
        for (xi, zi) in x.iter_mut().zip(&out.x) {
            *xi += zi;
        }
        Ok((x, SolveReport { iterations: out.iterations, residual: out.residual, history: out.history }))
    }

    fn solve_sparse(&self, lift: Vec<C64>, rhs_int: Vec<C64>) -> Result<(Vec<C64>, SolveReport)> {
        let n = self.grid.n_nodes();
        let src: Vec<C64> = (0..n).map(|i| -rhs_int[n + i]).collect();
        let f1: Vec<C64> = self.grid.boundary.iter().map(|b| lift[b.node]).collect();
        let f2: Vec<C64> = self.grid.boundary.iter().map(|b| lift[n + b.node]).collect();
        let mut sys = assemble_split_system(self.grid, self.medium, Some(&src), Some((&f1, &f2)))?;
        let na = sys.active.len();
        for (c, &i) in sys.active.iter().enumerate() {
            if self.grid.kinds[i] == NodeKind::Interior {
                sys.rhs[c] = rhs_int[i];
            }
        }
        let ilu = Ilu0::new(&sys.matrix).ok_or_else(|| Error::Solver {
            iterations: 0,
            residual: f64::INFINITY,
            history: vec![],
        })?;
        let out = bicgstab(&sys.matrix, &ilu, &sys.rhs, &self.config);
        let out = if out.converged { out } else { gmres(&sys.matrix, &ilu, &sys.rhs, &self.config) };
        if !out.converged {
            return Err(Error::Solver { iterations: out.iterations, residual: out.residual, history: out.history });
        }
        let mut x = vec![ZERO; 2 * n];
        for (c, &i) in sys.active.iter().enumerate() {
            x[i] = out.x[c];
            x[n + i] = out.x[na + c];
        }
        Ok((x, SolveReport { iterations: out.iterations, residual: out.residual, history: out.history }))
    }

    /// Navier problem with data (f1, f2) and optional volume source.
    pub fn solve(&self, data: &NavierData, source: Option<&[C64]>) -> Result<Solution> {
        let n = self.grid.n_nodes();
        if data.f1.len() != self.grid.boundary.len() || data.f2.len() != self.grid.boundary.len() {
            return invalid("Navier data is not aligned with the boundary nodes");
        }
        let mut lift = vec![ZERO; 2 * n];
        for (k, b) in self.grid.boundary.iter().enumerate() {
            lift[b.node] = data.f1[k];
            lift[n + b.node] = data.f2[k];
        }
        let mut rhs = vec![ZERO; 2 * n];
        if let Some(src) = source {
            for &i in self.grid.interior() {
                rhs[n + i] = -src[i];
            }
        }
        let (x, report) = self.solve_lifted(lift, rhs)?;
        let (u, m) = x.split_at(n);
        Ok(Solution {
            u: Field { role: FieldRole::U, values: u.to_vec() },
            m: Field { role: FieldRole::WSplit, values: m.to_vec() },
            report,
        })
    }

    /// Reflected field w = u − v and its split partner, from homogeneous
    /// Navier data. `v`, `m_v` must be an exact discrete background solution.
    pub fn solve_reflected(&self, v: &[C64], m_v: &[C64]) -> Result<Solution> {
        let n = self.grid.n_nodes();
        let k2 = self.medium.kappa * self.medium.kappa;
        let mut rhs = vec![ZERO; 2 * n];
        for &i in self.grid.interior() {
            rhs[i] = -(1.0 - self.op.ginv[i]) * m_v[i];
            rhs[n + i] = -(self.op.k2n[i] - k2) * v[i];
        }
        for (i, coef) in &self.op.first_order {
            rhs[n + i] -= self.op.a_dot_d(coef, v, *i);
        }
        let (x, report) = self.solve_lifted(vec![ZERO; 2 * n], rhs)?;
        let (w, mw) = x.split_at(n);
        Ok(Solution {
            u: Field { role: FieldRole::Reflected, values: w.to_vec() },
            m: Field { role: FieldRole::Reflected, values: mw.to_vec() },
            report,
        })
    }

    pub fn operator(&self) -> &SplitOperator<'a> {
        &self.op
    }
}

pub fn solve_navier(grid: &Grid, medium: &MediumSpec, data: &NavierData, source: Option<&[C64]>) -> Result<Solution> {
    ForwardSolver::new(grid, medium)?.solve(data, source)
}

pub fn solve_reflected(grid: &Grid, medium: &MediumSpec, v: &[C64], m_v: &[C64]) -> Result<Solution> {
    ForwardSolver::new(grid, medium)?.solve_reflected(v, m_v)
}

/// Second-order one-sided or centred derivative along `axis` at `i`.
fn axis_derivative(g: &Grid, a: &[C64], i: usize, axis: usize) -> C64 {
    let s = g.spacing[axis];
    let ok = |j: Option<usize>| j.filter(|&j| g.kinds[j] != NodeKind::Exterior);
    let p1 = ok(g.neighbor(i, axis, 1));
    let m1 = ok(g.neighbor(i, axis, -1));
    match (m1, p1) {
        (Some(m), Some(p)) => (a[p] - a[m]) / (2.0 * s),
        (None, Some(p)) => match ok(g.neighbor(p, axis, 1)) {
            Some(pp) => (-3.0 * a[i] + 4.0 * a[p] - a[pp]) / (2.0 * s),
            None => (a[p] - a[i]) / s,
        },
        (Some(m), None) => match ok(g.neighbor(m, axis, -1)) {
            Some(mm) => (3.0 * a[i] - 4.0 * a[m] + a[mm]) / (2.0 * s),
            None => (a[i] - a[m]) / s,
        },
        (None, None) => ZERO,
    }
}

/// Box edge or corner: face normal derivatives averaged with the face
/// quadrature weights, so pairings stay second-order accurate.
fn edge_flux(g: &Grid, a: &[C64], i: usize) -> C64 {
    let ijk = g.ijk(i);
    let at_edge = |t: usize| ijk[t] == 0 || ijk[t] == g.counts[t] - 1;
    let mut acc = ZERO;
    let mut total = 0.0;
    for ax in (0..g.dim).filter(|&ax| at_edge(ax)) {
        let sign = if ijk[ax] == 0 { -1.0 } else { 1.0 };
        let w: f64 = (0..g.dim)
            .filter(|&t| t != ax)
            .map(|t| g.spacing[t] * if at_edge(t) { 0.5 } else { 1.0 })
            .product();
        acc += w * sign * axis_derivative(g, a, i, ax);
        total += w;
    }
    acc / total
}

/// Outward normal derivative of `a` at every boundary node. On box faces
/// the flux uses the boundary value of Δa supplied by `lap_b`.
pub fn normal_derivative(g: &Grid, a: &[C64], lap_b: impl Fn(usize) -> C64) -> Vec<C64> {
    g.boundary
        .iter()
        .enumerate()
        .map(|(k, b)| match b.face {
            Some(f) => {
                let i = b.node;
                let s = g.spacing[f.axis];
                let inner = g.neighbor(i, f.axis, -f.outward).unwrap();
                let mut tan = ZERO;
                for t in (0..g.dim).filter(|&t| t != f.axis) {
                    let st = g.stride(t);
                    tan += (a[i + st] - 2.0 * a[i] + a[i - st]) / (g.spacing[t] * g.spacing[t]);
                }
                (a[i] - a[inner]) / s + 0.5 * s * (lap_b(k) - tan)
            }
            None if g.is_fitted_box() => edge_flux(g, a, b.node),
            None => (0..g.dim)
                .map(|ax| b.normal[ax] * axis_derivative(g, a, b.node, ax))
                .sum(),
        })
        .collect()
}

/// DtN traces (∂νu, ∂ν(Δu)) from a converged split solution. Uses
/// Δu = m and Δm = −κ²u − source on ∂Ω, where the medium is background.
pub fn extract_dtn(grid: &Grid, kappa: f64, u: &[C64], m: &[C64], source: Option<&[C64]>) -> DtnTrace {
    let k2 = kappa * kappa;
    let du_dnu = normal_derivative(grid, u, |k| m[grid.boundary[k].node]);
    let dlap_dnu = normal_derivative(grid, m, |k| {
        let i = grid.boundary[k].node;
        -k2 * u[i] - source.map_or(ZERO, |s| s[i])
    });
    DtnTrace { du_dnu, dlap_dnu }
}

/// Interior discrete Laplacian of a full-grid array (zero elsewhere).
pub fn discrete_laplacian(grid: &Grid, a: &[C64]) -> Vec<C64> {
    let mut out = vec![ZERO; a.len()];
    for &i in grid.interior() {
        out[i] = laplacian(grid, a, i);
    }
    out
}
