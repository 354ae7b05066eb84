//! Restarted GMRES and BiCGSTAB for complex systems.

use num_complex::Complex64 as C64;

use crate::sum::{dotc, norm2};

pub trait LinearOperator {
    fn dim(&self) -> usize;
    fn apply(&self, x: &[C64], y: &mut [C64]);
}

pub trait Preconditioner {
    fn apply(&self, r: &[C64], z: &mut [C64]);
}

pub struct Identity;

impl Preconditioner for Identity {
    fn apply(&self, r: &[C64], z: &mut [C64]) {
        z.copy_from_slice(r);
    }
}

#[derive(Debug, Clone, Copy)]
pub struct KrylovConfig {
    pub tol: f64,
    pub max_iter: usize,
    pub restart: usize,
}

impl Default for KrylovConfig {
    fn default() -> Self {
        KrylovConfig { tol: 1e-10, max_iter: 20000, restart: 60 }
    }
}

#[derive(Debug, Clone)]
pub struct KrylovOutcome {
    pub x: Vec<C64>,
    pub iterations: usize,
    pub residual: f64,
    pub history: Vec<f64>,
    pub converged: bool,
}

fn true_residual(op: &dyn LinearOperator, b: &[C64], x: &[C64], bnorm: f64) -> f64 {
    let mut ax = vec![C64::new(0.0, 0.0); b.len()];
    op.apply(x, &mut ax);
    for (a, bi) in ax.iter_mut().zip(b) {
        *a = bi - *a;
    }
    norm2(&ax) / bnorm
}

fn givens(a: C64, b: C64) -> (f64, C64) {
    let an = a.norm();
    if an == 0.0 {
        return (0.0, C64::new(1.0, 0.0));
    }
    let r = (an * an + b.norm_sqr()).sqrt();
    let c = an / r;
    let s = (a / an) * b.conj() / r;
    (c, s)
}

/// Right-preconditioned GMRES(m) starting from zero. The reported residual
/// is the true relative residual ‖b − Ax‖/‖b‖.
pub fn gmres(
    op: &dyn LinearOperator,
    prec: &dyn Preconditioner,
    b: &[C64],
    cfg: &KrylovConfig,
) -> KrylovOutcome {
    let n = op.dim();
    let zero = C64::new(0.0, 0.0);
    let bnorm = norm2(b);
    let mut x = vec![zero; n];
    if bnorm == 0.0 {
        return KrylovOutcome { x, iterations: 0, residual: 0.0, history: vec![0.0], converged: true };
    }
    let mut history = vec![1.0];
    let mut iters = 0;
    let mut r = b.to_vec();
    let mut rel = 1.0;
    let mut w = vec![zero; n];
    let mut z = vec![zero; n];
    while iters < cfg.max_iter {
        let beta = norm2(&r);
        let m = cfg.restart.min(cfg.max_iter - iters);
        let mut basis: Vec<Vec<C64>> = vec![r.iter().map(|v| v / beta).collect()];
        let mut hess: Vec<Vec<C64>> = Vec::new();
        let mut cs: Vec<(f64, C64)> = Vec::new();
        let mut g = vec![C64::new(beta, 0.0)];
        let mut k = 0;
        while k < m {
            prec.apply(&basis[k], &mut z);
            op.apply(&z, &mut w);
            let mut h = vec![zero; k + 2];
            for (j, vj) in basis.iter().enumerate() {
                let hj = dotc(vj, &w);
                h[j] = hj;
                for (wi, vi) in w.iter_mut().zip(vj) {
                    *wi -= hj * vi;
                }
            }
            let hn = norm2(&w);
            h[k + 1] = C64::new(hn, 0.0);
            for (j, &(c, s)) in cs.iter().enumerate() {
                let t = c * h[j] + s * h[j + 1];
                h[j + 1] = -s.conj() * h[j] + c * h[j + 1];
                h[j] = t;
            }
            let (c, s) = givens(h[k], h[k + 1]);
            h[k] = c * h[k] + s * h[k + 1];
            h[k + 1] = zero;
            cs.push((c, s));
            let gk = g[k];
            g.push(-s.conj() * gk);
            g[k] = c * gk;
            hess.push(h);
            k += 1;
            iters += 1;
            rel = g[k].norm() / bnorm;
            history.push(rel);
            if rel <= cfg.tol || hn == 0.0 {
                break;
            }
            basis.push(w.iter().map(|v| v / hn).collect());
        }
        let mut y = vec![zero; k];
        for i in (0..k).rev() {
            let mut acc = g[i];
            for j in i + 1..k {
                acc -= hess[j][i] * y[j];
            }
            y[i] = acc / hess[i][i];
        }
        let mut update = vec![zero; n];
        for (j, yj) in y.iter().enumerate() {
            for (u, v) in update.iter_mut().zip(&basis[j]) {
                *u += yj * v;
            }
        }
        prec.apply(&update, &mut z);
        for (xi, zi) in x.iter_mut().zip(&z) {
            *xi += zi;
        }
        op.apply(&x, &mut w);
        for i in 0..n {
            r[i] = b[i] - w[i];
        }
        rel = norm2(&r) / bnorm;
        if rel <= cfg.tol {
            return KrylovOutcome { x, iterations: iters, residual: rel, history, converged: true };
        }
    }
    KrylovOutcome { x, iterations: iters, residual: rel, history, converged: false }
}

/// Right-preconditioned BiCGSTAB starting from zero.
pub fn bicgstab(
    op: &dyn LinearOperator,
    prec: &dyn Preconditioner,
    b: &[C64],
    cfg: &KrylovConfig,
) -> KrylovOutcome {
    let n = op.dim();
    let zero = C64::new(0.0, 0.0);
    let bnorm = norm2(b);
    let mut x = vec![zero; n];
    if bnorm == 0.0 {
        return KrylovOutcome { x, iterations: 0, residual: 0.0, history: vec![0.0], converged: true };
    }
    let mut r = b.to_vec();
    let r0 = r.clone();
    let mut p = vec![zero; n];
    let mut v = vec![zero; n];
    let mut ph = vec![zero; n];
    let mut sh = vec![zero; n];
    let mut t = vec![zero; n];
    let (mut rho, mut alpha, mut omega) = (C64::new(1.0, 0.0), C64::new(1.0, 0.0), C64::new(1.0, 0.0));
    let mut history = vec![1.0];
    for it in 1..=cfg.max_iter {
        let rho_new = dotc(&r0, &r);
        if rho_new.norm() == 0.0 {
            break;
        }
        let beta = (rho_new / rho) * (alpha / omega);
        rho = rho_new;
        for i in 0..n {
            p[i] = r[i] + beta * (p[i] - omega * v[i]);
        }
        prec.apply(&p, &mut ph);
        op.apply(&ph, &mut v);
        alpha = rho / dotc(&r0, &v);
        for i in 0..n {
            r[i] -= alpha * v[i];
            x[i] += alpha * ph[i];
        }
        let s_rel = norm2(&r) / bnorm;
        if s_rel <= cfg.tol {
            history.push(s_rel);
            let res = true_residual(op, b, &x, bnorm);
            return KrylovOutcome { x, iterations: it, residual: res, history, converged: res <= cfg.tol * 10.0 };
        }
        prec.apply(&r, &mut sh);
        op.apply(&sh, &mut t);
        let tt = dotc(&t, &t);
        omega = if tt.norm() == 0.0 { zero } else { dotc(&t, &r) / tt };
        for i in 0..n {
            x[i] += omega * sh[i];
            r[i] -= omega * t[i];
        }
        let rel = norm2(&r) / bnorm;
        history.push(rel);
        if rel <= cfg.tol {
            let res = true_residual(op, b, &x, bnorm);
            return KrylovOutcome { x, iterations: it, residual: res, history, converged: res <= cfg.tol * 10.0 };
        }
        if omega.norm() == 0.0 {
            break;
        }
    }
    let res = true_residual(op, b, &x, bnorm);
    let iterations = history.len() - 1;
    KrylovOutcome { x, iterations, residual: res, history, converged: false }
}

#[cfg(test)]
mod tests {
    use super::super::sparse::{CsrMatrix, Ilu0};
    use super::*;

    fn laplace_like(n: usize, shift: C64) -> CsrMatrix {
        let rows = (0..n)
            .map(|i| {
                let mut r = vec![(i, C64::new(2.0, 0.0) + shift)];
                if i > 0 {
                    r.push((i - 1, C64::new(-1.0, 0.0)));
                }
                if i + 1 < n {
                    r.push((i + 1, C64::new(-1.0, 0.0)));
                }
                r
            })
            .collect();
        CsrMatrix::from_rows(rows)
    }

    #[test]
    fn gmres_solves_indefinite_complex() {
        let a = laplace_like(200, C64::new(-0.3, 0.05));
        let x: Vec<C64> = (0..200).map(|i| C64::new((i as f64).sin(), 0.5)).collect();
        let mut b = vec![C64::new(0.0, 0.0); 200];
        a.matvec(&x, &mut b);
        let out = gmres(&a, &Identity, &b, &KrylovConfig { restart: 40, ..Default::default() });
        assert!(out.converged, "{}", out.residual);
        let err: f64 = out.x.iter().zip(&x).map(|(u, v)| (u - v).norm()).fold(0.0, f64::max);
        assert!(err < 1e-6);
    }

    #[test]
    fn bicgstab_with_ilu() {
        let a = laplace_like(300, C64::new(0.1, 0.2));
        let b: Vec<C64> = (0..300).map(|i| C64::new(1.0, (i % 7) as f64)).collect();
        let ilu = Ilu0::new(&a).unwrap();
        let out = bicgstab(&a, &ilu, &b, &KrylovConfig::default());
        assert!(out.converged && out.residual <= 1e-9);
        assert!(out.iterations <= 3);
    }

    #[test]
    fn zero_rhs() {
        let a = laplace_like(10, C64::new(1.0, 0.0));
        let out = gmres(&a, &Identity, &vec![C64::new(0.0, 0.0); 10], &KrylovConfig::default());
        assert!(out.converged && out.x.iter().all(|v| v.norm() == 0.0));
    }
}
