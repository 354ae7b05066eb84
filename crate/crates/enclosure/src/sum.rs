//! Fixed-order pairwise summation.
//!
//! Reductions over grid nodes go through these helpers so results do not
//! depend on how work was scheduled.

use num_complex::Complex64 as C64;

const BLOCK: usize = 32;

pub fn pairwise(xs: &[f64]) -> f64 {
    if xs.len() <= BLOCK {
        return xs.iter().sum();
    }
    let mid = xs.len() / 2;
    pairwise(&xs[..mid]) + pairwise(&xs[mid..])
}

pub fn pairwise_c(xs: &[C64]) -> C64 {
    if xs.len() <= BLOCK {
        return xs.iter().sum();
    }
    let mid = xs.len() / 2;
    pairwise_c(&xs[..mid]) + pairwise_c(&xs[mid..])
}

/// Sum of `f(i)` for `i in 0..n`, pairwise.
pub fn pairwise_map<F: Fn(usize) -> C64>(n: usize, f: F) -> C64 {
    fn rec<F: Fn(usize) -> C64>(lo: usize, hi: usize, f: &F) -> C64 {
        if hi - lo <= BLOCK {
            return (lo..hi).map(f).sum();
        }
        let mid = lo + (hi - lo) / 2;
        rec(lo, mid, f) + rec(mid, hi, f)
    }
    rec(0, n, &f)
}

pub fn norm2(xs: &[C64]) -> f64 {
    fn rec(xs: &[C64]) -> f64 {
        if xs.len() <= BLOCK {
            return xs.iter().map(|x| x.norm_sqr()).sum();
        }
        let mid = xs.len() / 2;
        rec(&xs[..mid]) + rec(&xs[mid..])
    }
    rec(xs).sqrt()
}

/// Hermitian inner product `sum conj(a) b`.
pub fn dotc(a: &[C64], b: &[C64]) -> C64 {
    pairwise_map(a.len(), |i| a[i].conj() * b[i])
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn matches_naive_on_integers() {
        let xs: Vec<f64> = (0..1000).map(|i| i as f64).collect();
        assert_eq!(pairwise(&xs), 499500.0);
    }

    #[test]
    fn complex_norm() {
        let xs = vec![C64::new(3.0, 4.0); 100];
        assert!((norm2(&xs) - 50.0).abs() < 1e-12);
        assert!((dotc(&xs, &xs).re - 2500.0).abs() < 1e-9);
    }
}
