use num_complex::Complex64 as C64;
use serde::{Deserialize, Serialize};

use super::amplitude::Amplitudes;
use crate::error::{invalid, Result};

/// Least-squares slope and intercept of log y against log x.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ResidualFit {
    pub exponent: f64,
    pub intercept: f64,
}

pub fn fit_power(xs: &[f64], ys: &[f64]) -> Result<ResidualFit> {
    if xs.len() != ys.len() || xs.len() < 2 {
        return invalid("power fit needs at least two matched samples");
    }
    if xs.iter().chain(ys).any(|v| !(*v > 0.0) || !v.is_finite()) {
        return invalid("power fit needs positive finite samples");
    }
    let lx: Vec<f64> = xs.iter().map(|x| x.ln()).collect();
    let ly: Vec<f64> = ys.iter().map(|y| y.ln()).collect();
    let (a, b) = crate::reconstruct::affine_fit(&lx, &ly)?;
    Ok(ResidualFit { exponent: b, intercept: a })
}

/// Conjugated WKB residual sup |e^{(log z − t)/h} h⁴(Δ² + κ²)vapp| over
/// the rectangle nodes covering the image of Ω̄, one value per h.
///
/// With h' = −h and B = Σ h'^k a_k this is
/// |h'^4(Δ² + κ²)B + 2h'^3(ΔT + TΔ)B + 4h'^2 T²B|.
pub fn wkb_residual(amps: &Amplitudes, order: usize, hs: &[f64]) -> Result<Vec<f64>> {
    if order > amps.order {
        return invalid(format!("order {order} exceeds the built amplitude order {}", amps.order));
    }
    let dim = amps.dim();
    let k2 = C64::new(amps.kappa * amps.kappa, 0.0);
    let rect = &amps.rect;
    let ops = amps.ops();
    let [[i0, i1], [j0, j1]] = amps.image;
    let nodes: Vec<usize> = (j0..j1)
        .flat_map(|j| (i0..i1).map(move |i| (i, j)))
        .map(|(i, j)| i + rect.counts[0] * j)
        .collect();
    let z = rect.nodes();
    // coefficient fields [L_k, M_k, T_k] at the selected nodes
    let mut coef: Vec<[Vec<C64>; 3]> = Vec::new();
    let a0 = &amps.a0;
    let l0 = a0.lap(dim).lap(dim).add(&a0.scale(k2));
    let m0 = a0.t_op(dim).lap(dim).add(&a0.lap(dim).t_op(dim));
    let t0 = a0.t_op(dim).t_op(dim);
    coef.push([
        nodes.iter().map(|&i| l0.eval(z[i])).collect(),
        nodes.iter().map(|&i| m0.eval(z[i])).collect(),
        nodes.iter().map(|&i| t0.eval(z[i])).collect(),
    ]);
    for k in 1..=order {
        let a = amps.field(k).unwrap();
        let lap = ops.lap(&a);
        let l = ops.lap(&lap);
        let m = ops.mixed(&a);
        let t = ops.t_op(&ops.t_op(&a));
        coef.push([
            nodes.iter().map(|&i| l[i] + k2 * a[i]).collect(),
            nodes.iter().map(|&i| m[i]).collect(),
            nodes.iter().map(|&i| t[i]).collect(),
        ]);
    }
    Ok(hs
        .iter()
        .map(|&h| {
            let hp = -h;
            (0..nodes.len())
                .map(|p| {
                    let mut r = C64::new(0.0, 0.0);
                    for (k, [l, m, t]) in coef.iter().enumerate() {
                        let hk = hp.powi(k as i32);
                        r += hk * (hp.powi(4) * l[p] + 2.0 * hp.powi(3) * m[p] + 4.0 * hp * hp * t[p]);
                    }
                    r.norm()
                })
                .fold(0.0, f64::max)
        })
        .collect())
}
