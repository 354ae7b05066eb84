//! Support-function estimates from indicator decay rates and the enclosing
//! region they carve out of Ω.

use nalgebra::{DMatrix, DVector};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::cgo::{build_amplitudes, AmplitudeOptions, AmplitudeSeed, Frame};
use crate::error::{invalid, Result};
use crate::geometry::{dist, fibonacci_directions, Domain, Grid, NodeKind, ObstacleShape, Point};
use crate::indicator::{IndicatorEngine, IndicatorSample};

/// Least-squares line y ≈ a + b x; returns (a, b).
pub fn affine_fit(xs: &[f64], ys: &[f64]) -> Result<(f64, f64)> {
    let n = xs.len();
    if n < 2 || ys.len() != n {
        return invalid("affine fit needs at least two matched samples");
    }
    let mx = crate::sum::pairwise(xs) / n as f64;
    let my = crate::sum::pairwise(ys) / n as f64;
    let sxx: Vec<f64> = xs.iter().map(|x| (x - mx) * (x - mx)).collect();
    let sxy: Vec<f64> = xs.iter().zip(ys).map(|(x, y)| (x - mx) * (y - my)).collect();
    let sxx = crate::sum::pairwise(&sxx);
    if sxx == 0.0 {
        return invalid("affine fit needs distinct abscissae");
    }
    let b = crate::sum::pairwise(&sxy) / sxx;
    Ok((my - b * mx, b))
}

/// Least squares y ≈ Σ_j c_j basis_j(x) over the given rows.
pub fn linear_least_squares(rows: &[Vec<f64>], ys: &[f64]) -> Result<Vec<f64>> {
    let n = rows.len();
    let p = rows.first().map_or(0, Vec::len);
    if n < p || p == 0 || ys.len() != n || rows.iter().any(|r| r.len() != p) {
        return invalid("least squares needs at least as many rows as unknowns");
    }
    let a = DMatrix::from_fn(n, p, |i, j| rows[i][j]);
    let b = DVector::from_column_slice(ys);
    let svd = a.svd(true, true);
    let smax = svd.singular_values.max();
    if !(svd.singular_values.min() > 1e-12 * smax) {
        return invalid("least-squares design matrix is rank deficient");
    }
    let c = svd.solve(&b, 0.0).map_err(|e| crate::Error::Validation(e.to_string()))?;
    Ok(c.iter().copied().collect())
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, Default)]
#[serde(rename_all = "snake_case")]
pub enum FitModel {
    /// g(h) = (t − h_D) + βh
    #[default]
    Affine,
    /// g(h) = (t − h_D) + βh + γ h log h
    AffineLog,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize, Default)]
pub struct FitOptions {
    pub model: FitModel,
    /// Keep only this many of the smallest h values.
    pub window: Option<usize>,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SupportEstimate {
    pub x0: Point,
    pub w: Point,
    pub t: f64,
    /// −∞ when the estimate is unusable.
    pub h_d_hat: f64,
    pub slope: f64,
    pub log_coef: f64,
    /// RMS residual of the fit of g.
    pub residual: f64,
    pub n_points: usize,
    pub monotone: bool,
    pub usable: bool,
    pub truth: Option<f64>,
}

impl SupportEstimate {
    pub fn error(&self) -> Option<f64> {
        self.truth.map(|h| self.h_d_hat - h)
    }

    pub fn with_truth(mut self, shape: &ObstacleShape, domain: &Domain) -> Result<Self> {
        self.truth = Some(shape.support_log_distance(domain, &self.x0)?);
        Ok(self)
    }
}

/// Fits g(h) = ½ h log|I(h, t)| for one (x0, w, t) group and extrapolates to
/// h = 0. Floored samples are dropped; fewer than three remaining samples give
/// an unusable estimate.
pub fn fit_support(samples: &[IndicatorSample], opts: &FitOptions) -> Result<SupportEstimate> {
    let first = match samples.first() {
        Some(s) => *s,
        None => return invalid("no samples to fit"),
    };
    if samples.len() < 3 {
        return invalid("support fit needs at least three h values");
    }
    if samples.iter().any(|s| s.x0 != first.x0 || s.w != first.w || s.t != first.t) {
        return invalid("samples mix different (x0, w, t) groups");
    }
    if samples.iter().any(|s| !(s.h > 0.0)) {
        return invalid("h must be positive");
    }
    let mut pts: Vec<(f64, f64)> = samples
        .iter()
        .filter(|s| !s.is_floored() && s.value.norm().is_finite())
        .map(|s| (s.h, 0.5 * s.h * s.modulus().ln()))
        .collect();
    pts.sort_by(|a, b| b.0.total_cmp(&a.0));
    if pts.windows(2).any(|p| p[0].0 == p[1].0) {
        return invalid("duplicate h values in a fit group");
    }
    if let Some(wn) = opts.window {
        if pts.len() > wn {
            pts.drain(..pts.len() - wn);
        }
    }
    let mut est = SupportEstimate {
        x0: first.x0,
        w: first.w,
        t: first.t,
        h_d_hat: f64::NEG_INFINITY,
        slope: 0.0,
        log_coef: 0.0,
        residual: f64::NAN,
        n_points: pts.len(),
        monotone: false,
        usable: false,
        truth: None,
    };
    let need = match opts.model {
        FitModel::Affine => 3,
        FitModel::AffineLog => 4,
    };
    if pts.len() < need {
        return Ok(est);
    }
    let rows: Vec<Vec<f64>> = pts
        .iter()
        .map(|&(h, _)| match opts.model {
            FitModel::Affine => vec![1.0, h],
            FitModel::AffineLog => vec![1.0, h, h * h.ln()],
        })
        .collect();
    let ys: Vec<f64> = pts.iter().map(|p| p.1).collect();
    let c = linear_least_squares(&rows, &ys)?;
    let res: Vec<f64> = rows
        .iter()
        .zip(&ys)
        .map(|(r, y)| {
            let f: f64 = r.iter().zip(&c).map(|(a, b)| a * b).sum();
            (f - y).powi(2)
        })
        .collect();
    let noise = 1e-12 * ys.iter().fold(1.0f64, |m, y| m.max(y.abs()));
    let diffs: Vec<f64> = ys.windows(2).map(|p| p[1] - p[0]).filter(|d| d.abs() > noise).collect();
    est.h_d_hat = first.t - c[0];
    est.slope = c[1];
    est.log_coef = c.get(2).copied().unwrap_or(0.0);
    est.residual = (crate::sum::pairwise(&res) / ys.len() as f64).sqrt();
    est.monotone = diffs.iter().all(|&d| d > 0.0) || diffs.iter().all(|&d| d < 0.0);
    est.usable = est.h_d_hat.is_finite();
    Ok(est)
}

/// Candidate region: active nodes outside every ball B(x0, e^{ĥ}).
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EnclosureMask {
    pub counts: [usize; 3],
    pub values: Vec<bool>,
    /// (x0, ĥ) constraints applied so far.
    pub constraints: Vec<(Point, f64)>,
}

impl EnclosureMask {
    /// Ω itself.
    pub fn full(grid: &Grid) -> Self {
        EnclosureMask {
            counts: grid.counts,
            values: grid.kinds.iter().map(|k| *k != NodeKind::Exterior).collect(),
            constraints: Vec::new(),
        }
    }

    /// Intersects with {log|x − x0| ≥ ĥ}. Unusable estimates are skipped.
    pub fn apply(&mut self, grid: &Grid, est: &SupportEstimate) {
        if !est.usable || !est.h_d_hat.is_finite() {
            return;
        }
        for (i, m) in self.values.iter_mut().enumerate() {
            if *m && dist(&grid.position(i), &est.x0).ln() < est.h_d_hat {
                *m = false;
            }
        }
        self.constraints.push((est.x0, est.h_d_hat));
    }

    pub fn count(&self) -> usize {
        self.values.iter().filter(|&&b| b).count()
    }
}

pub fn build_enclosure(estimates: &[SupportEstimate], grid: &Grid) -> Result<EnclosureMask> {
    if estimates.is_empty() {
        return invalid("enclosure needs at least one estimate");
    }
    let mut mask = EnclosureMask::full(grid);
    for e in estimates {
        mask.apply(grid, e);
    }
    Ok(mask)
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ReconstructionScore {
    pub containment: bool,
    /// |mask ∖ D| / |D| by node counts.
    pub excess: f64,
    pub hausdorff: f64,
}

/// Node-based comparison of a mask with the true obstacle.
pub fn score_reconstruction(mask: &EnclosureMask, grid: &Grid, shape: &ObstacleShape) -> Result<ReconstructionScore> {
    if mask.values.len() != grid.n_nodes() {
        return invalid("mask does not match the grid");
    }
    let active = |i: usize| grid.kinds[i] != NodeKind::Exterior;
    let in_d: Vec<bool> = (0..grid.n_nodes()).map(|i| active(i) && shape.contains(&grid.position(i))).collect();
    let n_d = in_d.iter().filter(|&&b| b).count();
    if n_d == 0 {
        return invalid("the obstacle covers no grid node");
    }
    let missed: Vec<usize> = (0..grid.n_nodes()).filter(|&i| in_d[i] && !mask.values[i]).collect();
    let excess = (0..grid.n_nodes()).filter(|&i| mask.values[i] && !in_d[i]).count();
    let outward = (0..grid.n_nodes())
        .filter(|&i| mask.values[i])
        .map(|i| shape.distance(&grid.position(i)))
        .fold(0.0, f64::max);
    let kept: Vec<Point> = (0..grid.n_nodes()).filter(|&i| mask.values[i]).map(|i| grid.position(i)).collect();
    let inward = missed
        .iter()
        .map(|&i| {
            let p = grid.position(i);
            kept.iter().map(|q| dist(&p, q)).fold(f64::INFINITY, f64::min)
        })
        .fold(0.0, f64::max);
    Ok(ReconstructionScore {
        containment: missed.is_empty(),
        excess: excess as f64 / n_d as f64,
        hausdorff: outward.max(inward),
    })
}

/// How probes are laid out around Ω.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize, Default)]
#[serde(rename_all = "snake_case")]
pub enum Placement {
    /// Equal angles in the x1x2 plane, starting at `offset_deg`.
    Ring { offset_deg: f64 },
    /// Groups of probes fanned out by `spread_deg` around each in-plane
    /// coordinate axis; the count must be a multiple of four.
    AxisFans { spread_deg: f64 },
    /// Golden-angle spiral (3D only).
    #[default]
    Sphere,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ProbeLayout {
    pub placement: Placement,
    pub count: usize,
    pub radius: f64,
    /// Uniform angular jitter amplitude in degrees.
    pub jitter_deg: f64,
    pub seed: u64,
}

pub fn place_probes(domain: &Domain, layout: &ProbeLayout) -> Result<Vec<Point>> {
    let dim = domain.dim();
    let n = layout.count;
    if n == 0 {
        return invalid("probe count must be positive");
    }
    if !(layout.radius > 0.0) || !(layout.jitter_deg >= 0.0) {
        return invalid("probe radius must be positive and jitter non-negative");
    }
    let mut rng = ChaCha8Rng::seed_from_u64(layout.seed);
    let mut jitter = |a: f64| {
        if layout.jitter_deg > 0.0 {
            a + rng.random_range(-layout.jitter_deg..=layout.jitter_deg).to_radians()
        } else {
            a
        }
    };
    let dirs: Vec<Point> = match layout.placement {
        Placement::Ring { offset_deg } => (0..n)
            .map(|k| {
                let a = jitter(offset_deg.to_radians() + std::f64::consts::TAU * k as f64 / n as f64);
                [a.cos(), a.sin(), 0.0]
            })
            .collect(),
        Placement::AxisFans { spread_deg } => {
            if n % 4 != 0 {
                return invalid("axis fans need a probe count divisible by four");
            }
            let per = n / 4;
            let mut out = Vec::with_capacity(n);
            for axis in 0..4 {
                for j in 0..per {
                    let off = spread_deg * ((2 * j + 1) as f64 / per as f64 - 1.0);
                    let a = jitter((90.0 * axis as f64 + off).to_radians());
                    out.push([a.cos(), a.sin(), 0.0]);
                }
            }
            out
        }
        Placement::Sphere => {
            if dim != 3 {
                return invalid("sphere placement needs dim = 3");
            }
            fibonacci_directions(3, n)
                .into_iter()
                .map(|d| {
                    if layout.jitter_deg == 0.0 {
                        return d;
                    }
                    let s = layout.jitter_deg.to_radians();
                    let p = [d[0] + rng.random_range(-s..=s), d[1] + rng.random_range(-s..=s), d[2] + rng.random_range(-s..=s)];
                    let l = crate::geometry::norm(&p);
                    [p[0] / l, p[1] / l, p[2] / l]
                })
                .collect()
        }
    };
    let c = domain.centroid();
    let pts: Vec<Point> = dirs
        .iter()
        .map(|d| [c[0] + layout.radius * d[0], c[1] + layout.radius * d[1], c[2] + layout.radius * d[2]])
        .collect();
    if pts.iter().any(|p| !domain.outside_hull(p)) {
        return invalid("probe radius places a probe inside the domain");
    }
    Ok(pts)
}

/// log of the largest distance from x0 to Ω̄.
pub fn far_log_distance(domain: &Domain, x0: &Point) -> f64 {
    match domain {
        Domain::Box { dim, lo, hi } => {
            let mut s = 0.0;
            for k in 0..*dim {
                let d = (x0[k] - lo[k]).abs().max((x0[k] - hi[k]).abs());
                s += d * d;
            }
            0.5 * f64::ln(s)
        }
        Domain::Ball { center, radius, .. } => (dist(x0, center) + radius).ln(),
    }
}

/// Level t used for a probe.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize, Default)]
#[serde(rename_all = "snake_case")]
pub enum TRule {
    /// log distance to the farthest point of Ω̄.
    #[default]
    FarSide,
    Fixed(f64),
    /// h_D(x0) plus an offset; needs the true obstacle.
    TruthOffset(f64),
}

impl TRule {
    pub fn level(&self, domain: &Domain, x0: &Point, truth: Option<f64>) -> Result<f64> {
        match *self {
            TRule::FarSide => Ok(far_log_distance(domain, x0)),
            TRule::Fixed(t) => Ok(t),
            TRule::TruthOffset(dt) => match truth {
                Some(h) => Ok(h + dt),
                None => invalid("a truth-relative t needs the true obstacle"),
            },
        }
    }
}

/// Everything needed to turn one probe point into a support estimate.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ProbeSettings {
    pub order: usize,
    pub seed: AmplitudeSeed,
    pub amplitude: AmplitudeOptions,
    /// Strictly decreasing.
    pub hs: Vec<f64>,
    pub t_rule: TRule,
    pub fit: FitOptions,
}

impl Default for ProbeSettings {
    fn default() -> Self {
        ProbeSettings {
            order: 2,
            seed: AmplitudeSeed::default(),
            amplitude: AmplitudeOptions::default(),
            hs: vec![0.2, 0.15, 0.1, 0.075, 0.05],
            t_rule: TRule::FarSide,
            fit: FitOptions::default(),
        }
    }
}

impl ProbeSettings {
    pub fn validate(&self) -> Result<()> {
        if self.order > 2 {
            return invalid("CGO order must be 0, 1 or 2");
        }
        if self.hs.len() < 3 {
            return invalid("the h-sequence needs at least three values");
        }
        if self.hs.iter().any(|h| !(*h > 0.0)) || self.hs.windows(2).any(|p| !(p[1] < p[0])) {
            return invalid("the h-sequence must be strictly decreasing and positive");
        }
        Ok(())
    }
}

/// Probe frame with w ⟂ (centroid − x0).
pub fn probe_frame(domain: &Domain, x0: &Point) -> Result<Frame> {
    Frame::perpendicular(domain.dim(), *x0, domain.centroid())
}

/// Indicator samples over the h-sequence and their support estimate.
pub fn estimate_support(
    engine: &IndicatorEngine<'_>,
    x0: &Point,
    settings: &ProbeSettings,
    truth: Option<f64>,
) -> Result<(Vec<IndicatorSample>, SupportEstimate)> {
    settings.validate()?;
    let grid = engine.grid;
    let frame = probe_frame(&grid.domain, x0)?;
    let t = settings.t_rule.level(&grid.domain, x0, truth)?;
    let amps = build_amplitudes(grid, &frame, engine.medium.kappa, settings.seed, settings.order, &settings.amplitude)?;
    let samples = settings
        .hs
        .iter()
        .map(|&h| engine.sample(&amps, settings.order, h, t))
        .collect::<Result<Vec<_>>>()?;
    let mut est = fit_support(&samples, &settings.fit)?;
    est.truth = truth;
    Ok((samples, est))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::C64;

    fn synth(h: f64, t: f64, value: f64) -> IndicatorSample {
        IndicatorSample {
            x0: [2.0, 0.0, 0.0],
            w: [0.0, 1.0, 0.0],
            h,
            t,
            value: C64::new(value, 0.0),
            value_volume_oracle: C64::new(value, 0.0),
            iterations: 0,
            residual: 0.0,
        }
    }

    #[test]
    fn affine_fit_recovers_line() {
        let (a, b) = affine_fit(&[0.0, 1.0, 2.0], &[1.0, 3.0, 5.0]).unwrap();
        assert!((a - 1.0).abs() < 1e-15 && (b - 2.0).abs() < 1e-15);
        assert!(affine_fit(&[1.0, 1.0], &[0.0, 1.0]).is_err());
    }

    #[test]
    fn too_few_samples_rejected() {
        let s = [synth(0.2, 0.0, 1.0), synth(0.1, 0.0, 1.0)];
        assert!(fit_support(&s, &FitOptions::default()).is_err());
    }

    #[test]
    fn floored_group_is_unusable() {
        let s: Vec<_> = [0.2, 0.1, 0.05].iter().map(|&h| synth(h, 0.0, 0.0)).collect();
        let e = fit_support(&s, &FitOptions::default()).unwrap();
        assert!(!e.usable && e.h_d_hat == f64::NEG_INFINITY);
    }

    #[test]
    fn mixed_groups_rejected() {
        let mut s: Vec<_> = [0.2, 0.1, 0.05].iter().map(|&h| synth(h, 0.0, 1.0)).collect();
        s[1].t = 0.3;
        assert!(fit_support(&s, &FitOptions::default()).is_err());
    }

    #[test]
    fn window_keeps_smallest_h() {
        let s: Vec<_> = [0.4, 0.3, 0.2, 0.1].iter().map(|&h| synth(h, 0.0, (2.0 * 0.1 / h).exp())).collect();
        let e = fit_support(&s, &FitOptions { model: FitModel::Affine, window: Some(3) }).unwrap();
        assert_eq!(e.n_points, 3);
        assert!((e.h_d_hat + 0.1).abs() < 1e-12);
    }

    #[test]
    fn far_side_level() {
        let d = Domain::cube(2, 1.0);
        let t = far_log_distance(&d, &[2.0, 0.0, 0.0]);
        assert!((t - 10f64.sqrt().ln()).abs() < 1e-15);
        let b = Domain::Ball { dim: 3, center: [0.0; 3], radius: 1.0 };
        assert!((far_log_distance(&b, &[0.0, 0.0, 3.0]) - 4f64.ln()).abs() < 1e-15);
    }

    #[test]
    fn axis_fans_layout() {
        let d = Domain::cube(2, 1.0);
        let layout = ProbeLayout { placement: Placement::AxisFans { spread_deg: 20.0 }, count: 8, radius: 2.2, jitter_deg: 0.0, seed: 0 };
        let p = place_probes(&d, &layout).unwrap();
        assert_eq!(p.len(), 8);
        let a0 = p[0][1].atan2(p[0][0]).to_degrees();
        let a1 = p[1][1].atan2(p[1][0]).to_degrees();
        assert!((a0 + 10.0).abs() < 1e-12 && (a1 - 10.0).abs() < 1e-12);
        assert!(place_probes(&d, &ProbeLayout { count: 6, ..layout }).is_err());
        assert!(place_probes(&d, &ProbeLayout { radius: 1.0, ..layout }).is_err());
    }

    #[test]
    fn jitter_is_seeded() {
        let d = Domain::cube(3, 1.0);
        let layout = ProbeLayout { placement: Placement::Sphere, count: 10, radius: 2.5, jitter_deg: 5.0, seed: 7 };
        assert_eq!(place_probes(&d, &layout).unwrap(), place_probes(&d, &layout).unwrap());
        assert_ne!(place_probes(&d, &layout).unwrap(), place_probes(&d, &ProbeLayout { seed: 8, ..layout }).unwrap());
    }
}
