use std::collections::VecDeque;

use serde::{Deserialize, Serialize};

use super::{dist, fibonacci_directions, Domain, Grid, NodeKind, Point};
use crate::error::{invalid, Result};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Ball {
    pub center: Point,
    pub radius: f64,
}

/// Signed-distance samples on a regular lattice, negative inside.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SampledSdf {
    pub dim: usize,
    pub origin: Point,
    pub spacing: f64,
    pub counts: [usize; 3],
    pub values: Vec<f64>,
}

impl SampledSdf {
    pub fn from_fn(
        dim: usize,
        origin: Point,
        spacing: f64,
        counts: [usize; 3],
        f: impl Fn(&Point) -> f64,
    ) -> Self {
        let mut values = Vec::with_capacity(counts.iter().product());
        for k in 0..counts[2] {
            for j in 0..counts[1] {
                for i in 0..counts[0] {
                    values.push(f(&Self::node(origin, spacing, [i, j, k])));
                }
            }
        }
        SampledSdf { dim, origin, spacing, counts, values }
    }

    fn node(origin: Point, spacing: f64, ijk: [usize; 3]) -> Point {
        [
            origin[0] + spacing * ijk[0] as f64,
            origin[1] + spacing * ijk[1] as f64,
            origin[2] + spacing * ijk[2] as f64,
        ]
    }

    fn positions(&self) -> impl Iterator<Item = (Point, f64)> + '_ {
        let [nx, ny, _] = self.counts;
        self.values.iter().enumerate().map(move |(idx, &v)| {
            let ijk = [idx % nx, (idx / nx) % ny, idx / (nx * ny)];
            (Self::node(self.origin, self.spacing, ijk), v)
        })
    }

    /// Multilinear interpolation; +∞ outside the lattice.
    pub fn eval(&self, x: &Point) -> f64 {
        let mut base = [0usize; 3];
        let mut frac = [0.0; 3];
        for k in 0..self.dim {
            let u = (x[k] - self.origin[k]) / self.spacing;
            if u < 0.0 || u > (self.counts[k] - 1) as f64 {
                return f64::INFINITY;
            }
            let i = (u.floor() as usize).min(self.counts[k].saturating_sub(2));
            base[k] = i;
            frac[k] = u - i as f64;
        }
        let corners = if self.dim == 2 { 4 } else { 8 };
        let mut acc = 0.0;
        for c in 0..corners {
            let mut w = 1.0;
            let mut ijk = base;
            for k in 0..self.dim {
                let bit = (c >> k) & 1;
                ijk[k] += bit;
                w *= if bit == 1 { frac[k] } else { 1.0 - frac[k] };
            }
            let idx = ijk[0] + self.counts[0] * (ijk[1] + self.counts[1] * ijk[2]);
            acc += w * self.values[idx];
        }
        acc
    }
}

/// The inclusion D. Treated as a closed set.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum ObstacleShape {
    Ball { center: Point, radius: f64 },
    Ellipsoid { center: Point, semi_axes: Point },
    Union { balls: Vec<Ball> },
    Sampled { field: SampledSdf },
}

const TIE: f64 = 4.0 * f64::EPSILON;

impl ObstacleShape {
    pub fn ball(center: Point, radius: f64) -> Self {
        ObstacleShape::Ball { center, radius }
    }

    pub fn validate_params(&self, dim: usize) -> Result<()> {
        match self {
            ObstacleShape::Ball { radius, .. } if !(*radius > 0.0) => {
                invalid("obstacle radius must be positive")
            }
            ObstacleShape::Ellipsoid { semi_axes, .. }
                if semi_axes[..dim].iter().any(|a| !(*a > 0.0)) =>
            {
                invalid("ellipsoid semi-axes must be positive")
            }
            ObstacleShape::Union { balls } if balls.is_empty() => {
                invalid("union of balls needs at least one ball")
            }
            ObstacleShape::Union { balls } if balls.iter().any(|b| !(b.radius > 0.0)) => {
                invalid("obstacle radius must be positive")
            }
            ObstacleShape::Sampled { field } if field.dim != dim => {
                invalid("sampled obstacle dimension does not match the domain")
            }
            _ => Ok(()),
        }
    }

    /// χ_D(x).
    pub fn contains(&self, x: &Point) -> bool {
        match self {
            ObstacleShape::Ball { center, radius } => dist(x, center) <= radius * (1.0 + TIE),
            ObstacleShape::Ellipsoid { center, semi_axes } => {
                let mut s = 0.0;
                for k in 0..3 {
                    let a = if semi_axes[k] > 0.0 { semi_axes[k] } else { 1.0 };
                    s += ((x[k] - center[k]) / a).powi(2);
                }
                s <= 1.0 + TIE
            }
            ObstacleShape::Union { balls } => balls
                .iter()
                .any(|b| dist(x, &b.center) <= b.radius * (1.0 + TIE)),
            ObstacleShape::Sampled { field } => field.eval(x) <= TIE * field.spacing,
        }
    }

    pub fn chi(&self, x: &Point) -> f64 {
        if self.contains(x) {
            1.0
        } else {
            0.0
        }
    }

    /// Euclidean distance from x to D (zero inside).
    pub fn distance(&self, x: &Point) -> f64 {
        match self {
            ObstacleShape::Ball { center, radius } => (dist(x, center) - radius).max(0.0),
            ObstacleShape::Ellipsoid { center, semi_axes } => {
                ellipsoid_distance(&super::sub(x, center), semi_axes)
            }
            ObstacleShape::Union { balls } => balls
                .iter()
                .map(|b| (dist(x, &b.center) - b.radius).max(0.0))
                .fold(f64::INFINITY, f64::min),
            ObstacleShape::Sampled { field } => {
                if field.eval(x) <= 0.0 {
                    return 0.0;
                }
                field
                    .positions()
                    .filter(|(_, v)| *v <= 0.0)
                    .map(|(p, _)| dist(&p, x))
                    .fold(f64::INFINITY, f64::min)
            }
        }
    }

    /// h_D(x0) = inf over D of log|x − x0|.
    pub fn support_log_distance(&self, domain: &Domain, x0: &Point) -> Result<f64> {
        if !domain.outside_hull(x0) {
            return invalid("probe point must lie outside the convex hull of the domain");
        }
        Ok(self.distance(x0).ln())
    }

    /// Points on (or, for sampled shapes, inside) D used for containment checks.
    pub fn boundary_samples(&self, dim: usize, n: usize) -> Vec<Point> {
        let dirs = fibonacci_directions(dim, n);
        let on_ball = |c: &Point, r: f64| -> Vec<Point> {
            dirs.iter()
                .map(|d| [c[0] + r * d[0], c[1] + r * d[1], c[2] + r * d[2]])
                .collect()
        };
        match self {
            ObstacleShape::Ball { center, radius } => on_ball(center, *radius),
            ObstacleShape::Ellipsoid { center, semi_axes } => dirs
                .iter()
                .map(|d| {
                    let mut p = *center;
                    for k in 0..dim {
                        p[k] += semi_axes[k] * d[k];
                    }
                    p
                })
                .collect(),
            ObstacleShape::Union { balls } => balls
                .iter()
                .flat_map(|b| on_ball(&b.center, b.radius))
                .collect(),
            ObstacleShape::Sampled { field } => field
                .positions()
                .filter(|(_, v)| *v <= 0.0)
                .map(|(p, _)| p)
                .collect(),
        }
    }

    /// Checks D ⊂⊂ Ω by sampling; returns the smallest clearance found.
    pub fn check_inside(&self, domain: &Domain) -> Result<f64> {
        let dim = domain.dim();
        self.validate_params(dim)?;
        let samples = self.boundary_samples(dim, if dim == 2 { 720 } else { 4000 });
        if samples.is_empty() {
            return invalid("obstacle is empty");
        }
        let margin = samples
            .iter()
            .map(|p| -domain.signed_distance(p))
            .fold(f64::INFINITY, f64::min);
        if !(margin > 0.0) {
            return invalid(format!(
                "obstacle is not strictly inside the domain (clearance {margin:.3e})"
            ));
        }
        Ok(margin)
    }
}

/// Distance from p (relative to the centre) to an axis-aligned ellipsoid.
fn ellipsoid_distance(p: &Point, a: &Point) -> f64 {
    let y = [p[0].abs(), p[1].abs(), p[2].abs()];
    let ax = [
        if a[0] > 0.0 { a[0] } else { 1.0 },
        if a[1] > 0.0 { a[1] } else { 1.0 },
        if a[2] > 0.0 { a[2] } else { 1.0 },
    ];
    let inside: f64 = (0..3).map(|k| (y[k] / ax[k]).powi(2)).sum();
    if inside <= 1.0 {
        return 0.0;
    }
    let f = |t: f64| -> f64 {
        (0..3)
            .map(|k| (ax[k] * y[k] / (t + ax[k] * ax[k])).powi(2))
            .sum::<f64>()
            - 1.0
    };
    let ymax = (y[0] * y[0] + y[1] * y[1] + y[2] * y[2]).sqrt();
    let (mut lo, mut hi) = (0.0, ymax * ax.iter().cloned().fold(0.0, f64::max));
    for _ in 0..200 {
        let mid = 0.5 * (lo + hi);
        if f(mid) > 0.0 {
            lo = mid;
        } else {
            hi = mid;
        }
    }
    let t = 0.5 * (lo + hi);
    let q: Point = [
        ax[0] * ax[0] * y[0] / (t + ax[0] * ax[0]),
        ax[1] * ax[1] * y[1] / (t + ax[1] * ax[1]),
        ax[2] * ax[2] * y[2] / (t + ax[2] * ax[2]),
    ];
    dist(&y, &q)
}

/// Flood fill of Ω ∖ D over grid axis-neighbours, started from ∂Ω.
pub fn complement_connected(shape: &ObstacleShape, grid: &Grid) -> bool {
    let n = grid.n_nodes();
    let free: Vec<bool> = (0..n)
        .map(|i| grid.kinds[i] != NodeKind::Exterior && !shape.contains(&grid.position(i)))
        .collect();
    let total = free.iter().filter(|f| **f).count();
    let mut seen = vec![false; n];
    let mut queue = VecDeque::new();
    for b in &grid.boundary {
        if free[b.node] && !seen[b.node] {
            seen[b.node] = true;
            queue.push_back(b.node);
            break;
        }
    }
    let mut count = 0;
    while let Some(i) = queue.pop_front() {
        count += 1;
        for axis in 0..grid.dim {
            for dir in [-1i64, 1] {
                if let Some(j) = grid.neighbor(i, axis, dir) {
                    if free[j] && !seen[j] {
                        seen[j] = true;
                        queue.push_back(j);
                    }
                }
            }
        }
    }
    count == total
}
