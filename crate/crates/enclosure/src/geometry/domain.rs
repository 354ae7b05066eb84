use serde::{Deserialize, Serialize};

use super::{dist, norm, sub, Point};
use crate::error::{invalid, Result};

/// The background domain Ω.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum Domain {
    Box { dim: usize, lo: Point, hi: Point },
    Ball { dim: usize, center: Point, radius: f64 },
}

impl Domain {
    pub fn unit_box(dim: usize) -> Self {
        Domain::Box {
            dim,
            lo: [0.0; 3],
            hi: if dim == 2 { [1.0, 1.0, 0.0] } else { [1.0; 3] },
        }
    }

    pub fn cube(dim: usize, half: f64) -> Self {
        let mut lo = [-half; 3];
        let mut hi = [half; 3];
        if dim == 2 {
            lo[2] = 0.0;
            hi[2] = 0.0;
        }
        Domain::Box { dim, lo, hi }
    }

    pub fn validate(&self) -> Result<()> {
        let dim = self.dim();
        if dim != 2 && dim != 3 {
            return invalid(format!("dimension must be 2 or 3, got {dim}"));
        }
        match self {
            Domain::Box { lo, hi, .. } => {
                for k in 0..dim {
                    if !(hi[k] > lo[k]) {
                        return invalid(format!("box extent along axis {k} is not positive"));
                    }
                }
            }
            Domain::Ball { radius, .. } => {
                if !(*radius > 0.0) {
                    return invalid("ball radius must be positive");
                }
            }
        }
        Ok(())
    }

    pub fn dim(&self) -> usize {
        match self {
            Domain::Box { dim, .. } | Domain::Ball { dim, .. } => *dim,
        }
    }

    /// Negative inside, zero on ∂Ω, positive outside.
    pub fn signed_distance(&self, x: &Point) -> f64 {
        match self {
            Domain::Box { dim, lo, hi } => {
                let mut outside = 0.0;
                let mut inside = f64::NEG_INFINITY;
                for k in 0..*dim {
                    let c = 0.5 * (lo[k] + hi[k]);
                    let half = 0.5 * (hi[k] - lo[k]);
                    let d = (x[k] - c).abs() - half;
                    outside += d.max(0.0).powi(2);
                    inside = inside.max(d);
                }
                if outside > 0.0 {
                    outside.sqrt()
                } else {
                    inside
                }
            }
            Domain::Ball { center, radius, .. } => dist(x, center) - radius,
        }
    }

    pub fn contains(&self, x: &Point) -> bool {
        self.signed_distance(x) <= 1e-12 * self.diameter()
    }

    pub fn centroid(&self) -> Point {
        match self {
            Domain::Box { lo, hi, .. } => [
                0.5 * (lo[0] + hi[0]),
                0.5 * (lo[1] + hi[1]),
                0.5 * (lo[2] + hi[2]),
            ],
            Domain::Ball { center, .. } => *center,
        }
    }

    pub fn diameter(&self) -> f64 {
        match self {
            Domain::Box { lo, hi, .. } => norm(&sub(hi, lo)),
            Domain::Ball { radius, .. } => 2.0 * radius,
        }
    }

    pub fn volume(&self) -> f64 {
        match self {
            Domain::Box { dim, lo, hi } => (0..*dim).map(|k| hi[k] - lo[k]).product(),
            Domain::Ball { dim, radius, .. } => unit_ball_volume(*dim) * radius.powi(*dim as i32),
        }
    }

    pub fn surface_area(&self) -> f64 {
        match self {
            Domain::Box { dim, lo, hi } => {
                let e: Vec<f64> = (0..*dim).map(|k| hi[k] - lo[k]).collect();
                if *dim == 2 {
                    2.0 * (e[0] + e[1])
                } else {
                    2.0 * (e[0] * e[1] + e[1] * e[2] + e[0] * e[2])
                }
            }
            Domain::Ball { dim, radius, .. } => {
                *dim as f64 * unit_ball_volume(*dim) * radius.powi(*dim as i32 - 1)
            }
        }
    }

    pub fn bounding_box(&self) -> (Point, Point) {
        match self {
            Domain::Box { lo, hi, .. } => (*lo, *hi),
            Domain::Ball { dim, center, radius } => {
                let mut lo = *center;
                let mut hi = *center;
                for k in 0..*dim {
                    lo[k] -= radius;
                    hi[k] += radius;
                }
                (lo, hi)
            }
        }
    }

    /// Ω is convex, so its hull test is a containment test.
    pub fn outside_hull(&self, x: &Point) -> bool {
        self.signed_distance(x) > 0.0
    }
}

/// ω_n, the volume of the unit ball in R^n.
pub fn unit_ball_volume(dim: usize) -> f64 {
    match dim {
        1 => 2.0,
        2 => std::f64::consts::PI,
        3 => 4.0 * std::f64::consts::PI / 3.0,
        n => 2.0 * std::f64::consts::PI / n as f64 * unit_ball_volume(n - 2),
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn box_signed_distance() {
        let d = Domain::cube(3, 1.0);
        assert_eq!(d.signed_distance(&[0.0; 3]), -1.0);
        assert!((d.signed_distance(&[2.0, 2.0, 0.0]) - 2f64.sqrt()).abs() < 1e-15);
        assert!(d.contains(&[1.0, 0.3, -1.0]));
    }

    #[test]
    fn measures() {
        let b = Domain::Ball { dim: 3, center: [0.0; 3], radius: 1.0 };
        assert!((b.surface_area() - 4.0 * std::f64::consts::PI).abs() < 1e-14);
        assert!((Domain::unit_box(2).surface_area() - 4.0).abs() < 1e-15);
        assert!((unit_ball_volume(4) - std::f64::consts::PI.powi(2) / 2.0).abs() < 1e-14);
    }
}
