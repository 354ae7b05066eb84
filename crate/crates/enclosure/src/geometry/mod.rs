//! Domains, obstacle shapes and regular grids.

mod domain;
mod grid;
mod shape;

pub use domain::{unit_ball_volume, Domain};
pub use grid::{build_grid, build_grid_in, BoundaryNode, Face, Grid, NodeKind};
pub use shape::{complement_connected, Ball, ObstacleShape, SampledSdf};

/// Points are stored with three components; in 2D the last one is zero.
pub type Point = [f64; 3];

pub(crate) fn sub(a: &Point, b: &Point) -> Point {
    [a[0] - b[0], a[1] - b[1], a[2] - b[2]]
}

pub(crate) fn dot(a: &Point, b: &Point) -> f64 {
    a[0] * b[0] + a[1] * b[1] + a[2] * b[2]
}

pub(crate) fn norm(a: &Point) -> f64 {
    dot(a, a).sqrt()
}

pub(crate) fn scale(a: &Point, s: f64) -> Point {
    [a[0] * s, a[1] * s, a[2] * s]
}

pub fn dist(a: &Point, b: &Point) -> f64 {
    norm(&sub(a, b))
}

/// Quasi-uniform unit directions: golden-angle spiral in 3D, equal angles in 2D.
pub fn fibonacci_directions(dim: usize, n: usize) -> Vec<Point> {
    if dim == 2 {
        return (0..n)
            .map(|i| {
                let a = 2.0 * std::f64::consts::PI * i as f64 / n as f64;
                [a.cos(), a.sin(), 0.0]
            })
            .collect();
    }
    let golden = std::f64::consts::PI * (3.0 - 5f64.sqrt());
    (0..n)
        .map(|i| {
            let z = 1.0 - (2.0 * i as f64 + 1.0) / n as f64;
            let r = (1.0 - z * z).max(0.0).sqrt();
            let a = golden * i as f64;
            [r * a.cos(), r * a.sin(), z]
        })
        .collect()
}
