use std::f64::consts::PI;

use super::{dot, norm, scale, sub, Domain, Point};
use crate::error::{invalid, Result};

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum NodeKind {
    Interior,
    Boundary,
    Exterior,
}

/// A box-face node that is not on an edge: its inward neighbour along
/// `axis` is interior.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct Face {
    pub axis: usize,
    pub outward: i64,
}

#[derive(Debug, Clone)]
pub struct BoundaryNode {
    pub node: usize,
    pub position: Point,
    pub normal: Point,
    pub weight: f64,
    pub face: Option<Face>,
}

/// Regular tensor grid over a box containing Ω. Node index runs fastest
/// along the first axis.
#[derive(Debug, Clone)]
pub struct Grid {
    pub dim: usize,
    pub origin: Point,
    pub spacing: Point,
    pub counts: [usize; 3],
    pub kinds: Vec<NodeKind>,
    pub boundary: Vec<BoundaryNode>,
    pub domain: Domain,
    slot: Vec<usize>,
    interior: Vec<usize>,
    fitted_box: bool,
}

const MIN_RESOLUTION: usize = 8;
const BALL_PAD: usize = 2;

/// Grid with `resolution` nodes per axis. Box domains are gridded on their
/// own faces; balls get a padded bounding box.
pub fn build_grid(domain: &Domain, resolution: usize) -> Result<Grid> {
    domain.validate()?;
    if resolution < MIN_RESOLUTION {
        return invalid(format!("resolution {resolution} is below the minimum of {MIN_RESOLUTION}"));
    }
    match domain {
        Domain::Box { dim, lo, hi } => {
            let mut spacing = [1.0; 3];
            for k in 0..*dim {
                spacing[k] = (hi[k] - lo[k]) / (resolution - 1) as f64;
            }
            Ok(Grid::fitted_box(domain.clone(), *lo, spacing, resolution))
        }
        Domain::Ball { dim, center, radius } => {
            let s = 2.0 * radius / (resolution - 1 - 2 * BALL_PAD) as f64;
            let pad = radius + BALL_PAD as f64 * s;
            let mut lo = [0.0; 3];
            let mut hi = [0.0; 3];
            for k in 0..*dim {
                lo[k] = center[k] - pad;
                hi[k] = center[k] + pad;
            }
            build_grid_in(domain, resolution, lo, hi)
        }
    }
}

/// Ball domain gridded inside an explicit bounding box.
pub fn build_grid_in(domain: &Domain, resolution: usize, lo: Point, hi: Point) -> Result<Grid> {
    domain.validate()?;
    if resolution < MIN_RESOLUTION {
        return invalid(format!("resolution {resolution} is below the minimum of {MIN_RESOLUTION}"));
    }
    let Domain::Ball { dim, center, radius } = domain else {
        return invalid("box domains are gridded on their own faces; use build_grid");
    };
    let dim = *dim;
    for k in 0..dim {
        if !(lo[k] < center[k] - radius && center[k] + radius < hi[k]) {
            return invalid("domain is not strictly inside the bounding box");
        }
    }
    let mut spacing = [1.0; 3];
    let mut counts = [1; 3];
    for k in 0..dim {
        spacing[k] = (hi[k] - lo[k]) / (resolution - 1) as f64;
        counts[k] = resolution;
    }
    let mut g = Grid::empty(domain.clone(), lo, spacing, counts, false);
    let inside: Vec<bool> = (0..g.n_nodes())
        .map(|i| norm(&sub(&g.position(i), center)) <= radius * (1.0 + 1e-12))
        .collect();
    for i in 0..g.n_nodes() {
        g.kinds[i] = if !inside[i] {
            NodeKind::Exterior
        } else if (0..dim).all(|a| {
            [-1, 1]
                .iter()
                .all(|&d| g.neighbor(i, a, d).map_or(false, |j| inside[j]))
        }) {
            NodeKind::Interior
        } else {
            NodeKind::Boundary
        };
    }
    let mut bnodes: Vec<BoundaryNode> = (0..g.n_nodes())
        .filter(|&i| g.kinds[i] == NodeKind::Boundary)
        .map(|i| {
            let x = g.position(i);
            let r = sub(&x, center);
            BoundaryNode {
                node: i,
                position: x,
                normal: scale(&r, 1.0 / norm(&r)),
                weight: 0.0,
                face: None,
            }
        })
        .collect();
    if dim == 2 {
        sphere_weights_2d(&mut bnodes, *radius);
    } else {
        sphere_weights_3d(&mut bnodes, *radius, spacing[0].min(spacing[1]).min(spacing[2]));
    }
    g.set_boundary(bnodes);
    Ok(g)
}

/// Arc length between neighbouring projected nodes, split at midpoints.
fn sphere_weights_2d(nodes: &mut [BoundaryNode], radius: f64) {
    let mut order: Vec<(f64, usize)> = nodes
        .iter()
        .enumerate()
        .map(|(i, b)| (b.normal[1].atan2(b.normal[0]), i))
        .collect();
    order.sort_by(|a, b| a.0.partial_cmp(&b.0).unwrap().then(a.1.cmp(&b.1)));
    let n = order.len();
    for k in 0..n {
        let prev = order[(k + n - 1) % n].0;
        let next = order[(k + 1) % n].0;
        let mut gap = next - prev;
        if gap <= 0.0 {
            gap += 2.0 * PI;
        }
        nodes[order[k].1].weight = 0.5 * radius * gap;
    }
}

/// Area of each projected node's nearest-point cell, measured on a fine
/// latitude/longitude partition with exact cell areas.
fn sphere_weights_3d(nodes: &mut [BoundaryNode], radius: f64, s: f64) {
    let cell = 2.0 * s / radius;
    let nb = ((2.0 / cell).ceil() as usize).max(1);
    let bucket_of = |p: &Point| -> [usize; 3] {
        let f = |v: f64| (((v + 1.0) / 2.0 * nb as f64).floor() as usize).min(nb - 1);
        [f(p[0]), f(p[1]), f(p[2])]
    };
    let mut buckets: Vec<Vec<usize>> = vec![Vec::new(); nb * nb * nb];
    for (i, b) in nodes.iter().enumerate() {
        let [x, y, z] = bucket_of(&b.normal);
        buckets[x + nb * (y + nb * z)].push(i);
    }
    let nearest = |p: &Point| -> usize {
        let c = bucket_of(p);
        let mut reach = 1usize;
        loop {
            let mut best = (f64::INFINITY, usize::MAX);
            let lo = |v: usize| v.saturating_sub(reach);
            let hi = |v: usize| (v + reach).min(nb - 1);
            for z in lo(c[2])..=hi(c[2]) {
                for y in lo(c[1])..=hi(c[1]) {
                    for x in lo(c[0])..=hi(c[0]) {
                        for &i in &buckets[x + nb * (y + nb * z)] {
                            let d = norm(&sub(&nodes[i].normal, p));
                            if d < best.0 || (d == best.0 && i < best.1) {
                                best = (d, i);
                            }
                        }
                    }
                }
            }
            if best.1 != usize::MAX && (best.0 <= (reach as f64) * 2.0 / nb as f64 || reach >= nb) {
                return best.1;
            }
            reach += 1;
        }
    };
    let nt = ((12.0 * radius / s).ceil() as usize).max(16);
    let np = 2 * nt;
    let dphi = 2.0 * PI / np as f64;
    let mut acc = vec![0.0; nodes.len()];
    for it in 0..nt {
        let (ta, tb) = (PI * it as f64 / nt as f64, PI * (it + 1) as f64 / nt as f64);
        let area = radius * radius * (ta.cos() - tb.cos()) * dphi;
        let tm = 0.5 * (ta + tb);
        for ip in 0..np {
            let pm = (ip as f64 + 0.5) * dphi;
            let p = [tm.sin() * pm.cos(), tm.sin() * pm.sin(), tm.cos()];
            acc[nearest(&p)] += area;
        }
    }
    for (b, w) in nodes.iter_mut().zip(acc) {
        b.weight = w;
    }
}

impl Grid {
    fn empty(domain: Domain, origin: Point, spacing: Point, counts: [usize; 3], fitted: bool) -> Self {
        let n = counts.iter().product();
        Grid {
            dim: domain.dim(),
            origin,
            spacing,
            counts,
            kinds: vec![NodeKind::Interior; n],
            boundary: Vec::new(),
            domain,
            slot: vec![usize::MAX; n],
            interior: Vec::new(),
            fitted_box: fitted,
        }
    }

    fn fitted_box(domain: Domain, origin: Point, spacing: Point, res: usize) -> Self {
        let dim = domain.dim();
        let mut counts = [1; 3];
        for c in counts.iter_mut().take(dim) {
            *c = res;
        }
        let mut g = Grid::empty(domain, origin, spacing, counts, true);
        let mut bnodes = Vec::new();
        for i in 0..g.n_nodes() {
            let ijk = g.ijk(i);
            let faces: Vec<Face> = (0..dim)
                .filter_map(|a| {
                    if ijk[a] == 0 {
                        Some(Face { axis: a, outward: -1 })
                    } else if ijk[a] == counts[a] - 1 {
                        Some(Face { axis: a, outward: 1 })
                    } else {
                        None
                    }
                })
                .collect();
            if faces.is_empty() {
                continue;
            }
            g.kinds[i] = NodeKind::Boundary;
            let mut nrm = [0.0; 3];
            let mut weight = 0.0;
            for f in &faces {
                nrm[f.axis] = f.outward as f64;
                let mut w = 1.0;
                for t in (0..dim).filter(|&t| t != f.axis) {
                    let edge = ijk[t] == 0 || ijk[t] == counts[t] - 1;
                    w *= spacing[t] * if edge { 0.5 } else { 1.0 };
                }
                weight += w;
            }
            let len = norm(&nrm);
            bnodes.push(BoundaryNode {
                node: i,
                position: g.position(i),
                normal: scale(&nrm, 1.0 / len),
                weight,
                face: if faces.len() == 1 { Some(faces[0]) } else { None },
            });
        }
        g.set_boundary(bnodes);
        g
    }

    fn set_boundary(&mut self, nodes: Vec<BoundaryNode>) {
        for (k, b) in nodes.iter().enumerate() {
            self.slot[b.node] = k;
        }
        self.boundary = nodes;
        self.interior = (0..self.n_nodes())
            .filter(|&i| self.kinds[i] == NodeKind::Interior)
            .collect();
    }

    pub fn n_nodes(&self) -> usize {
        self.kinds.len()
    }

    pub fn n_active(&self) -> usize {
        self.interior.len() + self.boundary.len()
    }

    pub fn interior(&self) -> &[usize] {
        &self.interior
    }

    /// True when Ω is a box whose faces are grid planes.
    pub fn is_fitted_box(&self) -> bool {
        self.fitted_box
    }

    pub fn boundary_slot(&self, node: usize) -> Option<usize> {
        match self.slot[node] {
            usize::MAX => None,
            k => Some(k),
        }
    }

    pub fn index(&self, ijk: [usize; 3]) -> usize {
        ijk[0] + self.counts[0] * (ijk[1] + self.counts[1] * ijk[2])
    }

    pub fn ijk(&self, idx: usize) -> [usize; 3] {
        let [nx, ny, _] = self.counts;
        [idx % nx, (idx / nx) % ny, idx / (nx * ny)]
    }

    pub fn position(&self, idx: usize) -> Point {
        let ijk = self.ijk(idx);
        let mut p = [0.0; 3];
        for k in 0..self.dim {
            p[k] = self.origin[k] + self.spacing[k] * ijk[k] as f64;
        }
        p
    }

    pub fn stride(&self, axis: usize) -> usize {
        match axis {
            0 => 1,
            1 => self.counts[0],
            _ => self.counts[0] * self.counts[1],
        }
    }

    pub fn neighbor(&self, idx: usize, axis: usize, dir: i64) -> Option<usize> {
        let i = self.ijk(idx)[axis] as i64 + dir;
        if i < 0 || i >= self.counts[axis] as i64 {
            return None;
        }
        let st = self.stride(axis) as i64;
        Some((idx as i64 + dir * st) as usize)
    }

    /// Volume of one grid cell.
    pub fn cell_volume(&self) -> f64 {
        self.spacing[..self.dim].iter().product()
    }

    pub fn total_boundary_weight(&self) -> f64 {
        let w: Vec<f64> = self.boundary.iter().map(|b| b.weight).collect();
        crate::sum::pairwise(&w)
    }

    /// Boundary quadrature of a real function.
    pub fn integrate_boundary(&self, f: impl Fn(&Point) -> f64) -> f64 {
        let w: Vec<f64> = self.boundary.iter().map(|b| b.weight * f(&b.position)).collect();
        crate::sum::pairwise(&w)
    }

    pub fn max_normal_defect(&self) -> f64 {
        self.boundary
            .iter()
            .map(|b| (dot(&b.normal, &b.normal).sqrt() - 1.0).abs())
            .fold(0.0, f64::max)
    }
}
