//! Run configuration: TOML (or JSON with the same schema), validation and
//! the content hash stamped on every output.

use std::path::{Path, PathBuf};

use enclosure::cgo::{AmplitudeOptions, AmplitudeSeed};
use enclosure::geometry::{Ball, Domain, ObstacleShape, Point};
use enclosure::media::{MediumSpec, Profile};
use enclosure::reconstruct::{FitOptions, Placement, ProbeLayout, ProbeSettings, TRule};
use enclosure::solver::KrylovConfig;
use enclosure::{Error, Result, C64};
use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

/// A real number or an `[re, im]` pair.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(untagged)]
pub enum Complex {
    Real(f64),
    Pair([f64; 2]),
}

impl Complex {
    pub fn value(self) -> C64 {
        match self {
            Complex::Real(r) => C64::new(r, 0.0),
            Complex::Pair([re, im]) => C64::new(re, im),
        }
    }
}

impl Default for Complex {
    fn default() -> Self {
        Complex::Real(0.0)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case", deny_unknown_fields)]
pub enum DomainShape {
    Box { lo: Vec<f64>, hi: Vec<f64> },
    Ball { center: Vec<f64>, radius: f64 },
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DomainBlock {
    pub dim: usize,
    /// Nodes per axis.
    pub resolution: usize,
    #[serde(flatten)]
    pub shape: DomainShape,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct BallConfig {
    pub center: Vec<f64>,
    pub radius: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case", deny_unknown_fields)]
pub enum ObstacleConfig {
    None,
    Ball { center: Vec<f64>, radius: f64 },
    Balls { balls: Vec<BallConfig> },
    Ellipsoid { center: Vec<f64>, semi_axes: Vec<f64> },
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct MediumBlock {
    pub kappa: f64,
    #[serde(default)]
    pub gamma_d: Complex,
    #[serde(default)]
    pub q_d: Complex,
    #[serde(default)]
    pub a_d: Vec<Complex>,
    pub obstacle: ObstacleConfig,
}

fn default_order() -> usize {
    2
}
fn one() -> Complex {
    Complex::Real(1.0)
}
fn default_hs() -> Vec<f64> {
    vec![0.2, 0.15, 0.1, 0.075, 0.05]
}
fn default_cells() -> usize {
    AmplitudeOptions::default().cells
}
fn default_margin() -> usize {
    AmplitudeOptions::default().margin
}
fn default_r_min() -> f64 {
    AmplitudeOptions::default().r_min_fraction
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct CgoBlock {
    #[serde(default = "default_order")]
    pub order: usize,
    #[serde(default = "one")]
    pub g0: Complex,
    #[serde(default = "one")]
    pub g1: Complex,
    #[serde(default = "default_r_min")]
    pub r_min_fraction: f64,
    #[serde(default = "default_cells")]
    pub cells: usize,
    #[serde(default = "default_margin")]
    pub margin: usize,
    #[serde(default = "default_hs")]
    pub hs: Vec<f64>,
    #[serde(default)]
    pub t_rule: TRule,
}

impl Default for CgoBlock {
    fn default() -> Self {
        CgoBlock {
            order: 2,
            g0: one(),
            g1: one(),
            r_min_fraction: default_r_min(),
            cells: default_cells(),
            margin: default_margin(),
            hs: default_hs(),
            t_rule: TRule::default(),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, Default)]
#[serde(rename_all = "snake_case")]
pub enum PlacementKind {
    Ring,
    #[default]
    AxisFans,
    Sphere,
}

fn default_count() -> usize {
    8
}
fn default_radius() -> f64 {
    2.2
}
fn default_spread() -> f64 {
    20.0
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ProbesBlock {
    #[serde(default)]
    pub placement: PlacementKind,
    #[serde(default = "default_count")]
    pub count: usize,
    /// Distance from the centre of Ω.
    #[serde(default = "default_radius")]
    pub radius: f64,
    #[serde(default = "default_spread")]
    pub spread_deg: f64,
    #[serde(default)]
    pub offset_deg: f64,
    #[serde(default)]
    pub jitter_deg: f64,
    /// Explicit probe points; replace the layout when present.
    #[serde(default)]
    pub points: Vec<Vec<f64>>,
}

impl Default for ProbesBlock {
    fn default() -> Self {
        ProbesBlock {
            placement: PlacementKind::default(),
            count: default_count(),
            radius: default_radius(),
            spread_deg: default_spread(),
            offset_deg: 0.0,
            jitter_deg: 0.0,
            points: Vec::new(),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SolverBlock {
    pub tol: f64,
    pub max_iter: usize,
    pub restart: usize,
}

impl Default for SolverBlock {
    fn default() -> Self {
        let k = KrylovConfig::default();
        SolverBlock { tol: k.tol, max_iter: k.max_iter, restart: k.restart }
    }
}

fn zero_offsets() -> Vec<f64> {
    vec![0.0]
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SweepBlock {
    /// Offsets added to the t-rule level; one lattice layer each.
    #[serde(default = "zero_offsets")]
    pub t_offsets: Vec<f64>,
}

impl Default for SweepBlock {
    fn default() -> Self {
        SweepBlock { t_offsets: zero_offsets() }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, Default)]
#[serde(rename_all = "snake_case")]
pub enum ForwardCase {
    /// f = (x1, 0)
    #[default]
    Linear,
    /// f = (|x|², 2n)
    Quadratic,
    /// u = Π sin(π x_k) with its source
    Manufactured,
    /// Traces of the first probe's CGO at the largest h.
    Probe,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize, Default)]
#[serde(deny_unknown_fields)]
pub struct ForwardBlock {
    #[serde(default)]
    pub case: ForwardCase,
}

/// Explicit norms for the smallness check; missing ones are derived from
/// the medium.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize, Default)]
#[serde(deny_unknown_fields)]
pub struct AdmissibilityBlock {
    pub a_inv_norm: Option<f64>,
    pub b_norm: Option<f64>,
    pub c_norm: Option<f64>,
    pub domain_volume: Option<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RunConfig {
    #[serde(default)]
    pub seed: u64,
    #[serde(default)]
    pub output: Option<PathBuf>,
    pub domain: DomainBlock,
    pub medium: MediumBlock,
    #[serde(default)]
    pub cgo: CgoBlock,
    #[serde(default)]
    pub fit: FitOptions,
    #[serde(default)]
    pub probes: ProbesBlock,
    #[serde(default)]
    pub solver: SolverBlock,
    #[serde(default)]
    pub sweep: SweepBlock,
    #[serde(default)]
    pub forward: ForwardBlock,
    #[serde(default)]
    pub admissibility: AdmissibilityBlock,
}

fn bad(msg: impl Into<String>) -> Error {
    Error::Validation(msg.into())
}

fn point(v: &[f64], dim: usize, what: &str) -> Result<Point> {
    if v.len() != dim {
        return Err(bad(format!("{what} needs {dim} coordinates, got {}", v.len())));
    }
    let mut p = [0.0; 3];
    p[..dim].copy_from_slice(v);
    Ok(p)
}

impl RunConfig {
    pub fn load(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path).map_err(|e| bad(format!("{}: {e}", path.display())))?;
        let cfg: RunConfig = match path.extension().and_then(|e| e.to_str()) {
            Some("json") => serde_json::from_str(&text).map_err(|e| bad(format!("{}: {e}", path.display())))?,
            _ => toml::from_str(&text).map_err(|e| bad(format!("{}: {e}", path.display())))?,
        };
        cfg.validate()?;
        Ok(cfg)
    }

    /// SHA-256 of the canonical JSON form, ignoring the output directory.
    pub fn hash(&self) -> String {
        let mut c = self.clone();
        c.output = None;
        let json = serde_json::to_string(&c).expect("config serializes");
        hex::encode(Sha256::digest(json.as_bytes()))
    }

    pub fn dim(&self) -> usize {
        self.domain.dim
    }

    pub fn validate(&self) -> Result<()> {
        let domain = self.domain()?;
        if self.domain.resolution < 8 {
            return Err(bad("domain.resolution must be at least 8"));
        }
        let medium = self.medium()?;
        medium.validate(&domain)?;
        self.probe_settings()?.validate()?;
        if self.cgo.cells < 16 || !(self.cgo.r_min_fraction > 0.0) {
            return Err(bad("cgo.cells must be at least 16 and cgo.r_min_fraction positive"));
        }
        if self.sweep.t_offsets.is_empty() || self.sweep.t_offsets.iter().any(|t| !t.is_finite()) {
            return Err(bad("sweep.t_offsets must be a non-empty list of finite numbers"));
        }
        if !(self.solver.tol > 0.0) || self.solver.max_iter == 0 || self.solver.restart == 0 {
            return Err(bad("solver tolerance, iteration cap and restart must be positive"));
        }
        if matches!(self.cgo.t_rule, TRule::TruthOffset(_)) && medium.shape.is_none() {
            return Err(bad("a truth-relative t rule needs an obstacle"));
        }
        self.probe_points()?;
        Ok(())
    }

    pub fn domain(&self) -> Result<Domain> {
        let dim = self.domain.dim;
        if dim != 2 && dim != 3 {
            return Err(bad(format!("domain.dim must be 2 or 3, got {dim}")));
        }
        let d = match &self.domain.shape {
            DomainShape::Box { lo, hi } => Domain::Box { dim, lo: point(lo, dim, "domain.lo")?, hi: point(hi, dim, "domain.hi")? },
            DomainShape::Ball { center, radius } => Domain::Ball { dim, center: point(center, dim, "domain.center")?, radius: *radius },
        };
        d.validate()?;
        Ok(d)
    }

    pub fn obstacle(&self) -> Result<Option<ObstacleShape>> {
        let dim = self.domain.dim;
        let shape = match &self.medium.obstacle {
            ObstacleConfig::None => return Ok(None),
            ObstacleConfig::Ball { center, radius } => ObstacleShape::Ball { center: point(center, dim, "obstacle.center")?, radius: *radius },
            ObstacleConfig::Balls { balls } => ObstacleShape::Union {
                balls: balls
                    .iter()
                    .map(|b| Ok(Ball { center: point(&b.center, dim, "obstacle.balls.center")?, radius: b.radius }))
                    .collect::<Result<Vec<_>>>()?,
            },
            ObstacleConfig::Ellipsoid { center, semi_axes } => ObstacleShape::Ellipsoid {
                center: point(center, dim, "obstacle.center")?,
                semi_axes: point(semi_axes, dim, "obstacle.semi_axes")?,
            },
        };
        shape.validate_params(dim)?;
        Ok(Some(shape))
    }

    pub fn medium(&self) -> Result<MediumSpec> {
        let m = &self.medium;
        let dim = self.domain.dim;
        if !m.a_d.is_empty() && m.a_d.len() != dim {
            return Err(bad(format!("medium.a_d needs {dim} components")));
        }
        let mut a_d = [C64::new(0.0, 0.0); 3];
        for (k, a) in m.a_d.iter().enumerate() {
            a_d[k] = a.value();
        }
        Ok(MediumSpec {
            gamma_d: Profile::constant(m.gamma_d.value()),
            q_d: Profile::constant(m.q_d.value()),
            a_d,
            kappa: m.kappa,
            shape: self.obstacle()?,
        })
    }

    pub fn krylov(&self) -> KrylovConfig {
        KrylovConfig { tol: self.solver.tol, max_iter: self.solver.max_iter, restart: self.solver.restart }
    }

    pub fn probe_settings(&self) -> Result<ProbeSettings> {
        let c = &self.cgo;
        Ok(ProbeSettings {
            order: c.order,
            seed: AmplitudeSeed { g0: c.g0.value(), g1: c.g1.value() },
            amplitude: AmplitudeOptions { cells: c.cells, margin: c.margin, r_min_fraction: c.r_min_fraction },
            hs: c.hs.clone(),
            t_rule: c.t_rule,
            fit: self.fit,
        })
    }

    pub fn layout(&self) -> ProbeLayout {
        let p = &self.probes;
        let placement = match p.placement {
            PlacementKind::Ring => Placement::Ring { offset_deg: p.offset_deg },
            PlacementKind::AxisFans => Placement::AxisFans { spread_deg: p.spread_deg },
            PlacementKind::Sphere => Placement::Sphere,
        };
        ProbeLayout { placement, count: p.count, radius: p.radius, jitter_deg: p.jitter_deg, seed: self.seed }
    }

    pub fn probe_points(&self) -> Result<Vec<Point>> {
        let domain = self.domain()?;
        if self.probes.points.is_empty() {
            return enclosure::reconstruct::place_probes(&domain, &self.layout());
        }
        self.probes
            .points
            .iter()
            .map(|p| {
                let x = point(p, self.domain.dim, "probes.points")?;
                if !domain.outside_hull(&x) {
                    return Err(bad("probe points must lie outside the domain"));
                }
                Ok(x)
            })
            .collect()
    }
}
