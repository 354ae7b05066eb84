//! The five subcommands.

use std::collections::HashMap;
use std::f64::consts::PI;
use std::fs;
use std::path::{Path, PathBuf};

use enclosure::cgo::{
    build_amplitudes, build_probe, fit_power, verify_eikonal, wkb_residual, Amplitudes, EikonalReport, OVERFLOW_LIMIT,
};
use enclosure::geometry::{build_grid, dist, Grid, NodeKind, Point};
use enclosure::indicator::{IndicatorEngine, IndicatorSample};
use enclosure::io::{self, ArrayHeader, CsvSink, RunMeta};
use enclosure::media::{check_admissibility, AdmissibilityReport, MediumSpec, Profile};
use enclosure::reconstruct::{build_enclosure, fit_support, probe_frame, score_reconstruction, ReconstructionScore, SupportEstimate};
use enclosure::solver::{extract_dtn, ForwardSolver, NavierData};
use enclosure::{Error, Result, C64};
use rayon::prelude::*;
use serde::Serialize;

use crate::config::{ForwardCase, RunConfig};

pub struct Context {
    pub cfg: RunConfig,
    pub meta: RunMeta,
    pub out: PathBuf,
    pub pool: rayon::ThreadPool,
    pub resume: bool,
}

impl Context {
    pub fn new(cfg: RunConfig, out: Option<PathBuf>, jobs: usize, resume: bool) -> Result<Self> {
        let out = out.or_else(|| cfg.output.clone()).unwrap_or_else(|| PathBuf::from("out"));
        fs::create_dir_all(&out).map_err(|e| Error::Validation(format!("{}: {e}", out.display())))?;
        let pool = rayon::ThreadPoolBuilder::new()
            .num_threads(jobs.max(1))
            .build()
            .map_err(|e| Error::Validation(e.to_string()))?;
        let meta = RunMeta::new(cfg.hash(), cfg.dim());
        Ok(Context { cfg, meta, out, pool, resume })
    }

    fn path(&self, name: &str) -> PathBuf {
        self.out.join(name)
    }

    fn grid(&self) -> Result<Grid> {
        build_grid(&self.cfg.domain()?, self.cfg.domain.resolution)
    }
}

fn c(x: f64) -> C64 {
    C64::new(x, 0.0)
}

#[derive(Serialize)]
struct ForwardReport {
    case: ForwardCase,
    nodes: usize,
    boundary_nodes: usize,
    iterations: usize,
    residual: f64,
    /// Max nodal error against the closed-form solution, when one exists.
    max_error: Option<f64>,
}

pub fn forward(ctx: &Context) -> Result<()> {
    let cfg = &ctx.cfg;
    let grid = ctx.grid()?;
    let medium = cfg.medium()?;
    let dim = grid.dim;
    let n = dim as f64;
    let kappa = medium.kappa;
    let background = medium.shape.is_none();
    type Exact = Box<dyn Fn(&Point) -> f64>;
    let (data, source, exact): (NavierData, Option<Vec<C64>>, Option<Exact>) = match cfg.forward.case {
        ForwardCase::Linear => {
            let exact: Option<Exact> = (background && kappa == 0.0).then(|| Box::new(|x: &Point| x[0]) as Exact);
            (NavierData::from_fn(&grid, |x| c(x[0]), |_| c(0.0)), None, exact)
        }
        ForwardCase::Quadratic => {
            let r2 = move |x: &Point| x[..dim].iter().map(|v| v * v).sum::<f64>();
            let exact: Option<Exact> = (background && kappa == 0.0).then(|| Box::new(move |x: &Point| r2(x)) as Exact);
            (NavierData::from_fn(&grid, move |x| c(r2(x)), move |_| c(2.0 * n)), None, exact)
        }
        ForwardCase::Manufactured => {
            let ustar = move |x: &Point| (0..dim).map(|k| (PI * x[k]).sin()).product::<f64>();
            let src = (0..grid.n_nodes())
                .map(|i| c(-(n * n * PI.powi(4) + kappa * kappa) * ustar(&grid.position(i))))
                .collect();
            let exact: Option<Exact> = background.then(|| Box::new(ustar) as Exact);
            (NavierData::from_fn(&grid, |x| c(ustar(x)), |x| c(-n * PI * PI * ustar(x))), Some(src), exact)
        }
        ForwardCase::Probe => {
            let settings = cfg.probe_settings()?;
            let x0 = cfg.probe_points()?[0];
            let domain = cfg.domain()?;
            let truth = truth_of(&medium, &domain, &x0)?;
            let t = settings.t_rule.level(&domain, &x0, truth)?;
            let frame = probe_frame(&domain, &x0)?;
            let amps = build_amplitudes(&grid, &frame, kappa, settings.seed, settings.order, &settings.amplitude)?;
            let probe = build_probe(&grid, &frame.with_level(t, settings.hs[0]), &amps, settings.order)?;
            (probe.data, None, None)
        }
    };
    let sol = ForwardSolver::with_config(&grid, &medium, cfg.krylov())?.solve(&data, source.as_deref())?;
    let dtn = extract_dtn(&grid, kappa, &sol.u.values, &sol.m.values, source.as_deref());
    let max_error = exact.map(|f| {
        (0..grid.n_nodes())
            .filter(|&i| grid.kinds[i] != NodeKind::Exterior)
            .map(|i| (sol.u.values[i] - f(&grid.position(i))).norm())
            .fold(0.0, f64::max)
    });
    io::write_complex_field(&ctx.path("u.bin"), &grid, "u", &sol.u.values, &ctx.meta)?;
    io::write_complex_field(&ctx.path("m.bin"), &grid, "m", &sol.m.values, &ctx.meta)?;
    io::write_dtn_csv(&ctx.path("dtn.csv"), &grid, &dtn, &ctx.meta)?;
    let report = ForwardReport {
        case: cfg.forward.case,
        nodes: grid.n_nodes(),
        boundary_nodes: grid.boundary.len(),
        iterations: sol.report.iterations,
        residual: sol.report.residual,
        max_error,
    };
    io::write_report(&ctx.path("forward.json"), &report, &ctx.meta)
}

fn truth_of(medium: &MediumSpec, domain: &enclosure::geometry::Domain, x0: &Point) -> Result<Option<f64>> {
    medium.shape.as_ref().map(|s| s.support_log_distance(domain, x0)).transpose()
}

#[derive(Serialize)]
struct OrderFit {
    order: usize,
    hs: Vec<f64>,
    residuals: Vec<f64>,
    exponent: f64,
}

#[derive(Serialize)]
struct OverflowMargin {
    h: f64,
    max_exponent: f64,
    margin: f64,
}

#[derive(Serialize)]
struct ProbeCheck {
    x0: Vec<f64>,
    w: Vec<f64>,
    t: f64,
    eikonal: EikonalReport,
    residual_orders: Vec<OrderFit>,
    overflow: Vec<OverflowMargin>,
}

#[derive(Serialize)]
struct CgoReport {
    eikonal_tolerance: f64,
    all_eikonal_ok: bool,
    probes: Vec<ProbeCheck>,
}

const RESIDUAL_HS: [f64; 4] = [0.4, 0.2, 0.1, 0.05];

pub fn cgo_check(ctx: &Context) -> Result<()> {
    let cfg = &ctx.cfg;
    let grid = ctx.grid()?;
    let domain = cfg.domain()?;
    let medium = cfg.medium()?;
    let settings = cfg.probe_settings()?;
    let points = cfg.probe_points()?;
    let checks = ctx.pool.install(|| {
        points
            .par_iter()
            .map(|x0| -> Result<(ProbeCheck, Amplitudes)> {
                let frame = probe_frame(&domain, x0)?;
                let t = settings.t_rule.level(&domain, x0, truth_of(&medium, &domain, x0)?)?;
                let eikonal = verify_eikonal(&frame.with_level(t, settings.hs[0]), &grid);
                let amps = build_amplitudes(&grid, &frame, medium.kappa, settings.seed, settings.order, &settings.amplitude)?;
                let mut residual_orders = Vec::new();
                for k in 0..=settings.order {
                    let r = wkb_residual(&amps, k, &RESIDUAL_HS)?;
                    let exponent = fit_power(&RESIDUAL_HS, &r)?.exponent;
                    residual_orders.push(OrderFit { order: k, hs: RESIDUAL_HS.to_vec(), residuals: r, exponent });
                }
                let near = (0..grid.n_nodes())
                    .filter(|&i| grid.kinds[i] != NodeKind::Exterior)
                    .map(|i| dist(&grid.position(i), x0))
                    .fold(f64::INFINITY, f64::min);
                let overflow = settings
                    .hs
                    .iter()
                    .map(|&h| {
                        let e = (t - near.ln()) / h;
                        OverflowMargin { h, max_exponent: e, margin: OVERFLOW_LIMIT - e }
                    })
                    .collect();
                let d = grid.dim;
                let check = ProbeCheck { x0: x0[..d].to_vec(), w: frame.w[..d].to_vec(), t, eikonal, residual_orders, overflow };
                Ok((check, amps))
            })
            .collect::<Result<Vec<_>>>()
    })?;
    if let Some((_, amps)) = checks.first() {
        for k in 0..=amps.order {
            let values = amps.field(k).expect("order within range");
            let r = &amps.rect;
            let header = ArrayHeader {
                dims: [r.counts[0], r.counts[1], 1],
                origin: [r.lo.re, r.lo.im, 0.0],
                spacing: [r.spacing[0], r.spacing[1], 0.0],
                dtype: "f64".into(),
                components: 2,
                name: format!("a{k}"),
                meta: ctx.meta.clone(),
            };
            io::write_complex_array(&ctx.path(&format!("amplitude_a{k}.bin")), header, &values)?;
        }
    }
    let probes: Vec<ProbeCheck> = checks.into_iter().map(|(c, _)| c).collect();
    let report = CgoReport {
        eikonal_tolerance: enclosure::cgo::EIKONAL_TOL,
        all_eikonal_ok: probes.iter().all(|p| !p.eikonal.flagged),
        probes,
    };
    io::write_report(&ctx.path("cgo_report.json"), &report, &ctx.meta)
}

/// One (probe, t, h) sample of the lattice.
#[derive(Debug, Clone, Copy)]
struct Task {
    probe: usize,
    t: f64,
    h: f64,
}

type Key = [u64; 8];

fn key(x0: &Point, w: &Point, t: f64, h: f64) -> Key {
    [x0[0], x0[1], x0[2], w[0], w[1], w[2], t, h].map(f64::to_bits)
}

/// Runs (or resumes) the indicator lattice and returns the samples in
/// lattice order. The CSV at `path` is the checkpoint.
fn run_lattice(ctx: &Context, path: &Path, t_offsets: &[f64]) -> Result<Vec<IndicatorSample>> {
    let cfg = &ctx.cfg;
    let dim = cfg.dim();
    let grid = ctx.grid()?;
    let domain = cfg.domain()?;
    let medium = cfg.medium()?;
    let settings = cfg.probe_settings()?;
    let points = cfg.probe_points()?;
    let frames = points.iter().map(|x| probe_frame(&domain, x)).collect::<Result<Vec<_>>>()?;
    let mut tasks = Vec::new();
    for (p, x0) in points.iter().enumerate() {
        let level = settings.t_rule.level(&domain, x0, truth_of(&medium, &domain, x0)?)?;
        for &dt in t_offsets {
            for &h in &settings.hs {
                tasks.push(Task { probe: p, t: level + dt, h });
            }
        }
    }
    let task_key = |t: &Task| key(&points[t.probe], &frames[t.probe].w, t.t, t.h);
    let wanted: HashMap<Key, usize> = tasks.iter().enumerate().map(|(i, t)| (task_key(t), i)).collect();
    let mut done: Vec<Option<IndicatorSample>> = vec![None; tasks.len()];
    if ctx.resume && path.exists() {
        let (meta, rows) = io::read_indicator_csv(path, dim)?;
        if meta.config_hash != ctx.meta.config_hash {
            return Err(Error::Validation(format!("{} was written by a different configuration", path.display())));
        }
        for s in rows {
            if let Some(&i) = wanted.get(&key(&s.x0, &s.w, s.t, s.h)) {
                done[i] = Some(s);
            }
        }
    }
    let completed: Vec<IndicatorSample> = done.iter().flatten().copied().collect();
    io::write_indicator_csv(path, &completed, dim, &ctx.meta)?;
    let pending: Vec<usize> = (0..tasks.len()).filter(|&i| done[i].is_none()).collect();
    if !pending.is_empty() {
        let engine = IndicatorEngine::new(&grid, &medium, cfg.krylov())?;
        let mut needed: Vec<usize> = pending.iter().map(|&i| tasks[i].probe).collect();
        needed.dedup();
        let amps: HashMap<usize, Amplitudes> = ctx.pool.install(|| {
            needed
                .par_iter()
                .map(|&p| {
                    build_amplitudes(&grid, &frames[p], medium.kappa, settings.seed, settings.order, &settings.amplitude)
                        .map(|a| (p, a))
                })
                .collect::<Result<HashMap<_, _>>>()
        })?;
        let mut sink = CsvSink::append(path)?;
        let batch = 2 * ctx.pool.current_num_threads();
        for chunk in pending.chunks(batch) {
            let results: Vec<Result<IndicatorSample>> = ctx.pool.install(|| {
                chunk
                    .par_iter()
                    .map(|&i| {
                        let t = &tasks[i];
                        engine.sample(&amps[&t.probe], settings.order, t.h, t.t)
                    })
                    .collect()
            });
            for (&i, r) in chunk.iter().zip(results) {
                let s = r?;
                sink.row(&io::indicator_row(&s, dim))?;
                done[i] = Some(s);
            }
        }
    }
    let all: Vec<IndicatorSample> = done.into_iter().map(|s| s.expect("every task completed")).collect();
    io::write_indicator_csv(path, &all, dim, &ctx.meta)?;
    Ok(all)
}

pub fn sweep(ctx: &Context) -> Result<()> {
    run_lattice(ctx, &ctx.path("indicator_table.csv"), &ctx.cfg.sweep.t_offsets)?;
    Ok(())
}

#[derive(Serialize)]
struct ProbeSummary {
    x0: Vec<f64>,
    w: Vec<f64>,
    t: f64,
    h_d_hat: f64,
    h_d_true: Option<f64>,
    usable: bool,
    monotone: bool,
}

#[derive(Serialize)]
struct ReconstructReport<'a> {
    probes: Vec<ProbeSummary>,
    usable_probes: usize,
    mask_nodes: usize,
    score: Option<ReconstructionScore>,
    config: &'a RunConfig,
}

pub fn reconstruct(ctx: &Context) -> Result<()> {
    let cfg = &ctx.cfg;
    let dim = cfg.dim();
    let grid = ctx.grid()?;
    let domain = cfg.domain()?;
    let medium = cfg.medium()?;
    let samples = run_lattice(ctx, &ctx.path("indicator_table.csv"), &[0.0])?;
    let per = cfg.cgo.hs.len();
    let estimates = samples
        .chunks(per)
        .map(|g| {
            let mut e = fit_support(g, &cfg.fit)?;
            e.truth = truth_of(&medium, &domain, &e.x0)?;
            Ok(e)
        })
        .collect::<Result<Vec<SupportEstimate>>>()?;
    let mask = build_enclosure(&estimates, &grid)?;
    let score = medium.shape.as_ref().map(|s| score_reconstruction(&mask, &grid, s)).transpose()?;
    io::write_support_csv(&ctx.path("support_estimates.csv"), &estimates, dim, &ctx.meta)?;
    io::write_mask(&ctx.path("enclosure_mask.bin"), &grid, &mask, &ctx.meta)?;
    let report = ReconstructReport {
        probes: estimates
            .iter()
            .map(|e| ProbeSummary {
                x0: e.x0[..dim].to_vec(),
                w: e.w[..dim].to_vec(),
                t: e.t,
                h_d_hat: e.h_d_hat,
                h_d_true: e.truth,
                usable: e.usable,
                monotone: e.monotone,
            })
            .collect(),
        usable_probes: estimates.iter().filter(|e| e.usable).count(),
        mask_nodes: mask.count(),
        score,
        config: cfg,
    };
    io::write_report(&ctx.path("reconstruction.json"), &report, &ctx.meta)
}

#[derive(Serialize)]
struct AdmissibilityOutput {
    a_inv_norm: f64,
    b_norm: f64,
    c_norm: f64,
    kappa: f64,
    report: AdmissibilityReport,
}

fn gamma_inv_sup(medium: &MediumSpec) -> f64 {
    if medium.shape.is_none() {
        return 1.0;
    }
    let p = &medium.gamma_d;
    let ends = match p {
        Profile::Constant { value } => vec![*value],
        Profile::Radial { at_center, at_radius, .. } => vec![*at_center, *at_radius],
    };
    ends.iter().map(|g| 1.0 / (c(1.0) + g).norm()).fold(1.0, f64::max)
}

/// Norms default to sup 1/|γ̃|, |Ã| and 1 + sup|q_D| over Ω.
pub fn admissibility(ctx: &Context) -> Result<()> {
    let cfg = &ctx.cfg;
    let medium = cfg.medium()?;
    let domain = cfg.domain()?;
    let a = &cfg.admissibility;
    let has = medium.shape.is_some();
    let a_inv = a.a_inv_norm.unwrap_or_else(|| gamma_inv_sup(&medium));
    let b = a.b_norm.unwrap_or(if has { medium.a_d.iter().map(|v| v.norm_sqr()).sum::<f64>().sqrt() } else { 0.0 });
    let cn = a.c_norm.unwrap_or(if has { 1.0 + medium.q_d.sup_norm() } else { 1.0 });
    let vol = a.domain_volume.unwrap_or(domain.volume());
    let report = check_admissibility(a_inv, b, cn, medium.kappa, vol, cfg.dim())?;
    if !report.pass {
        eprintln!("warning: smallness conditions not met (lhs {:.4}, {:.4}); continuing", report.lhs_small1, report.lhs_small2);
    }
    let out = AdmissibilityOutput { a_inv_norm: a_inv, b_norm: b, c_norm: cn, kappa: medium.kappa, report };
    io::write_report(&ctx.path("admissibility.json"), &out, &ctx.meta)
}
