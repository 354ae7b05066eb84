use enclosure::cgo::{build_amplitudes, AmplitudeSeed, Amplitudes, Frame};
use enclosure::geometry::{build_grid, Domain, Grid, ObstacleShape, Point};
use enclosure::indicator::*;
use enclosure::media::{MediumSpec, Profile};
use enclosure::reconstruct::affine_fit;
use enclosure::solver::KrylovConfig;
use enclosure::C64;

const X0: Point = [2.2, 0.3, 0.0];

fn setup(res: usize) -> (Domain, Grid, ObstacleShape) {
    let domain = Domain::cube(2, 1.0);
    let grid = build_grid(&domain, res).unwrap();
    (domain, grid, ObstacleShape::ball([0.0; 3], 0.5))
}

fn amps(grid: &Grid) -> Amplitudes {
    let frame = Frame::perpendicular(2, X0, [0.0; 3]).unwrap();
    build_amplitudes(grid, &frame, 1.0, AmplitudeSeed::default(), 2, &Default::default()).unwrap()
}

#[test]
fn empty_obstacle_gives_zero() {
    let (_, grid, _) = setup(48);
    let medium = MediumSpec::background(1.0);
    let a = amps(&grid);
    let engine = IndicatorEngine::new(&grid, &medium, KrylovConfig::default()).unwrap();
    let p = engine.probe(&a, 2, 0.1, 0.5).unwrap();
    let (s, _) = engine.evaluate(&p).unwrap();
    let scale = p.data.f1.iter().map(|v| v.norm()).fold(0.0, f64::max);
    assert!(s.value.norm() <= 1e-10 * scale, "{}", s.value);
    assert!(s.value_volume_oracle.norm() <= 1e-10 * scale);
}

#[test]
fn t_shift_scales_exactly() {
    let (_, grid, shape) = setup(48);
    let medium = MediumSpec::with_inclusion(shape, 0.5, 1.0, 1.0);
    let a = amps(&grid);
    let engine = IndicatorEngine::new(&grid, &medium, KrylovConfig::default()).unwrap();
    for h in [0.1, 0.05] {
        let base = engine.sample(&a, 2, h, 0.5).unwrap().value;
        for dt in [0.1, -0.1] {
            let shifted = engine.sample(&a, 2, h, 0.5 + dt).unwrap().value;
            let predicted = base * (2.0 * dt / h).exp();
            assert!((shifted - predicted).norm() <= 1e-10 * shifted.norm(), "h={h} dt={dt}");
        }
    }
}

#[test]
fn volume_oracle_agrees_with_boundary_route() {
    let (domain, grid, shape) = setup(64);
    let hd = shape.support_log_distance(&domain, &X0).unwrap();
    let mut medium = MediumSpec::with_inclusion(shape, 0.5, 1.0, 1.0);
    let a = amps(&grid);
    for with_a in [false, true] {
        if with_a {
            medium.a_d = [C64::new(0.3, 0.1), C64::new(-0.2, 0.0), C64::new(0.0, 0.0)];
            medium.gamma_d = Profile::Radial { center: [0.0; 3], radius: 0.5, at_center: C64::new(0.3, 0.1), at_radius: C64::new(0.6, 0.0) };
        }
        let engine = IndicatorEngine::new(&grid, &medium, KrylovConfig::default()).unwrap();
        for (h, dt) in [(0.2, 0.0), (0.1, -0.1), (0.075, 0.1)] {
            let s = engine.sample(&a, 2, h, hd + dt).unwrap();
            assert!(s.oracle_gap() <= 1e-8, "first order {with_a}, h={h}: gap {}", s.oracle_gap());
        }
    }
}

#[test]
fn direct_route_matches_reflected_route_at_moderate_h() {
    let (domain, grid, shape) = setup(48);
    let hd = shape.support_log_distance(&domain, &X0).unwrap();
    let medium = MediumSpec::with_inclusion(shape, 0.5, 1.0, 1.0);
    let a = amps(&grid);
    let engine = IndicatorEngine::new(&grid, &medium, KrylovConfig::default()).unwrap();
    let p = engine.probe(&a, 2, 0.2, hd).unwrap();
    let (s, _) = engine.evaluate(&p).unwrap();
    let direct = indicator_boundary_direct(&grid, &medium, &p).unwrap();
    assert!((direct - s.value).norm() <= 1e-6 * s.value.norm(), "{direct} vs {}", s.value);
    let plain = indicator_boundary(&grid, &medium, &p).unwrap();
    assert!((plain - s.value).norm() <= 1e-12 * s.value.norm());
}

#[test]
fn decay_and_growth_on_either_side_of_the_support() {
    let (domain, grid, shape) = setup(64);
    let hd = shape.support_log_distance(&domain, &X0).unwrap();
    let medium = MediumSpec::with_inclusion(shape, 0.5, 1.0, 1.0);
    let a = amps(&grid);
    let engine = IndicatorEngine::new(&grid, &medium, KrylovConfig::default()).unwrap();
    let hs = [0.2, 0.15, 0.1];
    let inv: Vec<f64> = hs.iter().map(|h| 1.0 / h).collect();
    for (dt, sign) in [(-0.15, -1.0), (0.15, 1.0)] {
        let logs: Vec<f64> = hs.iter().map(|&h| engine.sample(&a, 2, h, hd + dt).unwrap().modulus().ln()).collect();
        let slope = affine_fit(&inv, &logs).unwrap().1;
        assert!(sign * slope >= 0.1, "dt={dt}: slope {slope}");
    }
}

#[test]
fn probe_norms_on_d_follow_the_scaling_laws() {
    let (domain, grid, shape) = setup(64);
    let hd = shape.support_log_distance(&domain, &X0).unwrap();
    let medium = MediumSpec::with_inclusion(shape.clone(), 0.5, 1.0, 1.0);
    let a = amps(&grid);
    let engine = IndicatorEngine::new(&grid, &medium, KrylovConfig::default()).unwrap();
    let hs = [0.2, 0.1, 0.05];
    let norms: Vec<NormDiagnostics> = hs
        .iter()
        .map(|&h| cgo_norm_diagnostics(&grid, &engine.probe(&a, 2, h, hd).unwrap(), &a, &shape).unwrap())
        .collect();
    assert!(norms.windows(2).all(|p| p[1].v < p[0].v));
    let lh: Vec<f64> = hs.iter().map(|h| h.ln()).collect();
    let lap: Vec<f64> = norms.iter().map(|n| n.lap.ln()).collect();
    let ratio: Vec<f64> = norms.iter().map(|n| (n.v / n.lap).ln()).collect();
    assert!(affine_fit(&lh, &lap).unwrap().1 <= 0.3);
    assert!((affine_fit(&lh, &ratio).unwrap().1 - 2.0).abs() <= 0.3);
}

#[test]
fn table_groups_feed_the_fit() {
    let (domain, grid, shape) = setup(48);
    let hd = shape.support_log_distance(&domain, &X0).unwrap();
    let medium = MediumSpec::with_inclusion(shape, 0.5, 1.0, 1.0);
    let a = amps(&grid);
    let engine = IndicatorEngine::new(&grid, &medium, KrylovConfig::default()).unwrap();
    let mut table = IndicatorTable { resolution: 48, order: 2, medium: "ball".into(), samples: Vec::new() };
    for h in [0.1, 0.2, 0.15] {
        table.insert(engine.sample(&a, 2, h, hd).unwrap()).unwrap();
    }
    let groups = table.groups();
    assert_eq!(groups.len(), 1);
    assert!(groups[0].windows(2).all(|p| p[0].h > p[1].h));
    assert!(table.insert(groups[0][0]).is_err());
}
