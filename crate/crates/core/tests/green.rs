use core::f64::consts::{PI, TAU};

use gibbs_core::rng::stream;
use gibbs_core::spaces::{BackgroundCharge, GreenModel, TestFunction};
use gibbs_core::{Error, Point, Space, SpaceSpec};
use rand::Rng;

fn worst_identity_residual(g: &GreenModel, trials: usize, seed: u64) -> f64 {
    let space = g.space();
    let basis = space.basis().unwrap();
    let resolved: Vec<usize> = (0..basis.len()).filter(|&k| basis.order_of(k) <= g.order()).collect();
    let mut rng = stream(seed, 0);
    let mut worst: f64 = 0.0;
    for _ in 0..trials {
        let x = space.nodes()[rng.random_range(0..space.len())];
        let k = resolved[rng.random_range(0..resolved.len())];
        worst = worst.max(g.identity_residual(&TestFunction::basis_function(k), &x).unwrap());
    }
    worst
}

#[test]
fn identity_holds_on_every_space() {
    let circle = Space::build(SpaceSpec::circle(128, 24)).unwrap();
    let torus = Space::build(SpaceSpec::torus(32, 6)).unwrap();
    let sphere = Space::build(SpaceSpec::sphere(3, 6)).unwrap();
    for space in [circle.clone(), torus.clone(), sphere.clone()] {
        let g = GreenModel::new(space.clone(), BackgroundCharge::uniform(&space), space.basis_order()).unwrap();
        let r = worst_identity_residual(&g, 100, 11);
        assert!(r < 1e-6, "{:?}: {r}", space.kind());
    }
    let lambda = BackgroundCharge::from_field(&torus, "1+cos(2 pi u)/2", |p| 1.0 + 0.5 * (TAU * p.0[0]).cos()).unwrap();
    let g = GreenModel::new(torus.clone(), lambda, 6).unwrap();
    assert!(worst_identity_residual(&g, 100, 12) < 1e-6);
    let lambda = BackgroundCharge::from_field(&sphere, "1+z/2", |p| 1.0 + 0.5 * p.0[2]).unwrap();
    let g = GreenModel::new(sphere.clone(), lambda, 6).unwrap();
    assert!(worst_identity_residual(&g, 100, 13) < 1e-6);
    // sign-changing background
    let lambda = BackgroundCharge::from_field(&circle, "1+2cos", |p| 1.0 + 2.0 * p.0[0].cos()).unwrap();
    let g = GreenModel::new(circle, lambda, 24).unwrap();
    assert!(worst_identity_residual(&g, 100, 14) < 1e-6);
}

#[test]
fn sphere_y10_and_circle_cos() {
    let sphere = Space::build(SpaceSpec::sphere(3, 6)).unwrap();
    let g = GreenModel::new(sphere.clone(), BackgroundCharge::uniform(&sphere), 6).unwrap();
    // Y_{1,0} sits at flat index 2
    let y10 = TestFunction::basis_function(2);
    for p in sphere.nodes().iter().step_by(37) {
        assert!(g.identity_residual(&y10, p).unwrap() < 1e-6);
    }
    let circle = Space::build(SpaceSpec::circle(64, 8)).unwrap();
    let g = GreenModel::new(circle.clone(), BackgroundCharge::uniform(&circle), 8).unwrap();
    assert!(g.identity_residual(&TestFunction::basis_function(1), &Point::angle(1.234)).unwrap() < 1e-8);
}

#[test]
fn antipodal_value_matches_brute_force_series() {
    let circle = Space::build(SpaceSpec::circle(65_536, 30_000)).unwrap();
    let g = GreenModel::new(circle.clone(), BackgroundCharge::uniform(&circle), 30_000).unwrap();
    let oracle: f64 = (1..=1_000_000u64).map(|m| 2.0 * (PI * m as f64).cos() / (m as f64 * m as f64)).sum();
    let value = g.evaluate(&Point::angle(0.0), &Point::angle(PI)).unwrap();
    assert!((value - oracle).abs() < 1e-8, "{value} vs {oracle}");
    assert!((oracle + PI * PI / 6.0).abs() < 1e-10);
    assert!(g.lower_bound() <= value);
}

#[test]
fn uniform_background_has_zero_phi() {
    let torus = Space::build(SpaceSpec::torus(16, 4)).unwrap();
    let g = GreenModel::new(torus.clone(), BackgroundCharge::uniform(&torus), 4).unwrap();
    assert_eq!(g.phi(&Point::torus(0.3, 0.8)), 0.0);
    assert_eq!(g.offset(), 0.0);
    for p in torus.nodes().iter().step_by(17) {
        assert!(g.normalization_residual(p).abs() < 1e-12);
    }
}

#[test]
fn torus_background_normalization() {
    let torus = Space::build(SpaceSpec::torus(32, 8)).unwrap();
    let lambda = BackgroundCharge::from_field(&torus, "1+cos(2 pi u)/2", |p| 1.0 + 0.5 * (TAU * p.0[0]).cos()).unwrap();
    assert!((lambda.total_mass(&torus) - 1.0).abs() < 1e-10);
    let g = GreenModel::new(torus.clone(), lambda, 8).unwrap();
    for p in torus.nodes().iter().step_by(29) {
        assert!(g.normalization_residual(p).abs() < 1e-8);
    }
}

#[test]
fn green_is_symmetric_and_bounded_below() {
    let sphere = Space::build(SpaceSpec::sphere(2, 4)).unwrap();
    let lambda = BackgroundCharge::from_field(&sphere, "1+x/2", |p| 1.0 + 0.5 * p.0[0]).unwrap();
    let g = GreenModel::new(sphere.clone(), lambda, 4).unwrap();
    let nodes = sphere.nodes();
    for i in 0..nodes.len() {
        for j in 0..nodes.len() {
            if i == j {
                assert!(matches!(g.evaluate(&nodes[i], &nodes[j]), Err(Error::DiagonalSingularity)));
                continue;
            }
            let a = g.evaluate(&nodes[i], &nodes[j]).unwrap();
            let b = g.evaluate(&nodes[j], &nodes[i]).unwrap();
            assert_eq!(a.to_bits(), b.to_bits());
            assert!(a >= g.lower_bound());
        }
    }
}

#[test]
fn truncations_differ_by_a_near_constant() {
    // tail of the circle series has standard deviation sqrt(sum 2/m^4) ~ 7e-5 at K = 512
    let circle = Space::build(SpaceSpec::circle(4096, 1024)).unwrap();
    let lambda = BackgroundCharge::uniform(&circle);
    let coarse = GreenModel::new(circle.clone(), lambda.clone(), 512).unwrap();
    let fine = GreenModel::new(circle.clone(), lambda, 1024).unwrap();
    let mut rng = stream(5, 0);
    let diffs: Vec<f64> = (0..2000)
        .map(|_| {
            let i = rng.random_range(0..circle.len());
            let j = (i + rng.random_range(1..circle.len())) % circle.len();
            let (x, y) = (circle.nodes()[i], circle.nodes()[j]);
            coarse.evaluate(&x, &y).unwrap() - fine.evaluate(&x, &y).unwrap()
        })
        .collect();
    let mean = diffs.iter().sum::<f64>() / diffs.len() as f64;
    let sd = (diffs.iter().map(|d| (d - mean).powi(2)).sum::<f64>() / diffs.len() as f64).sqrt();
    assert!(sd < 1e-4, "{sd}");
}
