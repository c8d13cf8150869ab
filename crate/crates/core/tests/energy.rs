use core::f64::consts::{LN_2, PI};

use gibbs_core::energy::{
    confining_bound_check, euclidean_transform, strong_a, BetaSchedule, EnergyModel, Kernel, Order, ScalarField,
    TransformMode,
};
use gibbs_core::measures::GridMeasure;
use gibbs_core::rng::stream;
use gibbs_core::spaces::{BackgroundCharge, GreenModel};
use gibbs_core::{Error, Point, Space, SpaceSpec};
use proptest::prelude::*;
use rand::seq::SliceRandom;
use rand::Rng;
use std::sync::Arc;

fn constant_model(space: Arc<Space>) -> EnergyModel {
    EnergyModel::new(space, Kernel::Constant { value: 1.0, arity: 2 }, BetaSchedule::Constant(1.0))
}

#[test]
fn constant_kernel_counts_pairs() {
    let s = Space::build(SpaceSpec::circle(32, 4)).unwrap();
    let m = constant_model(s.clone());
    let pts: Vec<Point> = (0..4).map(|i| Point::angle(i as f64)).collect();
    assert_eq!(m.w_n(&pts[..2]).unwrap(), 0.25);
    assert_eq!(m.w_n(&pts).unwrap(), 0.375);
    let mu = GridMeasure::uniform(s.clone());
    assert!((m.expected_energy(&mu, 4).unwrap() - 0.375).abs() < 1e-15);
    assert!((m.expected_energy(&mu, 100).unwrap() - 0.495).abs() < 1e-15);
    assert!((m.w_macro(&mu).unwrap() - 0.5).abs() < 1e-15);
    assert!(matches!(m.w_n(&pts[..1]), Err(Error::TooFewParticles { n: 1, arity: 2 })));
    assert!(matches!(m.w_n(&[Point::angle(0.0), Point([1.0, 2.0, 0.0])]), Err(Error::OffSpacePoint { index: 1 })));
}

#[test]
fn expected_energy_drift_bound() {
    let s = Space::build(SpaceSpec::circle(32, 4)).unwrap();
    let m = EnergyModel::new(s.clone(), Kernel::Constant { value: 2.5, arity: 3 }, BetaSchedule::Constant(1.0));
    let mu = GridMeasure::uniform(s);
    let w = m.w_macro(&mu).unwrap();
    assert!((w - 2.5 / 6.0).abs() < 1e-14);
    for n in [3, 5, 10, 40] {
        let e = m.expected_energy(&mu, n).unwrap();
        let nf = n as f64;
        let drift = ((nf - 1.0) * (nf - 2.0) / (6.0 * nf * nf) - 1.0 / 6.0).abs();
        assert!((e - w).abs() <= drift * 2.5 + 1e-14);
    }
}

#[test]
fn antipodal_log_pair() {
    let s = Space::build(SpaceSpec::circle(32, 4)).unwrap();
    let m = EnergyModel::new(s, Kernel::LogChord { scale: 1.0 }, BetaSchedule::Constant(1.0));
    let w = m.w_n(&[Point::angle(0.0), Point::angle(PI)]).unwrap();
    assert!((w + 0.25 * LN_2).abs() < 1e-15);
    assert!((w + 0.1732868).abs() < 1e-7);
    assert_eq!(m.w_n(&[Point::angle(1.0), Point::angle(1.0)]).unwrap(), f64::INFINITY);
}

#[test]
fn uniform_circle_log_energy_vanishes() {
    let s = Space::build(SpaceSpec::circle(256, 8)).unwrap();
    let m = EnergyModel::new(s.clone(), Kernel::LogChord { scale: 1.0 }, BetaSchedule::Constant(1.0));
    let w = m.w_macro(&GridMeasure::uniform(s)).unwrap();
    assert!(w.abs() < 1e-3, "{w}");
}

#[test]
fn green_energy_of_reference_vanishes() {
    let s = Space::build(SpaceSpec::sphere(2, 4)).unwrap();
    let g = Arc::new(GreenModel::new(s.clone(), BackgroundCharge::uniform(&s), 4).unwrap());
    let m = EnergyModel::new(s.clone(), Kernel::Green(g), BetaSchedule::Constant(1.0));
    let mu = GridMeasure::uniform(s);
    assert!(m.w_macro(&mu).unwrap().abs() < 1e-12);
    for n in [2, 10, 50] {
        assert!(m.expected_energy(&mu, n).unwrap().abs() < 1e-12);
    }
}

#[test]
fn report_decomposes_value() {
    let s = Space::build(SpaceSpec::torus(16, 4)).unwrap();
    let m = EnergyModel::new(s.clone(), Kernel::Riesz { s: 0.5 }, BetaSchedule::Constant(1.0));
    let mut rng = stream(3, 0);
    let pts: Vec<Point> = (0..9).map(|_| s.sample_reference(&mut rng)).collect();
    let r = m.energy_report(&pts).unwrap();
    let sum: f64 = r.tuples.iter().map(|(_, g)| g).sum::<f64>() / 81.0;
    assert_eq!(r.tuples.len(), 36);
    assert!((r.value - sum).abs() < 1e-10);
    assert!((r.value - m.w_n(&pts).unwrap()).abs() < 1e-12);
    assert!(!r.hit_infinity && !r.lower_bound_estimated);
}

#[test]
fn stability_over_random_configurations() {
    let circle = Space::build(SpaceSpec::circle(64, 8)).unwrap();
    let sphere = Space::build(SpaceSpec::sphere(2, 4)).unwrap();
    let green = Arc::new(GreenModel::new(sphere.clone(), BackgroundCharge::uniform(&sphere), 4).unwrap());
    let models = [
        EnergyModel::new(circle.clone(), Kernel::LogChord { scale: 1.0 }, BetaSchedule::Constant(1.0)),
        EnergyModel::new(circle.clone(), Kernel::Riesz { s: 0.5 }, BetaSchedule::Constant(1.0)),
        EnergyModel::new(sphere.clone(), Kernel::LogChord { scale: 1.0 }, BetaSchedule::Constant(1.0)),
        EnergyModel::new(sphere.clone(), Kernel::Green(green), BetaSchedule::Constant(1.0)),
        EnergyModel::new(circle, Kernel::Constant { value: -1.0, arity: 3 }, BetaSchedule::Constant(1.0)),
    ];
    let mut rng = stream(17, 0);
    for m in &models {
        let n = 6;
        let bound = m.stability_bound(n);
        let mut lowest = f64::INFINITY;
        for _ in 0..10_000 {
            let pts: Vec<Point> = (0..n).map(|_| m.space().sample_reference(&mut rng)).collect();
            lowest = lowest.min(m.w_n(&pts).unwrap());
        }
        assert!(lowest >= bound - 1e-12, "{}: {lowest} < {bound}", m.kernel().label());
    }
}

#[test]
fn truncation_is_monotone() {
    let s = Space::build(SpaceSpec::circle(128, 8)).unwrap();
    let mut rng = stream(2, 0);
    let density: Vec<f64> = (0..128).map(|_| rng.random::<f64>() + 0.1).collect();
    let mu = GridMeasure::normalized(s.clone(), density).unwrap();
    let full =
        EnergyModel::new(s.clone(), Kernel::LogChord { scale: 1.0 }, BetaSchedule::Constant(1.0)).w_macro(&mu).unwrap();
    let mut last = f64::NEG_INFINITY;
    for cap in [-0.5, 0.0, 0.5, 1.0, 2.0, 4.0, 8.0] {
        let k = Kernel::Truncated { base: Box::new(Kernel::LogChord { scale: 1.0 }), cap };
        let w = EnergyModel::new(s.clone(), k, BetaSchedule::Constant(1.0)).w_macro(&mu).unwrap();
        assert!(w >= last - 1e-15 && w <= full + 1e-12);
        last = w;
    }
    assert!((last - full).abs() < 1e-12);
}

fn norm_box() -> EnergyModel {
    let s = Space::build(SpaceSpec::square(-3.0, 3.0, 16)).unwrap();
    EnergyModel::new(s, Kernel::NormProduct, BetaSchedule::Constant(1.0))
}

#[test]
fn confining_bound_examples() {
    let m = norm_box();
    let inside = |p: &Point| (p.0[0] * p.0[0] + p.0[1] * p.0[1]).sqrt() <= 1.0;
    let all_in: Vec<Point> = (0..5).map(|i| Point::plane(0.1 * i as f64, 0.0)).collect();
    let w = m.w_n(&all_in).unwrap();
    let c = confining_bound_check(&m, &all_in, &inside, w, 1.0).unwrap();
    assert_eq!(c.mass_outside, 0.0);
    // witness: 4 of 10 outside
    let mut pts: Vec<Point> = (0..6).map(|i| Point::plane(0.1 * i as f64, 0.1)).collect();
    pts.extend((0..4).map(|i| Point::plane(1.5 + 0.2 * i as f64, -1.2)));
    let a = m.w_n(&pts).unwrap();
    let c = confining_bound_check(&m, &pts, &inside, a, 1.0).unwrap();
    assert_eq!(c.mass_outside, 0.4);
    assert!(((2.0 * a).sqrt() + 0.2 - c.bound).abs() < 1e-12);
    assert!(c.bound >= 0.4);
    assert!(matches!(confining_bound_check(&m, &pts, &inside, a * 0.5, 1.0), Err(Error::HypothesisViolated(_))));
    assert!(matches!(confining_bound_check(&m, &pts, &inside, a, 0.0), Err(Error::HypothesisViolated(_))));
}

#[test]
fn strong_transform_coefficients() {
    let s = Space::build(SpaceSpec::interval(-4.0, 4.0, 64)).unwrap();
    let v = ScalarField::new("x^2", |p: &Point| p.0[0] * p.0[0]);
    let model = EnergyModel::new(s, Kernel::LogChord { scale: 1.0 }, BetaSchedule::Proportional(1.0)).with_potential(v);
    let (t, check) = euclidean_transform(&model, TransformMode::Strong { xi: 1.0, epsilon: 0.0 }).unwrap();
    assert!(check.kernel_grid_min.is_finite());
    for n in [2, 3, 10, 100] {
        assert!((strong_a(n, n as f64, 1.0, 0.0) - 1.0).abs() < 1e-15);
        // extract the potential coefficient from the kernel itself
        let (x, y) = (Point::line(0.5), Point::line(-1.5));
        let g = t.kernel().pair(t.space(), &x, &y, Order::Finite(n));
        let base = -(2.0f64).ln();
        assert!(((g - base) / (0.25 + 2.25) - 1.0).abs() < 1e-12);
    }
}

#[test]
fn weak_transform_is_bounded_below() {
    let s = Space::build(SpaceSpec::interval(-10.0, 10.0, 200)).unwrap();
    let v = ScalarField::new("log(1+x^2)", |p: &Point| (1.0 + p.0[0] * p.0[0]).ln());
    let model = EnergyModel::new(s, Kernel::LogChord { scale: 1.0 }, BetaSchedule::Constant(1.0)).with_potential(v);
    let (t, check) = euclidean_transform(&model, TransformMode::Weak).unwrap();
    assert!(check.kernel_grid_min >= -LN_2 - 1e-12, "{}", check.kernel_grid_min);
    assert!(check.reference_integral > 0.0);
    // reference measure of the transformed model is proportional to 1/(1+x^2)
    let ratio = t.space().reference_density(&Point::line(0.0)) / t.space().reference_density(&Point::line(1.0));
    assert!((ratio - 2.0).abs() < 1e-12);
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(64))]

    #[test]
    fn energy_is_permutation_invariant(seed in 0u64..10_000, n in 3usize..12) {
        let s = Space::build(SpaceSpec::sphere(1, 1)).unwrap();
        let m = EnergyModel::new(s.clone(), Kernel::Riesz { s: 1.0 }, BetaSchedule::Constant(1.0));
        let mut rng = stream(seed, 0);
        let mut pts: Vec<Point> = (0..n).map(|_| s.sample_reference(&mut rng)).collect();
        let a = m.w_n(&pts).unwrap();
        pts.shuffle(&mut rng);
        let b = m.w_n(&pts).unwrap();
        prop_assert!((a - b).abs() <= 1e-12 * a.abs().max(1.0));
    }

    #[test]
    fn particle_energy_gives_move_difference(seed in 0u64..10_000, n in 3usize..10) {
        let s = Space::build(SpaceSpec::torus(16, 4)).unwrap();
        let m = EnergyModel::new(s.clone(), Kernel::Constant { value: 0.7, arity: 3 }, BetaSchedule::Constant(1.0));
        let lc = EnergyModel::new(s.clone(), Kernel::LogChord { scale: 1.0 }, BetaSchedule::Constant(1.0));
        let mut rng = stream(seed, 1);
        let pts: Vec<Point> = (0..n).map(|_| s.sample_reference(&mut rng)).collect();
        let i = rng.random_range(0..n);
        let y = s.sample_reference(&mut rng);
        let mut moved = pts.clone();
        moved[i] = y;
        for model in [&m, &lc] {
            let direct = model.w_n(&moved).unwrap() - model.w_n(&pts).unwrap();
            let local = model.particle_energy(&pts, i, &y) - model.particle_energy(&pts, i, &pts[i]);
            prop_assert!((direct - local).abs() < 1e-10);
        }
    }
}
