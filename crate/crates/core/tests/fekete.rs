use std::time::Instant;

use gibbs_core::energy::{BetaSchedule, EnergyModel, Kernel, ScalarField};
use gibbs_core::fekete::{
    fekete_finite, fekete_minimize, infima_convergence_table, infima_convergence_table_finite, FeketeOptions,
    SearchMethod,
};
use gibbs_core::finite::{FiniteKernel, FiniteModel};
use gibbs_core::functional::MeasureFunctional;
use gibbs_core::measures::FiniteSpace;
use gibbs_core::rng::stream;
use gibbs_core::simplex::SimplexSearch;
use gibbs_core::{Space, SpaceSpec};
use rand::Rng;

fn circle_log_gas(nodes: usize) -> EnergyModel {
    let space = Space::build(SpaceSpec::circle(nodes, 16)).unwrap();
    EnergyModel::new(space, Kernel::LogChord { scale: 1.0 }, BetaSchedule::Proportional(1.0))
}

#[test]
fn equilateral_triangle() {
    let model = circle_log_gas(256);
    let r = fekete_minimize(&model, 3, None, &FeketeOptions::default()).unwrap();
    assert!((r.value + 3f64.ln() / 6.0).abs() < 1e-9, "{}", r.value);
    assert!((r.value + 0.1831020).abs() < 1e-7);
    let gaps: Vec<f64> =
        (0..3).map(|i| (r.best[(i + 1) % 3].0[0] - r.best[i].0[0]).rem_euclid(std::f64::consts::TAU)).collect();
    for g in gaps {
        assert!((g - std::f64::consts::TAU / 3.0).abs() < 1e-6);
    }
    assert_eq!(r.method, SearchMethod::Gradient);
    assert!(r.gradient_norm.unwrap() < 1e-8);
    assert_eq!(r.value, r.finals.iter().copied().fold(f64::INFINITY, f64::min));
    assert!(r.trace.windows(2).all(|w| w[1] <= w[0]));
}

#[test]
fn circle_log_gas_matches_roots_of_unity() {
    let t = Instant::now();
    let model = circle_log_gas(256);
    let opts = FeketeOptions { restarts: 2, ..FeketeOptions::default() };
    for n in [2, 5, 16, 33, 64] {
        let r = fekete_minimize(&model, n, None, &opts).unwrap();
        let exact = -(n as f64).ln() / (2.0 * n as f64);
        assert!((r.value - exact).abs() < 1e-6, "n = {n}: {} vs {exact}", r.value);
    }
    assert!(t.elapsed().as_secs() < 120);
}

#[test]
fn two_particles_find_the_unique_minimizing_pair() {
    let space = Space::build(SpaceSpec::interval(0.0, 1.0, 64)).unwrap();
    // nonnegative, minimized only at {0.2, 0.7}
    let kernel = Kernel::Custom(gibbs_core::energy::CustomKernel {
        arity: 2,
        f: std::sync::Arc::new(|p: &[gibbs_core::Point]| {
            let (a, b) = if p[0].0[0] < p[1].0[0] { (p[0].0[0], p[1].0[0]) } else { (p[1].0[0], p[0].0[0]) };
            (a - 0.2).powi(2) + (b - 0.7).powi(2)
        }),
        lower_bound: Some(0.0),
        smooth: false,
        label: "pair well".into(),
    });
    let model = EnergyModel::new(space.clone(), kernel, BetaSchedule::Constant(1.0));
    let r = fekete_minimize(&model, 2, None, &FeketeOptions::default()).unwrap();
    assert_eq!(r.method, SearchMethod::PatternSearch);
    // grid oracle over node pairs
    let nodes = space.nodes();
    let mut best = f64::INFINITY;
    for a in nodes {
        for b in nodes {
            best = best.min(model.w_n(&[*a, *b]).unwrap());
        }
    }
    assert!(r.value <= best + 1e-12);
    assert!((r.best[0].0[0] - 0.2).abs() < 1e-4 && (r.best[1].0[0] - 0.7).abs() < 1e-4, "{:?}", r.best);
}

#[test]
fn nonnegative_functional_does_not_lower_the_infimum() {
    let model = circle_log_gas(128);
    let f = MeasureFunctional::Integral(ScalarField::new("1 + cos", |p| 1.0 + p.0[0].cos()));
    let opts = FeketeOptions { restarts: 2, ..FeketeOptions::default() };
    for n in [4, 9] {
        let plain = fekete_minimize(&model, n, None, &opts).unwrap();
        let with_f = fekete_minimize(&model, n, Some(&f), &opts).unwrap();
        assert!(with_f.value >= plain.value - 1e-12);
        assert!(with_f.trace.windows(2).all(|w| w[1] <= w[0] + 1e-15));
    }
}

#[test]
fn circle_infima_table() {
    let model = circle_log_gas(1024);
    let ns: Vec<usize> = vec![4, 8, 16, 32, 64];
    let opts = FeketeOptions { restarts: 1, ..FeketeOptions::default() };
    let table = infima_convergence_table(&model, None, &ns, &opts, 0.04).unwrap();
    assert!(table.passed, "{table:?}");
    assert!(table.gaps().windows(2).all(|w| w[1] < w[0]));
    assert!(table.rows[0].inf_macro.abs() < 1e-3);
}

#[test]
fn constant_kernel_infima_are_explicit() {
    let space = Space::build(SpaceSpec::circle(32, 4)).unwrap();
    let model = EnergyModel::new(space, Kernel::Constant { value: 3.0, arity: 3 }, BetaSchedule::Constant(1.0));
    let opts = FeketeOptions { restarts: 1, ..FeketeOptions::default() };
    let table = infima_convergence_table(&model, None, &[3, 6, 12, 24], &opts, 0.5).unwrap();
    for row in &table.rows {
        let n = row.n as f64;
        let exact = 3.0 * (n * (n - 1.0) * (n - 2.0) / 6.0) / n.powi(3);
        assert!((row.inf_n - exact).abs() < 1e-12);
        assert!((row.gap - (exact - 0.5).abs()).abs() < 1e-12);
    }
    assert!(table.passed);
}

#[test]
fn finite_infima_table() {
    let mut rng = stream(5, 0);
    let m = 3;
    let mut g = vec![0.0; m * m];
    for a in 0..m {
        for b in 0..a {
            let v = rng.random_range(-1.0..1.0);
            g[a * m + b] = v;
            g[b * m + a] = v;
        }
    }
    let model = FiniteModel::new(FiniteSpace::uniform(m), FiniteKernel::Pair(g), BetaSchedule::Constant(1.0)).unwrap();
    let ns: Vec<usize> = (2..=12).collect();
    let table = infima_convergence_table_finite(&model, None, &ns, &SimplexSearch::default(), 1e-3).unwrap();
    assert!(table.passed, "{table:?}");
    let r = fekete_finite(&model, 4, None).unwrap();
    assert_eq!(r.counts.iter().sum::<usize>(), 4);
}
