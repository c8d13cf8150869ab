use core::f64::consts::TAU;
use std::sync::Arc;

use gibbs_core::energy::{BetaSchedule, EnergyModel, Environment, EnvironmentStream, Kernel, ScalarField};
use gibbs_core::equilibrium::{FreeEnergyModel, MirrorOptions};
use gibbs_core::finite::{exact_enumerate, FiniteKernel, FiniteModel};
use gibbs_core::functional::{FiniteFunctional, MeasureFunctional};
use gibbs_core::ldp::{
    conditional_gas_verify, laplace_estimate_mc, laplace_verify_finite, particle_environment_verify,
    rate_function_profile, rate_function_profile_finite, thermodynamic_integration, LinearConstraint, McBudget,
    ParticleEnvironment,
};
use gibbs_core::math::log_sum_exp;
use gibbs_core::measures::{FiniteSpace, GridMeasure};
use gibbs_core::simplex::SimplexSearch;
use gibbs_core::spaces::{BackgroundCharge, GreenModel};
use gibbs_core::{Error, Point, Space, SpaceSpec};

fn two_atom_model() -> FiniteModel {
    let g = vec![0.0, 1.0, 1.0, 0.0];
    FiniteModel::new(FiniteSpace::uniform(2), FiniteKernel::Pair(g), BetaSchedule::Constant(1.0)).unwrap()
}

/// `L_n` by summing over all `2^n` configurations.
fn brute_force_l(model: &FiniteModel, n: usize, f: impl Fn(&[f64]) -> f64) -> f64 {
    let m = model.m();
    let probs = model.space().probs();
    let mut logs = Vec::new();
    let mut config = vec![0usize; n];
    for code in 0..m.pow(n as u32) {
        let mut c = code;
        for x in config.iter_mut() {
            *x = c % m;
            c /= m;
        }
        let mut mu = vec![0.0; m];
        let mut log_pi = 0.0;
        for &x in &config {
            mu[x] += 1.0 / n as f64;
            log_pi += probs[x].ln();
        }
        logs.push(log_pi - n as f64 * (model.w_n(&config) + f(&mu)));
    }
    log_sum_exp(&logs) / n as f64
}

#[test]
fn free_model_gaps_vanish() {
    let model = FiniteModel::free(FiniteSpace::uniform(2), BetaSchedule::Constant(1.0));
    let ns: Vec<usize> = (2..=12).collect();
    let v = laplace_verify_finite(&model, &FiniteFunctional::zero(), &ns, &SimplexSearch::default(), 0.05).unwrap();
    assert!(v.gaps.iter().all(|g| *g == 0.0), "{:?}", v.gaps);
    assert!(v.values.iter().all(|x| *x == 0.0));
    assert!(v.passed);
}

#[test]
fn two_atom_laplace_principle() {
    let model = two_atom_model();
    let f = FiniteFunctional::linear(vec![0.0, 1.0]);
    let ns: Vec<usize> = (2..=12).collect();
    let v = laplace_verify_finite(&model, &f, &ns, &SimplexSearch::default(), 0.05).unwrap();
    for (n, l) in ns.iter().zip(&v.values) {
        let oracle = brute_force_l(&model, *n, |mu| mu[1]);
        assert!((l - oracle).abs() < 1e-12, "n = {n}: {l} vs {oracle}");
    }
    assert!((v.limit + 0.5478341).abs() < 1e-6, "{}", v.limit);
    assert!(v.gaps.windows(2).all(|w| w[1] < w[0]), "{:?}", v.gaps);
    assert!(v.final_gap < 0.05);
    assert!(v.passed);
}

#[test]
fn zero_functional_gives_log_partition_function() {
    let model = two_atom_model();
    let v =
        laplace_verify_finite(&model, &FiniteFunctional::zero(), &[3, 6, 9], &SimplexSearch::default(), 1.0).unwrap();
    for (n, l) in [3, 6, 9].iter().zip(&v.values) {
        let e = exact_enumerate(&model, *n).unwrap();
        assert!((l - e.log_z / *n as f64).abs() < 1e-14);
    }
}

#[test]
fn cap_is_enforced() {
    let model = FiniteModel::free(FiniteSpace::uniform(4), BetaSchedule::Constant(1.0));
    let err =
        laplace_verify_finite(&model, &FiniteFunctional::zero(), &[14], &SimplexSearch::default(), 1.0).unwrap_err();
    assert!(matches!(err, Error::EnumerationCap { .. }));
}

fn quadrature_log_mean(beta: f64, g: impl Fn(f64) -> f64) -> f64 {
    let m = 20_000;
    let logs: Vec<f64> = (0..m).map(|i| -beta * g(TAU * (i as f64 + 0.5) / m as f64)).collect();
    log_sum_exp(&logs) - (m as f64).ln()
}

#[test]
fn thermodynamic_integration_matches_product_case() {
    let space = Space::build(SpaceSpec::circle(128, 8)).unwrap();
    let beta = 2.0;
    let model = EnergyModel::new(space, Kernel::Constant { value: 0.0, arity: 2 }, BetaSchedule::Constant(beta));
    let f = MeasureFunctional::Integral(ScalarField::new("cos", |p| p.0[0].cos()));
    let exact = quadrature_log_mean(beta, f64::cos) / beta;
    let mut z = Vec::new();
    for seed in 0..20 {
        let budget = McBudget { rungs: 6, steps: 20_000, seed, min_ess: 20.0 };
        let (v, e) = thermodynamic_integration(&model, Some(&f), 4, &budget).unwrap();
        assert!((v - exact).abs() < 3.0 * e + 1e-3, "seed {seed}: {v} vs {exact} (se {e})");
        z.push((v - exact) / e);
    }
    // standardized errors look like standard normals
    let mean_sq = z.iter().map(|x| x * x).sum::<f64>() / z.len() as f64;
    assert!(mean_sq < 4.0, "{mean_sq}");
}

#[test]
fn halving_the_budget_widens_error_bars() {
    let space = Space::build(SpaceSpec::circle(128, 8)).unwrap();
    let model = EnergyModel::new(space, Kernel::Constant { value: 0.0, arity: 2 }, BetaSchedule::Constant(2.0));
    let f = MeasureFunctional::Integral(ScalarField::new("cos", |p| p.0[0].cos()));
    let (mut big, mut small) = (0.0, 0.0);
    for seed in 0..8 {
        big +=
            thermodynamic_integration(&model, Some(&f), 4, &McBudget { rungs: 4, steps: 40_000, seed, min_ess: 10.0 })
                .unwrap()
                .1;
        small +=
            thermodynamic_integration(&model, Some(&f), 4, &McBudget { rungs: 4, steps: 20_000, seed, min_ess: 10.0 })
                .unwrap()
                .1;
    }
    let ratio = small / big;
    assert!((1.15..1.7).contains(&ratio), "ratio {ratio}");
}

/// `(1/n^2) log Z_n` of the circle log-gas at `beta_n = n`, from Dyson's
/// product formula.
fn dyson_l(n: usize) -> f64 {
    let nf = n as f64;
    (libm_lgamma(1.0 + nf / 2.0) - nf * libm_lgamma(1.5)) / (nf * nf)
}

fn libm_lgamma(x: f64) -> f64 {
    // Stirling series, adequate for x >= 1.5
    let mut x = x;
    let mut acc = 0.0;
    while x < 10.0 {
        acc -= x.ln();
        x += 1.0;
    }
    acc + (x - 0.5) * x.ln() - x + 0.5 * TAU.ln() + 1.0 / (12.0 * x) - 1.0 / (360.0 * x.powi(3))
        + 1.0 / (1260.0 * x.powi(5))
}

#[test]
fn circle_log_gas_laplace_trend() {
    let space = Space::build(SpaceSpec::circle(512, 16)).unwrap();
    let model = EnergyModel::new(space, Kernel::LogChord { scale: 1.0 }, BetaSchedule::Proportional(1.0));
    let ns = [4, 8, 16, 32];
    let budget = McBudget { rungs: 8, steps: 60_000, seed: 1, min_ess: 20.0 };
    let v = laplace_estimate_mc(&model, None, &ns, &budget, Some(0.0), 0.05).unwrap();
    for ((n, l), e) in ns.iter().zip(&v.values).zip(&v.errors) {
        let exact = dyson_l(*n);
        assert!((l - exact).abs() < 4.0 * e + 2e-3, "n = {n}: {l} vs {exact} (se {e})");
    }
    assert!(v.passed, "{v:?}");
}

#[test]
fn rate_profile_on_finite_space() {
    let model = two_atom_model();
    let unconstrained = rate_function_profile_finite(&model, None).unwrap();
    assert_eq!(unconstrained.value, 0.0);
    // the profile of {mu(atom 1) >= 0.8}
    let c = LinearConstraint { g: vec![0.0, 1.0], c: 0.8 };
    let p = rate_function_profile_finite(&model, Some(&c)).unwrap();
    assert!((p.constraint_value - 0.8).abs() < 1e-6, "{}", p.constraint_value);
    // one-dimensional oracle: I is convex in mu(atom 1), so the constrained
    // infimum sits on the boundary
    let f = |t: f64| model.free_energy(&[1.0 - t, t]);
    let tmin = (0..=100_000).map(|i| i as f64 / 100_000.0).fold(0.5, |b, t| if f(t) < f(b) { t } else { b });
    let oracle = f(0.8) - f(tmin);
    assert!((p.value - oracle).abs() < 1e-8, "{} vs {oracle}", p.value);
    // decay rates of P_n(mu(atom 1) >= 0.8) approach the profile
    let rates: Vec<f64> = (8..=12)
        .map(|n| {
            let e = exact_enumerate(&model, n).unwrap();
            -e.probability_of(|mu| mu[1] >= 0.8 - 1e-12).ln() / n as f64
        })
        .collect();
    let errs: Vec<f64> = rates.iter().map(|r| (r - p.value).abs()).collect();
    assert!(errs.last().unwrap() < &0.15, "{rates:?} vs {}", p.value);
    let satisfied = LinearConstraint { g: vec![1.0, 0.0], c: 0.3 };
    assert_eq!(rate_function_profile_finite(&model, Some(&satisfied)).unwrap().value, 0.0);
    let impossible = LinearConstraint { g: vec![0.0, 1.0], c: 1.5 };
    assert_eq!(rate_function_profile_finite(&model, Some(&impossible)).unwrap_err(), Error::InfeasibleConstraint);
}

#[test]
fn rate_profile_on_grid_measures() {
    let space = Space::build(SpaceSpec::circle(128, 16)).unwrap();
    let charge = BackgroundCharge::from_field(&space, "1 + cos/2", |p| 1.0 + 0.5 * p.0[0].cos()).unwrap();
    let g = GreenModel::new(space.clone(), charge, 16).unwrap();
    let e = EnergyModel::new(space.clone(), Kernel::Green(Arc::new(g)), BetaSchedule::Constant(2.0));
    let free = FreeEnergyModel::new(e, 2.0).unwrap();
    let eq = free.minimize(&GridMeasure::uniform(space.clone()), &MirrorOptions::default()).unwrap();
    let p = rate_function_profile(&free, None).unwrap();
    assert_eq!(p.value, 0.0);
    let max_diff = p.equilibrium.iter().zip(eq.measure.masses()).map(|(a, b)| (a - b).abs() / b).fold(0.0, f64::max);
    assert!(max_diff < 1e-4);
    let sin: Vec<f64> = space.nodes().iter().map(|q| q.0[0].sin()).collect();
    let c = LinearConstraint { g: sin, c: 0.2 };
    let q = rate_function_profile(&free, Some(&c)).unwrap();
    assert!(q.value > 0.0);
    assert!((q.constraint_value - 0.2).abs() < 1e-6);
    let looser = rate_function_profile(&free, Some(&LinearConstraint { c: 0.1, ..c.clone() })).unwrap();
    assert!(looser.value < q.value);
}

#[test]
fn particle_in_environment() {
    let space = Space::build(SpaceSpec::interval(-1.0, 1.0, 2001)).unwrap();
    let env = ParticleEnvironment {
        space,
        potential: Arc::new(|_, p: &Point| (p.0[0] - 0.3).powi(2)),
        limit_potential: ScalarField::new("(x - 0.3)^2", |p| (p.0[0] - 0.3).powi(2)),
        interaction: None,
        lambda: Arc::new(|_| 0.0),
        beta: BetaSchedule::Proportional(1.0),
    };
    let f = ScalarField::constant(0.0);
    let ns: Vec<usize> = (1..=6).map(|k| 1 << k).collect();
    let c = particle_environment_verify(&env, &f, &ns, 0.2).unwrap();
    assert!(c.verdict.gaps.windows(2).all(|w| w[1] < w[0]), "{:?}", c.verdict.gaps);
    assert!(c.verdict.passed);
    assert!((c.witness.0[0] - 0.3).abs() < 1e-3);
    assert!((c.minimizer.0[0] - 0.3).abs() < 1e-3);
}

#[test]
fn conditional_gas_with_equispaced_background() {
    let space = Space::build(SpaceSpec::circle(512, 16)).unwrap();
    let base = EnergyModel::new(space.clone(), Kernel::LogChord { scale: 1.0 }, BetaSchedule::Proportional(1.0));
    let env = Environment {
        kernel: Kernel::LogChord { scale: 1.0 },
        stream: EnvironmentStream::Points {
            label: "equispaced".into(),
            points: Arc::new(|n| (0..n).map(|k| Point::angle(TAU * (k as f64 + 0.5) / n as f64)).collect()),
            limit: GridMeasure::uniform(space.clone()),
        },
    };
    let conditioned = base.clone().with_environment(env).unwrap();
    let ns = [8, 16, 32];
    let budget = McBudget { rungs: 8, steps: 40_000, seed: 3, min_ess: 20.0 };
    let a = conditional_gas_verify(&conditioned, None, &ns, &budget, 0.1).unwrap();
    let b = laplace_estimate_mc(&base, None, &ns, &budget, None, 0.1).unwrap();
    // both limits vanish up to the grid error of the log kernel
    assert!(a.limit.abs() < 2e-3 && b.limit.abs() < 2e-3, "{} {}", a.limit, b.limit);
    // the background shifts L_n by O(1/n): the particles lock into the gaps
    // of the equispaced points
    let diffs: Vec<f64> = a.values.iter().zip(&b.values).map(|(x, y)| x - y).collect();
    for (i, d) in diffs.iter().enumerate() {
        let se = (a.errors[i].powi(2) + b.errors[i].powi(2)).sqrt();
        assert!(*d > -3.0 * se && *d < 2f64.ln() / ns[i] as f64 + 3.0 * se, "{diffs:?}");
    }
    assert!(diffs[2] < 0.75 * diffs[0], "{diffs:?}");
    assert!(matches!(conditional_gas_verify(&base, None, &ns, &budget, 0.1), Err(Error::InvalidParameter(_))));
}
