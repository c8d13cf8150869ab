use core::f64::consts::PI;
use std::sync::Arc;

use gibbs_core::energy::{BetaSchedule, CustomKernel, EnergyModel, Kernel};
use gibbs_core::finite::{exact_enumerate, FiniteKernel, FiniteModel};
use gibbs_core::measures::{bounded_lipschitz_distance, EmpiricalMeasure, FiniteSpace, GridMeasure};
use gibbs_core::rng::stream;
use gibbs_core::sampler::{mcmc_run, mcmc_run_from, mcmc_run_observed, ChainOptions, TemperingLadder};
use gibbs_core::{Error, Point, Space, SpaceSpec};
use rand::Rng;

fn random_pair_model(m: usize, seed: u64, beta: f64) -> FiniteModel {
    let mut rng = stream(seed, 0);
    let mut g = vec![0.0; m * m];
    for a in 0..m {
        for b in 0..=a {
            let v = rng.random_range(-1.0..1.0);
            g[a * m + b] = v;
            g[b * m + a] = v;
        }
    }
    let probs: Vec<f64> = (0..m).map(|_| rng.random_range(0.5..1.5)).collect();
    let total: f64 = probs.iter().sum();
    let space = FiniteSpace::new(probs.iter().map(|p| p / total).collect()).unwrap();
    FiniteModel::new(space, FiniteKernel::Pair(g), BetaSchedule::Constant(beta)).unwrap()
}

/// Exact `P(x_1 = a, x_2 = b)` from the type-class distribution.
fn exact_pair_frequencies(model: &FiniteModel, n: usize) -> Vec<f64> {
    let m = model.m();
    let e = exact_enumerate(model, n).unwrap();
    let mut out = vec![0.0; m * m];
    let nn = (n * (n - 1)) as f64;
    for class in &e.classes {
        for a in 0..m {
            for b in 0..m {
                let ca = class.counts[a] as f64;
                let cb = class.counts[b] as f64 - if a == b { 1.0 } else { 0.0 };
                out[a * m + b] += class.probability * ca * cb / nn;
            }
        }
    }
    out
}

#[test]
fn finite_pair_frequencies_match_enumeration() {
    let (m, n) = (4, 6);
    let model = random_pair_model(m, 21, 1.0);
    let exact = exact_pair_frequencies(&model, n);
    let steps = 1_000_000;
    let opts = ChainOptions::new(n, steps, 5);
    let batches = 100;
    let post = steps - (0.2 * steps as f64) as usize;
    let per_batch = post / batches;
    let mut sums = vec![vec![0.0; m * m]; batches];
    let mut k = 0;
    mcmc_run_observed(&model, &opts, &mut |c: &[usize]| {
        let b = (k / per_batch).min(batches - 1);
        for i in 0..n {
            for j in 0..n {
                if i != j {
                    sums[b][c[i] * m + c[j]] += 1.0;
                }
            }
        }
        k += 1;
    })
    .unwrap();
    let norm = (per_batch * n * (n - 1)) as f64;
    for cell in 0..m * m {
        let means: Vec<f64> = sums[..batches - 1].iter().map(|s| s[cell] / norm).collect();
        let b = means.len() as f64;
        let mean = means.iter().sum::<f64>() / b;
        let sd = (means.iter().map(|x| (x - mean).powi(2)).sum::<f64>() / (b - 1.0)).sqrt();
        let sigma = sd / b.sqrt();
        assert!((mean - exact[cell]).abs() < 3.0 * sigma + 1e-12, "cell {cell}: {mean} vs {}", exact[cell]);
    }
}

#[test]
fn free_model_samples_reference_measure() {
    let space = FiniteSpace::new(vec![0.1, 0.2, 0.3, 0.15, 0.25]).unwrap();
    let probs = space.probs().to_vec();
    let model = FiniteModel::free(space, BetaSchedule::Constant(1.0));
    let n = 3;
    let mut opts = ChainOptions::new(n, 100_000, 9);
    // every 30 moves each particle is redrawn with overwhelming probability
    opts.thin = Some(30);
    let report = mcmc_run(&model, &opts).unwrap();
    assert_eq!(report.acceptance_rate, 1.0);
    let mut counts = [0.0; 5];
    for s in &report.samples {
        counts[s.config[0]] += 1.0;
    }
    let total: f64 = counts.iter().sum();
    let chi2: f64 = counts.iter().zip(&probs).map(|(c, p)| (c - total * p).powi(2) / (total * p)).sum();
    // 1% critical value with 4 degrees of freedom
    assert!(chi2 < 13.28, "chi2 = {chi2}");
}

#[test]
fn free_circle_samples_uniform() {
    let space = Space::build(SpaceSpec::circle(64, 8)).unwrap();
    let model = EnergyModel::new(space, Kernel::Constant { value: 0.0, arity: 2 }, BetaSchedule::Constant(1.0));
    let mut opts = ChainOptions::new(2, 100_000, 4);
    opts.thin = Some(50);
    opts.proposal_scale = 3.0;
    opts.tune = false;
    let report = mcmc_run(&model, &opts).unwrap();
    let bins = 8;
    let mut counts = vec![0.0; bins];
    for s in &report.samples {
        let t = s.config[0].0[0];
        counts[((t / (2.0 * PI) * bins as f64) as usize).min(bins - 1)] += 1.0;
    }
    let total: f64 = counts.iter().sum();
    let e = total / bins as f64;
    let chi2: f64 = counts.iter().map(|c| (c - e).powi(2) / e).sum();
    // 1% critical value with 7 degrees of freedom
    assert!(chi2 < 18.48, "chi2 = {chi2}");
}

#[test]
fn circle_log_gas_mean_measure_is_uniform() {
    let n = 32;
    let space = Space::build(SpaceSpec::circle(256, 32)).unwrap();
    let model = EnergyModel::new(space.clone(), Kernel::LogChord { scale: 1.0 }, BetaSchedule::Proportional(1.0));
    let opts = ChainOptions::new(n, 200_000, 17);
    let report = mcmc_run(&model, &opts).unwrap();
    assert!((0.2..=0.6).contains(&report.acceptance_rate), "{}", report.acceptance_rate);
    let points: Vec<Point> = report.samples.iter().flat_map(|s| s.config.iter().copied()).collect();
    let mean = EmpiricalMeasure::from_points(space.clone(), points).unwrap();
    let d = bounded_lipschitz_distance(&mean, &GridMeasure::uniform(space)).unwrap();
    assert!(d < 0.05, "BL distance {d}");
    assert!(report.effective_sample_size > 10.0);
}

#[test]
fn runs_are_reproducible() {
    let space = Space::build(SpaceSpec::sphere(2, 4)).unwrap();
    let model = EnergyModel::new(space, Kernel::LogChord { scale: 1.0 }, BetaSchedule::Proportional(1.0));
    let mut opts = ChainOptions::new(8, 5_000, 77);
    opts.ladder = Some(TemperingLadder::default());
    let a = mcmc_run(&model, &opts).unwrap();
    let b = mcmc_run(&model, &opts).unwrap();
    assert_eq!(a, b);
    assert_eq!(format!("{a:?}"), format!("{b:?}"));
    opts.seed = 78;
    let c = mcmc_run(&model, &opts).unwrap();
    assert_ne!(a.samples, c.samples);
    assert_eq!(a.swap_rates.len(), 3);
    assert!((0.0..=1.0).contains(&a.acceptance_rate));
}

#[test]
fn detailed_balance_on_three_atoms() {
    let model = random_pair_model(3, 4, 2.0);
    let n = 2;
    let mut flows = vec![0u64; 81];
    let mut prev: Option<usize> = None;
    let opts = ChainOptions::new(n, 400_000, 12);
    mcmc_run_observed(&model, &opts, &mut |c: &[usize]| {
        let s = c[0] * 3 + c[1];
        if let Some(p) = prev {
            flows[p * 9 + s] += 1;
        }
        prev = Some(s);
    })
    .unwrap();
    for a in 0..9 {
        for b in 0..a {
            let (f, r) = (flows[a * 9 + b] as f64, flows[b * 9 + a] as f64);
            assert!((f - r).abs() <= 4.0 * (f + r).sqrt() + 1.0, "{a}->{b}: {f} vs {r}");
        }
    }
}

#[test]
fn tempering_ladder_reports_swaps() {
    let model = random_pair_model(4, 8, 1.0);
    let mut opts = ChainOptions::new(6, 50_000, 3);
    opts.ladder = Some(TemperingLadder { levels: 3, ratio: 0.7, swap_every: 6 });
    let r = mcmc_run(&model, &opts).unwrap();
    assert_eq!(r.multipliers.len(), 3);
    assert!(r.swap_rates.iter().all(|s| (0.1..=0.9).contains(s) || !r.warnings.is_empty()));
    // small multiplier gaps at n beta_n = 6 swap almost always, which is flagged
    assert!(r.swap_rates.iter().all(|s| *s > 0.5));
}

#[test]
fn trapped_chain_is_reported() {
    let space = Space::build(SpaceSpec::circle(32, 4)).unwrap();
    let kernel = Kernel::Custom(CustomKernel {
        arity: 2,
        f: Arc::new(|p: &[Point]| {
            let d = 2.0 * (0.5 * (p[0].0[0] - p[1].0[0])).sin().abs();
            if d == 2.0 {
                0.0
            } else {
                f64::INFINITY
            }
        }),
        lower_bound: Some(0.0),
        smooth: false,
        label: "antipodal lock".into(),
    });
    let model = EnergyModel::new(space, kernel, BetaSchedule::Constant(1.0));
    let mut opts = ChainOptions::new(2, 200_000, 1);
    opts.tune = false;
    let err = mcmc_run_from(&model, &opts, vec![Point::angle(0.0), Point::angle(PI)]).unwrap_err();
    assert_eq!(err, Error::TrappedChain { steps: 100_000 });
}

#[test]
fn cache_stays_coherent_over_long_runs() {
    let space = Space::build(SpaceSpec::torus(16, 4)).unwrap();
    let model = EnergyModel::new(space, Kernel::LogChord { scale: 1.0 }, BetaSchedule::Proportional(2.0));
    let mut opts = ChainOptions::new(10, 1_000_000, 2);
    opts.coherence_every = 1000;
    mcmc_run(&model, &opts).unwrap();
}
