//! Metropolis-Hastings sampling of the normalized Gibbs measure
//! `P_n ∝ exp(-n beta_n W_n) dpi^n`, with optional parallel tempering.
//!
//! Every move relocates one particle chosen uniformly at random. On finite
//! spaces the new position is an independent draw from `pi`; on continuous
//! spaces it is a geodesic Gaussian step whose scale is tuned during burn-in
//! and frozen afterwards. Replicas and the swap sweep each own a ChaCha8
//! stream, so a run is a pure function of its options.

use crate::energy::EnergyModel;
use crate::finite::{FiniteKernel, FiniteModel};
use crate::prelude::*;
use crate::rng::{stream, StreamRng};
use crate::spaces::Point;
use crate::{Error, Result};
use core::fmt::Debug;
use rand::Rng;

/// A Gibbs measure that can be sampled by single-particle moves.
pub trait GibbsTarget {
    type State: Copy + Debug + PartialEq;

    /// `W_n` of a configuration, `+inf` allowed.
    fn w_n(&self, config: &[Self::State]) -> Result<f64>;
    /// `W_n` after moving particle `i` to `to`, minus `W_n` before.
    fn move_delta(&self, config: &[Self::State], i: usize, to: &Self::State) -> f64;
    /// Proposal from `from` and the log of
    /// `pi(to) q(from | to) / (pi(from) q(to | from))`.
    fn propose(&self, from: &Self::State, scale: f64, rng: &mut StreamRng) -> (Self::State, f64);
    fn draw_reference(&self, rng: &mut StreamRng) -> Self::State;
    /// `n beta_n`.
    fn multiplier(&self, n: usize) -> f64;
    /// Whether the proposal has a scale worth tuning, and its upper limit.
    fn max_scale(&self) -> Option<f64>;
}

impl GibbsTarget for EnergyModel {
    type State = Point;

    fn w_n(&self, config: &[Point]) -> Result<f64> {
        EnergyModel::w_n(self, config)
    }

    fn move_delta(&self, config: &[Point], i: usize, to: &Point) -> f64 {
        let new = self.particle_energy(config, i, to);
        if new == f64::INFINITY {
            return new;
        }
        new - self.particle_energy(config, i, &config[i])
    }

    fn propose(&self, from: &Point, scale: f64, rng: &mut StreamRng) -> (Point, f64) {
        let space = self.space();
        let to = space.gaussian_step(from, scale, rng);
        let ratio = space.reference_density(&to) / space.reference_density(from);
        (to, ratio.ln())
    }

    fn draw_reference(&self, rng: &mut StreamRng) -> Point {
        self.space().sample_reference(rng)
    }

    fn multiplier(&self, n: usize) -> f64 {
        n as f64 * self.beta().at(n)
    }

    fn max_scale(&self) -> Option<f64> {
        Some(self.space().diameter())
    }
}

impl GibbsTarget for FiniteModel {
    type State = usize;

    fn w_n(&self, config: &[usize]) -> Result<f64> {
        if let Some(i) = config.iter().position(|&a| a >= self.m()) {
            return Err(Error::OffSpacePoint { index: i });
        }
        Ok(FiniteModel::w_n(self, config))
    }

    fn move_delta(&self, config: &[usize], i: usize, to: &usize) -> f64 {
        if let FiniteKernel::Constant { .. } = self.kernel() {
            return 0.0;
        }
        let from = config[i];
        if from == *to {
            return 0.0;
        }
        let mut delta = 0.0;
        for (j, &x) in config.iter().enumerate() {
            if j == i {
                continue;
            }
            let g = self.pair(*to, x);
            if g == f64::INFINITY {
                return g;
            }
            delta += g - self.pair(from, x);
        }
        let n = config.len() as f64;
        delta / (n * n)
    }

    fn propose(&self, _from: &usize, _scale: f64, rng: &mut StreamRng) -> (usize, f64) {
        (self.draw_reference(rng), 0.0)
    }

    fn draw_reference(&self, rng: &mut StreamRng) -> usize {
        let u: f64 = rng.random();
        let probs = self.space().probs();
        let mut acc = 0.0;
        for (a, p) in probs.iter().enumerate() {
            acc += p;
            if u < acc {
                return a;
            }
        }
        probs.iter().rposition(|p| *p > 0.0).unwrap_or(0)
    }

    fn multiplier(&self, n: usize) -> f64 {
        n as f64 * self.beta().at(n)
    }

    fn max_scale(&self) -> Option<f64> {
        None
    }
}

/// Geometric ladder of multipliers `t_j = n beta_n ratio^j`, `j < levels`.
#[derive(Clone, Debug, PartialEq)]
pub struct TemperingLadder {
    pub levels: usize,
    pub ratio: f64,
    /// Steps between swap sweeps.
    pub swap_every: usize,
}

impl Default for TemperingLadder {
    fn default() -> Self {
        TemperingLadder { levels: 4, ratio: 0.5, swap_every: 10 }
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct ChainOptions {
    pub n: usize,
    pub steps: usize,
    /// Initial proposal scale for continuous spaces.
    pub proposal_scale: f64,
    pub seed: u64,
    /// Fraction of `steps` spent in burn-in.
    pub burn_in: f64,
    /// Keep every `thin`-th post-burn-in state; `None` means `ceil(steps / 2000)`.
    pub thin: Option<usize>,
    pub tune: bool,
    pub ladder: Option<TemperingLadder>,
    pub coherence_every: usize,
    pub trap_limit: usize,
}

impl ChainOptions {
    pub fn new(n: usize, steps: usize, seed: u64) -> Self {
        ChainOptions {
            n,
            steps,
            proposal_scale: 0.5,
            seed,
            burn_in: 0.2,
            thin: None,
            tune: true,
            ladder: None,
            coherence_every: 1000,
            trap_limit: 100_000,
        }
    }
}

/// One replica: configuration, cached `W_n`, multiplier, stream and counters.
#[derive(Clone, Debug)]
pub struct ChainState<S> {
    pub config: Vec<S>,
    pub energy: f64,
    pub multiplier: f64,
    pub scale: f64,
    rng: StreamRng,
    pub proposed: u64,
    pub accepted: u64,
    window_proposed: u64,
    window_accepted: u64,
    infinite_run: usize,
}

impl<S: Copy + Debug + PartialEq> ChainState<S> {
    pub fn new<T: GibbsTarget<State = S>>(
        target: &T,
        n: usize,
        multiplier: f64,
        scale: f64,
        mut rng: StreamRng,
    ) -> Result<Self> {
        for _ in 0..1000 {
            let config: Vec<S> = (0..n).map(|_| target.draw_reference(&mut rng)).collect();
            if target.w_n(&config)? < f64::INFINITY {
                return Self::from_config(target, config, multiplier, scale, rng);
            }
        }
        Err(Error::TrappedChain { steps: 0 })
    }

    /// Starts from a given configuration, which must have finite energy.
    pub fn from_config<T: GibbsTarget<State = S>>(
        target: &T,
        config: Vec<S>,
        multiplier: f64,
        scale: f64,
        rng: StreamRng,
    ) -> Result<Self> {
        let energy = target.w_n(&config)?;
        if energy == f64::INFINITY {
            return Err(Error::InvalidParameter("initial configuration has infinite energy".into()));
        }
        Ok(ChainState {
            config,
            energy,
            multiplier,
            scale,
            rng,
            proposed: 0,
            accepted: 0,
            window_proposed: 0,
            window_accepted: 0,
            infinite_run: 0,
        })
    }

    pub fn acceptance_rate(&self) -> f64 {
        if self.proposed == 0 {
            0.0
        } else {
            self.accepted as f64 / self.proposed as f64
        }
    }

    /// One Metropolis-Hastings move of a uniformly chosen particle.
    pub fn step<T: GibbsTarget<State = S>>(&mut self, target: &T, trap_limit: usize) -> Result<bool> {
        let n = self.config.len();
        let i = self.rng.random_range(0..n);
        let (to, log_q) = target.propose(&self.config[i], self.scale, &mut self.rng);
        let delta = target.move_delta(&self.config, i, &to);
        self.proposed += 1;
        self.window_proposed += 1;
        if delta == f64::INFINITY || log_q == f64::NEG_INFINITY {
            self.infinite_run += 1;
            if self.infinite_run >= trap_limit {
                return Err(Error::TrappedChain { steps: self.infinite_run });
            }
            return Ok(false);
        }
        self.infinite_run = 0;
        let log_alpha = log_q - self.multiplier * delta;
        let accept = log_alpha >= 0.0 || self.rng.random::<f64>().ln() < log_alpha;
        if accept {
            self.config[i] = to;
            self.energy += delta;
            self.accepted += 1;
            self.window_accepted += 1;
        }
        Ok(accept)
    }

    /// Recomputes `W_n` and compares it with the cached value.
    pub fn check_coherence<T: GibbsTarget<State = S>>(&mut self, target: &T) -> Result<()> {
        let recomputed = target.w_n(&self.config)?;
        if !((recomputed - self.energy).abs() <= 1e-9 * recomputed.abs().max(1.0)) {
            return Err(Error::CacheIncoherent { cached: self.energy, recomputed });
        }
        self.energy = recomputed;
        Ok(())
    }

    fn tune(&mut self, max_scale: f64) {
        if self.window_proposed < 200 {
            return;
        }
        let rate = self.window_accepted as f64 / self.window_proposed as f64;
        if rate < 0.3 {
            self.scale *= 0.8;
        } else if rate > 0.5 {
            self.scale = (self.scale * 1.25).min(max_scale);
        }
        self.window_proposed = 0;
        self.window_accepted = 0;
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct Sample<S> {
    pub step: usize,
    pub energy: f64,
    pub config: Vec<S>,
}

#[derive(Clone, Debug, PartialEq)]
pub struct ChainReport<S> {
    pub seed: u64,
    pub n: usize,
    pub steps: usize,
    pub burn_in_steps: usize,
    pub thin: usize,
    /// Multipliers `n beta_n` of the replicas, target first.
    pub multipliers: Vec<f64>,
    /// Thinned post-burn-in states of the target replica.
    pub samples: Vec<Sample<S>>,
    /// Post-burn-in acceptance rate of the target replica.
    pub acceptance_rate: f64,
    pub proposal_scale: f64,
    pub energy_mean: f64,
    /// Batch-means standard error of `energy_mean`.
    pub energy_stderr: f64,
    /// Integrated autocorrelation time of `W_n`, in sweeps of `n` moves.
    pub autocorrelation_time: f64,
    pub effective_sample_size: f64,
    pub swap_rates: Vec<f64>,
    pub warnings: Vec<String>,
}

/// Runs the chain from `n` independent reference draws.
pub fn mcmc_run<T: GibbsTarget>(target: &T, opts: &ChainOptions) -> Result<ChainReport<T::State>> {
    run(target, opts, None, &mut |_| {})
}

/// As [`mcmc_run`], calling `observe` with the target replica's
/// configuration after every post-burn-in move.
pub fn mcmc_run_observed<T: GibbsTarget>(
    target: &T,
    opts: &ChainOptions,
    observe: &mut dyn FnMut(&[T::State]),
) -> Result<ChainReport<T::State>> {
    run(target, opts, None, observe)
}

/// As [`mcmc_run`], with every replica starting from `init`.
pub fn mcmc_run_from<T: GibbsTarget>(
    target: &T,
    opts: &ChainOptions,
    init: Vec<T::State>,
) -> Result<ChainReport<T::State>> {
    if init.len() != opts.n {
        return Err(Error::InvalidParameter(format!(
            "initial configuration has {} particles, expected {}",
            init.len(),
            opts.n
        )));
    }
    run(target, opts, Some(init), &mut |_| {})
}

fn run<T: GibbsTarget>(
    target: &T,
    opts: &ChainOptions,
    init: Option<Vec<T::State>>,
    observe: &mut dyn FnMut(&[T::State]),
) -> Result<ChainReport<T::State>> {
    let n = opts.n;
    if n == 0 {
        return Err(Error::InvalidParameter("at least one particle is needed".into()));
    }
    if !(0.0..1.0).contains(&opts.burn_in) {
        return Err(Error::InvalidParameter(format!("burn-in fraction {} outside [0, 1)", opts.burn_in)));
    }
    let base = target.multiplier(n);
    if !(base >= 0.0 && base.is_finite()) {
        return Err(Error::InvalidParameter(format!("multiplier n beta_n = {base} must be finite and nonnegative")));
    }
    let ladder = opts.ladder.clone();
    let levels = ladder.as_ref().map_or(1, |l| l.levels.max(1));
    let ratio = ladder.as_ref().map_or(1.0, |l| l.ratio);
    if levels > 1 && !(ratio > 0.0 && ratio < 1.0) {
        return Err(Error::InvalidParameter(format!("ladder ratio {ratio} must lie in (0, 1)")));
    }
    let multipliers: Vec<f64> = (0..levels).map(|j| base * ratio.powi(j as i32)).collect();
    let mut chains = Vec::with_capacity(levels);
    for (j, t) in multipliers.iter().enumerate() {
        let rng = stream(opts.seed, j as u64);
        chains.push(match &init {
            Some(c) => ChainState::from_config(target, c.clone(), *t, opts.proposal_scale, rng)?,
            None => ChainState::new(target, n, *t, opts.proposal_scale, rng)?,
        });
    }
    let mut swap_rng = stream(opts.seed, levels as u64);
    let mut swap_tried = vec![0u64; levels.saturating_sub(1)];
    let mut swap_done = vec![0u64; levels.saturating_sub(1)];
    let burn_in_steps = (opts.burn_in * opts.steps as f64).floor() as usize;
    let post = opts.steps - burn_in_steps;
    let thin = opts.thin.unwrap_or_else(|| opts.steps.div_ceil(2000)).max(1);
    let max_scale = target.max_scale();
    // W_n once per sweep, strided so the series stays bounded
    let stride = n * (post / n / (1 << 17) + 1);
    let mut series = Vec::new();
    let mut samples = Vec::new();
    let mut post_proposed = 0;
    let mut post_accepted = 0;
    let mut swap_parity = 0;

    for step in 0..opts.steps {
        if step == burn_in_steps {
            post_proposed = chains[0].proposed;
            post_accepted = chains[0].accepted;
        }
        for chain in chains.iter_mut() {
            chain.step(target, opts.trap_limit)?;
            if opts.coherence_every > 0 && (step + 1) % opts.coherence_every == 0 {
                chain.check_coherence(target)?;
            }
            if let (true, true, Some(max)) = (opts.tune, step < burn_in_steps, max_scale) {
                chain.tune(max);
            }
        }
        if let Some(l) = &ladder {
            if levels > 1 && (step + 1) % l.swap_every.max(1) == 0 {
                let mut j = swap_parity;
                while j + 1 < levels {
                    swap_tried[j] += 1;
                    let (lo, hi) = chains.split_at_mut(j + 1);
                    let (a, b) = (&mut lo[j], &mut hi[0]);
                    let log_alpha = (a.multiplier - b.multiplier) * (a.energy - b.energy);
                    if log_alpha >= 0.0 || swap_rng.random::<f64>().ln() < log_alpha {
                        core::mem::swap(&mut a.config, &mut b.config);
                        core::mem::swap(&mut a.energy, &mut b.energy);
                        swap_done[j] += 1;
                    }
                    j += 2;
                }
                swap_parity ^= 1;
            }
        }
        if step >= burn_in_steps {
            let target_chain = &chains[0];
            observe(&target_chain.config);
            let k = step - burn_in_steps;
            if k.is_multiple_of(thin) {
                samples.push(Sample { step, energy: target_chain.energy, config: target_chain.config.clone() });
            }
            if (k + 1).is_multiple_of(stride) {
                series.push(target_chain.energy);
            }
        }
    }

    let proposed = chains[0].proposed - post_proposed;
    let accepted = chains[0].accepted - post_accepted;
    let acceptance_rate = if proposed == 0 { 0.0 } else { accepted as f64 / proposed as f64 };
    let (energy_mean, energy_stderr) = batch_means(&series, 32);
    let tau = autocorrelation_time(&series) * (stride / n) as f64;
    let ess = if series.is_empty() { 0.0 } else { series.len() as f64 * (stride / n) as f64 / tau };
    let swap_rates: Vec<f64> =
        swap_tried.iter().zip(&swap_done).map(|(t, d)| if *t == 0 { 0.0 } else { *d as f64 / *t as f64 }).collect();
    let mut warnings = Vec::new();
    for (j, r) in swap_rates.iter().enumerate() {
        if !(0.1..=0.9).contains(r) {
            warnings.push(format!("swap rate {r:.3} between levels {j} and {} outside [0.1, 0.9]", j + 1));
        }
    }
    if max_scale.is_some() && post > 0 && !(0.15..=0.7).contains(&acceptance_rate) {
        warnings.push(format!("acceptance rate {acceptance_rate:.3} after burn-in"));
    }
    Ok(ChainReport {
        seed: opts.seed,
        n,
        steps: opts.steps,
        burn_in_steps,
        thin,
        multipliers,
        samples,
        acceptance_rate,
        proposal_scale: chains[0].scale,
        energy_mean,
        energy_stderr,
        autocorrelation_time: tau,
        effective_sample_size: ess,
        swap_rates,
        warnings,
    })
}

/// Mean and batch-means standard error over `batches` equal batches.
pub fn batch_means(series: &[f64], batches: usize) -> (f64, f64) {
    if series.is_empty() {
        return (f64::NAN, f64::NAN);
    }
    let mean = series.iter().sum::<f64>() / series.len() as f64;
    let size = series.len() / batches.max(1);
    if size == 0 || batches < 2 {
        return (mean, f64::NAN);
    }
    let used = size * batches;
    let bmeans: Vec<f64> = series[..used].chunks(size).map(|c| c.iter().sum::<f64>() / size as f64).collect();
    let bm = bmeans.iter().sum::<f64>() / batches as f64;
    let var = bmeans.iter().map(|b| (b - bm) * (b - bm)).sum::<f64>() / (batches - 1) as f64;
    (mean, (var / batches as f64).sqrt())
}

/// Integrated autocorrelation time `1 + 2 sum rho_t` with Sokal's adaptive
/// window (the smallest `M` with `M >= 5 tau(M)`). Constant series give 1.
pub fn autocorrelation_time(series: &[f64]) -> f64 {
    let len = series.len();
    if len < 4 {
        return 1.0;
    }
    let mean = series.iter().sum::<f64>() / len as f64;
    let c0 = series.iter().map(|x| (x - mean) * (x - mean)).sum::<f64>() / len as f64;
    if !(c0 > 0.0) {
        return 1.0;
    }
    let mut tau = 1.0;
    for t in 1..len / 2 {
        let ct = (0..len - t).map(|i| (series[i] - mean) * (series[i + t] - mean)).sum::<f64>() / len as f64;
        tau += 2.0 * ct / c0;
        if t as f64 >= 5.0 * tau {
            break;
        }
    }
    tau.max(1.0)
}
