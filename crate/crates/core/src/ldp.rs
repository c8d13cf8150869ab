//! Numerical checks of the Laplace principle
//! `(1/(n beta_n)) log ∫exp(-n beta_n f(i_n)) dgamma_n -> -inf {f + F}`,
//! of the large deviation rate `I = F - inf F`, and of the conditional gases
//! driven by an environment.
//!
//! Finite spaces are enumerated exactly. On manifolds `L_n` is estimated by
//! thermodynamic integration:
//! `L_n = -∫_0^1 E_s[f(i_n) + W_n] ds`, where `E_s` is the expectation under
//! `exp(-s n beta_n (f(i_n) + W_n)) dpi^n`.

use crate::energy::{BetaSchedule, EnergyModel};
use crate::equilibrium::{mirror_descent, FiniteFreeEnergy, FreeEnergyModel, MirrorOptions, SimplexObjective, Step};
use crate::fekete::macro_infimum;
use crate::finite::{exact_enumerate, FiniteModel};
use crate::functional::{FiniteFunctional, MeasureFunctional};
use crate::math::{gauss_legendre_on, least_squares_slope, log_sum_exp};
use crate::measures::GridMeasure;
use crate::prelude::*;
use crate::rng::StreamRng;
use crate::sampler::{mcmc_run, ChainOptions, GibbsTarget};
use crate::simplex::{minimize, SimplexSearch};
use crate::spaces::{Point, ScalarField, Space};
use crate::{Error, Result};

#[derive(Clone, Debug, PartialEq)]
pub struct LaplaceVerdict {
    pub ns: Vec<usize>,
    /// `L_n` per `n`.
    pub values: Vec<f64>,
    /// Standard errors of `values`; zero for exact enumeration.
    pub errors: Vec<f64>,
    /// `-inf {f + F}`.
    pub limit: f64,
    pub gaps: Vec<f64>,
    /// Least-squares slope of the gaps against `n`.
    pub slope: f64,
    pub final_gap: f64,
    pub threshold: f64,
    pub passed: bool,
}

impl LaplaceVerdict {
    /// Verdict from per-`n` values and standard errors against `limit`.
    pub fn from_values(ns: Vec<usize>, values: Vec<f64>, errors: Vec<f64>, limit: f64, threshold: f64) -> Self {
        let gaps: Vec<f64> = values.iter().map(|v| (v - limit).abs()).collect();
        let xs: Vec<f64> = ns.iter().map(|n| *n as f64).collect();
        let slope = least_squares_slope(&xs, &gaps);
        let final_gap = gaps.last().copied().unwrap_or(f64::NAN);
        let final_err = errors.last().copied().unwrap_or(0.0);
        // a gap of exactly zero everywhere has no trend to speak of
        let trend = slope < 0.0 || gaps.iter().all(|g| *g == 0.0);
        let passed = final_gap - 3.0 * final_err < threshold && trend;
        LaplaceVerdict { ns, values, errors, limit, gaps, slope, final_gap, threshold, passed }
    }
}

/// `L_n` by exact enumeration and `-inf {f + F}` by nested simplex-grid
/// search, cross-checked by mirror descent (the smaller infimum is kept).
pub fn laplace_verify_finite(
    model: &FiniteModel,
    f: &FiniteFunctional,
    ns: &[usize],
    search: &SimplexSearch,
    threshold: f64,
) -> Result<LaplaceVerdict> {
    let mut values = Vec::with_capacity(ns.len());
    for &n in ns {
        let e = exact_enumerate(model, n)?;
        let nb = n as f64 * e.beta_n;
        if !(nb > 0.0 && nb.is_finite()) {
            return Err(Error::InvalidParameter(format!("n beta_n = {nb} must be positive and finite")));
        }
        for class in &e.classes {
            let v = f.eval(&class.empirical());
            if v.is_nan() || v == f64::NEG_INFINITY {
                return Err(Error::UnevaluableFunctional(format!("{} evaluated to {v}", f.label())));
            }
        }
        let le = e.log_expectation(|mu| f.eval(mu));
        values.push((e.log_z + le) / nb);
    }
    let inf = finite_free_infimum(model, f, search)?;
    Ok(LaplaceVerdict::from_values(ns.to_vec(), values.clone(), vec![0.0; values.len()], -inf, threshold))
}

/// `inf {f + F}` on the simplex of a finite model.
pub fn finite_free_infimum(model: &FiniteModel, f: &FiniteFunctional, search: &SimplexSearch) -> Result<f64> {
    let grid = minimize(model.m(), search, |mu| model.free_energy(mu) + f.eval(mu));
    let obj = Tilted { inner: FiniteFreeEnergy { model }, f };
    let md = mirror_descent(&obj, model.space().probs().to_vec(), &MirrorOptions::default())
        .map(|r| r.value)
        .unwrap_or(f64::INFINITY);
    Ok(grid.value.min(md))
}

struct Tilted<'a, O> {
    inner: O,
    f: &'a FiniteFunctional,
}

impl<O: SimplexObjective> SimplexObjective for Tilted<'_, O> {
    fn dim(&self) -> usize {
        self.inner.dim()
    }

    fn evaluate(&self, a: &[f64]) -> (f64, Vec<f64>) {
        let (v, mut g) = self.inner.evaluate(a);
        for (gi, fi) in g.iter_mut().zip(self.f.gradient(a)) {
            *gi += fi;
        }
        (v + self.f.eval(a), g)
    }
}

/// Budget of the thermodynamic-integration estimator.
#[derive(Clone, Debug, PartialEq)]
pub struct McBudget {
    /// Gauss-Legendre nodes in `s`.
    pub rungs: usize,
    /// Single-particle moves per rung.
    pub steps: usize,
    pub seed: u64,
    /// Smallest acceptable effective sample size per rung.
    pub min_ess: f64,
}

impl Default for McBudget {
    fn default() -> Self {
        McBudget { rungs: 8, steps: 100_000, seed: 0, min_ess: 20.0 }
    }
}

/// `exp(-s n beta_n (f(i_n) + W_n)) dpi^n`, as a sampler target.
struct TiltedGas<'a> {
    model: &'a EnergyModel,
    f: Option<&'a MeasureFunctional>,
    s: f64,
}

impl GibbsTarget for TiltedGas<'_> {
    type State = Point;

    fn w_n(&self, config: &[Point]) -> Result<f64> {
        let w = self.model.w_n(config)?;
        Ok(match self.f {
            Some(f) if w < f64::INFINITY => w + f.eval_points(self.model.space(), config)?,
            _ => w,
        })
    }

    fn move_delta(&self, config: &[Point], i: usize, to: &Point) -> f64 {
        let d = GibbsTarget::move_delta(self.model, config, i, to);
        match self.f {
            Some(f) if d < f64::INFINITY => {
                d + f.move_delta(self.model.space(), config, i, to).unwrap_or(f64::INFINITY)
            }
            _ => d,
        }
    }

    fn propose(&self, from: &Point, scale: f64, rng: &mut StreamRng) -> (Point, f64) {
        GibbsTarget::propose(self.model, from, scale, rng)
    }

    fn draw_reference(&self, rng: &mut StreamRng) -> Point {
        GibbsTarget::draw_reference(self.model, rng)
    }

    fn multiplier(&self, n: usize) -> f64 {
        self.s * self.model.multiplier(n)
    }

    fn max_scale(&self) -> Option<f64> {
        GibbsTarget::max_scale(self.model)
    }
}

/// One thermodynamic-integration estimate of `L_n` and its standard error.
pub fn thermodynamic_integration(
    model: &EnergyModel,
    f: Option<&MeasureFunctional>,
    n: usize,
    budget: &McBudget,
) -> Result<(f64, f64)> {
    if !model.space().kind().is_manifold() {
        return Err(Error::InvalidParameter("thermodynamic integration runs on manifolds".into()));
    }
    let (s, w) = gauss_legendre_on(budget.rungs, 0.0, 1.0);
    let mut value = 0.0;
    let mut var = 0.0;
    for (rung, (s, w)) in s.iter().zip(&w).enumerate() {
        let target = TiltedGas { model, f, s: *s };
        let seed = budget.seed.wrapping_mul(1_000_003).wrapping_add((n * 64 + rung) as u64);
        let report = mcmc_run(&target, &ChainOptions::new(n, budget.steps, seed))?;
        if !(report.effective_sample_size >= budget.min_ess) {
            return Err(Error::EssBelowFloor { rung, ess: report.effective_sample_size, floor: budget.min_ess });
        }
        value -= w * report.energy_mean;
        var += w * w * report.energy_stderr * report.energy_stderr;
    }
    Ok((value, var.sqrt()))
}

/// `-inf {f + F}` for a continuous model; `beta = inf` drops the entropy.
pub fn free_infimum(model: &EnergyModel, f: Option<&MeasureFunctional>) -> Result<f64> {
    let beta = model.beta().limit();
    if beta == f64::INFINITY {
        return macro_infimum(model, f).map(|(v, _)| v);
    }
    let mut free = FreeEnergyModel::new(model.clone(), beta)?;
    match f {
        None => {}
        Some(MeasureFunctional::Integral(g)) => {
            free = free.with_linear_term(model.space().nodes().iter().map(|p| g.eval(p)).collect())?;
        }
        Some(f) => {
            return Err(Error::MacroInfimumUnavailable(format!("{} is not an integral functional", f.label())));
        }
    }
    let res = free.minimize(&GridMeasure::uniform(model.space().clone()), &MirrorOptions::default())?;
    Ok(res.free_energy)
}

/// Monte Carlo verdict. The limit is `-inf {f + F}` unless given; the final
/// gap is tested after subtracting three standard errors.
pub fn laplace_estimate_mc(
    model: &EnergyModel,
    f: Option<&MeasureFunctional>,
    ns: &[usize],
    budget: &McBudget,
    limit: Option<f64>,
    threshold: f64,
) -> Result<LaplaceVerdict> {
    let limit = match limit {
        Some(l) => l,
        None => -free_infimum(model, f)?,
    };
    let mut values = Vec::new();
    let mut errors = Vec::new();
    for &n in ns {
        let (v, e) = thermodynamic_integration(model, f, n, budget)?;
        values.push(v);
        errors.push(e);
    }
    Ok(LaplaceVerdict::from_values(ns.to_vec(), values, errors, limit, threshold))
}

/// The set `{mu : ∫g dmu >= c}`.
#[derive(Clone, Debug, PartialEq)]
pub struct LinearConstraint {
    /// `g` at the nodes or atoms.
    pub g: Vec<f64>,
    pub c: f64,
}

#[derive(Clone, Debug, PartialEq)]
pub struct RateProfile {
    /// `inf {I(mu) : mu in set}`.
    pub value: f64,
    /// Masses of the constrained minimizer.
    pub witness: Vec<f64>,
    /// Masses of the unconstrained minimizer.
    pub equilibrium: Vec<f64>,
    pub inf_free_energy: f64,
    /// `∫g d(witness)`.
    pub constraint_value: f64,
}

/// `F + (rho/2) max(0, c - <g, a> + lambda/rho)^2`, the augmented Lagrangian
/// of the constraint up to a constant.
struct Penalized<'a, O> {
    inner: &'a O,
    g: &'a [f64],
    c: f64,
    lambda: f64,
    rho: f64,
}

impl<O: SimplexObjective> Penalized<'_, O> {
    fn slack(&self, a: &[f64]) -> f64 {
        self.c - dot(self.g, a) + self.lambda / self.rho
    }
}

fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

impl<O: SimplexObjective> SimplexObjective for Penalized<'_, O> {
    fn dim(&self) -> usize {
        self.inner.dim()
    }

    fn evaluate(&self, a: &[f64]) -> (f64, Vec<f64>) {
        let (v, mut grad) = self.inner.evaluate(a);
        let u = self.slack(a).max(0.0);
        for (gr, g) in grad.iter_mut().zip(self.g) {
            *gr -= self.rho * u * g;
        }
        (v + 0.5 * self.rho * u * u, grad)
    }

    fn bregman(&self, step: &Step<'_>) -> f64 {
        let ua = self.slack(step.a);
        let ub = self.slack(step.b);
        let pa = ua.max(0.0);
        let inner_grad: Vec<f64> = step.ga.iter().zip(self.g).map(|(gr, g)| gr + self.rho * pa * g).collect();
        let inner = self.inner.bregman(&Step {
            fa: step.fa - 0.5 * self.rho * pa * pa,
            fb: step.fb - 0.5 * self.rho * ub.max(0.0).powi(2),
            ga: &inner_grad,
            ..*step
        });
        let d = -dot(self.g, step.delta);
        let ub = ua + d;
        let p = |u: f64| u.max(0.0).powi(2);
        let penalty = if ua > 0.0 && ub > 0.0 { d * d } else { p(ub) - p(ua) - 2.0 * pa * d };
        inner + 0.5 * self.rho * penalty.max(0.0)
    }
}

/// Minimizes a convex objective on `{a : <g, a> >= c}` by an augmented
/// Lagrangian around mirror descent.
fn constrained_minimum<O: SimplexObjective>(
    obj: &O,
    init: Vec<f64>,
    constraint: &LinearConstraint,
) -> Result<(f64, Vec<f64>)> {
    let max_g = constraint.g.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    if max_g < constraint.c {
        return Err(Error::InfeasibleConstraint);
    }
    let opts = MirrorOptions { max_steps: 20_000, tolerance: 1e-10, initial_step: 1.0 };
    let mut a = init;
    let mut lambda = 0.0;
    let mut rho = 10.0;
    let mut last_violation = f64::INFINITY;
    for _ in 0..60 {
        let pen = Penalized { inner: obj, g: &constraint.g, c: constraint.c, lambda, rho };
        // keep every atom reachable by the multiplicative updates
        let floor = 1e-12;
        let start: Vec<f64> = a.iter().map(|x| x.max(floor)).collect();
        let res = mirror_descent(&pen, start, &opts)?;
        a = res.point;
        let violation = (constraint.c - dot(&constraint.g, &a)).max(0.0);
        lambda = (lambda + rho * (constraint.c - dot(&constraint.g, &a))).max(0.0);
        if violation < 1e-10 && res.converged {
            break;
        }
        if violation > 0.25 * last_violation {
            rho *= 4.0;
        }
        last_violation = violation;
    }
    let value = obj.evaluate(&a).0;
    Ok((value, a))
}

fn profile<O: SimplexObjective>(obj: &O, init: Vec<f64>, constraint: Option<&LinearConstraint>) -> Result<RateProfile> {
    let eq = mirror_descent(obj, init, &MirrorOptions::default())?;
    let inf = eq.value;
    let (value, witness) = match constraint {
        None => (0.0, eq.point.clone()),
        Some(c) if dot(&c.g, &eq.point) >= c.c => {
            if c.g.len() != eq.point.len() {
                return Err(Error::InvalidParameter("constraint has the wrong length".into()));
            }
            (0.0, eq.point.clone())
        }
        Some(c) => {
            if c.g.len() != eq.point.len() {
                return Err(Error::InvalidParameter("constraint has the wrong length".into()));
            }
            let (v, w) = constrained_minimum(obj, eq.point.clone(), c)?;
            ((v - inf).max(0.0), w)
        }
    };
    let constraint_value = constraint.map_or(f64::NAN, |c| dot(&c.g, &witness));
    Ok(RateProfile { value, witness, equilibrium: eq.point, inf_free_energy: inf, constraint_value })
}

/// `inf {I(mu) : ∫g dmu >= c}` for grid measures, with `I = F - inf F` at the
/// model's `beta`.
pub fn rate_function_profile(model: &FreeEnergyModel, constraint: Option<&LinearConstraint>) -> Result<RateProfile> {
    let space = model.energy().space();
    profile(model, GridMeasure::uniform(space.clone()).masses(), constraint)
}

/// As [`rate_function_profile`] on a finite space, at the limit `beta`.
pub fn rate_function_profile_finite(model: &FiniteModel, constraint: Option<&LinearConstraint>) -> Result<RateProfile> {
    profile(&FiniteFreeEnergy { model }, model.space().probs().to_vec(), constraint)
}

/// A single particle in an environment: `V_n` from the environment,
/// interaction weight `lambda_n` on a self term `G^I`, all at inverse
/// temperature `beta_n`.
#[derive(Clone)]
pub struct ParticleEnvironment {
    pub space: Arc<Space>,
    pub potential: Arc<dyn Fn(usize, &Point) -> f64 + Send + Sync>,
    pub limit_potential: ScalarField,
    pub interaction: Option<ScalarField>,
    pub lambda: Arc<dyn Fn(usize) -> f64 + Send + Sync>,
    pub beta: BetaSchedule,
}

/// Per-`n` outcome of the one-particle check.
#[derive(Clone, Debug, PartialEq)]
pub struct ParticleCheck {
    pub verdict: LaplaceVerdict,
    /// Node maximizing the integrand at the largest `n`.
    pub witness: Point,
    /// Node minimizing `f + V`.
    pub minimizer: Point,
}

/// `(1/beta_n) log ∫exp(-beta_n (f + V_n + lambda_n G^I)) dpi` by quadrature,
/// against `-min (f + V)` over the grid.
pub fn particle_environment_verify(
    env: &ParticleEnvironment,
    f: &ScalarField,
    ns: &[usize],
    threshold: f64,
) -> Result<ParticleCheck> {
    let nodes = env.space.nodes();
    let weights = env.space.weights();
    let limit_values: Vec<f64> = nodes.iter().map(|p| f.eval(p) + env.limit_potential.eval(p)).collect();
    if let Some(i) = limit_values.iter().position(|v| !v.is_finite()) {
        return Err(Error::Integrability(format!("f + V is not finite at node {i}")));
    }
    let (imin, vmin) =
        limit_values.iter().enumerate().fold((0, f64::INFINITY), |acc, (i, v)| if *v < acc.1 { (i, *v) } else { acc });
    let mut values = Vec::new();
    let mut witness = nodes[0];
    for &n in ns {
        let beta = env.beta.at(n);
        let lambda = (env.lambda)(n);
        let mut exps = Vec::with_capacity(nodes.len());
        for (p, w) in nodes.iter().zip(weights) {
            let v = (env.potential)(n, p);
            if !v.is_finite() {
                return Err(Error::Integrability(format!("V_{n} is not finite on the grid")));
            }
            let gi = env.interaction.as_ref().map_or(0.0, |g| lambda * g.eval(p));
            exps.push(w.ln() - beta * (f.eval(p) + v + gi));
        }
        let best =
            exps.iter().enumerate().fold((0, f64::NEG_INFINITY), |acc, (i, v)| if *v > acc.1 { (i, *v) } else { acc });
        witness = nodes[best.0];
        values.push(log_sum_exp(&exps) / beta);
    }
    let verdict = LaplaceVerdict::from_values(ns.to_vec(), values.clone(), vec![0.0; values.len()], -vmin, threshold);
    Ok(ParticleCheck { verdict, witness, minimizer: nodes[imin] })
}

/// Laplace verdict of a gas in a varying environment: the model carries the
/// environment, so `W_n` already includes the external energy of `nu_n` and
/// the limit uses that of `nu`.
pub fn conditional_gas_verify(
    model: &EnergyModel,
    f: Option<&MeasureFunctional>,
    ns: &[usize],
    budget: &McBudget,
    threshold: f64,
) -> Result<LaplaceVerdict> {
    if model.environment().is_none() {
        return Err(Error::InvalidParameter("the model has no environment".into()));
    }
    laplace_estimate_mc(model, f, ns, budget, None, threshold)
}
