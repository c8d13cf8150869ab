//! Free energy `F = W + D(. || pi) / beta`, its minimization by entropic
//! mirror descent, and first-order optimality certificates.

use crate::energy::{EnergyModel, Kernel, Order, PairOperator};
use crate::finite::FiniteModel;
use crate::math::entropy_term;
use crate::measures::GridMeasure;
use crate::prelude::*;
use crate::spaces::GreenModel;
use crate::{Error, Result};

/// A differentiable objective on the probability simplex.
pub trait SimplexObjective {
    fn dim(&self) -> usize;
    /// Value and gradient at `a`; the value may be `+inf`.
    fn evaluate(&self, a: &[f64]) -> (f64, Vec<f64>);
    /// Bregman divergence `F(b) - F(a) - <grad F(a), b - a>` of a step.
    /// Objectives with a closed form should override the default, which
    /// cancels badly near the optimum.
    fn bregman(&self, step: &Step<'_>) -> f64 {
        let linear: f64 = step.ga.iter().zip(step.delta).map(|(g, d)| if *d == 0.0 { 0.0 } else { g * d }).sum();
        step.fb - step.fa - linear
    }
}

/// A mirror step from `a` to `b = a + delta`.
pub struct Step<'a> {
    pub a: &'a [f64],
    pub b: &'a [f64],
    pub delta: &'a [f64],
    /// `KL(b || a)`, computed without cancellation.
    pub kl: f64,
    pub fa: f64,
    pub fb: f64,
    pub ga: &'a [f64],
}

#[derive(Clone, Debug, PartialEq)]
pub struct MirrorOptions {
    pub max_steps: usize,
    /// Stop once `sum_i a_i |g_i - <g, a>|` falls below this value.
    pub tolerance: f64,
    pub initial_step: f64,
}

impl Default for MirrorOptions {
    fn default() -> Self {
        MirrorOptions { max_steps: 20_000, tolerance: 1e-11, initial_step: 1.0 }
    }
}

#[derive(Clone, Debug)]
pub struct MirrorResult {
    pub point: Vec<f64>,
    pub value: f64,
    pub gradient: Vec<f64>,
    /// Objective value after every accepted step, starting with the initial point.
    pub trace: Vec<f64>,
    /// `sum_i a_i |g_i - <g, a>|`, zero exactly at interior stationary points.
    pub stationarity: f64,
    /// Frank-Wolfe gap `<g, a> - min_i g_i`, an upper bound on the
    /// suboptimality of a convex objective.
    pub frank_wolfe_gap: f64,
    pub iterations: usize,
    pub converged: bool,
}

fn stationarity(a: &[f64], g: &[f64]) -> (f64, f64) {
    let mean: f64 = a.iter().zip(g).map(|(a, g)| if *a == 0.0 { 0.0 } else { a * g }).sum();
    let spread = a.iter().zip(g).map(|(a, g)| if *a == 0.0 { 0.0 } else { a * (g - mean).abs() }).sum();
    let min = g.iter().copied().fold(f64::INFINITY, f64::min);
    (spread, mean - min)
}

/// Entropic mirror descent with backtracking on the relative-smoothness
/// condition `F(a+) <= F(a) + <g, a+ - a> + KL(a+ || a) / eta`, which makes
/// the objective nonincreasing.
pub fn mirror_descent(obj: &dyn SimplexObjective, init: Vec<f64>, opts: &MirrorOptions) -> Result<MirrorResult> {
    let m = obj.dim();
    if init.len() != m {
        return Err(Error::InvalidParameter(format!("initial point has {} entries, expected {m}", init.len())));
    }
    let total: f64 = init.iter().sum();
    if init.iter().any(|x| !(*x >= 0.0)) || !(total > 0.0) {
        return Err(Error::InvalidMeasure("initial point must be a nonnegative nonzero vector".into()));
    }
    let mut a: Vec<f64> = init.iter().map(|x| x / total).collect();
    let (mut value, mut grad) = obj.evaluate(&a);
    if !value.is_finite() {
        return Err(Error::InvalidParameter(format!("objective is {value} at the initial point")));
    }
    let mut trace = vec![value];
    let mut eta = opts.initial_step;
    let mut iterations = 0;
    let mut converged = false;
    let mut candidate = vec![0.0; m];
    let mut delta = vec![0.0; m];
    for it in 0..opts.max_steps {
        let (spread, _) = stationarity(&a, &grad);
        if spread < opts.tolerance {
            converged = true;
            break;
        }
        iterations = it + 1;
        let gmin = a.iter().zip(&grad).filter(|(a, _)| **a > 0.0).map(|(_, g)| *g).fold(f64::INFINITY, f64::min);
        let mut accepted = false;
        for _ in 0..80 {
            // log(b_i / a_i) = x_i - log S with x_i = -eta (g_i - gmin)
            let mut s1 = 0.0;
            for i in 0..m {
                if a[i] > 0.0 {
                    s1 += a[i] * (-eta * (grad[i] - gmin)).exp_m1();
                }
            }
            let log_s = s1.ln_1p();
            let mut divergence_kl = 0.0;
            for i in 0..m {
                if a[i] == 0.0 {
                    candidate[i] = 0.0;
                    delta[i] = 0.0;
                    continue;
                }
                let x = -eta * (grad[i] - gmin) - log_s;
                let em1 = x.exp_m1();
                candidate[i] = a[i] + a[i] * em1;
                delta[i] = a[i] * em1;
                divergence_kl += a[i] * ((1.0 + em1) * x - em1);
            }
            let (v, g) = obj.evaluate(&candidate);
            let step = Step { a: &a, b: &candidate, delta: &delta, kl: divergence_kl, fa: value, fb: v, ga: &grad };
            let divergence = obj.bregman(&step);
            if v.is_finite() && divergence <= divergence_kl / eta {
                a.copy_from_slice(&candidate);
                value = v;
                grad = g;
                trace.push(value);
                accepted = true;
                eta *= 1.5;
                break;
            }
            eta *= 0.5;
        }
        if !accepted {
            // the step collapsed: either numerically stationary or a failure
            let (spread, _) = stationarity(&a, &grad);
            if spread < opts.tolerance.max(1e-8) {
                converged = true;
                break;
            }
            return Err(Error::StepSizeFailure { iteration: it });
        }
    }
    let (spread, fw) = stationarity(&a, &grad);
    converged |= spread < opts.tolerance;
    Ok(MirrorResult {
        point: a,
        value,
        gradient: grad,
        trace,
        stationarity: spread,
        frank_wolfe_gap: fw,
        iterations,
        converged,
    })
}

/// Free energy of an energy model at inverse temperature `beta`, with the
/// convention that `beta = inf` drops the entropy term.
#[derive(Clone, Debug)]
pub struct FreeEnergyModel {
    energy: EnergyModel,
    beta: f64,
    operator: PairOperator,
    external: Option<Vec<f64>>,
}

#[derive(Clone, Debug)]
pub struct EquilibriumResult {
    pub measure: GridMeasure,
    pub free_energy: f64,
    pub trace: Vec<f64>,
    /// Mean-field residual, for Green kernels at finite `beta`.
    pub residual: Option<MeanFieldResidual>,
    pub stationarity: f64,
    pub optimality_gap: f64,
    pub iterations: usize,
    pub converged: bool,
}

impl FreeEnergyModel {
    pub fn new(energy: EnergyModel, beta: f64) -> Result<Self> {
        if !(beta > 0.0) {
            return Err(Error::InvalidParameter(format!("beta = {beta} must be positive")));
        }
        if energy.arity() != 2 {
            return Err(Error::UnsupportedArity(energy.arity()));
        }
        let operator = energy.pair_operator(Order::Limit)?;
        let external = energy.external_nodes().map(|v| v.to_vec());
        Ok(FreeEnergyModel { energy, beta, operator, external })
    }

    /// Adds `∫v dmu` to the free energy, with `v` given at the nodes.
    pub fn with_linear_term(mut self, values: Vec<f64>) -> Result<Self> {
        if values.len() != self.operator.len() {
            return Err(Error::InvalidParameter(format!(
                "linear term has {} values for {} nodes",
                values.len(),
                self.operator.len()
            )));
        }
        self.external = Some(match self.external.take() {
            Some(v) => v.iter().zip(&values).map(|(a, b)| a + b).collect(),
            None => values,
        });
        Ok(self)
    }

    pub fn energy(&self) -> &EnergyModel {
        &self.energy
    }

    pub fn beta(&self) -> f64 {
        self.beta
    }

    fn weights(&self) -> &[f64] {
        self.energy.space().weights()
    }

    fn check(&self, mu: &GridMeasure) -> Result<()> {
        if mu.space().same_as(self.energy.space()) {
            Ok(())
        } else {
            Err(Error::MismatchedSpaces)
        }
    }

    /// `W(mu) + D(mu || pi) / beta`.
    pub fn free_energy(&self, mu: &GridMeasure) -> Result<f64> {
        self.check(mu)?;
        Ok(self.evaluate(&mu.masses()).0)
    }

    /// Interaction part `W(mu)`.
    pub fn interaction(&self, mu: &GridMeasure) -> Result<f64> {
        self.check(mu)?;
        let masses = mu.masses();
        let mut w = self.operator.quadratic(&masses);
        if let Some(v) = &self.external {
            w += v.iter().zip(&masses).map(|(v, m)| v * m).sum::<f64>();
        }
        Ok(w)
    }

    /// `delta F / delta rho` at the nodes.
    pub fn first_variation(&self, mu: &GridMeasure) -> Result<Vec<f64>> {
        self.check(mu)?;
        Ok(self.evaluate(&mu.masses()).1)
    }

    fn to_measure(&self, masses: &[f64]) -> GridMeasure {
        let density = masses.iter().zip(self.weights()).map(|(m, w)| m / w).collect();
        GridMeasure::from_raw(self.energy.space().clone(), density)
    }

    pub fn minimize(&self, init: &GridMeasure, opts: &MirrorOptions) -> Result<EquilibriumResult> {
        self.check(init)?;
        if self.beta == f64::INFINITY && !strictly_convex_at_zero_temperature(self.energy.kernel()) {
            return Err(Error::NotStrictlyConvex);
        }
        let res = mirror_descent(self, init.masses(), opts)?;
        let measure = self.to_measure(&res.point);
        let residual = match (self.energy.kernel(), self.beta.is_finite()) {
            (Kernel::Green(_), true) => Some(self.mean_field_residual(&measure)?),
            _ => None,
        };
        Ok(EquilibriumResult {
            free_energy: res.value,
            trace: res.trace,
            residual,
            stationarity: res.stationarity,
            optimality_gap: res.frank_wolfe_gap,
            iterations: res.iterations,
            converged: res.converged,
            measure,
        })
    }

    /// Spectral residual of `Laplacian(log rho) = beta (rho - lambda)`; see
    /// [`MeanFieldResidual`].
    pub fn mean_field_residual(&self, rho: &GridMeasure) -> Result<MeanFieldResidual> {
        self.check(rho)?;
        let Kernel::Green(g) = self.energy.kernel() else {
            return Err(Error::InvalidParameter("the mean-field equation needs a Green kernel".into()));
        };
        if !self.beta.is_finite() {
            return Err(Error::InvalidParameter("the mean-field equation needs finite beta".into()));
        }
        mean_field_residual(g, self.beta, rho)
    }

    /// Derivative of `t -> F((1 - t) mu_eq + t mu)` at `t = 0`: analytic
    /// value and one-sided differences at each step in `steps`.
    pub fn directional_derivative_check(
        &self,
        mu_eq: &GridMeasure,
        mu: &GridMeasure,
        steps: &[f64],
    ) -> Result<DerivativeCheck> {
        self.check(mu_eq)?;
        self.check(mu)?;
        let a0 = mu_eq.masses();
        let a1 = mu.masses();
        let finite_beta = self.beta.is_finite();
        if finite_beta {
            let bad = a0.iter().zip(&a1).any(|(x, y)| *x == 0.0 && *y > 0.0);
            if bad {
                return Err(Error::EntropyInfinite);
            }
        }
        let (f0, grad) = self.evaluate(&a0);
        if !f0.is_finite() || !self.evaluate(&a1).0.is_finite() {
            return Err(Error::EntropyInfinite);
        }
        let delta: Vec<f64> = a1.iter().zip(&a0).map(|(y, x)| y - x).collect();
        // the constant 1/beta in the gradient integrates to zero against delta
        let analytic: f64 = grad.iter().zip(&delta).map(|(g, d)| g * d).sum();
        let mut curvature = 2.0 * self.operator.quadratic(&delta);
        if finite_beta {
            curvature +=
                delta.iter().zip(&a0).filter(|(_, a)| **a > 0.0).map(|(d, a)| d * d / a).sum::<f64>() / self.beta;
        }
        let mut numeric = Vec::with_capacity(steps.len());
        for &h in steps {
            let at: Vec<f64> = a0.iter().zip(&delta).map(|(a, d)| a + h * d).collect();
            let fh = self.evaluate(&at).0;
            numeric.push((h, (fh - f0) / h));
        }
        Ok(DerivativeCheck { analytic, numeric, curvature })
    }
}

fn strictly_convex_at_zero_temperature(kernel: &Kernel) -> bool {
    match kernel {
        Kernel::LogChord { scale } => *scale > 0.0,
        Kernel::Green(_) => true,
        Kernel::Confined { base, .. } => strictly_convex_at_zero_temperature(base),
        _ => false,
    }
}

impl SimplexObjective for FreeEnergyModel {
    fn dim(&self) -> usize {
        self.operator.len()
    }

    fn evaluate(&self, a: &[f64]) -> (f64, Vec<f64>) {
        let mut u = self.operator.apply(a);
        if let Some(v) = &self.external {
            for (u, v) in u.iter_mut().zip(v) {
                *u += v;
            }
        }
        let mut value = 0.5 * u.iter().zip(a).map(|(u, a)| if *a == 0.0 { 0.0 } else { u * a }).sum::<f64>();
        if let Some(v) = &self.external {
            // the linear term entered u once, the quadratic form halves it
            value += 0.5 * v.iter().zip(a).map(|(v, a)| v * a).sum::<f64>();
        }
        if self.beta.is_finite() {
            let inv = 1.0 / self.beta;
            let mut entropy = 0.0;
            for ((ui, ai), w) in u.iter_mut().zip(a).zip(self.weights()) {
                entropy += entropy_term(*ai, *w);
                *ui += inv * (1.0 + (ai.max(1e-300) / w).ln());
            }
            value += inv * entropy;
        }
        (value, u)
    }

    fn bregman(&self, step: &Step<'_>) -> f64 {
        let mut d = self.operator.quadratic(step.delta);
        if self.beta.is_finite() {
            d += step.kl / self.beta;
        }
        d
    }
}

/// Parts of the spectral residual of the mean-field equation.
#[derive(Clone, Debug, PartialEq)]
pub struct MeanFieldResidual {
    /// `L^2(pi)` norm over the modes resolved by the Green truncation.
    pub resolved: f64,
    /// `L^2(pi)` norm over all modes of the space's basis.
    pub total: f64,
    /// Norm of `Laplacian(log rho)` restricted to unresolved modes.
    pub tail_log_rho: f64,
}

pub fn mean_field_residual(g: &GreenModel, beta: f64, rho: &GridMeasure) -> Result<MeanFieldResidual> {
    let space = g.space();
    let basis = space.basis().expect("Green kernels live on manifolds");
    if let Some(i) = rho.density().iter().position(|d| !(*d > 1e-300)) {
        return Err(Error::DensityTouchesZero { node: i });
    }
    let log_rho: Vec<f64> = rho.density().iter().map(|d| d.ln()).collect();
    let lhat = basis.analyze(space.nodes(), space.weights(), &log_rho);
    let rhat = basis.analyze(space.nodes(), space.weights(), rho.density());
    let chat = basis.analyze(space.nodes(), space.weights(), g.charge().density());
    let (mut resolved, mut total, mut tail) = (0.0, 0.0, 0.0);
    for k in 1..basis.len() {
        let lam = basis.eigenvalue(k);
        let r = -lam * lhat[k] - beta * (rhat[k] - chat[k]);
        total += r * r;
        if basis.order_of(k) <= g.order() {
            resolved += r * r;
        } else {
            tail += (lam * lhat[k]).powi(2);
        }
    }
    Ok(MeanFieldResidual { resolved: resolved.sqrt(), total: total.sqrt(), tail_log_rho: tail.sqrt() })
}

#[derive(Clone, Debug, PartialEq)]
pub struct DerivativeCheck {
    pub analytic: f64,
    /// `(h, (F(mu_h) - F(mu_eq)) / h)`.
    pub numeric: Vec<(f64, f64)>,
    /// Second derivative of `F` along the segment at `t = 0`.
    pub curvature: f64,
}

/// Free energy of a finite model on the probability simplex, with the
/// model's limit `beta`.
pub struct FiniteFreeEnergy<'a> {
    pub model: &'a FiniteModel,
}

impl SimplexObjective for FiniteFreeEnergy<'_> {
    fn dim(&self) -> usize {
        self.model.m()
    }

    fn evaluate(&self, a: &[f64]) -> (f64, Vec<f64>) {
        let mut g = self.model.w_macro_gradient(a);
        let beta = self.model.beta().limit();
        if beta.is_finite() {
            for ((gi, ai), p) in g.iter_mut().zip(a).zip(self.model.space().probs()) {
                *gi += (1.0 + (ai.max(1e-300) / p).ln()) / beta;
            }
        }
        (self.model.free_energy(a), g)
    }
}
