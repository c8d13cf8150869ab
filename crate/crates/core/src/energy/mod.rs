//! Interaction energies of particle configurations and of measures.
//!
//! For a symmetric kernel `G` of arity `k`,
//! `W_n(x) = n^{-k} sum G(x_{i_1}, ..., x_{i_k})` over `k`-subsets of distinct
//! indices, and the macroscopic energy is `W(mu) = (1/k!) int G dmu^k`.
//! An optional environment adds `(1/n) sum_i V_n(x_i)` with
//! `V_n(x) = int G^E(x, y) dnu_n(y)`.

mod diagonal;
mod kernel;
mod operator;
mod transform;

pub use diagonal::{unit_cell_neg_log, unit_cell_riesz};
pub use kernel::{strong_a, strong_b, Coupling, CustomKernel, Kernel};
pub use operator::{PairOperator, DENSE_LIMIT};
pub use transform::{confining_bound_check, euclidean_transform, ConfiningCheck, TransformCheck, TransformMode};

use core::fmt;

use crate::math::{binomial, factorial};
use crate::measures::GridMeasure;
use crate::prelude::*;
pub use crate::spaces::ScalarField;
use crate::spaces::{Point, Space};
use crate::{Error, Result};

/// Particle number at which an n-dependent quantity is evaluated.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Order {
    Finite(usize),
    Limit,
}

/// Inverse temperatures `beta_n` and their limit.
#[derive(Clone)]
pub enum BetaSchedule {
    Constant(f64),
    /// `beta_n = c n`, limit `+inf`.
    Proportional(f64),
    Custom {
        label: String,
        f: Arc<dyn Fn(usize) -> f64 + Send + Sync>,
        limit: f64,
    },
}

impl BetaSchedule {
    pub fn at(&self, n: usize) -> f64 {
        match self {
            BetaSchedule::Constant(b) => *b,
            BetaSchedule::Proportional(c) => c * n as f64,
            BetaSchedule::Custom { f, .. } => f(n),
        }
    }

    pub fn limit(&self) -> f64 {
        match self {
            BetaSchedule::Constant(b) => *b,
            BetaSchedule::Proportional(_) => f64::INFINITY,
            BetaSchedule::Custom { limit, .. } => *limit,
        }
    }

    pub fn label(&self) -> String {
        match self {
            BetaSchedule::Constant(b) => format!("{b}"),
            BetaSchedule::Proportional(c) => format!("{c}*n"),
            BetaSchedule::Custom { label, .. } => label.clone(),
        }
    }
}

impl fmt::Debug for BetaSchedule {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "BetaSchedule({})", self.label())
    }
}

/// Background measures `nu_n`.
#[derive(Clone)]
pub enum EnvironmentStream {
    /// `nu_n = nu` for every `n`.
    Fixed(GridMeasure),
    /// `nu_n` is the empirical measure of `points(n)`; `limit` is the weak limit.
    Points { label: String, points: Arc<dyn Fn(usize) -> Vec<Point> + Send + Sync>, limit: GridMeasure },
}

impl fmt::Debug for EnvironmentStream {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            EnvironmentStream::Fixed(_) => write!(f, "Fixed"),
            EnvironmentStream::Points { label, .. } => write!(f, "Points({label})"),
        }
    }
}

impl EnvironmentStream {
    pub fn limit(&self) -> &GridMeasure {
        match self {
            EnvironmentStream::Fixed(m) => m,
            EnvironmentStream::Points { limit, .. } => limit,
        }
    }
}

/// External interaction with a background.
#[derive(Clone, Debug)]
pub struct Environment {
    pub kernel: Kernel,
    pub stream: EnvironmentStream,
}

/// Energy of a particle system on a space.
#[derive(Clone, Debug)]
pub struct EnergyModel {
    space: Arc<Space>,
    kernel: Kernel,
    environment: Option<Environment>,
    /// `V(x) = int G^E(x, y) dnu(y)` at the nodes, for the limit `nu`.
    external_nodes: Option<Vec<f64>>,
    beta: BetaSchedule,
    potential: Option<ScalarField>,
    lower_bound: f64,
    lower_bound_estimated: bool,
}

/// Energy of one configuration with its decomposition.
#[derive(Clone, Debug)]
pub struct EnergyReport {
    pub value: f64,
    /// Interaction part (already divided by `n^k`).
    pub internal: f64,
    /// External part `(1/n) sum V_n(x_i)`.
    pub external: f64,
    /// `(indices, G)` for every evaluated tuple, in evaluation order.
    pub tuples: Vec<(Vec<usize>, f64)>,
    pub hit_infinity: bool,
    /// Lower bound `C` of the kernel and whether it came from grid minimization.
    pub kernel_lower_bound: f64,
    pub lower_bound_estimated: bool,
}

impl EnergyModel {
    pub fn new(space: Arc<Space>, kernel: Kernel, beta: BetaSchedule) -> Self {
        let (lower_bound, estimated) = match kernel.lower_bound(&space) {
            Some(c) => (c, false),
            None => (estimate_lower_bound(&kernel, &space), true),
        };
        EnergyModel {
            space,
            kernel,
            environment: None,
            external_nodes: None,
            beta,
            potential: None,
            lower_bound,
            lower_bound_estimated: estimated,
        }
    }

    /// Attaches a background; its limit potential must be finite at every node.
    pub fn with_environment(mut self, env: Environment) -> Result<Self> {
        if env.kernel.arity() != 2 {
            return Err(Error::UnsupportedArity(env.kernel.arity()));
        }
        let limit = env.stream.limit();
        if !limit.space().same_as(&self.space) {
            return Err(Error::MismatchedSpaces);
        }
        let op = PairOperator::new(&env.kernel, &self.space, Order::Limit)?;
        let v = op.apply(&limit.masses());
        if let Some(i) = v.iter().position(|x| !x.is_finite()) {
            return Err(Error::InvalidParameter(format!("external potential is not finite at node {i}")));
        }
        self.external_nodes = Some(v);
        self.environment = Some(env);
        Ok(self)
    }

    /// Records the confining potential used by the Euclidean transforms.
    pub fn with_potential(mut self, v: ScalarField) -> Self {
        self.potential = Some(v);
        self
    }

    pub fn space(&self) -> &Arc<Space> {
        &self.space
    }

    pub fn kernel(&self) -> &Kernel {
        &self.kernel
    }

    pub fn arity(&self) -> usize {
        self.kernel.arity()
    }

    pub fn beta(&self) -> &BetaSchedule {
        &self.beta
    }

    pub fn environment(&self) -> Option<&Environment> {
        self.environment.as_ref()
    }

    pub fn potential(&self) -> Option<&ScalarField> {
        self.potential.as_ref()
    }

    pub fn with_beta(mut self, beta: BetaSchedule) -> Self {
        self.beta = beta;
        self
    }

    /// Lower bound `C` of the kernel and whether it was estimated on the grid.
    pub fn kernel_lower_bound(&self) -> (f64, bool) {
        (self.lower_bound, self.lower_bound_estimated)
    }

    /// Stability bound `C * binom(n, k) / n^k` (plus the smallest external
    /// node potential when a background is present).
    pub fn stability_bound(&self, n: usize) -> f64 {
        let k = self.arity();
        let mut b = self.lower_bound * binomial(n, k) / (n as f64).powi(k as i32);
        if let Some(v) = &self.external_nodes {
            b += v.iter().copied().fold(f64::INFINITY, f64::min);
        }
        b
    }

    fn check_config(&self, config: &[Point]) -> Result<()> {
        let k = self.arity();
        if config.len() < k {
            return Err(Error::TooFewParticles { n: config.len(), arity: k });
        }
        for (i, p) in config.iter().enumerate() {
            self.space.check_point(i, p)?;
        }
        Ok(())
    }

    /// `V_n(x)`; zero without a background.
    pub fn external_potential(&self, x: &Point, order: Order) -> f64 {
        let Some(env) = &self.environment else {
            return 0.0;
        };
        match (&env.stream, order) {
            (EnvironmentStream::Points { points, .. }, Order::Finite(n)) => {
                let pts = points(n);
                if pts.is_empty() {
                    return 0.0;
                }
                let mut acc = 0.0;
                for p in &pts {
                    let g = env.kernel.pair(&self.space, x, p, order);
                    if g == f64::INFINITY {
                        return g;
                    }
                    acc += g;
                }
                acc / pts.len() as f64
            }
            (stream, _) => {
                let nu = stream.limit();
                let mut acc = 0.0;
                for ((p, w), d) in self.space.nodes().iter().zip(self.space.weights()).zip(nu.density()) {
                    if *d == 0.0 {
                        continue;
                    }
                    let g = env.kernel.pair(&self.space, x, p, order);
                    if g == f64::INFINITY {
                        return g;
                    }
                    acc += w * d * g;
                }
                acc
            }
        }
    }

    /// External potential of the limit background at the nodes.
    pub fn external_nodes(&self) -> Option<&[f64]> {
        self.external_nodes.as_deref()
    }

    /// `W_n` of a configuration; `+inf` as soon as one tuple is infinite.
    pub fn w_n(&self, config: &[Point]) -> Result<f64> {
        self.check_config(config)?;
        Ok(self.w_n_unchecked(config))
    }

    pub(crate) fn w_n_unchecked(&self, config: &[Point]) -> f64 {
        let n = config.len();
        let order = Order::Finite(n);
        let k = self.arity();
        let mut sum = 0.0;
        if k == 2 {
            for i in 0..n {
                for j in (i + 1)..n {
                    let g = self.kernel.pair(&self.space, &config[i], &config[j], order);
                    if g == f64::INFINITY {
                        return g;
                    }
                    sum += g;
                }
            }
        } else {
            let mut infinite = false;
            for_each_subset(n, k, |idx| {
                if infinite {
                    return;
                }
                let pts: Vec<Point> = idx.iter().map(|&i| config[i]).collect();
                let g = self.kernel.eval(&self.space, &pts, order);
                if g == f64::INFINITY {
                    infinite = true;
                }
                sum += g;
            });
            if infinite {
                return f64::INFINITY;
            }
        }
        let mut value = sum / (n as f64).powi(k as i32);
        if self.environment.is_some() {
            let mut ext = 0.0;
            for x in config {
                let v = self.external_potential(x, order);
                if v == f64::INFINITY {
                    return v;
                }
                ext += v;
            }
            value += ext / n as f64;
        }
        value
    }

    /// Terms of `W_n` that involve particle `i` when it sits at `x`; the
    /// difference of two such values is the energy change of a single-particle
    /// move.
    pub fn particle_energy(&self, config: &[Point], i: usize, x: &Point) -> f64 {
        let n = config.len();
        let order = Order::Finite(n);
        let k = self.arity();
        let mut sum = 0.0;
        if k == 2 {
            for (j, y) in config.iter().enumerate() {
                if j == i {
                    continue;
                }
                let g = self.kernel.pair(&self.space, x, y, order);
                if g == f64::INFINITY {
                    return g;
                }
                sum += g;
            }
        } else {
            let others: Vec<usize> = (0..n).filter(|&j| j != i).collect();
            let mut infinite = false;
            for_each_subset(n - 1, k - 1, |idx| {
                if infinite {
                    return;
                }
                let mut pts = Vec::with_capacity(k);
                pts.push(*x);
                pts.extend(idx.iter().map(|&j| config[others[j]]));
                let g = self.kernel.eval(&self.space, &pts, order);
                if g == f64::INFINITY {
                    infinite = true;
                }
                sum += g;
            });
            if infinite {
                return f64::INFINITY;
            }
        }
        let mut value = sum / (n as f64).powi(k as i32);
        if self.environment.is_some() {
            let v = self.external_potential(x, order);
            if v == f64::INFINITY {
                return v;
            }
            value += v / n as f64;
        }
        value
    }

    /// `W_n` with its per-tuple decomposition.
    pub fn energy_report(&self, config: &[Point]) -> Result<EnergyReport> {
        self.check_config(config)?;
        let n = config.len();
        let order = Order::Finite(n);
        let k = self.arity();
        let scale = 1.0 / (n as f64).powi(k as i32);
        let mut tuples = Vec::new();
        let mut hit_infinity = false;
        for_each_subset(n, k, |idx| {
            let pts: Vec<Point> = idx.iter().map(|&i| config[i]).collect();
            let g = self.kernel.eval(&self.space, &pts, order);
            hit_infinity |= g == f64::INFINITY;
            tuples.push((idx.to_vec(), g));
        });
        let internal = tuples.iter().map(|(_, g)| g).sum::<f64>() * scale;
        let external = if self.environment.is_some() {
            config.iter().map(|x| self.external_potential(x, order)).sum::<f64>() / n as f64
        } else {
            0.0
        };
        hit_infinity |= external == f64::INFINITY;
        let value = if hit_infinity { f64::INFINITY } else { internal + external };
        Ok(EnergyReport {
            value,
            internal,
            external,
            tuples,
            hit_infinity,
            kernel_lower_bound: self.lower_bound,
            lower_bound_estimated: self.lower_bound_estimated,
        })
    }

    /// Grid operator of the pair kernel at the given order.
    pub fn pair_operator(&self, order: Order) -> Result<PairOperator> {
        PairOperator::new(&self.kernel, &self.space, order)
    }

    /// `int G dmu^k` by grid quadrature with diagonal correction.
    pub fn kernel_integral(&self, mu: &GridMeasure, order: Order) -> Result<f64> {
        if !mu.space().same_as(&self.space) {
            return Err(Error::MismatchedSpaces);
        }
        let masses = mu.masses();
        match self.arity() {
            2 => {
                let op = self.pair_operator(order)?;
                Ok(2.0 * op.quadratic(&masses))
            }
            3 => {
                let n = self.space.len();
                if (n as f64).powi(3) > 1e9 {
                    return Err(Error::InvalidParameter(format!("three-body quadrature on {n} nodes is too large")));
                }
                if self.kernel.is_singular() {
                    return Err(Error::UnsupportedArity(3));
                }
                let nodes = self.space.nodes();
                let mut acc = 0.0;
                for i in 0..n {
                    if masses[i] == 0.0 {
                        continue;
                    }
                    for j in 0..n {
                        if masses[j] == 0.0 {
                            continue;
                        }
                        let mij = masses[i] * masses[j];
                        for l in 0..n {
                            if masses[l] == 0.0 {
                                continue;
                            }
                            acc +=
                                mij * masses[l] * self.kernel.eval(&self.space, &[nodes[i], nodes[j], nodes[l]], order);
                        }
                    }
                }
                Ok(acc)
            }
            k => Err(Error::UnsupportedArity(k)),
        }
    }

    /// `int V dmu` for the limit background.
    pub fn external_energy(&self, mu: &GridMeasure) -> f64 {
        match &self.external_nodes {
            Some(v) => mu.integrate_nodes(v),
            None => 0.0,
        }
    }

    /// `W(mu) = (1/k!) int G dmu^k + int V dmu`, for `k <= 3`.
    pub fn w_macro(&self, mu: &GridMeasure) -> Result<f64> {
        let k = self.arity();
        let integral = self.kernel_integral(mu, Order::Limit)?;
        Ok(integral / factorial(k) + self.external_energy(mu))
    }

    /// `E_{mu^n}[W_n] = n^{-k} binom(n, k) int G dmu^k + int V_n dmu`.
    pub fn expected_energy(&self, mu: &GridMeasure, n: usize) -> Result<f64> {
        let k = self.arity();
        if n < k {
            return Err(Error::TooFewParticles { n, arity: k });
        }
        let integral = self.kernel_integral(mu, Order::Finite(n))?;
        if !integral.is_finite() {
            return Err(Error::DivergentIntegral(format!("kernel integral is {integral}")));
        }
        let coef = binomial(n, k) / (n as f64).powi(k as i32);
        let external = match &self.environment {
            None => 0.0,
            Some(Environment { stream: EnvironmentStream::Fixed(_), .. }) => self.external_energy(mu),
            Some(_) => {
                let order = Order::Finite(n);
                let values: Vec<f64> = self.space.nodes().iter().map(|x| self.external_potential(x, order)).collect();
                mu.integrate_nodes(&values)
            }
        };
        Ok(coef * integral + external)
    }
}

/// Smallest off-diagonal pair value over (a subsample of) the grid.
fn estimate_lower_bound(kernel: &Kernel, space: &Space) -> f64 {
    let nodes = space.nodes();
    let stride = nodes.len().div_ceil(512).max(1);
    let sample: Vec<&Point> = nodes.iter().step_by(stride).collect();
    let k = kernel.arity();
    let mut best = f64::INFINITY;
    if k == 2 {
        for i in 0..sample.len() {
            for j in 0..i {
                best = best.min(kernel.pair(space, sample[i], sample[j], Order::Limit));
            }
        }
    } else {
        let small: Vec<Point> = sample.iter().take(24).map(|p| **p).collect();
        for_each_subset(small.len(), k, |idx| {
            let pts: Vec<Point> = idx.iter().map(|&i| small[i]).collect();
            best = best.min(kernel.eval(space, &pts, Order::Limit));
        });
    }
    best
}

/// Visits every increasing `k`-subset of `0..n` in lexicographic order.
pub fn for_each_subset(n: usize, k: usize, mut visit: impl FnMut(&[usize])) {
    if k > n {
        return;
    }
    if k == 0 {
        visit(&[]);
        return;
    }
    let mut idx: Vec<usize> = (0..k).collect();
    loop {
        visit(&idx);
        let mut i = k;
        while i > 0 {
            i -= 1;
            if idx[i] != i + n - k {
                idx[i] += 1;
                for j in (i + 1)..k {
                    idx[j] = idx[j - 1] + 1;
                }
                break;
            }
            if i == 0 {
                return;
            }
        }
    }
}
