//! Gibbs measures on finite spaces and their exact enumeration.
//!
//! A configuration of `n` particles on `m` atoms is summarized by its type
//! (occupation counts); the energy, the reference probability and any
//! functional of the empirical measure depend on the type only, so sums over
//! `m^n` configurations reduce to sums over types with multinomial weights.

use crate::energy::BetaSchedule;
use crate::math::{binomial, factorial, ln_factorial, log_sum_exp};
use crate::measures::FiniteSpace;
use crate::prelude::*;
use crate::{Error, Result};

/// Largest `m^n` accepted by [`exact_enumerate`].
pub const ENUMERATION_CAP: f64 = 1e8;

#[derive(Clone, Debug, PartialEq)]
pub enum FiniteKernel {
    /// Symmetric pair kernel as a row-major `m x m` matrix.
    Pair(Vec<f64>),
    Constant {
        value: f64,
        arity: usize,
    },
}

#[derive(Clone, Debug)]
pub struct FiniteModel {
    space: FiniteSpace,
    kernel: FiniteKernel,
    beta: BetaSchedule,
}

impl FiniteModel {
    pub fn new(space: FiniteSpace, kernel: FiniteKernel, beta: BetaSchedule) -> Result<Self> {
        if let FiniteKernel::Pair(g) = &kernel {
            let m = space.len();
            if g.len() != m * m {
                return Err(Error::InvalidParameter(format!("pair kernel has {} entries for {m} atoms", g.len())));
            }
            for a in 0..m {
                for b in 0..m {
                    if g[a * m + b] != g[b * m + a] || g[a * m + b].is_nan() {
                        return Err(Error::InvalidParameter("pair kernel must be symmetric".into()));
                    }
                    if g[a * m + b] == f64::NEG_INFINITY {
                        return Err(Error::InvalidParameter("pair kernel must be bounded below".into()));
                    }
                }
            }
        }
        if let FiniteKernel::Constant { arity, .. } = kernel {
            if arity < 1 {
                return Err(Error::UnsupportedArity(arity));
            }
        }
        Ok(FiniteModel { space, kernel, beta })
    }

    /// Zero interaction.
    pub fn free(space: FiniteSpace, beta: BetaSchedule) -> Self {
        let m = space.len();
        FiniteModel { space, kernel: FiniteKernel::Pair(vec![0.0; m * m]), beta }
    }

    pub fn space(&self) -> &FiniteSpace {
        &self.space
    }

    pub fn kernel(&self) -> &FiniteKernel {
        &self.kernel
    }

    pub fn beta(&self) -> &BetaSchedule {
        &self.beta
    }

    pub fn m(&self) -> usize {
        self.space.len()
    }

    pub fn arity(&self) -> usize {
        match &self.kernel {
            FiniteKernel::Pair(_) => 2,
            FiniteKernel::Constant { arity, .. } => *arity,
        }
    }

    pub fn pair(&self, a: usize, b: usize) -> f64 {
        match &self.kernel {
            FiniteKernel::Pair(g) => g[a * self.m() + b],
            FiniteKernel::Constant { value, .. } => *value,
        }
    }

    /// `W_n` of a configuration of atom indices.
    pub fn w_n(&self, config: &[usize]) -> f64 {
        let n = config.len();
        match &self.kernel {
            FiniteKernel::Pair(_) => {
                let mut sum = 0.0;
                for i in 0..n {
                    for j in (i + 1)..n {
                        let g = self.pair(config[i], config[j]);
                        if g == f64::INFINITY {
                            return g;
                        }
                        sum += g;
                    }
                }
                sum / (n * n) as f64
            }
            FiniteKernel::Constant { value, arity } => value * binomial(n, *arity) / (n as f64).powi(*arity as i32),
        }
    }

    /// `W_n` of any configuration with occupation counts `counts`.
    pub fn w_n_counts(&self, counts: &[usize]) -> f64 {
        let n: usize = counts.iter().sum();
        match &self.kernel {
            FiniteKernel::Pair(g) => {
                let m = self.m();
                let mut sum = 0.0;
                for a in 0..m {
                    if counts[a] == 0 {
                        continue;
                    }
                    let ca = counts[a] as f64;
                    // pairs within atom a, then with later atoms
                    let same = ca * (ca - 1.0) / 2.0;
                    if same > 0.0 {
                        if g[a * m + a] == f64::INFINITY {
                            return f64::INFINITY;
                        }
                        sum += same * g[a * m + a];
                    }
                    for b in (a + 1)..m {
                        if counts[b] == 0 {
                            continue;
                        }
                        if g[a * m + b] == f64::INFINITY {
                            return f64::INFINITY;
                        }
                        sum += ca * counts[b] as f64 * g[a * m + b];
                    }
                }
                sum / (n * n) as f64
            }
            FiniteKernel::Constant { value, arity } => value * binomial(n, *arity) / (n as f64).powi(*arity as i32),
        }
    }

    /// Macroscopic energy `W(mu) = (1/2) sum mu_a mu_b G_ab`, or `c / k!` for
    /// a constant kernel.
    pub fn w_macro(&self, mu: &[f64]) -> f64 {
        match &self.kernel {
            FiniteKernel::Pair(g) => {
                let m = self.m();
                let mut sum = 0.0;
                for a in 0..m {
                    for b in 0..m {
                        let w = mu[a] * mu[b];
                        if w == 0.0 {
                            continue;
                        }
                        sum += w * g[a * m + b];
                    }
                }
                0.5 * sum
            }
            FiniteKernel::Constant { value, arity } => value / factorial(*arity),
        }
    }

    /// Gradient of [`FiniteModel::w_macro`].
    pub fn w_macro_gradient(&self, mu: &[f64]) -> Vec<f64> {
        let m = self.m();
        match &self.kernel {
            FiniteKernel::Pair(g) => {
                (0..m).map(|a| (0..m).filter(|&b| mu[b] != 0.0).map(|b| g[a * m + b] * mu[b]).sum()).collect()
            }
            FiniteKernel::Constant { .. } => vec![0.0; m],
        }
    }

    /// `F(mu) = W(mu) + D(mu || pi) / beta` with the limit `beta`.
    pub fn free_energy(&self, mu: &[f64]) -> f64 {
        let beta = self.beta.limit();
        let w = self.w_macro(mu);
        if beta == f64::INFINITY {
            return w;
        }
        let d: f64 = mu.iter().zip(self.space.probs()).map(|(a, p)| crate::math::entropy_term(*a, *p)).sum();
        w + d / beta
    }
}

/// One type class of `n`-particle configurations.
#[derive(Clone, Debug, PartialEq)]
pub struct TypeClass {
    pub counts: Vec<usize>,
    /// `W_n` of any member.
    pub energy: f64,
    /// `log pi^{(n)}(class)`: multinomial coefficient times `prod pi_a^{c_a}`.
    pub log_reference: f64,
    /// `log gamma_n(class) = log_reference - n beta_n energy`.
    pub log_weight: f64,
    /// `P_n(class)`.
    pub probability: f64,
}

impl TypeClass {
    /// Empirical measure `counts / n`.
    pub fn empirical(&self) -> Vec<f64> {
        let n: usize = self.counts.iter().sum();
        self.counts.iter().map(|c| *c as f64 / n as f64).collect()
    }
}

#[derive(Clone, Debug)]
pub struct Enumeration {
    pub n: usize,
    pub beta_n: f64,
    pub log_z: f64,
    pub classes: Vec<TypeClass>,
}

impl Enumeration {
    pub fn z(&self) -> f64 {
        self.log_z.exp()
    }

    /// `log integral exp(-n beta_n f(i_n)) dgamma_n`.
    pub fn log_integral(&self, f: impl Fn(&[f64]) -> f64) -> f64 {
        let nb = self.n as f64 * self.beta_n;
        let terms: Vec<f64> = self
            .classes
            .iter()
            .map(|c| {
                let v = f(&c.empirical());
                if v == f64::INFINITY {
                    f64::NEG_INFINITY
                } else {
                    c.log_weight - nb * v
                }
            })
            .collect();
        log_sum_exp(&terms)
    }

    /// `log integral exp(-n beta_n f(i_n)) dgamma_n - log Z_n`, arranged so
    /// that classes with `f = 0` cancel exactly.
    pub fn log_expectation(&self, f: impl Fn(&[f64]) -> f64) -> f64 {
        let nb = self.n as f64 * self.beta_n;
        let base: Vec<f64> = self.classes.iter().map(|c| c.log_weight).collect();
        let shifted: Vec<f64> = self
            .classes
            .iter()
            .map(|c| {
                let v = f(&c.empirical());
                if v == f64::INFINITY {
                    f64::NEG_INFINITY
                } else if v == 0.0 {
                    c.log_weight
                } else {
                    c.log_weight - nb * v
                }
            })
            .collect();
        if shifted == base {
            return 0.0;
        }
        log_sum_exp(&shifted) - log_sum_exp(&base)
    }

    /// `P_n(i_n in set)`.
    pub fn probability_of(&self, set: impl Fn(&[f64]) -> bool) -> f64 {
        self.classes.iter().filter(|c| set(&c.empirical())).map(|c| c.probability).sum()
    }
}

/// Visits all compositions of `n` into `m` nonnegative parts.
pub fn for_each_type(m: usize, n: usize, mut visit: impl FnMut(&[usize])) {
    let mut counts = vec![0usize; m];
    fn rec(i: usize, remaining: usize, counts: &mut [usize], visit: &mut dyn FnMut(&[usize])) {
        if i == counts.len() - 1 {
            counts[i] = remaining;
            visit(counts);
            return;
        }
        for c in (0..=remaining).rev() {
            counts[i] = c;
            rec(i + 1, remaining - c, counts, visit);
        }
    }
    if m > 0 {
        rec(0, n, &mut counts, &mut visit);
    }
}

/// Exact `Z_n` and the law of the empirical measure under `P_n`.
pub fn exact_enumerate(model: &FiniteModel, n: usize) -> Result<Enumeration> {
    let m = model.m();
    let states = (m as f64).powi(n as i32);
    if states > ENUMERATION_CAP {
        return Err(Error::EnumerationCap { states, cap: ENUMERATION_CAP });
    }
    if n < model.arity() {
        return Err(Error::TooFewParticles { n, arity: model.arity() });
    }
    let beta_n = model.beta().at(n);
    let log_pi: Vec<f64> = model.space().probs().iter().map(|p| p.ln()).collect();
    let ln_n_fact = ln_factorial(n);
    let mut classes = Vec::new();
    for_each_type(m, n, |counts| {
        let energy = model.w_n_counts(counts);
        let mut log_reference = ln_n_fact;
        for (c, lp) in counts.iter().zip(&log_pi) {
            log_reference += *c as f64 * lp - ln_factorial(*c);
        }
        let log_weight = if energy == f64::INFINITY {
            f64::NEG_INFINITY
        } else if energy == 0.0 {
            log_reference
        } else {
            log_reference - n as f64 * beta_n * energy
        };
        classes.push(TypeClass { counts: counts.to_vec(), energy, log_reference, log_weight, probability: 0.0 });
    });
    let logs: Vec<f64> = classes.iter().map(|c| c.log_weight).collect();
    // gamma_n = pi^n is a probability measure when the energy vanishes
    let log_z = if classes.iter().all(|c| c.energy == 0.0) { 0.0 } else { log_sum_exp(&logs) };
    for c in classes.iter_mut() {
        c.probability = (c.log_weight - log_z).exp();
    }
    Ok(Enumeration { n, beta_n, log_z, classes })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn free_model_has_unit_partition_function() {
        let model = FiniteModel::free(FiniteSpace::new(vec![0.2, 0.3, 0.5]).unwrap(), BetaSchedule::Constant(1.0));
        let e = exact_enumerate(&model, 7).unwrap();
        assert!(e.log_z.abs() < 1e-14);
        let total: f64 = e.classes.iter().map(|c| c.probability).sum();
        assert!((total - 1.0).abs() < 1e-12);
    }

    #[test]
    fn two_atom_hand_enumeration() {
        // W_2 equal to the indicator of distinct atoms: G = 4 * 1[a != b]
        let g = vec![0.0, 4.0, 4.0, 0.0];
        let model =
            FiniteModel::new(FiniteSpace::uniform(2), FiniteKernel::Pair(g), BetaSchedule::Constant(1.0)).unwrap();
        assert_eq!(model.w_n(&[0, 1]), 1.0);
        let e = exact_enumerate(&model, 2).unwrap();
        let expected = 0.5 + 0.5 * (-2f64).exp();
        assert!((e.z() - expected).abs() < 1e-15);
    }

    #[test]
    fn counts_agree_with_configurations() {
        let g = vec![0.3, -1.0, 2.0, -1.0, 0.0, 0.5, 2.0, 0.5, 1.0];
        let model =
            FiniteModel::new(FiniteSpace::uniform(3), FiniteKernel::Pair(g), BetaSchedule::Constant(1.0)).unwrap();
        let config = [0, 2, 2, 1, 0, 2];
        let mut counts = [0usize; 3];
        for c in config {
            counts[c] += 1;
        }
        assert!((model.w_n(&config) - model.w_n_counts(&counts)).abs() < 1e-15);
    }

    #[test]
    fn cap_is_enforced() {
        let model = FiniteModel::free(FiniteSpace::uniform(4), BetaSchedule::Constant(1.0));
        assert!(matches!(exact_enumerate(&model, 14), Err(Error::EnumerationCap { .. })));
        assert!(exact_enumerate(&model, 13).is_ok());
    }
}
