//! Confinement diagnostics and the reweighting transforms for Euclidean
//! boxes.

use super::kernel::{Coupling, Kernel};
use super::{for_each_subset, EnergyModel, Order};
use crate::math::factorial;
use crate::prelude::*;
use crate::spaces::{Point, ScalarField, Space, SpaceKind, SpaceSpec};
use crate::{Error, Result};

#[derive(Clone, Debug, PartialEq)]
pub struct ConfiningCheck {
    /// Fraction of particles outside the compact set.
    pub mass_outside: f64,
    /// `(A k! / C)^{1/k} + k/n`.
    pub bound: f64,
    pub energy: f64,
}

/// Checks the mass-escape bound `mu(K^c) <= (A k!/C)^{1/k} + k/n` for the
/// empirical measure of `config`, given `W_n(config) <= A`, a nonnegative
/// kernel and `G >= C > 0` on tuples outside `K`.
pub fn confining_bound_check(
    model: &EnergyModel,
    config: &[Point],
    inside: &dyn Fn(&Point) -> bool,
    a: f64,
    c: f64,
) -> Result<ConfiningCheck> {
    if !(c > 0.0) {
        return Err(Error::HypothesisViolated(format!("C = {c} must be positive")));
    }
    let (lower, _) = model.kernel_lower_bound();
    if lower < 0.0 {
        return Err(Error::HypothesisViolated(format!("kernel lower bound {lower} is negative")));
    }
    let energy = model.w_n(config)?;
    if energy > a * (1.0 + 1e-12) + 1e-300 {
        return Err(Error::HypothesisViolated(format!("W_n = {energy} exceeds A = {a}")));
    }
    let n = config.len();
    let k = model.arity();
    let outside: Vec<usize> = (0..n).filter(|&i| !inside(&config[i])).collect();
    let mut violated = None;
    for_each_subset(outside.len(), k, |idx| {
        if violated.is_some() {
            return;
        }
        let pts: Vec<Point> = idx.iter().map(|&i| config[outside[i]]).collect();
        let g = model.kernel().eval(model.space(), &pts, Order::Finite(n));
        if g < c {
            violated = Some(g);
        }
    });
    if let Some(g) = violated {
        return Err(Error::HypothesisViolated(format!("G = {g} < C = {c} on a tuple outside K")));
    }
    let mass_outside = outside.len() as f64 / n as f64;
    let bound = (a * factorial(k) / c).powf(1.0 / k as f64) + k as f64 / n as f64;
    if mass_outside > bound {
        return Err(Error::BoundViolated { mass_outside, bound });
    }
    Ok(ConfiningCheck { mass_outside, bound, energy })
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub enum TransformMode {
    /// Reference `e^{-V} l`, kernel `G + V(x) + V(y)`.
    Weak,
    /// Reference `e^{-xi V} l`, kernel `G + b_n (V(x) + V(y))`.
    Strong { xi: f64, epsilon: f64 },
}

/// Grid diagnostics of a transform's preconditions.
#[derive(Clone, Debug, PartialEq)]
pub struct TransformCheck {
    /// `int e^{-V} dl` (weak) or `int e^{-xi V} dl` (strong) on the grid.
    pub reference_integral: f64,
    /// Minimum of `V` over the nodes.
    pub potential_min: f64,
    /// Minimum over distinct node pairs of `G + V(x) + V(y)` (weak) or
    /// `G + epsilon (V(x) + V(y))` (strong).
    pub kernel_grid_min: f64,
}

pub fn euclidean_transform(model: &EnergyModel, mode: TransformMode) -> Result<(EnergyModel, TransformCheck)> {
    let space = model.space();
    let SpaceKind::Box { .. } = space.kind() else {
        return Err(Error::InvalidSpace("Euclidean transforms need a box".into()));
    };
    let v = model
        .potential()
        .cloned()
        .ok_or_else(|| Error::InvalidParameter("the model carries no confining potential V".into()))?;
    if model.arity() != 2 {
        return Err(Error::UnsupportedArity(model.arity()));
    }
    let potential_min = space.nodes().iter().map(|p| v.eval(p)).fold(f64::INFINITY, f64::min);
    let (xi, pair_weight, coupling) = match mode {
        TransformMode::Weak => (1.0, 1.0, Coupling::Unit),
        TransformMode::Strong { xi, epsilon } => {
            if !(0.0..1.0).contains(&epsilon) {
                return Err(Error::InvalidParameter(format!("epsilon {epsilon} must lie in [0, 1)")));
            }
            if !(xi > 0.0 && xi.is_finite()) {
                return Err(Error::InvalidParameter(format!("xi {xi} must be positive")));
            }
            if !potential_min.is_finite() {
                return Err(Error::HypothesisViolated("V is not bounded below on the grid".into()));
            }
            (xi, epsilon, Coupling::Strong { xi, epsilon, beta: model.beta().clone() })
        }
    };
    let reference_integral = reference_integral(space, &v, xi);
    if !(reference_integral.is_finite() && reference_integral > 0.0) {
        return Err(Error::Integrability(format!("reference integral evaluates to {reference_integral}")));
    }
    let kernel_grid_min = pair_grid_min(space, model.kernel(), &v, pair_weight);
    if !kernel_grid_min.is_finite() {
        return Err(Error::HypothesisViolated(format!("transformed kernel has grid minimum {kernel_grid_min}")));
    }
    let base_density = space.density_field().cloned();
    let v_ref = v.clone();
    let label = format!("exp(-{xi}*({}))", v.label());
    let density = ScalarField::new(label, move |p| {
        let l = base_density.as_ref().map_or(1.0, |f| f.eval(p));
        l * (-xi * v_ref.eval(p)).exp()
    });
    let spec = SpaceSpec { kind: space.kind(), resolution: space.resolution(), basis_order: 0, density: Some(density) };
    let new_space = Space::build(spec)?;
    let kernel = Kernel::Confined { base: Box::new(model.kernel().clone()), potential: v.clone(), coupling };
    let transformed = EnergyModel::new(new_space, kernel, model.beta().clone()).with_potential(v);
    Ok((transformed, TransformCheck { reference_integral, potential_min, kernel_grid_min }))
}

fn reference_integral(space: &Space, v: &ScalarField, xi: f64) -> f64 {
    let base = space.density_field();
    let dim = space.dimension() as i32;
    space
        .nodes()
        .iter()
        .zip(space.cell_sides())
        .map(|(p, h)| {
            let l = base.map_or(1.0, |f| f.eval(p));
            l * (-xi * v.eval(p)).exp() * h.powi(dim)
        })
        .sum()
}

fn pair_grid_min(space: &Space, kernel: &Kernel, v: &ScalarField, weight: f64) -> f64 {
    let nodes = space.nodes();
    let values: Vec<f64> = nodes.iter().map(|p| v.eval(p)).collect();
    let mut best = f64::INFINITY;
    for i in 0..nodes.len() {
        for j in 0..i {
            let g = kernel.pair(space, &nodes[i], &nodes[j], Order::Limit) + weight * (values[i] + values[j]);
            if g.is_nan() {
                return f64::NAN;
            }
            best = best.min(g);
        }
    }
    best
}
