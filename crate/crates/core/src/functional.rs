//! Functionals `f` of probability measures, evaluated on empirical
//! measures `i_n(x)` and on grid measures.
//!
//! Two classes are representable: integrals `∫g dmu` (and bounded
//! compositions `h(∫g_1 dmu, ..., ∫g_r dmu)`), which act on atoms directly,
//! and functionals of a density, which see the Gaussian projection of an
//! empirical measure at a fixed bandwidth.

use core::fmt;

use crate::measures::{grid_projection, EmpiricalMeasure, GridMeasure};
use crate::prelude::*;
use crate::spaces::{Point, ScalarField, Space};
use crate::{Error, Result};

pub type Outer = Arc<dyn Fn(&[f64]) -> f64 + Send + Sync>;
pub type DensityFn = Arc<dyn Fn(&GridMeasure) -> f64 + Send + Sync>;

#[derive(Clone)]
pub enum MeasureFunctional {
    /// `∫g dmu`.
    Integral(ScalarField),
    /// `outer(∫g_1 dmu, ..., ∫g_r dmu)`.
    Composite { fields: Vec<ScalarField>, outer: Outer, label: String },
    /// A functional of the smoothed density.
    Density { bandwidth: f64, f: DensityFn, label: String },
}

impl fmt::Debug for MeasureFunctional {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "MeasureFunctional({})", self.label())
    }
}

impl MeasureFunctional {
    pub fn label(&self) -> String {
        match self {
            MeasureFunctional::Integral(g) => format!("int {}", g.label()),
            MeasureFunctional::Composite { label, .. } | MeasureFunctional::Density { label, .. } => label.clone(),
        }
    }

    /// Whether the value depends on atoms only through integrals.
    pub fn is_integral(&self) -> bool {
        !matches!(self, MeasureFunctional::Density { .. })
    }

    /// `f(i_n(x))`.
    pub fn eval_points(&self, space: &Arc<Space>, points: &[Point]) -> Result<f64> {
        if points.is_empty() {
            return Err(Error::EmptyPointList);
        }
        let n = points.len() as f64;
        let mean = |g: &ScalarField| points.iter().map(|p| g.eval(p)).sum::<f64>() / n;
        let v = match self {
            MeasureFunctional::Integral(g) => mean(g),
            MeasureFunctional::Composite { fields, outer, .. } => {
                let args: Vec<f64> = fields.iter().map(mean).collect();
                outer(&args)
            }
            MeasureFunctional::Density { bandwidth, f, .. } => {
                let e = EmpiricalMeasure::from_points(space.clone(), points.to_vec())?;
                f(&grid_projection(&e, *bandwidth)?)
            }
        };
        finite(v, self)
    }

    /// `f(mu)` for a grid measure.
    pub fn eval_grid(&self, mu: &GridMeasure) -> Result<f64> {
        let masses = mu.masses();
        let nodes = mu.space().nodes();
        let integral = |g: &ScalarField| nodes.iter().zip(&masses).map(|(p, m)| m * g.eval(p)).sum::<f64>();
        let v = match self {
            MeasureFunctional::Integral(g) => integral(g),
            MeasureFunctional::Composite { fields, outer, .. } => {
                let args: Vec<f64> = fields.iter().map(integral).collect();
                outer(&args)
            }
            MeasureFunctional::Density { f, .. } => f(mu),
        };
        finite(v, self)
    }

    /// Change of `f(i_n(x))` when particle `i` moves to `to`.
    pub fn move_delta(&self, space: &Arc<Space>, points: &[Point], i: usize, to: &Point) -> Result<f64> {
        if let MeasureFunctional::Integral(g) = self {
            return Ok((g.eval(to) - g.eval(&points[i])) / points.len() as f64);
        }
        let mut moved = points.to_vec();
        moved[i] = *to;
        Ok(self.eval_points(space, &moved)? - self.eval_points(space, points)?)
    }
}

fn finite(v: f64, f: &MeasureFunctional) -> Result<f64> {
    if v.is_finite() {
        Ok(v)
    } else {
        Err(Error::UnevaluableFunctional(format!("{} evaluated to {v}", f.label())))
    }
}

/// A functional on the probability simplex of a finite space.
#[derive(Clone)]
pub struct FiniteFunctional {
    f: Outer,
    /// `g` when the functional is `mu -> sum_a g_a mu_a`.
    linear: Option<Vec<f64>>,
    label: String,
}

impl fmt::Debug for FiniteFunctional {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "FiniteFunctional({})", self.label)
    }
}

impl FiniteFunctional {
    pub fn new(label: impl Into<String>, f: impl Fn(&[f64]) -> f64 + Send + Sync + 'static) -> Self {
        FiniteFunctional { f: Arc::new(f), linear: None, label: label.into() }
    }

    pub fn linear(g: Vec<f64>) -> Self {
        let values = g.clone();
        FiniteFunctional {
            f: Arc::new(move |mu: &[f64]| mu.iter().zip(&values).map(|(m, g)| m * g).sum()),
            label: format!("linear {g:?}"),
            linear: Some(g),
        }
    }

    pub fn zero() -> Self {
        FiniteFunctional { f: Arc::new(|_: &[f64]| 0.0), linear: None, label: "0".into() }
    }

    pub fn label(&self) -> &str {
        &self.label
    }

    pub fn linear_part(&self) -> Option<&[f64]> {
        self.linear.as_deref()
    }

    pub fn eval(&self, mu: &[f64]) -> f64 {
        (self.f)(mu)
    }

    /// Gradient on the simplex: exact for linear functionals, central
    /// differences otherwise.
    pub fn gradient(&self, mu: &[f64]) -> Vec<f64> {
        if let Some(g) = &self.linear {
            return g.clone();
        }
        let h = 1e-6;
        let mut x = mu.to_vec();
        (0..mu.len())
            .map(|a| {
                let orig = x[a];
                x[a] = orig + h;
                let up = self.eval(&x);
                x[a] = orig - h;
                let down = self.eval(&x);
                x[a] = orig;
                (up - down) / (2.0 * h)
            })
            .collect()
    }
}
