//! Symmetric interaction kernels.

use core::fmt;

use super::diagonal::{unit_cell_neg_log, unit_cell_riesz};
use super::{BetaSchedule, Order};
use crate::prelude::*;
use crate::spaces::{GreenModel, Point, ScalarField, Space, SpaceKind};

/// User-supplied kernel of any arity.
#[derive(Clone)]
pub struct CustomKernel {
    pub arity: usize,
    pub f: Arc<dyn Fn(&[Point]) -> f64 + Send + Sync>,
    /// Closed-form lower bound, when known.
    pub lower_bound: Option<f64>,
    /// Differentiable away from the diagonal.
    pub smooth: bool,
    pub label: String,
}

impl fmt::Debug for CustomKernel {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "CustomKernel({}, arity {})", self.label, self.arity)
    }
}

/// How a confining potential enters a pair kernel.
#[derive(Clone, Debug)]
pub enum Coupling {
    /// `G + V(x) + V(y)`.
    Unit,
    /// `G + b_n (V(x) + V(y))` with
    /// `b_n = (n - n xi / beta_n) / (n - 1)`; the limit coefficient is 1.
    Strong { xi: f64, epsilon: f64, beta: BetaSchedule },
}

impl Coupling {
    pub fn coefficient(&self, order: Order) -> f64 {
        match (self, order) {
            (Coupling::Unit, _) | (Coupling::Strong { .. }, Order::Limit) => 1.0,
            (Coupling::Strong { xi, beta, .. }, Order::Finite(n)) => strong_b(n, beta.at(n), *xi),
        }
    }
}

/// `b_n = (1/(n - 1)) (n - (n / beta_n) xi)`.
pub fn strong_b(n: usize, beta_n: f64, xi: f64) -> f64 {
    let nf = n as f64;
    (nf - nf / beta_n * xi) / (nf - 1.0)
}

/// `a_n = (b_n - epsilon) / (1 - epsilon)`, the weight of
/// `(V(x) + V(y))(1 - epsilon)` on top of `G + epsilon (V(x) + V(y))`.
pub fn strong_a(n: usize, beta_n: f64, xi: f64, epsilon: f64) -> f64 {
    (strong_b(n, beta_n, xi) - epsilon) / (1.0 - epsilon)
}

#[derive(Clone, Debug)]
pub enum Kernel {
    /// Constant interaction of the given arity.
    Constant {
        value: f64,
        arity: usize,
    },
    /// `-scale * log chord(x, y)`.
    LogChord {
        scale: f64,
    },
    /// `chord(x, y)^{-s}`, `s > 0`.
    Riesz {
        s: f64,
    },
    Green(Arc<GreenModel>),
    /// `|x| |y|` on boxes.
    NormProduct,
    Custom(CustomKernel),
    /// Pair kernel plus a confining potential.
    Confined {
        base: Box<Kernel>,
        potential: ScalarField,
        coupling: Coupling,
    },
    /// `min(G, cap)`.
    Truncated {
        base: Box<Kernel>,
        cap: f64,
    },
}

impl Kernel {
    pub fn arity(&self) -> usize {
        match self {
            Kernel::Constant { arity, .. } => *arity,
            Kernel::Custom(c) => c.arity,
            Kernel::Truncated { base, .. } => base.arity(),
            _ => 2,
        }
    }

    pub fn label(&self) -> String {
        match self {
            Kernel::Constant { value, arity } => format!("constant({value}, k={arity})"),
            Kernel::LogChord { scale } => format!("log-chord({scale})"),
            Kernel::Riesz { s } => format!("riesz({s})"),
            Kernel::Green(g) => format!("green({}, K={})", g.charge().label(), g.order()),
            Kernel::NormProduct => "norm-product".into(),
            Kernel::Custom(c) => c.label.clone(),
            Kernel::Confined { base, potential, .. } => format!("{} + V[{}]", base.label(), potential.label()),
            Kernel::Truncated { base, cap } => format!("min({}, {cap})", base.label()),
        }
    }

    /// Value on a tuple of `arity` points. Diagonal singularities evaluate
    /// to `+inf`.
    pub fn eval(&self, space: &Space, pts: &[Point], order: Order) -> f64 {
        match self {
            Kernel::Constant { value, .. } => *value,
            Kernel::Custom(c) => (c.f)(pts),
            Kernel::Truncated { base, cap } => base.eval(space, pts, order).min(*cap),
            _ => self.pair(space, &pts[0], &pts[1], order),
        }
    }

    /// Value of a pair kernel.
    pub fn pair(&self, space: &Space, x: &Point, y: &Point, order: Order) -> f64 {
        match self {
            Kernel::Constant { value, .. } => *value,
            Kernel::LogChord { scale } => {
                let c = space.chord(x, y);
                if c == 0.0 {
                    f64::INFINITY
                } else {
                    -scale * c.ln()
                }
            }
            Kernel::Riesz { s } => {
                let c = space.chord(x, y);
                if c == 0.0 {
                    f64::INFINITY
                } else {
                    c.powf(-s)
                }
            }
            Kernel::Green(g) => g.evaluate(x, y).unwrap_or(f64::INFINITY),
            Kernel::NormProduct => planar_norm(x) * planar_norm(y),
            Kernel::Custom(c) => (c.f)(&[*x, *y]),
            Kernel::Confined { base, potential, coupling } => {
                let g = base.pair(space, x, y, order);
                if g == f64::INFINITY {
                    return g;
                }
                g + coupling.coefficient(order) * (potential.eval(x) + potential.eval(y))
            }
            Kernel::Truncated { base, cap } => base.pair(space, x, y, order).min(*cap),
        }
    }

    /// Diagonal term used by grid quadratures at node `i`: the mean over the
    /// node's cell for singular kernels, the point value otherwise.
    pub fn self_value(&self, space: &Space, i: usize, order: Order) -> f64 {
        let x = &space.nodes()[i];
        let h = space.cell_sides()[i];
        let dim = match space.kind() {
            SpaceKind::Circle => 1,
            SpaceKind::Box { dim, .. } => dim,
            _ => 2,
        };
        match self {
            Kernel::Constant { value, .. } => *value,
            Kernel::LogChord { scale } => scale * (-h.ln() + unit_cell_neg_log(dim)),
            Kernel::Riesz { s } => h.powf(-s) * unit_cell_riesz(dim, *s),
            Kernel::Green(g) => g.evaluate_truncated(x, x),
            Kernel::NormProduct => planar_norm(x) * planar_norm(x),
            Kernel::Custom(c) => (c.f)(&[*x, *x]),
            Kernel::Confined { base, potential, coupling } => {
                base.self_value(space, i, order) + 2.0 * coupling.coefficient(order) * potential.eval(x)
            }
            Kernel::Truncated { base, cap } => base.self_value(space, i, order).min(*cap),
        }
    }

    /// Whether the kernel is infinite on the diagonal.
    pub fn is_singular(&self) -> bool {
        match self {
            Kernel::LogChord { .. } | Kernel::Riesz { .. } => true,
            Kernel::Confined { base, .. } => base.is_singular(),
            _ => false,
        }
    }

    /// Differentiable off the diagonal.
    pub fn is_smooth(&self) -> bool {
        match self {
            Kernel::Custom(c) => c.smooth,
            Kernel::Truncated { .. } => false,
            Kernel::Confined { base, .. } => base.is_smooth(),
            _ => true,
        }
    }

    /// Whether the macroscopic energy is convex on probability measures
    /// (positive definite on signed measures of mass zero).
    pub fn is_convex(&self) -> bool {
        match self {
            Kernel::LogChord { scale } => *scale > 0.0,
            Kernel::Riesz { s } => *s > 0.0,
            Kernel::Green(_) | Kernel::Constant { .. } => true,
            Kernel::Confined { base, .. } => base.is_convex(),
            _ => false,
        }
    }

    /// Closed-form lower bound, when one is available.
    pub fn lower_bound(&self, space: &Space) -> Option<f64> {
        match self {
            Kernel::Constant { value, .. } => Some(*value),
            Kernel::LogChord { scale } if *scale >= 0.0 => Some(-scale * max_chord(space).ln()),
            Kernel::Riesz { s } if *s > 0.0 => Some(max_chord(space).powf(-s)),
            Kernel::Green(g) => Some(g.lower_bound()),
            Kernel::NormProduct => Some(0.0),
            Kernel::Custom(c) => c.lower_bound,
            Kernel::Truncated { base, cap } => base.lower_bound(space).map(|b| b.min(*cap)),
            _ => None,
        }
    }

    /// Gradient in the first argument of a pair kernel, in the tangent
    /// coordinates of [`Space::retract`]. `None` means no analytic form.
    pub fn pair_gradient(&self, space: &Space, x: &Point, y: &Point) -> Option<[f64; 3]> {
        match self {
            Kernel::Constant { .. } => Some([0.0; 3]),
            Kernel::LogChord { scale } => {
                let g = space.log_chord_gradient(x, y);
                Some([-scale * g[0], -scale * g[1], -scale * g[2]])
            }
            Kernel::Riesz { s } => {
                let g = space.log_chord_gradient(x, y);
                let f = -s * space.chord(x, y).powf(-s);
                Some([f * g[0], f * g[1], f * g[2]])
            }
            _ => None,
        }
    }
}

fn planar_norm(p: &Point) -> f64 {
    (p.0[0] * p.0[0] + p.0[1] * p.0[1]).sqrt()
}

fn max_chord(space: &Space) -> f64 {
    match space.kind() {
        SpaceKind::Circle | SpaceKind::Sphere => 2.0,
        _ => space.diameter(),
    }
}
