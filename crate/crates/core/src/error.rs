use core::fmt;

use crate::prelude::*;

pub type Result<T, E = Error> = core::result::Result<T, E>;

#[derive(Debug, Clone, PartialEq)]
pub enum Error {
    /// A parameter is outside its admissible range.
    InvalidParameter(String),
    /// The requested space cannot be built (kind, resolution or basis order).
    InvalidSpace(String),
    /// A kernel was evaluated on the diagonal `x = y`.
    DiagonalSingularity,
    /// A test function uses basis modes beyond the truncation order.
    UnresolvedTestFunction {
        index: usize,
        order: usize,
    },
    /// Two objects live on different spaces.
    MismatchedSpaces,
    /// A density or probability vector violates its invariants.
    InvalidMeasure(String),
    /// Every entry of the potential is `+inf`.
    AllInfinite,
    EmptyPointList,
    /// A point does not lie on the space.
    OffSpacePoint {
        index: usize,
    },
    /// Fewer particles than the interaction arity.
    TooFewParticles {
        n: usize,
        arity: usize,
    },
    UnsupportedArity(usize),
    /// A stated hypothesis of a check does not hold.
    HypothesisViolated(String),
    /// The confining bound failed; only possible through a bug.
    BoundViolated {
        mass_outside: f64,
        bound: f64,
    },
    /// An integrability precondition fails on the grid.
    Integrability(String),
    /// A quadrature of a singular kernel diverges.
    DivergentIntegral(String),
    /// Mirror descent could not find a decreasing step.
    StepSizeFailure {
        iteration: usize,
    },
    /// Zero-temperature minimisation needs a strictly convex energy.
    NotStrictlyConvex,
    /// `log rho` is undefined because the density vanishes.
    DensityTouchesZero {
        node: usize,
    },
    EntropyInfinite,
    /// Every proposal landed where the energy is infinite.
    TrappedChain {
        steps: usize,
    },
    /// The cached chain energy drifted from the recomputed one.
    CacheIncoherent {
        cached: f64,
        recomputed: f64,
    },
    /// Exact enumeration would exceed the state-space cap.
    EnumerationCap {
        states: f64,
        cap: f64,
    },
    /// Two particles collided during a descent.
    Collision {
        i: usize,
        j: usize,
    },
    MacroInfimumUnavailable(String),
    /// A tempering rung produced too few effective samples.
    EssBelowFloor {
        rung: usize,
        ess: f64,
        floor: f64,
    },
    InfeasibleConstraint,
    UnevaluableFunctional(String),
}

impl fmt::Display for Error {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Error::InvalidParameter(msg) => write!(f, "invalid parameter: {msg}"),
            Error::InvalidSpace(msg) => write!(f, "invalid space: {msg}"),
            Error::DiagonalSingularity => write!(f, "kernel evaluated on the diagonal"),
            Error::UnresolvedTestFunction { index, order } => {
                write!(f, "test function uses basis index {index} beyond truncation order {order}")
            }
            Error::MismatchedSpaces => write!(f, "objects live on different spaces"),
            Error::InvalidMeasure(msg) => write!(f, "invalid measure: {msg}"),
            Error::AllInfinite => write!(f, "all potential values are +inf"),
            Error::EmptyPointList => write!(f, "empty point list"),
            Error::OffSpacePoint { index } => write!(f, "point {index} is not on the space"),
            Error::TooFewParticles { n, arity } => {
                write!(f, "{n} particles is fewer than the interaction arity {arity}")
            }
            Error::UnsupportedArity(k) => write!(f, "arity {k} is not supported here"),
            Error::HypothesisViolated(msg) => write!(f, "hypothesis violated: {msg}"),
            Error::BoundViolated { mass_outside, bound } => {
                write!(f, "mass outside {mass_outside} exceeds bound {bound}")
            }
            Error::Integrability(msg) => write!(f, "integrability check failed: {msg}"),
            Error::DivergentIntegral(msg) => write!(f, "divergent integral: {msg}"),
            Error::StepSizeFailure { iteration } => {
                write!(f, "no decreasing step found at iteration {iteration}")
            }
            Error::NotStrictlyConvex => {
                write!(f, "zero-temperature minimisation needs a strictly convex kernel")
            }
            Error::DensityTouchesZero { node } => write!(f, "density vanishes at node {node}"),
            Error::EntropyInfinite => write!(f, "relative entropy is infinite"),
            Error::TrappedChain { steps } => {
                write!(f, "chain trapped: {steps} consecutive proposals with infinite energy")
            }
            Error::CacheIncoherent { cached, recomputed } => {
                write!(f, "cached energy {cached} differs from recomputed {recomputed}")
            }
            Error::EnumerationCap { states, cap } => {
                write!(f, "{states:e} states exceed the enumeration cap {cap:e}")
            }
            Error::Collision { i, j } => write!(f, "particles {i} and {j} collided"),
            Error::MacroInfimumUnavailable(msg) => {
                write!(f, "macroscopic infimum unavailable: {msg}")
            }
            Error::EssBelowFloor { rung, ess, floor } => {
                write!(f, "rung {rung} has ESS {ess:.1} below the floor {floor}")
            }
            Error::InfeasibleConstraint => write!(f, "no grid measure satisfies the constraint"),
            Error::UnevaluableFunctional(msg) => write!(f, "functional not evaluable: {msg}"),
        }
    }
}

impl core::error::Error for Error {}
