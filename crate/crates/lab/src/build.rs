//! Turns a [`RunConfig`] into core objects.

use std::path::Path;
use std::sync::Arc;

use anyhow::{anyhow, bail, Context, Result};
use gibbs_core::energy::{BetaSchedule, Coupling, EnergyModel, Kernel};
use gibbs_core::finite::{FiniteKernel, FiniteModel};
use gibbs_core::functional::{FiniteFunctional, MeasureFunctional};
use gibbs_core::measures::FiniteSpace;
use gibbs_core::spaces::{BackgroundCharge, GreenModel};
use gibbs_core::{Space, SpaceKind, SpaceSpec};

use crate::cache;
use crate::config::{BetaConfig, FunctionalConfig, KernelConfig, RunConfig, SpaceConfig};
use crate::expr;

/// A configured model on either kind of space.
pub enum Model {
    Grid(EnergyModel),
    Finite(FiniteModel),
}

pub fn beta(cfg: &BetaConfig) -> Result<BetaSchedule> {
    Ok(match cfg {
        BetaConfig::Constant { value } => BetaSchedule::Constant(*value),
        BetaConfig::Proportional { value } => BetaSchedule::Proportional(*value),
        BetaConfig::Expr { expr: src, limit } => {
            let f = expr::sequence(src)?;
            BetaSchedule::Custom { label: src.clone(), f, limit: *limit }
        }
    })
}

pub fn space_spec(cfg: &SpaceConfig) -> Result<SpaceSpec> {
    Ok(match cfg {
        SpaceConfig::Circle { resolution, basis_order } => SpaceSpec::circle(*resolution, *basis_order),
        SpaceConfig::Torus { resolution, basis_order } => SpaceSpec::torus(*resolution, *basis_order),
        SpaceConfig::Sphere { resolution, basis_order } => SpaceSpec::sphere(*resolution, *basis_order),
        SpaceConfig::Interval { lo, hi, resolution, density } | SpaceConfig::Square { lo, hi, resolution, density } => {
            let mut spec = if matches!(cfg, SpaceConfig::Interval { .. }) {
                SpaceSpec::interval(*lo, *hi, *resolution)
            } else {
                SpaceSpec::square(*lo, *hi, *resolution)
            };
            if let Some(d) = density {
                let kind = spec.kind;
                spec = spec.with_density(expr::field(d, kind)?);
            }
            spec
        }
        SpaceConfig::Finite { .. } => bail!("finite spaces have no grid"),
    })
}

pub fn space(cfg: &RunConfig) -> Result<Arc<Space>> {
    let spec = space_spec(&cfg.space)?;
    cache::space(cfg.cache.as_deref().map(Path::new), spec).context("building the space")
}

pub fn finite_space(cfg: &SpaceConfig) -> Result<FiniteSpace> {
    match cfg {
        SpaceConfig::Finite { probs } => {
            let total: f64 = probs.iter().sum();
            Ok(FiniteSpace::new(probs.iter().map(|p| p / total).collect())?)
        }
        _ => bail!("not a finite space"),
    }
}

fn wrap(base: Kernel, space: &Space, potential: &Option<String>, cap: &Option<f64>) -> Result<Kernel> {
    let mut k = base;
    if let Some(v) = potential {
        k = Kernel::Confined { base: Box::new(k), potential: expr::field(v, space.kind())?, coupling: Coupling::Unit };
    }
    if let Some(c) = cap {
        k = Kernel::Truncated { base: Box::new(k), cap: *c };
    }
    Ok(k)
}

pub fn green(cfg: &RunConfig, space: &Arc<Space>, charge: &str, order: Option<usize>) -> Result<GreenModel> {
    let lambda = if charge == "uniform" {
        BackgroundCharge::uniform(space)
    } else {
        let f = expr::field(charge, space.kind())?;
        BackgroundCharge::from_field(space, charge, |p| f.eval(p))?
    };
    let order = order.unwrap_or(space.basis_order());
    cache::green(cfg.cache.as_deref().map(Path::new), space.clone(), lambda, order)
        .context("building the Green function")
}

pub fn kernel(cfg: &RunConfig, space: &Arc<Space>) -> Result<Kernel> {
    match &cfg.kernel {
        KernelConfig::Constant { value, arity } => Ok(Kernel::Constant { value: *value, arity: *arity }),
        KernelConfig::Zero => Ok(Kernel::Constant { value: 0.0, arity: 2 }),
        KernelConfig::LogChord { scale, potential, cap } => {
            wrap(Kernel::LogChord { scale: *scale }, space, potential, cap)
        }
        KernelConfig::Riesz { s, potential, cap } => wrap(Kernel::Riesz { s: *s }, space, potential, cap),
        KernelConfig::Green { charge, order, potential, cap } => {
            let g = green(cfg, space, charge, *order)?;
            wrap(Kernel::Green(Arc::new(g)), space, potential, cap)
        }
        KernelConfig::NormProduct { potential } => wrap(Kernel::NormProduct, space, potential, &None),
        KernelConfig::Expr { expr: src, lower_bound, smooth, potential, cap } => {
            let k = expr::pair_kernel(src, space.clone(), *lower_bound, *smooth)?;
            wrap(Kernel::Custom(k), space, potential, cap)
        }
        KernelConfig::Matrix { .. } => bail!("matrix kernels need a finite space"),
    }
}

pub fn finite_model(cfg: &RunConfig) -> Result<FiniteModel> {
    let space = finite_space(&cfg.space)?;
    let m = space.len();
    let b = beta(&cfg.beta)?;
    Ok(match &cfg.kernel {
        KernelConfig::Zero => FiniteModel::free(space, b),
        KernelConfig::Constant { value, arity } => {
            FiniteModel::new(space, FiniteKernel::Constant { value: *value, arity: *arity }, b)?
        }
        KernelConfig::Matrix { matrix } => {
            if matrix.len() != m || matrix.iter().any(|r| r.len() != m) {
                bail!("the kernel matrix must be {m} x {m}");
            }
            FiniteModel::new(space, FiniteKernel::Pair(matrix.concat()), b)?
        }
        k => bail!("kernel {k:?} is not available on finite spaces"),
    })
}

pub fn model(cfg: &RunConfig) -> Result<Model> {
    if cfg.space.is_finite() {
        return Ok(Model::Finite(finite_model(cfg)?));
    }
    let space = space(cfg)?;
    let kernel = kernel(cfg, &space)?;
    Ok(Model::Grid(EnergyModel::new(space, kernel, beta(&cfg.beta)?)))
}

pub fn measure_functional(cfg: &RunConfig, kind: SpaceKind) -> Result<Option<MeasureFunctional>> {
    match &cfg.functional {
        None => Ok(None),
        Some(FunctionalConfig::Integral { expr: src }) => {
            Ok(Some(MeasureFunctional::Integral(expr::field(src, kind)?)))
        }
        Some(f) => Err(anyhow!("functional {f:?} needs a finite space")),
    }
}

pub fn finite_functional(cfg: &RunConfig, atoms: usize) -> Result<FiniteFunctional> {
    match &cfg.functional {
        None => Ok(FiniteFunctional::zero()),
        Some(FunctionalConfig::Linear { weights }) => {
            if weights.len() != atoms {
                bail!("linear functional has {} weights for {atoms} atoms", weights.len());
            }
            Ok(FiniteFunctional::linear(weights.clone()))
        }
        Some(FunctionalConfig::Masses { expr: src }) => {
            let f = expr::finite_functional(src, atoms)?;
            Ok(FiniteFunctional::new(src.clone(), move |mu: &[f64]| f(mu)))
        }
        Some(f) => Err(anyhow!("functional {f:?} needs a grid space")),
    }
}
