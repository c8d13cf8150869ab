//! Run configuration: strict TOML with a documented schema (see
//! `CONFIG.md`). Unknown keys are errors, and every error carries a line
//! and column.

use std::fmt;
use std::path::Path;

use serde::{Deserialize, Serialize};

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RunConfig {
    pub seed: u64,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub threads: Option<usize>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub output: Option<String>,
    /// Directory for cached spectral tables.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub cache: Option<String>,
    pub space: SpaceConfig,
    pub kernel: KernelConfig,
    #[serde(default)]
    pub beta: BetaConfig,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub functional: Option<FunctionalConfig>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub green_check: Option<GreenCheckConfig>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub equilibrium: Option<EquilibriumConfig>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub sampler: Option<SamplerConfig>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub fekete: Option<FeketeConfig>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub ldp: Option<LdpConfig>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub rate_profile: Option<RateProfileConfig>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub conditional: Option<ConditionalConfig>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "kebab-case", deny_unknown_fields)]
pub enum SpaceConfig {
    Circle {
        resolution: usize,
        basis_order: usize,
    },
    Torus {
        resolution: usize,
        basis_order: usize,
    },
    Sphere {
        resolution: usize,
        basis_order: usize,
    },
    Interval {
        lo: f64,
        hi: f64,
        resolution: usize,
        #[serde(default, skip_serializing_if = "Option::is_none")]
        density: Option<String>,
    },
    Square {
        lo: f64,
        hi: f64,
        resolution: usize,
        #[serde(default, skip_serializing_if = "Option::is_none")]
        density: Option<String>,
    },
    /// Finite space with reference probabilities `probs` (normalized on load).
    Finite {
        probs: Vec<f64>,
    },
}

impl SpaceConfig {
    pub fn is_finite(&self) -> bool {
        matches!(self, SpaceConfig::Finite { .. })
    }
}

/// Pair kernels on continuous spaces accept an optional confining
/// `potential` (`G + V(x) + V(y)`) and a truncation `cap` (`min(G, cap)`).
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "kebab-case", deny_unknown_fields)]
pub enum KernelConfig {
    Constant {
        value: f64,
        #[serde(default = "two")]
        arity: usize,
    },
    LogChord {
        #[serde(default = "one")]
        scale: f64,
        #[serde(default, skip_serializing_if = "Option::is_none")]
        potential: Option<String>,
        #[serde(default, skip_serializing_if = "Option::is_none")]
        cap: Option<f64>,
    },
    Riesz {
        s: f64,
        #[serde(default, skip_serializing_if = "Option::is_none")]
        potential: Option<String>,
        #[serde(default, skip_serializing_if = "Option::is_none")]
        cap: Option<f64>,
    },
    Green {
        /// `"uniform"` or a density expression in coordinates.
        #[serde(default = "uniform")]
        charge: String,
        /// Truncation order; defaults to the basis order of the space.
        #[serde(default, skip_serializing_if = "Option::is_none")]
        order: Option<usize>,
        #[serde(default, skip_serializing_if = "Option::is_none")]
        potential: Option<String>,
        #[serde(default, skip_serializing_if = "Option::is_none")]
        cap: Option<f64>,
    },
    NormProduct {
        #[serde(default, skip_serializing_if = "Option::is_none")]
        potential: Option<String>,
    },
    /// Pair kernel given as an expression; see `expr::pair_kernel`.
    Expr {
        expr: String,
        #[serde(default, skip_serializing_if = "Option::is_none")]
        lower_bound: Option<f64>,
        #[serde(default = "yes")]
        smooth: bool,
        #[serde(default, skip_serializing_if = "Option::is_none")]
        potential: Option<String>,
        #[serde(default, skip_serializing_if = "Option::is_none")]
        cap: Option<f64>,
    },
    /// Symmetric pair matrix on a finite space.
    Matrix { matrix: Vec<Vec<f64>> },
    /// No interaction.
    Zero,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "kebab-case", deny_unknown_fields)]
pub enum BetaConfig {
    Constant {
        value: f64,
    },
    /// `beta_n = value * n`.
    Proportional {
        value: f64,
    },
    /// `beta_n` as an expression in `n` with the given limit.
    Expr {
        expr: String,
        limit: f64,
    },
}

impl Default for BetaConfig {
    fn default() -> Self {
        BetaConfig::Constant { value: 1.0 }
    }
}

/// The functional `f` of the Laplace principle and of Fekete problems.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "kebab-case", deny_unknown_fields)]
pub enum FunctionalConfig {
    /// `∫g dmu` with `g` a coordinate expression.
    Integral { expr: String },
    /// `sum_i weights_i mu_i` on finite spaces.
    Linear { weights: Vec<f64> },
    /// Expression in the masses `m0, m1, ...` on finite spaces.
    Masses { expr: String },
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct GreenCheckConfig {
    #[serde(default = "hundred")]
    pub trials: usize,
    #[serde(default = "micro")]
    pub threshold: f64,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct EquilibriumConfig {
    /// Inverse temperature of the free energy; `inf` for the energy alone.
    pub beta: f64,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub max_steps: Option<usize>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub tolerance: Option<f64>,
    /// Reference density (with respect to Lebesgue measure on boxes) to
    /// compare against in L1.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub overlay: Option<String>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub overlay_threshold: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub residual_threshold: Option<f64>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SamplerConfig {
    pub n: usize,
    pub steps: usize,
    #[serde(default = "half")]
    pub proposal_scale: f64,
    #[serde(default = "fifth")]
    pub burn_in: f64,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub thin: Option<usize>,
    #[serde(default = "yes")]
    pub tune: bool,
    /// Number of independent chains, seeded `seed, seed + 1, ...`.
    #[serde(default = "one_usize")]
    pub chains: usize,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub ladder: Option<LadderConfig>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct LadderConfig {
    pub levels: usize,
    pub ratio: f64,
    pub swap_every: usize,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct FeketeConfig {
    pub ns: Vec<usize>,
    #[serde(default = "four")]
    pub restarts: usize,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub max_iterations: Option<usize>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub gradient_tolerance: Option<f64>,
    #[serde(default = "yes")]
    pub polish: bool,
    /// Final-gap threshold of the infima table, written when `ns` has at
    /// least two entries.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub threshold: Option<f64>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct LdpConfig {
    pub ns: Vec<usize>,
    pub threshold: f64,
    /// Monte Carlo budget (manifolds only).
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub rungs: Option<usize>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub steps: Option<usize>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub min_ess: Option<f64>,
    /// Known limit, replacing `-inf {f + F}`.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub limit: Option<f64>,
    /// Coarse lattice of the simplex search (finite spaces).
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub divisions: Option<usize>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RateProfileConfig {
    /// `g` as a coordinate expression (grids) or `weights` (finite spaces);
    /// omit both for the unconstrained profile.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub g: Option<String>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub weights: Option<Vec<f64>>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub c: Option<f64>,
    /// Inverse temperature for grid models; defaults to the limit of the
    /// schedule.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub beta: Option<f64>,
    /// Known value of the profile; the run fails when the computed value is
    /// further than `tolerance` from it.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub expected: Option<f64>,
    #[serde(default = "micro")]
    pub tolerance: f64,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "mode", rename_all = "kebab-case", deny_unknown_fields)]
pub enum ConditionalConfig {
    /// One particle in a varying environment: `V_n` in coordinates and `n`,
    /// `lambda_n` in `n`, optional interaction field and functional.
    Particle {
        potential: String,
        limit_potential: String,
        #[serde(default = "zero_expr")]
        lambda: String,
        #[serde(default, skip_serializing_if = "Option::is_none")]
        interaction: Option<String>,
        #[serde(default = "zero_expr")]
        f: String,
        ns: Vec<usize>,
        threshold: f64,
    },
    /// Gas on the circle in the background of `n` equispaced charges
    /// interacting through `-scale log chord`.
    Environment {
        #[serde(default = "one")]
        scale: f64,
        ns: Vec<usize>,
        threshold: f64,
        #[serde(default = "eight")]
        rungs: usize,
        #[serde(default = "steps_default")]
        steps: usize,
    },
}

fn one() -> f64 {
    1.0
}
fn half() -> f64 {
    0.5
}
fn fifth() -> f64 {
    0.2
}
fn micro() -> f64 {
    1e-6
}
fn two() -> usize {
    2
}
fn four() -> usize {
    4
}
fn eight() -> usize {
    8
}
fn one_usize() -> usize {
    1
}
fn hundred() -> usize {
    100
}
fn steps_default() -> usize {
    40_000
}
fn yes() -> bool {
    true
}
fn uniform() -> String {
    "uniform".into()
}
fn zero_expr() -> String {
    "0".into()
}

/// Parse failure with a 1-based position.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct ConfigError {
    pub line: usize,
    pub column: usize,
    pub message: String,
}

impl fmt::Display for ConfigError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "line {}, column {}: {}", self.line, self.column, self.message)
    }
}

impl std::error::Error for ConfigError {}

impl RunConfig {
    pub fn parse(text: &str) -> Result<RunConfig, ConfigError> {
        toml::from_str(text).map_err(|e| {
            let offset = e.span().map_or(0, |s| s.start);
            let (line, column) = line_column(text, offset);
            ConfigError { line, column, message: e.message().trim().to_string() }
        })
    }

    pub fn load(path: &Path) -> anyhow::Result<RunConfig> {
        let text = std::fs::read_to_string(path).map_err(|e| anyhow::anyhow!("reading {}: {e}", path.display()))?;
        RunConfig::parse(&text).map_err(|e| anyhow::anyhow!("{}: {e}", path.display()))
    }

    pub fn to_toml(&self) -> String {
        toml::to_string(self).expect("configs always serialize")
    }
}

fn line_column(text: &str, offset: usize) -> (usize, usize) {
    let before = &text[..offset.min(text.len())];
    let line = before.matches('\n').count() + 1;
    let column = before.rsplit('\n').next().map_or(0, |l| l.chars().count()) + 1;
    (line, column)
}
