//! Subcommands: each drives one core module, writes its result files and a
//! manifest, and reports pass or fail.

use std::path::{Path, PathBuf};
use std::sync::Arc;

use anyhow::{anyhow, bail, Context, Result};
use gibbs_core::energy::{EnergyModel, Environment, EnvironmentStream, Kernel};
use gibbs_core::equilibrium::{mirror_descent, FiniteFreeEnergy, FreeEnergyModel, MirrorOptions};
use gibbs_core::fekete::{
    fekete_finite, fekete_restart, infima_convergence_table_finite, macro_infimum, merge_restarts, FeketeOptions,
    InfimaRow, InfimaTable,
};
use gibbs_core::functional::MeasureFunctional;
use gibbs_core::ldp::{
    conditional_gas_verify, free_infimum, laplace_verify_finite, particle_environment_verify, rate_function_profile,
    rate_function_profile_finite, thermodynamic_integration, LaplaceVerdict, LinearConstraint, McBudget,
    ParticleEnvironment,
};
use gibbs_core::measures::GridMeasure;
use gibbs_core::rng::stream;
use gibbs_core::sampler::{mcmc_run, ChainOptions, ChainReport, GibbsTarget, TemperingLadder};
use gibbs_core::simplex::SimplexSearch;
use gibbs_core::spaces::TestFunction;
use gibbs_core::{Point, Space, SpaceKind};
use rand::Rng;
use rayon::prelude::*;
use serde::Serialize;

use crate::build::{self, Model};
use crate::config::{ConditionalConfig, KernelConfig, RunConfig};
use crate::expr;
use crate::output::{num, unix_now, OutputDir, RunManifest};

/// Environment variable overriding the output directory.
pub const ENV_OUTPUT: &str = "GIBBS_LAB_OUTPUT";
/// Environment variable overriding the worker count.
pub const ENV_THREADS: &str = "GIBBS_LAB_THREADS";

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Command {
    GreenCheck,
    Equilibrium,
    Sample,
    Fekete,
    LaplaceVerify,
    RateProfile,
    Conditional,
}

impl Command {
    pub fn name(&self) -> &'static str {
        match self {
            Command::GreenCheck => "green-check",
            Command::Equilibrium => "equilibrium",
            Command::Sample => "sample",
            Command::Fekete => "fekete",
            Command::LaplaceVerify => "laplace-verify",
            Command::RateProfile => "rate-profile",
            Command::Conditional => "conditional",
        }
    }
}

/// Command-line settings that take precedence over the environment and the
/// config file.
#[derive(Clone, Debug, Default)]
pub struct Overrides {
    pub output: Option<PathBuf>,
    pub threads: Option<usize>,
    /// Particle number for `fekete`, replacing the configured list.
    pub n: Option<usize>,
}

pub struct Outcome {
    pub passed: bool,
    /// Human-readable summary, one line each.
    pub lines: Vec<String>,
    pub manifest: RunManifest,
}

struct Report {
    passed: bool,
    lines: Vec<String>,
}

pub fn output_dir(cfg: &RunConfig, cmd: Command, ov: &Overrides) -> PathBuf {
    if let Some(p) = &ov.output {
        return p.clone();
    }
    if let Ok(p) = std::env::var(ENV_OUTPUT) {
        if !p.is_empty() {
            return PathBuf::from(p);
        }
    }
    match &cfg.output {
        Some(p) => PathBuf::from(p),
        None => PathBuf::from("out").join(cmd.name()),
    }
}

pub fn thread_count(cfg: &RunConfig, ov: &Overrides) -> Result<Option<usize>> {
    if ov.threads.is_some() {
        return Ok(ov.threads);
    }
    if let Ok(v) = std::env::var(ENV_THREADS) {
        if !v.is_empty() {
            return Ok(Some(v.parse().map_err(|_| anyhow!("{ENV_THREADS}={v} is not a thread count"))?));
        }
    }
    Ok(cfg.threads)
}

pub fn run(cmd: Command, config_path: &Path, ov: &Overrides) -> Result<Outcome> {
    let text = std::fs::read_to_string(config_path).with_context(|| format!("reading {}", config_path.display()))?;
    let cfg = RunConfig::parse(&text).map_err(|e| anyhow!("{}: {e}", config_path.display()))?;
    run_config(cmd, &cfg, &text, ov)
}

pub fn run_config(cmd: Command, cfg: &RunConfig, text: &str, ov: &Overrides) -> Result<Outcome> {
    let started = unix_now();
    let mut pool = rayon::ThreadPoolBuilder::new();
    if let Some(t) = thread_count(cfg, ov)? {
        if t == 0 {
            bail!("thread count must be positive");
        }
        pool = pool.num_threads(t);
    }
    let pool = pool.build()?;
    let mut out = OutputDir::create(&output_dir(cfg, cmd, ov))?;
    out.write_bytes("config.toml", cfg.to_toml().as_bytes())?;
    let report = pool.install(|| match cmd {
        Command::GreenCheck => green_check(cfg, &mut out),
        Command::Equilibrium => equilibrium(cfg, &mut out),
        Command::Sample => sample(cfg, &mut out),
        Command::Fekete => fekete(cfg, &mut out, ov),
        Command::LaplaceVerify => laplace(cfg, &mut out),
        Command::RateProfile => rate_profile(cfg, &mut out),
        Command::Conditional => conditional(cfg, &mut out),
    })?;
    let manifest = out.finish(cmd.name(), text, cfg.seed, started, report.passed)?;
    Ok(Outcome { passed: report.passed, lines: report.lines, manifest })
}

/// Point on the standard chart of its space: the unit circle, the unit
/// square, Lambert's cylindrical equal-area map `(azimuth, z)` for the
/// sphere, and the box itself.
pub fn chart(kind: SpaceKind, p: &Point) -> (f64, f64) {
    let [a, b, c] = p.0;
    match kind {
        SpaceKind::Circle => (a.cos(), a.sin()),
        SpaceKind::Torus => (a, b),
        SpaceKind::Sphere => (b.atan2(a).rem_euclid(std::f64::consts::TAU), c),
        SpaceKind::Box { .. } => (a, b),
    }
}

fn point_rows(space: &Space, points: &[Point]) -> Vec<Vec<String>> {
    points
        .iter()
        .enumerate()
        .map(|(i, p)| {
            let (cx, cy) = chart(space.kind(), p);
            vec![i.to_string(), num(p.0[0]), num(p.0[1]), num(p.0[2]), num(cx), num(cy)]
        })
        .collect()
}

const POINT_HEADER: [&str; 6] = ["index", "x", "y", "z", "chart_x", "chart_y"];

fn grid_model(cfg: &RunConfig) -> Result<EnergyModel> {
    match build::model(cfg)? {
        Model::Grid(m) => Ok(m),
        Model::Finite(_) => bail!("this command needs a grid space"),
    }
}

// ---------------------------------------------------------------- green-check

#[derive(Serialize)]
struct GreenSummary {
    space: String,
    charge: String,
    order: usize,
    trials: usize,
    max_residual: f64,
    threshold: f64,
    passed: bool,
}

fn green_check(cfg: &RunConfig, out: &mut OutputDir) -> Result<Report> {
    let KernelConfig::Green { charge, order, .. } = &cfg.kernel else {
        bail!("green-check needs kind = \"green\" in [kernel]");
    };
    let space = build::space(cfg)?;
    let g = build::green(cfg, &space, charge, *order)?;
    let check = cfg.green_check.clone().unwrap_or(crate::config::GreenCheckConfig { trials: 100, threshold: 1e-6 });
    let basis = space.basis().ok_or_else(|| anyhow!("green-check needs a manifold"))?;
    let resolved: Vec<usize> = (0..basis.len()).filter(|&k| basis.order_of(k) <= g.order()).collect();
    let mut rng = stream(cfg.seed, 0);
    let mut rows = Vec::with_capacity(check.trials);
    let mut worst: f64 = 0.0;
    for t in 0..check.trials {
        let node = rng.random_range(0..space.len());
        let k = resolved[rng.random_range(0..resolved.len())];
        let r = g.identity_residual(&TestFunction::basis_function(k), &space.nodes()[node])?;
        worst = worst.max(r);
        rows.push(vec![t.to_string(), node.to_string(), k.to_string(), num(r)]);
    }
    out.write_csv("residuals.csv", &["trial", "node", "basis_index", "residual"], &rows)?;
    let passed = worst < check.threshold;
    out.write_json(
        "summary.json",
        &GreenSummary {
            space: space.kind().name().into(),
            charge: charge.clone(),
            order: g.order(),
            trials: check.trials,
            max_residual: worst,
            threshold: check.threshold,
            passed,
        },
    )?;
    Ok(Report { passed, lines: vec![format!("max residual = {worst:.3e} (threshold {:e})", check.threshold)] })
}

// ---------------------------------------------------------------- equilibrium

#[derive(Serialize)]
struct EquilibriumSummary {
    beta: f64,
    free_energy: f64,
    stationarity: f64,
    optimality_gap: f64,
    iterations: usize,
    converged: bool,
    residual_resolved: Option<f64>,
    residual_total: Option<f64>,
    overlay: Option<String>,
    overlay_l1: Option<f64>,
    passed: bool,
}

fn equilibrium(cfg: &RunConfig, out: &mut OutputDir) -> Result<Report> {
    let eq = cfg.equilibrium.clone().ok_or_else(|| anyhow!("missing [equilibrium] section"))?;
    let defaults = MirrorOptions::default();
    let opts = MirrorOptions {
        max_steps: eq.max_steps.unwrap_or(defaults.max_steps),
        tolerance: eq.tolerance.unwrap_or(defaults.tolerance),
        initial_step: defaults.initial_step,
    };
    if cfg.space.is_finite() {
        let model = build::finite_model(cfg)?;
        let obj = FiniteFreeEnergy { model: &model };
        let res = mirror_descent(&obj, model.space().probs().to_vec(), &opts)?;
        let rows: Vec<Vec<String>> = res.point.iter().enumerate().map(|(i, m)| vec![i.to_string(), num(*m)]).collect();
        out.write_csv("masses.csv", &["atom", "mass"], &rows)?;
        write_trace(out, &res.trace)?;
        out.write_json(
            "summary.json",
            &EquilibriumSummary {
                beta: model.beta().limit(),
                free_energy: res.value,
                stationarity: res.stationarity,
                optimality_gap: res.frank_wolfe_gap,
                iterations: res.iterations,
                converged: res.converged,
                residual_resolved: None,
                residual_total: None,
                overlay: None,
                overlay_l1: None,
                passed: res.converged,
            },
        )?;
        return Ok(Report {
            passed: res.converged,
            lines: vec![format!("F = {:.10} after {} steps", res.value, res.iterations)],
        });
    }
    let energy = grid_model(cfg)?;
    let space = energy.space().clone();
    let mut model = FreeEnergyModel::new(energy, eq.beta)?;
    if let Some(MeasureFunctional::Integral(g)) = build::measure_functional(cfg, space.kind())? {
        model = model.with_linear_term(space.nodes().iter().map(|p| g.eval(p)).collect())?;
    }
    let res = model.minimize(&GridMeasure::uniform(space.clone()), &opts)?;
    let masses = res.measure.masses();
    let is_box = !space.kind().is_manifold();
    let dim = space.kind().dimension() as i32;
    // cell measure against which densities are reported
    let cell = |i: usize| if is_box { space.cell_sides()[i].powi(dim) } else { space.weights()[i] };
    let mut rows = Vec::with_capacity(space.len());
    for (i, p) in space.nodes().iter().enumerate() {
        let (cx, cy) = chart(space.kind(), p);
        rows.push(vec![
            i.to_string(),
            num(p.0[0]),
            num(p.0[1]),
            num(p.0[2]),
            num(cx),
            num(cy),
            num(masses[i]),
            num(masses[i] / cell(i)),
        ]);
    }
    out.write_csv("density.csv", &["node", "x", "y", "z", "chart_x", "chart_y", "mass", "density"], &rows)?;
    write_trace(out, &res.trace)?;
    let mut passed = res.converged;
    let mut lines = vec![format!(
        "F = {:.10}, stationarity {:.2e}, {} steps{}",
        res.free_energy,
        res.stationarity,
        res.iterations,
        if res.converged { "" } else { " (not converged)" }
    )];
    let overlay_l1 = match &eq.overlay {
        Some(src) => {
            let f = expr::field(src, space.kind())?;
            let l1: f64 = space.nodes().iter().enumerate().map(|(i, p)| (masses[i] - f.eval(p) * cell(i)).abs()).sum();
            lines.push(format!("L1 distance to `{src}` = {l1:.6}"));
            if let Some(t) = eq.overlay_threshold {
                passed &= l1 < t;
            }
            Some(l1)
        }
        None => None,
    };
    if let (Some(r), Some(t)) = (&res.residual, eq.residual_threshold) {
        lines.push(format!("mean-field residual (resolved) = {:.3e}", r.resolved));
        passed &= r.resolved < t;
    }
    out.write_json(
        "summary.json",
        &EquilibriumSummary {
            beta: eq.beta,
            free_energy: res.free_energy,
            stationarity: res.stationarity,
            optimality_gap: res.optimality_gap,
            iterations: res.iterations,
            converged: res.converged,
            residual_resolved: res.residual.as_ref().map(|r| r.resolved),
            residual_total: res.residual.as_ref().map(|r| r.total),
            overlay: eq.overlay.clone(),
            overlay_l1,
            passed,
        },
    )?;
    Ok(Report { passed, lines })
}

fn write_trace(out: &mut OutputDir, trace: &[f64]) -> Result<()> {
    let rows: Vec<Vec<String>> = trace.iter().enumerate().map(|(i, v)| vec![i.to_string(), num(*v)]).collect();
    out.write_csv("trace.csv", &["iteration", "free_energy"], &rows)?;
    Ok(())
}

// ---------------------------------------------------------------- sample

#[derive(Serialize)]
struct ChainSummary {
    seed: u64,
    n: usize,
    steps: usize,
    burn_in_steps: usize,
    thin: usize,
    multipliers: Vec<f64>,
    samples: usize,
    acceptance_rate: f64,
    proposal_scale: f64,
    energy_mean: f64,
    energy_stderr: f64,
    autocorrelation_time: f64,
    effective_sample_size: f64,
    swap_rates: Vec<f64>,
    warnings: Vec<String>,
}

impl ChainSummary {
    fn of<S>(r: &ChainReport<S>) -> Self {
        ChainSummary {
            seed: r.seed,
            n: r.n,
            steps: r.steps,
            burn_in_steps: r.burn_in_steps,
            thin: r.thin,
            multipliers: r.multipliers.clone(),
            samples: r.samples.len(),
            acceptance_rate: r.acceptance_rate,
            proposal_scale: r.proposal_scale,
            energy_mean: r.energy_mean,
            energy_stderr: r.energy_stderr,
            autocorrelation_time: r.autocorrelation_time,
            effective_sample_size: r.effective_sample_size,
            swap_rates: r.swap_rates.clone(),
            warnings: r.warnings.clone(),
        }
    }
}

#[derive(Serialize)]
struct SampleDiagnostics<'a> {
    config: &'a RunConfig,
    chains: Vec<ChainSummary>,
}

fn run_chains<T: GibbsTarget + Sync>(target: &T, cfg: &RunConfig) -> Result<Vec<ChainReport<T::State>>>
where
    T::State: Send,
{
    let s = cfg.sampler.clone().ok_or_else(|| anyhow!("missing [sampler] section"))?;
    if s.chains == 0 {
        bail!("at least one chain is needed");
    }
    (0..s.chains as u64)
        .into_par_iter()
        .map(|c| {
            let mut o = ChainOptions::new(s.n, s.steps, cfg.seed.wrapping_add(c));
            o.proposal_scale = s.proposal_scale;
            o.burn_in = s.burn_in;
            o.thin = s.thin;
            o.tune = s.tune;
            o.ladder = s.ladder.as_ref().map(|l| TemperingLadder {
                levels: l.levels,
                ratio: l.ratio,
                swap_every: l.swap_every,
            });
            Ok(mcmc_run(target, &o)?)
        })
        .collect()
}

fn sample(cfg: &RunConfig, out: &mut OutputDir) -> Result<Report> {
    let (summaries, header, rows) = match build::model(cfg)? {
        Model::Grid(m) => {
            let reports = run_chains(&m, cfg)?;
            let n = reports[0].n;
            let mut header = vec!["chain".to_string(), "step".into(), "energy".into()];
            for i in 0..n {
                header.extend([format!("x{i}"), format!("y{i}"), format!("z{i}")]);
            }
            let mut rows = Vec::new();
            for (c, r) in reports.iter().enumerate() {
                for s in &r.samples {
                    let mut row = vec![c.to_string(), s.step.to_string(), num(s.energy)];
                    for p in &s.config {
                        row.extend(p.0.iter().map(|v| num(*v)));
                    }
                    rows.push(row);
                }
            }
            (reports.iter().map(ChainSummary::of).collect::<Vec<_>>(), header, rows)
        }
        Model::Finite(m) => {
            let reports = run_chains(&m, cfg)?;
            let n = reports[0].n;
            let mut header = vec!["chain".to_string(), "step".into(), "energy".into()];
            header.extend((0..n).map(|i| format!("a{i}")));
            let mut rows = Vec::new();
            for (c, r) in reports.iter().enumerate() {
                for s in &r.samples {
                    let mut row = vec![c.to_string(), s.step.to_string(), num(s.energy)];
                    row.extend(s.config.iter().map(|a| a.to_string()));
                    rows.push(row);
                }
            }
            (reports.iter().map(ChainSummary::of).collect(), header, rows)
        }
    };
    let h: Vec<&str> = header.iter().map(String::as_str).collect();
    out.write_csv("samples.csv", &h, &rows)?;
    let passed = summaries.iter().all(|s| s.warnings.is_empty());
    let lines = summaries
        .iter()
        .map(|s| {
            format!(
                "seed {}: acceptance {:.3}, E[W_n] = {:.6} ± {:.6}, tau = {:.2}, ESS = {:.1}",
                s.seed,
                s.acceptance_rate,
                s.energy_mean,
                s.energy_stderr,
                s.autocorrelation_time,
                s.effective_sample_size
            )
        })
        .chain(summaries.iter().flat_map(|s| s.warnings.iter().map(|w| format!("warning: {w}"))))
        .collect();
    out.write_json("diagnostics.json", &SampleDiagnostics { config: cfg, chains: summaries })?;
    Ok(Report { passed, lines })
}

// ---------------------------------------------------------------- fekete

#[derive(Serialize)]
struct TableJson {
    ns: Vec<usize>,
    inf_n: Vec<f64>,
    inf_macro: f64,
    gaps: Vec<f64>,
    slope: f64,
    final_gap: f64,
    threshold: f64,
    passed: bool,
}

fn write_table(out: &mut OutputDir, t: &InfimaTable) -> Result<()> {
    let rows: Vec<Vec<String>> =
        t.rows.iter().map(|r| vec![r.n.to_string(), num(r.inf_n), num(r.inf_macro), num(r.gap)]).collect();
    out.write_csv("table.csv", &["n", "inf_n", "inf_macro", "gap"], &rows)?;
    out.write_json(
        "table.json",
        &TableJson {
            ns: t.rows.iter().map(|r| r.n).collect(),
            inf_n: t.rows.iter().map(|r| r.inf_n).collect(),
            inf_macro: t.rows.first().map_or(f64::NAN, |r| r.inf_macro),
            gaps: t.gaps(),
            slope: t.slope,
            final_gap: t.final_gap,
            threshold: t.threshold,
            passed: t.passed,
        },
    )?;
    Ok(())
}

fn fekete(cfg: &RunConfig, out: &mut OutputDir, ov: &Overrides) -> Result<Report> {
    let fc = cfg.fekete.clone().ok_or_else(|| anyhow!("missing [fekete] section"))?;
    let ns = match ov.n {
        Some(n) => vec![n],
        None => fc.ns.clone(),
    };
    if ns.is_empty() {
        bail!("no particle numbers given");
    }
    let mut lines = Vec::new();
    let mut passed = true;
    match build::model(cfg)? {
        Model::Finite(model) => {
            let f = build::finite_functional(cfg, model.m())?;
            let f = cfg.functional.as_ref().map(|_| &f);
            let results: Vec<_> = ns.par_iter().map(|&n| fekete_finite(&model, n, f)).collect::<Result<_, _>>()?;
            let mut rows = Vec::new();
            for (n, r) in ns.iter().zip(&results) {
                lines.push(format!("n = {n}: inf W_n = {:.7}", r.value));
                let counts: Vec<String> = r.counts.iter().map(|c| c.to_string()).collect();
                rows.push(vec![n.to_string(), num(r.value), counts.join(" ")]);
            }
            out.write_csv("fekete.csv", &["n", "value", "counts"], &rows)?;
            if let (Some(t), true) = (fc.threshold, ns.len() >= 2) {
                let table = infima_convergence_table_finite(&model, f, &ns, &SimplexSearch::default(), t)?;
                write_table(out, &table)?;
                lines.push(format!("final gap {:.3e}, slope {:.3e}", table.final_gap, table.slope));
                passed = table.passed;
            }
        }
        Model::Grid(model) => {
            let f = build::measure_functional(cfg, model.space().kind())?;
            let defaults = FeketeOptions::default();
            let opts = FeketeOptions {
                restarts: fc.restarts,
                seed: cfg.seed,
                max_iterations: fc.max_iterations.unwrap_or(defaults.max_iterations),
                gradient_tolerance: fc.gradient_tolerance.unwrap_or(defaults.gradient_tolerance),
                polish: fc.polish,
            };
            if opts.restarts == 0 {
                bail!("at least one restart is needed");
            }
            let results: Vec<_> = ns
                .par_iter()
                .map(|&n| {
                    let outcomes = (0..opts.restarts)
                        .into_par_iter()
                        .map(|r| fekete_restart(&model, n, f.as_ref(), &opts, r).map_err(|e| (r, e)))
                        .collect();
                    merge_restarts(&model, outcomes)
                })
                .collect::<Result<_, _>>()?;
            let mut rows = Vec::new();
            for (n, r) in ns.iter().zip(&results) {
                lines.push(format!("n = {n}: inf W_n = {:.7}", r.value));
                out.write_csv(&format!("config_n{n}.csv"), &POINT_HEADER, &point_rows(model.space(), &r.best))?;
                rows.push(vec![
                    n.to_string(),
                    num(r.value),
                    num(r.energy),
                    r.gradient_norm.map_or(String::new(), num),
                    format!("{:?}", r.method),
                    r.restarts.to_string(),
                    r.collisions.len().to_string(),
                ]);
            }
            out.write_csv(
                "fekete.csv",
                &["n", "value", "energy", "gradient_norm", "method", "restarts", "collisions"],
                &rows,
            )?;
            if let (Some(t), true) = (fc.threshold, ns.len() >= 2) {
                let (inf_macro, _) = macro_infimum(&model, f.as_ref())?;
                let rows = ns
                    .iter()
                    .zip(&results)
                    .map(|(n, r)| InfimaRow { n: *n, inf_n: r.value, inf_macro, gap: (r.value - inf_macro).abs() })
                    .collect();
                let table = InfimaTable::from_rows(rows, t);
                write_table(out, &table)?;
                lines.push(format!(
                    "inf W = {inf_macro:.7}; final gap {:.3e}, slope {:.3e}",
                    table.final_gap, table.slope
                ));
                passed = table.passed;
            }
        }
    }
    Ok(Report { passed, lines })
}

// ---------------------------------------------------------------- laplace

#[derive(Serialize)]
struct VerdictJson<'a> {
    mode: &'a str,
    ns: &'a [usize],
    values: &'a [f64],
    errors: &'a [f64],
    limit: f64,
    gaps: &'a [f64],
    slope: f64,
    final_gap: f64,
    threshold: f64,
    passed: bool,
}

fn write_verdict(out: &mut OutputDir, mode: &str, v: &LaplaceVerdict) -> Result<Vec<String>> {
    let rows: Vec<Vec<String>> = (0..v.ns.len())
        .map(|i| vec![v.ns[i].to_string(), num(v.values[i]), num(v.errors[i]), num(v.gaps[i])])
        .collect();
    out.write_csv("verdict.csv", &["n", "L_n", "error", "gap"], &rows)?;
    out.write_json(
        "verdict.json",
        &VerdictJson {
            mode,
            ns: &v.ns,
            values: &v.values,
            errors: &v.errors,
            limit: v.limit,
            gaps: &v.gaps,
            slope: v.slope,
            final_gap: v.final_gap,
            threshold: v.threshold,
            passed: v.passed,
        },
    )?;
    Ok(vec![
        // + 0.0 turns a negative zero positive
        format!("limit = {:.7}", v.limit + 0.0),
        format!("final gap = {:.3e} (threshold {}), slope = {:.3e}", v.final_gap, v.threshold, v.slope),
    ])
}

fn budget(cfg: &RunConfig) -> McBudget {
    let d = McBudget::default();
    let l = cfg.ldp.as_ref();
    McBudget {
        rungs: l.and_then(|l| l.rungs).unwrap_or(d.rungs),
        steps: l.and_then(|l| l.steps).unwrap_or(d.steps),
        seed: cfg.seed,
        min_ess: l.and_then(|l| l.min_ess).unwrap_or(d.min_ess),
    }
}

fn laplace(cfg: &RunConfig, out: &mut OutputDir) -> Result<Report> {
    let l = cfg.ldp.clone().ok_or_else(|| anyhow!("missing [ldp] section"))?;
    let (mode, verdict) = match build::model(cfg)? {
        Model::Finite(model) => {
            let f = build::finite_functional(cfg, model.m())?;
            let mut search = SimplexSearch::default();
            if let Some(d) = l.divisions {
                search.divisions = d;
            }
            let mut v = laplace_verify_finite(&model, &f, &l.ns, &search, l.threshold)?;
            if let Some(limit) = l.limit {
                v = LaplaceVerdict::from_values(v.ns, v.values, v.errors, limit, l.threshold);
            }
            ("exact", v)
        }
        Model::Grid(model) => {
            let f = build::measure_functional(cfg, model.space().kind())?;
            let limit = match l.limit {
                Some(x) => x,
                None => -free_infimum(&model, f.as_ref())?,
            };
            let b = budget(cfg);
            let est: Vec<(f64, f64)> =
                l.ns.par_iter()
                    .map(|&n| thermodynamic_integration(&model, f.as_ref(), n, &b))
                    .collect::<Result<_, _>>()?;
            let (values, errors) = est.into_iter().unzip();
            ("monte-carlo", LaplaceVerdict::from_values(l.ns.clone(), values, errors, limit, l.threshold))
        }
    };
    let lines = write_verdict(out, mode, &verdict)?;
    Ok(Report { passed: verdict.passed, lines })
}

// ---------------------------------------------------------------- rate-profile

#[derive(Serialize)]
struct ProfileJson {
    value: f64,
    inf_free_energy: f64,
    constraint_value: f64,
    c: Option<f64>,
    expected: Option<f64>,
}

fn rate_profile(cfg: &RunConfig, out: &mut OutputDir) -> Result<Report> {
    let rp = cfg.rate_profile.clone().ok_or_else(|| anyhow!("missing [rate_profile] section"))?;
    let (profile, labels) = match build::model(cfg)? {
        Model::Finite(model) => {
            if rp.g.is_some() {
                bail!("use `weights` for constraints on finite spaces");
            }
            let c = constraint(rp.weights.clone(), rp.c, model.m())?;
            let p = rate_function_profile_finite(&model, c.as_ref())?;
            (p, (0..model.m()).map(|i| vec![i.to_string()]).collect::<Vec<_>>())
        }
        Model::Grid(energy) => {
            if rp.weights.is_some() {
                bail!("use `g` for constraints on grid spaces");
            }
            let space = energy.space().clone();
            let g = match &rp.g {
                Some(src) => {
                    let f = expr::field(src, space.kind())?;
                    Some(space.nodes().iter().map(|p| f.eval(p)).collect())
                }
                None => None,
            };
            let c = constraint(g, rp.c, space.len())?;
            let beta = rp.beta.unwrap_or(energy.beta().limit());
            let model = FreeEnergyModel::new(energy, beta)?;
            let p = rate_function_profile(&model, c.as_ref())?;
            let labels = space
                .nodes()
                .iter()
                .enumerate()
                .map(|(i, q)| vec![i.to_string(), num(q.0[0]), num(q.0[1]), num(q.0[2])])
                .collect();
            (p, labels)
        }
    };
    let finite = cfg.space.is_finite();
    let header: &[&str] =
        if finite { &["atom", "witness", "equilibrium"] } else { &["node", "x", "y", "z", "witness", "equilibrium"] };
    let rows: Vec<Vec<String>> = labels
        .into_iter()
        .enumerate()
        .map(|(i, mut r)| {
            r.push(num(profile.witness[i]));
            r.push(num(profile.equilibrium[i]));
            r
        })
        .collect();
    out.write_csv("witness.csv", header, &rows)?;
    out.write_json(
        "profile.json",
        &ProfileJson {
            value: profile.value,
            inf_free_energy: profile.inf_free_energy,
            constraint_value: profile.constraint_value,
            c: rp.c,
            expected: rp.expected,
        },
    )?;
    let mut lines =
        vec![format!("inf I over the set = {:.8} (∫g d witness = {:.6})", profile.value, profile.constraint_value)];
    let mut passed = profile.value.is_finite();
    if let Some(e) = rp.expected {
        let err = (profile.value - e).abs();
        lines.push(format!("expected {e}, off by {err:.3e} (tolerance {:e})", rp.tolerance));
        passed &= err <= rp.tolerance;
    }
    Ok(Report { passed, lines })
}

fn constraint(g: Option<Vec<f64>>, c: Option<f64>, len: usize) -> Result<Option<LinearConstraint>> {
    match (g, c) {
        (None, None) => Ok(None),
        (Some(g), Some(c)) => {
            if g.len() != len {
                bail!("constraint has {} values for {len} atoms", g.len());
            }
            Ok(Some(LinearConstraint { g, c }))
        }
        _ => bail!("a constraint needs both g (or weights) and c"),
    }
}

// ---------------------------------------------------------------- conditional

fn conditional(cfg: &RunConfig, out: &mut OutputDir) -> Result<Report> {
    let cc = cfg.conditional.clone().ok_or_else(|| anyhow!("missing [conditional] section"))?;
    match cc {
        ConditionalConfig::Particle { potential, limit_potential, lambda, interaction, f, ns, threshold } => {
            let space = build::space(cfg)?;
            let kind = space.kind();
            let env = ParticleEnvironment {
                space: space.clone(),
                potential: expr::field_in_n(&potential, kind)?,
                limit_potential: expr::field(&limit_potential, kind)?,
                interaction: interaction.map(|s| expr::field(&s, kind)).transpose()?,
                lambda: expr::sequence(&lambda)?,
                beta: build::beta(&cfg.beta)?,
            };
            let f = expr::field(&f, kind)?;
            let check = particle_environment_verify(&env, &f, &ns, threshold)?;
            let mut lines = write_verdict(out, "particle", &check.verdict)?;
            out.write_csv("witness.csv", &POINT_HEADER, &point_rows(&space, &[check.witness, check.minimizer]))?;
            lines.push(format!("witness {:?}, minimizer of f + V {:?}", check.witness.0, check.minimizer.0));
            Ok(Report { passed: check.verdict.passed, lines })
        }
        ConditionalConfig::Environment { scale, ns, threshold, rungs, steps } => {
            let base = grid_model(cfg)?;
            let space = base.space().clone();
            if space.kind() != SpaceKind::Circle {
                bail!("environment mode uses equispaced charges on the circle");
            }
            let env = Environment {
                kernel: Kernel::LogChord { scale },
                stream: EnvironmentStream::Points {
                    label: "equispaced".into(),
                    points: Arc::new(|n| {
                        (0..n).map(|k| Point::angle(std::f64::consts::TAU * (k as f64 + 0.5) / n as f64)).collect()
                    }),
                    limit: GridMeasure::uniform(space.clone()),
                },
            };
            let model = base.with_environment(env)?;
            let f = build::measure_functional(cfg, space.kind())?;
            let b = McBudget { rungs, steps, seed: cfg.seed, ..McBudget::default() };
            let v = conditional_gas_verify(&model, f.as_ref(), &ns, &b, threshold)?;
            let lines = write_verdict(out, "environment", &v)?;
            Ok(Report { passed: v.passed, lines })
        }
    }
}
