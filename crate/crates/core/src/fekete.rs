//! Zero-temperature problem: minimizers of `W_n + f(i_n)` (Fekete-type
//! configurations) and the convergence of their values to `inf {W + f}`.

use core::cmp::Ordering;

use crate::energy::{EnergyModel, Kernel};
use crate::equilibrium::{FreeEnergyModel, MirrorOptions};
use crate::finite::{for_each_type, FiniteModel};
use crate::functional::{FiniteFunctional, MeasureFunctional};
use crate::math::least_squares_slope;
use crate::measures::GridMeasure;
use crate::prelude::*;
use crate::rng::{stream, StreamRng};
use crate::simplex::{minimize, SimplexSearch};
use crate::spaces::{Point, Space, SpaceKind};
use crate::{Error, Result};

/// Pair distance below which a configuration counts as collided.
pub const COLLISION_DISTANCE: f64 = 1e-12;

#[derive(Clone, Debug, PartialEq)]
pub struct FeketeOptions {
    pub restarts: usize,
    pub seed: u64,
    pub max_iterations: usize,
    /// Stop once the root-mean-square gradient falls below this value.
    pub gradient_tolerance: f64,
    /// Relocate single particles to their best grid node and descend again.
    pub polish: bool,
}

impl Default for FeketeOptions {
    fn default() -> Self {
        FeketeOptions { restarts: 4, seed: 0, max_iterations: 20_000, gradient_tolerance: 1e-11, polish: true }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum SearchMethod {
    Gradient,
    PatternSearch,
}

/// Outcome of one restart.
#[derive(Clone, Debug, PartialEq)]
pub struct RestartOutcome {
    pub restart: usize,
    pub config: Vec<Point>,
    pub value: f64,
    pub gradient_norm: Option<f64>,
    /// Objective after every accepted move.
    pub trace: Vec<f64>,
}

#[derive(Clone, Debug, PartialEq)]
pub struct FeketeResult {
    /// Best configuration, sorted by coordinates.
    pub best: Vec<Point>,
    /// `W_n + f(i_n)` at `best`.
    pub value: f64,
    /// `W_n` at `best`.
    pub energy: f64,
    pub restarts: usize,
    /// Final value per restart; `+inf` for restarts that collided.
    pub finals: Vec<f64>,
    /// Root-mean-square Riemannian gradient at `best` (smooth kernels).
    pub gradient_norm: Option<f64>,
    pub method: SearchMethod,
    /// `(restart, i, j)` for restarts abandoned after a collision.
    pub collisions: Vec<(usize, usize, usize)>,
    pub trace: Vec<f64>,
}

struct Objective<'a> {
    model: &'a EnergyModel,
    f: Option<&'a MeasureFunctional>,
    space: &'a Arc<Space>,
}

impl Objective<'_> {
    fn value(&self, x: &[Point]) -> Result<f64> {
        let w = self.model.w_n(x)?;
        if w == f64::INFINITY {
            return Ok(w);
        }
        Ok(w + match self.f {
            Some(f) => f.eval_points(self.space, x)?,
            None => 0.0,
        })
    }

    fn delta(&self, x: &[Point], i: usize, to: &Point) -> Result<f64> {
        let new = self.model.particle_energy(x, i, to);
        if new == f64::INFINITY {
            return Ok(new);
        }
        let mut d = new - self.model.particle_energy(x, i, &x[i]);
        if let Some(f) = self.f {
            d += f.move_delta(self.space, x, i, to)?;
        }
        Ok(d)
    }

    fn analytic(&self) -> bool {
        self.model.environment().is_none()
            && self.model.arity() == 2
            && !matches!(self.model.kernel(), Kernel::Confined { .. } | Kernel::Truncated { .. })
            && self.model.kernel().pair_gradient(self.space, &self.space.nodes()[0], &self.space.nodes()[1]).is_some()
    }

    /// Riemannian gradient of the objective in each particle.
    fn gradient(&self, x: &[Point]) -> Result<Vec<[f64; 3]>> {
        let n = x.len();
        let analytic = self.analytic();
        let mut out = vec![[0.0; 3]; n];
        let scale = 1.0 / (n * n) as f64;
        for i in 0..n {
            if analytic {
                for j in 0..n {
                    if j != i {
                        let g = self.model.kernel().pair_gradient(self.space, &x[i], &x[j]).unwrap_or([0.0; 3]);
                        for d in 0..3 {
                            out[i][d] += scale * g[d];
                        }
                    }
                }
            }
            let dirs = directions(self.space, &x[i]);
            let mut numeric = [0.0; 3];
            let h = 1e-6;
            for (k, dir) in dirs.iter().enumerate() {
                let Some(dir) = dir else { continue };
                let plus = self.space.retract(&x[i], [h * dir[0], h * dir[1], h * dir[2]]);
                let minus = self.space.retract(&x[i], [-h * dir[0], -h * dir[1], -h * dir[2]]);
                let (dp, dm) = if analytic {
                    match self.f {
                        Some(f) => (f.move_delta(self.space, x, i, &plus)?, f.move_delta(self.space, x, i, &minus)?),
                        None => (0.0, 0.0),
                    }
                } else {
                    (self.delta(x, i, &plus)?, self.delta(x, i, &minus)?)
                };
                numeric[k] = (dp - dm) / (2.0 * h);
            }
            let numeric = self.space.project_tangent(&x[i], numeric);
            for d in 0..3 {
                out[i][d] += numeric[d];
            }
        }
        Ok(out)
    }
}

/// Tangent directions along which partial derivatives are taken; on the
/// sphere these are the projected ambient axes, so the partials are the
/// ambient components of the tangent gradient.
fn directions(space: &Space, p: &Point) -> [Option<[f64; 3]>; 3] {
    let axis = |k: usize| {
        let mut e = [0.0; 3];
        e[k] = 1.0;
        e
    };
    match space.kind() {
        SpaceKind::Circle => [Some(axis(0)), None, None],
        SpaceKind::Torus => [Some(axis(0)), Some(axis(1)), None],
        SpaceKind::Box { dim, .. } => [Some(axis(0)), if dim == 2 { Some(axis(1)) } else { None }, None],
        SpaceKind::Sphere => [
            Some(space.project_tangent(p, axis(0))),
            Some(space.project_tangent(p, axis(1))),
            Some(space.project_tangent(p, axis(2))),
        ],
    }
}

fn rms(g: &[[f64; 3]]) -> f64 {
    (g.iter().map(|v| v[0] * v[0] + v[1] * v[1] + v[2] * v[2]).sum::<f64>() / g.len() as f64).sqrt()
}

fn find_collision(space: &Space, x: &[Point]) -> Option<(usize, usize)> {
    for i in 0..x.len() {
        for j in 0..i {
            if space.geodesic(&x[i], &x[j]) < COLLISION_DISTANCE {
                return Some((j, i));
            }
        }
    }
    None
}

/// Sorts points lexicographically by coordinates.
pub fn canonicalize(points: &mut [Point]) {
    points.sort_by(|a, b| {
        for d in 0..3 {
            match a.0[d].total_cmp(&b.0[d]) {
                Ordering::Equal => continue,
                o => return o,
            }
        }
        Ordering::Equal
    });
}

fn initial(obj: &Objective<'_>, n: usize, rng: &mut StreamRng) -> Result<(Vec<Point>, f64)> {
    for _ in 0..1000 {
        let x: Vec<Point> = (0..n).map(|_| obj.space.sample_reference(rng)).collect();
        if find_collision(obj.space, &x).is_some() {
            continue;
        }
        let v = obj.value(&x)?;
        if v < f64::INFINITY {
            return Ok((x, v));
        }
    }
    Err(Error::TrappedChain { steps: 0 })
}

/// Riemannian gradient descent with Barzilai-Borwein steps and Armijo
/// backtracking.
fn descend(
    obj: &Objective<'_>,
    x: &mut Vec<Point>,
    value: &mut f64,
    trace: &mut Vec<f64>,
    opts: &FeketeOptions,
) -> Result<f64> {
    let mut g = obj.gradient(x)?;
    let mut step = 0.1 * obj.space.diameter() / (rms(&g) * (x.len() as f64).sqrt()).max(1e-300);
    let mut stalled = 0;
    for _ in 0..opts.max_iterations {
        let gn = rms(&g);
        if gn < opts.gradient_tolerance {
            break;
        }
        let g2: f64 = g.iter().map(|v| v[0] * v[0] + v[1] * v[1] + v[2] * v[2]).sum();
        let mut t = step;
        let mut moved = None;
        while t > 1e-20 {
            let cand: Vec<Point> =
                x.iter().zip(&g).map(|(p, v)| obj.space.retract(p, [-t * v[0], -t * v[1], -t * v[2]])).collect();
            let v = obj.value(&cand)?;
            if v <= *value - 1e-4 * t * g2 && v < f64::INFINITY {
                moved = Some((cand, v));
                break;
            }
            t *= 0.5;
        }
        let Some((cand, v)) = moved else { break };
        if let Some((i, j)) = find_collision(obj.space, &cand) {
            return Err(Error::Collision { i, j });
        }
        let decrease = *value - v;
        *x = cand;
        *value = v;
        trace.push(v);
        let g_new = obj.gradient(x)?;
        let mut sy = 0.0;
        let mut ss = 0.0;
        for (a, b) in g_new.iter().zip(&g) {
            for d in 0..3 {
                let s = -t * b[d];
                sy += s * (a[d] - b[d]);
                ss += s * s;
            }
        }
        step = if sy > 0.0 { (ss / sy).min(1e6 * t) } else { 2.0 * t };
        g = g_new;
        stalled = if decrease <= 1e-16 * value.abs().max(1e-300) { stalled + 1 } else { 0 };
        if stalled >= 20 {
            break;
        }
    }
    Ok(rms(&g))
}

/// Coordinate-wise pattern search over tangent directions.
fn pattern_search(
    obj: &Objective<'_>,
    x: &mut [Point],
    value: &mut f64,
    trace: &mut Vec<f64>,
    opts: &FeketeOptions,
) -> Result<()> {
    let mut s = 0.1 * obj.space.diameter();
    let mut sweeps = 0;
    while s > 1e-10 && sweeps < opts.max_iterations {
        sweeps += 1;
        let mut improved = false;
        for i in 0..x.len() {
            for dir in directions(obj.space, &x[i]).into_iter().flatten() {
                for sign in [1.0, -1.0] {
                    let to = obj.space.retract(&x[i], [sign * s * dir[0], sign * s * dir[1], sign * s * dir[2]]);
                    let d = obj.delta(x, i, &to)?;
                    if d < 0.0 {
                        x[i] = to;
                        *value += d;
                        trace.push(*value);
                        improved = true;
                    }
                }
            }
        }
        if !improved {
            s *= 0.5;
        }
    }
    // refresh the accumulated value
    *value = obj.value(x)?;
    Ok(())
}

/// Moves each particle to its best grid node when that lowers the objective.
fn polish(obj: &Objective<'_>, x: &mut [Point], value: &mut f64, trace: &mut Vec<f64>) -> Result<bool> {
    let mut any = false;
    for i in 0..x.len() {
        let mut best = (-1e-12 * value.abs().max(1.0), None);
        for node in obj.space.nodes() {
            let d = obj.delta(x, i, node)?;
            if d < best.0 {
                best = (d, Some(*node));
            }
        }
        if let (_, Some(node)) = best {
            x[i] = node;
            *value = obj.value(x)?;
            trace.push(*value);
            any = true;
        }
    }
    Ok(any)
}

/// Runs restart number `restart` of [`fekete_minimize`]; restarts are
/// independent and can be run in any order.
pub fn fekete_restart(
    model: &EnergyModel,
    n: usize,
    f: Option<&MeasureFunctional>,
    opts: &FeketeOptions,
    restart: usize,
) -> Result<RestartOutcome> {
    if n < model.arity() {
        return Err(Error::TooFewParticles { n, arity: model.arity() });
    }
    let space = model.space();
    let obj = Objective { model, f, space };
    let mut rng = stream(opts.seed, restart as u64);
    let (mut x, mut value) = initial(&obj, n, &mut rng)?;
    let mut trace = vec![value];
    let smooth = model.kernel().is_smooth();
    let mut gradient_norm = None;
    for round in 0..4 {
        if smooth {
            gradient_norm = Some(descend(&obj, &mut x, &mut value, &mut trace, opts)?);
        } else {
            pattern_search(&obj, &mut x, &mut value, &mut trace, opts)?;
        }
        if !opts.polish || round == 3 || !polish(&obj, &mut x, &mut value, &mut trace)? {
            break;
        }
    }
    canonicalize(&mut x);
    Ok(RestartOutcome { restart, config: x, value, gradient_norm, trace })
}

/// Merges restart outcomes: lowest value wins, ties broken by the canonical
/// configuration.
pub fn merge_restarts(
    model: &EnergyModel,
    outcomes: Vec<core::result::Result<RestartOutcome, (usize, Error)>>,
) -> Result<FeketeResult> {
    let restarts = outcomes.len();
    let mut finals = vec![f64::INFINITY; restarts];
    let mut collisions = Vec::new();
    let mut best: Option<RestartOutcome> = None;
    for o in outcomes {
        match o {
            Ok(r) => {
                finals[r.restart] = r.value;
                let better = match &best {
                    None => true,
                    Some(b) => match r.value.total_cmp(&b.value) {
                        Ordering::Less => true,
                        Ordering::Equal => config_cmp(&r.config, &b.config) == Ordering::Less,
                        Ordering::Greater => false,
                    },
                };
                if better {
                    best = Some(r);
                }
            }
            Err((restart, Error::Collision { i, j })) => collisions.push((restart, i, j)),
            Err((_, e)) => return Err(e),
        }
    }
    let best = best.ok_or(Error::TrappedChain { steps: 0 })?;
    let energy = model.w_n(&best.config)?;
    Ok(FeketeResult {
        value: best.value,
        energy,
        restarts,
        finals,
        gradient_norm: best.gradient_norm,
        method: if model.kernel().is_smooth() { SearchMethod::Gradient } else { SearchMethod::PatternSearch },
        collisions,
        trace: best.trace,
        best: best.config,
    })
}

fn config_cmp(a: &[Point], b: &[Point]) -> Ordering {
    for (p, q) in a.iter().zip(b) {
        for d in 0..3 {
            match p.0[d].total_cmp(&q.0[d]) {
                Ordering::Equal => continue,
                o => return o,
            }
        }
    }
    Ordering::Equal
}

/// Multi-start minimization of `W_n + f(i_n)` from reference-distributed
/// starts.
pub fn fekete_minimize(
    model: &EnergyModel,
    n: usize,
    f: Option<&MeasureFunctional>,
    opts: &FeketeOptions,
) -> Result<FeketeResult> {
    if opts.restarts == 0 {
        return Err(Error::InvalidParameter("at least one restart is needed".into()));
    }
    let outcomes = (0..opts.restarts).map(|r| fekete_restart(model, n, f, opts, r).map_err(|e| (r, e))).collect();
    merge_restarts(model, outcomes)
}

/// Exact minimizer of `W_n + f(i_n)` on a finite space, over occupation types.
#[derive(Clone, Debug, PartialEq)]
pub struct FiniteFekete {
    pub counts: Vec<usize>,
    pub value: f64,
}

pub fn fekete_finite(model: &FiniteModel, n: usize, f: Option<&FiniteFunctional>) -> Result<FiniteFekete> {
    if n < model.arity() {
        return Err(Error::TooFewParticles { n, arity: model.arity() });
    }
    let mut best = FiniteFekete { counts: Vec::new(), value: f64::INFINITY };
    let mut mu = vec![0.0; model.m()];
    for_each_type(model.m(), n, |counts| {
        let mut v = model.w_n_counts(counts);
        if let Some(f) = f {
            for (m, c) in mu.iter_mut().zip(counts) {
                *m = *c as f64 / n as f64;
            }
            v += f.eval(&mu);
        }
        if v < best.value {
            best = FiniteFekete { counts: counts.to_vec(), value: v };
        }
    });
    Ok(best)
}

#[derive(Clone, Debug, PartialEq)]
pub struct InfimaRow {
    pub n: usize,
    pub inf_n: f64,
    pub inf_macro: f64,
    pub gap: f64,
}

#[derive(Clone, Debug, PartialEq)]
pub struct InfimaTable {
    pub rows: Vec<InfimaRow>,
    /// Least-squares slope of the gaps against `n`.
    pub slope: f64,
    pub final_gap: f64,
    pub threshold: f64,
    pub passed: bool,
}

impl InfimaTable {
    /// Table from finished rows; passes when the final gap is below
    /// `threshold` and the gaps trend down.
    pub fn from_rows(rows: Vec<InfimaRow>, threshold: f64) -> Self {
        let ns: Vec<f64> = rows.iter().map(|r| r.n as f64).collect();
        let gaps: Vec<f64> = rows.iter().map(|r| r.gap).collect();
        let slope = least_squares_slope(&ns, &gaps);
        let final_gap = gaps.last().copied().unwrap_or(f64::NAN);
        InfimaTable { rows, slope, final_gap, threshold, passed: final_gap < threshold && slope < 0.0 }
    }

    pub fn gaps(&self) -> Vec<f64> {
        self.rows.iter().map(|r| r.gap).collect()
    }
}

/// `inf {W + f}` on the model's grid: closed form for constant kernels,
/// zero-temperature mirror descent for convex ones. The witness is returned
/// when a minimizer was computed.
pub fn macro_infimum(model: &EnergyModel, f: Option<&MeasureFunctional>) -> Result<(f64, Option<GridMeasure>)> {
    let space = model.space();
    let linear = match f {
        None => None,
        Some(MeasureFunctional::Integral(g)) => Some(space.nodes().iter().map(|p| g.eval(p)).collect::<Vec<f64>>()),
        Some(f) => {
            return Err(Error::MacroInfimumUnavailable(format!("{} is not an integral functional", f.label())));
        }
    };
    if model.environment().is_none() {
        if let Kernel::Constant { value, arity } = model.kernel() {
            let base = value / crate::math::factorial(*arity);
            let shift = linear.map_or(0.0, |v| v.iter().copied().fold(f64::INFINITY, f64::min));
            return Ok((base + shift, None));
        }
    }
    if !model.kernel().is_convex() || model.arity() != 2 {
        return Err(Error::MacroInfimumUnavailable(format!("kernel {} is not convex", model.kernel().label())));
    }
    let mut free = FreeEnergyModel::new(model.clone(), f64::INFINITY)?;
    if let Some(v) = linear {
        free = free.with_linear_term(v)?;
    }
    let opts = MirrorOptions { max_steps: 50_000, tolerance: 1e-10, initial_step: 1.0 };
    let res = free.minimize(&GridMeasure::uniform(space.clone()), &opts)?;
    Ok((res.free_energy, Some(res.measure)))
}

/// Table of `inf (W_n + f)` (best found) against `inf {W + f}`.
pub fn infima_convergence_table(
    model: &EnergyModel,
    f: Option<&MeasureFunctional>,
    ns: &[usize],
    opts: &FeketeOptions,
    threshold: f64,
) -> Result<InfimaTable> {
    let (inf_macro, _) = macro_infimum(model, f)?;
    let mut rows = Vec::with_capacity(ns.len());
    for &n in ns {
        let r = fekete_minimize(model, n, f, opts)?;
        rows.push(InfimaRow { n, inf_n: r.value, inf_macro, gap: (r.value - inf_macro).abs() });
    }
    Ok(InfimaTable::from_rows(rows, threshold))
}

/// Finite-space table: exact `inf W_n` over types against a simplex-grid
/// `inf W`.
pub fn infima_convergence_table_finite(
    model: &FiniteModel,
    f: Option<&FiniteFunctional>,
    ns: &[usize],
    search: &SimplexSearch,
    threshold: f64,
) -> Result<InfimaTable> {
    let macro_min = minimize(model.m(), search, |mu| model.w_macro(mu) + f.map_or(0.0, |f| f.eval(mu)));
    let mut rows = Vec::with_capacity(ns.len());
    for &n in ns {
        let r = fekete_finite(model, n, f)?;
        rows.push(InfimaRow { n, inf_n: r.value, inf_macro: macro_min.value, gap: (r.value - macro_min.value).abs() });
    }
    Ok(InfimaTable::from_rows(rows, threshold))
}
