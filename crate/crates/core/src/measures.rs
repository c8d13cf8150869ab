//! Probability measures on model spaces and finite spaces.

use crate::math::{entropy_term, log_sum_exp};
use crate::prelude::*;
use crate::simplex::{self, SimplexSearch};
use crate::spaces::{Point, Space};
use crate::{Error, Result};

/// A probability measure given by its density relative to the reference
/// measure at the quadrature nodes.
#[derive(Clone, Debug)]
pub struct GridMeasure {
    space: Arc<Space>,
    density: Vec<f64>,
}

impl GridMeasure {
    /// Checks nonnegativity and unit mass (within 1e-10).
    pub fn new(space: Arc<Space>, density: Vec<f64>) -> Result<Self> {
        if density.len() != space.len() {
            return Err(Error::InvalidMeasure(format!("{} density values for {} nodes", density.len(), space.len())));
        }
        if let Some(i) = density.iter().position(|d| !(d.is_finite() && *d >= 0.0)) {
            return Err(Error::InvalidMeasure(format!("density {} at node {i}", density[i])));
        }
        let mass: f64 = density.iter().zip(space.weights()).map(|(d, w)| d * w).sum();
        if (mass - 1.0).abs() > 1e-10 {
            return Err(Error::InvalidMeasure(format!("total mass {mass} differs from 1")));
        }
        Ok(GridMeasure { space, density })
    }

    /// Rescales a nonnegative vector to unit mass.
    pub fn normalized(space: Arc<Space>, mut density: Vec<f64>) -> Result<Self> {
        let mass: f64 = density.iter().zip(space.weights()).map(|(d, w)| d * w).sum();
        if !(mass > 0.0 && mass.is_finite()) {
            return Err(Error::InvalidMeasure(format!("cannot normalize total mass {mass}")));
        }
        for d in density.iter_mut() {
            *d /= mass;
        }
        Self::new(space, density)
    }

    pub fn uniform(space: Arc<Space>) -> Self {
        let n = space.len();
        GridMeasure { space, density: vec![1.0; n] }
    }

    pub(crate) fn from_raw(space: Arc<Space>, density: Vec<f64>) -> Self {
        GridMeasure { space, density }
    }

    pub fn space(&self) -> &Arc<Space> {
        &self.space
    }

    pub fn density(&self) -> &[f64] {
        &self.density
    }

    pub fn into_density(self) -> Vec<f64> {
        self.density
    }

    /// Node masses `rho_j w_j`.
    pub fn masses(&self) -> Vec<f64> {
        self.density.iter().zip(self.space.weights()).map(|(d, w)| d * w).collect()
    }

    pub fn mass(&self) -> f64 {
        self.masses().iter().sum()
    }

    /// `integral g dmu` for `g` given at the nodes.
    pub fn integrate_nodes(&self, g: &[f64]) -> f64 {
        self.density.iter().zip(self.space.weights()).zip(g).map(|((d, w), g)| d * w * g).sum()
    }

    /// `t * self + (1 - t) * other`.
    pub fn mix(&self, t: f64, other: &GridMeasure) -> Result<GridMeasure> {
        same_space(&self.space, &other.space)?;
        let density = self.density.iter().zip(&other.density).map(|(a, b)| t * a + (1.0 - t) * b).collect();
        Ok(GridMeasure { space: self.space.clone(), density })
    }

    pub fn sup_distance(&self, other: &GridMeasure) -> f64 {
        self.density.iter().zip(&other.density).map(|(a, b)| (a - b).abs()).fold(0.0, f64::max)
    }

    /// `integral |rho_a - rho_b| dpi`.
    pub fn l1_distance(&self, other: &GridMeasure) -> f64 {
        self.density.iter().zip(&other.density).zip(self.space.weights()).map(|((a, b), w)| w * (a - b).abs()).sum()
    }

    /// `D(self || pi)`.
    pub fn entropy(&self) -> f64 {
        self.density.iter().zip(self.space.weights()).map(|(d, w)| w * entropy_term(*d, 1.0)).sum()
    }
}

/// The uniform-weight atomic measure `(1/n) sum delta_{x_i}`.
#[derive(Clone, Debug)]
pub struct EmpiricalMeasure {
    space: Arc<Space>,
    points: Vec<Point>,
}

impl EmpiricalMeasure {
    pub fn from_points(space: Arc<Space>, points: Vec<Point>) -> Result<Self> {
        if points.is_empty() {
            return Err(Error::EmptyPointList);
        }
        for (i, p) in points.iter().enumerate() {
            space.check_point(i, p)?;
        }
        Ok(EmpiricalMeasure { space, points })
    }

    pub fn space(&self) -> &Arc<Space> {
        &self.space
    }

    pub fn points(&self) -> &[Point] {
        &self.points
    }

    pub fn len(&self) -> usize {
        self.points.len()
    }

    pub fn is_empty(&self) -> bool {
        self.points.is_empty()
    }

    /// Relative entropy of an atomic measure against the reference measure,
    /// which is always infinite.
    pub fn entropy(&self) -> f64 {
        f64::INFINITY
    }
}

/// Measures that can integrate point functions.
pub trait Integrable {
    fn space(&self) -> &Arc<Space>;
    fn integrate(&self, f: &dyn Fn(&Point) -> f64) -> f64;
}

impl Integrable for GridMeasure {
    fn space(&self) -> &Arc<Space> {
        &self.space
    }

    fn integrate(&self, f: &dyn Fn(&Point) -> f64) -> f64 {
        self.space
            .nodes()
            .iter()
            .zip(self.space.weights())
            .zip(&self.density)
            .map(|((p, w), d)| if *d == 0.0 { 0.0 } else { w * d * f(p) })
            .sum()
    }
}

impl Integrable for EmpiricalMeasure {
    fn space(&self) -> &Arc<Space> {
        &self.space
    }

    fn integrate(&self, f: &dyn Fn(&Point) -> f64) -> f64 {
        self.points.iter().map(f).sum::<f64>() / self.points.len() as f64
    }
}

fn same_space(a: &Space, b: &Space) -> Result<()> {
    if a.same_as(b) {
        Ok(())
    } else {
        Err(Error::MismatchedSpaces)
    }
}

/// `D(mu || nu)` for two grid measures on the same space.
pub fn relative_entropy(mu: &GridMeasure, nu: &GridMeasure) -> Result<f64> {
    same_space(&mu.space, &nu.space)?;
    Ok(mu
        .density
        .iter()
        .zip(&nu.density)
        .zip(mu.space.weights())
        .map(|((a, b), w)| w * b * entropy_term_ratio(*a, *b))
        .sum())
}

fn entropy_term_ratio(a: f64, b: f64) -> f64 {
    // b * (a/b) log(a/b), written to stay exact when a = b
    if a <= 0.0 {
        0.0
    } else if b <= 0.0 {
        f64::INFINITY
    } else {
        (a / b) * (a / b).ln()
    }
}

/// `sum_i mu_i log(mu_i / nu_i)` with `0 log 0 = 0` and `+inf` when `mu`
/// charges a null atom of `nu`.
pub fn relative_entropy_finite(mu: &[f64], nu: &[f64]) -> Result<f64> {
    if mu.len() != nu.len() {
        return Err(Error::MismatchedSpaces);
    }
    Ok(mu.iter().zip(nu).map(|(a, b)| entropy_term(*a, *b)).sum())
}

/// A finite space with strictly positive reference probabilities.
#[derive(Clone, Debug, PartialEq)]
pub struct FiniteSpace {
    probs: Vec<f64>,
}

impl FiniteSpace {
    pub fn new(probs: Vec<f64>) -> Result<Self> {
        if probs.is_empty() {
            return Err(Error::InvalidMeasure("finite space needs at least one atom".into()));
        }
        if probs.iter().any(|p| !(p.is_finite() && *p > 0.0)) {
            return Err(Error::InvalidMeasure("reference probabilities must be positive".into()));
        }
        let total: f64 = probs.iter().sum();
        if (total - 1.0).abs() > 1e-12 {
            return Err(Error::InvalidMeasure(format!("reference probabilities sum to {total}")));
        }
        Ok(FiniteSpace { probs })
    }

    pub fn uniform(m: usize) -> Self {
        FiniteSpace { probs: vec![1.0 / m as f64; m] }
    }

    pub fn probs(&self) -> &[f64] {
        &self.probs
    }

    pub fn len(&self) -> usize {
        self.probs.len()
    }

    pub fn is_empty(&self) -> bool {
        self.probs.is_empty()
    }
}

/// Both sides of the Legendre identity for the entropy on a finite space.
#[derive(Clone, Debug)]
pub struct LegendreCheck {
    /// `log sum pi_i exp(-g_i)`.
    pub lhs: f64,
    /// `-(E_tau g + D(tau || pi))` at the Gibbs tilt `tau`.
    pub rhs_closed: f64,
    /// Minus the simplex-lattice minimum of `E_tau g + D(tau || pi)`.
    pub rhs_grid: f64,
    pub tilt: Vec<f64>,
    pub grid_minimizer: Vec<f64>,
}

pub fn legendre_check(space: &FiniteSpace, g: &[f64], search: &SimplexSearch) -> Result<LegendreCheck> {
    if g.len() != space.len() {
        return Err(Error::MismatchedSpaces);
    }
    if g.iter().any(|v| v.is_nan() || *v == f64::NEG_INFINITY) {
        return Err(Error::InvalidParameter("g must be bounded below".into()));
    }
    let finite: Vec<usize> = (0..g.len()).filter(|&i| g[i] < f64::INFINITY).collect();
    if finite.is_empty() {
        return Err(Error::AllInfinite);
    }
    let pi = space.probs();
    let logs: Vec<f64> = finite.iter().map(|&i| pi[i].ln() - g[i]).collect();
    let lhs = log_sum_exp(&logs);
    let mut tilt = vec![0.0; g.len()];
    for (&i, l) in finite.iter().zip(&logs) {
        tilt[i] = (l - lhs).exp();
    }
    let objective = |tau: &[f64], idx: &[usize]| -> f64 {
        idx.iter().zip(tau).map(|(&i, t)| if *t == 0.0 { 0.0 } else { t * g[i] + entropy_term(*t, pi[i]) }).sum()
    };
    let rhs_closed = -objective(&finite.iter().map(|&i| tilt[i]).collect::<Vec<_>>(), &finite);
    // the infimum over the simplex restricted to the finite face (any mass on
    // an infinite atom makes the objective infinite)
    let found = simplex::minimize(finite.len(), search, |tau| objective(tau, &finite));
    let mut grid_minimizer = vec![0.0; g.len()];
    for (&i, t) in finite.iter().zip(&found.argmin) {
        grid_minimizer[i] = *t;
    }
    Ok(LegendreCheck { lhs, rhs_closed, rhs_grid: -found.value, tilt, grid_minimizer })
}

/// Fixed test-function dictionary of the bounded-Lipschitz surrogate.
///
/// It holds `min(d(., a), 1)` for up to 512 anchors spread over the grid
/// and, on manifolds, the first 16 nonconstant basis functions scaled by
/// `1 / max(sup, Lipschitz constant)`.
#[derive(Clone, Debug)]
pub struct BlDictionary {
    anchors: Vec<Point>,
    basis: Vec<(usize, f64)>,
}

impl BlDictionary {
    pub fn for_space(space: &Space) -> Self {
        let stride = space.len().div_ceil(512).max(1);
        let anchors = space.nodes().iter().step_by(stride).copied().collect();
        let basis = match space.basis() {
            Some(b) => (1..b.len().min(17)).map(|k| (k, 1.0 / basis_scale(space, k))).collect(),
            None => Vec::new(),
        };
        BlDictionary { anchors, basis }
    }

    pub fn len(&self) -> usize {
        self.anchors.len() + self.basis.len()
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }
}

fn basis_scale(space: &Space, k: usize) -> f64 {
    let b = space.basis().expect("manifold");
    b.sup_bound(k).max(b.lipschitz_bound(k))
}

/// `sup_f |integral f da - integral f db|` over the fixed dictionary.
pub fn bounded_lipschitz_distance(a: &dyn Integrable, b: &dyn Integrable) -> Result<f64> {
    same_space(a.space(), b.space())?;
    let space = a.space().clone();
    let dict = BlDictionary::for_space(&space);
    let mut worst: f64 = 0.0;
    for anchor in &dict.anchors {
        let f = |p: &Point| space.geodesic(p, anchor).min(1.0);
        worst = worst.max((a.integrate(&f) - b.integrate(&f)).abs());
    }
    if let Some(basis) = space.basis() {
        for &(k, scale) in &dict.basis {
            let f = |p: &Point| {
                let mut buf = Vec::new();
                basis.values_at(p, &mut buf);
                scale * buf[k]
            };
            worst = worst.max((a.integrate(&f) - b.integrate(&f)).abs());
        }
    }
    Ok(worst)
}

pub fn empirical_from_points(space: Arc<Space>, points: Vec<Point>) -> Result<EmpiricalMeasure> {
    EmpiricalMeasure::from_points(space, points)
}

/// Smooths every atom with a Gaussian geodesic kernel of width `bandwidth`,
/// spread according to the reference weights, so each atom keeps mass `1/n`.
pub fn grid_projection(e: &EmpiricalMeasure, bandwidth: f64) -> Result<GridMeasure> {
    if !(bandwidth > 0.0 && bandwidth.is_finite()) {
        return Err(Error::InvalidParameter(format!("bandwidth {bandwidth} must be positive")));
    }
    let space = e.space.clone();
    let mut density = vec![0.0; space.len()];
    let mut kernel = vec![0.0; space.len()];
    let inv = 1.0 / (2.0 * bandwidth * bandwidth);
    for x in &e.points {
        // log-domain normalization keeps tiny bandwidths finite
        let mut max_log = f64::NEG_INFINITY;
        for (k, p) in kernel.iter_mut().zip(space.nodes()) {
            let d = space.geodesic(x, p);
            *k = -d * d * inv;
            max_log = max_log.max(*k);
        }
        let mut total = 0.0;
        for (k, w) in kernel.iter_mut().zip(space.weights()) {
            *k = (*k - max_log).exp();
            total += *k * w;
        }
        let scale = 1.0 / (total * e.points.len() as f64);
        for (d, k) in density.iter_mut().zip(&kernel) {
            *d += k * scale;
        }
    }
    GridMeasure::normalized(space, density)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::spaces::SpaceSpec;

    #[test]
    fn finite_entropy_examples() {
        assert!((relative_entropy_finite(&[1.0, 0.0], &[0.5, 0.5]).unwrap() - 2f64.ln()).abs() < 1e-15);
        assert_eq!(relative_entropy_finite(&[0.5, 0.5], &[1.0, 0.0]).unwrap(), f64::INFINITY);
        assert_eq!(relative_entropy_finite(&[0.3, 0.7], &[0.3, 0.7]).unwrap(), 0.0);
    }

    #[test]
    fn legendre_examples() {
        let s = FiniteSpace::uniform(2);
        let search = SimplexSearch::default();
        let c = legendre_check(&s, &[0.0, 1.0], &search).unwrap();
        let expected = ((1.0 + (-1f64).exp()) / 2.0).ln();
        assert!((c.lhs - expected).abs() < 1e-15);
        assert!((c.lhs + 0.379885).abs() < 1e-6);
        assert!((c.rhs_closed - c.lhs).abs() < 1e-12);
        assert!((c.rhs_grid - c.lhs).abs() < 1e-4);
        let c = legendre_check(&s, &[0.0, f64::INFINITY], &search).unwrap();
        assert!((c.lhs - 0.5f64.ln()).abs() < 1e-15);
        assert_eq!(c.tilt, vec![1.0, 0.0]);
        assert_eq!(c.grid_minimizer, vec![1.0, 0.0]);
        let c = legendre_check(&FiniteSpace::uniform(3), &[2.0; 3], &search).unwrap();
        assert!((c.lhs + 2.0).abs() < 1e-14 && (c.rhs_grid + 2.0).abs() < 1e-6);
        assert!(matches!(legendre_check(&s, &[f64::INFINITY; 2], &search), Err(Error::AllInfinite)));
    }

    #[test]
    fn projection_of_one_atom_is_near_uniform() {
        let s = Space::build(SpaceSpec::circle(256, 8)).unwrap();
        let e = EmpiricalMeasure::from_points(s.clone(), vec![Point::angle(1.0)]).unwrap();
        let proj = grid_projection(&e, s.diameter()).unwrap();
        assert!(proj.entropy() < 0.05);
        assert_eq!(e.entropy(), f64::INFINITY);
        assert!(matches!(EmpiricalMeasure::from_points(s, vec![]), Err(Error::EmptyPointList)));
    }
}
