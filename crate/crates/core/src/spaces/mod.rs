//! Compact model spaces: geometry, reference measure, quadrature grid and
//! spectral basis.
//!
//! Point coordinates are stored in a fixed three-slot array:
//!
//! | kind   | coordinates                         |
//! |--------|-------------------------------------|
//! | circle | `[theta, 0, 0]`, theta in `[0, 2pi)` |
//! | torus  | `[u, v, 0]`, period 1 on each axis   |
//! | sphere | unit vector `[x, y, z]`              |
//! | box    | `[x, y, 0]` (`y = 0` when `dim = 1`) |

mod basis;
mod green;
mod harmonics;
mod icosphere;

pub use basis::SpectralBasis;
pub use green::{BackgroundCharge, GreenModel, GreenTables, TestFunction};
pub use harmonics::real_harmonics;

use core::f64::consts::{PI, TAU};
use core::fmt;

use rand::Rng;
use rand_distr::{Distribution, StandardNormal};

use crate::math::rem_euclid;
use crate::prelude::*;
use crate::{Error, Result};

/// A point of a model space.
#[derive(Clone, Copy, Debug, PartialEq, Default)]
pub struct Point(pub [f64; 3]);

impl Point {
    pub fn angle(theta: f64) -> Point {
        Point([rem_euclid(theta, TAU), 0.0, 0.0])
    }

    pub fn torus(u: f64, v: f64) -> Point {
        Point([rem_euclid(u, 1.0), rem_euclid(v, 1.0), 0.0])
    }

    pub fn unit(x: f64, y: f64, z: f64) -> Point {
        let r = (x * x + y * y + z * z).sqrt();
        Point([x / r, y / r, z / r])
    }

    pub fn line(x: f64) -> Point {
        Point([x, 0.0, 0.0])
    }

    pub fn plane(x: f64, y: f64) -> Point {
        Point([x, y, 0.0])
    }

    pub fn coords(&self) -> &[f64; 3] {
        &self.0
    }
}

/// A real function of a point, shared between threads.
#[derive(Clone)]
pub struct ScalarField {
    f: Arc<dyn Fn(&Point) -> f64 + Send + Sync>,
    label: String,
}

impl ScalarField {
    pub fn new(label: impl Into<String>, f: impl Fn(&Point) -> f64 + Send + Sync + 'static) -> Self {
        ScalarField { f: Arc::new(f), label: label.into() }
    }

    pub fn constant(value: f64) -> Self {
        ScalarField::new(format!("{value}"), move |_| value)
    }

    pub fn eval(&self, p: &Point) -> f64 {
        (self.f)(p)
    }

    pub fn label(&self) -> &str {
        &self.label
    }
}

impl fmt::Debug for ScalarField {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "ScalarField({})", self.label)
    }
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub enum SpaceKind {
    Circle,
    Torus,
    Sphere,
    Box { lo: f64, hi: f64, dim: usize },
}

impl SpaceKind {
    pub fn dimension(&self) -> usize {
        match self {
            SpaceKind::Circle => 1,
            SpaceKind::Torus | SpaceKind::Sphere => 2,
            SpaceKind::Box { dim, .. } => *dim,
        }
    }

    pub fn name(&self) -> &'static str {
        match self {
            SpaceKind::Circle => "circle",
            SpaceKind::Torus => "torus",
            SpaceKind::Sphere => "sphere",
            SpaceKind::Box { .. } => "box",
        }
    }

    pub fn is_manifold(&self) -> bool {
        !matches!(self, SpaceKind::Box { .. })
    }
}

/// Build request for a [`Space`].
///
/// `resolution` is the node count for the circle, nodes per axis for the
/// torus and boxes, and the icosahedral subdivision level for the sphere.
/// `basis_order` is the highest Fourier mode (per axis on the torus) or the
/// highest spherical-harmonic degree. `density` is the unnormalized
/// reference density of a box and must be absent for manifolds.
#[derive(Clone, Debug)]
pub struct SpaceSpec {
    pub kind: SpaceKind,
    pub resolution: usize,
    pub basis_order: usize,
    pub density: Option<ScalarField>,
}

impl SpaceSpec {
    pub fn circle(nodes: usize, modes: usize) -> Self {
        SpaceSpec { kind: SpaceKind::Circle, resolution: nodes, basis_order: modes, density: None }
    }

    pub fn torus(per_axis: usize, modes: usize) -> Self {
        SpaceSpec { kind: SpaceKind::Torus, resolution: per_axis, basis_order: modes, density: None }
    }

    pub fn sphere(level: usize, degree: usize) -> Self {
        SpaceSpec { kind: SpaceKind::Sphere, resolution: level, basis_order: degree, density: None }
    }

    pub fn interval(lo: f64, hi: f64, nodes: usize) -> Self {
        SpaceSpec { kind: SpaceKind::Box { lo, hi, dim: 1 }, resolution: nodes, basis_order: 0, density: None }
    }

    pub fn square(lo: f64, hi: f64, per_axis: usize) -> Self {
        SpaceSpec { kind: SpaceKind::Box { lo, hi, dim: 2 }, resolution: per_axis, basis_order: 0, density: None }
    }

    pub fn with_density(mut self, density: ScalarField) -> Self {
        self.density = Some(density);
        self
    }
}

/// Raw grid of a manifold space; see [`Space::tables`].
#[derive(Clone, Debug, PartialEq)]
pub struct SpaceTables {
    pub kind: SpaceKind,
    pub resolution: usize,
    pub basis_order: usize,
    pub nodes: Vec<Point>,
    pub weights: Vec<f64>,
    pub cell_sides: Vec<f64>,
}

/// A compact model space with its reference probability measure discretized
/// on a quadrature grid.
#[derive(Debug)]
pub struct Space {
    kind: SpaceKind,
    resolution: usize,
    basis_order: usize,
    nodes: Vec<Point>,
    weights: Vec<f64>,
    cell_sides: Vec<f64>,
    basis: Option<SpectralBasis>,
    density: Option<ScalarField>,
    density_norm: f64,
    max_density: f64,
    fingerprint: u64,
}

impl Space {
    pub fn build(spec: SpaceSpec) -> Result<Arc<Space>> {
        let SpaceSpec { kind, resolution, basis_order, density } = spec;
        match kind {
            SpaceKind::Sphere => {
                if resolution > 7 {
                    return Err(Error::InvalidSpace(format!(
                        "icosahedral level {resolution} exceeds the supported maximum 7"
                    )));
                }
            }
            _ => {
                if resolution < 8 {
                    return Err(Error::InvalidSpace(format!("resolution {resolution} is below 8")));
                }
            }
        }
        if kind.is_manifold() {
            if basis_order < 1 {
                return Err(Error::InvalidSpace("basis order must be at least 1".into()));
            }
            if density.is_some() {
                return Err(Error::InvalidSpace(
                    "manifold reference measures are uniform; density is only accepted for boxes".into(),
                ));
            }
        }
        let mut space = match kind {
            SpaceKind::Circle => {
                if 2 * basis_order >= resolution {
                    return Err(aliasing(basis_order, resolution));
                }
                let h = TAU / resolution as f64;
                Space::from_parts(
                    kind,
                    resolution,
                    basis_order,
                    (0..resolution).map(|i| Point([i as f64 * h, 0.0, 0.0])).collect(),
                    vec![1.0 / resolution as f64; resolution],
                    vec![h; resolution],
                )
            }
            SpaceKind::Torus => {
                if 2 * basis_order >= resolution {
                    return Err(aliasing(basis_order, resolution));
                }
                let h = 1.0 / resolution as f64;
                let count = resolution * resolution;
                let mut nodes = Vec::with_capacity(count);
                for i in 0..resolution {
                    for j in 0..resolution {
                        nodes.push(Point([i as f64 * h, j as f64 * h, 0.0]));
                    }
                }
                Space::from_parts(kind, resolution, basis_order, nodes, vec![1.0 / count as f64; count], vec![h; count])
            }
            SpaceKind::Sphere => {
                let nodes = icosphere::nodes(resolution);
                if nodes.len() < 8 {
                    return Err(Error::InvalidSpace("sphere grid has fewer than 8 nodes".into()));
                }
                let exact = 2 * basis_order;
                if (exact + 1) * (exact + 1) * 2 > nodes.len() {
                    return Err(Error::InvalidSpace(format!(
                        "icosahedral level {resolution} ({} nodes) cannot resolve degree {basis_order}",
                        nodes.len()
                    )));
                }
                let weights = icosphere::weights(&nodes, exact)?;
                let sides = weights.iter().map(|w| (4.0 * PI * w).sqrt()).collect();
                Space::from_parts(kind, resolution, basis_order, nodes, weights, sides)
            }
            SpaceKind::Box { lo, hi, dim } => {
                if !(lo.is_finite() && hi.is_finite() && lo < hi) {
                    return Err(Error::InvalidSpace(format!("box bounds [{lo}, {hi}] are not an interval")));
                }
                if dim != 1 && dim != 2 {
                    return Err(Error::InvalidSpace(format!("box dimension {dim} is not 1 or 2")));
                }
                let h = (hi - lo) / resolution as f64;
                let mid = |i: usize| lo + (i as f64 + 0.5) * h;
                let nodes: Vec<Point> = if dim == 1 {
                    (0..resolution).map(|i| Point([mid(i), 0.0, 0.0])).collect()
                } else {
                    let mut v = Vec::with_capacity(resolution * resolution);
                    for i in 0..resolution {
                        for j in 0..resolution {
                            v.push(Point([mid(i), mid(j), 0.0]));
                        }
                    }
                    v
                };
                let cell = h.powi(dim as i32);
                let mut raw = Vec::with_capacity(nodes.len());
                for p in &nodes {
                    let d = density.as_ref().map_or(1.0, |f| f.eval(p));
                    if !(d.is_finite() && d > 0.0) {
                        return Err(Error::InvalidSpace(format!(
                            "reference density is {d} at {:?}; it must be positive and finite",
                            p.0
                        )));
                    }
                    raw.push(d * cell);
                }
                let total: f64 = raw.iter().sum();
                let mut space = Space::from_parts(
                    kind,
                    resolution,
                    0,
                    nodes,
                    raw.iter().map(|r| r / total).collect(),
                    vec![h; raw.len()],
                );
                space.density_norm = total;
                space.max_density = raw.iter().fold(0.0f64, |a, &r| a.max(r / cell)) / total;
                space.density = density;
                space
            }
        };
        normalize_weights(&mut space.weights);
        if kind.is_manifold() {
            space.basis = Some(SpectralBasis::new(kind, basis_order));
        }
        space.fingerprint = space.compute_fingerprint();
        Ok(Arc::new(space))
    }

    /// Grid tables of a manifold space, for external caching.
    pub fn tables(&self) -> SpaceTables {
        SpaceTables {
            kind: self.kind,
            resolution: self.resolution,
            basis_order: self.basis_order,
            nodes: self.nodes.clone(),
            weights: self.weights.clone(),
            cell_sides: self.cell_sides.clone(),
        }
    }

    /// Rebuilds a manifold space from cached tables without recomputing
    /// quadrature weights.
    pub fn from_tables(t: SpaceTables) -> Result<Arc<Space>> {
        if !t.kind.is_manifold() {
            return Err(Error::InvalidSpace("only manifold grids are cached".into()));
        }
        let n = t.nodes.len();
        if n < 8 || t.weights.len() != n || t.cell_sides.len() != n || t.basis_order < 1 {
            return Err(Error::InvalidSpace("cached tables are inconsistent".into()));
        }
        if t.weights.iter().any(|w| !(w.is_finite() && *w > 0.0)) || (t.weights.iter().sum::<f64>() - 1.0).abs() > 1e-9
        {
            return Err(Error::InvalidSpace("cached weights are not a probability vector".into()));
        }
        let mut space = Space::from_parts(t.kind, t.resolution, t.basis_order, t.nodes, t.weights, t.cell_sides);
        space.basis = Some(SpectralBasis::new(t.kind, t.basis_order));
        space.fingerprint = space.compute_fingerprint();
        Ok(Arc::new(space))
    }

    fn from_parts(
        kind: SpaceKind,
        resolution: usize,
        basis_order: usize,
        nodes: Vec<Point>,
        weights: Vec<f64>,
        cell_sides: Vec<f64>,
    ) -> Space {
        Space {
            kind,
            resolution,
            basis_order,
            nodes,
            weights,
            cell_sides,
            basis: None,
            density: None,
            density_norm: 1.0,
            max_density: 1.0,
            fingerprint: 0,
        }
    }

    fn compute_fingerprint(&self) -> u64 {
        let mut h = Fnv::default();
        h.write(self.kind.name().as_bytes());
        if let SpaceKind::Box { lo, hi, dim } = self.kind {
            h.write(&lo.to_bits().to_le_bytes());
            h.write(&hi.to_bits().to_le_bytes());
            h.write(&(dim as u64).to_le_bytes());
        }
        h.write(&(self.resolution as u64).to_le_bytes());
        h.write(&(self.basis_order as u64).to_le_bytes());
        for w in &self.weights {
            h.write(&w.to_bits().to_le_bytes());
        }
        h.finish()
    }

    pub fn kind(&self) -> SpaceKind {
        self.kind
    }

    pub fn dimension(&self) -> usize {
        self.kind.dimension()
    }

    pub fn resolution(&self) -> usize {
        self.resolution
    }

    pub fn basis_order(&self) -> usize {
        self.basis_order
    }

    pub fn nodes(&self) -> &[Point] {
        &self.nodes
    }

    pub fn weights(&self) -> &[f64] {
        &self.weights
    }

    pub fn len(&self) -> usize {
        self.nodes.len()
    }

    pub fn is_empty(&self) -> bool {
        self.nodes.is_empty()
    }

    /// Side length of the square (or interval) cell represented by each node.
    pub fn cell_sides(&self) -> &[f64] {
        &self.cell_sides
    }

    pub fn basis(&self) -> Option<&SpectralBasis> {
        self.basis.as_ref()
    }

    /// Identifies the grid: two spaces with equal fingerprints are
    /// interchangeable for every measure operation.
    pub fn fingerprint(&self) -> u64 {
        self.fingerprint
    }

    pub fn same_as(&self, other: &Space) -> bool {
        core::ptr::eq(self, other) || self.fingerprint == other.fingerprint
    }

    pub fn diameter(&self) -> f64 {
        match self.kind {
            SpaceKind::Circle | SpaceKind::Sphere => PI,
            SpaceKind::Torus => core::f64::consts::FRAC_1_SQRT_2,
            SpaceKind::Box { lo, hi, dim } => (hi - lo) * (dim as f64).sqrt(),
        }
    }

    /// Density of the reference measure with respect to the normalized
    /// volume (Lebesgue measure for boxes).
    pub fn reference_density(&self, p: &Point) -> f64 {
        match &self.density {
            Some(f) => f.eval(p) / self.density_norm,
            None => match self.kind {
                SpaceKind::Box { lo, hi, dim } => 1.0 / (hi - lo).powi(dim as i32),
                _ => 1.0,
            },
        }
    }

    pub fn contains(&self, p: &Point) -> bool {
        let [a, b, c] = p.0;
        if !(a.is_finite() && b.is_finite() && c.is_finite()) {
            return false;
        }
        match self.kind {
            SpaceKind::Circle => (0.0..TAU).contains(&a) && b == 0.0 && c == 0.0,
            SpaceKind::Torus => (0.0..1.0).contains(&a) && (0.0..1.0).contains(&b) && c == 0.0,
            SpaceKind::Sphere => ((a * a + b * b + c * c).sqrt() - 1.0).abs() < 1e-9,
            SpaceKind::Box { lo, hi, dim } => {
                (lo..=hi).contains(&a) && c == 0.0 && if dim == 1 { b == 0.0 } else { (lo..=hi).contains(&b) }
            }
        }
    }

    /// Brings a point back onto the space (angle wrapping, renormalization).
    pub fn canonical(&self, p: &Point) -> Point {
        let [a, b, c] = p.0;
        match self.kind {
            SpaceKind::Circle => Point::angle(a),
            SpaceKind::Torus => Point::torus(a, b),
            SpaceKind::Sphere => Point::unit(a, b, c),
            SpaceKind::Box { lo, hi, dim } => {
                Point([a.clamp(lo, hi), if dim == 2 { b.clamp(lo, hi) } else { 0.0 }, 0.0])
            }
        }
    }

    pub fn geodesic(&self, p: &Point, q: &Point) -> f64 {
        match self.kind {
            SpaceKind::Circle => {
                let d = rem_euclid(p.0[0] - q.0[0], TAU);
                d.min(TAU - d)
            }
            SpaceKind::Torus => {
                let du = wrap_unit(p.0[0] - q.0[0]);
                let dv = wrap_unit(p.0[1] - q.0[1]);
                (du * du + dv * dv).sqrt()
            }
            SpaceKind::Sphere => {
                let dot = dot3(&p.0, &q.0).clamp(-1.0, 1.0);
                let cross = cross3(&p.0, &q.0);
                norm3(&cross).atan2(dot)
            }
            SpaceKind::Box { .. } => euclid(&p.0, &q.0),
        }
    }

    /// The distance used by log and Riesz kernels: the Euclidean chord of the
    /// embedded unit circle and sphere, the flat distance on the torus and in
    /// boxes.
    pub fn chord(&self, p: &Point, q: &Point) -> f64 {
        match self.kind {
            SpaceKind::Circle => 2.0 * (0.5 * (p.0[0] - q.0[0])).sin().abs(),
            SpaceKind::Sphere => euclid(&p.0, &q.0),
            _ => self.geodesic(p, q),
        }
    }

    /// Gradient of `log chord(p, q)` with respect to `p`, in the tangent
    /// coordinates accepted by [`Space::retract`].
    pub fn log_chord_gradient(&self, p: &Point, q: &Point) -> [f64; 3] {
        match self.kind {
            SpaceKind::Circle => {
                let half = 0.5 * (p.0[0] - q.0[0]);
                [0.5 * half.cos() / half.sin(), 0.0, 0.0]
            }
            SpaceKind::Torus => {
                let du = wrap_unit(p.0[0] - q.0[0]);
                let dv = wrap_unit(p.0[1] - q.0[1]);
                let r2 = du * du + dv * dv;
                [du / r2, dv / r2, 0.0]
            }
            SpaceKind::Sphere => {
                let d = sub3(&p.0, &q.0);
                let r2 = dot3(&d, &d);
                let g = [d[0] / r2, d[1] / r2, d[2] / r2];
                self.project_tangent(p, g)
            }
            SpaceKind::Box { dim, .. } => {
                let d = sub3(&p.0, &q.0);
                let r2 = dot3(&d, &d);
                [d[0] / r2, if dim == 2 { d[1] / r2 } else { 0.0 }, 0.0]
            }
        }
    }

    /// Removes the normal component of an ambient vector (sphere only; other
    /// spaces use coordinate tangents).
    pub fn project_tangent(&self, p: &Point, v: [f64; 3]) -> [f64; 3] {
        match self.kind {
            SpaceKind::Sphere => {
                let s = dot3(&p.0, &v);
                [v[0] - s * p.0[0], v[1] - s * p.0[1], v[2] - s * p.0[2]]
            }
            SpaceKind::Circle => [v[0], 0.0, 0.0],
            SpaceKind::Torus => [v[0], v[1], 0.0],
            SpaceKind::Box { dim, .. } => [v[0], if dim == 2 { v[1] } else { 0.0 }, 0.0],
        }
    }

    /// Moves `p` along the tangent vector `v` (geodesically on manifolds, with
    /// mirror reflection at box walls).
    pub fn retract(&self, p: &Point, v: [f64; 3]) -> Point {
        match self.kind {
            SpaceKind::Circle => Point::angle(p.0[0] + v[0]),
            SpaceKind::Torus => Point::torus(p.0[0] + v[0], p.0[1] + v[1]),
            SpaceKind::Sphere => {
                let t = self.project_tangent(p, v);
                let len = norm3(&t);
                if len < 1e-300 {
                    return *p;
                }
                let (s, c) = len.sin_cos();
                Point::unit(c * p.0[0] + s * t[0] / len, c * p.0[1] + s * t[1] / len, c * p.0[2] + s * t[2] / len)
            }
            SpaceKind::Box { lo, hi, dim } => Point([
                reflect(p.0[0] + v[0], lo, hi),
                if dim == 2 { reflect(p.0[1] + v[1], lo, hi) } else { 0.0 },
                0.0,
            ]),
        }
    }

    /// Isotropic Gaussian step of standard deviation `scale` in each tangent
    /// direction.
    pub fn gaussian_step<R: Rng + ?Sized>(&self, p: &Point, scale: f64, rng: &mut R) -> Point {
        let g1: f64 = StandardNormal.sample(rng);
        let g2: f64 = StandardNormal.sample(rng);
        let v = match self.kind {
            SpaceKind::Circle => [scale * g1, 0.0, 0.0],
            SpaceKind::Torus => [scale * g1, scale * g2, 0.0],
            SpaceKind::Sphere => {
                let (e1, e2) = tangent_frame(&p.0);
                [
                    scale * (g1 * e1[0] + g2 * e2[0]),
                    scale * (g1 * e1[1] + g2 * e2[1]),
                    scale * (g1 * e1[2] + g2 * e2[2]),
                ]
            }
            SpaceKind::Box { dim, .. } => [scale * g1, if dim == 2 { scale * g2 } else { 0.0 }, 0.0],
        };
        self.retract(p, v)
    }

    /// Draws from the reference measure. Boxes draw a cell by weight and then
    /// a uniform point inside it.
    pub fn sample_reference<R: Rng + ?Sized>(&self, rng: &mut R) -> Point {
        match self.kind {
            SpaceKind::Circle => Point::angle(rng.random::<f64>() * TAU),
            SpaceKind::Torus => Point::torus(rng.random(), rng.random()),
            SpaceKind::Sphere => loop {
                let x: f64 = StandardNormal.sample(rng);
                let y: f64 = StandardNormal.sample(rng);
                let z: f64 = StandardNormal.sample(rng);
                let r = (x * x + y * y + z * z).sqrt();
                if r > 1e-12 {
                    break Point([x / r, y / r, z / r]);
                }
            },
            SpaceKind::Box { lo, hi, dim } => {
                if self.density.is_none() {
                    let x = lo + (hi - lo) * rng.random::<f64>();
                    let y = if dim == 2 { lo + (hi - lo) * rng.random::<f64>() } else { 0.0 };
                    return Point([x, y, 0.0]);
                }
                let node = self.sample_node(rng);
                let h = self.cell_sides[node];
                let c = self.nodes[node].0;
                let x = (c[0] + h * (rng.random::<f64>() - 0.5)).clamp(lo, hi);
                let y = if dim == 2 { (c[1] + h * (rng.random::<f64>() - 0.5)).clamp(lo, hi) } else { 0.0 };
                Point([x, y, 0.0])
            }
        }
    }

    /// Index of a node drawn with probability equal to its weight.
    pub fn sample_node<R: Rng + ?Sized>(&self, rng: &mut R) -> usize {
        let mut u: f64 = rng.random();
        for (i, w) in self.weights.iter().enumerate() {
            if u < *w {
                return i;
            }
            u -= w;
        }
        self.weights.len() - 1
    }

    /// Unnormalized reference density of a box, if one was supplied.
    pub fn density_field(&self) -> Option<&ScalarField> {
        self.density.as_ref()
    }

    /// Largest value of the normalized reference density over the grid.
    pub fn max_reference_density(&self) -> f64 {
        self.max_density
    }

    /// Quadrature integral of `f` against the reference measure.
    pub fn integrate(&self, f: impl Fn(&Point) -> f64) -> f64 {
        self.nodes.iter().zip(&self.weights).map(|(p, w)| w * f(p)).sum()
    }

    pub fn check_point(&self, index: usize, p: &Point) -> Result<()> {
        if self.contains(p) {
            Ok(())
        } else {
            Err(Error::OffSpacePoint { index })
        }
    }
}

fn aliasing(order: usize, resolution: usize) -> Error {
    Error::InvalidSpace(format!(
        "basis order {order} aliases on {resolution} nodes per axis; need order < resolution/2"
    ))
}

fn normalize_weights(w: &mut [f64]) {
    let total: f64 = w.iter().sum();
    for x in w.iter_mut() {
        *x /= total;
    }
}

pub(crate) fn wrap_unit(d: f64) -> f64 {
    let d = rem_euclid(d, 1.0);
    if d > 0.5 {
        d - 1.0
    } else {
        d
    }
}

fn reflect(x: f64, lo: f64, hi: f64) -> f64 {
    let width = hi - lo;
    let t = rem_euclid(x - lo, 2.0 * width);
    let t = if t > width { 2.0 * width - t } else { t };
    lo + t
}

pub(crate) fn dot3(a: &[f64; 3], b: &[f64; 3]) -> f64 {
    a[0] * b[0] + a[1] * b[1] + a[2] * b[2]
}

pub(crate) fn sub3(a: &[f64; 3], b: &[f64; 3]) -> [f64; 3] {
    [a[0] - b[0], a[1] - b[1], a[2] - b[2]]
}

pub(crate) fn cross3(a: &[f64; 3], b: &[f64; 3]) -> [f64; 3] {
    [a[1] * b[2] - a[2] * b[1], a[2] * b[0] - a[0] * b[2], a[0] * b[1] - a[1] * b[0]]
}

pub(crate) fn norm3(a: &[f64; 3]) -> f64 {
    dot3(a, a).sqrt()
}

fn euclid(a: &[f64; 3], b: &[f64; 3]) -> f64 {
    norm3(&sub3(a, b))
}

fn tangent_frame(p: &[f64; 3]) -> ([f64; 3], [f64; 3]) {
    let helper = if p[0].abs() < 0.9 { [1.0, 0.0, 0.0] } else { [0.0, 1.0, 0.0] };
    let e1 = cross3(p, &helper);
    let n = norm3(&e1);
    let e1 = [e1[0] / n, e1[1] / n, e1[2] / n];
    let e2 = cross3(p, &e1);
    (e1, e2)
}

/// FNV-1a, used for grid fingerprints and cache headers.
#[derive(Clone, Copy)]
pub struct Fnv(u64);

impl Default for Fnv {
    fn default() -> Self {
        Fnv(0xcbf2_9ce4_8422_2325)
    }
}

impl Fnv {
    pub fn write(&mut self, bytes: &[u8]) {
        for b in bytes {
            self.0 ^= *b as u64;
            self.0 = self.0.wrapping_mul(0x0100_0000_01b3);
        }
    }

    pub fn finish(&self) -> u64 {
        self.0
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::rng::stream;

    #[test]
    fn circle_spectrum() {
        let s = Space::build(SpaceSpec::circle(256, 64)).unwrap();
        let b = s.basis().unwrap();
        let eig: Vec<f64> = (0..5).map(|k| b.eigenvalue(k)).collect();
        assert_eq!(eig, vec![0.0, 1.0, 1.0, 4.0, 4.0]);
        assert_eq!(b.len(), 129);
        assert!((s.weights().iter().sum::<f64>() - 1.0).abs() < 1e-12);
    }

    #[test]
    fn torus_weights_uniform() {
        let s = Space::build(SpaceSpec::torus(64, 16)).unwrap();
        assert_eq!(s.len(), 4096);
        assert!(s.weights().iter().all(|w| (w - 1.0 / 4096.0).abs() < 1e-18));
        assert!((s.weights().iter().sum::<f64>() - 1.0).abs() < 1e-12);
    }

    #[test]
    fn aliasing_guard() {
        assert!(Space::build(SpaceSpec::circle(16, 8)).is_err());
        assert!(Space::build(SpaceSpec::circle(16, 7)).is_ok());
        assert!(Space::build(SpaceSpec::circle(4, 1)).is_err());
        assert!(Space::build(SpaceSpec::sphere(1, 3)).is_err());
    }

    #[test]
    fn box_density_weights() {
        let spec = SpaceSpec::interval(0.0, 1.0, 100).with_density(ScalarField::new("x+1", |p| p.0[0] + 1.0));
        let s = Space::build(spec).unwrap();
        let mean = s.integrate(|p| p.0[0]);
        // (1/3 + 1/2) / (3/2)
        assert!((mean - 5.0 / 9.0).abs() < 1e-4);
        assert!((s.reference_density(&Point::line(0.5)) - 1.0).abs() < 1e-12);
    }

    #[test]
    fn geodesics_and_chords() {
        let c = Space::build(SpaceSpec::circle(64, 8)).unwrap();
        let a = Point::angle(0.1);
        let b = Point::angle(TAU - 0.1);
        assert!((c.geodesic(&a, &b) - 0.2).abs() < 1e-12);
        assert!((c.chord(&Point::angle(0.0), &Point::angle(PI)) - 2.0).abs() < 1e-12);
        let t = Space::build(SpaceSpec::torus(16, 4)).unwrap();
        assert!((t.geodesic(&Point::torus(0.05, 0.0), &Point::torus(0.95, 0.0)) - 0.1).abs() < 1e-12);
        let s = Space::build(SpaceSpec::sphere(2, 2)).unwrap();
        let n = Point::unit(0.0, 0.0, 1.0);
        let e = Point::unit(1.0, 0.0, 0.0);
        assert!((s.geodesic(&n, &e) - PI / 2.0).abs() < 1e-12);
    }

    #[test]
    fn steps_stay_on_space() {
        let mut rng = stream(1, 0);
        for spec in [
            SpaceSpec::circle(32, 4),
            SpaceSpec::torus(16, 4),
            SpaceSpec::sphere(2, 2),
            SpaceSpec::square(-1.0, 1.0, 16),
        ] {
            let s = Space::build(spec).unwrap();
            let mut p = s.sample_reference(&mut rng);
            for _ in 0..1000 {
                p = s.gaussian_step(&p, 0.7, &mut rng);
                assert!(s.contains(&p), "{:?} {:?}", s.kind(), p);
            }
        }
    }

    #[test]
    fn log_chord_gradient_matches_difference() {
        let s = Space::build(SpaceSpec::sphere(2, 2)).unwrap();
        let p = Point::unit(0.3, -0.2, 0.9);
        let q = Point::unit(-0.5, 0.4, 0.1);
        let g = s.log_chord_gradient(&p, &q);
        let (e1, _) = tangent_frame(&p.0);
        let h = 1e-6;
        let fwd = s.retract(&p, [h * e1[0], h * e1[1], h * e1[2]]);
        let bwd = s.retract(&p, [-h * e1[0], -h * e1[1], -h * e1[2]]);
        let fd = (s.chord(&fwd, &q).ln() - s.chord(&bwd, &q).ln()) / (2.0 * h);
        assert!((fd - dot3(&g, &e1)).abs() < 1e-6);

        let c = Space::build(SpaceSpec::circle(32, 4)).unwrap();
        let p = Point::angle(1.0);
        let q = Point::angle(2.5);
        let fd = (c.chord(&Point::angle(1.0 + h), &q).ln() - c.chord(&Point::angle(1.0 - h), &q).ln()) / (2.0 * h);
        assert!((fd - c.log_chord_gradient(&p, &q)[0]).abs() < 1e-6);
    }
}
