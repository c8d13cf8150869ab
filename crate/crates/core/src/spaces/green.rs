//! Spectral Green functions of the Laplace-Beltrami operator with a
//! background charge.

use core::f64::consts::{PI, TAU};

use super::{Fnv, Point, Space, SpaceKind};
use crate::math::legendre_series;
use crate::prelude::*;
use crate::{Error, Result};

/// Derived coefficients of a [`GreenModel`]; see [`GreenModel::tables`].
#[derive(Clone, Debug, PartialEq)]
pub struct GreenTables {
    pub order: usize,
    pub phi_coeffs: Vec<(usize, f64)>,
    pub offset: f64,
    pub phi_max: f64,
    pub lower_bound: f64,
}

/// Density of the background measure with respect to the reference
/// measure, sampled on the grid and normalized to total mass 1. Signed
/// densities are accepted.
#[derive(Clone, Debug)]
pub struct BackgroundCharge {
    density: Vec<f64>,
    label: String,
    uniform: bool,
    hash: u64,
}

impl BackgroundCharge {
    pub fn uniform(space: &Space) -> Self {
        let density = vec![1.0; space.len()];
        BackgroundCharge { hash: hash_values(&density), density, label: "uniform".into(), uniform: true }
    }

    pub fn from_field(space: &Space, label: impl Into<String>, f: impl Fn(&Point) -> f64) -> Result<Self> {
        let values = space.nodes().iter().map(f).collect();
        Self::from_nodes(space, label, values)
    }

    pub fn from_nodes(space: &Space, label: impl Into<String>, values: Vec<f64>) -> Result<Self> {
        if values.len() != space.len() {
            return Err(Error::InvalidMeasure(format!(
                "background density has {} values for {} nodes",
                values.len(),
                space.len()
            )));
        }
        if values.iter().any(|v| !v.is_finite()) {
            return Err(Error::InvalidMeasure("background density is not finite".into()));
        }
        let total: f64 = values.iter().zip(space.weights()).map(|(v, w)| v * w).sum();
        if !(total.abs() > 1e-12) {
            return Err(Error::InvalidMeasure("background density has zero total mass".into()));
        }
        let density: Vec<f64> = values.iter().map(|v| v / total).collect();
        let uniform = density.iter().all(|d| (d - 1.0).abs() < 1e-14);
        Ok(BackgroundCharge { hash: hash_values(&density), density, label: label.into(), uniform })
    }

    pub fn density(&self) -> &[f64] {
        &self.density
    }

    pub fn label(&self) -> &str {
        &self.label
    }

    pub fn is_uniform(&self) -> bool {
        self.uniform
    }

    /// Hash of the normalized node values, used to key cached Green tables.
    pub fn hash(&self) -> u64 {
        self.hash
    }

    pub fn total_mass(&self, space: &Space) -> f64 {
        self.density.iter().zip(space.weights()).map(|(d, w)| d * w).sum()
    }
}

fn hash_values(values: &[f64]) -> u64 {
    let mut h = Fnv::default();
    for v in values {
        h.write(&v.to_bits().to_le_bytes());
    }
    h.finish()
}

/// Smooth test function given by coefficients in the space's basis.
#[derive(Clone, Debug, PartialEq)]
pub struct TestFunction {
    pub coeffs: Vec<f64>,
}

impl TestFunction {
    pub fn basis_function(k: usize) -> Self {
        let mut coeffs = vec![0.0; k + 1];
        coeffs[k] = 1.0;
        TestFunction { coeffs }
    }

    pub fn constant(value: f64) -> Self {
        TestFunction { coeffs: vec![value] }
    }
}

/// Truncated spectral Green function
/// `G(x, y) = H(x, y) - phi(x) - phi(y) + c`, where
/// `H = sum_k phi_k(x) phi_k(y) / lambda_k` over the nonconstant modes up to
/// the truncation order, `phi = integral of H(., y) against the background`,
/// and `c = integral of phi against the background` makes every
/// `G(x, .)` integrate to zero against the background.
#[derive(Clone, Debug)]
pub struct GreenModel {
    space: Arc<Space>,
    charge: BackgroundCharge,
    order: usize,
    phi_coeffs: Vec<(usize, f64)>,
    offset: f64,
    phi_max: f64,
    lower_bound: f64,
}

impl GreenModel {
    pub fn new(space: Arc<Space>, charge: BackgroundCharge, order: usize) -> Result<Self> {
        let basis =
            space.basis().ok_or_else(|| Error::InvalidSpace("Green functions need a closed manifold".into()))?;
        if order < 1 || order > basis.order() {
            return Err(Error::InvalidParameter(format!(
                "Green truncation order {order} must lie in 1..={}",
                basis.order()
            )));
        }
        if charge.density.len() != space.len() {
            return Err(Error::MismatchedSpaces);
        }
        let mut model = GreenModel {
            space: space.clone(),
            charge,
            order,
            phi_coeffs: Vec::new(),
            offset: 0.0,
            phi_max: 0.0,
            lower_bound: 0.0,
        };
        if !model.charge.uniform {
            let hat = basis.analyze(space.nodes(), space.weights(), &model.charge.density);
            model.phi_coeffs = (1..basis.len())
                .filter(|&k| basis.order_of(k) <= order)
                .map(|k| (k, hat[k] / basis.eigenvalue(k)))
                .filter(|(_, c)| *c != 0.0)
                .collect();
            let phi_nodes: Vec<f64> = space.nodes().iter().map(|p| model.phi(p)).collect();
            model.offset =
                phi_nodes.iter().zip(space.weights()).zip(&model.charge.density).map(|((f, w), l)| f * w * l).sum();
            model.phi_max = phi_nodes.iter().copied().fold(f64::NEG_INFINITY, f64::max);
        }
        model.lower_bound = model.min_h() - 2.0 * model.phi_max + model.offset;
        Ok(model)
    }

    /// Derived coefficients, for external caching.
    pub fn tables(&self) -> GreenTables {
        GreenTables {
            order: self.order,
            phi_coeffs: self.phi_coeffs.clone(),
            offset: self.offset,
            phi_max: self.phi_max,
            lower_bound: self.lower_bound,
        }
    }

    /// Reassembles a model from cached coefficients. The charge must be the
    /// one the tables were built from; callers key caches by
    /// [`BackgroundCharge::hash`].
    pub fn from_tables(space: Arc<Space>, charge: BackgroundCharge, t: GreenTables) -> Result<Self> {
        let basis =
            space.basis().ok_or_else(|| Error::InvalidSpace("Green functions need a closed manifold".into()))?;
        if t.order < 1 || t.order > basis.order() || charge.density.len() != space.len() {
            return Err(Error::InvalidParameter("cached Green tables do not fit the space".into()));
        }
        if t.phi_coeffs.iter().any(|(k, c)| *k >= basis.len() || basis.order_of(*k) > t.order || !c.is_finite()) {
            return Err(Error::InvalidParameter("cached Green coefficients are out of range".into()));
        }
        Ok(GreenModel {
            space,
            charge,
            order: t.order,
            phi_coeffs: t.phi_coeffs,
            offset: t.offset,
            phi_max: t.phi_max,
            lower_bound: t.lower_bound,
        })
    }

    pub fn space(&self) -> &Arc<Space> {
        &self.space
    }

    pub fn charge(&self) -> &BackgroundCharge {
        &self.charge
    }

    pub fn order(&self) -> usize {
        self.order
    }

    /// Lower bound of `G` over distinct grid pairs, fixed at build time.
    pub fn lower_bound(&self) -> f64 {
        self.lower_bound
    }

    /// Additive constant `c` of the construction.
    pub fn offset(&self) -> f64 {
        self.offset
    }

    /// Spectral coefficients `(basis index, value)` of `phi`.
    pub fn phi_coeffs(&self) -> &[(usize, f64)] {
        &self.phi_coeffs
    }

    /// `phi(x)`, identically zero for the uniform background.
    pub fn phi(&self, x: &Point) -> f64 {
        if self.phi_coeffs.is_empty() {
            return 0.0;
        }
        let mut buf = Vec::new();
        self.space.basis().expect("manifold").values_at(x, &mut buf);
        self.phi_coeffs.iter().map(|(k, c)| c * buf[*k]).sum()
    }

    /// Truncated spectral Green function of the uniform background.
    pub fn h(&self, x: &Point, y: &Point) -> f64 {
        match self.space.kind() {
            SpaceKind::Circle => circle_h(self.order, (x.0[0] - y.0[0]).abs()),
            SpaceKind::Torus => torus_h(self.order, x.0[0] - y.0[0], x.0[1] - y.0[1]),
            SpaceKind::Sphere => {
                let t = x.0[0] * y.0[0] + x.0[1] * y.0[1] + x.0[2] * y.0[2];
                sphere_h(self.order, t)
            }
            SpaceKind::Box { .. } => unreachable!(),
        }
    }

    /// `G(x, y)`; the diagonal is reported as a singularity.
    pub fn evaluate(&self, x: &Point, y: &Point) -> Result<f64> {
        if x == y || self.space.geodesic(x, y) == 0.0 {
            return Err(Error::DiagonalSingularity);
        }
        Ok(self.evaluate_truncated(x, y))
    }

    /// Value of the truncated series, which stays finite on the diagonal.
    pub fn evaluate_truncated(&self, x: &Point, y: &Point) -> f64 {
        if self.phi_coeffs.is_empty() {
            return self.h(x, y);
        }
        self.h(x, y) - (self.phi(x) + self.phi(y)) + self.offset
    }

    /// `G(x, y)` for `y` ranging over all grid nodes.
    pub fn row(&self, x: &Point) -> Vec<f64> {
        let phi_x = self.phi(x);
        self.space
            .nodes()
            .iter()
            .map(|y| {
                if self.phi_coeffs.is_empty() {
                    self.h(x, y)
                } else {
                    self.h(x, y) - (phi_x + self.phi(y)) + self.offset
                }
            })
            .collect()
    }

    /// Quadrature value of `integral G(x, .) dLambda`, zero by construction.
    pub fn normalization_residual(&self, x: &Point) -> f64 {
        let row = self.row(x);
        row.iter().zip(self.space.weights()).zip(&self.charge.density).map(|((g, w), l)| g * w * l).sum()
    }

    /// `|integral G_x Laplacian(f) dpi + f(x) - integral f dLambda|` by quadrature.
    pub fn identity_residual(&self, f: &TestFunction, x: &Point) -> Result<f64> {
        let basis = self.space.basis().expect("manifold");
        if f.coeffs.len() > basis.len() {
            if let Some(k) = (basis.len()..f.coeffs.len()).find(|&k| f.coeffs[k] != 0.0) {
                return Err(Error::UnresolvedTestFunction { index: k, order: usize::MAX });
            }
        }
        for (k, c) in f.coeffs.iter().enumerate().take(basis.len()) {
            if *c != 0.0 && basis.order_of(k) > self.order {
                return Err(Error::UnresolvedTestFunction { index: k, order: basis.order_of(k) });
            }
        }
        let lap: Vec<f64> =
            f.coeffs.iter().enumerate().take(basis.len()).map(|(k, c)| -basis.eigenvalue(k) * c).collect();
        let row = self.row(x);
        let mut buf = Vec::new();
        let mut conv = 0.0;
        let mut mass = 0.0;
        for (j, p) in self.space.nodes().iter().enumerate() {
            basis.values_at(p, &mut buf);
            let w = self.space.weights()[j];
            let lf: f64 = lap.iter().zip(&buf).map(|(a, b)| a * b).sum();
            let fv: f64 = f.coeffs.iter().zip(&buf).map(|(a, b)| a * b).sum();
            conv += w * row[j] * lf;
            mass += w * fv * self.charge.density[j];
        }
        let fx = basis.synthesize(&f.coeffs, x);
        Ok((conv + fx - mass).abs())
    }

    fn min_h(&self) -> f64 {
        let space = &self.space;
        let n = space.resolution();
        match space.kind() {
            SpaceKind::Circle => {
                if n / 2 * self.order <= 40_000_000 {
                    (1..=n / 2).map(|j| circle_h(self.order, TAU * j as f64 / n as f64)).fold(f64::INFINITY, f64::min)
                } else {
                    // the full series has minimum -pi^2/6 and the tail is at most 2/K
                    -PI * PI / 6.0 - 2.0 / self.order as f64
                }
            }
            SpaceKind::Torus => {
                let h = 1.0 / n as f64;
                let mut best = f64::INFINITY;
                for i in 0..=n / 2 {
                    for j in 0..=n / 2 {
                        if i + j > 0 {
                            best = best.min(torus_h(self.order, i as f64 * h, j as f64 * h));
                        }
                    }
                }
                best
            }
            SpaceKind::Sphere => {
                (0..=4000).map(|i| sphere_h(self.order, -1.0 + 2.0 * i as f64 / 4000.0)).fold(f64::INFINITY, f64::min)
            }
            SpaceKind::Box { .. } => unreachable!(),
        }
    }
}

/// `sum_{m=1}^{K} 2 cos(m d) / m^2`.
pub fn circle_h(order: usize, d: f64) -> f64 {
    let (s1, c1) = d.sin_cos();
    let (mut s, mut c) = (0.0, 1.0);
    let mut acc = 0.0;
    for m in 1..=order {
        let next_c = c * c1 - s * s1;
        s = s * c1 + c * s1;
        c = next_c;
        if m % 64 == 0 {
            let (ts, tc) = (m as f64 * d).sin_cos();
            s = ts;
            c = tc;
        }
        let mf = m as f64;
        acc += 2.0 * c / (mf * mf);
    }
    acc
}

/// `sum over 0 < max(|m|, |n|) <= K of exp(2 pi i (m du + n dv)) / (4 pi^2 (m^2 + n^2))`.
pub fn torus_h(order: usize, du: f64, dv: f64) -> f64 {
    let du = super::wrap_unit(du).abs();
    let dv = super::wrap_unit(dv).abs();
    let table = |d: f64| -> Vec<f64> {
        (0..=order).map(|m| if m == 0 { 1.0 } else { 2.0 * (TAU * m as f64 * d).cos() }).collect()
    };
    let a = table(du);
    let b = table(dv);
    let mut acc = 0.0;
    for (m, am) in a.iter().enumerate() {
        for (n, bn) in b.iter().enumerate() {
            if m + n == 0 {
                continue;
            }
            acc += am * bn / (TAU * TAU * (m * m + n * n) as f64);
        }
    }
    acc
}

/// `sum_{l=1}^{K} (2l + 1) P_l(t) / (l (l + 1))`.
pub fn sphere_h(order: usize, t: f64) -> f64 {
    let mut p = Vec::with_capacity(order + 1);
    legendre_series(order, t.clamp(-1.0, 1.0), &mut p);
    (1..=order)
        .map(|l| {
            let lf = l as f64;
            (2.0 * lf + 1.0) * p[l] / (lf * (lf + 1.0))
        })
        .sum()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::spaces::SpaceSpec;

    #[test]
    fn circle_identity_and_symmetry() {
        let s = Space::build(SpaceSpec::circle(64, 16)).unwrap();
        let g = GreenModel::new(s.clone(), BackgroundCharge::uniform(&s), 16).unwrap();
        let x = Point::angle(0.37);
        assert!(g.identity_residual(&TestFunction::basis_function(1), &x).unwrap() < 1e-12);
        assert_eq!(g.identity_residual(&TestFunction::constant(1.0), &x).unwrap(), 0.0);
        let y = Point::angle(2.1);
        assert_eq!(g.evaluate(&x, &y).unwrap().to_bits(), g.evaluate(&y, &x).unwrap().to_bits());
        assert!(matches!(g.evaluate(&x, &x), Err(Error::DiagonalSingularity)));
    }

    #[test]
    fn unresolved_test_function() {
        let s = Space::build(SpaceSpec::circle(64, 16)).unwrap();
        let g = GreenModel::new(s.clone(), BackgroundCharge::uniform(&s), 4).unwrap();
        let err = g.identity_residual(&TestFunction::basis_function(9), &Point::angle(0.0));
        assert!(matches!(err, Err(Error::UnresolvedTestFunction { index: 9, order: 5 })));
    }

    #[test]
    fn sphere_closed_form_limit() {
        // the full series equals -log((1 - t)/2) - 1
        let t: f64 = 0.3;
        let approx = sphere_h(4000, t);
        assert!((approx - (-((1.0 - t) / 2.0).ln() - 1.0)).abs() < 1e-3);
    }
}
