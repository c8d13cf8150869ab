//! Laplace eigenfunction bases, orthonormal for the reference measure.

use core::f64::consts::{SQRT_2, TAU};

use super::harmonics::{harmonic_count, harmonic_degree_order, real_harmonics};
use super::{Point, SpaceKind};
use crate::prelude::*;

/// Real eigenbasis of the Laplace-Beltrami operator, ordered by eigenvalue.
///
/// * circle (circumference `2pi`): `1, sqrt2 cos(m t), sqrt2 sin(m t)`, eigenvalue `m^2`
/// * torus (period 1): products of the one-dimensional functions at
///   frequency `2pi m`, eigenvalue `4pi^2 (m^2 + n^2)`
/// * sphere: real harmonics `Y_{l,m}`, eigenvalue `l (l + 1)`
///
/// Eigenvalues are reported with the positive sign; `Laplacian phi_k = -lambda_k phi_k`.
#[derive(Clone, Debug)]
pub enum SpectralBasis {
    Fourier { modes: usize },
    Torus { modes: usize, pairs: Vec<(usize, usize)> },
    Spherical { degree: usize },
}

fn mode_1d(i: usize) -> usize {
    i.div_ceil(2)
}

fn fourier_1d(modes: usize, theta: f64, out: &mut [f64]) {
    out[0] = 1.0;
    let (s1, c1) = theta.sin_cos();
    let (mut s, mut c) = (0.0, 1.0);
    for m in 1..=modes {
        let next_c = c * c1 - s * s1;
        let next_s = s * c1 + c * s1;
        c = next_c;
        s = next_s;
        // refresh occasionally so the rotation does not drift
        if m % 64 == 0 {
            let (ts, tc) = (m as f64 * theta).sin_cos();
            s = ts;
            c = tc;
        }
        out[2 * m - 1] = SQRT_2 * c;
        out[2 * m] = SQRT_2 * s;
    }
}

impl SpectralBasis {
    pub(crate) fn new(kind: SpaceKind, order: usize) -> Self {
        match kind {
            SpaceKind::Circle => SpectralBasis::Fourier { modes: order },
            SpaceKind::Torus => {
                let side = 2 * order + 1;
                let mut pairs: Vec<(usize, usize)> = (0..side).flat_map(|i| (0..side).map(move |j| (i, j))).collect();
                pairs.sort_by_key(|&(i, j)| {
                    let (a, b) = (mode_1d(i), mode_1d(j));
                    (a * a + b * b, i, j)
                });
                SpectralBasis::Torus { modes: order, pairs }
            }
            SpaceKind::Sphere => SpectralBasis::Spherical { degree: order },
            SpaceKind::Box { .. } => unreachable!("boxes carry no spectral basis"),
        }
    }

    pub fn len(&self) -> usize {
        match self {
            SpectralBasis::Fourier { modes } => 2 * modes + 1,
            SpectralBasis::Torus { pairs, .. } => pairs.len(),
            SpectralBasis::Spherical { degree } => harmonic_count(*degree),
        }
    }

    pub fn is_empty(&self) -> bool {
        false
    }

    /// Highest mode (circle, torus per axis) or degree (sphere).
    pub fn order(&self) -> usize {
        match self {
            SpectralBasis::Fourier { modes } | SpectralBasis::Torus { modes, .. } => *modes,
            SpectralBasis::Spherical { degree } => *degree,
        }
    }

    /// Truncation order at which function `k` first appears.
    pub fn order_of(&self, k: usize) -> usize {
        match self {
            SpectralBasis::Fourier { .. } => mode_1d(k),
            SpectralBasis::Torus { pairs, .. } => {
                let (i, j) = pairs[k];
                mode_1d(i).max(mode_1d(j))
            }
            SpectralBasis::Spherical { .. } => harmonic_degree_order(k).0,
        }
    }

    pub fn eigenvalue(&self, k: usize) -> f64 {
        match self {
            SpectralBasis::Fourier { .. } => {
                let m = mode_1d(k) as f64;
                m * m
            }
            SpectralBasis::Torus { pairs, .. } => {
                let (i, j) = pairs[k];
                let (a, b) = (mode_1d(i) as f64, mode_1d(j) as f64);
                TAU * TAU * (a * a + b * b)
            }
            SpectralBasis::Spherical { .. } => {
                let l = harmonic_degree_order(k).0 as f64;
                l * (l + 1.0)
            }
        }
    }

    /// Upper bound of `|phi_k|`.
    pub fn sup_bound(&self, k: usize) -> f64 {
        match self {
            SpectralBasis::Fourier { .. } => {
                if k == 0 {
                    1.0
                } else {
                    SQRT_2
                }
            }
            SpectralBasis::Torus { pairs, .. } => {
                let (i, j) = pairs[k];
                let a = if i == 0 { 1.0 } else { SQRT_2 };
                let b = if j == 0 { 1.0 } else { SQRT_2 };
                a * b
            }
            // addition theorem: sum over m of Y_{l,m}^2 equals 2l + 1
            SpectralBasis::Spherical { .. } => {
                let l = harmonic_degree_order(k).0 as f64;
                (2.0 * l + 1.0).sqrt()
            }
        }
    }

    /// Upper bound of the Lipschitz constant of `phi_k` for the geodesic
    /// distance.
    pub fn lipschitz_bound(&self, k: usize) -> f64 {
        match self {
            SpectralBasis::Fourier { .. } => SQRT_2 * mode_1d(k) as f64,
            SpectralBasis::Torus { pairs, .. } => {
                let (i, j) = pairs[k];
                2.0 * TAU * (mode_1d(i) + mode_1d(j)) as f64
            }
            // sum over m of |grad Y_{l,m}|^2 equals (2l + 1) l (l + 1)
            SpectralBasis::Spherical { .. } => {
                let l = harmonic_degree_order(k).0 as f64;
                ((2.0 * l + 1.0) * l * (l + 1.0)).sqrt()
            }
        }
    }

    pub fn eigenvalues(&self) -> Vec<f64> {
        (0..self.len()).map(|k| self.eigenvalue(k)).collect()
    }

    /// All basis functions evaluated at `p`.
    pub fn values_at(&self, p: &Point, out: &mut Vec<f64>) {
        match self {
            SpectralBasis::Fourier { modes } => {
                out.clear();
                out.resize(2 * modes + 1, 0.0);
                fourier_1d(*modes, p.0[0], out);
            }
            SpectralBasis::Torus { modes, pairs } => {
                let side = 2 * modes + 1;
                let mut a = vec![0.0; side];
                let mut b = vec![0.0; side];
                fourier_1d(*modes, TAU * p.0[0], &mut a);
                fourier_1d(*modes, TAU * p.0[1], &mut b);
                out.clear();
                out.extend(pairs.iter().map(|&(i, j)| a[i] * b[j]));
            }
            SpectralBasis::Spherical { degree } => real_harmonics(*degree, &p.0, out),
        }
    }

    /// `sum_k c_k phi_k(p)`; missing trailing coefficients count as zero.
    pub fn synthesize(&self, coeffs: &[f64], p: &Point) -> f64 {
        let mut buf = Vec::new();
        self.values_at(p, &mut buf);
        coeffs.iter().zip(&buf).map(|(c, v)| c * v).sum()
    }

    /// Quadrature coefficients `c_k = sum_j w_j f_j phi_k(x_j)`.
    pub fn analyze(&self, nodes: &[Point], weights: &[f64], values: &[f64]) -> Vec<f64> {
        let mut coeffs = vec![0.0; self.len()];
        let mut buf = Vec::new();
        for ((p, w), f) in nodes.iter().zip(weights).zip(values) {
            if *f == 0.0 {
                continue;
            }
            self.values_at(p, &mut buf);
            let s = w * f;
            for (c, v) in coeffs.iter_mut().zip(&buf) {
                *c += s * v;
            }
        }
        coeffs
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::spaces::{Space, SpaceSpec};

    fn max_gram_error(space: &Space) -> f64 {
        let basis = space.basis().unwrap();
        let n = basis.len();
        let mut gram = vec![0.0; n * n];
        let mut buf = Vec::new();
        for (p, w) in space.nodes().iter().zip(space.weights()) {
            basis.values_at(p, &mut buf);
            for i in 0..n {
                let s = w * buf[i];
                for j in 0..n {
                    gram[i * n + j] += s * buf[j];
                }
            }
        }
        let mut worst: f64 = 0.0;
        for i in 0..n {
            for j in 0..n {
                let target = if i == j { 1.0 } else { 0.0 };
                worst = worst.max((gram[i * n + j] - target).abs());
            }
        }
        worst
    }

    #[test]
    fn circle_and_torus_orthonormal() {
        assert!(max_gram_error(&Space::build(SpaceSpec::circle(64, 20)).unwrap()) < 1e-12);
        assert!(max_gram_error(&Space::build(SpaceSpec::torus(16, 4)).unwrap()) < 1e-12);
    }

    #[test]
    fn sphere_gram_level_four() {
        let s = Space::build(SpaceSpec::sphere(4, 12)).unwrap();
        assert_eq!(s.len(), 2562);
        assert!(s.weights().iter().all(|w| *w > 0.0));
        assert!(max_gram_error(&s) < 1e-3);
    }

    #[test]
    fn eigenvalues_nondecreasing_from_zero() {
        for spec in [SpaceSpec::circle(32, 8), SpaceSpec::torus(16, 5), SpaceSpec::sphere(2, 3)] {
            let s = Space::build(spec).unwrap();
            let e = s.basis().unwrap().eigenvalues();
            assert_eq!(e[0], 0.0);
            assert!(e.windows(2).all(|w| w[0] <= w[1]));
            // the constant function comes first
            let mut buf = Vec::new();
            s.basis().unwrap().values_at(&s.nodes()[3], &mut buf);
            assert_eq!(buf[0], 1.0);
        }
    }
}
