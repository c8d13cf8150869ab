//! Real spherical harmonics normalized against the uniform probability
//! measure on the unit sphere.

use core::f64::consts::SQRT_2;

use crate::prelude::*;

/// Number of real harmonics of degree at most `degree`.
pub fn harmonic_count(degree: usize) -> usize {
    (degree + 1) * (degree + 1)
}

/// Flat index of `Y_{l,m}`, `-l <= m <= l`.
pub fn harmonic_index(l: usize, m: i64) -> usize {
    l * l + (l as i64 + m) as usize
}

/// Degree and order of a flat harmonic index.
pub fn harmonic_degree_order(index: usize) -> (usize, i64) {
    let l = (index as f64).sqrt() as usize;
    let l = if (l + 1) * (l + 1) <= index {
        l + 1
    } else if l * l > index {
        l - 1
    } else {
        l
    };
    (l, index as i64 - (l * l) as i64 - l as i64)
}

/// Writes `Y_{l,m}(p)` for all `l <= degree` into `out`, ordered by
/// [`harmonic_index`]. Each function has unit mean square under the uniform
/// probability measure.
pub fn real_harmonics(degree: usize, p: &[f64; 3], out: &mut Vec<f64>) {
    let n = harmonic_count(degree);
    out.clear();
    out.resize(n, 0.0);
    let z = p[2].clamp(-1.0, 1.0);
    let s = (1.0 - z * z).max(0.0).sqrt();
    let phi = p[1].atan2(p[0]);
    // normalized associated Legendre values, column by column in m
    let mut pmm = 1.0;
    for m in 0..=degree {
        if m > 0 {
            let mf = m as f64;
            pmm *= ((2.0 * mf + 1.0) / (2.0 * mf)).sqrt() * s;
        }
        let (sin_m, cos_m) = (m as f64 * phi).sin_cos();
        let mut store = |l: usize, value: f64| {
            if m == 0 {
                out[harmonic_index(l, 0)] = value;
            } else {
                out[harmonic_index(l, m as i64)] = SQRT_2 * value * cos_m;
                out[harmonic_index(l, -(m as i64))] = SQRT_2 * value * sin_m;
            }
        };
        store(m, pmm);
        if m == degree {
            break;
        }
        let mut prev2 = pmm;
        let mut prev = (2.0 * m as f64 + 3.0).sqrt() * z * pmm;
        store(m + 1, prev);
        for l in (m + 2)..=degree {
            let lf = l as f64;
            let mf = m as f64;
            let a = ((4.0 * lf * lf - 1.0) / (lf * lf - mf * mf)).sqrt();
            let b = ((2.0 * lf + 1.0) * (lf - 1.0 - mf) * (lf - 1.0 + mf) / ((2.0 * lf - 3.0) * (lf * lf - mf * mf)))
                .sqrt();
            let cur = a * z * prev - b * prev2;
            store(l, cur);
            prev2 = prev;
            prev = cur;
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::math::legendre_series;

    #[test]
    fn index_round_trip() {
        for l in 0..10 {
            for m in -(l as i64)..=(l as i64) {
                assert_eq!(harmonic_degree_order(harmonic_index(l, m)), (l, m));
            }
        }
    }

    #[test]
    fn addition_theorem() {
        let a = [0.48, -0.6, 0.64];
        let b = {
            let v: [f64; 3] = [-0.3, 0.2, 0.9];
            let r = (v[0] * v[0] + v[1] * v[1] + v[2] * v[2]).sqrt();
            [v[0] / r, v[1] / r, v[2] / r]
        };
        let mut ya = Vec::new();
        let mut yb = Vec::new();
        real_harmonics(12, &a, &mut ya);
        real_harmonics(12, &b, &mut yb);
        let t = a[0] * b[0] + a[1] * b[1] + a[2] * b[2];
        let mut p = Vec::new();
        legendre_series(12, t, &mut p);
        for l in 0..=12usize {
            let s: f64 = (l * l..(l + 1) * (l + 1)).map(|k| ya[k] * yb[k]).sum();
            assert!((s - (2 * l + 1) as f64 * p[l]).abs() < 1e-10, "l={l}");
        }
    }
}
