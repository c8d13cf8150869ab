//! Icosahedral sphere grids with moment-corrected quadrature weights.

use alloc::collections::BTreeMap;
use core::f64::consts::PI;

use nalgebra::{DMatrix, DVector};

use super::harmonics::{harmonic_count, real_harmonics};
use super::{cross3, dot3};
use crate::prelude::*;
use crate::{Error, Result};

/// Node count of subdivision level `level`: `10 * 4^level + 2`.
pub fn node_count(level: usize) -> usize {
    10 * 4usize.pow(level as u32) + 2
}

fn base() -> (Vec<[f64; 3]>, Vec<[usize; 3]>) {
    let t = (1.0 + 5f64.sqrt()) / 2.0;
    let raw = [
        [-1.0, t, 0.0],
        [1.0, t, 0.0],
        [-1.0, -t, 0.0],
        [1.0, -t, 0.0],
        [0.0, -1.0, t],
        [0.0, 1.0, t],
        [0.0, -1.0, -t],
        [0.0, 1.0, -t],
        [t, 0.0, -1.0],
        [t, 0.0, 1.0],
        [-t, 0.0, -1.0],
        [-t, 0.0, 1.0],
    ];
    let verts = raw.iter().map(normalized).collect();
    let faces = vec![
        [0, 11, 5],
        [0, 5, 1],
        [0, 1, 7],
        [0, 7, 10],
        [0, 10, 11],
        [1, 5, 9],
        [5, 11, 4],
        [11, 10, 2],
        [10, 7, 6],
        [7, 1, 8],
        [3, 9, 4],
        [3, 4, 2],
        [3, 2, 6],
        [3, 6, 8],
        [3, 8, 9],
        [4, 9, 5],
        [2, 4, 11],
        [6, 2, 10],
        [8, 6, 7],
        [9, 8, 1],
    ];
    (verts, faces)
}

fn normalized(v: &[f64; 3]) -> [f64; 3] {
    let r = dot3(v, v).sqrt();
    [v[0] / r, v[1] / r, v[2] / r]
}

pub fn mesh(level: usize) -> (Vec<[f64; 3]>, Vec<[usize; 3]>) {
    let (mut verts, mut faces) = base();
    for _ in 0..level {
        let mut cache: BTreeMap<(usize, usize), usize> = BTreeMap::new();
        let mut midpoint = |a: usize, b: usize, verts: &mut Vec<[f64; 3]>| -> usize {
            let key = (a.min(b), a.max(b));
            *cache.entry(key).or_insert_with(|| {
                let (p, q) = (verts[a], verts[b]);
                verts.push(normalized(&[p[0] + q[0], p[1] + q[1], p[2] + q[2]]));
                verts.len() - 1
            })
        };
        let mut next = Vec::with_capacity(faces.len() * 4);
        for [a, b, c] in faces {
            let ab = midpoint(a, b, &mut verts);
            let bc = midpoint(b, c, &mut verts);
            let ca = midpoint(c, a, &mut verts);
            next.extend_from_slice(&[[a, ab, ca], [b, bc, ab], [c, ca, bc], [ab, bc, ca]]);
        }
        faces = next;
    }
    (verts, faces)
}

pub fn nodes(level: usize) -> Vec<super::Point> {
    mesh(level).0.into_iter().map(super::Point).collect()
}

/// Area of the spherical triangle `abc` on the unit sphere.
fn triangle_area(a: &[f64; 3], b: &[f64; 3], c: &[f64; 3]) -> f64 {
    let num = dot3(a, &cross3(b, c)).abs();
    let den = 1.0 + dot3(a, b) + dot3(b, c) + dot3(c, a);
    2.0 * num.atan2(den)
}

/// Quadrature weights (summing to 1) exact for every harmonic of degree at
/// most `exact_degree`.
///
/// Starts from one third of the adjacent triangle areas and applies the
/// weighted minimum-norm correction that zeroes the harmonic moments.
pub fn weights(points: &[super::Point], exact_degree: usize) -> Result<Vec<f64>> {
    let level = (0..8)
        .find(|&l| node_count(l) == points.len())
        .ok_or_else(|| Error::InvalidSpace(format!("{} nodes is not an icosahedral grid", points.len())))?;
    let (verts, faces) = mesh(level);
    let mut w0 = vec![0.0; verts.len()];
    for [a, b, c] in &faces {
        let area = triangle_area(&verts[*a], &verts[*b], &verts[*c]) / (4.0 * PI);
        for v in [a, b, c] {
            w0[*v] += area / 3.0;
        }
    }
    let rows = harmonic_count(exact_degree);
    let n = verts.len();
    let mut a = DMatrix::<f64>::zeros(rows, n);
    let mut buf = Vec::new();
    for (j, v) in verts.iter().enumerate() {
        real_harmonics(exact_degree, v, &mut buf);
        for (i, y) in buf.iter().enumerate() {
            a[(i, j)] = *y;
        }
    }
    let mut residual = DVector::<f64>::zeros(rows);
    residual[0] = 1.0;
    residual -= &a * DVector::from_column_slice(&w0);
    let mut scaled = a.clone();
    for j in 0..n {
        scaled.column_mut(j).scale_mut(w0[j]);
    }
    let gram = &scaled * a.transpose();
    let chol = gram.cholesky().ok_or_else(|| Error::InvalidSpace("sphere moment system is singular".into()))?;
    let lambda = chol.solve(&residual);
    let correction = scaled.transpose() * lambda;
    let w: Vec<f64> = w0.iter().zip(correction.iter()).map(|(w, c)| w + c).collect();
    if w.iter().any(|x| !(*x > 0.0)) {
        return Err(Error::InvalidSpace(format!(
            "moment-corrected weights at level {level} lose positivity for degree {exact_degree}"
        )));
    }
    Ok(w)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn counts_and_area() {
        for level in 0..4 {
            let (v, f) = mesh(level);
            assert_eq!(v.len(), node_count(level));
            let total: f64 = f.iter().map(|[a, b, c]| triangle_area(&v[*a], &v[*b], &v[*c])).sum();
            assert!((total - 4.0 * PI).abs() < 1e-10);
        }
    }
}
