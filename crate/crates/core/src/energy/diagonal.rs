//! Self-interaction of a grid cell with itself for singular kernels.
//!
//! Macroscopic energies are quadratures over node pairs. For kernels that
//! blow up on the diagonal, the diagonal term of node `i` is replaced by the
//! mean of the kernel over two independent uniform points of the cell
//! around node `i` (an interval of length `h` in one dimension, a square of
//! side `h` in two).

use core::f64::consts::PI;

use crate::math::gauss_legendre_on;
#[allow(unused_imports)]
use crate::prelude::*;

/// Integral over `u in [0, 1]` of `f(r) * q(u)`, where `r = sqrt(1 + u^2)`
/// and `q` is the unit-square distance density on `[1, sqrt 2]` after the
/// change of variables `r^2 = 1 + u^2` (which removes the square-root edge
/// singularity).
fn square_outer_part(f: impl Fn(f64) -> f64) -> f64 {
    let (u, w) = gauss_legendre_on(48, 0.0, 1.0);
    u.iter()
        .zip(&w)
        .map(|(u, w)| {
            let r = (1.0 + u * u).sqrt();
            let bracket = 4.0 * u - u * u - 3.0 + PI - 4.0 * u.atan();
            w * 2.0 * u * bracket * f(r)
        })
        .sum()
}

/// `E[-log |X - Y|]` for `X, Y` uniform on a unit cell of dimension `dim`.
pub fn unit_cell_neg_log(dim: usize) -> f64 {
    match dim {
        1 => 1.5,
        _ => {
            // inner part: 2 int_0^1 r log r (pi - 4 r + r^2) dr
            let inner = 2.0 * (-PI / 4.0 + 4.0 / 9.0 - 1.0 / 16.0);
            -(inner + square_outer_part(|r| r.ln()))
        }
    }
}

/// `E[|X - Y|^{-s}]` for a unit cell, infinite when `s >= dim`.
pub fn unit_cell_riesz(dim: usize, s: f64) -> f64 {
    if s >= dim as f64 {
        return f64::INFINITY;
    }
    match dim {
        1 => 2.0 / ((1.0 - s) * (2.0 - s)),
        _ => {
            let inner = 2.0 * (PI / (2.0 - s) - 4.0 / (3.0 - s) + 1.0 / (4.0 - s));
            inner + square_outer_part(|r| r.powf(-s))
        }
    }
}
