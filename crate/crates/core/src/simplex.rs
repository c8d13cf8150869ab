//! Exhaustive search over lattice points of the probability simplex.
//!
//! Used as an independent oracle for infima of functionals on finite
//! spaces. The coarse pass visits every point with coordinates in
//! `{0, 1/N, ..., 1}`; refinement passes then search a shrinking lattice
//! window around the incumbent.

use crate::prelude::*;

#[derive(Clone, Debug, PartialEq)]
pub struct SimplexSearch {
    /// Coarse lattice divisions `N`.
    pub divisions: usize,
    /// Number of refinement passes around the incumbent.
    pub levels: usize,
    /// Window half-width in lattice steps.
    pub radius: usize,
    /// Step reduction factor between passes.
    pub shrink: usize,
}

impl Default for SimplexSearch {
    fn default() -> Self {
        SimplexSearch { divisions: 200, levels: 3, radius: 4, shrink: 4 }
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct SimplexMin {
    pub value: f64,
    pub argmin: Vec<f64>,
    /// Incumbent value after each pass (coarse pass first).
    pub history: Vec<f64>,
}

/// Calls `visit` on every point of the lattice `{k / divisions}` in the
/// `m`-atom simplex.
pub fn for_each_lattice_point(m: usize, divisions: usize, mut visit: impl FnMut(&[f64])) {
    if m == 0 {
        return;
    }
    let mut counts = vec![0usize; m];
    let mut point = vec![0.0; m];
    let scale = 1.0 / divisions as f64;
    fn rec(
        i: usize,
        remaining: usize,
        counts: &mut [usize],
        point: &mut [f64],
        scale: f64,
        visit: &mut dyn FnMut(&[f64]),
    ) {
        let m = counts.len();
        if i == m - 1 {
            counts[i] = remaining;
            point[i] = remaining as f64 * scale;
            visit(point);
            return;
        }
        for c in 0..=remaining {
            counts[i] = c;
            point[i] = c as f64 * scale;
            rec(i + 1, remaining - c, counts, point, scale, visit);
        }
    }
    rec(0, divisions, &mut counts, &mut point, scale, &mut visit);
}

/// Minimizes `f` over the probability simplex on `m` atoms.
pub fn minimize(m: usize, search: &SimplexSearch, mut f: impl FnMut(&[f64]) -> f64) -> SimplexMin {
    let mut best = f64::INFINITY;
    let mut argmin = vec![1.0 / m as f64; m];
    for_each_lattice_point(m, search.divisions, |p| {
        let v = f(p);
        if v < best {
            best = v;
            argmin.copy_from_slice(p);
        }
    });
    let mut history = vec![best];
    let mut step = 1.0 / search.divisions as f64;
    let r = search.radius as i64;
    for _ in 0..search.levels {
        step /= search.shrink.max(2) as f64;
        let centre = argmin.clone();
        let mut offsets = vec![-r; m.saturating_sub(1)];
        let mut candidate = vec![0.0; m];
        'outer: loop {
            let mut sum = 0.0;
            let mut valid = true;
            for i in 0..m - 1 {
                let x = centre[i] + offsets[i] as f64 * step;
                if x < -1e-15 {
                    valid = false;
                    break;
                }
                candidate[i] = x.max(0.0);
                sum += candidate[i];
            }
            if valid {
                let last = 1.0 - sum;
                if last >= -1e-15 {
                    candidate[m - 1] = last.max(0.0);
                    let v = f(&candidate);
                    if v < best {
                        best = v;
                        argmin.copy_from_slice(&candidate);
                    }
                }
            }
            // odometer increment
            let mut i = 0;
            loop {
                if i == offsets.len() {
                    break 'outer;
                }
                offsets[i] += 1;
                if offsets[i] <= r {
                    break;
                }
                offsets[i] = -r;
                i += 1;
            }
        }
        history.push(best);
    }
    SimplexMin { value: best, argmin, history }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::math::binomial;

    #[test]
    fn lattice_size() {
        let mut count = 0;
        for_each_lattice_point(4, 20, |p| {
            assert!((p.iter().sum::<f64>() - 1.0).abs() < 1e-12);
            count += 1;
        });
        assert_eq!(count as f64, binomial(23, 3));
    }

    #[test]
    fn refinement_never_worsens() {
        let target = [0.123456, 0.3, 0.576544];
        let res = minimize(3, &SimplexSearch::default(), |p| p.iter().zip(&target).map(|(a, b)| (a - b).powi(2)).sum());
        assert!(res.history.windows(2).all(|w| w[1] <= w[0]));
        assert!(res.value < 1e-9);
    }
}
