//! Arithmetic expressions from config files: coordinate fields, beta
//! schedules in `n`, pair kernels and finite functionals.
//!
//! Parsing is delegated to `exmex`; this module fixes the variable names
//! each context accepts and maps points to them. `pi` is accepted as a
//! constant alongside exmex's `PI`.

use std::f64::consts::TAU;
use std::fmt;
use std::sync::Arc;

use exmex::{Express, FlatEx};
use gibbs_core::energy::CustomKernel;
use gibbs_core::spaces::ScalarField;
use gibbs_core::{Point, Space, SpaceKind};

/// Variables of coordinate expressions, in the order of [`coords`].
pub const POINT_VARS: [&str; 6] = ["x", "y", "z", "u", "v", "theta"];

#[derive(Clone, Debug, PartialEq, Eq)]
pub struct ExprError {
    pub source: String,
    pub message: String,
}

impl fmt::Display for ExprError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "expression `{}`: {}", self.source, self.message)
    }
}

impl std::error::Error for ExprError {}

/// A parsed expression whose variables are a subset of a fixed list.
#[derive(Clone)]
pub struct Expr {
    source: String,
    flat: FlatEx<f64>,
    /// For each variable of `flat`, its index in the allowed list; `None`
    /// stands for the constant `pi`.
    slots: Vec<Option<usize>>,
}

impl fmt::Debug for Expr {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "Expr({})", self.source)
    }
}

impl Expr {
    pub fn parse(source: &str, allowed: &[&str]) -> Result<Expr, ExprError> {
        let err = |message: String| ExprError { source: source.to_string(), message };
        let flat = exmex::parse::<f64>(source).map_err(|e| err(e.to_string()))?;
        let mut slots = Vec::new();
        for name in flat.var_names() {
            match allowed.iter().position(|a| a == name) {
                Some(i) => slots.push(Some(i)),
                None if name == "pi" => slots.push(None),
                None => return Err(err(format!("unknown variable `{name}`; allowed: {}", allowed.join(", ")))),
            }
        }
        Ok(Expr { source: source.to_string(), flat, slots })
    }

    pub fn source(&self) -> &str {
        &self.source
    }

    /// Evaluates with `values[i]` bound to the `i`-th allowed variable.
    /// Evaluation errors give NaN, which callers reject as non-finite.
    pub fn eval(&self, values: &[f64]) -> f64 {
        let mut buf = [0.0; 8];
        if self.slots.len() <= buf.len() {
            for (b, s) in buf.iter_mut().zip(&self.slots) {
                *b = s.map_or(std::f64::consts::PI, |s| values[s]);
            }
            self.flat.eval(&buf[..self.slots.len()]).unwrap_or(f64::NAN)
        } else {
            let args: Vec<f64> = self.slots.iter().map(|s| s.map_or(std::f64::consts::PI, |s| values[s])).collect();
            self.flat.eval(&args).unwrap_or(f64::NAN)
        }
    }
}

/// Coordinate values `[x, y, z, u, v, theta]` of a point.
///
/// Circle: `theta` is the angle, `(x, y)` the embedding, `u = theta / 2pi`.
/// Torus: `(u, v)` in `[0, 1)^2`, with `x = u`, `y = v`, `theta = 2pi u`.
/// Sphere: `(x, y, z)` on the unit sphere, `theta` the polar angle and
/// `u` the azimuth over `2pi`. Boxes: `x`, `y`.
pub fn coords(kind: SpaceKind, p: &Point) -> [f64; 6] {
    let [a, b, c] = p.0;
    match kind {
        SpaceKind::Circle => [a.cos(), a.sin(), 0.0, a / TAU, 0.0, a],
        SpaceKind::Torus => [a, b, 0.0, a, b, TAU * a],
        SpaceKind::Sphere => {
            let phi = b.atan2(a).rem_euclid(TAU);
            [a, b, c, phi / TAU, 0.0, c.clamp(-1.0, 1.0).acos()]
        }
        SpaceKind::Box { .. } => [a, b, 0.0, 0.0, 0.0, 0.0],
    }
}

pub fn field(source: &str, kind: SpaceKind) -> Result<ScalarField, ExprError> {
    let e = Expr::parse(source, &POINT_VARS)?;
    Ok(ScalarField::new(source, move |p: &Point| e.eval(&coords(kind, p))))
}

/// Field that may also depend on the particle number `n`.
pub fn field_in_n(source: &str, kind: SpaceKind) -> Result<Arc<dyn Fn(usize, &Point) -> f64 + Send + Sync>, ExprError> {
    let mut vars = POINT_VARS.to_vec();
    vars.push("n");
    let e = Expr::parse(source, &vars)?;
    Ok(Arc::new(move |n: usize, p: &Point| {
        let c = coords(kind, p);
        e.eval(&[c[0], c[1], c[2], c[3], c[4], c[5], n as f64])
    }))
}

/// Function of the particle number `n`.
pub fn sequence(source: &str) -> Result<Arc<dyn Fn(usize) -> f64 + Send + Sync>, ExprError> {
    let e = Expr::parse(source, &["n"])?;
    Ok(Arc::new(move |n: usize| e.eval(&[n as f64])))
}

/// Pair kernel over `x1, y1, z1, x2, y2, z2` (raw point coordinates), the
/// geodesic distance `d` and the chord length `chord`.
pub fn pair_kernel(
    source: &str,
    space: Arc<Space>,
    lower_bound: Option<f64>,
    smooth: bool,
) -> Result<CustomKernel, ExprError> {
    let e = Expr::parse(source, &["x1", "y1", "z1", "x2", "y2", "z2", "d", "chord"])?;
    Ok(CustomKernel {
        arity: 2,
        f: Arc::new(move |p: &[Point]| {
            let (a, b) = (&p[0].0, &p[1].0);
            e.eval(&[a[0], a[1], a[2], b[0], b[1], b[2], space.geodesic(&p[0], &p[1]), space.chord(&p[0], &p[1])])
        }),
        lower_bound,
        smooth,
        label: source.to_string(),
    })
}

/// Functional of the masses `m0, m1, ...` of a finite measure.
pub fn finite_functional(source: &str, atoms: usize) -> Result<Arc<dyn Fn(&[f64]) -> f64 + Send + Sync>, ExprError> {
    let names: Vec<String> = (0..atoms).map(|i| format!("m{i}")).collect();
    let refs: Vec<&str> = names.iter().map(String::as_str).collect();
    let e = Expr::parse(source, &refs)?;
    Ok(Arc::new(move |mu: &[f64]| e.eval(mu)))
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn evaluates_with_named_variables() {
        let e = Expr::parse("x^2/2 + sin(PI*y) - 1/2", &POINT_VARS).unwrap();
        assert!((e.eval(&[2.0, 0.5, 0.0, 0.0, 0.0, 0.0]) - 2.5).abs() < 1e-15);
        let e = Expr::parse("cos(2*pi*u)", &POINT_VARS).unwrap();
        assert!((e.eval(&[0.0, 0.0, 0.0, 0.5, 0.0, 0.0]) + 1.0).abs() < 1e-15);
        let s = sequence("n^1.5 + 2*n").unwrap();
        assert!((s(4) - 16.0).abs() < 1e-12);
    }

    #[test]
    fn rejects_unknown_variables_and_syntax() {
        assert!(Expr::parse("x + q", &POINT_VARS).unwrap_err().message.contains("`q`"));
        assert!(Expr::parse("x +", &POINT_VARS).is_err());
        assert!(Expr::parse("2*n", &POINT_VARS).is_err());
    }

    #[test]
    fn circle_coordinates() {
        let c = coords(SpaceKind::Circle, &Point::angle(std::f64::consts::FRAC_PI_2));
        assert!(c[0].abs() < 1e-15 && (c[1] - 1.0).abs() < 1e-15);
        assert!((c[3] - 0.25).abs() < 1e-15);
    }

    #[test]
    fn finite_functional_reads_masses() {
        let f = finite_functional("m1 + 2*m0^2", 2).unwrap();
        assert!((f(&[0.5, 0.5]) - 1.0).abs() < 1e-15);
    }
}
