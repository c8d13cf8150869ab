//! Grid operators `u_i = sum_j K(x_i, x_j) m_j` for pair kernels.

use super::kernel::{Coupling, Kernel};
use super::Order;
use crate::prelude::*;
use crate::spaces::{GreenModel, Space};
use crate::{Error, Result};

/// Largest grid for which the dense kernel matrix is stored.
pub const DENSE_LIMIT: usize = 4096;

#[derive(Clone, Debug)]
enum Core {
    Constant(f64),
    Dense { n: usize, matrix: Vec<f64> },
    Spectral { table: Vec<f64>, inv_eig: Vec<f64>, phi: Vec<f64>, offset: f64, width: usize },
}

/// Discretized pair interaction on a space's grid; diagonal entries carry
/// the kernel's cell self-value.
#[derive(Clone, Debug)]
pub struct PairOperator {
    core: Core,
    potential: Option<(Vec<f64>, f64)>,
    n: usize,
}

impl PairOperator {
    pub fn new(kernel: &Kernel, space: &Space, order: Order) -> Result<Self> {
        if kernel.arity() != 2 {
            return Err(Error::UnsupportedArity(kernel.arity()));
        }
        let n = space.len();
        let (core_kernel, potential) = match kernel {
            Kernel::Confined { base, potential, coupling } => {
                let values: Vec<f64> = space.nodes().iter().map(|p| potential.eval(p)).collect();
                let coef = match coupling {
                    Coupling::Unit => 1.0,
                    c => c.coefficient(order),
                };
                (base.as_ref(), Some((values, coef)))
            }
            k => (k, None),
        };
        let core = match core_kernel {
            Kernel::Constant { value, .. } => Core::Constant(*value),
            Kernel::Green(g) => spectral(g, space),
            k => {
                if n > DENSE_LIMIT {
                    return Err(Error::InvalidParameter(format!(
                        "dense pair operator on {n} nodes exceeds the limit {DENSE_LIMIT}"
                    )));
                }
                let nodes = space.nodes();
                let mut matrix = vec![0.0; n * n];
                for i in 0..n {
                    matrix[i * n + i] = k.self_value(space, i, order);
                    for j in 0..i {
                        let v = k.pair(space, &nodes[i], &nodes[j], order);
                        matrix[i * n + j] = v;
                        matrix[j * n + i] = v;
                    }
                }
                Core::Dense { n, matrix }
            }
        };
        Ok(PairOperator { core, potential, n })
    }

    pub fn len(&self) -> usize {
        self.n
    }

    pub fn is_empty(&self) -> bool {
        self.n == 0
    }

    /// `u_i = sum_j K_ij m_j` for node masses `m`.
    pub fn apply(&self, m: &[f64]) -> Vec<f64> {
        let total: f64 = m.iter().sum();
        let mut u = match &self.core {
            Core::Constant(c) => vec![c * total; self.n],
            Core::Dense { n, matrix } => (0..*n)
                .map(|i| {
                    let row = &matrix[i * n..(i + 1) * n];
                    row.iter().zip(m).map(|(k, m)| if *m == 0.0 { 0.0 } else { k * m }).sum()
                })
                .collect(),
            Core::Spectral { table, inv_eig, phi, offset, width } => {
                let mut hat = vec![0.0; *width];
                for (j, mj) in m.iter().enumerate() {
                    if *mj == 0.0 {
                        continue;
                    }
                    let row = &table[j * width..(j + 1) * width];
                    for (h, v) in hat.iter_mut().zip(row) {
                        *h += mj * v;
                    }
                }
                for (h, e) in hat.iter_mut().zip(inv_eig) {
                    *h *= e;
                }
                let phi_m: f64 = phi.iter().zip(m).map(|(p, m)| p * m).sum();
                (0..self.n)
                    .map(|i| {
                        let row = &table[i * width..(i + 1) * width];
                        let h: f64 = row.iter().zip(&hat).map(|(a, b)| a * b).sum();
                        h - phi[i] * total - phi_m + offset * total
                    })
                    .collect()
            }
        };
        if let Some((v, coef)) = &self.potential {
            let vm: f64 = v.iter().zip(m).map(|(v, m)| v * m).sum();
            for (ui, vi) in u.iter_mut().zip(v) {
                *ui += coef * (vi * total + vm);
            }
        }
        u
    }

    /// `(1/2) sum_ij m_i K_ij m_j`.
    pub fn quadratic(&self, m: &[f64]) -> f64 {
        let u = self.apply(m);
        0.5 * u.iter().zip(m).map(|(u, m)| if *m == 0.0 { 0.0 } else { u * m }).sum::<f64>()
    }
}

fn spectral(g: &GreenModel, space: &Space) -> Core {
    let basis = space.basis().expect("Green kernels live on manifolds");
    let resolved: Vec<usize> = (1..basis.len()).filter(|&k| basis.order_of(k) <= g.order()).collect();
    let width = resolved.len();
    let mut table = Vec::with_capacity(space.len() * width);
    let mut buf = Vec::new();
    for p in space.nodes() {
        basis.values_at(p, &mut buf);
        table.extend(resolved.iter().map(|&k| buf[k]));
    }
    let inv_eig = resolved.iter().map(|&k| 1.0 / basis.eigenvalue(k)).collect();
    let phi = space.nodes().iter().map(|p| g.phi(p)).collect();
    Core::Spectral { table, inv_eig, phi, offset: g.offset(), width }
}
