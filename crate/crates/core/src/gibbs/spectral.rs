//! Smallest nonzero eigenvalue of a weighted grid Laplacian `K v = γ M v`.
//!
//! `K` is the Dirichlet form of a 1-D or 2-D tensor grid with per-edge
//! weights and `M` a positive diagonal mass. The null space of `K` on the
//! active node set is the indicator of that set. One node is grounded, the
//! grounded matrix is factored once in band storage, and a small block of
//! vectors is driven by inverse subspace iteration with a Rayleigh–Ritz step
//! after every solve.

use nalgebra::{DMatrix, SymmetricEigen};

use crate::error::{Error, Result};

/// Grid graph in natural order (last axis fastest).
///
/// `weights[a][i]` joins node `i` to node `i + strides[a]`; zero means no edge.
#[derive(Debug, Clone)]
pub(crate) struct GridGraph {
    pub mass: Vec<f64>,
    pub strides: Vec<usize>,
    pub weights: Vec<Vec<f64>>,
    pub active: Vec<bool>,
}

impl GridGraph {
    fn len(&self) -> usize {
        self.mass.len()
    }

    fn bandwidth(&self) -> usize {
        self.strides.iter().copied().max().unwrap_or(0)
    }

    /// `y = K x`.
    pub fn apply(&self, x: &[f64], y: &mut [f64]) {
        y.iter_mut().for_each(|v| *v = 0.0);
        for (&s, w) in self.strides.iter().zip(&self.weights) {
            for i in 0..self.len().saturating_sub(s) {
                let wi = w[i];
                if wi != 0.0 {
                    let diff = wi * (x[i] - x[i + s]);
                    y[i] += diff;
                    y[i + s] -= diff;
                }
            }
        }
    }

    /// `Σ_edges w (x_i − x_j)²`.
    pub fn dirichlet(&self, x: &[f64]) -> f64 {
        let mut acc = 0.0;
        for (&s, w) in self.strides.iter().zip(&self.weights) {
            for i in 0..self.len().saturating_sub(s) {
                if w[i] != 0.0 {
                    acc += w[i] * (x[i] - x[i + s]).powi(2);
                }
            }
        }
        acc
    }
}

/// Lower Cholesky factor in band storage: `l[i*(bw+1) + (i-j)] = L(i, j)`.
struct BandCholesky {
    n: usize,
    bw: usize,
    l: Vec<f64>,
}

impl BandCholesky {
    /// Factors `K` with node `ground` (and every inactive node) replaced by an identity row.
    fn factor(g: &GridGraph, ground: usize) -> Result<Self> {
        let n = g.len();
        let bw = g.bandwidth();
        let w = bw + 1;
        let mut l = vec![0.0; n * w];
        let pinned = |i: usize| i == ground || !g.active[i];
        // assemble
        for i in 0..n {
            if pinned(i) {
                l[i * w] = 1.0;
            }
        }
        for (&s, wt) in g.strides.iter().zip(&g.weights) {
            for i in 0..n.saturating_sub(s) {
                let e = wt[i];
                if e == 0.0 {
                    continue;
                }
                let j = i + s;
                if !pinned(i) {
                    l[i * w] += e;
                }
                if !pinned(j) {
                    l[j * w] += e;
                }
                if !pinned(i) && !pinned(j) {
                    l[j * w + s] -= e;
                }
            }
        }
        // factor in place
        for i in 0..n {
            let lo = i.saturating_sub(bw);
            for j in lo..=i {
                let klo = lo.max(j.saturating_sub(bw));
                let mut sum = l[i * w + (i - j)];
                for k in klo..j {
                    sum -= l[i * w + (i - k)] * l[j * w + (j - k)];
                }
                if i == j {
                    if !(sum > 0.0) {
                        return Err(Error::Eigen(format!("grounded operator not positive definite at node {i}")));
                    }
                    l[i * w] = sum.sqrt();
                } else {
                    l[i * w + (i - j)] = sum / l[j * w];
                }
            }
        }
        Ok(BandCholesky { n, bw, l })
    }

    fn solve(&self, b: &mut [f64]) {
        let w = self.bw + 1;
        for i in 0..self.n {
            let mut sum = b[i];
            for k in i.saturating_sub(self.bw)..i {
                sum -= self.l[i * w + (i - k)] * b[k];
            }
            b[i] = sum / self.l[i * w];
        }
        for i in (0..self.n).rev() {
            let mut sum = b[i];
            for k in i + 1..(i + self.bw + 1).min(self.n) {
                sum -= self.l[k * w + (k - i)] * b[k];
            }
            b[i] = sum / self.l[i * w];
        }
    }
}

const BLOCK: usize = 6;
const MAX_ITER: usize = 3000;
const TOL: f64 = 1e-13;

fn m_dot(m: &[f64], a: &[f64], b: &[f64]) -> f64 {
    m.iter().zip(a).zip(b).map(|((mi, ai), bi)| mi * ai * bi).sum()
}

/// Twice-repeated modified Gram–Schmidt in the `M` inner product against
/// `basis` and the earlier columns. Returns false for a vanished column.
fn m_orthonormalize(m: &[f64], ones: &[f64], cols: &mut [Vec<f64>]) -> bool {
    let one_norm = m_dot(m, ones, ones);
    for j in 0..cols.len() {
        for _ in 0..2 {
            let c = m_dot(m, ones, &cols[j]) / one_norm;
            cols[j].iter_mut().zip(ones).for_each(|(v, o)| *v -= c * o);
            for k in 0..j {
                let (done, rest) = cols.split_at_mut(j);
                let c = m_dot(m, &done[k], &rest[0]);
                rest[0].iter_mut().zip(&done[k]).for_each(|(v, u)| *v -= c * u);
            }
        }
        let nrm = m_dot(m, &cols[j], &cols[j]).sqrt();
        if !(nrm > 0.0) || !nrm.is_finite() {
            return false;
        }
        cols[j].iter_mut().for_each(|v| *v /= nrm);
    }
    true
}

/// Smallest nonzero generalized eigenvalue and its `M`-normalized eigenvector.
pub(crate) fn smallest_nonzero(g: &GridGraph, start: Vec<Vec<f64>>) -> Result<(f64, Vec<f64>)> {
    let n = g.len();
    let active_count = g.active.iter().filter(|&&a| a).count();
    if active_count < 2 {
        return Err(Error::Eigen("fewer than two active nodes".into()));
    }
    let ground = (0..n)
        .filter(|&i| g.active[i])
        .max_by(|&a, &b| g.mass[a].total_cmp(&g.mass[b]))
        .unwrap();
    let chol = BandCholesky::factor(g, ground)?;
    let m: Vec<f64> = g.mass.iter().zip(&g.active).map(|(&mi, &a)| if a { mi } else { 0.0 }).collect();
    let ones: Vec<f64> = g.active.iter().map(|&a| if a { 1.0 } else { 0.0 }).collect();

    let b = BLOCK.min(active_count - 1);
    let mut cols: Vec<Vec<f64>> = start.into_iter().take(b).collect();
    if cols.len() < b || cols.iter().any(|c| c.len() != n) {
        return Err(Error::Eigen("starting block has the wrong shape".into()));
    }
    for c in &mut cols {
        c.iter_mut().zip(&ones).for_each(|(v, o)| *v *= o);
    }

    let mut kv = vec![0.0; n];
    let mut prev = f64::INFINITY;
    for _ in 0..MAX_ITER {
        if !m_orthonormalize(&m, &ones, &mut cols) {
            return Err(Error::Eigen("iteration block lost rank".into()));
        }
        // Rayleigh–Ritz on span(cols); cols are M-orthonormal.
        let kcols: Vec<Vec<f64>> = cols
            .iter()
            .map(|c| {
                g.apply(c, &mut kv);
                kv.clone()
            })
            .collect();
        let h = DMatrix::from_fn(b, b, |i, j| {
            0.5 * (cols[i].iter().zip(&kcols[j]).map(|(a, c)| a * c).sum::<f64>()
                + cols[j].iter().zip(&kcols[i]).map(|(a, c)| a * c).sum::<f64>())
        });
        let eig = SymmetricEigen::new(h);
        let mut order: Vec<usize> = (0..b).collect();
        order.sort_by(|&i, &j| eig.eigenvalues[i].total_cmp(&eig.eigenvalues[j]));
        let rotated: Vec<Vec<f64>> = order
            .iter()
            .map(|&k| {
                let mut v = vec![0.0; n];
                for (j, c) in cols.iter().enumerate() {
                    let y = eig.eigenvectors[(j, k)];
                    v.iter_mut().zip(c).for_each(|(vi, ci)| *vi += y * ci);
                }
                v
            })
            .collect();
        cols = rotated;
        let theta = eig.eigenvalues[order[0]];
        if (theta - prev).abs() <= TOL * theta.abs() {
            return Ok((theta, cols.swap_remove(0)));
        }
        prev = theta;
        // inverse step: x = K_g⁻¹ M v
        for c in &mut cols {
            c.iter_mut().zip(&m).for_each(|(v, mi)| *v *= mi);
            c[ground] = 0.0;
            chol.solve(c);
        }
    }
    Err(Error::Eigen(format!("no convergence after {MAX_ITER} iterations (last estimate {prev})")))
}
