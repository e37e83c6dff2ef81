//! Gibbs-measure quantities for objectives with at most two parameters.
//!
//! `μ_s ∝ exp(−2f/s)` is tabulated on a tensor grid over `[−R, R]^k`. The
//! same grid carries the trapezoid quadrature for `Z_s` and `C(s, f)`, the
//! scan for `inf f` and `inf V_s`, and a finite-volume discretization of the
//! Dirichlet form `(s/2)∫‖∇h‖² dμ_s` whose smallest nonzero eigenvalue is the
//! spectral gap.

mod spectral;

use std::sync::OnceLock;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use statrs::function::erf::erfc;

use crate::error::{Error, Result};
use crate::net::LossSpec;
use crate::potential::{villani_functional, LossPotential, Potential};
use spectral::GridGraph;

pub const MIN_GRID: usize = 64;
/// Largest per-axis resolution accepted for two-parameter eigensolves.
pub const MAX_GRID_2D: usize = 384;
/// Allowed mass outside the box relative to `Z_s`.
pub const TAIL_LIMIT: f64 = 1e-8;
/// Allowed relative change of quadratures under grid doubling.
pub const QUADRATURE_TOL: f64 = 1e-6;
/// Allowed relative change of the gap between `grid_n/2` and `grid_n`.
pub const REFINEMENT_TOL: f64 = 0.05;
/// Lower clamp on `μ_s/max μ_s` inside the eigenproblem.
const MASS_FLOOR: f64 = 1e-200;

/// Uniform tensor grid on `[−R, R]^dim`, last axis fastest.
#[derive(Debug, Clone)]
struct Grid {
    n: usize,
    dim: usize,
    h: f64,
    axis: Vec<f64>,
    /// Trapezoid weights along one axis.
    q: Vec<f64>,
}

impl Grid {
    fn new(radius: f64, n: usize, dim: usize) -> Self {
        let h = 2.0 * radius / (n - 1) as f64;
        let axis = (0..n).map(|i| -radius + i as f64 * h).collect();
        let q = (0..n)
            .map(|i| if i == 0 || i == n - 1 { 0.5 * h } else { h })
            .collect();
        Grid { n, dim, h, axis, q }
    }

    fn len(&self) -> usize {
        self.n.pow(self.dim as u32)
    }

    fn point(&self, idx: usize, out: &mut [f64]) {
        if self.dim == 1 {
            out[0] = self.axis[idx];
        } else {
            out[0] = self.axis[idx / self.n];
            out[1] = self.axis[idx % self.n];
        }
    }

    fn weight(&self, idx: usize) -> f64 {
        if self.dim == 1 {
            self.q[idx]
        } else {
            self.q[idx / self.n] * self.q[idx % self.n]
        }
    }

    fn norm(&self, idx: usize) -> f64 {
        let mut p = [0.0; 2];
        self.point(idx, &mut p);
        p[..self.dim].iter().map(|v| v * v).sum::<f64>().sqrt()
    }

    fn map<T: Send>(&self, f: impl Fn(&[f64]) -> T + Sync) -> Vec<T> {
        (0..self.len())
            .into_par_iter()
            .map(|i| {
                let mut p = [0.0; 2];
                self.point(i, &mut p);
                f(&p[..self.dim])
            })
            .collect()
    }
}

/// A potential together with a temperature and a quadrature box.
pub struct GibbsLab<P> {
    f: P,
    radius: f64,
    temp_s: f64,
    grid: Grid,
    values: Vec<f64>,
    fmin_grid: f64,
    tail_ratio: f64,
    v_cache: OnceLock<Vec<f64>>,
}

impl GibbsLab<LossPotential> {
    pub fn for_loss(spec: &LossSpec, outer: &[f64], radius: f64, grid_n: usize, temp_s: f64) -> Result<Self> {
        GibbsLab::new(LossPotential::new(spec.clone(), outer.to_vec())?, radius, grid_n, temp_s)
    }
}

impl<P: Potential> GibbsLab<P> {
    /// Validates the box and tabulates `f`.
    ///
    /// Fails when `f` has more than two parameters, `grid_n < 64`, or the
    /// tail of `μ_s` outside the box cannot be certified below `10⁻⁸ Z_s`.
    pub fn new(f: P, radius: f64, grid_n: usize, temp_s: f64) -> Result<Self> {
        let dim = f.dim();
        if dim == 0 || dim > 2 {
            return Err(Error::invalid(format!("Gibbs lab needs 1 or 2 parameters, got {dim}")));
        }
        if grid_n < MIN_GRID {
            return Err(Error::invalid(format!("grid_n must be ≥ {MIN_GRID}, got {grid_n}")));
        }
        if !(radius > 0.0 && radius.is_finite()) {
            return Err(Error::invalid(format!("box radius must be positive, got {radius}")));
        }
        if !(temp_s > 0.0 && temp_s.is_finite()) {
            return Err(Error::invalid(format!("temperature must be positive, got {temp_s}")));
        }
        let grid = Grid::new(radius, grid_n, dim);
        let values = grid.map(|w| f.value(w));
        if values.iter().any(|v| !v.is_finite()) {
            return Err(Error::invalid("objective is not finite on the box"));
        }
        let fmin_grid = values.iter().copied().fold(f64::INFINITY, f64::min);
        let mut lab = GibbsLab {
            f,
            radius,
            temp_s,
            grid,
            values,
            fmin_grid,
            tail_ratio: f64::NAN,
            v_cache: OnceLock::new(),
        };
        lab.tail_ratio = lab.tail_bound()?;
        if !(lab.tail_ratio < TAIL_LIMIT) {
            return Err(Error::TailMass {
                ratio: lab.tail_ratio,
                limit: TAIL_LIMIT,
            });
        }
        Ok(lab)
    }

    pub fn potential(&self) -> &P {
        &self.f
    }

    pub fn radius(&self) -> f64 {
        self.radius
    }

    pub fn grid_n(&self) -> usize {
        self.grid.n
    }

    pub fn temp_s(&self) -> f64 {
        self.temp_s
    }

    pub fn dim(&self) -> usize {
        self.grid.dim
    }

    /// Certified upper bound on `μ_s(outside box)/μ_s(box)`.
    pub fn tail_ratio(&self) -> f64 {
        self.tail_ratio
    }

    /// Grid coordinates of every node, last axis fastest.
    pub fn nodes(&self) -> Vec<Vec<f64>> {
        self.grid.map(|w| w.to_vec())
    }

    /// Node probabilities `q_i μ_s(w_i) / Σ_j q_j μ_s(w_j)`.
    pub fn probabilities(&self) -> Vec<f64> {
        let raw: Vec<f64> = (0..self.grid.len())
            .map(|i| self.grid.weight(i) * self.boltzmann(i))
            .collect();
        let total: f64 = raw.iter().sum();
        raw.into_iter().map(|v| v / total).collect()
    }

    fn boltzmann(&self, i: usize) -> f64 {
        (-2.0 * (self.values[i] - self.fmin_grid) / self.temp_s).exp()
    }

    /// `Σ q_i exp(−2(f_i − f_min)/s)`.
    fn shifted_mass(&self) -> f64 {
        (0..self.grid.len())
            .map(|i| self.grid.weight(i) * self.boltzmann(i))
            .sum()
    }

    /// Union bound over coordinates with the quadratic minorant, relative to the box mass.
    fn tail_bound(&self) -> Result<f64> {
        let (kappa, floor) = self.f.quadratic_minorant().ok_or(Error::TailMass {
            ratio: f64::INFINITY,
            limit: TAIL_LIMIT,
        })?;
        let k = self.grid.dim as f64;
        let sigma = (self.temp_s / (2.0 * kappa)).sqrt();
        let coord_tail = erfc(self.radius / (sigma * std::f64::consts::SQRT_2));
        if coord_tail == 0.0 {
            return Ok(0.0);
        }
        let log_tail = -2.0 * (floor - self.fmin_grid) / self.temp_s
            + k * ((2.0 * std::f64::consts::PI).sqrt() * sigma).ln()
            + (k * coord_tail).ln();
        Ok((log_tail - self.shifted_mass().ln()).exp())
    }

    /// `Z_s` by trapezoid quadrature, checked against a grid with twice the resolution.
    pub fn partition_function(&self) -> Result<f64> {
        let coarse = self.log_partition();
        let fine = GibbsLab::log_partition_on(&self.f, self.radius, 2 * self.grid.n, self.temp_s);
        let rel = (fine - coarse).exp_m1().abs();
        if rel > QUADRATURE_TOL {
            return Err(Error::Quadrature { rel });
        }
        Ok(coarse.exp())
    }

    /// `ln Z_s` on this grid.
    pub fn log_partition(&self) -> f64 {
        self.shifted_mass().ln() - 2.0 * self.fmin_grid / self.temp_s
    }

    fn log_partition_on(f: &P, radius: f64, n: usize, temp_s: f64) -> f64 {
        let grid = Grid::new(radius, n, f.dim());
        let values = grid.map(|w| f.value(w));
        let fmin = values.iter().copied().fold(f64::INFINITY, f64::min);
        let mass: f64 = values
            .iter()
            .enumerate()
            .map(|(i, v)| grid.weight(i) * (-2.0 * (v - fmin) / temp_s).exp())
            .sum();
        mass.ln() - 2.0 * fmin / temp_s
    }

    /// `E_{μ_s}[g]` by quadrature.
    pub fn expectation(&self, g: impl Fn(&[f64]) -> f64 + Sync) -> f64 {
        let gv = self.grid.map(g);
        let mut num = 0.0;
        let mut den = 0.0;
        for (i, gi) in gv.iter().enumerate() {
            let m = self.grid.weight(i) * self.boltzmann(i);
            num += m * gi;
            den += m;
        }
        num / den
    }

    /// `C(s, f) = (E_{μ_s}[(f − min f)²])^{1/2}`.
    pub fn c_constant(&self, global_min: f64) -> f64 {
        let mut num = 0.0;
        let mut den = 0.0;
        for i in 0..self.grid.len() {
            let m = self.grid.weight(i) * self.boltzmann(i);
            num += m * (self.values[i] - global_min).powi(2);
            den += m;
        }
        (num / den).sqrt()
    }

    /// Best grid node polished by backtracking gradient descent.
    ///
    /// When `f(−w) = f(w)` the representative with a nonnegative leading
    /// coordinate is returned.
    pub fn global_min_scan(&self) -> (f64, Vec<f64>) {
        let best = (0..self.values.len())
            .min_by(|&a, &b| self.values[a].total_cmp(&self.values[b]))
            .unwrap();
        let mut w = vec![0.0; self.grid.dim];
        self.grid.point(best, &mut w);
        let (val, mut w) = polish(&self.f, w);
        if let Some(&lead) = w.iter().find(|v| **v != 0.0) {
            let neg: Vec<f64> = w.iter().map(|v| -v).collect();
            if lead < 0.0 && self.f.value(&neg) <= val + 1e-14 * val.abs().max(1.0) {
                w = neg;
            }
        }
        (val, w)
    }

    fn v_values(&self) -> &[f64] {
        self.v_cache.get_or_init(|| {
            self.grid.map(|w| {
                let mut scratch = vec![0.0; w.len()];
                villani_functional(&self.f, w, self.temp_s, &mut scratch)
            })
        })
    }

    /// `min V_s` over the box grid.
    pub fn inf_v(&self) -> f64 {
        self.v_values().iter().copied().fold(f64::INFINITY, f64::min)
    }

    /// `1 / inf{V_s(W) : ‖W‖ ≥ r}` over the box grid and the sphere of radius `r`.
    pub fn epsilon_r(&self, r: f64) -> Result<f64> {
        if !(r >= 0.0) || r > self.radius {
            return Err(Error::invalid(format!("radius {r} outside [0, {}]", self.radius)));
        }
        let vs = self.v_values();
        let mut inf = (0..vs.len())
            .filter(|&i| self.grid.norm(i) >= r)
            .map(|i| vs[i])
            .fold(f64::INFINITY, f64::min);
        let mut scratch = vec![0.0; self.grid.dim];
        let sphere: Vec<Vec<f64>> = if self.grid.dim == 1 {
            vec![vec![r], vec![-r]]
        } else {
            let m = 8 * self.grid.n;
            (0..m)
                .map(|k| {
                    let th = 2.0 * std::f64::consts::PI * k as f64 / m as f64;
                    vec![r * th.cos(), r * th.sin()]
                })
                .collect()
        };
        for w in &sphere {
            inf = inf.min(villani_functional(&self.f, w, self.temp_s, &mut scratch));
        }
        if !(inf > 0.0) {
            return Err(Error::NonPositiveInfimum { radius: r, inf });
        }
        Ok(1.0 / inf)
    }

    fn graph(&self, ball: Option<f64>) -> GridGraph {
        build_graph(&self.grid, &self.values, self.temp_s, ball)
    }

    /// Gap on this grid without the refinement check.
    pub fn spectral_gap_raw(&self) -> Result<f64> {
        self.check_eigen_size()?;
        let g = self.graph(None);
        spectral::smallest_nonzero(&g, start_block(&self.grid)).map(|r| r.0)
    }

    /// Smallest nonzero eigenvalue of `−L = ∇f·∇ − (s/2)Δ` with reflecting
    /// boundary, so that `Var_{μ_s}[h] ≤ (s/(2γ)) E‖∇h‖²`.
    ///
    /// The value at `grid_n/2` must agree within 5%.
    pub fn spectral_gap(&self) -> Result<f64> {
        let fine = self.spectral_gap_raw()?;
        let coarse_grid = Grid::new(self.radius, self.grid.n / 2, self.grid.dim);
        let coarse_vals = coarse_grid.map(|w| self.f.value(w));
        let g = build_graph(&coarse_grid, &coarse_vals, self.temp_s, None);
        let coarse = spectral::smallest_nonzero(&g, start_block(&coarse_grid))?.0;
        if (coarse - fine).abs() > REFINEMENT_TOL * fine.abs() {
            return Err(Error::GridTooCoarse { coarse, fine });
        }
        Ok(fine)
    }

    /// Gap of the generator restricted to `‖W‖ ≤ r` with reflection at the sphere.
    pub fn ball_gap(&self, r: f64) -> Result<f64> {
        self.check_eigen_size()?;
        let g = self.graph(Some(r));
        spectral::smallest_nonzero(&g, start_block(&self.grid)).map(|r| r.0)
    }

    /// `C(R)` with `Var_{μ_{s,R}}[h] ≤ s·C(R)·E_{μ_{s,R}}‖∇h‖²`, i.e. `1/(2γ_R)`.
    pub fn ball_constant(&self, r: f64) -> Result<f64> {
        Ok(1.0 / (2.0 * self.ball_gap(r)?))
    }

    /// `(1 + 3s·inf V_s·ε(r)) / (2(c_r + 3ε(r)))` with `inf V_s` over the whole box.
    pub fn lambda_s_formula(&self, r: f64, c_r: f64) -> Result<f64> {
        let eps = self.epsilon_r(r)?;
        Ok(lambda_s_formula(self.temp_s, self.inf_v(), eps, c_r))
    }

    fn check_eigen_size(&self) -> Result<()> {
        if self.grid.dim == 2 && self.grid.n > MAX_GRID_2D {
            return Err(Error::invalid(format!(
                "two-parameter eigensolve limited to grid_n ≤ {MAX_GRID_2D}, got {}",
                self.grid.n
            )));
        }
        Ok(())
    }

    /// Both sides of `Var[h] ≤ (s/(2λ_s)) E‖∇h‖²` for each tapered test function.
    ///
    /// Gradients enter through the same edge differences as the eigenproblem,
    /// so for `λ_s` equal to the grid gap every ratio is at most one.
    pub fn poincare_check(&self, tests: &[TestFunction], lambda_s: f64) -> PoincareReport {
        let graph = self.graph(None);
        let mass: f64 = graph.mass.iter().sum();
        let r = self.radius;
        let entries = tests
            .iter()
            .map(|t| {
                let h = self.grid.map(|w| if t.tapered { taper(w, r) * (t.f)(w) } else { (t.f)(w) });
                let mean = h.iter().zip(&graph.mass).map(|(a, m)| a * m).sum::<f64>() / mass;
                let variance = h.iter().zip(&graph.mass).map(|(a, m)| m * (a - mean).powi(2)).sum::<f64>() / mass;
                // graph weights carry the factor s/2
                let grad_sq = graph.dirichlet(&h) / mass * 2.0 / self.temp_s;
                let rhs = self.temp_s / (2.0 * lambda_s) * grad_sq;
                let ratio = if variance <= 1e-300 { 0.0 } else { variance / rhs };
                PoincareEntry {
                    name: t.name.clone(),
                    variance,
                    grad_sq,
                    ratio,
                }
            })
            .collect::<Vec<_>>();
        let max_ratio = entries.iter().map(|e| e.ratio).fold(0.0, f64::max);
        PoincareReport {
            lambda_s,
            entries,
            max_ratio,
        }
    }

    /// `μ_s(‖W‖ ≤ r)` by quadrature.
    pub fn ball_mass(&self, r: f64) -> f64 {
        let probs = self.probabilities();
        (0..probs.len())
            .filter(|&i| self.grid.norm(i) <= r)
            .map(|i| probs[i])
            .sum()
    }

    /// Smallest `r = kR/64` whose ball holds half the mass and outside of which `V_s > 0`.
    pub fn default_ball_radius(&self) -> Option<f64> {
        (1..=64)
            .map(|k| k as f64 * self.radius / 64.0)
            .find(|&r| self.ball_mass(r) >= 0.5 && self.epsilon_r(r).is_ok())
    }

    /// Every reported quantity at ball radius `r`; formula terms that fail are `None`.
    pub fn report(&self, r: f64) -> Result<LabReport> {
        let z_s = self.partition_function()?;
        let (global_min, argmin) = self.global_min_scan();
        let c_constant = self.c_constant(global_min);
        let spectral_gap = self.spectral_gap()?;
        let epsilon_r = self.epsilon_r(r).ok();
        let ball_constant = self.ball_constant(r).ok();
        let lambda_s = match (epsilon_r, ball_constant) {
            (Some(eps), Some(c_r)) => Some(lambda_s_formula(self.temp_s, self.inf_v(), eps, c_r)),
            _ => None,
        };
        Ok(LabReport {
            z_s,
            c_constant,
            global_min,
            argmin,
            epsilon_r,
            inf_v: self.inf_v(),
            ball_radius: r,
            ball_constant,
            spectral_gap,
            lambda_s_formula: lambda_s,
            grid_n: self.grid.n,
            r#box: [-self.radius, self.radius],
            temp_s: self.temp_s,
        })
    }
}

/// `(1 + 3s·inf_v·ε) / (2(c_r + 3ε))`.
pub fn lambda_s_formula(temp_s: f64, inf_v: f64, eps: f64, c_r: f64) -> f64 {
    (1.0 + 3.0 * temp_s * inf_v * eps) / (2.0 * (c_r + 3.0 * eps))
}

/// Face-averaged finite-volume Dirichlet form of `μ_s` on `grid`.
fn build_graph(grid: &Grid, values: &[f64], temp_s: f64, ball: Option<f64>) -> GridGraph {
    let len = grid.len();
    let fmin = values.iter().copied().fold(f64::INFINITY, f64::min);
    let mu: Vec<f64> = values
        .iter()
        .map(|v| (-2.0 * (v - fmin) / temp_s).exp().max(MASS_FLOOR))
        .collect();
    let active: Vec<bool> = match ball {
        None => vec![true; len],
        Some(r) => (0..len).map(|i| grid.norm(i) <= r * (1.0 + 1e-12)).collect(),
    };
    let mass: Vec<f64> = (0..len).map(|i| grid.weight(i) * mu[i]).collect();
    let n = grid.n;
    let h = grid.h;
    let half = 0.5 * temp_s;
    let edge = |i: usize, j: usize, face: f64| {
        if active[i] && active[j] {
            half * 0.5 * (mu[i] + mu[j]) * face / h
        } else {
            0.0
        }
    };
    if grid.dim == 1 {
        let w = (0..len).map(|i| if i + 1 < n { edge(i, i + 1, 1.0) } else { 0.0 }).collect();
        GridGraph {
            mass,
            strides: vec![1],
            weights: vec![w],
            active,
        }
    } else {
        // the dual-cell face has length q along the transverse axis
        let w_row = (0..len)
            .map(|i| if i + n < len { edge(i, i + n, grid.q[i % n]) } else { 0.0 })
            .collect();
        let w_col = (0..len)
            .map(|i| if i % n + 1 < n { edge(i, i + 1, grid.q[i / n]) } else { 0.0 })
            .collect();
        GridGraph {
            mass,
            strides: vec![n, 1],
            weights: vec![w_row, w_col],
            active,
        }
    }
}

/// Low-frequency cosines as the starting block.
fn start_block(grid: &Grid) -> Vec<Vec<f64>> {
    let modes: &[(usize, usize)] = if grid.dim == 1 {
        &[(1, 0), (2, 0), (3, 0), (4, 0), (5, 0), (6, 0)]
    } else {
        &[(1, 0), (0, 1), (1, 1), (2, 0), (0, 2), (2, 1)]
    };
    let n = grid.n;
    let c = |k: usize, i: usize| (std::f64::consts::PI * k as f64 * (i as f64 + 0.5) / n as f64).cos();
    modes
        .iter()
        .enumerate()
        .map(|(m, &(kx, ky))| {
            (0..grid.len())
                .map(|idx| {
                    let (a, b) = if grid.dim == 1 { (idx, 0) } else { (idx / n, idx % n) };
                    // a small irregular term keeps the block from missing a symmetry class
                    c(kx, a) * c(ky, b) + 1e-3 * (((idx * 7919 + m * 104729) % 1000) as f64 / 1000.0 - 0.5)
                })
                .collect()
        })
        .collect()
}

/// Gradient descent with Armijo backtracking until `‖∇f‖ ≤ 10⁻¹⁰`.
fn polish<P: Potential + ?Sized>(f: &P, mut w: Vec<f64>) -> (f64, Vec<f64>) {
    let dim = w.len();
    let mut g = vec![0.0; dim];
    let mut val = f.value(&w);
    let mut step = 1.0;
    let mut trial = vec![0.0; dim];
    for _ in 0..200_000 {
        f.gradient(&w, &mut g);
        let gn2: f64 = g.iter().map(|v| v * v).sum();
        if gn2.sqrt() <= 1e-10 {
            break;
        }
        step *= 2.0;
        loop {
            trial.iter_mut().zip(&w).zip(&g).for_each(|((t, wi), gi)| *t = wi - step * gi);
            let tv = f.value(&trial);
            if tv <= val - 0.5 * step * gn2 {
                w.copy_from_slice(&trial);
                val = tv;
                break;
            }
            step *= 0.5;
            if step < 1e-20 {
                return (val, w);
            }
        }
    }
    (val, w)
}

/// `C^∞` cutoff per coordinate: one on `[−0.8R, 0.8R]`, zero at `±R`.
pub fn taper(w: &[f64], radius: f64) -> f64 {
    w.iter()
        .map(|&x| {
            let t = (radius - x.abs()) / (0.2 * radius);
            smooth_step(t)
        })
        .product()
}

fn smooth_step(t: f64) -> f64 {
    let g = |x: f64| if x > 0.0 { (-1.0 / x).exp() } else { 0.0 };
    if t >= 1.0 {
        1.0
    } else if t <= 0.0 {
        0.0
    } else {
        g(t) / (g(t) + g(1.0 - t))
    }
}

pub type ScalarFn = Box<dyn Fn(&[f64]) -> f64 + Send + Sync>;

/// A named test function; it is multiplied by [`taper`] before use.
pub struct TestFunction {
    pub name: String,
    pub f: ScalarFn,
    /// Constants already have zero variance and are used untapered.
    pub tapered: bool,
}

impl TestFunction {
    pub fn new(name: impl Into<String>, f: impl Fn(&[f64]) -> f64 + Send + Sync + 'static) -> Self {
        TestFunction {
            name: name.into(),
            f: Box::new(f),
            tapered: true,
        }
    }

    pub fn constant(c: f64) -> Self {
        TestFunction {
            tapered: false,
            ..TestFunction::new("constant", move |_| c)
        }
    }

    pub fn linear(axis: usize) -> Self {
        TestFunction::new(format!("linear_{axis}"), move |w| w[axis])
    }

    pub fn sine(axis: usize, freq: f64) -> Self {
        TestFunction::new(format!("sin_{axis}_{freq}"), move |w| (freq * w[axis]).sin())
    }

    pub fn quadratic() -> Self {
        TestFunction::new("quadratic", |w| w.iter().map(|v| v * v).sum())
    }

    pub fn bump(center: Vec<f64>, width: f64) -> Self {
        TestFunction::new("bump", move |w| {
            let d2: f64 = w.iter().zip(&center).map(|(a, c)| (a - c).powi(2)).sum();
            (-d2 / (2.0 * width * width)).exp()
        })
    }

    /// Constant, linear, sine, quadratic and a bump at the origin.
    pub fn standard_set(dim: usize) -> Vec<TestFunction> {
        let mut set = vec![TestFunction::constant(1.0)];
        for a in 0..dim {
            set.push(TestFunction::linear(a));
            set.push(TestFunction::sine(a, 1.0));
            set.push(TestFunction::sine(a, 3.0));
        }
        set.push(TestFunction::quadratic());
        set.push(TestFunction::bump(vec![0.0; dim], 0.5));
        set
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PoincareEntry {
    pub name: String,
    pub variance: f64,
    /// `E_{μ_s}‖∇h‖²`
    pub grad_sq: f64,
    /// `Var[h] / ((s/(2λ_s)) E‖∇h‖²)`; zero for constants.
    pub ratio: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PoincareReport {
    pub lambda_s: f64,
    pub entries: Vec<PoincareEntry>,
    pub max_ratio: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LabReport {
    pub z_s: f64,
    pub c_constant: f64,
    pub global_min: f64,
    pub argmin: Vec<f64>,
    pub epsilon_r: Option<f64>,
    pub inf_v: f64,
    pub ball_radius: f64,
    pub ball_constant: Option<f64>,
    pub spectral_gap: f64,
    pub lambda_s_formula: Option<f64>,
    pub grid_n: usize,
    pub r#box: [f64; 2],
    pub temp_s: f64,
}

/// Radius enclosing `{f ≤ f(0)}` plus eight standard deviations of the minorant Gaussian.
pub fn default_radius<P: Potential + ?Sized>(f: &P, temp_s: f64) -> Result<f64> {
    let (kappa, floor) = f
        .quadratic_minorant()
        .ok_or_else(|| Error::invalid("objective has no quadratic minorant; set the box radius explicitly"))?;
    let f0 = f.value(&vec![0.0; f.dim()]);
    let r0 = (2.0 * (f0 - floor).max(0.0) / kappa).sqrt();
    Ok(r0 + 8.0 * (temp_s / (2.0 * kappa)).sqrt())
}
