//! Objectives on a flat parameter vector.
//!
//! The SDE integrator and the Gibbs-measure quadrature only need values,
//! gradients and Laplacians, so they work against [`Potential`] rather than
//! the net directly. [`LossPotential`] adapts a `(LossSpec, a)` pair with `W`
//! flattened row-major.

use crate::error::{Error, Result};
use crate::net::{Kernel, LossSpec, NetState};

pub trait Potential: Sync {
    fn dim(&self) -> usize;

    fn value(&self, w: &[f64]) -> f64;

    fn gradient(&self, w: &[f64], out: &mut [f64]);

    fn laplacian(&self, w: &[f64]) -> f64;

    /// `(κ, floor)` with `f(w) ≥ floor + (κ/2)‖w‖²` everywhere, when known.
    fn quadratic_minorant(&self) -> Option<(f64, f64)> {
        None
    }
}

/// `L̃` as a function of `vec(W)` for a fixed outer layer.
#[derive(Debug, Clone)]
pub struct LossPotential {
    spec: LossSpec,
    outer: Vec<f64>,
}

impl LossPotential {
    pub fn new(spec: LossSpec, outer: Vec<f64>) -> Result<Self> {
        if outer.is_empty() {
            return Err(Error::invalid("width p must be at least 1"));
        }
        Ok(LossPotential { spec, outer })
    }

    pub fn from_net(spec: &LossSpec, net: &NetState) -> Result<Self> {
        spec.check(net)?;
        Self::new(spec.clone(), net.outer().to_vec())
    }

    pub fn spec(&self) -> &LossSpec {
        &self.spec
    }

    pub fn outer(&self) -> &[f64] {
        &self.outer
    }

    pub fn p(&self) -> usize {
        self.outer.len()
    }

    fn kernel(&self) -> Kernel<'_> {
        Kernel {
            spec: &self.spec,
            outer: &self.outer,
        }
    }
}

impl Potential for LossPotential {
    fn dim(&self) -> usize {
        self.outer.len() * self.spec.data.d()
    }

    fn value(&self, w: &[f64]) -> f64 {
        self.kernel().risk(w)
    }

    fn gradient(&self, w: &[f64], out: &mut [f64]) {
        self.kernel().full_grad(w, out)
    }

    fn laplacian(&self, w: &[f64]) -> f64 {
        self.kernel().laplacian(w)
    }

    /// The logistic term is nonnegative, so `L̃ ≥ (λ/2)‖W‖²`.
    fn quadratic_minorant(&self) -> Option<(f64, f64)> {
        (self.spec.lambda > 0.0).then_some((self.spec.lambda, 0.0))
    }
}

/// `(κ/2)‖w‖²`; the zero-data limit of `L̃` up to an additive constant.
#[derive(Debug, Clone, Copy)]
pub struct Quadratic {
    pub curvature: f64,
    pub dim: usize,
}

impl Potential for Quadratic {
    fn dim(&self) -> usize {
        self.dim
    }

    fn value(&self, w: &[f64]) -> f64 {
        0.5 * self.curvature * w.iter().map(|v| v * v).sum::<f64>()
    }

    fn gradient(&self, w: &[f64], out: &mut [f64]) {
        for (o, &v) in out.iter_mut().zip(w) {
            *o = self.curvature * v;
        }
    }

    fn laplacian(&self, _w: &[f64]) -> f64 {
        self.curvature * self.dim as f64
    }

    fn quadratic_minorant(&self) -> Option<(f64, f64)> {
        (self.curvature > 0.0).then_some((self.curvature, 0.0))
    }
}

/// One-parameter double well `(w² − 1)²/4 + λw²`.
#[derive(Debug, Clone, Copy)]
pub struct DoubleWell {
    pub lambda: f64,
}

impl Potential for DoubleWell {
    fn dim(&self) -> usize {
        1
    }

    fn value(&self, w: &[f64]) -> f64 {
        let x = w[0];
        0.25 * (x * x - 1.0).powi(2) + self.lambda * x * x
    }

    fn gradient(&self, w: &[f64], out: &mut [f64]) {
        let x = w[0];
        out[0] = x * (x * x - 1.0) + 2.0 * self.lambda * x;
    }

    fn laplacian(&self, w: &[f64]) -> f64 {
        3.0 * w[0] * w[0] - 1.0 + 2.0 * self.lambda
    }

    /// `(w² − 1)²/4 ≥ w² − 2`.
    fn quadratic_minorant(&self) -> Option<(f64, f64)> {
        Some((2.0 * (1.0 + self.lambda), -2.0))
    }
}

/// `f + shift`.
#[derive(Debug, Clone)]
pub struct Shifted<P> {
    pub inner: P,
    pub shift: f64,
}

impl<P: Potential> Potential for Shifted<P> {
    fn dim(&self) -> usize {
        self.inner.dim()
    }

    fn value(&self, w: &[f64]) -> f64 {
        self.inner.value(w) + self.shift
    }

    fn gradient(&self, w: &[f64], out: &mut [f64]) {
        self.inner.gradient(w, out)
    }

    fn laplacian(&self, w: &[f64]) -> f64 {
        self.inner.laplacian(w)
    }

    fn quadratic_minorant(&self) -> Option<(f64, f64)> {
        self.inner
            .quadratic_minorant()
            .map(|(k, floor)| (k, floor + self.shift))
    }
}

impl<P: Potential + ?Sized> Potential for &P {
    fn dim(&self) -> usize {
        (**self).dim()
    }

    fn value(&self, w: &[f64]) -> f64 {
        (**self).value(w)
    }

    fn gradient(&self, w: &[f64], out: &mut [f64]) {
        (**self).gradient(w, out)
    }

    fn laplacian(&self, w: &[f64]) -> f64 {
        (**self).laplacian(w)
    }

    fn quadratic_minorant(&self) -> Option<(f64, f64)> {
        (**self).quadratic_minorant()
    }
}

/// `V_s(w) = ‖∇f‖²/s − Δf`.
pub fn villani_functional<P: Potential + ?Sized>(f: &P, w: &[f64], s: f64, scratch: &mut [f64]) -> f64 {
    f.gradient(w, scratch);
    scratch.iter().map(|g| g * g).sum::<f64>() / s - f.laplacian(w)
}
