//! Depth-2 net `f(x; a, W) = aᵀσ(Wx)` and the regularized logistic risk
//!
//! ```text
//! L̃(W) = (1/n) Σ_i log(1 + exp(-y_i f(x_i))) + (λ/2) ‖W‖_F²
//! ```
//!
//! with its closed-form gradient and Laplacian. The per-sample loops visit
//! samples in index order, so every reduction is reproducible bitwise.

use ndarray::{Array1, Array2, ArrayView1, ArrayView2};

use crate::activation::{log1p_exp, logistic, ActivationProfile};
use crate::error::{Error, Result};

/// `n` labelled feature vectors with `y ∈ {+1, -1}`.
#[derive(Debug, Clone, PartialEq)]
pub struct LabeledDataset {
    features: Array2<f64>,
    labels: Array1<f64>,
    b_x: f64,
}

impl LabeledDataset {
    pub fn new(features: Array2<f64>, labels: Array1<f64>) -> Result<Self> {
        let (n, d) = features.dim();
        if n == 0 || d == 0 {
            return Err(Error::invalid(format!("dataset must be non-empty, got {n}x{d}")));
        }
        if labels.len() != n {
            return Err(Error::DimensionMismatch {
                what: "labels",
                expected: n,
                actual: labels.len(),
            });
        }
        if features.iter().any(|v| !v.is_finite()) {
            return Err(Error::invalid("features contain non-finite entries"));
        }
        if let Some(bad) = labels.iter().find(|&&y| y != 1.0 && y != -1.0) {
            return Err(Error::invalid(format!("labels must be ±1, found {bad}")));
        }
        let features = features.as_standard_layout().into_owned();
        let b_x = features
            .outer_iter()
            .map(|row| norm(row.as_slice().unwrap()))
            .fold(0.0, f64::max);
        Ok(LabeledDataset {
            features,
            labels,
            b_x,
        })
    }

    pub fn n(&self) -> usize {
        self.features.nrows()
    }

    pub fn d(&self) -> usize {
        self.features.ncols()
    }

    pub fn features(&self) -> ArrayView2<'_, f64> {
        self.features.view()
    }

    pub fn labels(&self) -> ArrayView1<'_, f64> {
        self.labels.view()
    }

    /// Largest row 2-norm.
    pub fn b_x(&self) -> f64 {
        self.b_x
    }

    pub fn row(&self, i: usize) -> &[f64] {
        let d = self.d();
        &self.features.as_slice().unwrap()[i * d..(i + 1) * d]
    }

    pub fn label(&self, i: usize) -> f64 {
        self.labels[i]
    }

    /// (positive, negative) label counts.
    pub fn class_counts(&self) -> (usize, usize) {
        let pos = self.labels.iter().filter(|&&y| y > 0.0).count();
        (pos, self.n() - pos)
    }

    /// New dataset holding the given rows, in the given order.
    pub fn select(&self, rows: &[usize]) -> Result<Self> {
        let d = self.d();
        let mut feats = Vec::with_capacity(rows.len() * d);
        let mut labels = Vec::with_capacity(rows.len());
        for &i in rows {
            if i >= self.n() {
                return Err(Error::IndexOutOfRange { index: i, n: self.n() });
            }
            feats.extend_from_slice(self.row(i));
            labels.push(self.labels[i]);
        }
        let features = Array2::from_shape_vec((rows.len(), d), feats).expect("shape");
        LabeledDataset::new(features, Array1::from(labels))
    }

    /// Copy with every feature vector multiplied by `factor`.
    pub fn scaled(&self, factor: f64) -> Result<Self> {
        LabeledDataset::new(&self.features * factor, self.labels.clone())
    }
}

/// Fixed outer weights `a ∈ R^p` and trainable `W ∈ R^{p×d}`.
#[derive(Debug, Clone, PartialEq)]
pub struct NetState {
    outer: Array1<f64>,
    inner: Array2<f64>,
    a_norm: f64,
}

impl NetState {
    pub fn new(outer: Array1<f64>, inner: Array2<f64>) -> Result<Self> {
        let p = outer.len();
        if p == 0 {
            return Err(Error::invalid("width p must be at least 1"));
        }
        if inner.nrows() != p {
            return Err(Error::DimensionMismatch {
                what: "rows of W",
                expected: p,
                actual: inner.nrows(),
            });
        }
        if inner.ncols() == 0 {
            return Err(Error::invalid("input dimension d must be at least 1"));
        }
        if outer.iter().chain(inner.iter()).any(|v| !v.is_finite()) {
            return Err(Error::invalid("net weights must be finite"));
        }
        let a_norm = norm(outer.as_slice().unwrap());
        Ok(NetState {
            outer,
            inner: inner.as_standard_layout().into_owned(),
            a_norm,
        })
    }

    pub fn p(&self) -> usize {
        self.outer.len()
    }

    pub fn d(&self) -> usize {
        self.inner.ncols()
    }

    pub fn outer(&self) -> &[f64] {
        self.outer.as_slice().unwrap()
    }

    pub fn inner(&self) -> ArrayView2<'_, f64> {
        self.inner.view()
    }

    pub fn inner_slice(&self) -> &[f64] {
        self.inner.as_slice().unwrap()
    }

    pub fn a_norm(&self) -> f64 {
        self.a_norm
    }

    pub fn w_fro(&self) -> f64 {
        norm(self.inner_slice())
    }

    /// Same outer layer with a different `W`.
    pub fn with_inner(&self, inner: Array2<f64>) -> Result<Self> {
        if inner.dim() != self.inner.dim() {
            return Err(Error::DimensionMismatch {
                what: "W",
                expected: self.inner.len(),
                actual: inner.len(),
            });
        }
        if inner.iter().any(|v| !v.is_finite()) {
            return Err(Error::invalid("net weights must be finite"));
        }
        Ok(NetState {
            outer: self.outer.clone(),
            inner: inner.as_standard_layout().into_owned(),
            a_norm: self.a_norm,
        })
    }

    pub(crate) fn inner_mut(&mut self) -> &mut [f64] {
        self.inner.as_slice_mut().unwrap()
    }
}

/// Dataset, activation and regularizer: everything defining `L̃`.
#[derive(Debug, Clone)]
pub struct LossSpec {
    pub data: LabeledDataset,
    pub activation: ActivationProfile,
    pub lambda: f64,
}

/// Logistic loss `ℓ(z) = log(1 + e^{-z})`.
#[inline]
pub fn logistic_loss(z: f64) -> f64 {
    log1p_exp(-z)
}

/// `ℓ'(z) = -σ(-z)`.
#[inline]
pub fn logistic_loss_d1(z: f64) -> f64 {
    -logistic(-z)
}

/// `ℓ''(z) = σ(z)σ(-z)`.
#[inline]
pub fn logistic_loss_d2(z: f64) -> f64 {
    logistic(z) * logistic(-z)
}

#[inline]
pub(crate) fn dot(a: &[f64], b: &[f64]) -> f64 {
    debug_assert_eq!(a.len(), b.len());
    let mut acc = [0.0f64; 4];
    let chunks = a.len() / 4;
    for k in 0..chunks {
        let i = 4 * k;
        acc[0] += a[i] * b[i];
        acc[1] += a[i + 1] * b[i + 1];
        acc[2] += a[i + 2] * b[i + 2];
        acc[3] += a[i + 3] * b[i + 3];
    }
    let mut tail = 0.0;
    for i in 4 * chunks..a.len() {
        tail += a[i] * b[i];
    }
    (acc[0] + acc[1]) + (acc[2] + acc[3]) + tail
}

#[inline]
pub(crate) fn norm(a: &[f64]) -> f64 {
    dot(a, a).sqrt()
}

/// Pre-activations `z_j = w_j·x` into `z`, returns `f = Σ a_j σ(z_j)`.
#[inline]
fn forward_raw(act: &ActivationProfile, outer: &[f64], w: &[f64], x: &[f64], z: &mut [f64]) -> f64 {
    let d = x.len();
    let mut f = 0.0;
    for (j, (zj, &aj)) in z.iter_mut().zip(outer).enumerate() {
        *zj = dot(&w[j * d..(j + 1) * d], x);
        f += aj * act.eval(*zj);
    }
    f
}

/// `aᵀσ(Wx)`.
pub fn forward(act: &ActivationProfile, net: &NetState, x: &[f64]) -> Result<f64> {
    if x.len() != net.d() {
        return Err(Error::DimensionMismatch {
            what: "input vector",
            expected: net.d(),
            actual: x.len(),
        });
    }
    let mut z = vec![0.0; net.p()];
    Ok(forward_raw(act, net.outer(), net.inner_slice(), x, &mut z))
}

/// `∇_W f(x)`: row `j` is `a_j σ'(w_j·x) xᵀ`.
pub fn per_sample_net_grad(act: &ActivationProfile, net: &NetState, x: &[f64]) -> Result<Array2<f64>> {
    if x.len() != net.d() {
        return Err(Error::DimensionMismatch {
            what: "input vector",
            expected: net.d(),
            actual: x.len(),
        });
    }
    let (p, d) = (net.p(), net.d());
    let w = net.inner_slice();
    let mut g = Array2::zeros((p, d));
    for (j, mut row) in g.outer_iter_mut().enumerate() {
        let zj = dot(&w[j * d..(j + 1) * d], x);
        let c = net.outer()[j] * act.derivs(zj).0;
        row.iter_mut().zip(x).for_each(|(r, &xi)| *r = c * xi);
    }
    Ok(g)
}

/// Flat-parameter evaluation of `L̃` shared by the SGD, SDE and quadrature code.
///
/// `w` is `W` in row-major order.
pub(crate) struct Kernel<'a> {
    pub spec: &'a LossSpec,
    pub outer: &'a [f64],
}

impl Kernel<'_> {
    fn p(&self) -> usize {
        self.outer.len()
    }

    fn d(&self) -> usize {
        self.spec.data.d()
    }

    pub fn risk(&self, w: &[f64]) -> f64 {
        let data = &self.spec.data;
        let mut z = vec![0.0; self.p()];
        let mut acc = 0.0;
        for i in 0..data.n() {
            let f = forward_raw(&self.spec.activation, self.outer, w, data.row(i), &mut z);
            acc += logistic_loss(data.label(i) * f);
        }
        acc / data.n() as f64 + 0.5 * self.spec.lambda * dot(w, w)
    }

    /// `Σ_{i∈batch} ∇ℓ(y_i f_i)` (unaveraged, no regularizer) into `out`.
    pub fn logistic_grad_sum(&self, w: &[f64], batch: impl Iterator<Item = usize>, out: &mut [f64]) {
        let (p, d) = (self.p(), self.d());
        let data = &self.spec.data;
        let act = &self.spec.activation;
        out.iter_mut().for_each(|v| *v = 0.0);
        let mut z = vec![0.0; p];
        for i in batch {
            let x = data.row(i);
            let y = data.label(i);
            let f = forward_raw(act, self.outer, w, x, &mut z);
            let coef = logistic_loss_d1(y * f) * y;
            for j in 0..p {
                let c = coef * self.outer[j] * act.derivs(z[j]).0;
                if c != 0.0 {
                    for (o, &xk) in out[j * d..(j + 1) * d].iter_mut().zip(x) {
                        *o += c * xk;
                    }
                }
            }
        }
    }

    /// `(1/|B|) Σ_{i∈B} ∇ℓ_i + λW` into `out`.
    pub fn batch_grad(&self, w: &[f64], batch: &[usize], out: &mut [f64]) {
        self.logistic_grad_sum(w, batch.iter().copied(), out);
        let inv = 1.0 / batch.len() as f64;
        let lambda = self.spec.lambda;
        for (o, &wk) in out.iter_mut().zip(w) {
            *o = *o * inv + lambda * wk;
        }
    }

    pub fn full_grad(&self, w: &[f64], out: &mut [f64]) {
        let n = self.spec.data.n();
        self.logistic_grad_sum(w, 0..n, out);
        let inv = 1.0 / n as f64;
        let lambda = self.spec.lambda;
        for (o, &wk) in out.iter_mut().zip(w) {
            *o = *o * inv + lambda * wk;
        }
    }

    pub fn laplacian(&self, w: &[f64]) -> f64 {
        let (p, d) = (self.p(), self.d());
        let data = &self.spec.data;
        let act = &self.spec.activation;
        let mut z = vec![0.0; p];
        let mut acc = 0.0;
        for i in 0..data.n() {
            let x = data.row(i);
            let y = data.label(i);
            let f = forward_raw(act, self.outer, w, x, &mut z);
            let m = y * f;
            let (l1, l2) = (logistic_loss_d1(m), logistic_loss_d2(m));
            let mut per = 0.0;
            for j in 0..p {
                let (d1, d2) = act.derivs(z[j]);
                let ad1 = self.outer[j] * d1;
                per += l2 * ad1 * ad1 + l1 * y * self.outer[j] * d2;
            }
            acc += per * dot(x, x);
        }
        acc / data.n() as f64 + self.spec.lambda * (p * d) as f64
    }
}

impl LossSpec {
    pub fn new(data: LabeledDataset, activation: ActivationProfile, lambda: f64) -> Result<Self> {
        if !(lambda.is_finite() && lambda >= 0.0) {
            return Err(Error::invalid(format!("lambda must be finite and ≥ 0, got {lambda}")));
        }
        Ok(LossSpec {
            data,
            activation,
            lambda,
        })
    }

    pub fn with_lambda(&self, lambda: f64) -> Result<Self> {
        LossSpec::new(self.data.clone(), self.activation, lambda)
    }

    pub(crate) fn check(&self, net: &NetState) -> Result<()> {
        if net.d() != self.data.d() {
            return Err(Error::DimensionMismatch {
                what: "input dimension",
                expected: self.data.d(),
                actual: net.d(),
            });
        }
        Ok(())
    }

    pub(crate) fn kernel<'a>(&'a self, net: &'a NetState) -> Kernel<'a> {
        Kernel {
            spec: self,
            outer: net.outer(),
        }
    }

    pub fn risk(&self, net: &NetState) -> Result<f64> {
        self.check(net)?;
        Ok(self.kernel(net).risk(net.inner_slice()))
    }

    pub fn full_grad(&self, net: &NetState) -> Result<Array2<f64>> {
        self.check(net)?;
        let mut g = Array2::zeros((net.p(), net.d()));
        self.kernel(net).full_grad(net.inner_slice(), g.as_slice_mut().unwrap());
        Ok(g)
    }

    /// `(1/b) Σ_{i∈B} ∇ℓ_i + λW`; equals [`Self::full_grad`] bitwise for `B = 0..n`.
    pub fn minibatch_grad(&self, net: &NetState, batch: &[usize]) -> Result<Array2<f64>> {
        self.check(net)?;
        self.check_batch(batch)?;
        let mut g = Array2::zeros((net.p(), net.d()));
        self.kernel(net)
            .batch_grad(net.inner_slice(), batch, g.as_slice_mut().unwrap());
        Ok(g)
    }

    pub(crate) fn check_batch(&self, batch: &[usize]) -> Result<()> {
        if batch.is_empty() {
            return Err(Error::EmptyBatch);
        }
        let n = self.data.n();
        if let Some(&index) = batch.iter().find(|&&i| i >= n) {
            return Err(Error::IndexOutOfRange { index, n });
        }
        Ok(())
    }

    /// `Δ_W L̃ = Σ_{jk} ∂²L̃/∂W_{jk}²`.
    pub fn exact_laplacian(&self, net: &NetState) -> Result<f64> {
        self.check(net)?;
        Ok(self.kernel(net).laplacian(net.inner_slice()))
    }

    /// Fraction of samples with `sign(f(x_i)) == y_i`; `f = 0` counts as an error.
    pub fn accuracy(&self, net: &NetState) -> Result<f64> {
        accuracy(&self.activation, net, &self.data)
    }
}

/// Fraction of samples with `y·f(x) > 0`.
pub fn accuracy(act: &ActivationProfile, net: &NetState, data: &LabeledDataset) -> Result<f64> {
    if net.d() != data.d() {
        return Err(Error::DimensionMismatch {
            what: "input dimension",
            expected: data.d(),
            actual: net.d(),
        });
    }
    let mut z = vec![0.0; net.p()];
    let correct = (0..data.n())
        .filter(|&i| data.label(i) * forward_raw(act, net.outer(), net.inner_slice(), data.row(i), &mut z) > 0.0)
        .count();
    Ok(correct as f64 / data.n() as f64)
}
