//! Constant step-size minibatch SGD
//!
//! ```text
//! W ← (1 − sλ) W − (s/b) Σ_{i∈B} ∇ℓ(y_i f(x_i))
//! ```
//!
//! with batches drawn without replacement inside each epoch.

use std::io::Write;
use std::path::Path;

use ndarray::Array2;
use rand::seq::SliceRandom;
use rand_distr::{Distribution, StandardNormal};
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::bounds::{BoundInputs, GlipForm};
use crate::error::{Error, Result};
use crate::net::{norm, LossSpec, NetState};
use crate::rng::substream;

/// Above this risk a run is treated as diverged.
pub const DIVERGENCE_RISK: f64 = 1e12;

const INIT_STREAM: u64 = 0;
const BATCH_STREAM: u64 = 1;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize, Default)]
#[serde(tag = "kind", rename_all = "snake_case", deny_unknown_fields)]
pub enum InitSpec {
    /// Entries i.i.d. `N(0, 1)`.
    #[default]
    GaussianStd,
    GaussianScaled { sigma_w: f64 },
}

impl InitSpec {
    fn sigma(&self) -> Result<f64> {
        match *self {
            InitSpec::GaussianStd => Ok(1.0),
            InitSpec::GaussianScaled { sigma_w } if sigma_w > 0.0 && sigma_w.is_finite() => Ok(sigma_w),
            InitSpec::GaussianScaled { sigma_w } => {
                Err(Error::invalid(format!("init scale must be positive, got {sigma_w}")))
            }
        }
    }
}

/// `p × d` matrix of i.i.d. normal entries, a pure function of `seed`.
pub fn init_weights(init: InitSpec, p: usize, d: usize, seed: u64) -> Result<Array2<f64>> {
    if p == 0 || d == 0 {
        return Err(Error::invalid(format!("shape must be positive, got {p}x{d}")));
    }
    let sigma = init.sigma()?;
    let mut rng = substream(seed, INIT_STREAM);
    Ok(Array2::from_shape_simple_fn((p, d), || {
        sigma * <StandardNormal as Distribution<f64>>::sample(&StandardNormal, &mut rng)
    }))
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SgdConfig {
    pub step_s: f64,
    pub batch_b: usize,
    pub num_steps: usize,
    pub seed: u64,
    pub init: InitSpec,
    /// Exact risk is recorded at step 0, every `record_every` steps and at the end.
    pub record_every: usize,
}

impl SgdConfig {
    /// `k = epochs · ⌈n/b⌉`.
    pub fn steps_for_epochs(epochs: usize, n: usize, batch_b: usize) -> usize {
        epochs * n.div_ceil(batch_b.max(1))
    }

    fn validate(&self, n: usize) -> Result<()> {
        if !(self.step_s.is_finite() && self.step_s >= 0.0) {
            return Err(Error::invalid(format!("step size must be finite and ≥ 0, got {}", self.step_s)));
        }
        if self.batch_b == 0 || self.batch_b > n {
            return Err(Error::invalid(format!("batch size {} must lie in 1..={n}", self.batch_b)));
        }
        if self.record_every == 0 {
            return Err(Error::invalid("record_every must be ≥ 1"));
        }
        self.init.sigma().map(|_| ())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct StepRecord {
    pub step: usize,
    /// `k · s`
    pub time: f64,
    pub risk: f64,
    pub grad_norm: f64,
    pub w_fro: f64,
}

#[derive(Debug, Clone)]
pub struct Trajectory {
    pub records: Vec<StepRecord>,
    pub final_net: NetState,
    /// Set when `s > 1/gLip`.
    pub warnings: Vec<String>,
}

impl Trajectory {
    pub fn final_risk(&self) -> f64 {
        self.records.last().map_or(f64::NAN, |r| r.risk)
    }

    pub fn write_csv<W: Write>(&self, out: W) -> Result<()> {
        let mut w = csv::Writer::from_writer(out);
        for r in &self.records {
            w.serialize(r)?;
        }
        w.flush().map_err(|e| Error::io("<csv>", e))?;
        Ok(())
    }

    pub fn save_csv(&self, path: &Path) -> Result<()> {
        let file = std::fs::File::create(path).map_err(|e| Error::io(path, e))?;
        self.write_csv(std::io::BufWriter::new(file))
    }
}

/// One update on `batch`. `s = 0` leaves `W` unchanged.
pub fn sgd_step(spec: &LossSpec, net: &NetState, step_s: f64, batch: &[usize]) -> Result<NetState> {
    spec.check(net)?;
    spec.check_batch(batch)?;
    let mut next = net.clone();
    let mut scratch = vec![0.0; net.p() * net.d()];
    step_in_place(spec, &mut next, step_s, batch, &mut scratch);
    if next.inner_slice().iter().any(|v| !v.is_finite()) {
        return Err(Error::Diverged {
            step: 1,
            reason: "non-finite weights".into(),
        });
    }
    Ok(next)
}

fn step_in_place(spec: &LossSpec, net: &mut NetState, step_s: f64, batch: &[usize], g: &mut [f64]) {
    let outer = net.outer().to_vec();
    let kernel = crate::net::Kernel {
        spec,
        outer: &outer,
    };
    kernel.logistic_grad_sum(net.inner_slice(), batch.iter().copied(), g);
    let decay = 1.0 - step_s * spec.lambda;
    let scale = step_s / batch.len() as f64;
    for (w, &gk) in net.inner_mut().iter_mut().zip(g.iter()) {
        *w = decay * *w - scale * gk;
    }
}

fn record(spec: &LossSpec, net: &NetState, step: usize, step_s: f64, g: &mut [f64]) -> StepRecord {
    let kernel = spec.kernel(net);
    let w = net.inner_slice();
    kernel.full_grad(w, g);
    StepRecord {
        step,
        time: step as f64 * step_s,
        risk: kernel.risk(w),
        grad_norm: norm(g),
        w_fro: norm(w),
    }
}

/// Draws `W⁰` from `cfg.init` and trains with the fixed outer layer `outer`.
pub fn run_sgd(spec: &LossSpec, outer: &[f64], cfg: &SgdConfig) -> Result<Trajectory> {
    let w0 = init_weights(cfg.init, outer.len(), spec.data.d(), cfg.seed)?;
    let net = NetState::new(outer.to_vec().into(), w0)?;
    run_sgd_from(spec, net, cfg)
}

/// Trains from an explicit starting point; `cfg.init` is ignored.
pub fn run_sgd_from(spec: &LossSpec, mut net: NetState, cfg: &SgdConfig) -> Result<Trajectory> {
    spec.check(&net)?;
    let n = spec.data.n();
    cfg.validate(n)?;

    let mut warnings = Vec::new();
    if let Ok(glip) = BoundInputs::new(spec, &net)?.glip_bound(GlipForm::Concluding) {
        if cfg.step_s > 1.0 / glip {
            let msg = format!("step size {} exceeds 1/gLip = {}", cfg.step_s, 1.0 / glip);
            log::warn!("{msg}");
            warnings.push(msg);
        }
    }

    let mut rng = substream(cfg.seed, BATCH_STREAM);
    let mut perm: Vec<usize> = (0..n).collect();
    let mut cursor = n;
    let mut g = vec![0.0; net.p() * net.d()];
    let mut records = Vec::with_capacity(cfg.num_steps / cfg.record_every + 2);
    records.push(record(spec, &net, 0, cfg.step_s, &mut g));

    for step in 1..=cfg.num_steps {
        if cursor >= n {
            perm.shuffle(&mut rng);
            cursor = 0;
        }
        let end = (cursor + cfg.batch_b).min(n);
        step_in_place(spec, &mut net, cfg.step_s, &perm[cursor..end], &mut g);
        cursor = end;
        if net.inner_slice().iter().any(|v| !v.is_finite()) {
            return Err(Error::Diverged {
                step,
                reason: "non-finite weights".into(),
            });
        }
        if step % cfg.record_every == 0 || step == cfg.num_steps {
            let rec = record(spec, &net, step, cfg.step_s, &mut g);
            if !(rec.risk <= DIVERGENCE_RISK) {
                return Err(Error::Diverged {
                    step,
                    reason: format!("risk {} above {DIVERGENCE_RISK:e}", rec.risk),
                });
            }
            records.push(rec);
        }
    }
    Ok(Trajectory {
        records,
        final_net: net,
        warnings,
    })
}

/// Independent runs, one per seed, returned in seed order.
pub fn run_sgd_ensemble(spec: &LossSpec, outer: &[f64], cfg: &SgdConfig, seeds: &[u64]) -> Result<Vec<Trajectory>> {
    seeds
        .par_iter()
        .map(|&seed| run_sgd(spec, outer, &SgdConfig { seed, ..cfg.clone() }))
        .collect()
}

/// Ensemble mean of `risk − global_min` at each recorded step, as `(k·s, excess)`.
pub fn excess_risk_curve(ensemble: &[Trajectory], global_min: f64) -> Result<Vec<(f64, f64)>> {
    let first = ensemble
        .first()
        .ok_or_else(|| Error::invalid("empty ensemble"))?;
    let len = first.records.len();
    if let Some(t) = ensemble.iter().find(|t| t.records.len() != len) {
        return Err(Error::DimensionMismatch {
            what: "trajectory length",
            expected: len,
            actual: t.records.len(),
        });
    }
    let m = ensemble.len() as f64;
    Ok((0..len)
        .map(|k| {
            let mean = ensemble.iter().map(|t| t.records[k].risk - global_min).sum::<f64>() / m;
            (first.records[k].time, mean)
        })
        .collect())
}
