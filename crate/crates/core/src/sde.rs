//! Euler–Maruyama simulation of `dW = −∇L̃(W) dt + √s dB` and exponential
//! rate fitting on ensemble-mean curves.

use std::io::Write;
use std::path::Path;

use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, StandardNormal};
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::bounds::{BoundInputs, GlipForm};
use crate::error::{Error, Result};
use crate::net::{LossSpec, NetState};
use crate::potential::{LossPotential, Potential};
use crate::rng::substream;
use crate::sgd::InitSpec;

/// Trajectories per parallel work unit; fixed so sums do not depend on the pool.
const BLOCK: usize = 64;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SdeConfig {
    pub temp_s: f64,
    pub dt: f64,
    pub horizon_t: f64,
    pub ensemble_m: usize,
    pub seed: u64,
    pub init: InitSpec,
    /// Integrator steps between recorded points.
    pub record_every: usize,
}

impl SdeConfig {
    pub fn num_steps(&self) -> usize {
        (self.horizon_t / self.dt).round() as usize
    }

    fn validate(&self) -> Result<()> {
        if !(self.temp_s.is_finite() && self.temp_s >= 0.0) {
            return Err(Error::invalid(format!("temperature must be finite and ≥ 0, got {}", self.temp_s)));
        }
        if !(self.dt > 0.0 && self.dt.is_finite()) {
            return Err(Error::invalid(format!("dt must be positive, got {}", self.dt)));
        }
        if !(self.horizon_t >= self.dt) {
            return Err(Error::invalid(format!("horizon {} shorter than dt {}", self.horizon_t, self.dt)));
        }
        if self.ensemble_m == 0 || self.record_every == 0 {
            return Err(Error::invalid("ensemble size and record interval must be ≥ 1"));
        }
        Ok(())
    }
}

/// `w ← w − dt·∇f(w) + √(s·dt)·noise`, in place.
pub fn em_step_flat<P: Potential + ?Sized>(f: &P, w: &mut [f64], temp_s: f64, dt: f64, noise: &[f64], grad: &mut [f64]) {
    f.gradient(w, grad);
    let amp = (temp_s * dt).sqrt();
    for ((wk, gk), zk) in w.iter_mut().zip(grad.iter()).zip(noise) {
        *wk += -dt * gk + amp * zk;
    }
}

/// One Euler–Maruyama step of the SGD–SDE with a caller-supplied `p × d` normal draw.
pub fn em_step(spec: &LossSpec, net: &NetState, temp_s: f64, dt: f64, noise: &ndarray::Array2<f64>) -> Result<NetState> {
    if !(dt > 0.0) || temp_s < 0.0 {
        return Err(Error::invalid(format!("need dt > 0 and s ≥ 0, got dt={dt}, s={temp_s}")));
    }
    if noise.dim() != (net.p(), net.d()) {
        return Err(Error::DimensionMismatch {
            what: "noise entries",
            expected: net.p() * net.d(),
            actual: noise.len(),
        });
    }
    let pot = LossPotential::from_net(spec, net)?;
    let mut next = net.clone();
    let mut grad = vec![0.0; pot.dim()];
    let noise = noise.as_standard_layout();
    em_step_flat(&pot, next.inner_mut(), temp_s, dt, noise.as_slice().unwrap(), &mut grad);
    if next.inner_slice().iter().any(|v| !v.is_finite()) {
        return Err(Error::Diverged {
            step: 1,
            reason: "non-finite state".into(),
        });
    }
    Ok(next)
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SeriesPoint {
    pub t: f64,
    pub mean_risk: f64,
    pub stderr: f64,
    pub m: usize,
}

#[derive(Debug, Clone, PartialEq)]
pub struct SdeSeries {
    pub points: Vec<SeriesPoint>,
    /// Final state of every trajectory, in trajectory order.
    pub finals: Vec<Vec<f64>>,
}

impl SdeSeries {
    pub fn as_pairs(&self) -> Vec<(f64, f64)> {
        self.points.iter().map(|p| (p.t, p.mean_risk)).collect()
    }

    pub fn write_csv<W: Write>(&self, out: W) -> Result<()> {
        let mut w = csv::Writer::from_writer(out);
        for p in &self.points {
            w.serialize(p)?;
        }
        w.flush().map_err(|e| Error::io("<csv>", e))?;
        Ok(())
    }

    pub fn save_csv(&self, path: &Path) -> Result<()> {
        let file = std::fs::File::create(path).map_err(|e| Error::io(path, e))?;
        self.write_csv(std::io::BufWriter::new(file))
    }
}

/// Where trajectories start.
#[derive(Debug, Clone, Copy)]
pub enum Start<'a> {
    /// Every trajectory starts at this point.
    Fixed(&'a [f64]),
    /// Each trajectory draws its own start.
    Random(InitSpec),
}

/// Ensemble simulation on `f`; records the ensemble mean of `observable`.
///
/// Trajectory `i` draws from stream `i + 1` of `cfg.seed`, so the result is
/// bitwise reproducible and independent of the thread count.
pub fn simulate<P, O>(f: &P, start: Start<'_>, cfg: &SdeConfig, observable: O) -> Result<SdeSeries>
where
    P: Potential + ?Sized,
    O: Fn(&[f64]) -> f64 + Sync,
{
    cfg.validate()?;
    let dim = f.dim();
    let sigma = match start {
        Start::Fixed(w0) if w0.len() != dim => {
            return Err(Error::DimensionMismatch {
                what: "starting point",
                expected: dim,
                actual: w0.len(),
            })
        }
        Start::Fixed(_) => 0.0,
        Start::Random(init) => match init {
            InitSpec::GaussianStd => 1.0,
            InitSpec::GaussianScaled { sigma_w } if sigma_w > 0.0 => sigma_w,
            InitSpec::GaussianScaled { sigma_w } => {
                return Err(Error::invalid(format!("init scale must be positive, got {sigma_w}")))
            }
        },
    };
    let steps = cfg.num_steps();
    let n_rec = steps / cfg.record_every + 1 + usize::from(!steps.is_multiple_of(cfg.record_every));

    let run_one = |i: usize, sum: &mut [f64], sq: &mut [f64]| -> Result<Vec<f64>> {
        let mut rng: ChaCha8Rng = substream(cfg.seed, i as u64 + 1);
        let mut w: Vec<f64> = match start {
            Start::Fixed(w0) => w0.to_vec(),
            Start::Random(_) => (0..dim).map(|_| sigma * normal(&mut rng)).collect(),
        };
        let mut grad = vec![0.0; dim];
        let mut noise = vec![0.0; dim];
        let mut rec = 0;
        let mut push = |w: &[f64], rec: &mut usize| {
            let v = observable(w);
            sum[*rec] += v;
            sq[*rec] += v * v;
            *rec += 1;
        };
        push(&w, &mut rec);
        for step in 1..=steps {
            noise.iter_mut().for_each(|z| *z = normal(&mut rng));
            em_step_flat(f, &mut w, cfg.temp_s, cfg.dt, &noise, &mut grad);
            if w.iter().any(|v| !v.is_finite()) {
                return Err(Error::Diverged {
                    step,
                    reason: format!("trajectory {i}: non-finite state"),
                });
            }
            if step % cfg.record_every == 0 || step == steps {
                push(&w, &mut rec);
            }
        }
        Ok(w)
    };

    // per block: sums, sums of squares, final states
    type Block = (Vec<f64>, Vec<f64>, Vec<Vec<f64>>);
    let blocks: Vec<Block> = (0..cfg.ensemble_m.div_ceil(BLOCK))
        .into_par_iter()
        .map(|b| {
            let mut sum = vec![0.0; n_rec];
            let mut sq = vec![0.0; n_rec];
            let mut finals = Vec::with_capacity(BLOCK);
            for i in b * BLOCK..((b + 1) * BLOCK).min(cfg.ensemble_m) {
                finals.push(run_one(i, &mut sum, &mut sq)?);
            }
            Ok((sum, sq, finals))
        })
        .collect::<Result<_>>()?;

    let mut sum = vec![0.0; n_rec];
    let mut sq = vec![0.0; n_rec];
    let mut finals = Vec::with_capacity(cfg.ensemble_m);
    for (bs, bq, bf) in blocks {
        sum.iter_mut().zip(&bs).for_each(|(a, b)| *a += b);
        sq.iter_mut().zip(&bq).for_each(|(a, b)| *a += b);
        finals.extend(bf);
    }
    let m = cfg.ensemble_m as f64;
    let points = (0..n_rec)
        .map(|k| {
            let step = (k * cfg.record_every).min(steps);
            let mean = sum[k] / m;
            let var = if cfg.ensemble_m > 1 {
                ((sq[k] - m * mean * mean) / (m - 1.0)).max(0.0)
            } else {
                0.0
            };
            SeriesPoint {
                t: step as f64 * cfg.dt,
                mean_risk: mean,
                stderr: (var / m).sqrt(),
                m: cfg.ensemble_m,
            }
        })
        .collect();
    Ok(SdeSeries { points, finals })
}

/// Ensemble of SGD–SDE runs on `L̃` with outer layer `outer`; records mean risk.
pub fn run_ensemble(spec: &LossSpec, outer: &[f64], cfg: &SdeConfig) -> Result<SdeSeries> {
    let pot = LossPotential::new(spec.clone(), outer.to_vec())?;
    let net = NetState::new(outer.to_vec().into(), ndarray::Array2::zeros((outer.len(), spec.data.d())))?;
    if let Ok(glip) = BoundInputs::new(spec, &net)?.glip_bound(GlipForm::Concluding) {
        if cfg.dt * glip > 1.0 {
            log::warn!("dt = {} exceeds 1/gLip = {}", cfg.dt, 1.0 / glip);
        }
    }
    simulate(&pot, Start::Random(cfg.init), cfg, |w| pot.value(w))
}

/// Default integrator step `min(10⁻³, 0.1/gLip)`.
pub fn default_dt(glip: Option<f64>) -> f64 {
    glip.map_or(1e-3, |g| (0.1 / g).min(1e-3))
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct RateFit {
    pub lambda_hat: f64,
    pub r2: f64,
    pub plateau: f64,
    /// Number of leading points used by the regression.
    pub window: usize,
}

/// Fraction of the initial excess below which points are left out of the fit.
pub const DEFAULT_FLOOR: f64 = 0.05;

/// Least-squares fit of `log(v(t) − plateau) ≈ c − λ̂ t`.
///
/// `plateau` defaults to the mean of the last 10% of the series. The window
/// is the leading run of points whose excess exceeds `floor` times the
/// initial excess.
pub fn fit_rate(series: &[(f64, f64)], plateau: Option<f64>, floor: f64) -> Result<RateFit> {
    if series.len() < 10 {
        return Err(Error::RateFit(format!("need ≥ 10 points, got {}", series.len())));
    }
    let plateau = plateau.unwrap_or_else(|| {
        let tail = &series[series.len() - (series.len() / 10).max(1)..];
        tail.iter().map(|p| p.1).sum::<f64>() / tail.len() as f64
    });
    let e0 = series[0].1 - plateau;
    if !(e0 > 0.0) {
        return Err(Error::RateFit(format!("non-positive initial excess {e0}")));
    }
    let window: Vec<(f64, f64)> = series
        .iter()
        .map(|&(t, v)| (t, v - plateau))
        .take_while(|&(_, e)| e > floor * e0)
        .map(|(t, e)| (t, e.ln()))
        .collect();
    if window.len() < 10 {
        return Err(Error::RateFit(format!("window has {} points above the plateau, need ≥ 10", window.len())));
    }
    let n = window.len() as f64;
    let tm = window.iter().map(|p| p.0).sum::<f64>() / n;
    let ym = window.iter().map(|p| p.1).sum::<f64>() / n;
    let sxy: f64 = window.iter().map(|p| (p.0 - tm) * (p.1 - ym)).sum();
    let sxx: f64 = window.iter().map(|p| (p.0 - tm).powi(2)).sum();
    let syy: f64 = window.iter().map(|p| (p.1 - ym).powi(2)).sum();
    if sxx == 0.0 {
        return Err(Error::RateFit("window has zero time span".into()));
    }
    let slope = sxy / sxx;
    let r2 = if syy > 0.0 { sxy * sxy / (sxx * syy) } else { 1.0 };
    Ok(RateFit {
        lambda_hat: -slope,
        r2,
        plateau,
        window: window.len(),
    })
}

#[inline]
fn normal(rng: &mut ChaCha8Rng) -> f64 {
    StandardNormal.sample(rng)
}
