//! Command implementations behind the `villani-net` binary.

use std::fs;
use std::path::{Path, PathBuf};

use rayon::prelude::*;
use serde::Serialize;

use crate::activation::ActivationProfile;
use crate::bounds::{verify_villani, BoundInputs, GlipForm, VillaniReport};
use crate::config::{Command, GibbsSection, PotentialSection, RunConfig};
use crate::data::write_csv;
use crate::error::{Error, Result};
use crate::gibbs::{default_radius, GibbsLab, LabReport};
use crate::net::{accuracy, LossSpec, NetState};
use crate::potential::{DoubleWell, LossPotential, Potential, Quadratic};
use crate::rng::child_seed;
use crate::sde::{default_dt, fit_rate, run_ensemble, RateFit, SdeConfig, DEFAULT_FLOOR};
use crate::sgd::{run_sgd, SgdConfig};

/// Seed-family indices, one per consumer.
const OUTER_FAMILY: u64 = 1 << 20;
const INIT_FAMILY: u64 = 2 << 20;

/// Loads `config`, applies the overrides and runs `cmd`. Returns the artifacts written.
pub fn run(cmd: Command, config: &Path, seed: Option<u64>, output_dir: Option<PathBuf>) -> Result<Vec<PathBuf>> {
    let mut cfg = RunConfig::load(config)?;
    if let Some(s) = seed {
        cfg.seed = s;
    }
    if let Some(dir) = output_dir {
        cfg.output_dir = dir;
    }
    execute(cmd, &cfg)
}

pub fn execute(cmd: Command, cfg: &RunConfig) -> Result<Vec<PathBuf>> {
    cfg.validate(cmd)?;
    fs::create_dir_all(&cfg.output_dir).map_err(|e| Error::io(&cfg.output_dir, e))?;
    match cmd {
        Command::Train => cmd_train(cfg),
        Command::Verify => cmd_verify(cfg),
        Command::Sde => cmd_sde(cfg),
        Command::Gibbs => cmd_gibbs(cfg),
        Command::GenData => cmd_gendata(cfg),
        Command::Mnist => cmd_mnist(cfg),
    }
}

fn outer_seed(run: u64, p: usize) -> u64 {
    child_seed(run, OUTER_FAMILY + p as u64)
}

fn init_seed(run: u64, p: usize) -> u64 {
    child_seed(run, INIT_FAMILY + p as u64)
}

fn write_json<T: Serialize>(path: &Path, value: &T) -> Result<()> {
    let mut text = serde_json::to_string_pretty(value)?;
    text.push('\n');
    fs::write(path, text).map_err(|e| Error::io(path, e))
}

fn create(path: &Path) -> Result<std::io::BufWriter<fs::File>> {
    Ok(std::io::BufWriter::new(fs::File::create(path).map_err(|e| Error::io(path, e))?))
}

#[derive(Debug, Clone, Serialize)]
struct SweepRow {
    p: usize,
    lambda: f64,
    final_risk: f64,
    test_accuracy: f64,
    steps: usize,
}

/// Single `(p, λ, a)` cell for commands that do not sweep.
struct Single {
    spec: LossSpec,
    outer: Vec<f64>,
}

fn single(cfg: &RunConfig, what: &str) -> Result<Single> {
    let (train, _) = cfg.data.as_ref().unwrap().load(cfg.seed)?;
    let net = cfg.net.as_ref().unwrap();
    let widths = net.p.list();
    let &[p] = widths.as_slice() else {
        return Err(Error::Config(format!("{what} takes a single width, got {widths:?}")));
    };
    let outer = net.outer_init.sample(p, outer_seed(cfg.seed, p))?;
    let a_norm = outer.iter().map(|v| v * v).sum::<f64>().sqrt();
    let lambdas = cfg.loss.as_ref().unwrap().lambdas(&net.activation, a_norm, train.b_x())?;
    let &[lambda] = lambdas.as_slice() else {
        return Err(Error::Config(format!("{what} takes a single lambda, got {lambdas:?}")));
    };
    Ok(Single {
        spec: LossSpec::new(train, net.activation, lambda)?,
        outer,
    })
}

fn cmd_train(cfg: &RunConfig) -> Result<Vec<PathBuf>> {
    let (train, test) = cfg.data.as_ref().unwrap().load(cfg.seed)?;
    let test = test.unwrap_or_else(|| train.clone());
    let net = cfg.net.as_ref().unwrap();
    let sgd = cfg.sgd.as_ref().unwrap();
    let steps = sgd.steps(train.n())?;

    let mut cells = Vec::new();
    for p in net.p.list() {
        let outer = net.outer_init.sample(p, outer_seed(cfg.seed, p))?;
        let a_norm = outer.iter().map(|v| v * v).sum::<f64>().sqrt();
        let lambdas = cfg.loss.as_ref().unwrap().lambdas(&net.activation, a_norm, train.b_x())?;
        for (j, &lambda) in lambdas.iter().enumerate() {
            cells.push((p, j, lambda, outer.clone()));
        }
    }
    log::info!("training {} cells, {steps} steps each", cells.len());
    let results: Vec<_> = cells
        .par_iter()
        .map(|(p, _, lambda, outer)| {
            let spec = LossSpec::new(train.clone(), net.activation, *lambda)?;
            let sc = SgdConfig {
                step_s: sgd.step_s,
                batch_b: sgd.batch_b,
                num_steps: steps,
                seed: init_seed(cfg.seed, *p),
                init: sgd.init,
                record_every: sgd.record_every,
            };
            let traj = run_sgd(&spec, outer, &sc)?;
            let acc = accuracy(&net.activation, &traj.final_net, &test)?;
            Ok((traj, acc))
        })
        .collect::<Result<_>>()?;

    let mut written = Vec::new();
    let sweep_path = cfg.output_dir.join("sweep.csv");
    let mut w = csv::Writer::from_writer(create(&sweep_path)?);
    for ((p, j, lambda, _), (traj, acc)) in cells.iter().zip(&results) {
        w.serialize(SweepRow {
            p: *p,
            lambda: *lambda,
            final_risk: traj.final_risk(),
            test_accuracy: *acc,
            steps,
        })?;
        let tpath = cfg.output_dir.join(format!("trajectory_p{p}_lambda{j}.csv"));
        traj.save_csv(&tpath)?;
        written.push(tpath);
    }
    w.flush().map_err(|e| Error::io(&sweep_path, e))?;
    written.insert(0, sweep_path);
    Ok(written)
}

#[derive(Serialize)]
struct VerifyOutput {
    p: usize,
    d: usize,
    a_norm: f64,
    b_x: f64,
    activation: ActivationProfile,
    #[serde(flatten)]
    report: VillaniReport,
}

fn cmd_verify(cfg: &RunConfig) -> Result<Vec<PathBuf>> {
    let s = single(cfg, "verify")?;
    let (p, d) = (s.outer.len(), s.spec.data.d());
    let net = NetState::new(s.outer.clone().into(), ndarray::Array2::zeros((p, d)))?;
    let report = verify_villani(&s.spec, &net, cfg.verify.as_ref().unwrap())?;
    log::info!("divergence_verified = {}", report.divergence_verified);
    let path = cfg.output_dir.join("villani_report.json");
    write_json(
        &path,
        &VerifyOutput {
            p,
            d,
            a_norm: net.a_norm(),
            b_x: s.spec.data.b_x(),
            activation: s.spec.activation,
            report,
        },
    )?;
    Ok(vec![path])
}

#[derive(Serialize)]
struct SdeSummary {
    temp_s: f64,
    dt: f64,
    horizon_t: f64,
    ensemble_m: usize,
    lambda: f64,
    final_mean_risk: f64,
    final_stderr: f64,
    fit: Option<RateFit>,
}

fn cmd_sde(cfg: &RunConfig) -> Result<Vec<PathBuf>> {
    let s = single(cfg, "sde")?;
    let sec = cfg.sde.as_ref().unwrap();
    let (p, d) = (s.outer.len(), s.spec.data.d());
    let net = NetState::new(s.outer.clone().into(), ndarray::Array2::zeros((p, d)))?;
    let glip = BoundInputs::new(&s.spec, &net)?.glip_bound(GlipForm::Concluding).ok();
    let dt = sec.dt.unwrap_or_else(|| default_dt(glip));
    let sc = SdeConfig {
        temp_s: sec.temp_s,
        dt,
        horizon_t: sec.horizon_t,
        ensemble_m: sec.ensemble_m,
        seed: cfg.seed,
        init: sec.init,
        record_every: sec.record_every,
    };
    let series = run_ensemble(&s.spec, &s.outer, &sc)?;
    let path = cfg.output_dir.join("sde_series.csv");
    series.save_csv(&path)?;
    let last = *series.points.last().unwrap();
    let fit = fit_rate(&series.as_pairs(), None, DEFAULT_FLOOR).ok();
    let summary_path = cfg.output_dir.join("sde_summary.json");
    write_json(
        &summary_path,
        &SdeSummary {
            temp_s: sec.temp_s,
            dt,
            horizon_t: sec.horizon_t,
            ensemble_m: sec.ensemble_m,
            lambda: s.spec.lambda,
            final_mean_risk: last.mean_risk,
            final_stderr: last.stderr,
            fit,
        },
    )?;
    Ok(vec![path, summary_path])
}

fn lab_report<P: Potential>(f: P, sec: &GibbsSection) -> Result<LabReport> {
    let radius = match sec.radius {
        Some(r) => r,
        None => default_radius(&f, sec.temp_s)?,
    };
    let lab = GibbsLab::new(f, radius, sec.grid_n, sec.temp_s)?;
    let r = match sec.ball_radius {
        Some(r) => r,
        None => lab.default_ball_radius().unwrap_or(radius),
    };
    lab.report(r)
}

fn cmd_gibbs(cfg: &RunConfig) -> Result<Vec<PathBuf>> {
    let sec = cfg.gibbs.as_ref().unwrap();
    let report = match &sec.potential {
        PotentialSection::Loss => {
            let s = single(cfg, "gibbs")?;
            lab_report(LossPotential::new(s.spec, s.outer)?, sec)?
        }
        PotentialSection::Quadratic { curvature, dim } => lab_report(
            Quadratic {
                curvature: *curvature,
                dim: *dim,
            },
            sec,
        )?,
        PotentialSection::DoubleWell { lambda } => lab_report(DoubleWell { lambda: *lambda }, sec)?,
    };
    let path = cfg.output_dir.join("gibbs_report.json");
    write_json(&path, &report)?;
    Ok(vec![path])
}

fn cmd_gendata(cfg: &RunConfig) -> Result<Vec<PathBuf>> {
    let (train, test) = cfg.data.as_ref().unwrap().load(cfg.seed)?;
    let train_path = cfg.output_dir.join("train.csv");
    write_csv(&train, create(&train_path)?)?;
    let mut out = vec![train_path];
    if let Some(test) = test {
        let test_path = cfg.output_dir.join("test.csv");
        write_csv(&test, create(&test_path)?)?;
        out.push(test_path);
    }
    Ok(out)
}

#[derive(Debug, Clone, Serialize)]
struct MnistEntry {
    pair: [u8; 2],
    train_n: usize,
    test_n: usize,
    p: usize,
    lambda: f64,
    step_s: f64,
    batch_b: usize,
    epochs: usize,
    steps: usize,
    final_risk: f64,
    train_accuracy: f64,
    accuracy: f64,
}

fn cmd_mnist(cfg: &RunConfig) -> Result<Vec<PathBuf>> {
    let m = cfg.mnist.as_ref().unwrap();
    let files = crate::data::MnistFiles::in_dir(&m.dir);
    let mut entries = Vec::new();
    let mut written = Vec::new();
    for &[a, b] in &m.pairs {
        let (train, test) = files.load_pair(a, b)?;
        let outer = m.outer_init.sample(m.p, outer_seed(cfg.seed, m.p))?;
        let spec = LossSpec::new(train, m.activation, m.lambda)?;
        let batch_b = m.batch_b.min(spec.data.n());
        let steps = SgdConfig::steps_for_epochs(m.epochs, spec.data.n(), batch_b);
        log::info!("pair ({a}, {b}): n = {}, {steps} steps", spec.data.n());
        let sc = SgdConfig {
            step_s: m.step_s,
            batch_b,
            num_steps: steps,
            seed: init_seed(cfg.seed, m.p),
            init: m.init,
            record_every: m.record_every,
        };
        let traj = run_sgd(&spec, &outer, &sc)?;
        let path = cfg.output_dir.join(format!("mnist_{a}_{b}_trajectory.csv"));
        traj.save_csv(&path)?;
        written.push(path);
        entries.push(MnistEntry {
            pair: [a, b],
            train_n: spec.data.n(),
            test_n: test.n(),
            p: m.p,
            lambda: m.lambda,
            step_s: m.step_s,
            batch_b,
            epochs: m.epochs,
            steps,
            final_risk: traj.final_risk(),
            train_accuracy: spec.accuracy(&traj.final_net)?,
            accuracy: accuracy(&m.activation, &traj.final_net, &test)?,
        });
    }
    let path = cfg.output_dir.join("mnist_summary.json");
    write_json(&path, &entries)?;
    written.insert(0, path);
    Ok(written)
}
