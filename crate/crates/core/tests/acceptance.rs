//! Acceptance gate: one line per criterion, non-zero exit if any fails.
//!
//! MNIST files are read from `VILLANI_MNIST_DIR`, defaulting to `data/mnist`
//! at the workspace root.

use std::collections::BTreeMap;
use std::path::{Path, PathBuf};
use std::process::ExitCode;
use std::time::{Duration, Instant};

use ndarray::{Array1, Array2};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, StandardNormal};
use serde_json::Value;

use villani_net::activation::ActivationProfile;
use villani_net::bounds::{lambda_c, verify_villani, BoundInputs, GlipForm, LambdaCVariant, VerifyOptions};
use villani_net::cli;
use villani_net::config::{Command, RunConfig};
use villani_net::gibbs::{default_radius, GibbsLab, TestFunction};
use villani_net::net::{LabeledDataset, LossSpec, NetState};
use villani_net::potential::{Potential, Quadratic};
use villani_net::sde::{fit_rate, simulate, SdeConfig, Start, DEFAULT_FLOOR};
use villani_net::sgd::{run_sgd_ensemble, InitSpec, SgdConfig};

type Outcome = Result<String, String>;

fn workspace() -> PathBuf {
    Path::new(env!("CARGO_MANIFEST_DIR")).join("../..")
}

fn mnist_dir() -> PathBuf {
    std::env::var_os("VILLANI_MNIST_DIR").map_or_else(|| workspace().join("data/mnist"), PathBuf::from)
}

fn gauss(rng: &mut ChaCha8Rng) -> f64 {
    StandardNormal.sample(rng)
}

fn random_activation(rng: &mut ChaCha8Rng, bounded_only: bool) -> ActivationProfile {
    let k = rng.random_range(0..if bounded_only { 2 } else { 3 });
    let beta = rng.random_range(0.5..2.0);
    match k {
        0 => ActivationProfile::sigmoid(beta).unwrap(),
        1 => ActivationProfile::tanh(),
        _ => ActivationProfile::softplus(beta).unwrap(),
    }
}

/// Gaussian rows rescaled to norm at most `b_x`, random ±1 labels.
fn random_data(rng: &mut ChaCha8Rng, n: usize, d: usize, b_x: f64) -> LabeledDataset {
    let mut x = Array2::from_shape_fn((n, d), |_| gauss(rng));
    let max = x.rows().into_iter().map(|r| r.dot(&r).sqrt()).fold(0.0, f64::max);
    x *= b_x / max;
    let y = Array1::from_shape_fn(n, |_| if rng.random_bool(0.5) { 1.0 } else { -1.0 });
    LabeledDataset::new(x, y).unwrap()
}

fn random_net(rng: &mut ChaCha8Rng, p: usize, d: usize, w_scale: f64) -> NetState {
    let a = Array1::from_shape_fn(p, |_| gauss(rng));
    let w = Array2::from_shape_fn((p, d), |_| w_scale * gauss(rng));
    NetState::new(a, w).unwrap()
}

fn lambda_c_reproduction() -> Outcome {
    let act = ActivationProfile::sigmoid(1.0).unwrap();
    let lc = lambda_c(&act, 1.0, 1.0, LambdaCVariant::Lemma);
    if lc == 0.03125 {
        Ok(format!("lambda_c = {lc}"))
    } else {
        Err(format!("lambda_c = {lc}, expected 0.03125"))
    }
}

fn derivative_oracles() -> Outcome {
    let mut rng = ChaCha8Rng::seed_from_u64(11);
    let (mut worst_g, mut worst_l) = (0.0f64, 0.0f64);
    for _ in 0..20 {
        let (p, d, n) = (rng.random_range(1..=4), rng.random_range(1..=5), rng.random_range(2..=10));
        let act = random_activation(&mut rng, false);
        let lambda = rng.random_range(0.01..1.0);
        let b_x = rng.random_range(0.5..2.0);
        let spec = LossSpec::new(random_data(&mut rng, n, d, b_x), act, lambda).unwrap();
        let net = random_net(&mut rng, p, d, 1.0);
        let g = spec.full_grad(&net).unwrap();
        let lap = spec.exact_laplacian(&net).unwrap();
        let risk_at = |w: &Array2<f64>| spec.risk(&net.with_inner(w.clone()).unwrap()).unwrap();
        let w0 = net.inner().to_owned();
        let f0 = risk_at(&w0);
        let (hg, hl) = (1e-5, 1e-3);
        let mut diff2 = 0.0;
        let mut lap_fd = 0.0;
        for i in 0..p {
            for j in 0..d {
                let mut wp = w0.clone();
                let mut wm = w0.clone();
                wp[[i, j]] += hg;
                wm[[i, j]] -= hg;
                let fd = (risk_at(&wp) - risk_at(&wm)) / (2.0 * hg);
                diff2 += (fd - g[[i, j]]).powi(2);
                let mut wp = w0.clone();
                let mut wm = w0.clone();
                wp[[i, j]] += hl;
                wm[[i, j]] -= hl;
                lap_fd += (risk_at(&wp) - 2.0 * f0 + risk_at(&wm)) / (hl * hl);
            }
        }
        let gn = g.iter().map(|v| v * v).sum::<f64>().sqrt();
        worst_g = worst_g.max(diff2.sqrt() / gn.max(1e-12));
        worst_l = worst_l.max((lap - lap_fd).abs() / lap.abs().max(1e-12));
    }
    let msg = format!("max rel err: gradient {worst_g:.2e}, laplacian {worst_l:.2e}");
    if worst_g <= 1e-6 && worst_l <= 1e-4 {
        Ok(msg)
    } else {
        Err(msg)
    }
}

fn bound_dominance() -> Outcome {
    const SAMPLES: usize = 320;
    let mut rng = ChaCha8Rng::seed_from_u64(12);
    let radius = |rng: &mut ChaCha8Rng, k: usize| if k.is_multiple_of(40) { 0.0 } else { 10f64.powf(rng.random_range(-3.0..3.0)) };
    let mut violations = BTreeMap::from([("grad_lb", 0usize), ("lap_ub", 0), ("glip", 0)]);
    let mut glip_ratio = 0.0f64;
    // informational: the per-row constant is not the criterion
    let mut per_row_violations = 0;
    for k in 0..SAMPLES {
        let (p, d, n) = (rng.random_range(1..=6), rng.random_range(1..=6), rng.random_range(2..=12));
        let b_x = rng.random_range(0.3..3.0);
        let lambda = rng.random_range(0.0..0.5);

        // gradient lower bound and Laplacian upper bound, any activation
        let act = random_activation(&mut rng, false);
        let spec = LossSpec::new(random_data(&mut rng, n, d, b_x), act, lambda).unwrap();
        let net = random_net(&mut rng, p, d, 1.0);
        let r = radius(&mut rng, k);
        let net = net.with_inner(net.inner().to_owned() * (r / net.w_fro().max(1e-300))).unwrap();
        let bi = BoundInputs::new(&spec, &net).unwrap();
        let w = net.w_fro();
        let g = spec.full_grad(&net).unwrap();
        let g2 = g.iter().map(|v| v * v).sum::<f64>();
        let glb = bi.grad_lower_bound(w);
        if g2 < glb - 1e-9 * glb.abs().max(1.0) {
            *violations.get_mut("grad_lb").unwrap() += 1;
        }
        let lap = spec.exact_laplacian(&net).unwrap();
        let lub = bi.laplacian_upper_bound(w);
        if lap > lub + 1e-9 * lub.abs().max(1.0) {
            *violations.get_mut("lap_ub").unwrap() += 1;
        }

        // gradient Lipschitz bound, bounded activations
        let act = random_activation(&mut rng, true);
        let spec = LossSpec::new(random_data(&mut rng, n, d, b_x), act, lambda).unwrap();
        let net = random_net(&mut rng, p, d, 1.0);
        let r = radius(&mut rng, k);
        let net1 = net.with_inner(net.inner().to_owned() * (r / net.w_fro().max(1e-300))).unwrap();
        let step = 10f64.powf(rng.random_range(-4.0..1.0));
        let delta = Array2::from_shape_fn((p, d), |_| step * gauss(&mut rng));
        let net2 = net1.with_inner(net1.inner().to_owned() + &delta).unwrap();
        let dg = spec.full_grad(&net1).unwrap() - spec.full_grad(&net2).unwrap();
        let lhs = dg.iter().map(|v| v * v).sum::<f64>().sqrt();
        let dw = delta.iter().map(|v| v * v).sum::<f64>().sqrt();
        let bi = BoundInputs::new(&spec, &net1).unwrap();
        let bound = bi.glip_bound(GlipForm::Concluding).unwrap();
        if lhs > bi.glip_bound(GlipForm::PerRow).unwrap() * dw * (1.0 + 1e-9) {
            per_row_violations += 1;
        }
        glip_ratio = glip_ratio.max(lhs / (bound * dw));
        if lhs > bound * dw * (1.0 + 1e-9) {
            *violations.get_mut("glip").unwrap() += 1;
        }
    }
    let total: usize = violations.values().sum();
    let msg = format!("{SAMPLES} samples per bound, violations {violations:?}, max glip ratio {glip_ratio:.3}, per-row form violations {per_row_violations}");
    if total == 0 {
        Ok(msg)
    } else {
        Err(msg)
    }
}

fn villani_divergence() -> Outcome {
    let mut rng = ChaCha8Rng::seed_from_u64(13);
    let (p, d, n) = (5, 4, 30);
    let data = random_data(&mut rng, n, d, 1.0);
    let mut net = random_net(&mut rng, p, d, 0.0);
    let a = net.outer().to_vec();
    let an = net.a_norm();
    net = NetState::new(a.iter().map(|v| v / an).collect(), net.inner().to_owned()).unwrap();
    let act = ActivationProfile::sigmoid(1.0).unwrap();
    let lc_proof = lambda_c(&act, net.a_norm(), data.b_x(), LambdaCVariant::Proof);
    let opts = VerifyOptions::default();
    let spec = LossSpec::new(data, act, 2.0 * lc_proof).unwrap();
    let on = verify_villani(&spec, &net, &opts).map_err(|e| e.to_string())?;
    let off = verify_villani(&spec.with_lambda(0.0).unwrap(), &net, &opts).map_err(|e| e.to_string())?;
    let msg = format!(
        "lambda = {:.4}: verified {}, g1 {:.3e}, min V at r_max {:.3e}, violations {}; lambda = 0: verified {}",
        on.lambda, on.divergence_verified, on.g1_grad_bound, on.min_v_at_max_radius, on.dominance_violations, off.divergence_verified
    );
    if on.divergence_verified && on.g1_grad_bound > 0.0 && on.g1_proof > 0.0 && !off.divergence_verified {
        Ok(msg)
    } else {
        Err(msg)
    }
}

fn tiny_instance() -> Outcome {
    let x = Array2::from_shape_vec((4, 1), vec![1.0, 0.5, -0.3, -0.9]).unwrap();
    let y = Array1::from(vec![1.0, -1.0, 1.0, -1.0]);
    let act = ActivationProfile::sigmoid(1.0).unwrap();
    let spec = LossSpec::new(LabeledDataset::new(x, y).unwrap(), act, 0.1).unwrap();
    let outer = vec![1.0];
    let net = NetState::new(Array1::from(outer.clone()), Array2::zeros((1, 1))).unwrap();
    let glip = BoundInputs::new(&spec, &net).unwrap().glip_bound(GlipForm::Concluding).unwrap();
    let step_s = (1.0 / glip).min(0.5);
    let cfg = SgdConfig {
        step_s,
        batch_b: 2,
        num_steps: 100_000,
        seed: 0,
        init: InitSpec::GaussianStd,
        record_every: 100_000,
    };
    let seeds: Vec<u64> = (0..20).collect();
    let runs = run_sgd_ensemble(&spec, &outer, &cfg, &seeds).map_err(|e| e.to_string())?;
    let mean = runs.iter().map(|t| t.final_risk()).sum::<f64>() / runs.len() as f64;
    let lab = GibbsLab::for_loss(&spec, &outer, 30.0, 4096, 0.1).map_err(|e| e.to_string())?;
    let (min, argmin) = lab.global_min_scan();
    let msg = format!("s = {step_s:.4}, mean final risk {mean:.6}, global min {min:.6} at {:.4}", argmin[0]);
    if (mean - min).abs() <= 1e-2 {
        Ok(msg)
    } else {
        Err(msg)
    }
}

fn ou_analytics() -> Outcome {
    let s = 0.5;
    let f1 = Quadratic { curvature: 1.0, dim: 1 };
    let lab = GibbsLab::new(f1, default_radius(&f1, s).unwrap(), 512, s).map_err(|e| e.to_string())?;
    let z = lab.partition_function().map_err(|e| e.to_string())?;
    let gap = lab.spectral_gap().map_err(|e| e.to_string())?;

    let f2 = Quadratic { curvature: 1.0, dim: 2 };
    let cfg = SdeConfig {
        temp_s: s,
        dt: 1e-3,
        horizon_t: 6.0,
        ensemble_m: 10_000,
        seed: 7,
        init: InitSpec::GaussianStd,
        record_every: 20,
    };
    let w0 = [2.0, -1.5];
    let series = simulate(&f2, Start::Fixed(&w0), &cfg, |w| f2.value(w)).map_err(|e| e.to_string())?;
    let m = series.finals.len() as f64;
    let mut var = 0.0;
    for c in 0..2 {
        let mean = series.finals.iter().map(|w| w[c]).sum::<f64>() / m;
        var += series.finals.iter().map(|w| (w[c] - mean).powi(2)).sum::<f64>() / (m - 1.0) / 2.0;
    }
    // E f(W_∞) = dim · s/4; the excess decays at twice the curvature
    let fit = fit_rate(&series.as_pairs(), Some(2.0 * s / 4.0), DEFAULT_FLOOR).map_err(|e| e.to_string())?;
    let msg = format!(
        "Z {z:.7} (target {:.7}), gap {gap:.5}, variance {var:.5}, rate {:.4} (target 2)",
        (std::f64::consts::PI / 2.0).sqrt(),
        fit.lambda_hat
    );
    let ok = (z - (std::f64::consts::PI / 2.0).sqrt()).abs() <= 1e-4
        && (gap - 1.0).abs() <= 0.01
        && (var - 0.25).abs() <= 0.05 * 0.25
        && (fit.lambda_hat - 2.0).abs() <= 0.15 * 2.0;
    if ok {
        Ok(msg)
    } else {
        Err(msg)
    }
}

fn poincare() -> Outcome {
    let s = 0.5;
    let f = Quadratic { curvature: 1.0, dim: 1 };
    let lab = GibbsLab::new(f, default_radius(&f, s).unwrap(), 512, s).map_err(|e| e.to_string())?;
    let gap = lab.spectral_gap().map_err(|e| e.to_string())?;
    let rep = lab.poincare_check(&TestFunction::standard_set(1), gap);
    let linear = rep.entries.iter().find(|e| e.name == "linear_0").unwrap().ratio;
    let others = rep.entries.iter().filter(|e| e.name != "linear_0").map(|e| e.ratio).fold(0.0, f64::max);
    let msg = format!("linear ratio {linear:.5}, max other {others:.5}");
    if (0.95..=1.0).contains(&linear) && others <= 1.0 + 1e-3 {
        Ok(msg)
    } else {
        Err(msg)
    }
}

fn run_config(cmd: Command, json: &str, out: &Path) -> Result<Vec<PathBuf>, String> {
    let mut cfg = RunConfig::from_json(json).map_err(|e| e.to_string())?;
    cfg.output_dir = out.to_path_buf();
    cli::execute(cmd, &cfg).map_err(|e| e.to_string())
}

fn synthetic_sweep() -> Outcome {
    let json = std::fs::read_to_string(workspace().join("configs/sweep.json")).map_err(|e| e.to_string())?;
    let dir = tempfile::tempdir().map_err(|e| e.to_string())?;
    run_config(Command::Train, &json, dir.path())?;
    let mut rd = csv::Reader::from_path(dir.path().join("sweep.csv")).map_err(|e| e.to_string())?;
    let mut cells = Vec::new();
    for row in rd.records() {
        let row = row.map_err(|e| e.to_string())?;
        cells.push((row[0].to_string(), row[1].to_string(), row[3].parse::<f64>().unwrap()));
    }
    let bad: Vec<String> = cells
        .iter()
        .filter(|c| c.2.is_nan() || c.2 < 0.90)
        .map(|(p, l, acc)| format!("p={p} λ={l}: {acc:.3}"))
        .collect();
    if cells.len() == 9 && bad.is_empty() {
        Ok(format!("all {} cells ≥ 0.90", cells.len()))
    } else {
        Err(format!("{} of {} cells below 0.90 [{}]", bad.len(), cells.len(), bad.join(", ")))
    }
}

fn mnist() -> Outcome {
    let dir = mnist_dir();
    let json = format!(r#"{{"mnist": {{"dir": {}, "pairs": [[0, 1], [2, 7]]}}}}"#, serde_json::to_string(&dir).unwrap());
    let out = tempfile::tempdir().map_err(|e| e.to_string())?;
    run_config(Command::Mnist, &json, out.path())?;
    let text = std::fs::read_to_string(out.path().join("mnist_summary.json")).map_err(|e| e.to_string())?;
    let summary: Vec<Value> = serde_json::from_str(&text).map_err(|e| e.to_string())?;
    let acc = |i: usize| summary[i]["accuracy"].as_f64().unwrap();
    let (a01, a27) = (acc(0), acc(1));
    let msg = format!("(0,1) accuracy {a01:.4} (≥ 0.85), (2,7) accuracy {a27:.4} (≥ 0.79)");
    if a01 >= 0.85 && a27 >= 0.79 {
        Ok(msg)
    } else {
        Err(msg)
    }
}

fn determinism() -> Outcome {
    let mnist = mnist_dir();
    let mut jobs = vec![
        (
            Command::Train,
            r#"{"seed": 3, "data": {"source": "synthetic", "n_raw": 600},
                "net": {"p": [1, 3]}, "loss": {"lambda_grid": [0.0, 0.03125]},
                "sgd": {"batch_b": 16, "epochs": 3, "record_every": 7}}"#
                .to_string(),
        ),
        (
            Command::Verify,
            r#"{"seed": 3, "data": {"source": "synthetic", "n_raw": 400},
                "net": {"p": 3}, "loss": {"lambda": 0.0625}, "verify": {}}"#
                .to_string(),
        ),
        (
            Command::Sde,
            r#"{"seed": 3, "data": {"source": "synthetic", "n_raw": 200, "dim_d": 3},
                "net": {"p": 2, "activation": "softplus:4.0"}, "loss": {"lambda": 0.5},
                "sde": {"temp_s": 0.05, "horizon_t": 1.0, "ensemble_m": 70, "record_every": 10}}"#
                .to_string(),
        ),
        (
            Command::Gibbs,
            r#"{"seed": 3, "gibbs": {"potential": {"kind": "double_well", "lambda": 0.02}, "temp_s": 0.2}}"#.to_string(),
        ),
        (
            Command::Gibbs,
            r#"{"seed": 3, "data": {"source": "synthetic", "n_raw": 200, "dim_d": 2},
                "net": {"p": 1}, "loss": {"lambda": 0.1},
                "gibbs": {"potential": {"kind": "loss"}, "temp_s": 0.1, "grid_n": 96}}"#
                .to_string(),
        ),
        (
            Command::GenData,
            r#"{"seed": 3, "data": {"source": "synthetic", "n_raw": 500}, "gen_data": {}}"#.to_string(),
        ),
    ];
    if villani_net::data::MnistFiles::in_dir(&mnist).exist() {
        jobs.push((
            Command::Mnist,
            format!(
                r#"{{"seed": 3, "mnist": {{"dir": {}, "pairs": [[0, 1]], "epochs": 1, "record_every": 1}}}}"#,
                serde_json::to_string(&mnist).unwrap()
            ),
        ));
    }
    let mut files = 0;
    for (cmd, json) in &jobs {
        let a = tempfile::tempdir().map_err(|e| e.to_string())?;
        let b = tempfile::tempdir().map_err(|e| e.to_string())?;
        let pa = run_config(*cmd, json, a.path())?;
        let pb = run_config(*cmd, json, b.path())?;
        for (x, y) in pa.iter().zip(&pb) {
            if std::fs::read(x).unwrap() != std::fs::read(y).unwrap() {
                return Err(format!("{cmd:?}: {} differs between runs", x.file_name().unwrap().to_string_lossy()));
            }
            files += 1;
        }
    }
    let msg = format!("{} commands, {files} artifacts byte-identical", jobs.len());
    if jobs.iter().any(|j| j.0 == Command::Mnist) {
        Ok(msg)
    } else {
        Err(format!("{msg}; mnist not covered, no files in {}", mnist.display()))
    }
}

fn main() -> ExitCode {
    type Criterion = (&'static str, u64, fn() -> Outcome);
    let criteria: [Criterion; 10] = [
        ("lambda_c reproduction", 1, lambda_c_reproduction),
        ("derivative oracles", 5, derivative_oracles),
        ("bound dominance", 30, bound_dominance),
        ("Villani divergence", 10, villani_divergence),
        ("tiny-instance global convergence", 60, tiny_instance),
        ("OU analytics", 120, ou_analytics),
        ("Poincare check", 30, poincare),
        ("synthetic sweep", 300, synthetic_sweep),
        ("MNIST", 900, mnist),
        ("determinism", 600, determinism),
    ];
    let mut failed = 0;
    for (name, budget, run) in criteria {
        let start = Instant::now();
        let outcome = run();
        let elapsed = start.elapsed();
        let over = elapsed > Duration::from_secs(budget);
        let (tag, detail) = match (&outcome, over) {
            (Ok(d), false) => ("PASS", d.clone()),
            (Ok(d), true) => ("FAIL", format!("{d}; over the {budget} s budget")),
            (Err(d), _) => ("FAIL", d.clone()),
        };
        if tag == "FAIL" {
            failed += 1;
        }
        println!("[{tag}] {name}: {detail} ({:.1} s)", elapsed.as_secs_f64());
    }
    println!("{} of {} criteria passed", criteria.len() - failed, criteria.len());
    if failed == 0 {
        ExitCode::SUCCESS
    } else {
        ExitCode::FAILURE
    }
}
