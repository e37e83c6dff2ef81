//! JSON run configuration. Unknown keys are rejected everywhere.

use std::path::{Path, PathBuf};

use ndarray::{Array1, Array2};
use rand_distr::{Distribution, StandardNormal};
use serde::{Deserialize, Serialize};

use crate::activation::ActivationProfile;
use crate::bounds::{lambda_c, LambdaCVariant, VerifyOptions};
use crate::data::{gen_synthetic, read_csv, MnistFiles, SyntheticSpec};
use crate::error::{Error, Result};
use crate::net::LabeledDataset;
use crate::rng::substream;
use crate::sgd::InitSpec;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Command {
    Train,
    Verify,
    Sde,
    Gibbs,
    GenData,
    Mnist,
}

impl Command {
    /// Name of the config section that drives this command.
    pub fn section(self) -> &'static str {
        match self {
            Command::Train => "sgd",
            Command::Verify => "verify",
            Command::Sde => "sde",
            Command::Gibbs => "gibbs",
            Command::GenData => "gen_data",
            Command::Mnist => "mnist",
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RunConfig {
    #[serde(default)]
    pub seed: u64,
    #[serde(default = "default_output_dir")]
    pub output_dir: PathBuf,
    pub data: Option<DataSection>,
    pub net: Option<NetSection>,
    pub loss: Option<LossSection>,
    pub sgd: Option<SgdSection>,
    pub verify: Option<VerifySection>,
    pub sde: Option<SdeSection>,
    pub gibbs: Option<GibbsSection>,
    pub gen_data: Option<GenDataSection>,
    pub mnist: Option<MnistSection>,
}

fn default_output_dir() -> PathBuf {
    PathBuf::from("out")
}

impl RunConfig {
    pub fn from_json(text: &str) -> Result<Self> {
        serde_json::from_str(text).map_err(|e| Error::Config(e.to_string()))
    }

    pub fn load(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        RunConfig::from_json(&text)
    }

    fn present_sections(&self) -> Vec<&'static str> {
        let mut out = Vec::new();
        let flags = [
            (self.sgd.is_some(), "sgd"),
            (self.verify.is_some(), "verify"),
            (self.sde.is_some(), "sde"),
            (self.gibbs.is_some(), "gibbs"),
            (self.gen_data.is_some(), "gen_data"),
            (self.mnist.is_some(), "mnist"),
        ];
        for (on, name) in flags {
            if on {
                out.push(name);
            }
        }
        out
    }

    /// Exactly one command section, matching `cmd`, and every referenced file present.
    pub fn validate(&self, cmd: Command) -> Result<()> {
        let present = self.present_sections();
        if present.len() != 1 {
            return Err(Error::Config(format!(
                "exactly one command section required, found {present:?}"
            )));
        }
        if present[0] != cmd.section() {
            return Err(Error::Config(format!(
                "command needs a `{}` section, config has `{}`",
                cmd.section(),
                present[0]
            )));
        }
        let needs = |name: &str, ok: bool| {
            if ok {
                Ok(())
            } else {
                Err(Error::Config(format!("missing `{name}` section")))
            }
        };
        match cmd {
            Command::Train | Command::Verify | Command::Sde => {
                needs("data", self.data.is_some())?;
                needs("net", self.net.is_some())?;
                needs("loss", self.loss.is_some())?;
            }
            Command::GenData => needs("data", self.data.is_some())?,
            Command::Gibbs => {
                if matches!(self.gibbs.as_ref().map(|g| &g.potential), Some(PotentialSection::Loss)) {
                    needs("data", self.data.is_some())?;
                    needs("net", self.net.is_some())?;
                    needs("loss", self.loss.is_some())?;
                }
            }
            Command::Mnist => {}
        }
        if let Some(data) = &self.data {
            data.check_files()?;
        }
        if let Some(m) = &self.mnist {
            let files = MnistFiles::in_dir(&m.dir);
            if let Some(p) = files.all().iter().find(|p| !p.is_file()) {
                return Err(Error::Config(format!("MNIST file not found: {}", p.display())));
            }
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "source", rename_all = "snake_case", deny_unknown_fields)]
pub enum DataSection {
    Synthetic {
        #[serde(default = "d_n_raw")]
        n_raw: usize,
        #[serde(default = "d_dim")]
        dim_d: usize,
        #[serde(default = "d_margin")]
        margin: f64,
        #[serde(default = "d_test_fraction")]
        test_fraction: f64,
        /// Defaults to the run seed.
        seed: Option<u64>,
    },
    Mnist {
        dir: PathBuf,
        pair: [u8; 2],
    },
    Inline {
        features: Vec<Vec<f64>>,
        labels: Vec<f64>,
        #[serde(default)]
        test_features: Option<Vec<Vec<f64>>>,
        #[serde(default)]
        test_labels: Option<Vec<f64>>,
    },
    Csv {
        train: PathBuf,
        test: Option<PathBuf>,
    },
}

fn d_n_raw() -> usize {
    10_000
}
fn d_dim() -> usize {
    10
}
fn d_margin() -> f64 {
    0.2
}
fn d_test_fraction() -> f64 {
    0.2
}

impl DataSection {
    fn check_files(&self) -> Result<()> {
        let missing = |p: &Path| Error::Config(format!("file not found: {}", p.display()));
        match self {
            DataSection::Mnist { dir, .. } => {
                let files = MnistFiles::in_dir(dir);
                if let Some(p) = files.all().iter().find(|p| !p.is_file()) {
                    return Err(missing(p));
                }
            }
            DataSection::Csv { train, test } => {
                if !train.is_file() {
                    return Err(missing(train));
                }
                if let Some(t) = test {
                    if !t.is_file() {
                        return Err(missing(t));
                    }
                }
            }
            _ => {}
        }
        Ok(())
    }

    /// `(train, test)`; the test split is absent for inline or csv data without one.
    pub fn load(&self, run_seed: u64) -> Result<(LabeledDataset, Option<LabeledDataset>)> {
        match self {
            DataSection::Synthetic {
                n_raw,
                dim_d,
                margin,
                test_fraction,
                seed,
            } => {
                let spec = SyntheticSpec {
                    n_raw: *n_raw,
                    dim_d: *dim_d,
                    margin: *margin,
                    test_fraction: *test_fraction,
                    seed: seed.unwrap_or(run_seed),
                };
                let (train, test) = gen_synthetic(&spec)?;
                Ok((train, Some(test)))
            }
            DataSection::Mnist { dir, pair } => {
                let (train, test) = MnistFiles::in_dir(dir).load_pair(pair[0], pair[1])?;
                Ok((train, Some(test)))
            }
            DataSection::Inline {
                features,
                labels,
                test_features,
                test_labels,
            } => {
                let train = inline(features, labels)?;
                let test = match (test_features, test_labels) {
                    (Some(f), Some(l)) => Some(inline(f, l)?),
                    (None, None) => None,
                    _ => return Err(Error::Config("test_features and test_labels go together".into())),
                };
                Ok((train, test))
            }
            DataSection::Csv { train, test } => {
                let open = |p: &Path| std::fs::File::open(p).map_err(|e| Error::io(p, e));
                let tr = read_csv(open(train)?)?;
                let te = match test {
                    Some(t) => Some(read_csv(open(t)?)?),
                    None => None,
                };
                Ok((tr, te))
            }
        }
    }
}

fn inline(features: &[Vec<f64>], labels: &[f64]) -> Result<LabeledDataset> {
    let n = features.len();
    let d = features.first().map_or(0, |r| r.len());
    if let Some(bad) = features.iter().find(|r| r.len() != d) {
        return Err(Error::DimensionMismatch {
            what: "inline row width",
            expected: d,
            actual: bad.len(),
        });
    }
    let flat: Vec<f64> = features.iter().flatten().copied().collect();
    let x = Array2::from_shape_vec((n, d), flat).map_err(|e| Error::Config(e.to_string()))?;
    LabeledDataset::new(x, Array1::from(labels.to_vec()))
}

/// One width or a list of widths.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(untagged)]
pub enum Widths {
    One(usize),
    Many(Vec<usize>),
}

impl Widths {
    pub fn list(&self) -> Vec<usize> {
        match self {
            Widths::One(p) => vec![*p],
            Widths::Many(v) => v.clone(),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum OuterInit {
    /// `a ~ N(0, I_p)`, then scaled to unit norm.
    NormalUnit,
    Fixed(Vec<f64>),
}

impl OuterInit {
    pub fn sample(&self, p: usize, seed: u64) -> Result<Vec<f64>> {
        match self {
            OuterInit::Fixed(a) if a.len() == p => Ok(a.clone()),
            OuterInit::Fixed(a) => Err(Error::DimensionMismatch {
                what: "fixed outer layer",
                expected: p,
                actual: a.len(),
            }),
            OuterInit::NormalUnit => {
                let mut rng = substream(seed, 0);
                loop {
                    let a: Vec<f64> = (0..p).map(|_| StandardNormal.sample(&mut rng)).collect();
                    let n = a.iter().map(|v| v * v).sum::<f64>().sqrt();
                    if n > 0.0 {
                        return Ok(a.into_iter().map(|v| v / n).collect());
                    }
                }
            }
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct NetSection {
    pub p: Widths,
    #[serde(default = "default_activation")]
    pub activation: ActivationProfile,
    #[serde(default = "default_outer")]
    pub outer_init: OuterInit,
}

fn default_activation() -> ActivationProfile {
    ActivationProfile::sigmoid(1.0).unwrap()
}

fn default_outer() -> OuterInit {
    OuterInit::NormalUnit
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct LossSection {
    pub lambda: Option<f64>,
    pub lambda_grid: Option<Vec<f64>>,
    /// Multiples of the lemma threshold `λ_c` evaluated at the sampled `a` and the data's `B_x`.
    pub lambda_c_multiples: Option<Vec<f64>>,
}

impl LossSection {
    pub fn lambdas(&self, act: &ActivationProfile, a_norm: f64, b_x: f64) -> Result<Vec<f64>> {
        match (&self.lambda, &self.lambda_grid, &self.lambda_c_multiples) {
            (Some(l), None, None) => Ok(vec![*l]),
            (None, Some(g), None) if !g.is_empty() => Ok(g.clone()),
            (None, None, Some(m)) if !m.is_empty() => {
                let lc = lambda_c(act, a_norm, b_x, LambdaCVariant::Lemma);
                Ok(m.iter().map(|k| k * lc).collect())
            }
            _ => Err(Error::Config(
                "loss needs exactly one non-empty of lambda, lambda_grid, lambda_c_multiples".into(),
            )),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SgdSection {
    #[serde(default = "default_step")]
    pub step_s: f64,
    pub batch_b: usize,
    pub epochs: Option<usize>,
    pub num_steps: Option<usize>,
    #[serde(default)]
    pub init: InitSpec,
    #[serde(default = "one")]
    pub record_every: usize,
}

fn default_step() -> f64 {
    0.1
}

fn one() -> usize {
    1
}

impl SgdSection {
    pub fn steps(&self, n: usize) -> Result<usize> {
        match (self.epochs, self.num_steps) {
            (Some(e), None) => Ok(crate::sgd::SgdConfig::steps_for_epochs(e, n, self.batch_b)),
            (None, Some(k)) => Ok(k),
            _ => Err(Error::Config("sgd needs exactly one of epochs, num_steps".into())),
        }
    }
}

pub type VerifySection = VerifyOptions;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SdeSection {
    pub temp_s: f64,
    /// Defaults to `min(10⁻³, 0.1/gLip)`.
    pub dt: Option<f64>,
    pub horizon_t: f64,
    pub ensemble_m: usize,
    #[serde(default)]
    pub init: InitSpec,
    #[serde(default = "one")]
    pub record_every: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case", deny_unknown_fields)]
pub enum PotentialSection {
    /// `L̃` from the data, net and loss sections.
    Loss,
    /// `(curvature/2)‖w‖²`
    Quadratic { curvature: f64, dim: usize },
    /// `(w² − 1)²/4 + λw²`
    DoubleWell { lambda: f64 },
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct GibbsSection {
    pub potential: PotentialSection,
    pub temp_s: f64,
    /// Box half-width; defaults to a radius derived from the quadratic minorant.
    pub radius: Option<f64>,
    #[serde(default = "default_grid")]
    pub grid_n: usize,
    /// Inner radius for `ε(R)` and `C(R)`; defaults to the smallest radius on a
    /// 64-step ladder where the ball holds half the mass and `V_s > 0` outside.
    pub ball_radius: Option<f64>,
}

fn default_grid() -> usize {
    256
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct GenDataSection {}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct MnistSection {
    #[serde(default = "default_mnist_dir")]
    pub dir: PathBuf,
    #[serde(default = "default_pairs")]
    pub pairs: Vec<[u8; 2]>,
    #[serde(default = "default_mnist_p")]
    pub p: usize,
    #[serde(default = "default_activation")]
    pub activation: ActivationProfile,
    #[serde(default = "default_outer")]
    pub outer_init: OuterInit,
    #[serde(default = "default_mnist_batch")]
    pub batch_b: usize,
    #[serde(default = "default_mnist_epochs")]
    pub epochs: usize,
    #[serde(default = "default_mnist_lambda")]
    pub lambda: f64,
    #[serde(default = "default_mnist_step")]
    pub step_s: f64,
    #[serde(default)]
    pub init: InitSpec,
    #[serde(default = "one")]
    pub record_every: usize,
}

fn default_mnist_dir() -> PathBuf {
    PathBuf::from("data/mnist")
}
fn default_pairs() -> Vec<[u8; 2]> {
    vec![[0, 1]]
}
fn default_mnist_p() -> usize {
    12
}
fn default_mnist_batch() -> usize {
    3000
}
fn default_mnist_epochs() -> usize {
    100
}
fn default_mnist_lambda() -> f64 {
    0.03125
}
pub const DEFAULT_MNIST_STEP: f64 = 0.2;
fn default_mnist_step() -> f64 {
    DEFAULT_MNIST_STEP
}
