use std::io::{Read, Write};

use ndarray::{Array1, Array2};
use rand::seq::SliceRandom;
use rand_distr::{Distribution, StandardNormal};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::net::LabeledDataset;
use crate::rng::substream;

/// Unit-norm Gaussian rows labelled by the sign of the last coordinate, with
/// a band `|x_d| ≤ margin` removed.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct SyntheticSpec {
    /// Rows drawn before filtering.
    pub n_raw: usize,
    pub dim_d: usize,
    pub margin: f64,
    pub test_fraction: f64,
    pub seed: u64,
}

impl Default for SyntheticSpec {
    fn default() -> Self {
        SyntheticSpec {
            n_raw: 10_000,
            dim_d: 10,
            margin: 0.2,
            test_fraction: 0.2,
            seed: 0,
        }
    }
}

/// Returns `(train, test)`; both splits keep the generation order.
pub fn gen_synthetic(spec: &SyntheticSpec) -> Result<(LabeledDataset, LabeledDataset)> {
    if spec.dim_d == 0 || spec.n_raw == 0 {
        return Err(Error::invalid("n_raw and dim_d must be ≥ 1"));
    }
    if !(spec.test_fraction > 0.0 && spec.test_fraction < 1.0) {
        return Err(Error::invalid(format!("test_fraction must lie in (0, 1), got {}", spec.test_fraction)));
    }
    if !(spec.margin >= 0.0) {
        return Err(Error::invalid(format!("margin must be ≥ 0, got {}", spec.margin)));
    }
    let d = spec.dim_d;
    let mut rng = substream(spec.seed, 0);
    let mut rows: Vec<f64> = Vec::new();
    let mut labels: Vec<f64> = Vec::new();
    let mut x = vec![0.0; d];
    for _ in 0..spec.n_raw {
        x.iter_mut().for_each(|v| *v = StandardNormal.sample(&mut rng));
        let nrm = x.iter().map(|v| v * v).sum::<f64>().sqrt();
        if nrm == 0.0 {
            continue;
        }
        x.iter_mut().for_each(|v| *v /= nrm);
        let last = x[d - 1];
        let y = if last > spec.margin {
            1.0
        } else if last < -spec.margin {
            -1.0
        } else {
            continue;
        };
        rows.extend_from_slice(&x);
        labels.push(y);
    }
    let positive = labels.iter().filter(|&&y| y > 0.0).count();
    let negative = labels.len() - positive;
    if positive < 2 || negative < 2 {
        return Err(Error::TooFewSamples { positive, negative });
    }
    let n = labels.len();
    let n_test = ((n as f64 * spec.test_fraction).round() as usize).clamp(1, n - 1);
    let mut order: Vec<usize> = (0..n).collect();
    order.shuffle(&mut substream(spec.seed, 1));
    let mut test_idx = order[..n_test].to_vec();
    let mut train_idx = order[n_test..].to_vec();
    test_idx.sort_unstable();
    train_idx.sort_unstable();
    let all = LabeledDataset::new(Array2::from_shape_vec((n, d), rows).unwrap(), Array1::from(labels))?;
    Ok((all.select(&train_idx)?, all.select(&test_idx)?))
}

/// Header `x0,…,x{d-1},label`, one sample per row.
pub fn write_csv<W: Write>(data: &LabeledDataset, out: W) -> Result<()> {
    let mut w = csv::Writer::from_writer(out);
    let mut header: Vec<String> = (0..data.d()).map(|k| format!("x{k}")).collect();
    header.push("label".into());
    w.write_record(&header)?;
    for i in 0..data.n() {
        let mut rec: Vec<String> = data.row(i).iter().map(|v| v.to_string()).collect();
        rec.push(data.label(i).to_string());
        w.write_record(&rec)?;
    }
    w.flush().map_err(|e| Error::io("<csv>", e))?;
    Ok(())
}

/// Inverse of [`write_csv`]; the last column is the label.
pub fn read_csv<R: Read>(input: R) -> Result<LabeledDataset> {
    let mut r = csv::Reader::from_reader(input);
    let mut feats = Vec::new();
    let mut labels = Vec::new();
    let mut d = None;
    for rec in r.records() {
        let rec = rec?;
        let vals: Vec<f64> = rec
            .iter()
            .map(|f| f.trim().parse::<f64>().map_err(|e| Error::invalid(format!("bad number {f:?}: {e}"))))
            .collect::<Result<_>>()?;
        if vals.len() < 2 {
            return Err(Error::invalid("each row needs at least one feature and a label"));
        }
        let k = vals.len() - 1;
        if *d.get_or_insert(k) != k {
            return Err(Error::DimensionMismatch {
                what: "csv row width",
                expected: d.unwrap() + 1,
                actual: vals.len(),
            });
        }
        feats.extend_from_slice(&vals[..k]);
        labels.push(vals[k]);
    }
    let d = d.ok_or_else(|| Error::invalid("csv has no rows"))?;
    LabeledDataset::new(Array2::from_shape_vec((labels.len(), d), feats).unwrap(), Array1::from(labels))
}
