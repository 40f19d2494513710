//! Evaluation metrics for count predictions and distribution comparison.

use std::collections::{BTreeMap, BTreeSet, HashMap};
use std::io::Write;
use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::dataset::{DatasetManifest, ExperimentSplit};
use crate::error::{Error, Result};

fn check(pred: &[f64], truth: &[f64]) -> Result<()> {
    if pred.len() != truth.len() {
        return Err(Error::DimensionMismatch(format!(
            "{} predictions for {} ground-truth values",
            pred.len(),
            truth.len()
        )));
    }
    if pred.is_empty() {
        return Err(Error::invalid("no values to evaluate"));
    }
    if let Some(v) = pred.iter().chain(truth).find(|v| !v.is_finite()) {
        return Err(Error::invalid(format!("non-finite value {v}")));
    }
    Ok(())
}

fn mean(v: &[f64]) -> f64 {
    v.iter().sum::<f64>() / v.len() as f64
}

fn abs_errors(pred: &[f64], truth: &[f64]) -> Vec<f64> {
    pred.iter().zip(truth).map(|(p, t)| (t - p).abs()).collect()
}

/// Mean of |truth − pred|.
pub fn mean_absolute_loss(pred: &[f64], truth: &[f64]) -> Result<f64> {
    check(pred, truth)?;
    Ok(mean(&abs_errors(pred, truth)))
}

/// Population standard deviation (divisor n) of the absolute errors.
pub fn abs_loss_sd(pred: &[f64], truth: &[f64]) -> Result<f64> {
    check(pred, truth)?;
    let e = abs_errors(pred, truth);
    let m = mean(&e);
    Ok((e.iter().map(|x| (x - m).powi(2)).sum::<f64>() / e.len() as f64).sqrt())
}

/// Coefficient of determination 1 − SS_res/SS_tot. Negative when the
/// predictions are worse than the truth mean.
pub fn r_squared(pred: &[f64], truth: &[f64]) -> Result<f64> {
    check(pred, truth)?;
    if truth.len() < 2 {
        return Err(Error::invalid("r² needs at least two values"));
    }
    let m = mean(truth);
    let ss_tot: f64 = truth.iter().map(|t| (t - m).powi(2)).sum();
    if ss_tot == 0.0 {
        return Err(Error::invalid("r² is undefined when every ground-truth value is equal"));
    }
    let ss_res: f64 = pred.iter().zip(truth).map(|(p, t)| (t - p).powi(2)).sum();
    Ok(1.0 - ss_res / ss_tot)
}

/// Squared sample Pearson correlation.
pub fn pearson_r2(pred: &[f64], truth: &[f64]) -> Result<f64> {
    check(pred, truth)?;
    let (mp, mt) = (mean(pred), mean(truth));
    let mut sxy = 0.0;
    let mut sxx = 0.0;
    let mut syy = 0.0;
    for (p, t) in pred.iter().zip(truth) {
        sxy += (p - mp) * (t - mt);
        sxx += (p - mp).powi(2);
        syy += (t - mt).powi(2);
    }
    if sxx == 0.0 || syy == 0.0 {
        return Err(Error::invalid("Pearson correlation is undefined for a constant vector"));
    }
    Ok((sxy * sxy / (sxx * syy)).min(1.0))
}

pub fn rmse(pred: &[f64], truth: &[f64]) -> Result<f64> {
    check(pred, truth)?;
    Ok((pred.iter().zip(truth).map(|(p, t)| (t - p).powi(2)).sum::<f64>() / pred.len() as f64).sqrt())
}

/// Histogram of truth − pred rounded half away from zero.
pub fn count_difference_histogram(pred: &[f64], truth: &[f64]) -> Result<BTreeMap<i64, usize>> {
    if pred.len() != truth.len() {
        return Err(Error::DimensionMismatch(format!(
            "{} predictions for {} ground-truth values",
            pred.len(),
            truth.len()
        )));
    }
    let mut h = BTreeMap::new();
    for (p, t) in pred.iter().zip(truth) {
        // f64::round already rounds half away from zero
        *h.entry((t - p).round() as i64).or_insert(0) += 1;
    }
    Ok(h)
}

/// Total-variation distance ½ Σ |p(k) − q(k)| between two histograms, each
/// normalised to unit mass first. An empty side counts as zero mass.
pub fn total_variation<K: Ord + Copy>(p: &BTreeMap<K, f64>, q: &BTreeMap<K, f64>) -> f64 {
    let norm = |h: &BTreeMap<K, f64>| {
        let s: f64 = h.values().sum();
        if s > 0.0 {
            s
        } else {
            1.0
        }
    };
    let (sp, sq) = (norm(p), norm(q));
    let keys: BTreeSet<K> = p.keys().chain(q.keys()).copied().collect();
    0.5 * keys
        .iter()
        .map(|k| (p.get(k).copied().unwrap_or(0.0) / sp - q.get(k).copied().unwrap_or(0.0) / sq).abs())
        .sum::<f64>()
}

/// [`total_variation`] that rejects histograms without positive mass.
pub fn histogram_distance<K: Ord + Copy>(p: &BTreeMap<K, f64>, q: &BTreeMap<K, f64>) -> Result<f64> {
    for h in [p, q] {
        if h.values().any(|v| *v < 0.0 || !v.is_finite()) {
            return Err(Error::invalid("histogram frequencies must be finite and nonnegative"));
        }
        if h.values().sum::<f64>() <= 0.0 {
            return Err(Error::invalid("histogram is empty"));
        }
    }
    Ok(total_variation(p, q))
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MetricsReport {
    pub n: usize,
    pub mae: f64,
    pub abs_loss_sd: f64,
    pub r_squared: f64,
    /// None when the predictions are constant.
    pub pearson_r2: Option<f64>,
    pub rmse: f64,
    pub count_difference_histogram: BTreeMap<i64, usize>,
}

impl MetricsReport {
    pub fn compute(pred: &[f64], truth: &[f64]) -> Result<Self> {
        check(pred, truth)?;
        let r_squared = r_squared(pred, truth)?;
        Ok(MetricsReport {
            n: pred.len(),
            mae: mean_absolute_loss(pred, truth)?,
            abs_loss_sd: abs_loss_sd(pred, truth)?,
            r_squared,
            // truth already has variance here, so only constant predictions fail
            pearson_r2: pearson_r2(pred, truth).ok(),
            rmse: rmse(pred, truth)?,
            count_difference_histogram: count_difference_histogram(pred, truth)?,
        })
    }

    /// "MAE (SD, R²)" with two decimals, as in a results table cell.
    pub fn table_cell(&self) -> String {
        format!("{:.2} ({:.2}, {:.2})", self.mae, self.abs_loss_sd, self.r_squared)
    }

    pub fn to_json(&self) -> Result<String> {
        Ok(serde_json::to_string_pretty(self)?)
    }
}

/// Writes a histogram as `bin,frequency` CSV rows.
pub fn write_histogram_csv<K: std::fmt::Display, V: std::fmt::Display>(
    out: &mut impl Write,
    hist: &BTreeMap<K, V>,
) -> std::io::Result<()> {
    writeln!(out, "bin,frequency")?;
    for (k, v) in hist {
        writeln!(out, "{k},{v}")?;
    }
    Ok(())
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Prediction {
    pub image_id: String,
    pub predicted_count: f64,
}

pub fn read_predictions(path: &Path) -> Result<Vec<Prediction>> {
    let mut rd = csv::Reader::from_path(path).map_err(|e| Error::Data(format!("{}: {e}", path.display())))?;
    let mut out = Vec::new();
    for row in rd.deserialize() {
        let p: Prediction = row.map_err(|e| Error::Data(format!("{}: {e}", path.display())))?;
        out.push(p);
    }
    Ok(out)
}

pub fn write_predictions(path: &Path, preds: &[Prediction]) -> Result<()> {
    let mut w = csv::Writer::from_path(path).map_err(|e| Error::Data(format!("{}: {e}", path.display())))?;
    for p in preds {
        w.serialize(p)?;
    }
    w.flush().map_err(|e| Error::io(path, e))?;
    Ok(())
}

/// Joins predictions to the manifest counts over the split's test ids and
/// computes every metric.
pub fn evaluate(preds: &[Prediction], manifest: &DatasetManifest, split: &ExperimentSplit) -> Result<MetricsReport> {
    let mut by_id: HashMap<&str, f64> = HashMap::with_capacity(preds.len());
    let mut dups = Vec::new();
    for p in preds {
        if by_id.insert(p.image_id.as_str(), p.predicted_count).is_some() {
            dups.push(p.image_id.clone());
        }
    }
    if !dups.is_empty() {
        return Err(Error::Data(format!("duplicate prediction ids: {}", dups.join(", "))));
    }
    let counts: HashMap<&str, u32> = manifest.records.iter().map(|r| (r.image_id.as_str(), r.count)).collect();
    let mut pred = Vec::with_capacity(split.test.len());
    let mut truth = Vec::with_capacity(split.test.len());
    let mut missing = Vec::new();
    let mut unknown = Vec::new();
    for id in &split.test {
        match (by_id.get(id.as_str()), counts.get(id.as_str())) {
            (Some(&p), Some(&t)) => {
                pred.push(p);
                truth.push(t as f64);
            }
            (None, _) => missing.push(id.clone()),
            (_, None) => unknown.push(id.clone()),
        }
    }
    if !missing.is_empty() {
        return Err(Error::Data(format!("missing predictions for test images: {}", missing.join(", "))));
    }
    if !unknown.is_empty() {
        return Err(Error::Data(format!("test images not in the manifest: {}", unknown.join(", "))));
    }
    MetricsReport::compute(&pred, &truth)
}
