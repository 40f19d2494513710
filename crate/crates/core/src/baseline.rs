//! Least-squares count regressor on mask shape features.

use std::path::Path;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::dataset::DatasetManifest;
use crate::error::{Error, Result};
use crate::metrics::Prediction;
use crate::preprocess::{convex_hull_area, segment_plant, BackgroundRef, BinaryMask, SegmentOptions};
use crate::render::RasterImage;

pub const FEATURE_NAMES: [&str; 6] = ["foreground", "hull_area", "bbox_height", "bbox_width", "day", "bias"];

/// Ridge added to the scaled normal matrix when it is singular.
pub const RIDGE: f64 = 1e-8;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct FeatureVector(pub [f64; 6]);

impl AsRef<[f64]> for FeatureVector {
    fn as_ref(&self) -> &[f64] {
        &self.0
    }
}

pub fn extract_features(mask: &BinaryMask, day: u32) -> FeatureVector {
    let mut x0 = u32::MAX;
    let mut y0 = u32::MAX;
    let mut x1 = 0;
    let mut y1 = 0;
    let mut n = 0usize;
    for y in 0..mask.height {
        for x in 0..mask.width {
            if mask.get(x, y) {
                n += 1;
                x0 = x0.min(x);
                x1 = x1.max(x);
                y0 = y0.min(y);
                y1 = y1.max(y);
            }
        }
    }
    let (h, w) = if n == 0 { (0.0, 0.0) } else { ((y1 - y0 + 1) as f64, (x1 - x0 + 1) as f64) };
    FeatureVector([n as f64, convex_hull_area(mask), h, w, day as f64, 1.0])
}

/// Segments `img` and extracts its features.
pub fn image_features(img: &RasterImage, bg: &BackgroundRef, opts: &SegmentOptions, day: u32) -> Result<FeatureVector> {
    Ok(extract_features(&segment_plant(img, bg, opts)?, day))
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LinearModel {
    pub weights: Vec<f64>,
    /// True when the ridge fallback was needed.
    pub ridge: bool,
}

impl LinearModel {
    pub fn predict(&self, x: &[f64]) -> Result<f64> {
        if x.len() != self.weights.len() {
            return Err(Error::DimensionMismatch(format!(
                "{} features for a model with {} weights",
                x.len(),
                self.weights.len()
            )));
        }
        Ok(self.weights.iter().zip(x).map(|(w, v)| w * v).sum())
    }

    pub fn save(&self, path: &Path) -> Result<()> {
        std::fs::write(path, serde_json::to_string_pretty(self)?).map_err(|e| Error::io(path, e))
    }

    pub fn load(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        Ok(serde_json::from_str(&text)?)
    }
}

/// Gaussian elimination with partial pivoting; `None` when a pivot is at
/// most `tol`.
fn solve(mut a: Vec<Vec<f64>>, mut b: Vec<f64>, tol: f64) -> Option<Vec<f64>> {
    let n = b.len();
    for col in 0..n {
        let piv = (col..n).max_by(|&i, &j| a[i][col].abs().total_cmp(&a[j][col].abs()))?;
        if !(a[piv][col].abs() > tol) {
            return None;
        }
        a.swap(col, piv);
        b.swap(col, piv);
        for row in col + 1..n {
            let f = a[row][col] / a[col][col];
            for k in col..n {
                a[row][k] -= f * a[col][k];
            }
            b[row] -= f * b[col];
        }
    }
    let mut x = vec![0.0; n];
    for i in (0..n).rev() {
        let s: f64 = (i + 1..n).map(|k| a[i][k] * x[k]).sum();
        x[i] = (b[i] - s) / a[i][i];
    }
    x.iter().all(|v| v.is_finite()).then_some(x)
}

/// Ordinary least squares through the normal equations. Columns are scaled
/// to unit max magnitude first; a singular system is retried with ridge
/// [`RIDGE`] on the scaled diagonal.
pub fn fit<R: AsRef<[f64]>>(rows: &[R], targets: &[f64]) -> Result<LinearModel> {
    if rows.len() != targets.len() {
        return Err(Error::DimensionMismatch(format!("{} rows for {} targets", rows.len(), targets.len())));
    }
    let p = rows.first().map(|r| r.as_ref().len()).unwrap_or(0);
    if p == 0 {
        return Err(Error::invalid("no features to fit"));
    }
    if rows.len() < p {
        return Err(Error::invalid(format!("{} samples cannot determine {p} weights", rows.len())));
    }
    if rows.iter().any(|r| r.as_ref().len() != p) {
        return Err(Error::DimensionMismatch("feature rows differ in length".into()));
    }
    if rows.iter().flat_map(|r| r.as_ref()).chain(targets).any(|v| !v.is_finite()) {
        return Err(Error::invalid("features and targets must be finite"));
    }
    let scale: Vec<f64> = (0..p)
        .map(|j| {
            let m = rows.iter().map(|r| r.as_ref()[j].abs()).fold(0.0, f64::max);
            if m > 0.0 {
                m
            } else {
                1.0
            }
        })
        .collect();
    let mut ata = vec![vec![0.0; p]; p];
    let mut atb = vec![0.0; p];
    for (r, &t) in rows.iter().zip(targets) {
        let z: Vec<f64> = r.as_ref().iter().zip(&scale).map(|(v, s)| v / s).collect();
        for i in 0..p {
            atb[i] += z[i] * t;
            for j in 0..p {
                ata[i][j] += z[i] * z[j];
            }
        }
    }
    let max_diag = (0..p).map(|i| ata[i][i]).fold(0.0, f64::max);
    let tol = 1e-12 * max_diag.max(1.0);
    let (z, ridge) = match solve(ata.clone(), atb.clone(), tol) {
        Some(z) => (z, false),
        None => {
            log::warn!("normal equations are singular; refitting with ridge {RIDGE}");
            for (i, row) in ata.iter_mut().enumerate() {
                row[i] += RIDGE;
            }
            let z = solve(ata, atb, 0.0).ok_or_else(|| Error::Singular("normal equations stay singular with ridge".into()))?;
            (z, true)
        }
    };
    Ok(LinearModel {
        weights: z.iter().zip(&scale).map(|(w, s)| w / s).collect(),
        ridge,
    })
}

/// Features and counts for `ids` of `manifest`, segmenting against a flat
/// background colour.
pub fn manifest_features(
    manifest: &DatasetManifest,
    ids: &[String],
    bg: &BackgroundRef,
    opts: &SegmentOptions,
) -> Result<Vec<(FeatureVector, f64)>> {
    let records = ids
        .iter()
        .map(|id| manifest.get(id).ok_or_else(|| Error::Data(format!("image id '{id}' not in manifest"))))
        .collect::<Result<Vec<_>>>()?;
    records
        .par_iter()
        .map(|r| {
            let img = RasterImage::load(&manifest.image_path(r))?;
            Ok((image_features(&img, bg, opts, r.day)?, r.count as f64))
        })
        .collect()
}

pub fn train_on_manifest(
    manifest: &DatasetManifest,
    ids: &[String],
    bg: &BackgroundRef,
    opts: &SegmentOptions,
) -> Result<LinearModel> {
    let data = manifest_features(manifest, ids, bg, opts)?;
    let (x, y): (Vec<FeatureVector>, Vec<f64>) = data.into_iter().unzip();
    fit(&x, &y)
}

pub fn predict_manifest(
    model: &LinearModel,
    manifest: &DatasetManifest,
    ids: &[String],
    bg: &BackgroundRef,
    opts: &SegmentOptions,
) -> Result<Vec<Prediction>> {
    let data = manifest_features(manifest, ids, bg, opts)?;
    ids.iter()
        .zip(data)
        .map(|(id, (x, _))| {
            Ok(Prediction {
                image_id: id.clone(),
                predicted_count: model.predict(&x.0)?,
            })
        })
        .collect()
}
