use std::collections::BTreeMap;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::{simulate, PlantModelPreset};
use crate::error::{Error, Result};
use crate::metrics::total_variation;
use crate::rng::mix64;

/// Stochastic parameter holding per-plant branch vigour.
pub const VIGOUR_PARAM: &str = "vigour";
/// Model constant holding the branching threshold.
pub const THRESHOLD_CONST: &str = "branch_thr";

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CalibrationGrid {
    pub vigour_mean: Vec<f64>,
    pub vigour_sd: Vec<f64>,
    pub threshold: Vec<f64>,
}

impl CalibrationGrid {
    /// Evenly spaced inclusive ranges `(start, stop, steps)`.
    pub fn ranges(mean: (f64, f64, usize), sd: (f64, f64, usize), thr: (f64, f64, usize)) -> Self {
        let r = |(a, b, n): (f64, f64, usize)| -> Vec<f64> {
            match n {
                0 => Vec::new(),
                1 => vec![a],
                _ => (0..n).map(|i| a + (b - a) * i as f64 / (n - 1) as f64).collect(),
            }
        };
        Self {
            vigour_mean: r(mean),
            vigour_sd: r(sd),
            threshold: r(thr),
        }
    }

    /// Grid points in lexicographic order.
    pub fn points(&self) -> Vec<[f64; 3]> {
        let sorted = |v: &[f64]| {
            let mut v = v.to_vec();
            v.sort_by(f64::total_cmp);
            v.dedup();
            v
        };
        let (m, s, t) = (sorted(&self.vigour_mean), sorted(&self.vigour_sd), sorted(&self.threshold));
        let mut out = Vec::with_capacity(m.len() * s.len() * t.len());
        for &a in &m {
            for &b in &s {
                for &c in &t {
                    out.push([a, b, c]);
                }
            }
        }
        out
    }
}

#[derive(Debug, Clone)]
pub struct CalibrationResult {
    pub preset: PlantModelPreset,
    pub vigour_mean: f64,
    pub vigour_sd: f64,
    pub threshold: f64,
    pub distance: f64,
    /// Every evaluated point with its distance, in grid order.
    pub evaluated: Vec<([f64; 3], f64)>,
}

/// Preset with branch vigour and threshold replaced.
pub fn with_branch_params(preset: &PlantModelPreset, point: [f64; 3]) -> Result<PlantModelPreset> {
    let mut p = preset.clone();
    p.apply_override(&format!("param.{VIGOUR_PARAM}.mean"), point[0])?;
    p.apply_override(&format!("param.{VIGOUR_PARAM}.sd"), point[1])?;
    p.apply_override(&format!("const.{THRESHOLD_CONST}"), point[2])?;
    Ok(p)
}

/// Final-day branch counts (count → plants) of `n` plants simulated with
/// seeds `mix64(seed, i)`.
pub fn branch_counts(preset: &PlantModelPreset, n: usize, seed: u64) -> Result<BTreeMap<u32, usize>> {
    let mut counts: BTreeMap<u32, usize> = BTreeMap::new();
    for i in 0..n {
        let plant = simulate(preset, mix64(seed, i as u64), false)?;
        *counts.entry(plant.final_topology().inflorescence_branches).or_default() += 1;
    }
    Ok(counts)
}

/// [`branch_counts`] normalised to fractions.
pub fn branch_histogram(preset: &PlantModelPreset, n: usize, seed: u64) -> Result<BTreeMap<u32, f64>> {
    let counts = branch_counts(preset, n, seed)?;
    Ok(counts.into_iter().map(|(k, c)| (k, c as f64 / n as f64)).collect())
}

/// Exhaustive grid search over (vigour mean, vigour sd, threshold)
/// minimising total-variation distance to `target`. Every grid point uses
/// the same plant seeds; ties go to the lexicographically smallest point.
pub fn calibrate_branch_distribution(
    preset: &PlantModelPreset,
    target: &BTreeMap<u32, f64>,
    grid: &CalibrationGrid,
    n_samples: usize,
    seed: u64,
) -> Result<CalibrationResult> {
    let total: f64 = target.values().sum();
    if target.is_empty() || !(total > 0.0) || target.values().any(|v| !(*v >= 0.0)) {
        return Err(Error::invalid("target histogram is empty"));
    }
    if n_samples < 30 {
        return Err(Error::invalid(format!("n_samples must be at least 30, got {n_samples}")));
    }
    if preset.param(VIGOUR_PARAM).is_none() || preset.model.constant(THRESHOLD_CONST).is_none() {
        return Err(Error::invalid(format!(
            "preset '{}' has no '{VIGOUR_PARAM}' parameter or '{THRESHOLD_CONST}' constant",
            preset.name
        )));
    }
    let points = grid.points();
    if points.is_empty() {
        return Err(Error::invalid("calibration grid is empty"));
    }
    if points.iter().any(|p| p.iter().any(|v| !v.is_finite()) || p[1] < 0.0) {
        return Err(Error::invalid("grid values must be finite with nonnegative sd"));
    }
    let target: BTreeMap<u32, f64> = target.iter().map(|(&k, &v)| (k, v / total)).collect();

    let evaluated: Vec<([f64; 3], f64)> = points
        .par_iter()
        .map(|&p| {
            let candidate = with_branch_params(preset, p)?;
            let hist = branch_histogram(&candidate, n_samples, seed)?;
            Ok((p, total_variation(&hist, &target)))
        })
        .collect::<Result<_>>()?;

    let mut best = 0;
    for (i, e) in evaluated.iter().enumerate() {
        if e.1 < evaluated[best].1 {
            best = i;
        }
    }
    let (point, distance) = evaluated[best];
    log::info!(
        "calibrated {}: mean {} sd {} threshold {} (distance {distance:.4})",
        preset.name,
        point[0],
        point[1],
        point[2]
    );
    Ok(CalibrationResult {
        preset: with_branch_params(preset, point)?,
        vigour_mean: point[0],
        vigour_sd: point[1],
        threshold: point[2],
        distance,
        evaluated,
    })
}
