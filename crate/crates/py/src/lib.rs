//! Python module `lsynth`.

use std::collections::BTreeMap;
use std::path::PathBuf;

use lsynth_core::dataset::{generate_dataset, render_day, GenerateConfig};
use lsynth_core::models::{branch_counts, preset_by_name, preset_names as names, sample_plant, PlantModelPreset};
use lsynth_core::render::{encode_image, Light};
use lsynth_core::{annotate, metrics, preprocess, render, rng};
use pyo3::exceptions::{PyKeyError, PyValueError};
use pyo3::prelude::*;
use pyo3::types::PyBytes;

fn err(e: lsynth_core::Error) -> PyErr {
    PyValueError::new_err(e.to_string())
}

fn preset(name: &str, overrides: Option<BTreeMap<String, f64>>) -> PyResult<PlantModelPreset> {
    let mut p = preset_by_name(name).ok_or_else(|| PyKeyError::new_err(format!("unknown preset '{name}'")))?;
    for (k, v) in overrides.unwrap_or_default() {
        p.apply_override(&k, v).map_err(err)?;
    }
    Ok(p)
}

#[pyfunction]
fn preset_names() -> Vec<String> {
    names()
}

/// Preset file text, after overrides.
#[pyfunction]
#[pyo3(signature = (name, overrides=None))]
fn preset_text(name: &str, overrides: Option<BTreeMap<String, f64>>) -> PyResult<String> {
    Ok(preset(name, overrides)?.to_text())
}

#[pyfunction]
fn mix64(seed: u64, index: u64) -> u64 {
    rng::mix64(seed, index)
}

/// Sampled parameters and per-day (leaves, branches, open flowers).
#[pyfunction]
#[pyo3(signature = (name, seed, overrides=None))]
fn simulate(name: &str, seed: u64, overrides: Option<BTreeMap<String, f64>>) -> PyResult<(Vec<(String, f64)>, Vec<(usize, u32, usize)>)> {
    let plant = sample_plant(&preset(name, overrides)?, seed).map_err(err)?;
    let days = plant
        .topology
        .iter()
        .map(|t| (t.leaves, t.inflorescence_branches, t.open_flowers))
        .collect();
    Ok((plant.params, days))
}

/// PNG bytes and ground-truth count for one plant on one day.
#[pyfunction]
#[pyo3(signature = (name, seed, day, resolution=256, overrides=None))]
fn render_plant<'py>(
    py: Python<'py>,
    name: &str,
    seed: u64,
    day: u32,
    resolution: u32,
    overrides: Option<BTreeMap<String, f64>>,
) -> PyResult<(Bound<'py, PyBytes>, u32)> {
    let p = preset(name, overrides)?;
    let plant = sample_plant(&p, seed).map_err(err)?;
    let min = annotate::default_min_pixels(resolution, resolution);
    let (img, _, rec) = render_day(&p, &plant, day, resolution, &Light::default(), min, "py", 0).map_err(err)?;
    let png = encode_image(&img).map_err(err)?;
    Ok((PyBytes::new(py, &png), rec.count))
}

/// Final-day branch counts of `n` plants.
#[pyfunction]
#[pyo3(signature = (name, n, seed=0, overrides=None))]
fn branch_histogram(name: &str, n: usize, seed: u64, overrides: Option<BTreeMap<String, f64>>) -> PyResult<BTreeMap<u32, usize>> {
    branch_counts(&preset(name, overrides)?, n, seed).map_err(err)
}

/// Writes a dataset to `out_dir` and returns the number of records.
#[pyfunction]
#[pyo3(signature = (name, n_plants, seed, out_dir, resolution=256))]
fn generate(name: &str, n_plants: usize, seed: u64, out_dir: PathBuf, resolution: u32) -> PyResult<usize> {
    let cfg = GenerateConfig {
        n_plants,
        seed,
        resolution,
        ..GenerateConfig::default()
    };
    Ok(generate_dataset(&preset(name, None)?, &cfg, &out_dir).map_err(err)?.len())
}

/// MAE, SD, R², squared Pearson (None for constant predictions) and RMSE.
#[pyfunction]
fn evaluate_counts(pred: Vec<f64>, truth: Vec<f64>) -> PyResult<(f64, f64, f64, Option<f64>, f64)> {
    let r = metrics::MetricsReport::compute(&pred, &truth).map_err(err)?;
    Ok((r.mae, r.abs_loss_sd, r.r_squared, r.pearson_r2, r.rmse))
}

#[pyfunction]
fn table_cell(pred: Vec<f64>, truth: Vec<f64>) -> PyResult<String> {
    Ok(metrics::MetricsReport::compute(&pred, &truth).map_err(err)?.table_cell())
}

#[pyfunction]
fn histogram_distance(p: BTreeMap<i64, f64>, q: BTreeMap<i64, f64>) -> PyResult<f64> {
    metrics::histogram_distance(&p, &q).map_err(err)
}

/// Otsu threshold of a row-major 8-bit gray image.
#[pyfunction]
fn otsu_threshold(pixels: Vec<u8>, width: u32, height: u32) -> PyResult<u8> {
    if pixels.len() != width as usize * height as usize {
        return Err(PyValueError::new_err("pixel count does not match width x height"));
    }
    let g = preprocess::GrayImage { width, height, pixels };
    Ok(preprocess::otsu_threshold(&g).0)
}

/// Excess green 2G - R - B of PNG bytes, row-major.
#[pyfunction]
fn excess_green(png: &[u8]) -> PyResult<Vec<i32>> {
    Ok(preprocess::excess_green(&render::decode_image(png).map_err(err)?))
}

#[pymodule]
#[pyo3(name = "lsynth")]
pub fn lsynth_module(m: &Bound<'_, PyModule>) -> PyResult<()> {
    m.add("__version__", env!("CARGO_PKG_VERSION"))?;
    m.add_function(wrap_pyfunction!(preset_names, m)?)?;
    m.add_function(wrap_pyfunction!(preset_text, m)?)?;
    m.add_function(wrap_pyfunction!(mix64, m)?)?;
    m.add_function(wrap_pyfunction!(simulate, m)?)?;
    m.add_function(wrap_pyfunction!(render_plant, m)?)?;
    m.add_function(wrap_pyfunction!(branch_histogram, m)?)?;
    m.add_function(wrap_pyfunction!(generate, m)?)?;
    m.add_function(wrap_pyfunction!(evaluate_counts, m)?)?;
    m.add_function(wrap_pyfunction!(table_cell, m)?)?;
    m.add_function(wrap_pyfunction!(histogram_distance, m)?)?;
    m.add_function(wrap_pyfunction!(otsu_threshold, m)?)?;
    m.add_function(wrap_pyfunction!(excess_green, m)?)?;
    Ok(())
}
