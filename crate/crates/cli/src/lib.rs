//! `lsynth` command line: one subcommand per pipeline stage plus `serve`.

pub mod server;

use std::collections::BTreeMap;
use std::ffi::OsString;
use std::fs;
use std::path::{Path, PathBuf};

use anyhow::{anyhow, bail, Context, Result};
use clap::{Parser, Subcommand};
use lsynth::baseline::{predict_manifest, train_on_manifest, LinearModel};
use lsynth::dataset::{
    generate_dataset, ingest_real_annotations, split_experiment, Augmentation, DatasetManifest, ExperimentSplit, GenerateConfig, SplitPolicy, TestPolicy,
};
use lsynth::metrics::{evaluate, histogram_distance, read_predictions, write_histogram_csv, write_predictions};
use lsynth::models::{
    calibrate_branch_distribution, canola_preset, parse_preset, preset_by_name, with_branch_params, CalibrationGrid, PlantModelPreset,
};
use lsynth::preprocess::{convex_hull_area, segment_plant, select_best_view, BackgroundRef, Grayscale, SegmentOptions};
use lsynth::render::RasterImage;
use lsynth::turtle::Rgb;

#[derive(Parser, Debug)]
#[command(name = "lsynth", version, about = "Synthetic plant phenotyping datasets from parametric L-systems")]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
}

#[derive(clap::Args, Debug, Clone)]
pub struct PresetArgs {
    /// Built-in preset name (maize, canola, canola-v1..v5) or a preset file.
    #[arg(long)]
    pub preset: String,
    /// Canola variant, when --preset is `canola`.
    #[arg(long)]
    pub variant: Option<u32>,
    /// Override as KEY=VALUE; repeatable.
    #[arg(long = "set", value_name = "KEY=VALUE")]
    pub set: Vec<String>,
    /// JSON file with a flat {key: number} override map.
    #[arg(long)]
    pub overrides: Option<PathBuf>,
}

#[derive(clap::Args, Debug, Clone)]
pub struct SegmentArgs {
    /// Flat background colour as R,G,B.
    #[arg(long, default_value = "0,0,0", value_parser = parse_rgb)]
    pub background: Rgb,
    #[arg(long, default_value_t = 10)]
    pub tol: u8,
    #[arg(long, default_value_t = lsynth::preprocess::DEFAULT_EXG_THRESHOLD)]
    pub exg_threshold: i32,
    /// mean or luma.
    #[arg(long, default_value = "mean")]
    pub grayscale: String,
}

impl SegmentArgs {
    fn options(&self) -> Result<SegmentOptions> {
        let grayscale = match self.grayscale.as_str() {
            "mean" => Grayscale::Mean,
            "luma" => Grayscale::Luma,
            g => bail!("unknown grayscale mode '{g}' (mean or luma)"),
        };
        Ok(SegmentOptions {
            background_tol: self.tol,
            exg_threshold: self.exg_threshold,
            grayscale,
        })
    }
}

#[derive(Subcommand, Debug)]
pub enum Command {
    /// Simulate, render and annotate a synthetic dataset.
    Generate {
        #[command(flatten)]
        preset: PresetArgs,
        #[arg(long)]
        plants: usize,
        #[arg(long, default_value_t = 0)]
        seed: u64,
        #[arg(long)]
        out: PathBuf,
        #[arg(long, default_value_t = 256)]
        resolution: u32,
        #[arg(long)]
        min_pixels: Option<usize>,
        #[arg(long, default_value_t = 6)]
        days_per_plant: usize,
        /// Keep every day, including leafless or non-flowering ones.
        #[arg(long)]
        no_filter: bool,
    },
    /// Segment real images into masks and pick the best of each view pair.
    Preprocess {
        #[arg(long)]
        manifest: PathBuf,
        #[arg(long)]
        out: PathBuf,
        /// Background image used instead of the flat colour.
        #[arg(long)]
        background_image: Option<PathBuf>,
        #[command(flatten)]
        seg: SegmentArgs,
    },
    /// Check a real annotation table and write it as a manifest.
    Ingest {
        /// CSV with image_id, path, plant_id, day, species and count columns.
        #[arg(long)]
        annotations: PathBuf,
        /// Directory the table's image paths are relative to.
        #[arg(long)]
        images: PathBuf,
        #[arg(long)]
        out: PathBuf,
    },
    /// Build a train/test split as JSON.
    Split {
        #[arg(long)]
        real: PathBuf,
        #[arg(long)]
        synthetic: Option<PathBuf>,
        #[arg(long)]
        units: usize,
        #[arg(long, default_value_t = 0)]
        seed: u64,
        /// fixed-100 or all-remaining.
        #[arg(long, default_value = "fixed-100")]
        test: String,
        /// none, all or equal-count.
        #[arg(long, default_value = "none")]
        augment: String,
        /// Held-out test units (species default when omitted).
        #[arg(long)]
        test_units: Option<usize>,
        #[arg(long)]
        out: PathBuf,
    },
    /// Fit the least-squares baseline on a split's training images.
    TrainBaseline {
        #[arg(long = "manifest", required = true)]
        manifests: Vec<PathBuf>,
        #[arg(long)]
        split: Option<PathBuf>,
        #[arg(long)]
        out: PathBuf,
        #[command(flatten)]
        seg: SegmentArgs,
    },
    /// Predict counts for a split's test images (or every image).
    PredictBaseline {
        #[arg(long)]
        model: PathBuf,
        #[arg(long = "manifest", required = true)]
        manifests: Vec<PathBuf>,
        #[arg(long)]
        split: Option<PathBuf>,
        #[arg(long)]
        out: PathBuf,
        #[command(flatten)]
        seg: SegmentArgs,
    },
    /// Score predictions on a split's test images.
    Evaluate {
        #[arg(long)]
        pred: PathBuf,
        #[arg(long = "manifest", required = true)]
        manifests: Vec<PathBuf>,
        #[arg(long)]
        split: PathBuf,
        /// Write the full JSON report here.
        #[arg(long)]
        report: Option<PathBuf>,
        /// Write the count-difference histogram CSV here.
        #[arg(long)]
        hist: Option<PathBuf>,
    },
    /// Total-variation distance between two manifests' count histograms.
    CompareDist {
        #[arg(long)]
        a: PathBuf,
        #[arg(long)]
        b: PathBuf,
    },
    /// Grid search branch vigour and threshold against a target histogram.
    Calibrate {
        #[command(flatten)]
        preset: PresetArgs,
        /// Real manifest whose counts form the target; the preset's stored
        /// target is used otherwise.
        #[arg(long)]
        target_manifest: Option<PathBuf>,
        /// Vigour mean grid as START:STOP:STEPS.
        #[arg(long, value_parser = parse_range)]
        mean: (f64, f64, usize),
        #[arg(long, value_parser = parse_range)]
        sd: (f64, f64, usize),
        #[arg(long, value_parser = parse_range)]
        thr: (f64, f64, usize),
        #[arg(long, default_value_t = 300)]
        samples: usize,
        #[arg(long, default_value_t = 0)]
        seed: u64,
        /// Write the calibrated preset file here.
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Run the local HTTP service.
    Serve {
        #[arg(long, env = "LSYNTH_PORT", default_value_t = 8080)]
        port: u16,
        #[arg(long, default_value = "127.0.0.1")]
        host: String,
        /// Directory of static UI files served at /.
        #[arg(long)]
        ui: Option<PathBuf>,
    },
}

fn parse_rgb(s: &str) -> std::result::Result<Rgb, String> {
    let parts: Vec<&str> = s.split(',').map(str::trim).collect();
    if parts.len() != 3 {
        return Err(format!("expected R,G,B, got '{s}'"));
    }
    let mut c = [0u8; 3];
    for (slot, p) in c.iter_mut().zip(parts) {
        *slot = p.parse().map_err(|_| format!("'{p}' is not a 0-255 channel value"))?;
    }
    Ok(c)
}

fn parse_range(s: &str) -> std::result::Result<(f64, f64, usize), String> {
    let parts: Vec<&str> = s.split(':').collect();
    let bad = || format!("expected START:STOP:STEPS, got '{s}'");
    if parts.len() != 3 {
        return Err(bad());
    }
    let a = parts[0].parse().map_err(|_| bad())?;
    let b = parts[1].parse().map_err(|_| bad())?;
    let n: usize = parts[2].parse().map_err(|_| bad())?;
    if n == 0 {
        return Err("STEPS must be at least 1".into());
    }
    Ok((a, b, n))
}

/// Resolves a built-in preset name or a preset file path.
pub fn resolve_preset(name: &str, variant: Option<u32>) -> Result<PlantModelPreset> {
    if let Some(v) = variant {
        if name != "canola" {
            bail!("--variant only applies to the canola preset");
        }
        return Ok(canola_preset(v)?);
    }
    if let Some(p) = preset_by_name(name) {
        return Ok(p);
    }
    let path = Path::new(name);
    if path.is_file() {
        let text = fs::read_to_string(path).with_context(|| format!("reading {}", path.display()))?;
        return parse_preset(&text).map_err(|e| anyhow!("{}: {e}", path.display()));
    }
    bail!("unknown preset '{name}' (not a built-in name or an existing file)")
}

fn load_preset(args: &PresetArgs) -> Result<PlantModelPreset> {
    let mut preset = resolve_preset(&args.preset, args.variant)?;
    if let Some(path) = &args.overrides {
        let text = fs::read_to_string(path).with_context(|| format!("reading {}", path.display()))?;
        let map: BTreeMap<String, f64> =
            serde_json::from_str(&text).with_context(|| format!("{}: expected a flat {{key: number}} map", path.display()))?;
        for (k, v) in map {
            preset.apply_override(&k, v)?;
        }
    }
    for kv in &args.set {
        let (k, v) = kv.split_once('=').ok_or_else(|| anyhow!("--set expects KEY=VALUE, got '{kv}'"))?;
        let v: f64 = v.trim().parse().map_err(|_| anyhow!("--set {k}: '{v}' is not a number"))?;
        preset.apply_override(k.trim(), v)?;
    }
    Ok(preset)
}

fn require_file(path: &Path) -> Result<()> {
    if !path.is_file() {
        bail!("{}: no such file", path.display());
    }
    Ok(())
}

/// Loads one or more manifests; several are merged with absolute paths.
pub fn load_manifests(paths: &[PathBuf]) -> Result<DatasetManifest> {
    for p in paths {
        require_file(p)?;
    }
    if let [one] = paths {
        return Ok(DatasetManifest::load(one)?);
    }
    let mut merged = DatasetManifest::empty();
    let mut seen = std::collections::HashSet::new();
    for p in paths {
        let m = DatasetManifest::load(p)?;
        for mut r in m.records.clone() {
            if !seen.insert(r.image_id.clone()) {
                bail!("image id '{}' appears in more than one manifest", r.image_id);
            }
            r.path = m.image_path(&r).display().to_string();
            merged.records.push(r);
        }
    }
    Ok(merged)
}

fn load_split(path: &Path) -> Result<ExperimentSplit> {
    let text = fs::read_to_string(path).with_context(|| format!("reading {}", path.display()))?;
    ExperimentSplit::from_json(&text).map_err(|e| anyhow!("{}: {e}", path.display()))
}

fn write_text(path: &Path, text: &str) -> Result<()> {
    fs::write(path, text).with_context(|| format!("writing {}", path.display()))
}

fn generate(args: &PresetArgs, cfg: GenerateConfig, out: &Path) -> Result<()> {
    let preset = load_preset(args)?;
    let m = generate_dataset(&preset, &cfg, out)?;
    println!("{} records written to {}", m.len(), out.join("manifest.csv").display());
    Ok(())
}

fn preprocess(manifest: &Path, out: &Path, bg_image: Option<&Path>, seg: &SegmentArgs) -> Result<()> {
    let m = load_manifests(&[manifest.to_path_buf()])?;
    let opts = seg.options()?;
    let bg = match bg_image {
        Some(p) => BackgroundRef::Image(RasterImage::load(p)?),
        None => BackgroundRef::Color(seg.background),
    };
    let masks = out.join("masks");
    fs::create_dir_all(&masks).with_context(|| format!("creating {}", masks.display()))?;

    let mut areas = BTreeMap::new();
    let mut groups: BTreeMap<(String, u32), Vec<usize>> = BTreeMap::new();
    let mut images = Vec::with_capacity(m.len());
    for (i, r) in m.records.iter().enumerate() {
        let img = RasterImage::load(&m.image_path(r))?;
        let mask = segment_plant(&img, &bg, &opts)?;
        mask.save_png(&masks.join(format!("{}.png", r.image_id)))?;
        areas.insert(i, (mask.count(), convex_hull_area(&mask)));
        groups.entry((r.plant_id.clone(), r.day)).or_default().push(i);
        images.push(img);
    }
    let mut best = vec![false; m.len()];
    for idx in groups.values() {
        match idx.as_slice() {
            [a, b] => {
                let (pick, _) = select_best_view([&images[*a], &images[*b]], [&bg, &bg], &opts)?;
                best[if pick == 0 { *a } else { *b }] = true;
            }
            // single views win by default; larger groups take the largest hull
            _ => {
                let top = idx.iter().copied().fold(idx[0], |acc, i| if areas[&i].1 > areas[&acc].1 { i } else { acc });
                best[top] = true;
            }
        }
    }
    let mut csv = String::from("image_id,plant_id,day,view,foreground,hull_area,best\n");
    for (i, r) in m.records.iter().enumerate() {
        let (fg, hull) = areas[&i];
        csv.push_str(&format!("{},{},{},{},{fg},{hull},{}\n", r.image_id, r.plant_id, r.day, r.view, best[i]));
    }
    write_text(&out.join("best_view.csv"), &csv)?;
    println!("{} masks written to {}", m.len(), masks.display());
    Ok(())
}

fn dispatch(cli: Cli) -> Result<()> {
    match cli.command {
        Command::Generate {
            preset,
            plants,
            seed,
            out,
            resolution,
            min_pixels,
            days_per_plant,
            no_filter,
        } => {
            let cfg = GenerateConfig {
                n_plants: plants,
                seed,
                resolution,
                min_pixels,
                days_per_plant,
                apply_filters: !no_filter,
                ..GenerateConfig::default()
            };
            generate(&preset, cfg, &out)
        }
        Command::Preprocess {
            manifest,
            out,
            background_image,
            seg,
        } => {
            if let Some(p) = &background_image {
                require_file(p)?;
            }
            preprocess(&manifest, &out, background_image.as_deref(), &seg)
        }
        Command::Split {
            real,
            synthetic,
            units,
            seed,
            test,
            augment,
            test_units,
            out,
        } => {
            let real = load_manifests(&[real])?;
            let synthetic = synthetic.map(|p| load_manifests(&[p])).transpose()?;
            let species = real.records.first().ok_or_else(|| anyhow!("real manifest is empty"))?.species;
            let mut policy = SplitPolicy::for_species(species);
            policy.test = test.parse::<TestPolicy>()?;
            policy.augmentation = augment.parse::<Augmentation>()?;
            if test_units.is_some() {
                policy.test_units = test_units;
            }
            let split = split_experiment(&real, synthetic.as_ref(), units, policy, seed)?;
            write_text(&out, &split.to_json()?)?;
            println!("{}", split.label);
            Ok(())
        }
        Command::TrainBaseline { manifests, split, out, seg } => {
            let m = load_manifests(&manifests)?;
            let ids = match &split {
                Some(p) => load_split(p)?.train,
                None => m.records.iter().map(|r| r.image_id.clone()).collect(),
            };
            let model = train_on_manifest(&m, &ids, &BackgroundRef::Color(seg.background), &seg.options()?)?;
            model.save(&out)?;
            println!("fitted on {} images; weights {:?}", ids.len(), model.weights);
            Ok(())
        }
        Command::PredictBaseline {
            model,
            manifests,
            split,
            out,
            seg,
        } => {
            require_file(&model)?;
            let model = LinearModel::load(&model)?;
            let m = load_manifests(&manifests)?;
            let ids = match &split {
                Some(p) => load_split(p)?.test,
                None => m.records.iter().map(|r| r.image_id.clone()).collect(),
            };
            let preds = predict_manifest(&model, &m, &ids, &BackgroundRef::Color(seg.background), &seg.options()?)?;
            write_predictions(&out, &preds)?;
            println!("{} predictions written to {}", preds.len(), out.display());
            Ok(())
        }
        Command::Evaluate {
            pred,
            manifests,
            split,
            report,
            hist,
        } => {
            require_file(&pred)?;
            require_file(&split)?;
            let m = load_manifests(&manifests)?;
            let r = evaluate(&read_predictions(&pred)?, &m, &load_split(&split)?)?;
            if let Some(p) = report {
                write_text(&p, &r.to_json()?)?;
            }
            if let Some(p) = hist {
                let mut f = fs::File::create(&p).with_context(|| format!("writing {}", p.display()))?;
                write_histogram_csv(&mut f, &r.count_difference_histogram)?;
            }
            println!("{}", r.table_cell());
            Ok(())
        }
        Command::Ingest { annotations, images, out } => {
            let root = fs::canonicalize(&images).with_context(|| format!("image root {}", images.display()))?;
            let mut ing = ingest_real_annotations(&annotations, &root)?;
            for id in &ing.missing {
                log::warn!("image for '{id}' not found under {}", root.display());
            }
            for r in &mut ing.manifest.records {
                r.path = root.join(&r.path).display().to_string();
            }
            ing.manifest.write(&out)?;
            println!("{} records written to {} ({} images missing)", ing.manifest.len(), out.display(), ing.missing.len());
            Ok(())
        }
        Command::CompareDist { a, b } => {
            let (a, b) = (load_manifests(&[a])?, load_manifests(&[b])?);
            println!("{}", histogram_distance(&a.count_histogram(), &b.count_histogram())?);
            Ok(())
        }
        Command::Calibrate {
            preset,
            target_manifest,
            mean,
            sd,
            thr,
            samples,
            seed,
            out,
        } => {
            let p = load_preset(&preset)?;
            let target = match &target_manifest {
                Some(path) => load_manifests(&[path.clone()])?.count_histogram(),
                None => p
                    .target_distribution()
                    .ok_or_else(|| anyhow!("preset '{}' has no stored target; pass --target-manifest", p.name))?,
            };
            let grid = CalibrationGrid::ranges(mean, sd, thr);
            let r = calibrate_branch_distribution(&p, &target, &grid, samples, seed)?;
            if let Some(path) = out {
                let best = with_branch_params(&p, [r.vigour_mean, r.vigour_sd, r.threshold])?;
                write_text(&path, &best.to_text())?;
            }
            println!(
                "vigour_mean={} vigour_sd={} branch_thr={} distance={}",
                r.vigour_mean, r.vigour_sd, r.threshold, r.distance
            );
            Ok(())
        }
        Command::Serve { port, host, ui } => {
            if let Some(dir) = &ui {
                if !dir.is_dir() {
                    bail!("{}: no such directory", dir.display());
                }
            }
            let rt = tokio::runtime::Runtime::new().context("starting the async runtime")?;
            rt.block_on(server::serve(&host, port, ui))
        }
    }
}

/// Parses `argv` and runs the subcommand. Exit codes: 0 success, 1 runtime
/// error, 2 usage error.
pub fn run<I, T>(argv: I) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<OsString> + Clone,
{
    let cli = match Cli::try_parse_from(argv) {
        Ok(c) => c,
        Err(e) => {
            let _ = e.print();
            return if e.use_stderr() { 2 } else { 0 };
        }
    };
    match dispatch(cli) {
        Ok(()) => 0,
        Err(e) => {
            eprintln!("error: {e:#}");
            1
        }
    }
}
