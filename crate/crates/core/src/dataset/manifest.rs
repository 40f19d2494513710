use std::collections::{BTreeMap, HashSet};
use std::fs;
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use crate::annotate::Task;
use crate::error::{Error, Result};
use crate::models::Species;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Source {
    Real,
    Synthetic,
}

/// One manifest row. `path` is relative to the manifest directory.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ManifestRecord {
    pub image_id: String,
    pub path: String,
    pub plant_id: String,
    pub genotype_id: Option<String>,
    pub day: u32,
    pub view: String,
    pub species: Species,
    pub source: Source,
    pub variant: Option<u32>,
    pub task: Task,
    pub count: u32,
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct Provenance {
    pub seed: Option<u64>,
    pub preset: Option<String>,
    pub preset_sha256: Option<String>,
    pub n_plants: Option<usize>,
    pub resolution: Option<u32>,
    pub version: String,
}

#[derive(Debug, Clone, PartialEq)]
pub struct DatasetManifest {
    pub records: Vec<ManifestRecord>,
    pub provenance: Provenance,
    /// Directory that record paths are relative to.
    pub root: PathBuf,
}

fn sidecar(csv_path: &Path) -> PathBuf {
    csv_path.with_extension("json")
}

impl DatasetManifest {
    pub fn empty() -> Self {
        DatasetManifest {
            records: Vec::new(),
            provenance: Provenance::default(),
            root: PathBuf::new(),
        }
    }

    pub fn len(&self) -> usize {
        self.records.len()
    }

    pub fn is_empty(&self) -> bool {
        self.records.is_empty()
    }

    pub fn get(&self, image_id: &str) -> Option<&ManifestRecord> {
        self.records.iter().find(|r| r.image_id == image_id)
    }

    pub fn image_path(&self, record: &ManifestRecord) -> PathBuf {
        self.root.join(&record.path)
    }

    /// Histogram of ground-truth counts.
    pub fn count_histogram(&self) -> BTreeMap<u32, f64> {
        let mut h = BTreeMap::new();
        for r in &self.records {
            *h.entry(r.count).or_insert(0.0) += 1.0;
        }
        h
    }

    /// Image ids whose files are absent.
    pub fn missing_files(&self) -> Vec<String> {
        self.records
            .iter()
            .filter(|r| !self.image_path(r).is_file())
            .map(|r| r.image_id.clone())
            .collect()
    }

    fn check_unique(&self) -> Result<()> {
        let mut seen = HashSet::new();
        for r in &self.records {
            if !seen.insert(r.image_id.as_str()) {
                return Err(Error::Data(format!("duplicate image id '{}'", r.image_id)));
            }
        }
        Ok(())
    }

    /// Writes the CSV and a JSON provenance sidecar next to it (same stem).
    pub fn write(&self, csv_path: &Path) -> Result<()> {
        self.check_unique()?;
        let mut w = csv::Writer::from_writer(Vec::new());
        for r in &self.records {
            w.serialize(r)?;
        }
        let bytes = w.into_inner().map_err(|e| Error::Data(e.to_string()))?;
        fs::write(csv_path, bytes).map_err(|e| Error::io(csv_path, e))?;
        let side = sidecar(csv_path);
        let mut json = serde_json::to_string_pretty(&self.provenance)?;
        json.push('\n');
        fs::write(&side, json).map_err(|e| Error::io(side, e))
    }

    /// Reads a manifest written by [`DatasetManifest::write`]. The sidecar
    /// is optional.
    pub fn load(csv_path: &Path) -> Result<Self> {
        let mut rd = csv::Reader::from_path(csv_path).map_err(|e| Error::Data(format!("{}: {e}", csv_path.display())))?;
        let mut records = Vec::new();
        for row in rd.deserialize() {
            records.push(row.map_err(|e| Error::Data(format!("{}: {e}", csv_path.display())))?);
        }
        let side = sidecar(csv_path);
        let provenance = if side.is_file() {
            let text = fs::read_to_string(&side).map_err(|e| Error::io(&side, e))?;
            serde_json::from_str(&text)?
        } else {
            Provenance::default()
        };
        let m = DatasetManifest {
            records,
            provenance,
            root: csv_path.parent().map(Path::to_path_buf).unwrap_or_default(),
        };
        m.check_unique()?;
        Ok(m)
    }
}

/// Result of [`ingest_real_annotations`]; `missing` lists image ids whose
/// file was not found under the image root.
#[derive(Debug, Clone)]
pub struct Ingested {
    pub manifest: DatasetManifest,
    pub missing: Vec<String>,
}

/// Reads a real-image annotation table. Required columns: image_id, path,
/// plant_id, day, species, count. Optional: genotype_id, view, variant,
/// task (defaults to the species task). Any `source` column is ignored.
pub fn ingest_real_annotations(csv_path: &Path, image_root: &Path) -> Result<Ingested> {
    let fail = |line: u64, msg: String| Error::Data(format!("{}: line {line}: {msg}", csv_path.display()));
    let mut rd = csv::Reader::from_path(csv_path).map_err(|e| Error::Data(format!("{}: {e}", csv_path.display())))?;
    let headers = rd.headers()?.clone();
    let col = |name: &str| headers.iter().position(|h| h.trim() == name);
    let required = ["image_id", "path", "plant_id", "day", "species", "count"];
    let mut idx = BTreeMap::new();
    for name in required {
        idx.insert(name, col(name).ok_or_else(|| fail(1, format!("missing column '{name}'")))?);
    }
    let (genotype, view, variant, task) = (col("genotype_id"), col("view"), col("variant"), col("task"));

    let mut records = Vec::new();
    let mut seen = HashSet::new();
    for row in rd.records() {
        let row = row?;
        let line = row.position().map_or(0, |p| p.line());
        let get = |i: usize| row.get(i).unwrap_or("").trim();
        let opt = |i: Option<usize>| i.map(get).filter(|s| !s.is_empty());
        let image_id = get(idx["image_id"]).to_string();
        if image_id.is_empty() {
            return Err(fail(line, "empty image_id".into()));
        }
        if !seen.insert(image_id.clone()) {
            return Err(fail(line, format!("duplicate image id '{image_id}'")));
        }
        let count: i64 = get(idx["count"])
            .parse()
            .map_err(|_| fail(line, format!("count '{}' is not an integer", get(idx["count"]))))?;
        if count < 0 {
            return Err(fail(line, format!("count must be nonnegative, got {count}")));
        }
        let day: u32 = get(idx["day"])
            .parse()
            .map_err(|_| fail(line, format!("day '{}' is not a nonnegative integer", get(idx["day"]))))?;
        let species: Species = get(idx["species"]).parse().map_err(|e: Error| fail(line, e.to_string()))?;
        let task = match opt(task) {
            Some(t) => t.parse().map_err(|e: Error| fail(line, e.to_string()))?,
            None => Task::for_species(species),
        };
        if task != Task::for_species(species) {
            return Err(fail(line, format!("task {} does not apply to {}", task.as_str(), species.as_str())));
        }
        let variant = match opt(variant) {
            Some(v) => Some(v.parse().map_err(|_| fail(line, format!("variant '{v}' is not an integer")))?),
            None => None,
        };
        let path = get(idx["path"]).to_string();
        if path.is_empty() {
            return Err(fail(line, "empty path".into()));
        }
        records.push(ManifestRecord {
            image_id,
            path,
            plant_id: get(idx["plant_id"]).to_string(),
            genotype_id: opt(genotype).map(str::to_string),
            day,
            view: opt(view).unwrap_or("").to_string(),
            species,
            source: Source::Real,
            variant,
            task,
            count: count as u32,
        });
    }
    let manifest = DatasetManifest {
        records,
        provenance: Provenance {
            version: env!("CARGO_PKG_VERSION").to_string(),
            ..Provenance::default()
        },
        root: image_root.to_path_buf(),
    };
    let missing = manifest.missing_files();
    for id in &missing {
        log::warn!("image file for '{id}' not found under {}", image_root.display());
    }
    Ok(Ingested { manifest, missing })
}
