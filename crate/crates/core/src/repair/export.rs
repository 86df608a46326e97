//! Numbered GeoJSON files per repair plus a JSON manifest.

use std::fs;
use std::path::Path;

use serde::{Deserialize, Serialize};

use super::{RepairError, RepairSet, Step};
use crate::model::write_geojson;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ManifestEntry {
    pub file: String,
    pub delta: f64,
    pub minimal: bool,
    pub steps: Vec<Step>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Manifest {
    pub nodes: usize,
    pub minimal_count: usize,
    pub repairs: Vec<ManifestEntry>,
}

/// Writes `repair_NNN.geojson` for each repair (minimal ones only unless
/// `all_leaves`) and `manifest.json` into `dir`.
pub fn write_repairs(set: &RepairSet, dir: &Path, all_leaves: bool) -> Result<Manifest, RepairError> {
    fs::create_dir_all(dir)?;
    let mut entries = Vec::new();
    for (i, r) in set.repairs.iter().filter(|r| all_leaves || r.minimal).enumerate() {
        let file = format!("repair_{:03}.geojson", i + 1);
        let fc = write_geojson(&r.instance, None)?;
        fs::write(dir.join(&file), fc.to_string())?;
        entries.push(ManifestEntry { file, delta: r.delta, minimal: r.minimal, steps: r.applied.clone() });
    }
    let m = Manifest { nodes: set.nodes, minimal_count: set.minimal_count(), repairs: entries };
    fs::write(dir.join("manifest.json"), serde_json::to_string_pretty(&m)?)?;
    Ok(m)
}
