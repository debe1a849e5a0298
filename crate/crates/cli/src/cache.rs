//! Result cache: `out_dir/<hash>/` holds `manifest.json`, the command's CSVs
//! and `summary.txt`, the text printed on stdout.

use std::collections::BTreeMap;
use std::fs;
use std::io;
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

pub const MANIFEST: &str = "manifest.json";
pub const SUMMARY: &str = "summary.txt";

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Manifest {
    pub command: String,
    pub config_hash: String,
    /// Canonical configuration; it names every threshold in effect.
    pub config: String,
    pub versions: Versions,
    /// Library constants that are not configurable but shape the results.
    pub constants: BTreeMap<String, f64>,
    pub files: Vec<String>,
    pub status: i32,
    pub wall_time_s: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Versions {
    pub cocycle_lab: String,
    pub cli: String,
}

pub struct Entry {
    pub dir: PathBuf,
    pub manifest: Manifest,
    pub summary: String,
}

pub fn entry_dir(out_dir: &Path, hash: &str) -> PathBuf {
    out_dir.join(hash)
}

/// A complete cached run, or `None` if any part is missing or unreadable.
pub fn load(dir: &Path) -> Option<Entry> {
    let manifest: Manifest = serde_json::from_slice(&fs::read(dir.join(MANIFEST)).ok()?).ok()?;
    let summary = fs::read_to_string(dir.join(SUMMARY)).ok()?;
    if manifest.files.iter().any(|f| !dir.join(f).is_file()) {
        return None;
    }
    Some(Entry { dir: dir.to_path_buf(), manifest, summary })
}

/// Writes the artifacts first and the manifest last, so a partial entry is never loaded.
pub fn store(dir: &Path, files: &[(String, String)], summary: &str, manifest: &Manifest) -> io::Result<()> {
    fs::create_dir_all(dir)?;
    let _ = fs::remove_file(dir.join(MANIFEST));
    for (name, body) in files {
        fs::write(dir.join(name), body)?;
    }
    fs::write(dir.join(SUMMARY), summary)?;
    let json = serde_json::to_string_pretty(manifest).expect("manifest serializes");
    fs::write(dir.join(MANIFEST), json + "\n")
}
