use std::path::{Path, PathBuf};

use jetssm_core::audio::{featurize, read_wav, MelConfig};
use jetssm_core::dataset::{load_profiles_csv, Segment};
use jetssm_core::training::TrialData;
use jetssm_core::{Error, Result};
use serde::{Deserialize, Serialize};

/// One recording: `<stem>.wav` with its `<stem>.csv` profiles and optional
/// `<stem>.json` metadata.
#[derive(Clone, Debug, PartialEq)]
pub struct DataFile {
    pub stem: String,
    pub wav: PathBuf,
    pub csv: PathBuf,
    pub meta: PathBuf,
}

/// Sidecar written by `synth`.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct TrialMeta {
    pub seed: u64,
    pub generator: jetssm_core::dataset::GeneratorConfig,
    pub tone_hz: f64,
    pub noise_std_um: f64,
    pub segments: Vec<Segment>,
    pub contact: Vec<bool>,
}

fn not_found(path: &Path, what: &str) -> Error {
    Error::io(
        path,
        std::io::Error::new(std::io::ErrorKind::NotFound, what.to_string()),
    )
}

/// Recordings in `dir`, sorted by file name.
pub fn discover(dir: &Path) -> Result<Vec<DataFile>> {
    let entries = std::fs::read_dir(dir).map_err(|e| Error::io(dir, e))?;
    let mut wavs = Vec::new();
    for e in entries {
        let p = e.map_err(|e| Error::io(dir, e))?.path();
        if p.extension().and_then(|x| x.to_str()) == Some("wav") {
            wavs.push(p);
        }
    }
    wavs.sort();
    if wavs.is_empty() {
        return Err(not_found(dir, "no .wav recordings in data directory"));
    }
    wavs.into_iter()
        .map(|wav| {
            let stem = wav.file_stem().and_then(|s| s.to_str()).unwrap_or_default().to_string();
            let csv = wav.with_extension("csv");
            if !csv.is_file() {
                return Err(not_found(&csv, "profile CSV matching the recording is missing"));
            }
            Ok(DataFile {
                stem,
                meta: wav.with_extension("json"),
                csv,
                wav,
            })
        })
        .collect()
}

/// Aligned mel features for one recording, on the profile frame grid.
pub fn load_trial(file: &DataFile, mel: &MelConfig) -> Result<TrialData> {
    let profiles = load_profiles_csv(&file.csv)?;
    let clip = read_wav(&file.wav)?;
    let features = featurize(&clip, mel, profiles.frames())?;
    TrialData::new(features, profiles)
}

pub fn load_dir(dir: &Path, mel: &MelConfig) -> Result<Vec<TrialData>> {
    discover(dir)?.iter().map(|f| load_trial(f, mel)).collect()
}

pub fn load_meta(file: &DataFile) -> Result<TrialMeta> {
    if !file.meta.is_file() {
        return Err(not_found(&file.meta, "metadata JSON written by synth is missing"));
    }
    crate::io::read_json(&file.meta)
}
