//! Single-file checkpoints: `JETSSMCK`, a little-endian u64 header length, a
//! JSON header, then raw little-endian f64 arrays in header order.

use std::path::Path;

use jetssm_core::audio::MelConfig;
use jetssm_core::dataset::FeatureStats;
use jetssm_core::nn::{Model, ModelConfig, ModelKind};
use jetssm_core::training::{Normalizers, TrainConfig, TrainedModel};
use jetssm_core::{Error, Result};
use serde::{Deserialize, Serialize};

use crate::io::write_bytes_atomic;

pub const MAGIC: &[u8; 8] = b"JETSSMCK";
pub const FORMAT_VERSION: u32 = 1;

/// A trained model plus the front-end settings needed to feed it.
#[derive(Clone, Debug, PartialEq)]
pub struct Checkpoint {
    pub model: TrainedModel<f64>,
    pub mel: MelConfig,
    /// Aligned frames per clip the model was trained on.
    pub frames: usize,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ArraySpec {
    pub name: String,
    pub shape: Vec<usize>,
}

impl ArraySpec {
    fn len(&self) -> usize {
        self.shape.iter().product()
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Header {
    pub format_version: u32,
    pub model_kind: ModelKind,
    pub model_config: ModelConfig,
    pub train_config: TrainConfig,
    pub mel: MelConfig,
    pub frames: usize,
    pub seed: u64,
    pub created_by: String,
    /// Frames each statistic was fitted on: mel, profile, target.
    pub stats_frames: (usize, usize, Option<usize>),
    pub arrays: Vec<ArraySpec>,
}

fn stats_arrays<'a>(prefix: &str, s: &'a FeatureStats, out: &mut Vec<(ArraySpec, &'a [f64])>) {
    for (field, v) in [("mean", &s.mean), ("std", &s.std)] {
        out.push((
            ArraySpec {
                name: format!("{prefix}.{field}"),
                shape: vec![v.len()],
            },
            v.as_slice(),
        ));
    }
}

fn all_arrays(m: &TrainedModel<f64>) -> Vec<(ArraySpec, &[f64])> {
    let mut out = Vec::new();
    for ((name, shape), v) in m.model.param_specs().into_iter().zip(m.model.params()) {
        out.push((ArraySpec { name, shape }, v));
    }
    for ((name, shape), v) in m.model.buffer_specs().into_iter().zip(m.model.buffers()) {
        out.push((ArraySpec { name, shape }, v));
    }
    stats_arrays("stats.mel", &m.normalizers.mel, &mut out);
    stats_arrays("stats.profile", &m.normalizers.profile, &mut out);
    if let Some(t) = &m.normalizers.target {
        stats_arrays("stats.target", t, &mut out);
    }
    out
}

pub fn encode(ck: &Checkpoint) -> Result<Vec<u8>> {
    let m = &ck.model;
    let arrays = all_arrays(m);
    let header = Header {
        format_version: FORMAT_VERSION,
        model_kind: m.kind,
        model_config: m.model_config.clone(),
        train_config: m.train_config.clone(),
        mel: ck.mel.clone(),
        frames: ck.frames,
        seed: m.train_config.seed,
        created_by: format!("jetssm {}", env!("CARGO_PKG_VERSION")),
        stats_frames: (
            m.normalizers.mel.fitted_frames,
            m.normalizers.profile.fitted_frames,
            m.normalizers.target.as_ref().map(|t| t.fitted_frames),
        ),
        arrays: arrays.iter().map(|(s, _)| s.clone()).collect(),
    };
    let json = serde_json::to_vec(&header).map_err(|e| Error::Parse(e.to_string()))?;
    let body: usize = arrays.iter().map(|(_, v)| v.len() * 8).sum();
    let mut out = Vec::with_capacity(16 + json.len() + body);
    out.extend_from_slice(MAGIC);
    out.extend_from_slice(&(json.len() as u64).to_le_bytes());
    out.extend_from_slice(&json);
    for (spec, v) in &arrays {
        debug_assert_eq!(spec.len(), v.len());
        for x in v.iter() {
            out.extend_from_slice(&x.to_le_bytes());
        }
    }
    Ok(out)
}

fn bad(msg: impl Into<String>) -> Error {
    Error::Incompatible(format!("checkpoint: {}", msg.into()))
}

pub fn decode(bytes: &[u8]) -> Result<Checkpoint> {
    if bytes.len() < 16 || &bytes[..8] != MAGIC {
        return Err(bad("not a jetssm checkpoint (bad magic)"));
    }
    let hlen = u64::from_le_bytes(bytes[8..16].try_into().expect("8 bytes")) as usize;
    let body_start = 16usize
        .checked_add(hlen)
        .filter(|&e| e <= bytes.len())
        .ok_or_else(|| bad("truncated header"))?;
    let header: Header =
        serde_json::from_slice(&bytes[16..body_start]).map_err(|e| Error::Parse(format!("checkpoint header: {e}")))?;
    if header.format_version != FORMAT_VERSION {
        return Err(bad(format!(
            "format_version {} not recognized (expected {FORMAT_VERSION})",
            header.format_version
        )));
    }
    let declared: usize = header.arrays.iter().map(|a| a.len() * 8).sum();
    if bytes.len() - body_start != declared {
        return Err(bad(format!(
            "array data is {} bytes but the header declares {declared}",
            bytes.len() - body_start
        )));
    }
    let mut values = bytes[body_start..]
        .chunks_exact(8)
        .map(|c| f64::from_le_bytes(c.try_into().expect("8 bytes")));
    let mut specs = header.arrays.iter();
    let mut next = |expect_name: &str, expect_shape: &[usize]| -> Result<Vec<f64>> {
        let spec = specs.next().ok_or_else(|| bad(format!("missing array {expect_name}")))?;
        if spec.name != expect_name || spec.shape != expect_shape {
            return Err(bad(format!(
                "array {} {:?} where the model expects {expect_name} {expect_shape:?}",
                spec.name, spec.shape
            )));
        }
        Ok(values.by_ref().take(spec.len()).collect())
    };

    let mut model = Model::<f64>::new(header.model_kind, &header.model_config)?;
    let param_specs = model.param_specs();
    for ((name, shape), dst) in param_specs.iter().zip(model.params_mut()) {
        dst.copy_from_slice(&next(name, shape)?);
    }
    let buffer_specs = model.buffer_specs();
    for ((name, shape), dst) in buffer_specs.iter().zip(model.buffers_mut()) {
        dst.copy_from_slice(&next(name, shape)?);
    }
    let (mel_frames, profile_frames, target_frames) = header.stats_frames;
    let n_in = header.model_config.in_channels;
    let n_out = header.model_config.out_channels;
    let n_mel = n_in.checked_sub(n_out).ok_or_else(|| bad("in_channels smaller than out_channels"))?;
    let mut stats = |prefix: &str, c: usize, fitted_frames: usize| -> Result<FeatureStats> {
        Ok(FeatureStats {
            mean: next(&format!("{prefix}.mean"), &[c])?,
            std: next(&format!("{prefix}.std"), &[c])?,
            fitted_frames,
        })
    };
    let mel = stats("stats.mel", n_mel, mel_frames)?;
    let profile = stats("stats.profile", n_out, profile_frames)?;
    let target = match target_frames {
        Some(f) => Some(stats("stats.target", n_out, f)?),
        None => None,
    };
    if specs.next().is_some() {
        return Err(bad("unexpected trailing arrays"));
    }
    Ok(Checkpoint {
        model: TrainedModel {
            kind: header.model_kind,
            model_config: header.model_config,
            train_config: header.train_config,
            model,
            normalizers: Normalizers { mel, profile, target },
        },
        mel: header.mel,
        frames: header.frames,
    })
}

pub fn save(path: &Path, ck: &Checkpoint) -> Result<()> {
    write_bytes_atomic(path, &encode(ck)?)
}

pub fn load(path: &Path) -> Result<Checkpoint> {
    let bytes = std::fs::read(path).map_err(|e| Error::io(path, e))?;
    decode(&bytes)
}
