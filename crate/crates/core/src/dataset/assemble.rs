use std::ops::Range;

use serde::{Deserialize, Serialize};

use super::{ErosionProfileSet, PROFILE_COLUMNS};
use crate::error::{shape, Result};
use crate::nn::SequenceTensor;

/// Per-channel z-score statistics, with the frame count they were fitted on.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct FeatureStats {
    pub mean: Vec<f64>,
    /// Zero marks a constant channel (centered, not scaled).
    pub std: Vec<f64>,
    pub fitted_frames: usize,
}

impl FeatureStats {
    pub fn fit(x: &SequenceTensor<f64>) -> Self {
        let n = x.frames().max(1) as f64;
        let c = x.channels();
        let mut mean = vec![0.0; c];
        for t in 0..x.frames() {
            for (m, v) in mean.iter_mut().zip(x.row(t)) {
                *m += v;
            }
        }
        mean.iter_mut().for_each(|m| *m /= n);
        let mut var = vec![0.0; c];
        for t in 0..x.frames() {
            for ((s, v), m) in var.iter_mut().zip(x.row(t)).zip(&mean) {
                *s += (v - m) * (v - m);
            }
        }
        let std = var
            .into_iter()
            .zip(&mean)
            .map(|(s, m)| {
                let sd = (s / n).sqrt();
                // Treat rounding-level spread as constant.
                if sd <= 1e-12 * m.abs().max(1.0) {
                    0.0
                } else {
                    sd
                }
            })
            .collect();
        Self {
            mean,
            std,
            fitted_frames: x.frames(),
        }
    }

    /// Pools frames from several tensors.
    pub fn fit_many<'a>(parts: impl IntoIterator<Item = &'a SequenceTensor<f64>>) -> Result<Self> {
        let parts: Vec<_> = parts.into_iter().collect();
        let Some(first) = parts.first() else {
            return shape("no data to fit statistics on");
        };
        let c = first.channels();
        let mut data = Vec::new();
        let mut frames = 0;
        for p in &parts {
            p.check_channels(c, "statistics input")?;
            data.extend_from_slice(p.data());
            frames += p.frames();
        }
        Ok(Self::fit(&SequenceTensor::new(data, frames, c)?))
    }

    pub fn channels(&self) -> usize {
        self.mean.len()
    }

    pub fn apply(&self, x: &SequenceTensor<f64>) -> Result<SequenceTensor<f64>> {
        x.check_channels(self.channels(), "normalization")?;
        let mut y = x.clone();
        for t in 0..y.frames() {
            self.apply_row(y.row_mut(t));
        }
        Ok(y)
    }

    pub fn apply_row(&self, row: &mut [f64]) {
        for ((v, m), s) in row.iter_mut().zip(&self.mean).zip(&self.std) {
            *v -= m;
            if *s > 0.0 {
                *v /= s;
            }
        }
    }

    pub fn invert(&self, x: &SequenceTensor<f64>) -> Result<SequenceTensor<f64>> {
        x.check_channels(self.channels(), "denormalization")?;
        let mut y = x.clone();
        for t in 0..y.frames() {
            self.invert_row(y.row_mut(t));
        }
        Ok(y)
    }

    pub fn invert_row(&self, row: &mut [f64]) {
        for ((v, m), s) in row.iter_mut().zip(&self.mean).zip(&self.std) {
            if *s > 0.0 {
                *v *= s;
            }
            *v += m;
        }
    }
}

/// Z-scores `x` with `stats`, or with statistics fitted on `x` when `None`.
pub fn normalize_features(
    x: &SequenceTensor<f64>,
    stats: Option<&FeatureStats>,
) -> Result<(SequenceTensor<f64>, FeatureStats)> {
    let stats = match stats {
        Some(s) => s.clone(),
        None => FeatureStats::fit(x),
    };
    Ok((stats.apply(x)?, stats))
}

/// Chronological 50/50 split: `[0, n/2)` and `[n/2, n)`.
pub fn split_train_test(frames: usize) -> (Range<usize>, Range<usize>) {
    let mid = frames / 2;
    (0..mid, mid..frames)
}

/// Model input (mel then profile columns) plus the µm target.
#[derive(Clone, Debug, PartialEq)]
pub struct AlignedSample {
    pub input: SequenceTensor<f64>,
    pub target: SequenceTensor<f64>,
    pub profile_mask: bool,
}

impl AlignedSample {
    pub fn frames(&self) -> usize {
        self.input.frames()
    }
}

/// Concatenates normalized mel features with normalized profiles; `mask = false`
/// zero-fills the profile columns.
pub fn assemble_sample(
    mel: &SequenceTensor<f64>,
    profiles: &ErosionProfileSet,
    profile_stats: &FeatureStats,
    mask: bool,
) -> Result<AlignedSample> {
    let frames = mel.frames();
    if profiles.frames() != frames {
        return shape(format!(
            "mel has {frames} frames but profiles have {}",
            profiles.frames()
        ));
    }
    let n_mel = mel.channels();
    let width = n_mel + PROFILE_COLUMNS;
    let mut input = SequenceTensor::zeros(frames, width);
    for t in 0..frames {
        let row = input.row_mut(t);
        row[..n_mel].copy_from_slice(mel.row(t));
        if mask {
            row[n_mel..].copy_from_slice(profiles.depths().row(t));
            profile_stats.apply_row(&mut row[n_mel..]);
        }
    }
    Ok(AlignedSample {
        input,
        target: profiles.depths().clone(),
        profile_mask: mask,
    })
}
