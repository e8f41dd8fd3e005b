use std::sync::Arc;

use num_complex::Complex;
use rustfft::{Fft, FftPlanner};
use serde::{Deserialize, Serialize};

use super::AudioClip;
use crate::error::{invalid, Result};
use crate::nn::SequenceTensor;

/// Added before the log so silence maps to a finite floor.
pub const LOG_EPS: f64 = 1e-10;

pub fn hz_to_mel(f: f64) -> f64 {
    2595.0 * (1.0 + f / 700.0).log10()
}

pub fn mel_to_hz(m: f64) -> f64 {
    700.0 * (10f64.powf(m / 2595.0) - 1.0)
}

/// Triangular filters on the HTK mel scale.
#[derive(Clone, Debug, PartialEq)]
pub struct MelFilterbank {
    /// `[n_mels][n_fft/2 + 1]`
    pub weights: Vec<Vec<f64>>,
    pub centers_hz: Vec<f64>,
    pub fmin: f64,
    pub fmax: f64,
}

impl MelFilterbank {
    pub fn n_mels(&self) -> usize {
        self.weights.len()
    }

    /// Filter whose center lies nearest `f`.
    pub fn nearest_bin(&self, f: f64) -> usize {
        let mut best = 0;
        for (i, c) in self.centers_hz.iter().enumerate() {
            if (c - f).abs() < (self.centers_hz[best] - f).abs() {
                best = i;
            }
        }
        best
    }

    pub fn apply(&self, magnitude: &[f64], out: &mut [f64]) {
        for (o, w) in out.iter_mut().zip(&self.weights) {
            let s: f64 = w.iter().zip(magnitude).map(|(a, b)| a * b).sum();
            *o = (s + LOG_EPS).ln();
        }
    }
}

pub fn mel_filterbank(
    n_fft: usize,
    sample_rate: u32,
    n_mels: usize,
    fmin: f64,
    fmax: f64,
) -> Result<MelFilterbank> {
    let nyquist = sample_rate as f64 / 2.0;
    if !(fmin >= 0.0 && fmin < fmax && fmax <= nyquist) {
        return invalid(format!(
            "mel bounds must satisfy 0 <= fmin < fmax <= {nyquist}, got [{fmin}, {fmax}]"
        ));
    }
    if n_mels == 0 || n_fft < 2 {
        return invalid("n_mels >= 1 and n_fft >= 2 required");
    }
    let n_bins = n_fft / 2 + 1;
    let (m0, m1) = (hz_to_mel(fmin), hz_to_mel(fmax));
    let edges: Vec<f64> = (0..n_mels + 2)
        .map(|i| mel_to_hz(m0 + (m1 - m0) * i as f64 / (n_mels + 1) as f64))
        .collect();
    let bin_hz = |k: usize| k as f64 * sample_rate as f64 / n_fft as f64;
    let mut weights = Vec::with_capacity(n_mels);
    for m in 0..n_mels {
        let (lo, c, hi) = (edges[m], edges[m + 1], edges[m + 2]);
        let mut row: Vec<f64> = (0..n_bins)
            .map(|k| {
                let f = bin_hz(k);
                ((f - lo) / (c - lo)).min((hi - f) / (hi - c)).max(0.0)
            })
            .collect();
        // Filters narrower than a bin spacing would otherwise be empty.
        if row.iter().all(|&w| w == 0.0) {
            let k = ((c * n_fft as f64 / sample_rate as f64).round() as usize).min(n_bins - 1);
            row[k] = 1.0;
        }
        weights.push(row);
    }
    Ok(MelFilterbank {
        weights,
        centers_hz: edges[1..=n_mels].to_vec(),
        fmin,
        fmax,
    })
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct MelConfig {
    pub n_fft: usize,
    pub n_mels: usize,
    pub fmin: f64,
    /// `None` means Nyquist.
    pub fmax: Option<f64>,
    /// `None` picks the hop from the clip length and target frame count.
    pub hop: Option<usize>,
}

impl Default for MelConfig {
    fn default() -> Self {
        Self {
            n_fft: 1024,
            n_mels: 60,
            fmin: 0.0,
            fmax: None,
            hop: None,
        }
    }
}

impl MelConfig {
    pub fn filterbank(&self, sample_rate: u32) -> Result<MelFilterbank> {
        let fmax = self.fmax.unwrap_or(sample_rate as f64 / 2.0);
        mel_filterbank(self.n_fft, sample_rate, self.n_mels, self.fmin, fmax)
    }

    pub fn hop_for(&self, len: usize, target_frames: usize) -> usize {
        self.hop.unwrap_or_else(|| default_hop(len, target_frames))
    }
}

/// `floor(len / (target + 1))`, at least 64.
pub fn default_hop(len: usize, target_frames: usize) -> usize {
    (len / (target_frames + 1)).max(64)
}

pub fn frame_count(len: usize, n_fft: usize, hop: usize) -> Result<usize> {
    if len < n_fft {
        return invalid(format!(
            "clip shorter than one window ({len} samples < n_fft {n_fft})"
        ));
    }
    Ok(1 + (len - n_fft) / hop)
}

/// Log-mel spectrogram `[frames x n_mels]`.
#[derive(Clone, Debug, PartialEq)]
pub struct MelSpectrogram {
    pub frames: SequenceTensor<f64>,
    pub hop_seconds: f64,
    pub fmin: f64,
    pub fmax: f64,
}

impl MelSpectrogram {
    pub fn n_mels(&self) -> usize {
        self.frames.channels()
    }
}

/// Windowed magnitude spectrum followed by the filterbank, one frame at a time.
pub struct FrameAnalyzer {
    fft: Arc<dyn Fft<f64>>,
    window: Vec<f64>,
    bank: MelFilterbank,
    buf: Vec<Complex<f64>>,
    scratch: Vec<Complex<f64>>,
    mag: Vec<f64>,
}

impl FrameAnalyzer {
    pub fn new(cfg: &MelConfig, sample_rate: u32) -> Result<Self> {
        let bank = cfg.filterbank(sample_rate)?;
        let n = cfg.n_fft;
        let fft = FftPlanner::new().plan_fft_forward(n);
        // Periodic Hann.
        let window = (0..n)
            .map(|i| 0.5 - 0.5 * (2.0 * std::f64::consts::PI * i as f64 / n as f64).cos())
            .collect();
        Ok(Self {
            scratch: vec![Complex::default(); fft.get_inplace_scratch_len()],
            fft,
            window,
            buf: vec![Complex::default(); n],
            mag: vec![0.0; n / 2 + 1],
            bank,
        })
    }

    pub fn n_fft(&self) -> usize {
        self.window.len()
    }

    pub fn filterbank(&self) -> &MelFilterbank {
        &self.bank
    }

    /// `segment.len()` must equal `n_fft`.
    pub fn analyze(&mut self, segment: &[f64], out: &mut [f64]) {
        debug_assert_eq!(segment.len(), self.window.len());
        for ((b, &s), &w) in self.buf.iter_mut().zip(segment).zip(&self.window) {
            *b = Complex::new(s * w, 0.0);
        }
        self.fft.process_with_scratch(&mut self.buf, &mut self.scratch);
        for (m, b) in self.mag.iter_mut().zip(&self.buf) {
            *m = b.norm();
        }
        self.bank.apply(&self.mag, out);
    }
}

/// Magnitude STFT -> mel filterbank -> `ln(x + 1e-10)`.
pub fn mel_spectrogram(clip: &AudioClip, cfg: &MelConfig, hop: usize) -> Result<MelSpectrogram> {
    if hop == 0 {
        return invalid("hop must be positive");
    }
    let frames = frame_count(clip.samples.len(), cfg.n_fft, hop)?;
    let mut an = FrameAnalyzer::new(cfg, clip.sample_rate)?;
    let mut out = SequenceTensor::zeros(frames, cfg.n_mels);
    for t in 0..frames {
        let seg = &clip.samples[t * hop..t * hop + cfg.n_fft];
        an.analyze(seg, out.row_mut(t));
    }
    Ok(MelSpectrogram {
        frames: out,
        hop_seconds: hop as f64 / clip.sample_rate as f64,
        fmin: an.bank.fmin,
        fmax: an.bank.fmax,
    })
}

/// Position of target frame `j` on the source frame axis.
pub(crate) fn source_position(j: usize, source: usize, target: usize) -> (usize, f64) {
    let p = (j * (source - 1)) as f64 / (target - 1) as f64;
    let i = (p.floor() as usize).min(source - 1);
    (i, p - i as f64)
}

pub(crate) fn lerp_rows(a: &[f64], b: &[f64], frac: f64, out: &mut [f64]) {
    for ((o, &x), &y) in out.iter_mut().zip(a).zip(b) {
        *o = if frac == 0.0 { x } else { x + (y - x) * frac };
    }
}

/// Linear resampling of every channel onto `target_frames` evenly spaced points.
pub fn align_to_timeline(
    spec: &SequenceTensor<f64>,
    target_frames: usize,
) -> Result<SequenceTensor<f64>> {
    let source = spec.frames();
    if source < 2 || target_frames < 2 {
        return invalid(format!(
            "alignment needs >= 2 source and target frames (got {source} -> {target_frames})"
        ));
    }
    let mut out = SequenceTensor::zeros(target_frames, spec.channels());
    for j in 0..target_frames {
        let (i, frac) = source_position(j, source, target_frames);
        let next = (i + 1).min(source - 1);
        lerp_rows(spec.row(i), spec.row(next), frac, out.row_mut(j));
    }
    Ok(out)
}

/// Clip -> log-mel -> aligned `[target_frames x n_mels]`.
pub fn featurize(clip: &AudioClip, cfg: &MelConfig, target_frames: usize) -> Result<SequenceTensor<f64>> {
    let hop = cfg.hop_for(clip.samples.len(), target_frames);
    let spec = mel_spectrogram(clip, cfg, hop)?;
    align_to_timeline(&spec.frames, target_frames)
}
