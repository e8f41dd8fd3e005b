use std::collections::VecDeque;

use super::mel::{frame_count, lerp_rows, source_position, FrameAnalyzer, MelConfig};
use crate::error::Result;

/// Incremental version of [`super::featurize`]: push samples, pop aligned frames.
///
/// The total clip length must be known up front (the hop and the alignment
/// grid depend on it). Buffered state is one window of samples and two
/// spectrogram rows regardless of clip length.
pub struct StreamingFeaturizer {
    analyzer: FrameAnalyzer,
    hop: usize,
    source_frames: usize,
    target_frames: usize,
    samples: VecDeque<f64>,
    /// Absolute index of `samples[0]`.
    offset: usize,
    /// Absolute index of the next pushed sample.
    next_abs: usize,
    segment: Vec<f64>,
    prev: Vec<f64>,
    cur: Vec<f64>,
    /// Source frames analyzed so far.
    analyzed: usize,
    /// Target frames emitted so far.
    emitted: usize,
}

impl StreamingFeaturizer {
    pub fn new(total_samples: usize, sample_rate: u32, cfg: &MelConfig, target_frames: usize) -> Result<Self> {
        let hop = cfg.hop_for(total_samples, target_frames);
        let source_frames = frame_count(total_samples, cfg.n_fft, hop)?;
        if source_frames < 2 || target_frames < 2 {
            return crate::error::invalid(format!(
                "alignment needs >= 2 source and target frames (got {source_frames} -> {target_frames})"
            ));
        }
        let analyzer = FrameAnalyzer::new(cfg, sample_rate)?;
        Ok(Self {
            hop,
            source_frames,
            target_frames,
            samples: VecDeque::with_capacity(cfg.n_fft + hop),
            offset: 0,
            next_abs: 0,
            segment: vec![0.0; cfg.n_fft],
            prev: vec![0.0; cfg.n_mels],
            cur: vec![0.0; cfg.n_mels],
            analyzed: 0,
            emitted: 0,
            analyzer,
        })
    }

    pub fn hop(&self) -> usize {
        self.hop
    }

    pub fn n_mels(&self) -> usize {
        self.cur.len()
    }

    pub fn is_done(&self) -> bool {
        self.emitted == self.target_frames
    }

    /// Feeds samples; every newly available aligned frame is passed to `emit`.
    pub fn push(&mut self, chunk: &[f64], mut emit: impl FnMut(&[f64]) -> Result<()>) -> Result<()> {
        let n_fft = self.segment.len();
        let mut row = vec![0.0; self.cur.len()];
        for &s in chunk {
            let abs = self.next_abs;
            self.next_abs += 1;
            let start = self.analyzed * self.hop;
            // Past the last window, or in a gap between non-overlapping windows.
            if self.analyzed >= self.source_frames || abs < start {
                continue;
            }
            if self.samples.is_empty() {
                self.offset = abs;
            }
            self.samples.push_back(s);
            if self.samples.len() == n_fft {
                for (d, &v) in self.segment.iter_mut().zip(&self.samples) {
                    *d = v;
                }
                std::mem::swap(&mut self.prev, &mut self.cur);
                self.analyzer.analyze(&self.segment, &mut self.cur);
                self.analyzed += 1;
                let next = self.analyzed * self.hop;
                while self.offset < next && !self.samples.is_empty() {
                    self.samples.pop_front();
                    self.offset += 1;
                }
                self.drain(&mut row, &mut emit)?;
            }
        }
        Ok(())
    }

    fn drain(&mut self, row: &mut [f64], emit: &mut impl FnMut(&[f64]) -> Result<()>) -> Result<()> {
        // Rows available: prev = source frame analyzed-2, cur = analyzed-1.
        while self.emitted < self.target_frames {
            let (i, frac) = source_position(self.emitted, self.source_frames, self.target_frames);
            let last = self.analyzed - 1;
            if i == last && frac == 0.0 {
                row.copy_from_slice(&self.cur);
            } else if i + 1 == last {
                lerp_rows(&self.prev, &self.cur, frac, row);
            } else {
                break;
            }
            emit(row)?;
            self.emitted += 1;
        }
        Ok(())
    }
}
