use serde::{Deserialize, Serialize};

use super::tape::{GradientTape, TapeEntry};
use super::SequenceTensor;
use crate::error::Result;
use crate::Scalar;

/// Normalization flavor used inside S4D blocks.
#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum NormKind {
    /// Per-channel statistics over the time axis; running statistics at inference.
    #[default]
    BatchOverTime,
    /// Per-frame statistics over channels.
    Layer,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub(crate) enum NormMode {
    BatchTrain,
    BatchEval,
    Layer,
}

const MOMENTUM: f64 = 0.1;

/// Affine-normalization with trainable `gamma`/`beta` and running buffers.
#[derive(Clone, Debug, PartialEq)]
pub struct Norm<T> {
    pub kind: NormKind,
    pub gamma: Vec<T>,
    pub beta: Vec<T>,
    pub running_mean: Vec<T>,
    pub running_var: Vec<T>,
    pub eps: T,
}

impl<T: Scalar> Norm<T> {
    pub fn new(kind: NormKind, channels: usize) -> Self {
        Self {
            kind,
            gamma: vec![T::one(); channels],
            beta: vec![T::zero(); channels],
            running_mean: vec![T::zero(); channels],
            running_var: vec![T::one(); channels],
            eps: T::lit(1e-5),
        }
    }

    pub fn channels(&self) -> usize {
        self.gamma.len()
    }

    pub fn zeros_like(&self) -> Self {
        let c = self.channels();
        Self {
            kind: self.kind,
            gamma: vec![T::zero(); c],
            beta: vec![T::zero(); c],
            running_mean: vec![T::zero(); c],
            running_var: vec![T::zero(); c],
            eps: self.eps,
        }
    }

    /// Inference-time normalization of one frame.
    pub fn apply_frame(&self, x: &[T], out: &mut [T]) {
        match self.kind {
            NormKind::BatchOverTime => {
                for c in 0..x.len() {
                    let inv = T::one() / (self.running_var[c] + self.eps).sqrt();
                    out[c] = self.gamma[c] * (x[c] - self.running_mean[c]) * inv + self.beta[c];
                }
            }
            NormKind::Layer => {
                let n = T::from_usize_lossy(x.len());
                let mean = x.iter().copied().sum::<T>() / n;
                let var = x.iter().map(|&v| (v - mean) * (v - mean)).sum::<T>() / n;
                let inv = T::one() / (var + self.eps).sqrt();
                for c in 0..x.len() {
                    out[c] = self.gamma[c] * (x[c] - mean) * inv + self.beta[c];
                }
            }
        }
    }

    pub(crate) fn forward_recorded(
        &self,
        x: &SequenceTensor<T>,
        training: bool,
        tape: &mut GradientTape<T>,
    ) -> Result<SequenceTensor<T>> {
        x.check_channels(self.channels(), "norm")?;
        let (frames, chans) = (x.frames(), x.channels());
        let mut xhat = SequenceTensor::zeros(frames, chans);
        let mode = match (self.kind, training) {
            (NormKind::Layer, _) => NormMode::Layer,
            (NormKind::BatchOverTime, true) => NormMode::BatchTrain,
            (NormKind::BatchOverTime, false) => NormMode::BatchEval,
        };
        let mut batch_stats = None;
        let inv_std = match mode {
            NormMode::Layer => {
                let n = T::from_usize_lossy(chans);
                (0..frames)
                    .map(|t| {
                        let row = x.row(t);
                        let mean = row.iter().copied().sum::<T>() / n;
                        let var = row.iter().map(|&v| (v - mean) * (v - mean)).sum::<T>() / n;
                        let inv = T::one() / (var + self.eps).sqrt();
                        for c in 0..chans {
                            xhat.set(t, c, (row[c] - mean) * inv);
                        }
                        inv
                    })
                    .collect()
            }
            NormMode::BatchTrain => {
                let n = T::from_usize_lossy(frames);
                let mut means = vec![T::zero(); chans];
                let mut vars = vec![T::zero(); chans];
                for t in 0..frames {
                    for (m, &v) in means.iter_mut().zip(x.row(t)) {
                        *m += v;
                    }
                }
                means.iter_mut().for_each(|m| *m = *m / n);
                for t in 0..frames {
                    for c in 0..chans {
                        let d = x.get(t, c) - means[c];
                        vars[c] += d * d;
                    }
                }
                vars.iter_mut().for_each(|v| *v = *v / n);
                let inv: Vec<T> = vars.iter().map(|&v| T::one() / (v + self.eps).sqrt()).collect();
                for t in 0..frames {
                    for c in 0..chans {
                        xhat.set(t, c, (x.get(t, c) - means[c]) * inv[c]);
                    }
                }
                batch_stats = Some((means, vars));
                inv
            }
            NormMode::BatchEval => {
                let inv: Vec<T> = self
                    .running_var
                    .iter()
                    .map(|&v| T::one() / (v + self.eps).sqrt())
                    .collect();
                for t in 0..frames {
                    for c in 0..chans {
                        xhat.set(t, c, (x.get(t, c) - self.running_mean[c]) * inv[c]);
                    }
                }
                inv
            }
        };
        let y = SequenceTensor::from_fn(frames, chans, |t, c| {
            self.gamma[c] * xhat.get(t, c) + self.beta[c]
        });
        tape.push(TapeEntry::Norm {
            mode,
            xhat,
            inv_std,
            batch_stats,
        });
        Ok(y)
    }

    pub(crate) fn backward(
        &self,
        tape: &mut GradientTape<T>,
        dy: &SequenceTensor<T>,
        grad: &mut Self,
    ) -> Result<SequenceTensor<T>> {
        let TapeEntry::Norm {
            mode,
            xhat,
            inv_std,
            ..
        } = tape.pop("norm")?
        else {
            unreachable!()
        };
        let (frames, chans) = (xhat.frames(), xhat.channels());
        let dxhat = SequenceTensor::from_fn(frames, chans, |t, c| dy.get(t, c) * self.gamma[c]);
        for t in 0..frames {
            for c in 0..chans {
                grad.gamma[c] += dy.get(t, c) * xhat.get(t, c);
                grad.beta[c] += dy.get(t, c);
            }
        }
        let mut dx = SequenceTensor::zeros(frames, chans);
        match mode {
            NormMode::BatchEval => {
                for t in 0..frames {
                    for c in 0..chans {
                        dx.set(t, c, dxhat.get(t, c) * inv_std[c]);
                    }
                }
            }
            NormMode::BatchTrain => {
                let n = T::from_usize_lossy(frames);
                for c in 0..chans {
                    let (mut s1, mut s2) = (T::zero(), T::zero());
                    for t in 0..frames {
                        s1 += dxhat.get(t, c);
                        s2 += dxhat.get(t, c) * xhat.get(t, c);
                    }
                    for t in 0..frames {
                        let v = inv_std[c] / n * (n * dxhat.get(t, c) - s1 - xhat.get(t, c) * s2);
                        dx.set(t, c, v);
                    }
                }
            }
            NormMode::Layer => {
                let n = T::from_usize_lossy(chans);
                for t in 0..frames {
                    let (mut s1, mut s2) = (T::zero(), T::zero());
                    for c in 0..chans {
                        s1 += dxhat.get(t, c);
                        s2 += dxhat.get(t, c) * xhat.get(t, c);
                    }
                    for c in 0..chans {
                        let v = inv_std[t] / n * (n * dxhat.get(t, c) - s1 - xhat.get(t, c) * s2);
                        dx.set(t, c, v);
                    }
                }
            }
        }
        Ok(dx)
    }

    /// Folds batch statistics into the running buffers.
    pub(crate) fn absorb(&mut self, means: &[T], vars: &[T]) {
        let m = T::lit(MOMENTUM);
        for c in 0..self.channels() {
            self.running_mean[c] = (T::one() - m) * self.running_mean[c] + m * means[c];
            self.running_var[c] = (T::one() - m) * self.running_var[c] + m * vars[c];
        }
    }
}
