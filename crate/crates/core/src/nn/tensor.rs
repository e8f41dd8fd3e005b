use crate::error::{invalid, shape, Result};
use crate::Scalar;

/// Time-major `[frames x channels]` array.
#[derive(Clone, Debug, PartialEq)]
pub struct SequenceTensor<T> {
    data: Vec<T>,
    frames: usize,
    channels: usize,
}

impl<T: Scalar> SequenceTensor<T> {
    pub fn new(data: Vec<T>, frames: usize, channels: usize) -> Result<Self> {
        if frames == 0 || channels == 0 {
            return invalid(format!("tensor extent must be positive, got {frames}x{channels}"));
        }
        if data.len() != frames * channels {
            return shape(format!(
                "tensor data has {} entries, expected {frames}x{channels}",
                data.len()
            ));
        }
        if let Some(i) = data.iter().position(|v| !v.is_finite()) {
            return invalid(format!(
                "non-finite entry at frame {}, channel {}",
                i / channels,
                i % channels
            ));
        }
        Ok(Self {
            data,
            frames,
            channels,
        })
    }

    pub fn zeros(frames: usize, channels: usize) -> Self {
        Self {
            data: vec![T::zero(); frames * channels],
            frames,
            channels,
        }
    }

    pub fn from_fn(frames: usize, channels: usize, mut f: impl FnMut(usize, usize) -> T) -> Self {
        let mut data = Vec::with_capacity(frames * channels);
        for t in 0..frames {
            for c in 0..channels {
                data.push(f(t, c));
            }
        }
        Self {
            data,
            frames,
            channels,
        }
    }

    /// Unchecked constructor for internal producers whose outputs are finite by construction.
    pub(crate) fn from_raw(data: Vec<T>, frames: usize, channels: usize) -> Self {
        debug_assert_eq!(data.len(), frames * channels);
        Self {
            data,
            frames,
            channels,
        }
    }

    pub fn frames(&self) -> usize {
        self.frames
    }

    pub fn channels(&self) -> usize {
        self.channels
    }

    pub fn data(&self) -> &[T] {
        &self.data
    }

    pub fn data_mut(&mut self) -> &mut [T] {
        &mut self.data
    }

    pub fn into_data(self) -> Vec<T> {
        self.data
    }

    #[inline]
    pub fn get(&self, t: usize, c: usize) -> T {
        self.data[t * self.channels + c]
    }

    #[inline]
    pub fn set(&mut self, t: usize, c: usize, v: T) {
        self.data[t * self.channels + c] = v;
    }

    pub fn row(&self, t: usize) -> &[T] {
        &self.data[t * self.channels..(t + 1) * self.channels]
    }

    pub fn row_mut(&mut self, t: usize) -> &mut [T] {
        &mut self.data[t * self.channels..(t + 1) * self.channels]
    }

    pub fn column(&self, c: usize) -> Vec<T> {
        (0..self.frames).map(|t| self.get(t, c)).collect()
    }

    pub fn set_column(&mut self, c: usize, values: &[T]) {
        for (t, &v) in values.iter().enumerate() {
            self.set(t, c, v);
        }
    }

    /// Copy of frames `start..end`.
    pub fn slice_frames(&self, start: usize, end: usize) -> Result<Self> {
        if start >= end || end > self.frames {
            return invalid(format!("frame range {start}..{end} outside 0..{}", self.frames));
        }
        Ok(Self::from_raw(
            self.data[start * self.channels..end * self.channels].to_vec(),
            end - start,
            self.channels,
        ))
    }

    /// Copy of channels `start..end`.
    pub fn slice_channels(&self, start: usize, end: usize) -> Result<Self> {
        if start >= end || end > self.channels {
            return invalid(format!("channel range {start}..{end} outside 0..{}", self.channels));
        }
        Ok(Self::from_fn(self.frames, end - start, |t, c| self.get(t, start + c)))
    }

    /// Reorders frames so that output frame `i` is input frame `perm[i]`.
    pub fn permute_frames(&self, perm: &[usize]) -> Result<Self> {
        if perm.len() != self.frames {
            return shape("permutation length must equal frame count");
        }
        let mut data = Vec::with_capacity(self.data.len());
        for &p in perm {
            data.extend_from_slice(self.row(p));
        }
        Ok(Self::from_raw(data, self.frames, self.channels))
    }

    pub fn same_shape(&self, other: &Self) -> bool {
        self.frames == other.frames && self.channels == other.channels
    }

    pub fn map(&self, f: impl Fn(T) -> T) -> Self {
        Self::from_raw(self.data.iter().map(|&v| f(v)).collect(), self.frames, self.channels)
    }

    pub fn to_f64(&self) -> SequenceTensor<f64> {
        SequenceTensor::from_raw(
            self.data.iter().map(|v| v.as_f64()).collect(),
            self.frames,
            self.channels,
        )
    }

    pub fn from_f64(src: &SequenceTensor<f64>) -> Self {
        Self::from_raw(
            src.data().iter().map(|&v| T::lit(v)).collect(),
            src.frames(),
            src.channels(),
        )
    }

    pub(crate) fn check_channels(&self, expected: usize, what: &str) -> Result<()> {
        if self.channels != expected {
            return shape(format!(
                "{what}: expected {expected} channels, got {}",
                self.channels
            ));
        }
        Ok(())
    }
}
