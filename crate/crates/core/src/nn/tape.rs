//! Coarse-grained gradient tape.
//!
//! Layers push one entry per forward call; backward pops them in reverse and
//! each layer replays its own hand-derived adjoint.

use num_complex::Complex;

use super::norm::NormMode;
use super::SequenceTensor;
use crate::error::{Error, Result};

#[derive(Clone, Debug)]
pub(crate) enum TapeEntry<T> {
    Linear {
        input: SequenceTensor<T>,
    },
    Norm {
        mode: NormMode,
        xhat: SequenceTensor<T>,
        /// Per-channel (batch) or per-frame (layer) inverse standard deviation.
        inv_std: Vec<T>,
        /// Batch statistics when computed from the input (training batch norm).
        batch_stats: Option<(Vec<T>, Vec<T>)>,
    },
    Activation {
        pre: SequenceTensor<T>,
    },
    Dropout {
        /// Per-entry multiplier: 0 or 1/(1-p).
        mask: Vec<T>,
    },
    SsmConv {
        input: SequenceTensor<T>,
        /// Zero-padded spectra of each channel's input and kernel.
        input_spectra: Vec<Vec<Complex<T>>>,
        kernel_spectra: Vec<Vec<Complex<T>>>,
    },
    Gru {
        input: SequenceTensor<T>,
        /// Hidden states h_0..h_L (L+1 rows).
        hidden: Vec<Vec<T>>,
        /// Gate activations per step: r, z, n and the hidden-side n pre-term.
        r: Vec<Vec<T>>,
        z: Vec<Vec<T>>,
        n: Vec<Vec<T>>,
        hn: Vec<Vec<T>>,
    },
}

impl<T> TapeEntry<T> {
    fn kind(&self) -> &'static str {
        match self {
            TapeEntry::Linear { .. } => "linear",
            TapeEntry::Norm { .. } => "norm",
            TapeEntry::Activation { .. } => "activation",
            TapeEntry::Dropout { .. } => "dropout",
            TapeEntry::SsmConv { .. } => "ssm_conv",
            TapeEntry::Gru { .. } => "gru",
        }
    }
}

/// Records the forward pass of a model for a subsequent backward pass.
#[derive(Clone, Debug)]
pub struct GradientTape<T> {
    entries: Vec<TapeEntry<T>>,
}

impl<T> Default for GradientTape<T> {
    fn default() -> Self {
        Self::new()
    }
}

impl<T> GradientTape<T> {
    pub fn new() -> Self {
        Self {
            entries: Vec::new(),
        }
    }

    pub fn len(&self) -> usize {
        self.entries.len()
    }

    pub fn is_empty(&self) -> bool {
        self.entries.is_empty()
    }

    pub(crate) fn push(&mut self, e: TapeEntry<T>) {
        self.entries.push(e);
    }

    pub(crate) fn pop(&mut self, expected: &'static str) -> Result<TapeEntry<T>> {
        match self.entries.pop() {
            Some(e) if e.kind() == expected => Ok(e),
            Some(e) => Err(Error::State(format!(
                "tape out of order: expected {expected} entry, found {}",
                e.kind()
            ))),
            None => Err(Error::State(format!(
                "backward called without a recorded forward pass (missing {expected} entry)"
            ))),
        }
    }

    pub(crate) fn entries(&self) -> &[TapeEntry<T>] {
        &self.entries
    }
}
