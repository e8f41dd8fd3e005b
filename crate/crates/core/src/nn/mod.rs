//! Layer stack: the S4D network and the GRU / MLP baselines, each with a
//! hand-derived reverse pass recorded on a [`GradientTape`].

mod activation;
mod gru;
mod linear;
mod model;
mod norm;
mod s4d;
mod tape;
mod tensor;

pub use activation::Activation;
pub use gru::GruLayer;
pub use linear::Linear;
pub use model::{GruModel, MlpModel, Model, ModelConfig, ModelKind, ModelStream, S4dModel};
pub use norm::{Norm, NormKind};
pub use s4d::{S4dBlock, S4dBlockStream};
pub use tape::GradientTape;
pub use tensor::SequenceTensor;

use rand::Rng;
use tape::TapeEntry;

use crate::error::Result;
use crate::Scalar;

/// Random source for initialization and dropout.
pub type ModelRng = rand_chacha::ChaCha8Rng;

pub(crate) fn activation_recorded<T: Scalar>(
    act: Activation,
    x: &SequenceTensor<T>,
    tape: &mut GradientTape<T>,
) -> SequenceTensor<T> {
    let y = x.map(|v| act.apply(v));
    tape.push(TapeEntry::Activation { pre: x.clone() });
    y
}

pub(crate) fn activation_backward<T: Scalar>(
    act: Activation,
    tape: &mut GradientTape<T>,
    dy: &SequenceTensor<T>,
) -> Result<SequenceTensor<T>> {
    let TapeEntry::Activation { pre } = tape.pop("activation")? else {
        unreachable!()
    };
    let mut dx = dy.clone();
    for (d, &p) in dx.data_mut().iter_mut().zip(pre.data()) {
        *d *= act.derivative(p);
    }
    Ok(dx)
}

/// Inverted dropout; identity (empty mask) outside training or at rate 0.
pub(crate) fn dropout_recorded<T: Scalar>(
    x: &SequenceTensor<T>,
    rate: f64,
    training: bool,
    rng: &mut ModelRng,
    tape: &mut GradientTape<T>,
) -> SequenceTensor<T> {
    if !training || rate <= 0.0 {
        tape.push(TapeEntry::Dropout { mask: Vec::new() });
        return x.clone();
    }
    let keep = T::lit(1.0 / (1.0 - rate));
    let mask: Vec<T> = (0..x.data().len())
        .map(|_| if rng.gen_bool(rate) { T::zero() } else { keep })
        .collect();
    let mut y = x.clone();
    for (v, &m) in y.data_mut().iter_mut().zip(&mask) {
        *v *= m;
    }
    tape.push(TapeEntry::Dropout { mask });
    y
}

pub(crate) fn dropout_backward<T: Scalar>(
    tape: &mut GradientTape<T>,
    dy: &SequenceTensor<T>,
) -> Result<SequenceTensor<T>> {
    let TapeEntry::Dropout { mask } = tape.pop("dropout")? else {
        unreachable!()
    };
    let mut dx = dy.clone();
    if !mask.is_empty() {
        for (d, &m) in dx.data_mut().iter_mut().zip(&mask) {
            *d *= m;
        }
    }
    Ok(dx)
}
