use rand::Rng;

use super::tape::{GradientTape, TapeEntry};
use super::{ModelRng, SequenceTensor};
use crate::error::Result;
use crate::Scalar;

/// Per-frame affine map `y_t = W x_t + b`, with `W` stored row-major `[out x in]`.
#[derive(Clone, Debug, PartialEq)]
pub struct Linear<T> {
    pub in_dim: usize,
    pub out_dim: usize,
    pub weight: Vec<T>,
    pub bias: Vec<T>,
}

impl<T: Scalar> Linear<T> {
    /// Weights and biases uniform in `+-1/sqrt(in_dim)`.
    pub fn init(in_dim: usize, out_dim: usize, rng: &mut ModelRng) -> Self {
        let bound = 1.0 / (in_dim as f64).sqrt();
        let mut draw = || T::lit(rng.gen_range(-bound..=bound));
        let weight = (0..in_dim * out_dim).map(|_| draw()).collect();
        let bias = (0..out_dim).map(|_| draw()).collect();
        Self {
            in_dim,
            out_dim,
            weight,
            bias,
        }
    }

    pub fn zeros(in_dim: usize, out_dim: usize) -> Self {
        Self {
            in_dim,
            out_dim,
            weight: vec![T::zero(); in_dim * out_dim],
            bias: vec![T::zero(); out_dim],
        }
    }

    pub fn zeros_like(&self) -> Self {
        Self::zeros(self.in_dim, self.out_dim)
    }

    pub fn forward_frame(&self, x: &[T], out: &mut [T]) {
        for (o, slot) in out.iter_mut().enumerate() {
            let row = &self.weight[o * self.in_dim..(o + 1) * self.in_dim];
            *slot = row.iter().zip(x).fold(self.bias[o], |acc, (&w, &v)| acc + w * v);
        }
    }

    pub fn forward(&self, x: &SequenceTensor<T>) -> Result<SequenceTensor<T>> {
        x.check_channels(self.in_dim, "linear")?;
        let mut out = vec![T::zero(); x.frames() * self.out_dim];
        for (t, chunk) in out.chunks_mut(self.out_dim).enumerate() {
            self.forward_frame(x.row(t), chunk);
        }
        Ok(SequenceTensor::from_raw(out, x.frames(), self.out_dim))
    }

    pub(crate) fn forward_recorded(
        &self,
        x: &SequenceTensor<T>,
        tape: &mut GradientTape<T>,
    ) -> Result<SequenceTensor<T>> {
        let y = self.forward(x)?;
        tape.push(TapeEntry::Linear { input: x.clone() });
        Ok(y)
    }

    /// Accumulates parameter gradients into `grad` and returns `dL/dx`.
    pub(crate) fn backward(
        &self,
        tape: &mut GradientTape<T>,
        dy: &SequenceTensor<T>,
        grad: &mut Self,
    ) -> Result<SequenceTensor<T>> {
        let TapeEntry::Linear { input } = tape.pop("linear")? else {
            unreachable!()
        };
        let mut dx = vec![T::zero(); input.frames() * self.in_dim];
        for t in 0..input.frames() {
            let x = input.row(t);
            let g = dy.row(t);
            let dxt = &mut dx[t * self.in_dim..(t + 1) * self.in_dim];
            for (o, &go) in g.iter().enumerate() {
                if go == T::zero() {
                    continue;
                }
                grad.bias[o] += go;
                let w = &self.weight[o * self.in_dim..(o + 1) * self.in_dim];
                let gw = &mut grad.weight[o * self.in_dim..(o + 1) * self.in_dim];
                for i in 0..self.in_dim {
                    gw[i] += go * x[i];
                    dxt[i] += go * w[i];
                }
            }
        }
        Ok(SequenceTensor::from_raw(dx, input.frames(), self.in_dim))
    }

    pub(crate) fn params(&self) -> Vec<&[T]> {
        vec![&self.weight, &self.bias]
    }

    pub(crate) fn params_mut(&mut self) -> Vec<&mut [T]> {
        vec![&mut self.weight, &mut self.bias]
    }

    pub(crate) fn param_specs(&self, prefix: &str) -> Vec<(String, Vec<usize>)> {
        vec![
            (format!("{prefix}.weight"), vec![self.out_dim, self.in_dim]),
            (format!("{prefix}.bias"), vec![self.out_dim]),
        ]
    }
}
