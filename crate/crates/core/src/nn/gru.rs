use rand::Rng;

use super::tape::{GradientTape, TapeEntry};
use super::{ModelRng, SequenceTensor};
use crate::error::Result;
use crate::Scalar;

fn sigmoid<T: Scalar>(x: T) -> T {
    T::one() / (T::one() + (-x).exp())
}

/// Single GRU layer with gate order (reset, update, new):
///
/// ```text
/// r = s(W_ir x + b_ir + W_hr h + b_hr)
/// z = s(W_iz x + b_iz + W_hz h + b_hz)
/// n = tanh(W_in x + b_in + r * (W_hn h + b_hn))
/// h' = (1 - z) * n + z * h
/// ```
#[derive(Clone, Debug, PartialEq)]
pub struct GruLayer<T> {
    pub in_dim: usize,
    pub hidden: usize,
    /// `[3*hidden x in_dim]`
    pub w_ih: Vec<T>,
    /// `[3*hidden x hidden]`
    pub w_hh: Vec<T>,
    pub b_ih: Vec<T>,
    pub b_hh: Vec<T>,
}

impl<T: Scalar> GruLayer<T> {
    pub fn init(in_dim: usize, hidden: usize, rng: &mut ModelRng) -> Self {
        let bound = 1.0 / (hidden as f64).sqrt();
        let mut draw = |n: usize| -> Vec<T> {
            (0..n).map(|_| T::lit(rng.gen_range(-bound..=bound))).collect()
        };
        Self {
            in_dim,
            hidden,
            w_ih: draw(3 * hidden * in_dim),
            w_hh: draw(3 * hidden * hidden),
            b_ih: draw(3 * hidden),
            b_hh: draw(3 * hidden),
        }
    }

    pub fn zeros_like(&self) -> Self {
        Self {
            in_dim: self.in_dim,
            hidden: self.hidden,
            w_ih: vec![T::zero(); self.w_ih.len()],
            w_hh: vec![T::zero(); self.w_hh.len()],
            b_ih: vec![T::zero(); self.b_ih.len()],
            b_hh: vec![T::zero(); self.b_hh.len()],
        }
    }

    fn affine(w: &[T], b: &[T], x: &[T], rows: usize) -> Vec<T> {
        let cols = x.len();
        (0..rows)
            .map(|o| {
                w[o * cols..(o + 1) * cols]
                    .iter()
                    .zip(x)
                    .fold(b[o], |acc, (&wv, &xv)| acc + wv * xv)
            })
            .collect()
    }

    /// One recurrence step. Returns `(h', r, z, n, hn)`.
    #[allow(clippy::type_complexity)]
    pub fn step(&self, x: &[T], h: &[T]) -> (Vec<T>, Vec<T>, Vec<T>, Vec<T>, Vec<T>) {
        let hd = self.hidden;
        let gi = Self::affine(&self.w_ih, &self.b_ih, x, 3 * hd);
        let gh = Self::affine(&self.w_hh, &self.b_hh, h, 3 * hd);
        let mut r = vec![T::zero(); hd];
        let mut z = vec![T::zero(); hd];
        let mut n = vec![T::zero(); hd];
        let mut hn = vec![T::zero(); hd];
        let mut next = vec![T::zero(); hd];
        for j in 0..hd {
            r[j] = sigmoid(gi[j] + gh[j]);
            z[j] = sigmoid(gi[hd + j] + gh[hd + j]);
            hn[j] = gh[2 * hd + j];
            n[j] = (gi[2 * hd + j] + r[j] * hn[j]).tanh();
            next[j] = (T::one() - z[j]) * n[j] + z[j] * h[j];
        }
        (next, r, z, n, hn)
    }

    pub(crate) fn forward_recorded(
        &self,
        x: &SequenceTensor<T>,
        tape: &mut GradientTape<T>,
    ) -> Result<SequenceTensor<T>> {
        x.check_channels(self.in_dim, "gru")?;
        let len = x.frames();
        let mut hidden = Vec::with_capacity(len + 1);
        hidden.push(vec![T::zero(); self.hidden]);
        let (mut rs, mut zs, mut ns, mut hns) = (
            Vec::with_capacity(len),
            Vec::with_capacity(len),
            Vec::with_capacity(len),
            Vec::with_capacity(len),
        );
        for t in 0..len {
            let (next, r, z, n, hn) = self.step(x.row(t), &hidden[t]);
            hidden.push(next);
            rs.push(r);
            zs.push(z);
            ns.push(n);
            hns.push(hn);
        }
        let out = SequenceTensor::from_raw(hidden[1..].concat(), len, self.hidden);
        tape.push(TapeEntry::Gru {
            input: x.clone(),
            hidden,
            r: rs,
            z: zs,
            n: ns,
            hn: hns,
        });
        Ok(out)
    }

    /// Backpropagation through time.
    pub(crate) fn backward(
        &self,
        tape: &mut GradientTape<T>,
        dy: &SequenceTensor<T>,
        grad: &mut Self,
    ) -> Result<SequenceTensor<T>> {
        let TapeEntry::Gru {
            input,
            hidden,
            r,
            z,
            n,
            hn,
        } = tape.pop("gru")?
        else {
            unreachable!()
        };
        let (hd, din) = (self.hidden, self.in_dim);
        let len = input.frames();
        let mut dx = SequenceTensor::zeros(len, din);
        let mut dh_next = vec![T::zero(); hd];
        let mut dgi = vec![T::zero(); 3 * hd];
        let mut dgh = vec![T::zero(); 3 * hd];
        for t in (0..len).rev() {
            let h_prev = &hidden[t];
            let mut dh_prev = vec![T::zero(); hd];
            for j in 0..hd {
                let dh = dy.get(t, j) + dh_next[j];
                let (rj, zj, nj) = (r[t][j], z[t][j], n[t][j]);
                let dn = dh * (T::one() - zj);
                let dz = dh * (h_prev[j] - nj);
                dh_prev[j] = dh * zj;
                let dn_pre = dn * (T::one() - nj * nj);
                let dr = dn_pre * hn[t][j];
                let dz_pre = dz * zj * (T::one() - zj);
                let dr_pre = dr * rj * (T::one() - rj);
                dgi[j] = dr_pre;
                dgi[hd + j] = dz_pre;
                dgi[2 * hd + j] = dn_pre;
                dgh[j] = dr_pre;
                dgh[hd + j] = dz_pre;
                dgh[2 * hd + j] = dn_pre * rj;
            }
            let x = input.row(t);
            let dxt = dx.row_mut(t);
            for o in 0..3 * hd {
                let gi = dgi[o];
                grad.b_ih[o] += gi;
                let w = &self.w_ih[o * din..(o + 1) * din];
                let gw = &mut grad.w_ih[o * din..(o + 1) * din];
                for i in 0..din {
                    gw[i] += gi * x[i];
                    dxt[i] += gi * w[i];
                }
                let gh = dgh[o];
                grad.b_hh[o] += gh;
                let w = &self.w_hh[o * hd..(o + 1) * hd];
                let gw = &mut grad.w_hh[o * hd..(o + 1) * hd];
                for i in 0..hd {
                    gw[i] += gh * h_prev[i];
                    dh_prev[i] += gh * w[i];
                }
            }
            dh_next = dh_prev;
        }
        Ok(dx)
    }

    pub(crate) fn params(&self) -> Vec<&[T]> {
        vec![&self.w_ih, &self.w_hh, &self.b_ih, &self.b_hh]
    }

    pub(crate) fn params_mut(&mut self) -> Vec<&mut [T]> {
        vec![&mut self.w_ih, &mut self.w_hh, &mut self.b_ih, &mut self.b_hh]
    }

    pub(crate) fn param_specs(&self, prefix: &str) -> Vec<(String, Vec<usize>)> {
        let hd = self.hidden;
        vec![
            (format!("{prefix}.w_ih"), vec![3 * hd, self.in_dim]),
            (format!("{prefix}.w_hh"), vec![3 * hd, hd]),
            (format!("{prefix}.b_ih"), vec![3 * hd]),
            (format!("{prefix}.b_hh"), vec![3 * hd]),
        ]
    }
}
