use num_complex::Complex;
use rand::Rng;
use rand_distr::StandardNormal;

use super::tape::{GradientTape, TapeEntry};
use super::{Activation, ModelConfig, ModelRng, Norm, SequenceTensor};
use crate::error::Result;
use crate::ssm::{
    discretize, kernel_vjp, vandermonde_kernel, DiagonalSsm, Discretization, DiscreteSsm,
    FftConvolver,
};
use crate::Scalar;

/// Pre-norm residual S4D block:
/// `y = x + Dropout(Act(SSMConv(Norm(x)) + d * Norm(x)))`.
///
/// Each of the `channels` features owns an independent diagonal SSM. With
/// `shared_a` all channels share one set of eigenvalues.
#[derive(Clone, Debug, PartialEq)]
pub struct S4dBlock<T> {
    pub channels: usize,
    pub modes: usize,
    pub shared_a: bool,
    pub conjugate_pairs: bool,
    pub method: Discretization,
    pub feedthrough: bool,
    pub activation: Activation,
    pub dropout: f64,
    /// `[a_sets x modes]`, `Re a = -exp(log_neg_re)`.
    pub log_neg_re: Vec<T>,
    pub a_im: Vec<T>,
    /// `[channels x modes]`
    pub b_re: Vec<T>,
    pub b_im: Vec<T>,
    pub c_re: Vec<T>,
    pub c_im: Vec<T>,
    /// `[channels]`
    pub log_dt: Vec<T>,
    pub d: Vec<T>,
    pub norm: Norm<T>,
}

impl<T: Scalar> S4dBlock<T> {
    pub fn init(cfg: &ModelConfig, rng: &mut ModelRng) -> Self {
        let channels = cfg.hidden_dim;
        let modes = cfg.n_state / 2;
        let a_sets = if cfg.shared_a { 1 } else { channels };
        let scale = 1.0 / (cfg.n_state as f64).sqrt();
        let mut normal = || -> f64 { rng.sample(StandardNormal) };
        let c_re = (0..channels * modes).map(|_| T::lit(normal() * scale)).collect();
        let c_im = (0..channels * modes).map(|_| T::lit(normal() * scale)).collect();
        let d = (0..channels)
            .map(|_| if cfg.feedthrough { T::lit(normal()) } else { T::zero() })
            .collect();
        let (lo, hi) = (cfg.dt_min.ln(), cfg.dt_max.ln());
        let log_dt = (0..channels)
            .map(|_| T::lit(if hi > lo { rng.gen_range(lo..hi) } else { lo }))
            .collect();
        let mut log_neg_re = Vec::with_capacity(a_sets * modes);
        let mut a_im = Vec::with_capacity(a_sets * modes);
        for _ in 0..a_sets {
            for n in 0..modes {
                log_neg_re.push(T::lit(0.5f64.ln()));
                a_im.push(T::lit(std::f64::consts::PI * n as f64));
            }
        }
        Self {
            channels,
            modes,
            shared_a: cfg.shared_a,
            conjugate_pairs: true,
            method: cfg.discretization,
            feedthrough: cfg.feedthrough,
            activation: cfg.activation,
            dropout: cfg.dropout,
            log_neg_re,
            a_im,
            b_re: vec![T::one(); channels * modes],
            b_im: vec![T::zero(); channels * modes],
            c_re,
            c_im,
            log_dt,
            d,
            norm: Norm::new(cfg.norm_kind, channels),
        }
    }

    pub fn zeros_like(&self) -> Self {
        let z = |v: &Vec<T>| vec![T::zero(); v.len()];
        Self {
            log_neg_re: z(&self.log_neg_re),
            a_im: z(&self.a_im),
            b_re: z(&self.b_re),
            b_im: z(&self.b_im),
            c_re: z(&self.c_re),
            c_im: z(&self.c_im),
            log_dt: z(&self.log_dt),
            d: z(&self.d),
            norm: self.norm.zeros_like(),
            ..self.clone()
        }
    }

    fn a_offset(&self, h: usize) -> usize {
        if self.shared_a {
            0
        } else {
            h * self.modes
        }
    }

    /// Skip-connection weight; zero when feedthrough is disabled.
    fn feed(&self, h: usize) -> T {
        if self.feedthrough {
            self.d[h]
        } else {
            T::zero()
        }
    }

    /// Continuous SSM of channel `h`.
    pub fn channel_ssm(&self, h: usize) -> DiagonalSsm<T> {
        let (ao, co) = (self.a_offset(h), h * self.modes);
        let m = self.modes;
        let complex = |re: &[T], im: &[T]| -> Vec<Complex<T>> {
            re.iter().zip(im).map(|(&r, &i)| Complex::new(r, i)).collect()
        };
        DiagonalSsm::from_parts_unchecked(
            self.log_neg_re[ao..ao + m].to_vec(),
            self.a_im[ao..ao + m].to_vec(),
            complex(&self.b_re[co..co + m], &self.b_im[co..co + m]),
            complex(&self.c_re[co..co + m], &self.c_im[co..co + m]),
            self.log_dt[h],
            self.conjugate_pairs,
        )
    }

    pub fn channel_discrete(&self, h: usize) -> DiscreteSsm<T> {
        discretize(&self.channel_ssm(h), self.method)
    }

    /// Sequence mixing `SSMConv(z) + d * z` without recording.
    pub fn mix(&self, z: &SequenceTensor<T>) -> Result<SequenceTensor<T>> {
        let mut tape = GradientTape::new();
        self.mix_recorded(z, &mut tape)
    }

    fn mix_recorded(
        &self,
        z: &SequenceTensor<T>,
        tape: &mut GradientTape<T>,
    ) -> Result<SequenceTensor<T>> {
        z.check_channels(self.channels, "s4d block")?;
        let len = z.frames();
        let mut conv = FftConvolver::new();
        let mut out = SequenceTensor::zeros(len, self.channels);
        let mut input_spectra = Vec::with_capacity(self.channels);
        let mut kernel_spectra = Vec::with_capacity(self.channels);
        for h in 0..self.channels {
            let u = z.column(h);
            let k = vandermonde_kernel(&self.channel_discrete(h), len)?;
            let fu = conv.spectrum(&u, len);
            let fk = conv.spectrum(k.as_slice(), len);
            let y = conv.conv_spectra(&fu, &fk, len);
            for t in 0..len {
                out.set(t, h, y[t] + self.feed(h) * u[t]);
            }
            input_spectra.push(fu);
            kernel_spectra.push(fk);
        }
        tape.push(TapeEntry::SsmConv {
            input: z.clone(),
            input_spectra,
            kernel_spectra,
        });
        Ok(out)
    }

    fn mix_backward(
        &self,
        tape: &mut GradientTape<T>,
        ds: &SequenceTensor<T>,
        grad: &mut Self,
    ) -> Result<SequenceTensor<T>> {
        let TapeEntry::SsmConv {
            input,
            input_spectra,
            kernel_spectra,
        } = tape.pop("ssm_conv")?
        else {
            unreachable!()
        };
        let len = input.frames();
        let mut conv = FftConvolver::new();
        let mut dz = SequenceTensor::zeros(len, self.channels);
        for h in 0..self.channels {
            let g = ds.column(h);
            let fg = conv.spectrum(&g, len);
            let du = conv.correlate_spectra(&fg, &kernel_spectra[h], len);
            let dk = conv.correlate_spectra(&fg, &input_spectra[h], len);
            let mut dd = T::zero();
            for t in 0..len {
                let u = input.get(t, h);
                dz.set(t, h, du[t] + self.feed(h) * g[t]);
                dd += g[t] * u;
            }
            if self.feedthrough {
                grad.d[h] += dd;
            }
            let sg = kernel_vjp(&self.channel_ssm(h), self.method, &dk);
            let (ao, co) = (self.a_offset(h), h * self.modes);
            for n in 0..self.modes {
                grad.log_neg_re[ao + n] += sg.log_neg_re[n];
                grad.a_im[ao + n] += sg.a_im[n];
                grad.b_re[co + n] += sg.b_re[n];
                grad.b_im[co + n] += sg.b_im[n];
                grad.c_re[co + n] += sg.c_re[n];
                grad.c_im[co + n] += sg.c_im[n];
            }
            grad.log_dt[h] += sg.log_dt;
        }
        Ok(dz)
    }

    pub(crate) fn forward_recorded(
        &self,
        x: &SequenceTensor<T>,
        training: bool,
        rng: &mut ModelRng,
        tape: &mut GradientTape<T>,
    ) -> Result<SequenceTensor<T>> {
        let z = self.norm.forward_recorded(x, training, tape)?;
        let s = self.mix_recorded(&z, tape)?;
        let a = super::activation_recorded(self.activation, &s, tape);
        let dropped = super::dropout_recorded(&a, self.dropout, training, rng, tape);
        let mut y = x.clone();
        for (o, &v) in y.data_mut().iter_mut().zip(dropped.data()) {
            *o += v;
        }
        Ok(y)
    }

    pub(crate) fn backward(
        &self,
        tape: &mut GradientTape<T>,
        dy: &SequenceTensor<T>,
        grad: &mut Self,
    ) -> Result<SequenceTensor<T>> {
        let da = super::dropout_backward(tape, dy)?;
        let ds = super::activation_backward(self.activation, tape, &da)?;
        let dz = self.mix_backward(tape, &ds, grad)?;
        let dxn = self.norm.backward(tape, &dz, &mut grad.norm)?;
        let mut dx = dy.clone();
        for (o, &v) in dx.data_mut().iter_mut().zip(dxn.data()) {
            *o += v;
        }
        Ok(dx)
    }

    pub(crate) fn params(&self) -> Vec<&[T]> {
        vec![
            &self.log_neg_re,
            &self.a_im,
            &self.b_re,
            &self.b_im,
            &self.c_re,
            &self.c_im,
            &self.log_dt,
            &self.d,
            &self.norm.gamma,
            &self.norm.beta,
        ]
    }

    pub(crate) fn params_mut(&mut self) -> Vec<&mut [T]> {
        vec![
            &mut self.log_neg_re,
            &mut self.a_im,
            &mut self.b_re,
            &mut self.b_im,
            &mut self.c_re,
            &mut self.c_im,
            &mut self.log_dt,
            &mut self.d,
            &mut self.norm.gamma,
            &mut self.norm.beta,
        ]
    }

    pub(crate) fn param_specs(&self, prefix: &str) -> Vec<(String, Vec<usize>)> {
        let a_sets = self.log_neg_re.len() / self.modes;
        let (h, m) = (self.channels, self.modes);
        vec![
            (format!("{prefix}.log_neg_re"), vec![a_sets, m]),
            (format!("{prefix}.a_im"), vec![a_sets, m]),
            (format!("{prefix}.b_re"), vec![h, m]),
            (format!("{prefix}.b_im"), vec![h, m]),
            (format!("{prefix}.c_re"), vec![h, m]),
            (format!("{prefix}.c_im"), vec![h, m]),
            (format!("{prefix}.log_dt"), vec![h]),
            (format!("{prefix}.d"), vec![h]),
            (format!("{prefix}.norm.gamma"), vec![h]),
            (format!("{prefix}.norm.beta"), vec![h]),
        ]
    }

    pub(crate) fn buffers(&self) -> Vec<&[T]> {
        vec![&self.norm.running_mean, &self.norm.running_var]
    }

    pub(crate) fn buffers_mut(&mut self) -> Vec<&mut [T]> {
        vec![&mut self.norm.running_mean, &mut self.norm.running_var]
    }

    pub(crate) fn buffer_specs(&self, prefix: &str) -> Vec<(String, Vec<usize>)> {
        vec![
            (format!("{prefix}.norm.running_mean"), vec![self.channels]),
            (format!("{prefix}.norm.running_var"), vec![self.channels]),
        ]
    }

    /// Recurrent inference state for this block.
    pub fn stream(&self) -> S4dBlockStream<T> {
        let ssms: Vec<DiscreteSsm<T>> = (0..self.channels).map(|h| self.channel_discrete(h)).collect();
        let states = ssms.iter().map(|s| s.zero_state()).collect();
        S4dBlockStream {
            ssms,
            states,
            z: vec![T::zero(); self.channels],
        }
    }

    /// One inference step (`training = false`) in recurrent mode.
    pub fn step(&self, stream: &mut S4dBlockStream<T>, x: &[T], out: &mut [T]) {
        self.norm.apply_frame(x, &mut stream.z);
        for h in 0..self.channels {
            let zh = stream.z[h];
            let s = stream.ssms[h].step_in_place(&mut stream.states[h], zh) + self.feed(h) * zh;
            out[h] = x[h] + self.activation.apply(s);
        }
    }
}

/// Per-channel discrete systems and states for streaming inference.
#[derive(Clone, Debug)]
pub struct S4dBlockStream<T> {
    ssms: Vec<DiscreteSsm<T>>,
    states: Vec<Vec<Complex<T>>>,
    z: Vec<T>,
}
