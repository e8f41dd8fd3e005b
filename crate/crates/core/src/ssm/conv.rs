use std::sync::Arc;

use num_complex::Complex;
use rustfft::{Fft, FftPlanner};

use super::Kernel;
use crate::error::{shape, Result};
use crate::Scalar;

/// `y_t = sum_{l <= t} k_l u_{t-l}` via zero-padded FFT.
pub fn causal_conv<T: Scalar>(u: &[T], k: &Kernel<T>) -> Result<Vec<T>> {
    if u.len() != k.len() {
        return shape(format!(
            "causal_conv: input length {} != kernel length {}",
            u.len(),
            k.len()
        ));
    }
    Ok(FftConvolver::new().conv(u, k.as_slice()))
}

/// Reusable FFT convolution engine. Plans are cached per padded size.
pub struct FftConvolver<T: Scalar> {
    planner: FftPlanner<T>,
    plans: Option<(usize, Arc<dyn Fft<T>>, Arc<dyn Fft<T>>)>,
}

impl<T: Scalar> Default for FftConvolver<T> {
    fn default() -> Self {
        Self::new()
    }
}

impl<T: Scalar> FftConvolver<T> {
    pub fn new() -> Self {
        Self {
            planner: FftPlanner::new(),
            plans: None,
        }
    }

    /// Padded transform size for sequences of length `len`.
    pub fn padded_len(len: usize) -> usize {
        (2 * len.max(1) - 1).next_power_of_two()
    }

    fn plans(&mut self, size: usize) -> (Arc<dyn Fft<T>>, Arc<dyn Fft<T>>) {
        match &self.plans {
            Some((s, f, i)) if *s == size => (f.clone(), i.clone()),
            _ => {
                let f = self.planner.plan_fft_forward(size);
                let i = self.planner.plan_fft_inverse(size);
                self.plans = Some((size, f.clone(), i.clone()));
                (f, i)
            }
        }
    }

    /// Zero-padded spectrum of `x` at the padded size for length `len`.
    pub fn spectrum(&mut self, x: &[T], len: usize) -> Vec<Complex<T>> {
        let size = Self::padded_len(len);
        let (fwd, _) = self.plans(size);
        let mut buf = vec![Complex::new(T::zero(), T::zero()); size];
        for (slot, &v) in buf.iter_mut().zip(x) {
            slot.re = v;
        }
        fwd.process(&mut buf);
        buf
    }

    fn inverse(&mut self, mut buf: Vec<Complex<T>>, len: usize) -> Vec<T> {
        let size = buf.len();
        let (_, inv) = self.plans(size);
        inv.process(&mut buf);
        let norm = T::one() / T::from_usize_lossy(size);
        buf.iter().take(len).map(|z| z.re * norm).collect()
    }

    /// Causal convolution of equal-length `u` and `k`.
    pub fn conv(&mut self, u: &[T], k: &[T]) -> Vec<T> {
        let len = u.len();
        let fu = self.spectrum(u, len);
        let fk = self.spectrum(k, len);
        self.conv_spectra(&fu, &fk, len)
    }

    /// Causal convolution from precomputed spectra.
    pub fn conv_spectra(&mut self, fu: &[Complex<T>], fk: &[Complex<T>], len: usize) -> Vec<T> {
        let prod = fu.iter().zip(fk).map(|(a, b)| a * b).collect();
        self.inverse(prod, len)
    }

    /// Forward cross-correlation `r_s = sum_{j} x_j y_{s+j}` for `s < len`,
    /// from spectra of `y` and `x`. This is the adjoint of causal convolution:
    /// with `y = dL/dout` and `x = k` it yields `dL/du`; with `x = u` it yields `dL/dk`.
    pub fn correlate_spectra(
        &mut self,
        fy: &[Complex<T>],
        fx: &[Complex<T>],
        len: usize,
    ) -> Vec<T> {
        let prod = fy.iter().zip(fx).map(|(a, b)| a * b.conj()).collect();
        self.inverse(prod, len)
    }
}
