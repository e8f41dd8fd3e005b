//! Diagonal state-space numerics.
//!
//! A [`DiagonalSsm`] holds the continuous-time parameters of `x' = Ax + Bu`,
//! `y = Cx` with a diagonal `A`. It is discretized into a [`DiscreteSsm`] by
//! zero-order hold or the bilinear transform, from which the causal convolution
//! kernel `K_l = sum_n C_n Abar_n^l Bbar_n` is evaluated as a Vandermonde
//! product. The same discrete system can be run as a recurrence one sample at
//! a time; both views produce the same outputs.
//!
//! With conjugate pairs enabled (the default for models) only one member of
//! each complex-conjugate pair is stored and the real output is
//! `2 * Re(sum over stored modes)`. With pairs disabled the output is
//! `Re(sum over all modes)`.

mod conv;
mod discretize;
mod kernel;
mod recurrent;

pub use conv::{causal_conv, FftConvolver};
pub use discretize::{discretize, discretize_bilinear, discretize_zoh, ZOH_SERIES_THRESHOLD};
pub use kernel::{
    continuous_kernel, kernel_vjp, vandermonde_kernel, vandermonde_kernel_with, Kernel,
    KernelOptions, SsmGrad,
};
pub use recurrent::recurrent_step;

use num_complex::Complex;
use serde::{Deserialize, Serialize};

use crate::error::{invalid, Result};
use crate::Scalar;

/// Discretization rule applied to the continuous system.
#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Discretization {
    #[default]
    Zoh,
    Bilinear,
}

impl std::str::FromStr for Discretization {
    type Err = crate::Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.to_ascii_lowercase().as_str() {
            "zoh" => Ok(Discretization::Zoh),
            "bilinear" => Ok(Discretization::Bilinear),
            other => invalid(format!("unknown discretization {other:?} (expected zoh|bilinear)")),
        }
    }
}

/// Continuous-time diagonal SSM for a single input/output channel.
///
/// The real part of each eigenvalue is stored as `log(-Re a_n)` so every
/// value of the stored parameter maps to a strictly stable mode.
#[derive(Clone, Debug, PartialEq)]
pub struct DiagonalSsm<T> {
    log_neg_re: Vec<T>,
    a_im: Vec<T>,
    b: Vec<Complex<T>>,
    c: Vec<Complex<T>>,
    log_dt: T,
    conjugate_pairs: bool,
}

impl<T: Scalar> DiagonalSsm<T> {
    /// Builds an SSM from the eigenvalues of `A` directly.
    ///
    /// `a`, `b`, `c` hold the stored modes (half the state size when
    /// `conjugate_pairs` is set).
    pub fn new(
        a: &[Complex<T>],
        b: &[Complex<T>],
        c: &[Complex<T>],
        log_dt: T,
        conjugate_pairs: bool,
    ) -> Result<Self> {
        for (n, an) in a.iter().enumerate() {
            if !(an.re < T::zero()) || !an.im.is_finite() {
                return invalid(format!("mode {n}: Re(a) must be finite and < 0, got {an}"));
            }
        }
        let log_neg_re = a.iter().map(|an| (-an.re).ln()).collect();
        let a_im = a.iter().map(|an| an.im).collect();
        Self::from_log_params(log_neg_re, a_im, b.to_vec(), c.to_vec(), log_dt, conjugate_pairs)
    }

    /// Builds an SSM from its stored (trainable) parameterization.
    pub fn from_log_params(
        log_neg_re: Vec<T>,
        a_im: Vec<T>,
        b: Vec<Complex<T>>,
        c: Vec<Complex<T>>,
        log_dt: T,
        conjugate_pairs: bool,
    ) -> Result<Self> {
        let n = log_neg_re.len();
        if n == 0 {
            return invalid("state dimension must be positive");
        }
        if a_im.len() != n || b.len() != n || c.len() != n {
            return invalid(format!(
                "parameter lengths disagree: a_re={n} a_im={} b={} c={}",
                a_im.len(),
                b.len(),
                c.len()
            ));
        }
        let finite = log_neg_re.iter().chain(&a_im).all(|v| v.is_finite())
            && b.iter().chain(&c).all(|z| z.re.is_finite() && z.im.is_finite());
        if !finite {
            return invalid("SSM parameters must be finite");
        }
        if !log_dt.is_finite() {
            return invalid("log_dt must be finite");
        }
        Ok(Self::from_parts_unchecked(log_neg_re, a_im, b, c, log_dt, conjugate_pairs))
    }

    /// Skips validation. Used by test fixtures that probe boundary behavior
    /// (for example `Re a = 0` via `log_neg_re = -inf`).
    #[doc(hidden)]
    pub fn from_parts_unchecked(
        log_neg_re: Vec<T>,
        a_im: Vec<T>,
        b: Vec<Complex<T>>,
        c: Vec<Complex<T>>,
        log_dt: T,
        conjugate_pairs: bool,
    ) -> Self {
        Self {
            log_neg_re,
            a_im,
            b,
            c,
            log_dt,
            conjugate_pairs,
        }
    }

    /// Diagonal initialization `a_n = -1/2 + i*pi*n`, `b_n = 1`, with the given `c`.
    pub fn init_diagonal(c: Vec<Complex<T>>, log_dt: T, conjugate_pairs: bool) -> Result<Self> {
        let n = c.len();
        let half = T::lit(0.5);
        let log_neg_re = vec![half.ln(); n];
        let a_im = (0..n).map(|i| T::PI() * T::from_usize_lossy(i)).collect();
        let b = vec![Complex::new(T::one(), T::zero()); n];
        Self::from_log_params(log_neg_re, a_im, b, c, log_dt, conjugate_pairs)
    }

    /// Number of stored modes.
    pub fn n_modes(&self) -> usize {
        self.log_neg_re.len()
    }

    /// State dimension N (twice the stored modes under the conjugate-pair convention).
    pub fn n_state(&self) -> usize {
        if self.conjugate_pairs {
            2 * self.n_modes()
        } else {
            self.n_modes()
        }
    }

    pub fn conjugate_pairs(&self) -> bool {
        self.conjugate_pairs
    }

    pub fn a(&self) -> Vec<Complex<T>> {
        self.log_neg_re
            .iter()
            .zip(&self.a_im)
            .map(|(&lr, &im)| Complex::new(-lr.exp(), im))
            .collect()
    }

    pub fn b(&self) -> &[Complex<T>] {
        &self.b
    }

    pub fn c(&self) -> &[Complex<T>] {
        &self.c
    }

    pub fn log_neg_re(&self) -> &[T] {
        &self.log_neg_re
    }

    pub fn a_im(&self) -> &[T] {
        &self.a_im
    }

    pub fn log_dt(&self) -> T {
        self.log_dt
    }

    /// Timestep `exp(log_dt)`.
    pub fn dt(&self) -> T {
        self.log_dt.exp()
    }
}

/// Discrete-time diagonal SSM produced by [`discretize`].
#[derive(Clone, Debug, PartialEq)]
pub struct DiscreteSsm<T> {
    pub a_bar: Vec<Complex<T>>,
    pub b_bar: Vec<Complex<T>>,
    pub c: Vec<Complex<T>>,
    pub method: Discretization,
    pub conjugate_pairs: bool,
}

impl<T: Scalar> DiscreteSsm<T> {
    pub fn n_modes(&self) -> usize {
        self.a_bar.len()
    }
}

/// Applies the real-output convention to a complex mode sum.
#[inline]
pub(crate) fn real_output<T: Scalar>(conjugate_pairs: bool, z: Complex<T>) -> T {
    if conjugate_pairs {
        z.re + z.re
    } else {
        z.re
    }
}
