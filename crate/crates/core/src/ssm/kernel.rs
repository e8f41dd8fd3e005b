use num_complex::Complex;

use super::discretize::{bilinear_factors, factor_derivatives, zoh_factors};
use super::{real_output, DiagonalSsm, Discretization, DiscreteSsm};
use crate::error::{invalid, Result};
use crate::Scalar;

/// Causal convolution kernel samples `k_0..k_{L-1}`.
#[derive(Clone, Debug, PartialEq)]
pub struct Kernel<T> {
    k: Vec<T>,
}

impl<T: Scalar> Kernel<T> {
    pub fn new(k: Vec<T>) -> Result<Self> {
        if k.is_empty() {
            return invalid("kernel length must be at least 1");
        }
        if k.iter().any(|v| !v.is_finite()) {
            return invalid("kernel entries must be finite");
        }
        Ok(Self { k })
    }

    pub fn len(&self) -> usize {
        self.k.len()
    }

    pub fn is_empty(&self) -> bool {
        self.k.is_empty()
    }

    pub fn as_slice(&self) -> &[T] {
        &self.k
    }

    pub fn into_vec(self) -> Vec<T> {
        self.k
    }
}

/// Tuning for [`vandermonde_kernel_with`].
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub struct KernelOptions {
    /// Rows of the Vandermonde matrix materialized at a time.
    pub chunk: usize,
}

impl Default for KernelOptions {
    fn default() -> Self {
        Self { chunk: 1024 }
    }
}

pub fn vandermonde_kernel<T: Scalar>(dssm: &DiscreteSsm<T>, length: usize) -> Result<Kernel<T>> {
    vandermonde_kernel_with(dssm, length, KernelOptions::default())
}

/// Evaluates `K = (bbar * c) . V_L(abar)` block by block.
///
/// At most `chunk x N` Vandermonde entries are live at once, so memory stays
/// `O(N + L)` for any `L`. Each block's first row is computed by exponentiation
/// instead of carried multiplication to bound accumulated rounding error.
pub fn vandermonde_kernel_with<T: Scalar>(
    dssm: &DiscreteSsm<T>,
    length: usize,
    opts: KernelOptions,
) -> Result<Kernel<T>> {
    if length == 0 {
        return invalid("kernel length must be at least 1");
    }
    let chunk = opts.chunk.max(1);
    let n = dssm.n_modes();
    let weights: Vec<Complex<T>> = dssm.c.iter().zip(&dssm.b_bar).map(|(&c, &b)| c * b).collect();
    let zero = Complex::new(T::zero(), T::zero());
    let mut block = vec![zero; chunk.min(length) * n];
    let mut k = Vec::with_capacity(length);

    let mut start = 0;
    while start < length {
        let rows = chunk.min(length - start);
        for (m, &abar) in dssm.a_bar.iter().enumerate() {
            let mut p = abar.powu(start as u32);
            for r in 0..rows {
                block[r * n + m] = p;
                p *= abar;
            }
        }
        for r in 0..rows {
            let row = &block[r * n..(r + 1) * n];
            let acc = row
                .iter()
                .zip(&weights)
                .fold(zero, |acc, (&v, &w)| acc + v * w);
            k.push(real_output(dssm.conjugate_pairs, acc));
        }
        start += rows;
    }
    Kernel::new(k)
}

/// Continuous impulse response `K(t) = C exp(tA) B` under the real-output convention.
pub fn continuous_kernel<T: Scalar>(ssm: &DiagonalSsm<T>, t: T) -> T {
    let zero = Complex::new(T::zero(), T::zero());
    let acc = ssm
        .a()
        .into_iter()
        .zip(ssm.b())
        .zip(ssm.c())
        .fold(zero, |acc, ((a, &b), &c)| acc + c * (a * t).exp() * b);
    real_output(ssm.conjugate_pairs(), acc)
}

/// Gradients with respect to the stored parameterization of a [`DiagonalSsm`].
#[derive(Clone, Debug, PartialEq)]
pub struct SsmGrad<T> {
    pub log_neg_re: Vec<T>,
    pub a_im: Vec<T>,
    pub b_re: Vec<T>,
    pub b_im: Vec<T>,
    pub c_re: Vec<T>,
    pub c_im: Vec<T>,
    pub log_dt: T,
}

/// Vector-Jacobian product of the kernel map `params -> K` (length `grad_k.len()`).
pub fn kernel_vjp<T: Scalar>(
    ssm: &DiagonalSsm<T>,
    method: Discretization,
    grad_k: &[T],
) -> SsmGrad<T> {
    let n = ssm.n_modes();
    let dt = ssm.dt();
    let scale = if ssm.conjugate_pairs() { T::lit(2.0) } else { T::one() };
    let zero = Complex::new(T::zero(), T::zero());
    let mut out = SsmGrad {
        log_neg_re: vec![T::zero(); n],
        a_im: vec![T::zero(); n],
        b_re: vec![T::zero(); n],
        b_im: vec![T::zero(); n],
        c_re: vec![T::zero(); n],
        c_im: vec![T::zero(); n],
        log_dt: T::zero(),
    };
    let mut g_dt = T::zero();

    for (m, a) in ssm.a().into_iter().enumerate() {
        let b = ssm.b()[m];
        let c = ssm.c()[m];
        let (abar, f) = match method {
            Discretization::Zoh => zoh_factors(a, dt),
            Discretization::Bilinear => bilinear_factors(a, dt),
        };
        let bbar = f * b;
        // s0 = sum g_l abar^l, s1 = sum g_l l abar^(l-1)
        let (mut s0, mut s1) = (zero, zero);
        let (mut p, mut q) = (Complex::new(T::one(), T::zero()), zero);
        for &g in grad_k {
            s0 += p * g;
            s1 += q * g;
            q = q * abar + p;
            p *= abar;
        }
        let [dabar_da, df_da, dabar_ddt, df_ddt] = factor_derivatives(method, a, dt);
        let g_c = bbar * s0;
        let g_b = c * f * s0;
        let g_a = c * (df_da * b * s0 + bbar * dabar_da * s1);
        let g_d = c * (df_ddt * b * s0 + bbar * dabar_ddt * s1);

        out.c_re[m] = scale * g_c.re;
        out.c_im[m] = -scale * g_c.im;
        out.b_re[m] = scale * g_b.re;
        out.b_im[m] = -scale * g_b.im;
        out.log_neg_re[m] = scale * g_a.re * a.re;
        out.a_im[m] = -scale * g_a.im;
        g_dt = g_dt + scale * g_d.re;
    }
    out.log_dt = g_dt * dt;
    out
}
