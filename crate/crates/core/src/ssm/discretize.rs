use num_complex::Complex;

use super::{DiagonalSsm, Discretization, DiscreteSsm};
use crate::Scalar;

/// Below this `|dt * a|` the ZOH input map switches to its Taylor series.
pub const ZOH_SERIES_THRESHOLD: f64 = 1e-8;

pub fn discretize<T: Scalar>(ssm: &DiagonalSsm<T>, method: Discretization) -> DiscreteSsm<T> {
    match method {
        Discretization::Zoh => discretize_zoh(ssm),
        Discretization::Bilinear => discretize_bilinear(ssm),
    }
}

/// Zero-order hold: `abar = exp(dt a)`, `bbar = (exp(dt a) - 1) / a * b`.
pub fn discretize_zoh<T: Scalar>(ssm: &DiagonalSsm<T>) -> DiscreteSsm<T> {
    let dt = ssm.dt();
    let (a_bar, b_bar) = ssm
        .a()
        .into_iter()
        .zip(ssm.b())
        .map(|(a, &b)| {
            let (abar, factor) = zoh_factors(a, dt);
            (abar, factor * b)
        })
        .unzip();
    DiscreteSsm {
        a_bar,
        b_bar,
        c: ssm.c().to_vec(),
        method: Discretization::Zoh,
        conjugate_pairs: ssm.conjugate_pairs(),
    }
}

/// Bilinear transform: `abar = (1 + dt/2 a) / (1 - dt/2 a)`, `bbar = dt b / (1 - dt/2 a)`.
pub fn discretize_bilinear<T: Scalar>(ssm: &DiagonalSsm<T>) -> DiscreteSsm<T> {
    let dt = ssm.dt();
    let (a_bar, b_bar) = ssm
        .a()
        .into_iter()
        .zip(ssm.b())
        .map(|(a, &b)| {
            let (abar, factor) = bilinear_factors(a, dt);
            (abar, factor * b)
        })
        .unzip();
    DiscreteSsm {
        a_bar,
        b_bar,
        c: ssm.c().to_vec(),
        method: Discretization::Bilinear,
        conjugate_pairs: ssm.conjugate_pairs(),
    }
}

/// Returns `(abar, f)` with `bbar = f * b` under ZOH.
pub(crate) fn zoh_factors<T: Scalar>(a: Complex<T>, dt: T) -> (Complex<T>, Complex<T>) {
    let z = a * dt;
    let abar = z.exp();
    let f = if z.norm() < T::lit(ZOH_SERIES_THRESHOLD) {
        let one = Complex::new(T::one(), T::zero());
        (one + z / T::lit(2.0) + z * z / T::lit(6.0)) * dt
    } else {
        (abar - T::one()) / a
    };
    (abar, f)
}

/// Returns `(abar, f)` with `bbar = f * b` under the bilinear transform.
pub(crate) fn bilinear_factors<T: Scalar>(a: Complex<T>, dt: T) -> (Complex<T>, Complex<T>) {
    let half = a * (dt / T::lit(2.0));
    let one = Complex::new(T::one(), T::zero());
    let denom = one - half;
    ((one + half) / denom, Complex::new(dt, T::zero()) / denom)
}

/// Partial derivatives of `(abar, f)` with respect to `a` and `dt`:
/// returns `(dabar_da, df_da, dabar_ddt, df_ddt)`.
pub(crate) fn factor_derivatives<T: Scalar>(
    method: Discretization,
    a: Complex<T>,
    dt: T,
) -> [Complex<T>; 4] {
    let one = Complex::new(T::one(), T::zero());
    let two = T::lit(2.0);
    match method {
        Discretization::Zoh => {
            let (abar, f) = zoh_factors(a, dt);
            let z = a * dt;
            if z.norm() < T::lit(ZOH_SERIES_THRESHOLD) {
                let df_da = (one / two + z / T::lit(3.0)) * (dt * dt);
                let df_ddt = one + z + z * z / two;
                [abar * dt, df_da, abar * a, df_ddt]
            } else {
                let df_da = (abar * dt - f) / a;
                [abar * dt, df_da, abar * a, abar]
            }
        }
        Discretization::Bilinear => {
            let denom = one - a * (dt / two);
            let inv2 = one / (denom * denom);
            [inv2 * dt, inv2 * (dt * dt / two), inv2 * a, inv2]
        }
    }
}
