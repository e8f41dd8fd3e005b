use num_complex::Complex;

use super::{real_output, DiscreteSsm};
use crate::Scalar;

/// One step of `x' = Abar x + Bbar u`, `y = C x'`. Returns the new state and output.
pub fn recurrent_step<T: Scalar>(
    dssm: &DiscreteSsm<T>,
    state: &[Complex<T>],
    u: T,
) -> (Vec<Complex<T>>, T) {
    let mut next = state.to_vec();
    let y = dssm.step_in_place(&mut next, u);
    (next, y)
}

impl<T: Scalar> DiscreteSsm<T> {
    /// In-place variant of [`recurrent_step`].
    pub fn step_in_place(&self, state: &mut [Complex<T>], u: T) -> T {
        debug_assert_eq!(state.len(), self.n_modes());
        let mut acc = Complex::new(T::zero(), T::zero());
        for (((x, &a), &b), &c) in state.iter_mut().zip(&self.a_bar).zip(&self.b_bar).zip(&self.c) {
            *x = a * *x + b * u;
            acc += c * *x;
        }
        real_output(self.conjugate_pairs, acc)
    }

    /// Zero initial state.
    pub fn zero_state(&self) -> Vec<Complex<T>> {
        vec![Complex::new(T::zero(), T::zero()); self.n_modes()]
    }
}
