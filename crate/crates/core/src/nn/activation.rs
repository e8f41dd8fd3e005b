use serde::{Deserialize, Serialize};

use crate::Scalar;

/// Pointwise nonlinearity applied after sequence mixing.
#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Activation {
    #[default]
    Gelu,
    Identity,
}

const SQRT_2_OVER_PI: f64 = 0.797_884_560_802_865_4;
const GELU_CUBIC: f64 = 0.044715;

impl Activation {
    /// GELU uses the tanh approximation.
    #[inline]
    pub fn apply<T: Scalar>(self, x: T) -> T {
        match self {
            Activation::Identity => x,
            Activation::Gelu => {
                let inner = T::lit(SQRT_2_OVER_PI) * (x + T::lit(GELU_CUBIC) * x * x * x);
                T::lit(0.5) * x * (T::one() + inner.tanh())
            }
        }
    }

    #[inline]
    pub fn derivative<T: Scalar>(self, x: T) -> T {
        match self {
            Activation::Identity => T::one(),
            Activation::Gelu => {
                let c = T::lit(SQRT_2_OVER_PI);
                let inner = c * (x + T::lit(GELU_CUBIC) * x * x * x);
                let th = inner.tanh();
                let dinner = c * (T::one() + T::lit(3.0 * GELU_CUBIC) * x * x);
                T::lit(0.5) * (T::one() + th) + T::lit(0.5) * x * (T::one() - th * th) * dinner
            }
        }
    }
}
