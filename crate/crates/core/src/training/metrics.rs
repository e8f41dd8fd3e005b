use crate::error::{invalid, shape, Result};
use crate::nn::SequenceTensor;
use crate::Scalar;

fn check<T: Scalar>(pred: &SequenceTensor<T>, target: &SequenceTensor<T>) -> Result<()> {
    if pred.frames() != target.frames() || pred.channels() != target.channels() {
        return shape(format!(
            "prediction [{} x {}] vs target [{} x {}]",
            pred.frames(),
            pred.channels(),
            target.frames(),
            target.channels()
        ));
    }
    Ok(())
}

/// Mean squared error over every entry.
pub fn mse_loss<T: Scalar>(pred: &SequenceTensor<T>, target: &SequenceTensor<T>) -> Result<T> {
    check(pred, target)?;
    let n = pred.data().len();
    if n == 0 {
        return Ok(T::zero());
    }
    let s: T = pred
        .data()
        .iter()
        .zip(target.data())
        .map(|(&p, &t)| (p - t) * (p - t))
        .sum();
    Ok(s / T::from_usize_lossy(n))
}

/// `dL/dpred` of [`mse_loss`].
pub fn mse_grad<T: Scalar>(pred: &SequenceTensor<T>, target: &SequenceTensor<T>) -> Result<SequenceTensor<T>> {
    check(pred, target)?;
    let scale = T::lit(2.0) / T::from_usize_lossy(pred.data().len().max(1));
    let mut g = pred.clone();
    for (v, &t) in g.data_mut().iter_mut().zip(target.data()) {
        *v = (*v - t) * scale;
    }
    Ok(g)
}

/// Percentage of entries with `|pred - target| <= tau`.
pub fn accuracy_within<T: Scalar>(
    pred: &SequenceTensor<T>,
    target: &SequenceTensor<T>,
    tau: T,
) -> Result<f64> {
    check(pred, target)?;
    if !(tau > T::zero()) {
        return invalid("tau must be positive");
    }
    let n = pred.data().len();
    if n == 0 {
        return invalid("empty prediction");
    }
    let hits = pred
        .data()
        .iter()
        .zip(target.data())
        .filter(|(&p, &t)| (p - t).abs() <= tau)
        .count();
    Ok(100.0 * hits as f64 / n as f64)
}
