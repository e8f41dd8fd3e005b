use serde::{Deserialize, Serialize};

use super::{accuracy_within, mse_loss, TrainedModel, TrialData};
use crate::error::{invalid, Result};
use crate::nn::{ModelConfig, SequenceTensor};
use crate::Scalar;

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct EvalReport {
    pub model_name: String,
    pub threshold_um: f64,
    /// Within `threshold_um`, in µm.
    pub accuracy_pct: f64,
    /// Within `threshold_um` after dividing errors by the per-column target std.
    pub accuracy_normalized_pct: f64,
    /// µm^2
    pub mse: f64,
    pub mse_normalized: f64,
    /// Mean absolute error of each evaluated frame, µm.
    pub per_frame_error: Vec<f64>,
    /// Mean absolute error of each profile column, µm.
    pub per_column_mae: Vec<f64>,
    pub frames: usize,
    pub profile_mask: bool,
    pub config: ModelConfig,
}

/// Predictions and targets (µm) over the test halves, stacked in trial order.
pub fn predict_test<T: Scalar>(
    model: &TrainedModel<T>,
    trials: &[TrialData],
    profiles_visible: bool,
) -> Result<(SequenceTensor<f64>, SequenceTensor<f64>)> {
    if trials.is_empty() {
        return invalid("no evaluation data");
    }
    let mut pred = Vec::new();
    let mut target = Vec::new();
    let mut frames = 0;
    for t in trials {
        let test = t.test_part()?;
        let p = model.predict_um(&test.mel, profiles_visible.then_some(&test.profiles))?;
        pred.extend_from_slice(p.data());
        target.extend_from_slice(test.profiles.depths().data());
        frames += test.frames();
    }
    let c = model.model_config.out_channels;
    Ok((
        SequenceTensor::new(pred, frames, c)?,
        SequenceTensor::new(target, frames, c)?,
    ))
}

/// Scores predicted against true depths.
pub fn report(
    name: &str,
    pred: &SequenceTensor<f64>,
    target: &SequenceTensor<f64>,
    tau_um: f64,
    column_std: &[f64],
    profile_mask: bool,
    config: &ModelConfig,
) -> Result<EvalReport> {
    let accuracy_pct = accuracy_within(pred, target, tau_um)?;
    let scale = |c: usize| if column_std[c] > 0.0 { column_std[c] } else { 1.0 };
    let norm = |x: &SequenceTensor<f64>| {
        SequenceTensor::from_fn(x.frames(), x.channels(), |t, c| x.get(t, c) / scale(c))
    };
    let (pn, tn) = (norm(pred), norm(target));
    let channels = pred.channels();
    let per_frame_error = (0..pred.frames())
        .map(|t| {
            pred.row(t)
                .iter()
                .zip(target.row(t))
                .map(|(a, b)| (a - b).abs())
                .sum::<f64>()
                / channels as f64
        })
        .collect();
    let per_column_mae = (0..channels)
        .map(|c| {
            (0..pred.frames())
                .map(|t| (pred.get(t, c) - target.get(t, c)).abs())
                .sum::<f64>()
                / pred.frames() as f64
        })
        .collect();
    Ok(EvalReport {
        model_name: name.to_string(),
        threshold_um: tau_um,
        accuracy_pct,
        accuracy_normalized_pct: accuracy_within(&pn, &tn, tau_um)?,
        mse: mse_loss(pred, target)?,
        mse_normalized: mse_loss(&pn, &tn)?,
        per_frame_error,
        per_column_mae,
        frames: pred.frames(),
        profile_mask,
        config: config.clone(),
    })
}

/// Inference on the test halves (profile columns zeroed unless `profiles_visible`).
pub fn evaluate<T: Scalar>(
    model: &TrainedModel<T>,
    trials: &[TrialData],
    tau_um: f64,
    profiles_visible: bool,
) -> Result<EvalReport> {
    let (pred, target) = predict_test(model, trials, profiles_visible)?;
    report(
        model.kind.name(),
        &pred,
        &target,
        tau_um,
        &model.normalizers.profile.std,
        profiles_visible,
        &model.model_config,
    )
}
