use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use serde::{Deserialize, Serialize};

use super::{adam_step, mse_grad, mse_loss, AdamConfig, AdamState};
use crate::dataset::{split_train_test, ErosionProfileSet, FeatureStats, PROFILE_COLUMNS};
use crate::error::{invalid, Error, Result};
use crate::nn::{Model, ModelConfig, ModelKind, ModelRng, SequenceTensor};
use crate::Scalar;

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct TrainConfig {
    pub epochs: usize,
    pub learning_rate: f64,
    pub adam_betas: (f64, f64),
    pub adam_eps: f64,
    pub dropout: f64,
    pub seed: u64,
    pub window_length: usize,
    pub stride: usize,
    /// Windows per optimizer step.
    pub batch_size: usize,
    pub standardize_targets: bool,
    /// Chance that a training window sees the profile columns; otherwise they
    /// are zeroed as at inference.
    pub profile_visible_prob: f64,
}

impl Default for TrainConfig {
    fn default() -> Self {
        Self {
            epochs: 30,
            learning_rate: 3e-3,
            adam_betas: (0.9, 0.999),
            adam_eps: 1e-8,
            dropout: 0.0,
            seed: 0,
            window_length: 128,
            stride: 64,
            batch_size: 2,
            standardize_targets: true,
            profile_visible_prob: 0.0,
        }
    }
}

impl TrainConfig {
    pub fn adam(&self) -> AdamConfig {
        AdamConfig {
            learning_rate: self.learning_rate,
            beta1: self.adam_betas.0,
            beta2: self.adam_betas.1,
            eps: self.adam_eps,
        }
    }

    pub fn validate(&self) -> Result<()> {
        let mut problems = Vec::new();
        if self.epochs == 0 {
            problems.push("epochs must be >= 1".to_string());
        }
        if let Err(e) = self.adam().validate() {
            problems.push(e.to_string().trim_start_matches("invalid argument: ").to_string());
        }
        if !(0.0..1.0).contains(&self.dropout) {
            problems.push(format!("dropout must be in [0, 1), got {}", self.dropout));
        }
        if self.window_length < 2 {
            problems.push("window_length must be >= 2".into());
        }
        if self.stride == 0 {
            problems.push("stride must be >= 1".into());
        }
        if self.batch_size == 0 {
            problems.push("batch_size must be >= 1".into());
        }
        if !(0.0..=1.0).contains(&self.profile_visible_prob) {
            problems.push("profile_visible_prob must be in [0, 1]".into());
        }
        if problems.is_empty() {
            Ok(())
        } else {
            invalid(problems.join("; "))
        }
    }
}

/// Aligned raw log-mel features and the matching profiles of one trial.
#[derive(Clone, Debug, PartialEq)]
pub struct TrialData {
    pub mel: SequenceTensor<f64>,
    pub profiles: ErosionProfileSet,
}

impl TrialData {
    pub fn new(mel: SequenceTensor<f64>, profiles: ErosionProfileSet) -> Result<Self> {
        if mel.frames() != profiles.frames() {
            return Err(Error::Shape(format!(
                "mel has {} frames but profiles have {}",
                mel.frames(),
                profiles.frames()
            )));
        }
        Ok(Self { mel, profiles })
    }

    pub fn frames(&self) -> usize {
        self.mel.frames()
    }

    pub fn train_part(&self) -> Result<TrialData> {
        let (r, _) = split_train_test(self.frames());
        self.slice(r.start, r.end)
    }

    pub fn test_part(&self) -> Result<TrialData> {
        let (_, r) = split_train_test(self.frames());
        self.slice(r.start, r.end)
    }

    pub fn slice(&self, start: usize, end: usize) -> Result<TrialData> {
        Ok(TrialData {
            mel: self.mel.slice_frames(start, end)?,
            profiles: ErosionProfileSet::new(self.profiles.depths().slice_frames(start, end)?)?,
        })
    }
}

/// Feature and target statistics, fitted on training frames only.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Normalizers {
    pub mel: FeatureStats,
    pub profile: FeatureStats,
    /// Present when targets are standardized for training.
    pub target: Option<FeatureStats>,
}

impl Normalizers {
    /// Fits on the given (training) trials.
    pub fn fit(train: &[TrialData], standardize_targets: bool) -> Result<Self> {
        let mel = FeatureStats::fit_many(train.iter().map(|t| &t.mel))?;
        let profile = FeatureStats::fit_many(train.iter().map(|t| t.profiles.depths()))?;
        Ok(Self {
            mel,
            target: standardize_targets.then(|| profile.clone()),
            profile,
        })
    }

    /// Model input `[frames x (mel + 70)]`; profile columns zero when `profiles` is `None`.
    pub fn input(&self, mel: &SequenceTensor<f64>, profiles: Option<&ErosionProfileSet>) -> Result<SequenceTensor<f64>> {
        let n_mel = self.mel.channels();
        if mel.channels() != n_mel {
            return Err(Error::Incompatible(format!(
                "mel channels: data has {}, model expects {n_mel}",
                mel.channels()
            )));
        }
        let mut x = SequenceTensor::zeros(mel.frames(), n_mel + PROFILE_COLUMNS);
        for t in 0..mel.frames() {
            let row = x.row_mut(t);
            row[..n_mel].copy_from_slice(mel.row(t));
            self.mel.apply_row(&mut row[..n_mel]);
            if let Some(p) = profiles {
                row[n_mel..].copy_from_slice(p.depths().row(t));
                self.profile.apply_row(&mut row[n_mel..]);
            }
        }
        Ok(x)
    }

    pub fn target(&self, depths: &SequenceTensor<f64>) -> Result<SequenceTensor<f64>> {
        match &self.target {
            Some(s) => s.apply(depths),
            None => Ok(depths.clone()),
        }
    }

    pub fn untarget(&self, y: &SequenceTensor<f64>) -> Result<SequenceTensor<f64>> {
        match &self.target {
            Some(s) => s.invert(y),
            None => Ok(y.clone()),
        }
    }
}

/// A model together with everything needed to run it on raw features.
#[derive(Clone, Debug, PartialEq)]
pub struct TrainedModel<T> {
    pub kind: ModelKind,
    pub model_config: ModelConfig,
    pub train_config: TrainConfig,
    pub model: Model<T>,
    pub normalizers: Normalizers,
}

impl<T: Scalar> TrainedModel<T> {
    /// Predicted depths in µm for raw aligned mel features.
    pub fn predict_um(&self, mel: &SequenceTensor<f64>, profiles: Option<&ErosionProfileSet>) -> Result<SequenceTensor<f64>> {
        let x = self.normalizers.input(mel, profiles)?;
        let y = self.model.predict(&SequenceTensor::<T>::from_f64(&x))?;
        self.normalizers.untarget(&y.to_f64())
    }
}

/// Per-epoch mean training loss (target units after standardization).
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct History {
    pub model: String,
    pub seed: u64,
    pub windows_per_epoch: usize,
    pub epoch_loss: Vec<f64>,
}

struct Prepared {
    input_visible: SequenceTensor<f64>,
    input_masked: SequenceTensor<f64>,
    target: SequenceTensor<f64>,
}

fn window_starts(frames: usize, len: usize, stride: usize) -> Vec<usize> {
    let mut v: Vec<usize> = (0..=frames - len).step_by(stride).collect();
    if v.last() != Some(&(frames - len)) {
        v.push(frames - len);
    }
    v
}

/// Randomly initialized model with normalizers fitted as [`train`] would.
pub fn untrained<T: Scalar>(
    kind: ModelKind,
    model_config: &ModelConfig,
    config: &TrainConfig,
    trials: &[TrialData],
) -> Result<TrainedModel<T>> {
    let model_config = ModelConfig {
        dropout: config.dropout,
        seed: config.seed,
        ..model_config.clone()
    };
    if trials.is_empty() {
        return invalid("no training data");
    }
    let train: Vec<TrialData> = trials.iter().map(|t| t.train_part()).collect::<Result<_>>()?;
    Ok(TrainedModel {
        kind,
        model: Model::new(kind, &model_config)?,
        model_config,
        train_config: config.clone(),
        normalizers: Normalizers::fit(&train, config.standardize_targets)?,
    })
}

/// Trains on the first half of every trial.
pub fn train<T: Scalar>(
    kind: ModelKind,
    model_config: &ModelConfig,
    config: &TrainConfig,
    trials: &[TrialData],
) -> Result<(TrainedModel<T>, History)> {
    config.validate()?;
    let model_config = ModelConfig {
        dropout: config.dropout,
        seed: config.seed,
        ..model_config.clone()
    };
    model_config.validate()?;
    if trials.is_empty() {
        return invalid("no training data");
    }
    let train: Vec<TrialData> = trials.iter().map(|t| t.train_part()).collect::<Result<_>>()?;
    let n_mel = train[0].mel.channels();
    if model_config.in_channels != n_mel + PROFILE_COLUMNS {
        return Err(Error::Incompatible(format!(
            "in_channels {} does not match {n_mel} mel + {PROFILE_COLUMNS} profile columns",
            model_config.in_channels
        )));
    }
    if model_config.out_channels != PROFILE_COLUMNS {
        return Err(Error::Incompatible(format!(
            "out_channels must be {PROFILE_COLUMNS}, got {}",
            model_config.out_channels
        )));
    }
    let shortest = train.iter().map(|t| t.frames()).min().unwrap_or(0);
    if shortest == 0 {
        return invalid("training split is empty");
    }
    if config.window_length > shortest {
        return invalid(format!(
            "window_length {} exceeds the {shortest} training frames available",
            config.window_length
        ));
    }
    let normalizers = Normalizers::fit(&train, config.standardize_targets)?;
    let prepared: Vec<Prepared> = train
        .iter()
        .map(|t| {
            Ok(Prepared {
                input_visible: normalizers.input(&t.mel, Some(&t.profiles))?,
                input_masked: normalizers.input(&t.mel, None)?,
                target: normalizers.target(t.profiles.depths())?,
            })
        })
        .collect::<Result<_>>()?;
    let mut windows: Vec<(usize, usize)> = Vec::new();
    for (i, t) in train.iter().enumerate() {
        for s in window_starts(t.frames(), config.window_length, config.stride) {
            windows.push((i, s));
        }
    }

    let mut model = Model::<T>::new(kind, &model_config)?;
    let sizes: Vec<usize> = model.params().iter().map(|p| p.len()).collect();
    let mut adam = AdamState::<T>::new(&sizes);
    let adam_cfg = config.adam();
    let mut rng = ModelRng::seed_from_u64(config.seed ^ 0x5EED_7A1E);
    let mut history = History {
        model: kind.name().to_string(),
        seed: config.seed,
        windows_per_epoch: windows.len(),
        epoch_loss: Vec::with_capacity(config.epochs),
    };
    let w = config.window_length;
    let mut acc: Vec<Vec<T>> = sizes.iter().map(|&n| vec![T::zero(); n]).collect();
    for _ in 0..config.epochs {
        windows.shuffle(&mut rng);
        let mut epoch_loss = 0.0;
        for batch in windows.chunks(config.batch_size) {
            acc.iter_mut().for_each(|a| a.iter_mut().for_each(|v| *v = T::zero()));
            for &(i, s) in batch {
                let p = &prepared[i];
                let visible = rng.gen_bool(config.profile_visible_prob);
                let src = if visible { &p.input_visible } else { &p.input_masked };
                let x = SequenceTensor::<T>::from_f64(&src.slice_frames(s, s + w)?);
                let y = SequenceTensor::<T>::from_f64(&p.target.slice_frames(s, s + w)?);
                let (pred, tape) = model.forward_recorded(&x, true, &mut rng)?;
                epoch_loss += mse_loss(&pred, &y)?.as_f64();
                let dy = mse_grad(&pred, &y)?;
                model.absorb_batch_stats(&tape);
                let (grad, _) = model.backward(tape, &dy)?;
                for (a, g) in acc.iter_mut().zip(grad.params()) {
                    for (av, &gv) in a.iter_mut().zip(g) {
                        *av += gv;
                    }
                }
            }
            let scale = T::one() / T::from_usize_lossy(batch.len());
            acc.iter_mut().for_each(|a| a.iter_mut().for_each(|v| *v *= scale));
            let grads: Vec<&[T]> = acc.iter().map(|a| a.as_slice()).collect();
            adam_step(&mut model.params_mut(), &grads, &mut adam, &adam_cfg)?;
        }
        let mean = epoch_loss / windows.len() as f64;
        if !mean.is_finite() {
            return Err(Error::State("training diverged (non-finite loss)".into()));
        }
        history.epoch_loss.push(mean);
    }
    Ok((
        TrainedModel {
            kind,
            model_config,
            train_config: config.clone(),
            model,
            normalizers,
        },
        history,
    ))
}
