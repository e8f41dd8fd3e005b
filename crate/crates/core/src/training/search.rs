use std::sync::atomic::{AtomicUsize, Ordering};
use std::sync::Mutex;
use std::time::Instant;

use rand::{Rng, SeedableRng};
use serde::{Deserialize, Serialize};

use super::{evaluate, train, TrainConfig, TrainedModel, TrialData};
use crate::error::{invalid, Result};
use crate::nn::{ModelConfig, ModelKind, ModelRng};
use crate::Scalar;

/// Search ranges. Integer ranges are inclusive; the learning rate is drawn log-uniformly.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct TrialSpace {
    pub hidden_dims: Vec<usize>,
    pub n_blocks: (usize, usize),
    pub learning_rate: (f64, f64),
    pub dropout: (f64, f64),
    /// Deep MLP only.
    pub mlp_depth: (usize, usize),
    pub n_trials: usize,
}

impl Default for TrialSpace {
    fn default() -> Self {
        Self {
            hidden_dims: vec![16, 32, 64],
            n_blocks: (1, 3),
            learning_rate: (1e-3, 1e-2),
            dropout: (0.0, 0.1),
            mlp_depth: (2, 4),
            n_trials: 50,
        }
    }
}

impl TrialSpace {
    pub fn validate(&self) -> Result<()> {
        let mut problems = Vec::new();
        if self.hidden_dims.is_empty() || self.hidden_dims.contains(&0) {
            problems.push("hidden_dims must be a nonempty list of positive sizes".to_string());
        }
        let (b0, b1) = self.n_blocks;
        if !(1 <= b0 && b0 <= b1 && b1 <= 6) {
            problems.push(format!("n_blocks range must lie in [1, 6], got [{b0}, {b1}]"));
        }
        let (l0, l1) = self.learning_rate;
        if !(l0 > 0.0 && l0 <= l1 && l1.is_finite()) {
            problems.push(format!("learning_rate range invalid: [{l0}, {l1}]"));
        }
        let (d0, d1) = self.dropout;
        if !(0.0 <= d0 && d0 <= d1 && d1 < 1.0) {
            problems.push(format!("dropout range invalid: [{d0}, {d1}]"));
        }
        let (m0, m1) = self.mlp_depth;
        if !(1 <= m0 && m0 <= m1) {
            problems.push(format!("mlp_depth range invalid: [{m0}, {m1}]"));
        }
        if problems.is_empty() {
            Ok(())
        } else {
            invalid(problems.join("; "))
        }
    }

    pub fn sample(&self, rng: &mut ModelRng) -> TrialParams {
        let (l0, l1) = self.learning_rate;
        let (d0, d1) = self.dropout;
        TrialParams {
            hidden_dim: self.hidden_dims[rng.gen_range(0..self.hidden_dims.len())],
            n_blocks: rng.gen_range(self.n_blocks.0..=self.n_blocks.1),
            learning_rate: if l1 > l0 {
                rng.gen_range(l0.ln()..l1.ln()).exp()
            } else {
                l0
            },
            dropout: if d1 > d0 { rng.gen_range(d0..d1) } else { d0 },
            mlp_depth: rng.gen_range(self.mlp_depth.0..=self.mlp_depth.1),
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct TrialParams {
    pub hidden_dim: usize,
    pub n_blocks: usize,
    pub learning_rate: f64,
    pub dropout: f64,
    pub mlp_depth: usize,
}

impl TrialParams {
    pub fn apply(&self, model: &ModelConfig, train: &TrainConfig) -> (ModelConfig, TrainConfig) {
        (
            ModelConfig {
                hidden_dim: self.hidden_dim,
                n_blocks: self.n_blocks,
                mlp_depth: self.mlp_depth,
                dropout: self.dropout,
                ..model.clone()
            },
            TrainConfig {
                learning_rate: self.learning_rate,
                dropout: self.dropout,
                ..train.clone()
            },
        )
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct TrialRecord {
    pub trial: usize,
    pub seed: u64,
    #[serde(flatten)]
    pub params: TrialParams,
    pub accuracy_pct: f64,
    pub mse: f64,
    pub wall_time_s: f64,
}

pub struct SearchOutcome<T> {
    /// Best first: accuracy descending, then mse ascending.
    pub leaderboard: Vec<TrialRecord>,
    pub best: TrainedModel<T>,
}

pub struct SearchSetup<'a> {
    pub kind: ModelKind,
    pub space: &'a TrialSpace,
    pub model: &'a ModelConfig,
    pub train: &'a TrainConfig,
    pub tau_um: f64,
    pub workers: usize,
}

/// Seeded random search; trial `i` trains with seed `seed + i`.
pub fn trial_search<T: Scalar>(
    setup: &SearchSetup<'_>,
    data: &[TrialData],
    budget: usize,
    seed: u64,
) -> Result<SearchOutcome<T>> {
    if budget == 0 {
        return invalid("search budget must be >= 1");
    }
    setup.space.validate()?;
    let mut rng = ModelRng::seed_from_u64(seed);
    let plans: Vec<TrialParams> = (0..budget).map(|_| setup.space.sample(&mut rng)).collect();
    let next = AtomicUsize::new(0);
    let results: Mutex<Vec<Option<Result<(TrialRecord, TrainedModel<T>)>>>> =
        Mutex::new((0..budget).map(|_| None).collect());
    std::thread::scope(|scope| {
        for _ in 0..setup.workers.clamp(1, budget) {
            scope.spawn(|| loop {
                let i = next.fetch_add(1, Ordering::SeqCst);
                if i >= budget {
                    break;
                }
                let out = run_trial::<T>(setup, &plans[i], data, i, seed.wrapping_add(i as u64));
                results.lock().expect("results lock")[i] = Some(out);
            });
        }
    });
    let mut records = Vec::with_capacity(budget);
    let mut models = Vec::with_capacity(budget);
    for r in results.into_inner().expect("results lock") {
        let (rec, model) = r.expect("every trial ran")?;
        records.push(rec);
        models.push(Some(model));
    }
    records.sort_by(|a, b| {
        b.accuracy_pct
            .total_cmp(&a.accuracy_pct)
            .then(a.mse.total_cmp(&b.mse))
            .then(a.trial.cmp(&b.trial))
    });
    let best = models[records[0].trial].take().expect("best model kept");
    Ok(SearchOutcome {
        leaderboard: records,
        best,
    })
}

fn run_trial<T: Scalar>(
    setup: &SearchSetup<'_>,
    params: &TrialParams,
    data: &[TrialData],
    trial: usize,
    seed: u64,
) -> Result<(TrialRecord, TrainedModel<T>)> {
    let start = Instant::now();
    let (mc, tc) = params.apply(setup.model, setup.train);
    let tc = TrainConfig { seed, ..tc };
    let (model, _) = train::<T>(setup.kind, &mc, &tc, data)?;
    let rep = evaluate(&model, data, setup.tau_um, false)?;
    Ok((
        TrialRecord {
            trial,
            seed,
            params: params.clone(),
            accuracy_pct: rep.accuracy_pct,
            mse: rep.mse,
            wall_time_s: start.elapsed().as_secs_f64(),
        },
        model,
    ))
}
