use std::io::Cursor;
use std::path::{Path, PathBuf};

use jetssm_core::audio::{featurize, read_wav, write_wav_to};
use jetssm_core::dataset::{synthesize_trials, write_profiles_csv};
use jetssm_core::nn::ModelKind;
use jetssm_core::training::{
    evaluate, train, trial_search, EvalReport, History, SearchOutcome, SearchSetup, TrainedModel, TrialData,
};
use jetssm_core::{Error, Result};
use serde::Serialize;

use crate::checkpoint::{self, Checkpoint};
use crate::config::RunConfig;
use crate::data::{self, TrialMeta};
use crate::io::{create_dir, write_atomic, write_bytes_atomic, write_json_atomic, write_matrix_csv};

/// Writes `trial_<seed>.{wav,csv,json}` for `cfg.trials` consecutive seeds.
/// Returns the stems written.
pub fn synth(cfg: &RunConfig, out: &Path) -> Result<Vec<String>> {
    cfg.generator.validate()?;
    create_dir(out)?;
    let trials = synthesize_trials(&cfg.generator, cfg.trials, cfg.workers)?;
    let tone_hz = cfg.generator.tone_hz();
    let noise_std_um = cfg.generator.noise_std_um()?;
    let mut stems = Vec::with_capacity(trials.len());
    for (i, t) in trials.into_iter().enumerate() {
        let seed = cfg.generator.seed.wrapping_add(i as u64);
        let stem = format!("trial_{seed:06}");
        let mut wav = Cursor::new(Vec::new());
        write_wav_to(&mut wav, &t.clip)?;
        write_bytes_atomic(&out.join(format!("{stem}.wav")), wav.get_ref())?;
        write_atomic(&out.join(format!("{stem}.csv")), |w| write_profiles_csv(w, &t.profiles))?;
        let meta = TrialMeta {
            seed,
            generator: jetssm_core::dataset::GeneratorConfig {
                seed,
                ..cfg.generator.clone()
            },
            tone_hz,
            noise_std_um,
            segments: t.segments,
            contact: t.contact,
        };
        write_json_atomic(&out.join(format!("{stem}.json")), &meta)?;
        log::info!("wrote {stem} ({} frames)", t.profiles.frames());
        stems.push(stem);
    }
    Ok(stems)
}

/// Aligned log-mel rows of one recording as CSV.
pub fn featurize_file(cfg: &RunConfig, wav: &Path, frames: usize, out: &Path) -> Result<()> {
    let clip = read_wav(wav)?;
    let mel = featurize(&clip, &cfg.mel, frames)?;
    write_atomic(out, |w| write_matrix_csv(w, (0..mel.frames()).map(|t| mel.row(t).to_vec())))
}

fn wrap(model: TrainedModel<f64>, cfg: &RunConfig, data: &[TrialData]) -> Checkpoint {
    Checkpoint {
        model,
        mel: cfg.mel.clone(),
        frames: data.first().map_or(0, |d| d.frames()),
    }
}

pub fn train_model(cfg: &RunConfig, kind: ModelKind, data: &[TrialData]) -> Result<(Checkpoint, History)> {
    let (m, h) = train::<f64>(kind, &cfg.model_for_data(), &cfg.train, data)?;
    Ok((wrap(m, cfg, data), h))
}

/// Trains on every recording in `data_dir`, then writes the checkpoint and
/// its history.
pub fn train_cmd(cfg: &RunConfig, kind: ModelKind, data_dir: &Path, out: &Path, history: &Path) -> Result<Checkpoint> {
    cfg.validate()?;
    let data = data::load_dir(data_dir, &cfg.mel)?;
    log::info!("training {kind} on {} recording(s)", data.len());
    let (ck, h) = train_model(cfg, kind, &data)?;
    checkpoint::save(out, &ck)?;
    write_json_atomic(history, &h)?;
    if let Some(last) = h.epoch_loss.last() {
        log::info!("final epoch loss {last:.6}");
    }
    Ok(ck)
}

pub fn history_path_for(checkpoint: &Path) -> PathBuf {
    let mut s = checkpoint.as_os_str().to_owned();
    s.push(".history.json");
    PathBuf::from(s)
}

/// One row of the model comparison.
#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct CompareRow {
    pub model: String,
    /// `checkpoint` or `trained`.
    pub source: String,
    pub tau_um: f64,
    pub accuracy_pct: f64,
    pub accuracy_normalized_pct: f64,
    pub mse: f64,
}

pub fn eval_checkpoint(ck: &Checkpoint, data_dir: &Path, tau: f64) -> Result<EvalReport> {
    let data = data::load_dir(data_dir, &ck.mel)?;
    evaluate(&ck.model, &data, tau, false)
}

/// Reports for the given checkpoints. With `compare`, also writes one CSV row
/// per model kind, training any kind no checkpoint covers.
pub fn eval_cmd(
    cfg: &RunConfig,
    checkpoints: &[PathBuf],
    data_dir: &Path,
    compare: Option<&Path>,
) -> Result<(Vec<EvalReport>, Vec<CompareRow>)> {
    if checkpoints.is_empty() && compare.is_none() {
        return Err(Error::InvalidArgument("eval needs --checkpoint or --compare".into()));
    }
    let mut loaded = Vec::with_capacity(checkpoints.len());
    for p in checkpoints {
        loaded.push(checkpoint::load(p)?);
    }
    let mut reports = Vec::with_capacity(loaded.len());
    for ck in &loaded {
        reports.push(eval_checkpoint(ck, data_dir, cfg.tau_um)?);
    }
    let mut rows = Vec::new();
    if let Some(path) = compare {
        cfg.validate()?;
        let mut data: Option<Vec<TrialData>> = None;
        for kind in ModelKind::ALL {
            let row = match loaded.iter().position(|ck| ck.model.kind == kind) {
                Some(i) => (reports[i].clone(), "checkpoint"),
                None => {
                    if data.is_none() {
                        data = Some(data::load_dir(data_dir, &cfg.mel)?);
                    }
                    let d = data.as_deref().expect("loaded above");
                    log::info!("training {kind} for the comparison");
                    let (ck, _) = train_model(cfg, kind, d)?;
                    (evaluate(&ck.model, d, cfg.tau_um, false)?, "trained")
                }
            };
            rows.push(CompareRow {
                model: kind.name().into(),
                source: row.1.into(),
                tau_um: cfg.tau_um,
                accuracy_pct: row.0.accuracy_pct,
                accuracy_normalized_pct: row.0.accuracy_normalized_pct,
                mse: row.0.mse,
            });
        }
        write_csv_rows(path, &rows)?;
    }
    Ok((reports, rows))
}

pub fn write_csv_rows<T: Serialize>(path: &Path, rows: &[T]) -> Result<()> {
    let mut w = csv::Writer::from_writer(Vec::new());
    for r in rows {
        w.serialize(r).map_err(|e| Error::Parse(e.to_string()))?;
    }
    let bytes = w.into_inner().map_err(|e| Error::Parse(e.to_string()))?;
    write_bytes_atomic(path, &bytes)
}

/// One line per report for the terminal.
pub fn summarize(r: &EvalReport) -> String {
    let mut mae = r.per_column_mae.clone();
    mae.sort_by(f64::total_cmp);
    let median = mae.get(mae.len() / 2).copied().unwrap_or(0.0);
    format!(
        "{}: accuracy {:.2}% within {} um (normalized {:.2}%), mse {:.3} um^2, column MAE min {:.2} / median {:.2} / max {:.2} um over {} frames",
        r.model_name,
        r.accuracy_pct,
        r.threshold_um,
        r.accuracy_normalized_pct,
        r.mse,
        mae.first().copied().unwrap_or(0.0),
        median,
        mae.last().copied().unwrap_or(0.0),
        r.frames
    )
}

const LEADERBOARD_HEADER: [&str; 10] = [
    "trial",
    "seed",
    "hidden_dim",
    "n_blocks",
    "learning_rate",
    "dropout",
    "mlp_depth",
    "accuracy_pct",
    "mse",
    "wall_time_s",
];

/// Random search over `cfg.space`; writes `leaderboard.csv`, `best.ckpt` and
/// `best.json` into `out_dir`.
pub fn search_cmd(
    cfg: &RunConfig,
    kind: ModelKind,
    data_dir: &Path,
    budget: usize,
    out_dir: &Path,
) -> Result<SearchOutcome<f64>> {
    cfg.validate()?;
    let data = data::load_dir(data_dir, &cfg.mel)?;
    let seed = cfg.train.seed;
    let model = cfg.model_for_data();
    let setup = SearchSetup {
        kind,
        space: &cfg.space,
        model: &model,
        train: &cfg.train,
        tau_um: cfg.tau_um,
        workers: cfg.workers,
    };
    let outcome = trial_search::<f64>(&setup, &data, budget, seed)?;
    create_dir(out_dir)?;
    let mut w = csv::Writer::from_writer(Vec::new());
    let csv_err = |e: csv::Error| Error::Parse(e.to_string());
    w.write_record(LEADERBOARD_HEADER).map_err(csv_err)?;
    for r in &outcome.leaderboard {
        let p = &r.params;
        w.write_record([
            r.trial.to_string(),
            r.seed.to_string(),
            p.hidden_dim.to_string(),
            p.n_blocks.to_string(),
            p.learning_rate.to_string(),
            p.dropout.to_string(),
            p.mlp_depth.to_string(),
            r.accuracy_pct.to_string(),
            r.mse.to_string(),
            format!("{:.3}", r.wall_time_s),
        ])
        .map_err(csv_err)?;
    }
    let bytes = w.into_inner().map_err(|e| Error::Parse(e.to_string()))?;
    write_bytes_atomic(&out_dir.join("leaderboard.csv"), &bytes)?;
    let ck = wrap(outcome.best.clone(), cfg, &data);
    checkpoint::save(&out_dir.join("best.ckpt"), &ck)?;
    write_json_atomic(&out_dir.join("best.json"), &outcome.leaderboard[0])?;
    Ok(outcome)
}
