use std::path::Path;

use jetssm_core::audio::{featurize, read_wav, StreamingFeaturizer, WavStream};
use jetssm_core::dataset::PROFILE_COLUMNS;
use jetssm_core::nn::SequenceTensor;
use jetssm_core::{Error, Result};

use crate::checkpoint::Checkpoint;

/// Frame-by-frame inference over a WAV read in chunks of `chunk` samples.
/// Each predicted row (µm) goes to `on_row` as soon as it exists. Returns the
/// number of rows.
pub fn stream_predict(
    ck: &Checkpoint,
    wav: &Path,
    chunk: usize,
    mut on_row: impl FnMut(&[f64]) -> Result<()>,
) -> Result<usize> {
    let tm = &ck.model;
    let mut state = tm.model.stream()?;
    let mut reader = WavStream::open(wav)?;
    let mut feat = StreamingFeaturizer::new(reader.remaining(), reader.sample_rate(), &ck.mel, ck.frames)?;
    let n_mel = feat.n_mels();
    if n_mel + PROFILE_COLUMNS != tm.model_config.in_channels {
        return Err(Error::Incompatible(format!(
            "mel front end gives {n_mel} channels, model expects {}",
            tm.model_config.in_channels - PROFILE_COLUMNS
        )));
    }
    let mut x = vec![0.0; n_mel + PROFILE_COLUMNS];
    let mut y = vec![0.0; tm.model_config.out_channels];
    let mut buf = Vec::with_capacity(chunk);
    let mut rows = 0;
    loop {
        buf.clear();
        reader.read_chunk(chunk.max(1), &mut buf)?;
        if buf.is_empty() {
            break;
        }
        feat.push(&buf, |mel| {
            x[..n_mel].copy_from_slice(mel);
            tm.normalizers.mel.apply_row(&mut x[..n_mel]);
            tm.model.step(&mut state, &x, &mut y)?;
            if let Some(t) = &tm.normalizers.target {
                t.invert_row(&mut y);
            }
            rows += 1;
            on_row(&y)
        })?;
    }
    if !feat.is_done() {
        return Err(Error::State(format!("stream ended after {rows} of {} frames", ck.frames)));
    }
    Ok(rows)
}

/// The same predictions through the whole-clip convolutional path.
pub fn batch_predict(ck: &Checkpoint, wav: &Path) -> Result<SequenceTensor<f64>> {
    let clip = read_wav(wav)?;
    let mel = featurize(&clip, &ck.mel, ck.frames)?;
    ck.model.predict_um(&mel, None)
}
