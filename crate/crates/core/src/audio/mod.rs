//! WAV ingestion and log-mel features aligned to the profile timeline.

mod mel;
mod stream;
mod wav;

pub use mel::{
    align_to_timeline, default_hop, featurize, frame_count, hz_to_mel, mel_filterbank,
    mel_spectrogram, mel_to_hz, FrameAnalyzer, MelConfig, MelFilterbank, MelSpectrogram, LOG_EPS,
};
pub use stream::StreamingFeaturizer;
pub use wav::{
    quantize_i16, read_wav, sniff_encoding, write_wav, write_wav_to, AudioClip, WavStream,
};
