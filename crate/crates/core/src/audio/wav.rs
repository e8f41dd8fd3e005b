use std::fs::File;
use std::io::{BufReader, Read, Seek, Write};
use std::path::Path;

use hound::{SampleFormat, WavReader, WavSpec, WavWriter};

use crate::error::{invalid, Error, Result};

/// Mono audio normalized to `[-1, 1]`.
#[derive(Clone, Debug, PartialEq)]
pub struct AudioClip {
    pub samples: Vec<f64>,
    pub sample_rate: u32,
}

impl AudioClip {
    pub fn new(samples: Vec<f64>, sample_rate: u32) -> Result<Self> {
        if sample_rate == 0 {
            return invalid("sample_rate must be positive");
        }
        if let Some(i) = samples.iter().position(|v| !v.is_finite()) {
            return invalid(format!("sample {i} is not finite"));
        }
        Ok(Self {
            samples,
            sample_rate,
        })
    }

    pub fn duration_s(&self) -> f64 {
        self.samples.len() as f64 / self.sample_rate as f64
    }
}

/// Incremental mono reader over a WAV file; stereo and wider are averaged.
pub struct WavStream {
    reader: WavReader<BufReader<File>>,
    channels: usize,
    scale: f64,
    float: bool,
    remaining: usize,
}

impl WavStream {
    pub fn open(path: impl AsRef<Path>) -> Result<Self> {
        let path = path.as_ref();
        let reader = WavReader::open(path).map_err(|e| map_hound(path, e))?;
        let spec = reader.spec();
        let float = spec.sample_format == SampleFormat::Float;
        if float && spec.bits_per_sample != 32 {
            return Err(Error::UnsupportedFormat(format!(
                "{}: {}-bit float PCM",
                path.display(),
                spec.bits_per_sample
            )));
        }
        Ok(Self {
            channels: spec.channels as usize,
            scale: if float {
                1.0
            } else {
                (1u64 << (spec.bits_per_sample - 1)) as f64
            },
            float,
            remaining: reader.duration() as usize,
            reader,
        })
    }

    pub fn sample_rate(&self) -> u32 {
        self.reader.spec().sample_rate
    }

    /// Number of (mono) frames not yet read.
    pub fn remaining(&self) -> usize {
        self.remaining
    }

    /// Reads up to `max` mono samples into `out` (cleared first).
    pub fn read_chunk(&mut self, max: usize, out: &mut Vec<f64>) -> Result<()> {
        out.clear();
        let n = max.min(self.remaining);
        let need = n * self.channels;
        let ch = self.channels as f64;
        let mut acc = 0.0;
        let mut k = 0;
        if self.float {
            for s in self.reader.samples::<f32>().take(need) {
                acc += s.map_err(|e| Error::Parse(e.to_string()))? as f64;
                k += 1;
                if k == self.channels {
                    out.push(acc / ch);
                    acc = 0.0;
                    k = 0;
                }
            }
        } else {
            for s in self.reader.samples::<i32>().take(need) {
                acc += s.map_err(|e| Error::Parse(e.to_string()))? as f64 / self.scale;
                k += 1;
                if k == self.channels {
                    out.push(acc / ch);
                    acc = 0.0;
                    k = 0;
                }
            }
        }
        if out.len() != n {
            return Err(Error::Parse(format!(
                "WAV data ended after {} of {n} frames",
                out.len()
            )));
        }
        self.remaining -= n;
        Ok(())
    }
}

/// Reads PCM 8/16/24/32-bit integer or 32-bit float WAV.
pub fn read_wav(path: impl AsRef<Path>) -> Result<AudioClip> {
    let mut stream = WavStream::open(path)?;
    let rate = stream.sample_rate();
    let mut samples = Vec::with_capacity(stream.remaining());
    stream.read_chunk(stream.remaining(), &mut samples)?;
    AudioClip::new(samples, rate)
}

fn wav_spec(sample_rate: u32) -> WavSpec {
    WavSpec {
        channels: 1,
        sample_rate,
        bits_per_sample: 16,
        sample_format: SampleFormat::Int,
    }
}

/// Quantizes to 16 bits: `round(x * 32768)` clamped to the i16 range.
pub fn quantize_i16(x: f64) -> i16 {
    (x * 32768.0).round().clamp(-32768.0, 32767.0) as i16
}

/// Writes 16-bit mono PCM to any seekable sink.
pub fn write_wav_to<W: Write + Seek>(sink: W, clip: &AudioClip) -> Result<()> {
    let parse = |e: hound::Error| Error::Parse(e.to_string());
    let mut w = WavWriter::new(sink, wav_spec(clip.sample_rate)).map_err(parse)?;
    let mut i16w = w.get_i16_writer(clip.samples.len() as u32);
    for &s in &clip.samples {
        i16w.write_sample(quantize_i16(s));
    }
    i16w.flush().map_err(parse)?;
    w.finalize().map_err(parse)
}

pub fn write_wav(path: impl AsRef<Path>, clip: &AudioClip) -> Result<()> {
    let path = path.as_ref();
    let file = File::create(path).map_err(|e| Error::io(path, e))?;
    write_wav_to(std::io::BufWriter::new(file), clip)
}

fn map_hound(path: &Path, e: hound::Error) -> Error {
    match e {
        hound::Error::IoError(io) => Error::io(path, io),
        hound::Error::Unsupported => Error::UnsupportedFormat(format!(
            "{}: {}",
            path.display(),
            sniff_encoding(path).unwrap_or_else(|| "unrecognized encoding".into())
        )),
        hound::Error::FormatError(msg) => match sniff_encoding(path) {
            Some(enc) if !enc.starts_with("PCM") && !enc.starts_with("IEEE") => {
                Error::UnsupportedFormat(format!("{}: {enc}", path.display()))
            }
            _ => Error::Parse(format!("{}: malformed WAV: {msg}", path.display())),
        },
        other => Error::Parse(format!("{}: {other}", path.display())),
    }
}

/// Names the encoding declared in the `fmt ` chunk.
pub fn sniff_encoding(path: &Path) -> Option<String> {
    let mut bytes = Vec::new();
    File::open(path).ok()?.take(1 << 16).read_to_end(&mut bytes).ok()?;
    if bytes.len() < 12 || &bytes[0..4] != b"RIFF" || &bytes[8..12] != b"WAVE" {
        return None;
    }
    let mut pos = 12;
    while pos + 8 <= bytes.len() {
        let id = &bytes[pos..pos + 4];
        let size = u32::from_le_bytes(bytes[pos + 4..pos + 8].try_into().ok()?) as usize;
        let body = pos + 8;
        if id == b"fmt " && body + 16 <= bytes.len() {
            let mut tag = u16::from_le_bytes([bytes[body], bytes[body + 1]]);
            let bits = u16::from_le_bytes([bytes[body + 14], bytes[body + 15]]);
            if tag == 0xFFFE && body + 26 <= bytes.len() {
                tag = u16::from_le_bytes([bytes[body + 24], bytes[body + 25]]);
            }
            return Some(match tag {
                0x0001 => format!("PCM {bits}-bit"),
                0x0003 => format!("IEEE float {bits}-bit"),
                0x0002 => "Microsoft ADPCM".into(),
                0x0006 => "A-law".into(),
                0x0007 => "mu-law".into(),
                0x0011 => "IMA ADPCM".into(),
                0x0031 => "GSM 6.10".into(),
                0x0050 => "MPEG".into(),
                0x0055 => "MPEG Layer III (MP3)".into(),
                0x00FF | 0x1610 => "AAC".into(),
                0xF1AC => "FLAC".into(),
                t => format!("format tag 0x{t:04X}"),
            });
        }
        pos = body + size + (size & 1);
    }
    None
}
