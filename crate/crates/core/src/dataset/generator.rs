use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;
use serde::{Deserialize, Serialize};

use super::{DepthCurve, Dwell, ErosionProfileSet, StairsSchedule, PROFILE_COLUMNS};
use crate::audio::AudioClip;
use crate::error::{invalid, Result};
use crate::nn::SequenceTensor;

/// Synthetic trial generator settings. Serialized as the generator JSON.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct GeneratorConfig {
    pub seed: u64,
    pub schedule: StairsSchedule,
    pub curve: DepthCurve,
    pub frames: usize,
    pub sample_rate: u32,
    /// Width of the depth bump across the profile columns.
    pub bump_sigma_cols: f64,
    /// Std of the spatially correlated profile noise.
    pub spatial_noise_um: f64,
    /// Box-filter length of the profile noise, in columns.
    pub correlation_length_cols: usize,
    /// Correlation of the depth draws across the dwells of one trial (a shared
    /// material factor). Each dwell's depth stays Normal(mean, std).
    pub material_correlation: f64,
    /// Relative amplitude of the slow depth oscillation within a dwell.
    pub wander_frac: f64,
    pub sonotrode_hz: f64,
    /// Tone amplitude is `tone_base + tone_per_mm * depth_mm`.
    pub tone_base: f64,
    pub tone_per_mm: f64,
    /// Low-band cutting noise amplitude per mm of depth.
    pub cutting_noise_per_mm: f64,
    /// High-band noise amplitude while the jet hits metal.
    pub metal_noise: f64,
    pub background_noise: f64,
}

impl Default for GeneratorConfig {
    fn default() -> Self {
        Self {
            seed: 0,
            schedule: StairsSchedule::default(),
            curve: DepthCurve::default(),
            frames: 1150,
            sample_rate: 38400,
            bump_sigma_cols: 10.0,
            spatial_noise_um: 2.0,
            correlation_length_cols: 5,
            material_correlation: 0.9,
            wander_frac: 0.03,
            sonotrode_hz: 22170.0,
            tone_base: 0.02,
            tone_per_mm: 0.12,
            cutting_noise_per_mm: 0.08,
            metal_noise: 0.05,
            background_noise: 0.003,
        }
    }
}

impl GeneratorConfig {
    pub fn validate(&self) -> Result<()> {
        self.curve.validate()?;
        self.schedule.validate(&self.curve)?;
        if self.frames < 2 {
            return invalid("frames must be >= 2");
        }
        if self.sample_rate == 0 {
            return invalid("sample_rate must be positive");
        }
        let samples = self.schedule.duration_s() * self.sample_rate as f64;
        if samples < 2.0 * self.frames as f64 {
            return invalid("audio too short for the requested frame count");
        }
        if !(0.0..=1.0).contains(&self.material_correlation) {
            return invalid("material_correlation must be in [0, 1]");
        }
        if self.correlation_length_cols == 0 || !(self.bump_sigma_cols > 0.0) {
            return invalid("correlation_length_cols and bump_sigma_cols must be positive");
        }
        let levels = [
            self.spatial_noise_um,
            self.wander_frac,
            self.tone_base,
            self.tone_per_mm,
            self.cutting_noise_per_mm,
            self.metal_noise,
            self.background_noise,
        ];
        if levels.iter().any(|v| !(*v >= 0.0 && v.is_finite())) {
            return invalid("noise and gain levels must be finite and nonnegative");
        }
        Ok(())
    }

    /// Frequency at which the sonotrode tone appears after sampling.
    pub fn tone_hz(&self) -> f64 {
        alias_frequency(self.sonotrode_hz, self.sample_rate as f64)
    }

    /// Pooled material-variance std (RMS of the curve std over the schedule).
    pub fn noise_std_um(&self) -> Result<f64> {
        let mut acc = 0.0;
        for &z in &self.schedule.standoffs_mm {
            let (_, s) = self.curve.lookup(z)?;
            acc += s * s;
        }
        Ok((acc / self.schedule.standoffs_mm.len() as f64).sqrt())
    }
}

/// One-pole lowpass stages shaping the cutting noise; three keep it out of the tone band.
const CUT_STAGES: usize = 3;

/// Output std of `stages` cascaded one-pole lowpasses driven by unit white noise.
fn cascade_std(alpha: f64, stages: usize) -> f64 {
    let mut h = vec![0.0; 4096];
    h[0] = 1.0;
    for _ in 0..stages {
        let mut y = 0.0;
        for v in h.iter_mut() {
            y += alpha * (*v - y);
            *v = y;
        }
    }
    h.iter().map(|v| v * v).sum::<f64>().sqrt()
}

/// Apparent frequency of a real tone `f` sampled at `rate`.
pub fn alias_frequency(f: f64, rate: f64) -> f64 {
    let r = f.rem_euclid(rate);
    r.min(rate - r)
}

/// A dwell with the depth drawn for this trial.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct Segment {
    pub dwell: Dwell,
    pub depth_um: f64,
    /// Frames `[start_frame, end_frame)` whose center lies inside the dwell.
    pub start_frame: usize,
    pub end_frame: usize,
}

#[derive(Clone, Debug, PartialEq)]
pub struct SyntheticTrial {
    pub clip: AudioClip,
    pub profiles: ErosionProfileSet,
    pub segments: Vec<Segment>,
    /// Per frame: the jet is on metal (no cement being cut).
    pub contact: Vec<bool>,
}

/// Depth timeline shared by the profile and audio synthesis.
#[derive(Clone, Debug, PartialEq)]
struct Timeline {
    segments: Vec<Segment>,
    phases: Vec<f64>,
    wander: f64,
    cycles: f64,
}

impl Timeline {
    /// Instantaneous depth in µm, or `None` outside every dwell.
    fn depth(&self, t: f64) -> Option<f64> {
        let k = self
            .segments
            .iter()
            .position(|s| t >= s.dwell.start_s && t < s.dwell.end_s)?;
        let s = &self.segments[k];
        let u = (t - s.dwell.start_s) / (s.dwell.end_s - s.dwell.start_s);
        let osc = (2.0 * std::f64::consts::PI * self.cycles * u + self.phases[k]).sin();
        Some((s.depth_um * (1.0 + self.wander * osc)).max(0.0))
    }
}

/// Profile half of a trial (no audio).
#[derive(Clone, Debug, PartialEq)]
pub struct ProfileTrial {
    pub profiles: ErosionProfileSet,
    pub segments: Vec<Segment>,
    pub contact: Vec<bool>,
    timeline: Timeline,
}

/// Deterministic trial for `cfg.seed`.
pub fn synthesize_trial(cfg: &GeneratorConfig) -> Result<SyntheticTrial> {
    let p = synthesize_profiles(cfg)?;
    let clip = synthesize_audio(cfg, &p.timeline)?;
    Ok(SyntheticTrial {
        clip,
        profiles: p.profiles,
        segments: p.segments,
        contact: p.contact,
    })
}

/// Profiles and segment draws only; identical to the corresponding parts of
/// [`synthesize_trial`] (audio uses a separate random stream).
pub fn synthesize_profiles(cfg: &GeneratorConfig) -> Result<ProfileTrial> {
    cfg.validate()?;
    let mut rng = ChaCha8Rng::seed_from_u64(cfg.seed);
    let duration = cfg.schedule.duration_s();
    let frame_s = duration / cfg.frames as f64;
    let frame_time = |t: usize| (t as f64 + 0.5) * frame_s;

    let mut segments = Vec::new();
    let mut phases = Vec::new();
    let rho = cfg.material_correlation;
    let shared: f64 = rng.sample(StandardNormal);
    for dwell in cfg.schedule.dwells() {
        let (mean, std) = cfg.curve.lookup(dwell.standoff_mm)?;
        let own: f64 = rng.sample(StandardNormal);
        let depth = mean + std * (rho * shared + (1.0 - rho * rho).sqrt() * own);
        let start_frame = (0..cfg.frames)
            .find(|&t| frame_time(t) >= dwell.start_s)
            .unwrap_or(cfg.frames);
        let end_frame = (0..cfg.frames)
            .find(|&t| frame_time(t) >= dwell.end_s)
            .unwrap_or(cfg.frames);
        segments.push(Segment {
            dwell,
            depth_um: depth.max(0.0),
            start_frame,
            end_frame,
        });
        phases.push(rng.gen_range(0.0..std::f64::consts::TAU));
    }
    let timeline = Timeline {
        segments,
        phases,
        wander: cfg.wander_frac,
        cycles: 1.0,
    };

    // Profiles: depth * bump + correlated noise, clamped at zero.
    let center = (PROFILE_COLUMNS / 2) as f64;
    let bump: Vec<f64> = (0..PROFILE_COLUMNS)
        .map(|j| (-0.5 * ((j as f64 - center) / cfg.bump_sigma_cols).powi(2)).exp())
        .collect();
    let len = cfg.correlation_length_cols;
    let norm = cfg.spatial_noise_um / (len as f64).sqrt();
    let mut white = vec![0.0; PROFILE_COLUMNS + len - 1];
    let mut depths = SequenceTensor::zeros(cfg.frames, PROFILE_COLUMNS);
    let mut contact = Vec::with_capacity(cfg.frames);
    for t in 0..cfg.frames {
        let d = timeline.depth(frame_time(t));
        contact.push(d.is_none());
        for w in white.iter_mut() {
            *w = rng.sample::<f64, _>(StandardNormal);
        }
        let d = d.unwrap_or(0.0);
        let row = depths.row_mut(t);
        for j in 0..PROFILE_COLUMNS {
            let n: f64 = white[j..j + len].iter().sum::<f64>() * norm;
            row[j] = (d * bump[j] + n).max(0.0);
        }
    }

    Ok(ProfileTrial {
        profiles: ErosionProfileSet::new(depths)?,
        segments: timeline.segments.clone(),
        contact,
        timeline,
    })
}

fn synthesize_audio(cfg: &GeneratorConfig, timeline: &Timeline) -> Result<AudioClip> {
    let mut rng = ChaCha8Rng::seed_from_u64(cfg.seed);
    rng.set_stream(1);
    let duration = cfg.schedule.duration_s();
    // Audio: depth-scaled tone and low-band noise while cutting, high-band noise on metal.
    let rate = cfg.sample_rate as f64;
    let n_samples = (duration * rate).round() as usize;
    let tone_w = 2.0 * std::f64::consts::PI * cfg.tone_hz() / rate;
    let tone_phase = rng.gen_range(0.0..std::f64::consts::TAU);
    let mut lp_cut = [0.0; CUT_STAGES];
    let mut lp_metal = 0.0;
    let alpha_cut = 0.15;
    let alpha_metal = 0.3;
    let cut_scale = 1.0 / cascade_std(alpha_cut, CUT_STAGES);
    let mut samples = Vec::with_capacity(n_samples);
    for i in 0..n_samples {
        let t = i as f64 / rate;
        let d_mm = timeline.depth(t).map(|d| d / 1000.0);
        let tone_amp = cfg.tone_base + cfg.tone_per_mm * d_mm.unwrap_or(0.0);
        let mut s = tone_amp * (tone_w * i as f64 + tone_phase).sin();
        let e1: f64 = rng.sample(StandardNormal);
        let e2: f64 = rng.sample(StandardNormal);
        let e3: f64 = rng.sample(StandardNormal);
        let mut x = e1;
        for y in lp_cut.iter_mut() {
            *y += alpha_cut * (x - *y);
            x = *y;
        }
        lp_metal += alpha_metal * (e2 - lp_metal);
        match d_mm {
            Some(d) => s += cfg.cutting_noise_per_mm * d * lp_cut[CUT_STAGES - 1] * cut_scale,
            None => s += cfg.metal_noise * (e2 - lp_metal),
        }
        s += cfg.background_noise * e3;
        samples.push(s.clamp(-1.0, 1.0));
    }

    AudioClip::new(samples, cfg.sample_rate)
}

/// Trials for seeds `base_seed, base_seed + 1, ...`, generated on up to `workers` threads.
pub fn synthesize_trials(cfg: &GeneratorConfig, count: usize, workers: usize) -> Result<Vec<SyntheticTrial>> {
    let workers = workers.clamp(1, count.max(1));
    let mut slots: Vec<Option<Result<SyntheticTrial>>> = (0..count).map(|_| None).collect();
    std::thread::scope(|scope| {
        for (w, chunk) in slots.chunks_mut(count.div_ceil(workers).max(1)).enumerate() {
            let base = w * count.div_ceil(workers).max(1);
            scope.spawn(move || {
                for (k, slot) in chunk.iter_mut().enumerate() {
                    let c = GeneratorConfig {
                        seed: cfg.seed.wrapping_add((base + k) as u64),
                        ..cfg.clone()
                    };
                    *slot = Some(synthesize_trial(&c));
                }
            });
        }
    });
    slots.into_iter().map(|s| s.expect("every slot filled")).collect()
}

/// Mean of the center column over each dwell's frames: `(standoff_mm, depth_um)`.
pub fn segment_depths(profiles: &ErosionProfileSet, segments: &[Segment]) -> Vec<(f64, f64)> {
    let center = PROFILE_COLUMNS / 2;
    segments
        .iter()
        .filter(|s| s.end_frame > s.start_frame)
        .map(|s| {
            let sum: f64 = (s.start_frame..s.end_frame)
                .map(|t| profiles.depths().get(t, center))
                .sum();
            (s.dwell.standoff_mm, sum / (s.end_frame - s.start_frame) as f64)
        })
        .collect()
}
