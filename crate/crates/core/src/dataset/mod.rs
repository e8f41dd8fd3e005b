//! Profile loading, the synthetic stairs-trajectory generator, and sample assembly.

mod assemble;
mod curve;
mod generator;
mod profiles;
mod schedule;

pub use assemble::{assemble_sample, normalize_features, split_train_test, AlignedSample, FeatureStats};
pub use curve::{depth_curve_lookup, DepthCurve};
pub use generator::{
    alias_frequency, segment_depths, synthesize_profiles, synthesize_trial, synthesize_trials,
    GeneratorConfig, ProfileTrial, Segment,
    SyntheticTrial,
};
pub use profiles::{
    load_profiles_csv, parse_profiles_csv, write_profiles_csv, ErosionProfileSet, PROFILE_COLUMNS,
};
pub use schedule::{Dwell, StairsSchedule};

/// Mel channels in the model input.
pub const MEL_CHANNELS: usize = 60;
/// Canonical frames per trial.
pub const TRIAL_FRAMES: usize = 1150;
