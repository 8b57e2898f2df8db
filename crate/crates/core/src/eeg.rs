//! Domain types for EEG recordings, trigger events, and session ground truth.
//!
//! A trial is a stream of ten consecutively displayed satellite images
//! delimited by a beep trigger; a session is sixteen trials, eight of which
//! contain a target. Ground-truth labels live in [`SessionManifest`] only.
//! Trigger events never encode target onsets, so the segmentation and
//! scoring paths physically cannot read labels.

use alloc::format;
use alloc::string::String;
use alloc::vec::Vec;
use core::fmt;
use serde::{Deserialize, Serialize};

use crate::real::round_half_away;
use crate::tensor::Array2;

/// Default sampling rate in Hz.
pub const DEFAULT_SAMPLE_RATE_HZ: f64 = 250.0;

/// Trials per session.
pub const TRIALS_PER_SESSION: usize = 16;

/// Target-bearing trials per session.
pub const TARGETS_PER_SESSION: usize = 8;

/// Images displayed per trial.
pub const IMAGES_PER_TRIAL: usize = 10;

/// Extra data kept after the last image of a trial, in seconds, so the
/// response to a target in the final image is still inside the segment.
pub const TRIAL_PADDING_SEC: f64 = 0.5;

/// The fixed 32-channel 10-20 montage used when no channel names are given.
/// All modules address channels by index; these names exist for file
/// headers and for the synthesizer's spatial weighting.
pub const STANDARD_32_MONTAGE: [&str; 32] = [
    "Fp1", "Fp2", "F7", "F3", "Fz", "F4", "F8", "FC5", "FC1", "FC2", "FC6", "T7", "C3", "Cz",
    "C4", "T8", "CP5", "CP1", "CP2", "CP6", "TP9", "TP10", "P7", "P3", "Pz", "P4", "P8", "PO3",
    "PO4", "O1", "Oz", "O2",
];

/// Index of `name` in a channel list, if present.
pub fn channel_index(channel_names: &[String], name: &str) -> Option<usize> {
    channel_names.iter().position(|n| n == name)
}

/// Channel names for an `n`-channel recording: the standard montage,
/// truncated or extended with `EX<i>` placeholders.
pub fn default_channel_names(n: usize) -> Vec<String> {
    (0..n)
        .map(|i| {
            if i < STANDARD_32_MONTAGE.len() {
                String::from(STANDARD_32_MONTAGE[i])
            } else {
                format!("EX{}", i + 1)
            }
        })
        .collect()
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum TriggerCode {
    /// Inter-trial beep; marks the start of a trial's image stream.
    BeepTrialStart,
    /// One satellite image replacing the previous one.
    ImageOnset,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct TriggerEvent {
    pub sample_index: usize,
    pub code: TriggerCode,
}

/// Experimental condition of a session.
#[derive(Clone, Copy, Debug, PartialEq, Eq, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Paradigm {
    /// Mixed transition times: eight 0.1 s trials and eight 0.5 s trials.
    Normal,
    /// All trials at 0.5 s; targets carry a red bounding box, and some
    /// non-target trials carry a spurious box.
    Ai,
}

impl Paradigm {
    pub fn tag(&self) -> &'static str {
        match self {
            Paradigm::Normal => "normal",
            Paradigm::Ai => "ai",
        }
    }

    pub fn parse(s: &str) -> Option<Paradigm> {
        match s {
            "normal" => Some(Paradigm::Normal),
            "ai" => Some(Paradigm::Ai),
            _ => None,
        }
    }
}

impl fmt::Display for Paradigm {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.tag())
    }
}

/// Ground truth for one trial. `target_onset_sec` is measured from the
/// trial's stream start (the beep) and equals `transition_sec *
/// target_image_index`.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct TrialLabel {
    pub trial_index: usize,
    pub transition_sec: f64,
    pub target_present: bool,
    pub target_image_index: Option<usize>,
    pub target_onset_sec: Option<f64>,
}

impl TrialLabel {
    pub fn non_target(trial_index: usize, transition_sec: f64) -> Self {
        TrialLabel {
            trial_index,
            transition_sec,
            target_present: false,
            target_image_index: None,
            target_onset_sec: None,
        }
    }

    pub fn target(trial_index: usize, transition_sec: f64, image_index: usize) -> Self {
        TrialLabel {
            trial_index,
            transition_sec,
            target_present: true,
            target_image_index: Some(image_index),
            target_onset_sec: Some(transition_sec * image_index as f64),
        }
    }
}

/// Session metadata plus the per-trial ground truth. Kept apart from
/// [`EegRecording`] so inference code can be given the recording alone.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SessionManifest {
    pub subject_id: String,
    pub session_index: usize,
    pub paradigm: Paradigm,
    pub trials: Vec<TrialLabel>,
}

impl SessionManifest {
    /// Violations of the session invariants: 16 trials, 8 targets, the
    /// paradigm's transition mix, and label self-consistency.
    pub fn violations(&self) -> Vec<Violation> {
        let mut v = Vec::new();
        if self.trials.len() != TRIALS_PER_SESSION {
            v.push(Violation::TrialCount {
                got: self.trials.len(),
            });
        }
        let n_targets = self.trials.iter().filter(|t| t.target_present).count();
        if !self.trials.is_empty() && n_targets != TARGETS_PER_SESSION {
            v.push(Violation::TargetCount { got: n_targets });
        }
        let n_fast = self
            .trials
            .iter()
            .filter(|t| t.transition_sec == 0.1)
            .count();
        let n_slow = self
            .trials
            .iter()
            .filter(|t| t.transition_sec == 0.5)
            .count();
        match self.paradigm {
            Paradigm::Normal => {
                if n_fast != 8 || n_slow != 8 {
                    v.push(Violation::TransitionMix { n_fast, n_slow });
                }
            }
            Paradigm::Ai => {
                if n_slow != self.trials.len() {
                    v.push(Violation::TransitionMix { n_fast, n_slow });
                }
            }
        }
        for (i, t) in self.trials.iter().enumerate() {
            if t.target_present != t.target_image_index.is_some()
                || t.target_present != t.target_onset_sec.is_some()
            {
                v.push(Violation::LabelInconsistent { trial: i });
                continue;
            }
            if let (Some(img), Some(onset)) = (t.target_image_index, t.target_onset_sec) {
                if img >= IMAGES_PER_TRIAL
                    || (onset - t.transition_sec * img as f64).abs() > 1e-9
                {
                    v.push(Violation::LabelInconsistent { trial: i });
                }
            }
        }
        v
    }
}

/// A continuous multi-channel recording with its trigger track.
#[derive(Clone, Debug, PartialEq)]
pub struct EegRecording {
    pub sample_rate_hz: f64,
    pub channel_names: Vec<String>,
    /// `[n_channels x n_samples]`, microvolts.
    pub samples: Array2,
    pub triggers: Vec<TriggerEvent>,
}

impl EegRecording {
    pub fn n_channels(&self) -> usize {
        self.samples.rows()
    }

    pub fn n_samples(&self) -> usize {
        self.samples.cols()
    }
}

/// A named invariant failure, with the offending index where one exists.
#[derive(Clone, Debug, PartialEq, Eq)]
pub enum Violation {
    ChannelCountMismatch { names: usize, rows: usize },
    NoChannels,
    NoSamples,
    NonPositiveSampleRate,
    TriggerOutOfRange { index: usize, sample: usize },
    TriggersNotSorted { index: usize },
    TrialCount { got: usize },
    TargetCount { got: usize },
    TransitionMix { n_fast: usize, n_slow: usize },
    LabelInconsistent { trial: usize },
}

impl fmt::Display for Violation {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Violation::ChannelCountMismatch { names, rows } => {
                write!(f, "channel count mismatch: {names} names for {rows} rows")
            }
            Violation::NoChannels => write!(f, "recording has no channels"),
            Violation::NoSamples => write!(f, "recording has no samples"),
            Violation::NonPositiveSampleRate => write!(f, "sample rate must be positive"),
            Violation::TriggerOutOfRange { index, sample } => {
                write!(f, "trigger {index} out of range at sample {sample}")
            }
            Violation::TriggersNotSorted { index } => {
                write!(f, "trigger {index} decreases in sample index")
            }
            Violation::TrialCount { got } => write!(f, "manifest has {got} trials, expected 16"),
            Violation::TargetCount { got } => write!(f, "manifest has {got} targets, expected 8"),
            Violation::TransitionMix { n_fast, n_slow } => {
                write!(f, "bad transition mix: {n_fast} fast / {n_slow} slow")
            }
            Violation::LabelInconsistent { trial } => {
                write!(f, "trial {trial} label is internally inconsistent")
            }
        }
    }
}

/// Checks every [`EegRecording`] invariant. Violations are data, not
/// failures; an empty list means the recording is well formed.
pub fn validate_recording(rec: &EegRecording) -> Vec<Violation> {
    let mut v = Vec::new();
    if rec.channel_names.len() != rec.samples.rows() {
        v.push(Violation::ChannelCountMismatch {
            names: rec.channel_names.len(),
            rows: rec.samples.rows(),
        });
    }
    if rec.samples.rows() == 0 {
        v.push(Violation::NoChannels);
    }
    if rec.samples.cols() == 0 {
        v.push(Violation::NoSamples);
    }
    if !(rec.sample_rate_hz > 0.0) {
        v.push(Violation::NonPositiveSampleRate);
    }
    let mut prev = 0usize;
    for (i, t) in rec.triggers.iter().enumerate() {
        if t.sample_index >= rec.samples.cols() {
            v.push(Violation::TriggerOutOfRange {
                index: i,
                sample: t.sample_index,
            });
        }
        if i > 0 && t.sample_index < prev {
            v.push(Violation::TriggersNotSorted { index: i });
        }
        prev = t.sample_index;
    }
    v
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub enum TimeError {
    NegativeTime,
}

impl fmt::Display for TimeError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            TimeError::NegativeTime => write!(f, "time must be non-negative"),
        }
    }
}

impl core::error::Error for TimeError {}

/// Seconds to sample index at `sample_rate_hz`, rounding half away from
/// zero. Every module converts time through this function.
pub fn time_to_sample(sample_rate_hz: f64, t_sec: f64) -> Result<usize, TimeError> {
    if t_sec < 0.0 {
        return Err(TimeError::NegativeTime);
    }
    Ok(round_half_away(t_sec * sample_rate_hz) as usize)
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub struct SliceError {
    pub start: usize,
    pub length: usize,
    pub available: usize,
}

impl fmt::Display for SliceError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(
            f,
            "slice {}..{} overruns recording of {} samples",
            self.start,
            self.start + self.length,
            self.available
        )
    }
}

impl core::error::Error for SliceError {}

/// A copy of `samples[:, start..start+length]`. The source is never
/// aliased; mutating the result leaves the recording untouched.
pub fn slice_samples(rec: &EegRecording, start: usize, length: usize) -> Result<Array2, SliceError> {
    if start + length > rec.n_samples() {
        return Err(SliceError {
            start,
            length,
            available: rec.n_samples(),
        });
    }
    Ok(rec.samples.slice_cols(start, length))
}

/// Identifies where a segment came from, without carrying any label.
#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct Provenance {
    pub subject_id: String,
    pub session_index: usize,
    pub trial_index: usize,
}

/// One trial's padded stream: the ten-image run plus 0.5 s of trailing
/// data, `[n_channels x round((10 * transition + 0.5) * fs)]` samples.
#[derive(Clone, Debug, PartialEq)]
pub struct TrialSegment {
    pub provenance: Provenance,
    pub transition_sec: f64,
    pub data: Array2,
    /// Segment start relative to the trial stream start; always 0.
    pub t0_sec: f64,
}

impl TrialSegment {
    /// Padded segment length in samples for a transition speed.
    pub fn expected_len(sample_rate_hz: f64, transition_sec: f64) -> usize {
        round_half_away((10.0 * transition_sec + TRIAL_PADDING_SEC) * sample_rate_hz) as usize
    }
}
