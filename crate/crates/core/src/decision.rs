//! Per-trial decision logic: route each segment to its speed-matched trial
//! detector, score windows with the onset detector, and converge both into
//! a [`TrialDecision`].
//!
//! The aggregation contract: the trial detector owns existence (strict
//! `score > 0.5`); when a trial is called present, the onset is the start
//! time of the highest-scoring window (first window on ties), whether or
//! not that window's score clears the threshold itself. The conventional
//! baseline instead calls a trial present when any window exceeds 0.5.
//!
//! Everything here is pure and serial; the companion crate wraps these
//! pieces for fan-out execution and wall-clock accounting.

use alloc::string::String;
use alloc::vec::Vec;
use core::fmt;
use serde::{Deserialize, Serialize};

use crate::detector::{DetectorError, DetectorModel, DetectorRole};
use crate::eeg::{EegRecording, Paradigm, Provenance, SessionManifest, TrialSegment};
use crate::segment::{
    detect_trials, extract_trial_segment, infer_transition_sec, make_windows, SegmentError,
    WindowBatch,
};

#[derive(Clone, Debug, PartialEq)]
pub enum DecisionError {
    Segment(SegmentError),
    Detector(DetectorError),
    /// A trial of this speed appeared but no detector is loaded for it.
    MissingDetector { transition_sec: f64 },
    /// A positive trial with no windows cannot be assigned an onset.
    NoWindows { trial_index: usize },
    /// Window scores and start times differ in length.
    MisalignedScores { scores: usize, starts: usize },
}

impl fmt::Display for DecisionError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            DecisionError::Segment(e) => write!(f, "{e}"),
            DecisionError::Detector(e) => write!(f, "{e}"),
            DecisionError::MissingDetector { transition_sec } => {
                write!(f, "no detector configured for {transition_sec} s transitions")
            }
            DecisionError::NoWindows { trial_index } => {
                write!(f, "trial {trial_index} is positive but has no windows")
            }
            DecisionError::MisalignedScores { scores, starts } => {
                write!(f, "{scores} window scores against {starts} start times")
            }
        }
    }
}

impl core::error::Error for DecisionError {}

impl From<SegmentError> for DecisionError {
    fn from(e: SegmentError) -> Self {
        DecisionError::Segment(e)
    }
}

impl From<DetectorError> for DecisionError {
    fn from(e: DetectorError) -> Self {
        DecisionError::Detector(e)
    }
}

/// Aggregated verdict for one trial.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct TrialDecision {
    pub trial_index: usize,
    pub transition_sec: f64,
    pub target_present_pred: bool,
    pub trial_score: f64,
    /// Present iff the trial is called positive; always one of the window
    /// start times.
    pub onset_pred_sec: Option<f64>,
    pub window_scores: Vec<f64>,
    pub window_start_secs: Vec<f64>,
}

/// Session identity carried through inference; no labels in here.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SessionMeta {
    pub subject_id: String,
    pub session_index: usize,
    pub paradigm: Paradigm,
}

impl SessionMeta {
    pub fn from_manifest(manifest: &SessionManifest) -> Self {
        SessionMeta {
            subject_id: manifest.subject_id.clone(),
            session_index: manifest.session_index,
            paradigm: manifest.paradigm,
        }
    }
}

/// The detector ensemble for one fold. Speed-specific models are optional
/// (an Ai fold never trains a 0.1 s detector); the onset detector is always
/// present.
#[derive(Clone, Debug)]
pub struct DetectorSet {
    pub trial01: Option<DetectorModel>,
    pub trial05: Option<DetectorModel>,
    pub onset: DetectorModel,
}

impl DetectorSet {
    /// The speed-matched trial detector for a segment.
    pub fn route_trial(&self, transition_sec: f64) -> Result<&DetectorModel, DecisionError> {
        let slot = if transition_sec == 0.1 {
            &self.trial01
        } else {
            &self.trial05
        };
        slot.as_ref()
            .ok_or(DecisionError::MissingDetector { transition_sec })
    }

    pub fn models(&self) -> Vec<&DetectorModel> {
        let mut v = Vec::new();
        if let Some(m) = &self.trial01 {
            v.push(m);
        }
        if let Some(m) = &self.trial05 {
            v.push(m);
        }
        v.push(&self.onset);
        v
    }
}

/// Converges one trial's scores: strict-threshold existence from the trial
/// score, argmax-window onset (first maximum on ties).
pub fn aggregate(
    trial_index: usize,
    trial_score: f64,
    window_scores: &[f64],
    window_start_secs: &[f64],
) -> Result<(bool, Option<f64>), DecisionError> {
    if window_scores.len() != window_start_secs.len() {
        return Err(DecisionError::MisalignedScores {
            scores: window_scores.len(),
            starts: window_start_secs.len(),
        });
    }
    let present = trial_score > 0.5;
    if !present {
        return Ok((false, None));
    }
    if window_scores.is_empty() {
        return Err(DecisionError::NoWindows { trial_index });
    }
    let mut best = 0usize;
    for (i, &s) in window_scores.iter().enumerate() {
        if s > window_scores[best] {
            best = i;
        }
    }
    Ok((true, Some(window_start_secs[best])))
}

/// The conventional single-model rule: present iff any window score exceeds
/// 0.5; the reported trial score is the maximum window score.
pub fn aggregate_baseline(
    window_scores: &[f64],
    window_start_secs: &[f64],
) -> Result<(bool, Option<f64>, f64), DecisionError> {
    if window_scores.len() != window_start_secs.len() {
        return Err(DecisionError::MisalignedScores {
            scores: window_scores.len(),
            starts: window_start_secs.len(),
        });
    }
    let mut best = 0usize;
    let mut max = f64::NEG_INFINITY;
    for (i, &s) in window_scores.iter().enumerate() {
        if s > max {
            max = s;
            best = i;
        }
    }
    let present = max > 0.5;
    let onset = if present {
        Some(window_start_secs[best])
    } else {
        None
    };
    Ok((present, onset, max))
}

/// A segmented trial ready for scoring.
pub struct PreparedTrial {
    pub segment: TrialSegment,
    pub windows: WindowBatch,
}

/// Segments a session recording into prepared trials using triggers only.
pub fn prepare_trials(
    rec: &EegRecording,
    meta: &SessionMeta,
) -> Result<Vec<PreparedTrial>, DecisionError> {
    let markers = detect_trials(rec)?;
    let mut out = Vec::with_capacity(markers.len());
    for (i, m) in markers.iter().enumerate() {
        let transition = infer_transition_sec(&m.image_onsets, rec.sample_rate_hz)?;
        let provenance = Provenance {
            subject_id: meta.subject_id.clone(),
            session_index: meta.session_index,
            trial_index: i,
        };
        let segment = extract_trial_segment(rec, m.beep_sample, transition, provenance)?;
        let windows = make_windows(&segment, rec.sample_rate_hz)?;
        out.push(PreparedTrial { segment, windows });
    }
    Ok(out)
}

/// Scores one prepared trial through the distributed path.
pub fn decide_trial(
    models: &DetectorSet,
    trial: &PreparedTrial,
) -> Result<TrialDecision, DecisionError> {
    let trial_index = trial.segment.provenance.trial_index;
    let detector = models.route_trial(trial.segment.transition_sec)?;
    let trial_score = detector.score_trial(&trial.segment)?;
    let window_scores = models.onset.score_windows(&trial.windows)?;
    let (present, onset) = aggregate(
        trial_index,
        trial_score,
        &window_scores,
        &trial.windows.window_start_secs,
    )?;
    Ok(TrialDecision {
        trial_index,
        transition_sec: trial.segment.transition_sec,
        target_present_pred: present,
        trial_score,
        onset_pred_sec: onset,
        window_scores,
        window_start_secs: trial.windows.window_start_secs.clone(),
    })
}

/// Scores one prepared trial through the baseline path (onset model only).
pub fn decide_trial_baseline(
    onset_model: &DetectorModel,
    trial: &PreparedTrial,
) -> Result<TrialDecision, DecisionError> {
    if onset_model.role != DetectorRole::Onset {
        return Err(DecisionError::Detector(DetectorError::Routing {
            role: onset_model.role,
            detail: "the baseline runs an onset-role model".into(),
        }));
    }
    let window_scores = onset_model.score_windows(&trial.windows)?;
    let (present, onset, max) =
        aggregate_baseline(&window_scores, &trial.windows.window_start_secs)?;
    Ok(TrialDecision {
        trial_index: trial.segment.provenance.trial_index,
        transition_sec: trial.segment.transition_sec,
        target_present_pred: present,
        trial_score: max,
        onset_pred_sec: onset,
        window_scores,
        window_start_secs: trial.windows.window_start_secs.clone(),
    })
}

/// Serial reference implementation of whole-session inference.
pub fn infer_session(
    rec: &EegRecording,
    models: &DetectorSet,
    meta: &SessionMeta,
) -> Result<Vec<TrialDecision>, DecisionError> {
    prepare_trials(rec, meta)?
        .iter()
        .map(|t| decide_trial(models, t))
        .collect()
}

/// Serial whole-session inference through the baseline rule.
pub fn infer_session_baseline(
    rec: &EegRecording,
    onset_model: &DetectorModel,
    meta: &SessionMeta,
) -> Result<Vec<TrialDecision>, DecisionError> {
    prepare_trials(rec, meta)?
        .iter()
        .map(|t| decide_trial_baseline(onset_model, t))
        .collect()
}
