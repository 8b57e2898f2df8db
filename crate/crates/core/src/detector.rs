//! The three task-specific detectors: a 0.1 s trial detector and a 0.5 s
//! trial detector scoring whole padded segments, and an appearance-time
//! detector scoring 1 s sliding windows. All three share the network
//! architecture; only the input length differs by role. Each trained model
//! carries a fingerprint (data hash, seed, config) for reproducibility
//! audits.

use alloc::format;
use alloc::string::String;
use alloc::vec::Vec;
use core::fmt;
use serde::{Deserialize, Serialize};

use crate::eeg::{time_to_sample, EegRecording, Provenance, SessionManifest, TrialSegment};
use crate::net::{forward_eval, NetError, NetworkHyper, NetworkParameters, NetworkSpec, TARGET_CLASS};
use crate::rng::{fnv1a64, hex64};
use crate::segment::{
    detect_trials, extract_trial_segment, infer_transition_sec, label_windows, make_windows,
    SegmentError, WindowBatch,
};
use crate::train::{train, TrainConfig, TrainError};

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum DetectorRole {
    /// Whole-trial detector for 0.1 s transitions (1.5 s segments).
    Trial01,
    /// Whole-trial detector for 0.5 s transitions (5.5 s segments).
    Trial05,
    /// Appearance-time detector scoring 1 s windows.
    Onset,
}

impl DetectorRole {
    pub fn tag(&self) -> &'static str {
        match self {
            DetectorRole::Trial01 => "trial01",
            DetectorRole::Trial05 => "trial05",
            DetectorRole::Onset => "onset",
        }
    }

    pub fn parse(s: &str) -> Option<DetectorRole> {
        match s {
            "trial01" => Some(DetectorRole::Trial01),
            "trial05" => Some(DetectorRole::Trial05),
            "onset" => Some(DetectorRole::Onset),
            _ => None,
        }
    }

    /// Segment duration this role consumes, in seconds.
    pub fn input_duration_sec(&self) -> f64 {
        match self {
            DetectorRole::Trial01 => 1.5,
            DetectorRole::Trial05 => 5.5,
            DetectorRole::Onset => 1.0,
        }
    }

    pub fn input_len(&self, sample_rate_hz: f64) -> usize {
        time_to_sample(sample_rate_hz, self.input_duration_sec()).expect("positive duration")
    }

    /// The transition speed a trial-level role serves; None for Onset.
    pub fn transition_sec(&self) -> Option<f64> {
        match self {
            DetectorRole::Trial01 => Some(0.1),
            DetectorRole::Trial05 => Some(0.5),
            DetectorRole::Onset => None,
        }
    }
}

impl fmt::Display for DetectorRole {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.tag())
    }
}

#[derive(Clone, Debug, PartialEq)]
pub enum DetectorError {
    /// No trials of the role's speed exist in the given sessions.
    EmptyTrainingSet { role: DetectorRole },
    /// An input was offered to a detector of the wrong role.
    Routing { role: DetectorRole, detail: String },
    InconsistentSessions { detail: String },
    Segment(SegmentError),
    Train(TrainError),
    Net(NetError),
}

impl fmt::Display for DetectorError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            DetectorError::EmptyTrainingSet { role } => {
                write!(f, "no training examples for role {role}")
            }
            DetectorError::Routing { role, detail } => {
                write!(f, "routing error for {role} detector: {detail}")
            }
            DetectorError::InconsistentSessions { detail } => {
                write!(f, "sessions disagree: {detail}")
            }
            DetectorError::Segment(e) => write!(f, "{e}"),
            DetectorError::Train(e) => write!(f, "{e}"),
            DetectorError::Net(e) => write!(f, "{e}"),
        }
    }
}

impl core::error::Error for DetectorError {}

impl From<SegmentError> for DetectorError {
    fn from(e: SegmentError) -> Self {
        DetectorError::Segment(e)
    }
}

impl From<TrainError> for DetectorError {
    fn from(e: TrainError) -> Self {
        DetectorError::Train(e)
    }
}

impl From<NetError> for DetectorError {
    fn from(e: NetError) -> Self {
        DetectorError::Net(e)
    }
}

/// Reproducibility record: hash of the training tensors and labels plus the
/// exact configuration that produced the weights.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Fingerprint {
    pub data_hash: String,
    pub n_examples: usize,
    pub n_positive: usize,
    pub train: TrainConfig,
    pub hyper: NetworkHyper,
}

/// Flattened training tensors for one role.
#[derive(Debug)]
pub struct TrainingSet {
    pub inputs: Vec<f32>,
    pub labels: Vec<u8>,
    pub n_channels: usize,
    pub input_len: usize,
}

impl TrainingSet {
    pub fn n_examples(&self) -> usize {
        self.labels.len()
    }

    pub fn data_hash(&self) -> u64 {
        let mut h = fnv1a64(&[]);
        for v in &self.inputs {
            for b in v.to_le_bytes() {
                h ^= b as u64;
                h = h.wrapping_mul(0x1000_0000_01B3);
            }
        }
        for &l in &self.labels {
            h ^= l as u64;
            h = h.wrapping_mul(0x1000_0000_01B3);
        }
        h
    }
}

/// Builds the role's training set from whole sessions.
///
/// Trial roles take one example per trial of the matching speed (the padded
/// segment, labelled by target presence). The onset role takes every window
/// of every trial at both speeds, labelled by [`label_windows`]; the heavy
/// class imbalance this produces is handled by class weighting in the
/// training loop.
pub fn build_training_set(
    role: DetectorRole,
    sessions: &[(EegRecording, SessionManifest)],
) -> Result<TrainingSet, DetectorError> {
    let mut inputs: Vec<f32> = Vec::new();
    let mut labels: Vec<u8> = Vec::new();
    let mut n_channels = 0usize;
    let mut input_len = 0usize;

    for (rec, manifest) in sessions {
        if n_channels == 0 {
            n_channels = rec.n_channels();
            input_len = role.input_len(rec.sample_rate_hz);
        } else if rec.n_channels() != n_channels {
            return Err(DetectorError::InconsistentSessions {
                detail: format!(
                    "channel counts differ: {} vs {}",
                    n_channels,
                    rec.n_channels()
                ),
            });
        }
        let trials = detect_trials(rec)?;
        if trials.len() != manifest.trials.len() {
            return Err(DetectorError::InconsistentSessions {
                detail: format!(
                    "{} trials detected, {} labelled",
                    trials.len(),
                    manifest.trials.len()
                ),
            });
        }
        for (i, markers) in trials.iter().enumerate() {
            let transition = infer_transition_sec(&markers.image_onsets, rec.sample_rate_hz)?;
            let label = &manifest.trials[i];
            let provenance = Provenance {
                subject_id: manifest.subject_id.clone(),
                session_index: manifest.session_index,
                trial_index: i,
            };
            match role.transition_sec() {
                Some(role_speed) => {
                    if transition == role_speed {
                        let segment =
                            extract_trial_segment(rec, markers.beep_sample, transition, provenance)?;
                        inputs.extend_from_slice(segment.data.data());
                        labels.push(u8::from(label.target_present));
                    }
                }
                None => {
                    let segment =
                        extract_trial_segment(rec, markers.beep_sample, transition, provenance)?;
                    let batch = make_windows(&segment, rec.sample_rate_hz)?;
                    let mut window_label = label.clone();
                    window_label.trial_index = i;
                    let window_labels = label_windows(&batch, &window_label)?;
                    inputs.extend_from_slice(batch.windows.data());
                    labels.extend_from_slice(&window_labels);
                }
            }
        }
    }

    if labels.is_empty() {
        return Err(DetectorError::EmptyTrainingSet { role });
    }
    Ok(TrainingSet {
        inputs,
        labels,
        n_channels,
        input_len,
    })
}

/// A trained, frozen detector.
#[derive(Clone, Debug, PartialEq)]
pub struct DetectorModel {
    pub role: DetectorRole,
    pub spec: NetworkSpec,
    pub params: NetworkParameters<f32>,
    pub fingerprint: Fingerprint,
}

impl DetectorModel {
    /// Probability that the padded trial segment contains a target.
    /// Rejects segments whose speed or shape disagree with the role.
    pub fn score_trial(&self, segment: &TrialSegment) -> Result<f64, DetectorError> {
        let role_speed = self.role.transition_sec().ok_or_else(|| DetectorError::Routing {
            role: self.role,
            detail: "the onset detector scores windows, not trial segments".into(),
        })?;
        if segment.transition_sec != role_speed {
            return Err(DetectorError::Routing {
                role: self.role,
                detail: format!(
                    "segment transition {} s does not match role speed {} s",
                    segment.transition_sec, role_speed
                ),
            });
        }
        self.check_shape(segment.data.rows(), segment.data.cols())?;
        let probs = forward_eval(&self.params, &self.spec, segment.data.data(), 1)?;
        Ok(probs[TARGET_CLASS] as f64)
    }

    /// One target-probability per window, aligned with the batch's window
    /// start times. Only the onset role scores windows.
    pub fn score_windows(&self, batch: &WindowBatch) -> Result<Vec<f64>, DetectorError> {
        if self.role != DetectorRole::Onset {
            return Err(DetectorError::Routing {
                role: self.role,
                detail: "window batches route to the onset detector".into(),
            });
        }
        self.check_shape(batch.windows.rows(), batch.windows.cols())?;
        let n = batch.windows.n();
        let probs = forward_eval(&self.params, &self.spec, batch.windows.data(), n)?;
        Ok((0..n).map(|i| probs[i * 2 + TARGET_CLASS] as f64).collect())
    }

    fn check_shape(&self, channels: usize, len: usize) -> Result<(), DetectorError> {
        if channels != self.spec.n_channels || len != self.spec.input_len {
            return Err(DetectorError::Routing {
                role: self.role,
                detail: format!(
                    "input [{} x {}] does not match model [{} x {}]",
                    channels, len, self.spec.n_channels, self.spec.input_len
                ),
            });
        }
        Ok(())
    }
}

/// Trains one detector on whole sessions.
pub fn train_detector(
    role: DetectorRole,
    sessions: &[(EegRecording, SessionManifest)],
    hyper: &NetworkHyper,
    config: &TrainConfig,
) -> Result<DetectorModel, DetectorError> {
    let set = build_training_set(role, sessions)?;
    let spec = hyper.spec(set.n_channels, set.input_len);
    let outcome = train(&spec, &set.inputs, &set.labels, config)?;
    let n_positive = set.labels.iter().filter(|&&l| l == 1).count();
    Ok(DetectorModel {
        role,
        spec,
        params: outcome.params,
        fingerprint: Fingerprint {
            data_hash: hex64(set.data_hash()),
            n_examples: set.n_examples(),
            n_positive,
            train: config.clone(),
            hyper: hyper.clone(),
        },
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::synth::{synth_session, SynthConfig};
    use crate::Paradigm;

    fn sessions(paradigm: Paradigm, n: usize) -> Vec<(EegRecording, SessionManifest)> {
        let config = SynthConfig::default();
        (0..n)
            .map(|i| synth_session(&config, "s01", i, paradigm))
            .collect()
    }

    fn small_hyper() -> NetworkHyper {
        NetworkHyper {
            block_filters: alloc::vec![2, 2],
            ..NetworkHyper::default()
        }
    }

    #[test]
    fn trial05_set_has_one_example_per_slow_trial() {
        let set = build_training_set(DetectorRole::Trial05, &sessions(Paradigm::Normal, 1)).unwrap();
        assert_eq!(set.n_examples(), 8);
        assert_eq!(set.n_channels, 32);
        assert_eq!(set.input_len, 1375);
        assert_eq!(set.inputs.len(), 8 * 32 * 1375);
    }

    #[test]
    fn onset_set_counts_windows_from_both_speeds() {
        let set = build_training_set(DetectorRole::Onset, &sessions(Paradigm::Normal, 1)).unwrap();
        // 8 slow trials x 10 windows + 8 fast trials x 2 windows.
        assert_eq!(set.n_examples(), 96);
        assert_eq!(set.input_len, 250);
        let positives: usize = set.labels.iter().map(|&l| l as usize).sum();
        assert_eq!(positives, 8);
    }

    #[test]
    fn ai_sessions_have_no_fast_trials() {
        let err = build_training_set(DetectorRole::Trial01, &sessions(Paradigm::Ai, 1)).unwrap_err();
        assert_eq!(
            err,
            DetectorError::EmptyTrainingSet {
                role: DetectorRole::Trial01
            }
        );
    }

    #[test]
    fn role_lengths_at_250hz() {
        assert_eq!(DetectorRole::Trial01.input_len(250.0), 375);
        assert_eq!(DetectorRole::Trial05.input_len(250.0), 1375);
        assert_eq!(DetectorRole::Onset.input_len(250.0), 250);
    }

    fn untrained_model(role: DetectorRole) -> DetectorModel {
        let hyper = small_hyper();
        let spec = hyper.spec(32, role.input_len(250.0));
        let mut params = crate::net::init_params::<f32>(&spec, &mut crate::rng::Rng::new(1));
        params.get_mut("dense.weight").unwrap().data.fill(0.0);
        params.get_mut("dense.bias").unwrap().data.fill(0.0);
        DetectorModel {
            role,
            spec,
            params,
            fingerprint: Fingerprint {
                data_hash: String::from("0"),
                n_examples: 0,
                n_positive: 0,
                train: TrainConfig::default(),
                hyper,
            },
        }
    }

    fn segment_for(transition: f64) -> TrialSegment {
        TrialSegment {
            provenance: Provenance {
                subject_id: String::from("s01"),
                session_index: 0,
                trial_index: 0,
            },
            transition_sec: transition,
            data: crate::tensor::Array2::zeros(32, TrialSegment::expected_len(250.0, transition)),
            t0_sec: 0.0,
        }
    }

    #[test]
    fn symmetric_head_scores_one_half() {
        let model = untrained_model(DetectorRole::Trial05);
        let score = model.score_trial(&segment_for(0.5)).unwrap();
        assert_eq!(score, 0.5);
    }

    #[test]
    fn every_role_mismatch_is_rejected() {
        let trial01 = untrained_model(DetectorRole::Trial01);
        let trial05 = untrained_model(DetectorRole::Trial05);
        let onset = untrained_model(DetectorRole::Onset);
        let seg01 = segment_for(0.1);
        let seg05 = segment_for(0.5);
        let windows = make_windows(&seg05, 250.0).unwrap();

        assert!(matches!(
            trial01.score_trial(&seg05),
            Err(DetectorError::Routing { .. })
        ));
        assert!(matches!(
            trial05.score_trial(&seg01),
            Err(DetectorError::Routing { .. })
        ));
        assert!(matches!(
            onset.score_trial(&seg01),
            Err(DetectorError::Routing { .. })
        ));
        assert!(matches!(
            onset.score_trial(&seg05),
            Err(DetectorError::Routing { .. })
        ));
        assert!(matches!(
            trial01.score_windows(&windows),
            Err(DetectorError::Routing { .. })
        ));
        assert!(matches!(
            trial05.score_windows(&windows),
            Err(DetectorError::Routing { .. })
        ));
    }

    #[test]
    fn window_scores_align_and_split_consistently() {
        let config = SynthConfig::default();
        let (rec, manifest) = synth_session(&config, "s01", 0, Paradigm::Normal);
        let trials = detect_trials(&rec).unwrap();
        let i = manifest
            .trials
            .iter()
            .position(|t| t.transition_sec == 0.5)
            .unwrap();
        let seg = extract_trial_segment(
            &rec,
            trials[i].beep_sample,
            0.5,
            Provenance {
                subject_id: manifest.subject_id.clone(),
                session_index: 0,
                trial_index: i,
            },
        )
        .unwrap();
        let batch = make_windows(&seg, 250.0).unwrap();
        let model = untrained_model(DetectorRole::Onset);
        let scores = model.score_windows(&batch).unwrap();
        assert_eq!(scores.len(), 10);
        assert!(scores.iter().all(|&s| (0.0..=1.0).contains(&s)));
        // Batched scoring equals window-by-window scoring in eval mode.
        for (k, &s) in scores.iter().enumerate() {
            let single = TrialSegment {
                provenance: seg.provenance.clone(),
                transition_sec: 0.5,
                data: batch.windows.to_array2(k),
                t0_sec: 0.0,
            };
            let probs =
                forward_eval(&model.params, &model.spec, single.data.data(), 1).unwrap();
            assert_eq!(probs[TARGET_CLASS] as f64, s, "window {k}");
        }
    }

    #[test]
    fn training_is_reproducible_and_isolated() {
        let sessions = sessions(Paradigm::Normal, 1);
        let hyper = small_hyper();
        let config = TrainConfig {
            epochs: 1,
            seed: 3,
            ..TrainConfig::default()
        };
        let a = train_detector(DetectorRole::Trial01, &sessions, &hyper, &config).unwrap();
        let b = train_detector(DetectorRole::Trial01, &sessions, &hyper, &config).unwrap();
        assert_eq!(a.fingerprint, b.fingerprint);
        assert_eq!(a.params, b.params);
        // Training another role leaves the first model untouched.
        let before = a.params.clone();
        let _ = train_detector(DetectorRole::Onset, &sessions, &hyper, &config).unwrap();
        assert_eq!(a.params, before);
    }
}
