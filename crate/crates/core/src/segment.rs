//! Beep-trigger segmentation and sliding windows.
//!
//! Turning a session recording into per-trial padded segments and into
//! 1 s / 0.5 s-step windows is the front half of the recognition pipeline.
//! The transition speed of a trial is inferred from the trigger cadence
//! alone; nothing here reads the manifest.

use alloc::vec::Vec;
use core::fmt;

use crate::eeg::{
    slice_samples, time_to_sample, EegRecording, Provenance, TrialLabel, TrialSegment,
    TriggerCode, IMAGES_PER_TRIAL,
};

/// Window length in seconds.
pub const WINDOW_LEN_SEC: f64 = 1.0;

/// Step between window starts in seconds (1 s windows, 50% overlap).
pub const WINDOW_STEP_SEC: f64 = 0.5;

const TRANSITION_CANDIDATES: [f64; 2] = [0.1, 0.5];

/// Largest relative distance at which a median gap still snaps to a
/// candidate transition time.
const CADENCE_TOLERANCE: f64 = 0.25;

#[derive(Clone, Debug, PartialEq)]
pub enum SegmentError {
    /// Recording contains no beep triggers at all.
    NoTrials,
    /// A trial does not contain exactly ten image onsets.
    MalformedTrial { trial_index: usize, onsets: usize },
    /// Fewer than two onsets; no cadence to measure.
    InsufficientOnsets { got: usize },
    /// Median inter-onset gap is not close to any candidate transition.
    UnrecognizedCadence { median_gap_sec: f64 },
    /// The padded segment would run past the end of the recording.
    SegmentOverrun {
        beep_sample: usize,
        needed: usize,
        available: usize,
    },
    /// Segment shorter than one window.
    SegmentTooShort { n_samples: usize, window: usize },
    /// Window batch and label disagree on which trial they describe.
    ProvenanceMismatch { batch_trial: usize, label_trial: usize },
}

impl fmt::Display for SegmentError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            SegmentError::NoTrials => write!(f, "recording has no beep triggers"),
            SegmentError::MalformedTrial { trial_index, onsets } => {
                write!(f, "trial {trial_index} has {onsets} image onsets, expected 10")
            }
            SegmentError::InsufficientOnsets { got } => {
                write!(f, "need at least 2 image onsets, got {got}")
            }
            SegmentError::UnrecognizedCadence { median_gap_sec } => {
                write!(f, "median onset gap {median_gap_sec} s matches neither 0.1 s nor 0.5 s")
            }
            SegmentError::SegmentOverrun {
                beep_sample,
                needed,
                available,
            } => write!(
                f,
                "trial at sample {beep_sample} needs {needed} samples, {available} available"
            ),
            SegmentError::SegmentTooShort { n_samples, window } => {
                write!(f, "segment of {n_samples} samples is shorter than one {window}-sample window")
            }
            SegmentError::ProvenanceMismatch {
                batch_trial,
                label_trial,
            } => write!(
                f,
                "window batch is for trial {batch_trial}, label for trial {label_trial}"
            ),
        }
    }
}

impl core::error::Error for SegmentError {}

/// One trial's trigger positions.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct TrialMarkers {
    pub beep_sample: usize,
    pub image_onsets: Vec<usize>,
}

/// Sliding windows over one trial segment.
#[derive(Clone, Debug, PartialEq)]
pub struct WindowBatch {
    pub provenance: Provenance,
    /// `[n_windows x n_channels x window_len]`.
    pub windows: crate::tensor::Array3,
    /// Start of each window relative to the trial stream start, seconds.
    pub window_start_secs: Vec<f64>,
    pub window_len_sec: f64,
    pub step_sec: f64,
}

/// Groups the recording's triggers into trials: each beep paired with the
/// image onsets that follow it, which must number exactly ten.
pub fn detect_trials(rec: &EegRecording) -> Result<Vec<TrialMarkers>, SegmentError> {
    let mut trials: Vec<TrialMarkers> = Vec::new();
    for ev in &rec.triggers {
        match ev.code {
            TriggerCode::BeepTrialStart => trials.push(TrialMarkers {
                beep_sample: ev.sample_index,
                image_onsets: Vec::with_capacity(IMAGES_PER_TRIAL),
            }),
            TriggerCode::ImageOnset => {
                if let Some(current) = trials.last_mut() {
                    current.image_onsets.push(ev.sample_index);
                }
                // Onsets before the first beep belong to no trial and are
                // dropped; validation below catches genuinely broken files.
            }
        }
    }
    if trials.is_empty() {
        return Err(SegmentError::NoTrials);
    }
    for (i, t) in trials.iter().enumerate() {
        if t.image_onsets.len() != IMAGES_PER_TRIAL {
            return Err(SegmentError::MalformedTrial {
                trial_index: i,
                onsets: t.image_onsets.len(),
            });
        }
    }
    Ok(trials)
}

/// Transition time of a trial from its image-onset cadence: the median
/// inter-onset gap snapped to the nearer of 0.1 s and 0.5 s.
pub fn infer_transition_sec(image_onsets: &[usize], sample_rate_hz: f64) -> Result<f64, SegmentError> {
    if image_onsets.len() < 2 {
        return Err(SegmentError::InsufficientOnsets {
            got: image_onsets.len(),
        });
    }
    let mut gaps: Vec<usize> = image_onsets.windows(2).map(|w| w[1] - w[0]).collect();
    gaps.sort_unstable();
    let median_samples = gaps[gaps.len() / 2];
    let median_sec = median_samples as f64 / sample_rate_hz;
    let mut best = TRANSITION_CANDIDATES[0];
    let mut best_dist = f64::INFINITY;
    for &c in &TRANSITION_CANDIDATES {
        let dist = libm::fabs(median_sec - c) / c;
        if dist < best_dist {
            best = c;
            best_dist = dist;
        }
    }
    if best_dist > CADENCE_TOLERANCE {
        return Err(SegmentError::UnrecognizedCadence {
            median_gap_sec: median_sec,
        });
    }
    Ok(best)
}

/// Cuts the padded trial segment: `round((10 * transition + 0.5) * fs)`
/// samples starting at the beep.
pub fn extract_trial_segment(
    rec: &EegRecording,
    beep_sample: usize,
    transition_sec: f64,
    provenance: Provenance,
) -> Result<TrialSegment, SegmentError> {
    let needed = TrialSegment::expected_len(rec.sample_rate_hz, transition_sec);
    let data = slice_samples(rec, beep_sample, needed).map_err(|e| SegmentError::SegmentOverrun {
        beep_sample,
        needed,
        available: e.available,
    })?;
    Ok(TrialSegment {
        provenance,
        transition_sec,
        data,
        t0_sec: 0.0,
    })
}

/// Number of windows a segment of `n_samples` yields.
pub fn window_count(n_samples: usize, sample_rate_hz: f64) -> usize {
    let win = time_to_sample(sample_rate_hz, WINDOW_LEN_SEC).unwrap_or(0);
    let step = time_to_sample(sample_rate_hz, WINDOW_STEP_SEC).unwrap_or(1).max(1);
    if n_samples < win {
        0
    } else {
        (n_samples - win) / step + 1
    }
}

/// Slides a 1 s window in 0.5 s steps across the segment. Starts at 0 and
/// keeps every window that fits entirely inside the segment.
pub fn make_windows(segment: &TrialSegment, sample_rate_hz: f64) -> Result<WindowBatch, SegmentError> {
    let win = time_to_sample(sample_rate_hz, WINDOW_LEN_SEC).expect("constant is non-negative");
    let step = time_to_sample(sample_rate_hz, WINDOW_STEP_SEC).expect("constant is non-negative");
    let n_samples = segment.data.cols();
    if n_samples < win {
        return Err(SegmentError::SegmentTooShort {
            n_samples,
            window: win,
        });
    }
    let n_windows = window_count(n_samples, sample_rate_hz);
    let mut slices = Vec::with_capacity(n_windows);
    let mut starts = Vec::with_capacity(n_windows);
    for k in 0..n_windows {
        let start = k * step;
        slices.push(segment.data.slice_cols(start, win));
        starts.push(start as f64 / sample_rate_hz);
    }
    Ok(WindowBatch {
        provenance: segment.provenance.clone(),
        windows: crate::tensor::Array3::from_slices(&slices),
        window_start_secs: starts,
        window_len_sec: WINDOW_LEN_SEC,
        step_sec: WINDOW_STEP_SEC,
    })
}

/// Training labels for a window batch: window `w` is positive iff the trial
/// has a target and its onset lies in `[start_w, start_w + step)`. The
/// half-open interval puts each onset in exactly one window, and the peak
/// of the response (onset + ~0.3 s) stays inside that 1 s window.
pub fn label_windows(batch: &WindowBatch, label: &TrialLabel) -> Result<Vec<u8>, SegmentError> {
    if batch.provenance.trial_index != label.trial_index {
        return Err(SegmentError::ProvenanceMismatch {
            batch_trial: batch.provenance.trial_index,
            label_trial: label.trial_index,
        });
    }
    let onset = match (label.target_present, label.target_onset_sec) {
        (true, Some(t)) => t,
        _ => return Ok(alloc::vec![0; batch.window_start_secs.len()]),
    };
    Ok(batch
        .window_start_secs
        .iter()
        .map(|&start| u8::from(onset >= start && onset < start + batch.step_sec))
        .collect())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::eeg::{default_channel_names, TriggerEvent};
    use crate::synth::{synth_session, SynthConfig};
    use crate::tensor::Array2;
    use crate::Paradigm;
    use alloc::vec;

    fn prov(trial: usize) -> Provenance {
        Provenance {
            subject_id: alloc::string::String::from("s01"),
            session_index: 0,
            trial_index: trial,
        }
    }

    fn recording_with(triggers: Vec<TriggerEvent>, n_samples: usize) -> EegRecording {
        EegRecording {
            sample_rate_hz: 250.0,
            channel_names: default_channel_names(2),
            samples: Array2::zeros(2, n_samples),
            triggers,
        }
    }

    #[test]
    fn synthetic_session_has_16_trials_of_10_onsets() {
        let config = SynthConfig::default();
        let (rec, _) = synth_session(&config, "s01", 0, Paradigm::Normal);
        let trials = detect_trials(&rec).unwrap();
        assert_eq!(trials.len(), 16);
        for t in &trials {
            assert_eq!(t.image_onsets.len(), 10);
        }
    }

    #[test]
    fn beeps_without_onsets_are_malformed() {
        let rec = recording_with(
            vec![
                TriggerEvent { sample_index: 0, code: TriggerCode::BeepTrialStart },
                TriggerEvent { sample_index: 100, code: TriggerCode::BeepTrialStart },
            ],
            1000,
        );
        let err = detect_trials(&rec).unwrap_err();
        assert_eq!(err, SegmentError::MalformedTrial { trial_index: 0, onsets: 0 });
    }

    #[test]
    fn no_beeps_means_no_trials() {
        let rec = recording_with(vec![], 1000);
        assert_eq!(detect_trials(&rec).unwrap_err(), SegmentError::NoTrials);
    }

    #[test]
    fn single_trial_recording() {
        let mut triggers = vec![TriggerEvent { sample_index: 0, code: TriggerCode::BeepTrialStart }];
        for k in 0..10 {
            triggers.push(TriggerEvent { sample_index: k * 125, code: TriggerCode::ImageOnset });
        }
        let rec = recording_with(triggers, 2500);
        let trials = detect_trials(&rec).unwrap();
        assert_eq!(trials.len(), 1);
        assert_eq!(trials[0].beep_sample, 0);
    }

    #[test]
    fn cadence_inference_snaps_to_candidates() {
        let fast: Vec<usize> = (0..10).map(|k| k * 25).collect();
        assert_eq!(infer_transition_sec(&fast, 250.0).unwrap(), 0.1);
        let slow: Vec<usize> = (0..10).map(|k| k * 125).collect();
        assert_eq!(infer_transition_sec(&slow, 250.0).unwrap(), 0.5);
    }

    #[test]
    fn cadence_between_candidates_is_rejected() {
        let odd: Vec<usize> = (0..10).map(|k| k * 75).collect(); // 0.3 s
        let err = infer_transition_sec(&odd, 250.0).unwrap_err();
        assert!(matches!(err, SegmentError::UnrecognizedCadence { .. }));
    }

    #[test]
    fn segment_lengths_match_formula() {
        let rec = recording_with(
            vec![TriggerEvent { sample_index: 0, code: TriggerCode::BeepTrialStart }],
            3000,
        );
        let slow = extract_trial_segment(&rec, 0, 0.5, prov(0)).unwrap();
        assert_eq!(slow.data.cols(), 1375);
        let fast = extract_trial_segment(&rec, 0, 0.1, prov(0)).unwrap();
        assert_eq!(fast.data.cols(), 375);
    }

    #[test]
    fn segment_overrun_is_an_error() {
        let rec = recording_with(vec![], 1000);
        let err = extract_trial_segment(&rec, 900, 0.5, prov(0)).unwrap_err();
        assert_eq!(
            err,
            SegmentError::SegmentOverrun { beep_sample: 900, needed: 1375, available: 1000 }
        );
    }

    fn segment_of(n_samples: usize, transition: f64) -> TrialSegment {
        TrialSegment {
            provenance: prov(0),
            transition_sec: transition,
            data: Array2::zeros(2, n_samples),
            t0_sec: 0.0,
        }
    }

    #[test]
    fn window_counts() {
        // 5.5 s -> 10 windows starting 0.0 .. 4.5
        let batch = make_windows(&segment_of(1375, 0.5), 250.0).unwrap();
        assert_eq!(batch.windows.n(), 10);
        assert_eq!(batch.window_start_secs.first(), Some(&0.0));
        assert_eq!(batch.window_start_secs.last(), Some(&4.5));
        // 1.5 s -> 2 windows
        let batch = make_windows(&segment_of(375, 0.1), 250.0).unwrap();
        assert_eq!(batch.windows.n(), 2);
        assert_eq!(batch.window_start_secs, vec![0.0, 0.5]);
        // exactly 1.0 s -> 1 window
        let batch = make_windows(&segment_of(250, 0.1), 250.0).unwrap();
        assert_eq!(batch.windows.n(), 1);
    }

    #[test]
    fn short_segment_cannot_window() {
        let err = make_windows(&segment_of(200, 0.1), 250.0).unwrap_err();
        assert_eq!(err, SegmentError::SegmentTooShort { n_samples: 200, window: 250 });
    }

    #[test]
    fn window_content_matches_slice() {
        let config = SynthConfig::default();
        let (rec, _) = synth_session(&config, "s01", 0, Paradigm::Normal);
        let trials = detect_trials(&rec).unwrap();
        let transition = infer_transition_sec(&trials[0].image_onsets, 250.0).unwrap();
        let seg = extract_trial_segment(&rec, trials[0].beep_sample, transition, prov(0)).unwrap();
        let batch = make_windows(&seg, 250.0).unwrap();
        for (k, &start) in batch.window_start_secs.iter().enumerate() {
            let s = time_to_sample(250.0, start).unwrap();
            let expected = seg.data.slice_cols(s, 250);
            assert_eq!(batch.windows.to_array2(k), expected, "window {k}");
        }
    }

    #[test]
    fn labels_pick_exactly_one_window() {
        let batch = make_windows(&segment_of(1375, 0.5), 250.0).unwrap();
        // onset 1.2 s -> window starting 1.0
        let label = TrialLabel::target(0, 0.5, 0); // image 0 -> onset 0.0; override below
        let mut label = label;
        label.target_image_index = Some(2);
        label.target_onset_sec = Some(1.2);
        // 1.2 is not a valid grid onset for 0.5 transitions; pass it anyway
        // to pin the interval rule itself.
        let labels = label_windows(&batch, &label).unwrap();
        let expected: Vec<u8> = (0..10).map(|k| u8::from(k == 2)).collect();
        assert_eq!(labels, expected);
    }

    #[test]
    fn label_boundary_is_half_open() {
        let batch = make_windows(&segment_of(1375, 0.5), 250.0).unwrap();
        let label = TrialLabel::target(0, 0.5, 3); // onset exactly 1.5 s
        let labels = label_windows(&batch, &label).unwrap();
        let positives: Vec<usize> = labels
            .iter()
            .enumerate()
            .filter(|(_, &l)| l == 1)
            .map(|(i, _)| i)
            .collect();
        assert_eq!(positives, vec![3]); // the window starting at 1.5
    }

    #[test]
    fn non_target_labels_are_zero() {
        let batch = make_windows(&segment_of(1375, 0.5), 250.0).unwrap();
        let label = TrialLabel::non_target(0, 0.5);
        let labels = label_windows(&batch, &label).unwrap();
        assert!(labels.iter().all(|&l| l == 0));
    }

    #[test]
    fn provenance_mismatch_is_an_error() {
        let batch = make_windows(&segment_of(1375, 0.5), 250.0).unwrap();
        let label = TrialLabel::non_target(5, 0.5);
        let err = label_windows(&batch, &label).unwrap_err();
        assert_eq!(err, SegmentError::ProvenanceMismatch { batch_trial: 0, label_trial: 5 });
    }

    #[test]
    fn session_roundtrip_recovers_manifest_transitions() {
        let config = SynthConfig::default();
        for paradigm in [Paradigm::Normal, Paradigm::Ai] {
            let (rec, manifest) = synth_session(&config, "s03", 2, paradigm);
            let trials = detect_trials(&rec).unwrap();
            assert_eq!(trials.len(), manifest.trials.len());
            for (markers, label) in trials.iter().zip(&manifest.trials) {
                let inferred = infer_transition_sec(&markers.image_onsets, 250.0).unwrap();
                assert_eq!(inferred, label.transition_sec);
            }
        }
    }

    #[test]
    fn one_positive_window_per_target_trial() {
        let config = SynthConfig::default();
        let (rec, manifest) = synth_session(&config, "s04", 3, Paradigm::Normal);
        let trials = detect_trials(&rec).unwrap();
        for (i, (markers, label)) in trials.iter().zip(&manifest.trials).enumerate() {
            let seg = extract_trial_segment(&rec, markers.beep_sample, label.transition_sec, prov(i))
                .unwrap();
            let batch = make_windows(&seg, 250.0).unwrap();
            let mut lab = label.clone();
            lab.trial_index = i;
            let labels = label_windows(&batch, &lab).unwrap();
            let positives: usize = labels.iter().map(|&l| l as usize).sum();
            assert_eq!(positives, usize::from(label.target_present), "trial {i}");
        }
    }
}
