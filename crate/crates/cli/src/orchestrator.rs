//! Fan-out inference over one session.
//!
//! Each trial produces two independent scoring tasks: the speed-routed
//! trial detector on the padded segment, and the appearance-time detector
//! on the window batch. Tasks run either serially in a fixed order or on a
//! pool of worker threads in a schedule-seeded shuffled order. Models are
//! frozen and inputs immutable, every task writes only its own slot, and
//! the join assembles decisions in trial order — so the decisions are
//! identical whatever the interleaving, which the tests stress.

use std::collections::BTreeMap;
use std::sync::atomic::{AtomicUsize, Ordering};
use std::sync::Mutex;
use std::time::Instant;

use serde::{Deserialize, Serialize};

use erpstream_core::decision::{
    aggregate, aggregate_baseline, prepare_trials, DecisionError, DetectorSet, SessionMeta,
    TrialDecision,
};
use erpstream_core::detector::{DetectorModel, DetectorRole};
use erpstream_core::rng::Rng;
use erpstream_core::{EegRecording, Paradigm};

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum ExecMode {
    /// One task after another in trial order.
    Serial,
    /// Worker threads pull tasks in an order shuffled by `schedule_seed`.
    /// The seed perturbs scheduling only; outputs never depend on it.
    Concurrent { schedule_seed: u64 },
}

/// Wall-clock seconds spent inside each detector, summed over tasks.
#[derive(Clone, Copy, Debug, Default, PartialEq, Serialize, Deserialize)]
pub struct InferenceTiming {
    pub trial01_sec: f64,
    pub trial05_sec: f64,
    pub onset_sec: f64,
    pub wall_sec: f64,
}

/// Inference result for one session: sixteen decisions plus accounting.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SessionInference {
    pub subject_id: String,
    pub session_index: usize,
    pub paradigm: Paradigm,
    pub decisions: Vec<TrialDecision>,
    pub timing: InferenceTiming,
    /// Role tag -> training data hash, for audit trails.
    pub model_fingerprints: BTreeMap<String, String>,
}

impl SessionInference {
    /// Equality of everything the models computed; timing excluded.
    pub fn same_decisions(&self, other: &SessionInference) -> bool {
        self.subject_id == other.subject_id
            && self.session_index == other.session_index
            && self.paradigm == other.paradigm
            && self.decisions == other.decisions
            && self.model_fingerprints == other.model_fingerprints
    }
}

enum TaskKind {
    TrialScore,
    WindowScores,
}

enum TaskOutput {
    TrialScore(f64),
    WindowScores(Vec<f64>),
}

struct TaskResult {
    trial: usize,
    output: Result<TaskOutput, DecisionError>,
    role: DetectorRole,
    seconds: f64,
}

/// Runs the distributed path: trial detectors decide existence, the onset
/// detector locates the target.
pub fn run_session(
    rec: &EegRecording,
    models: &DetectorSet,
    meta: &SessionMeta,
    mode: ExecMode,
) -> Result<SessionInference, DecisionError> {
    let started = Instant::now();
    let trials = prepare_trials(rec, meta)?;

    // Two tasks per trial, identified by (trial, kind).
    let tasks: Vec<(usize, TaskKind)> = (0..trials.len())
        .flat_map(|i| [(i, TaskKind::TrialScore), (i, TaskKind::WindowScores)])
        .collect();
    let run_task = |(trial, kind): &(usize, TaskKind)| -> TaskResult {
        let t = &trials[*trial];
        let t0 = Instant::now();
        let (role, output) = match kind {
            TaskKind::TrialScore => match models.route_trial(t.segment.transition_sec) {
                Ok(detector) => (
                    detector.role,
                    detector
                        .score_trial(&t.segment)
                        .map(TaskOutput::TrialScore)
                        .map_err(DecisionError::from),
                ),
                Err(e) => (DetectorRole::Trial05, Err(e)),
            },
            TaskKind::WindowScores => (
                DetectorRole::Onset,
                models
                    .onset
                    .score_windows(&t.windows)
                    .map(TaskOutput::WindowScores)
                    .map_err(DecisionError::from),
            ),
        };
        TaskResult {
            trial: *trial,
            output,
            role,
            seconds: t0.elapsed().as_secs_f64(),
        }
    };
    let results = execute(&tasks, mode, run_task);

    // Deterministic join: fold results into per-trial slots, then aggregate
    // in trial order.
    let mut trial_scores: Vec<Option<f64>> = vec![None; trials.len()];
    let mut window_scores: Vec<Option<Vec<f64>>> = vec![None; trials.len()];
    let mut timing = InferenceTiming::default();
    for r in results {
        match r.role {
            DetectorRole::Trial01 => timing.trial01_sec += r.seconds,
            DetectorRole::Trial05 => timing.trial05_sec += r.seconds,
            DetectorRole::Onset => timing.onset_sec += r.seconds,
        }
        match r.output? {
            TaskOutput::TrialScore(s) => trial_scores[r.trial] = Some(s),
            TaskOutput::WindowScores(s) => window_scores[r.trial] = Some(s),
        }
    }

    let mut decisions = Vec::with_capacity(trials.len());
    for (i, t) in trials.iter().enumerate() {
        let trial_score = trial_scores[i].expect("every trial was scored");
        let scores = window_scores[i].take().expect("every trial was windowed");
        let (present, onset) = aggregate(i, trial_score, &scores, &t.windows.window_start_secs)?;
        decisions.push(TrialDecision {
            trial_index: i,
            transition_sec: t.segment.transition_sec,
            target_present_pred: present,
            trial_score,
            onset_pred_sec: onset,
            window_scores: scores,
            window_start_secs: t.windows.window_start_secs.clone(),
        });
    }

    timing.wall_sec = started.elapsed().as_secs_f64();
    Ok(SessionInference {
        subject_id: meta.subject_id.clone(),
        session_index: meta.session_index,
        paradigm: meta.paradigm,
        decisions,
        timing,
        model_fingerprints: fingerprints(models.models()),
    })
}

/// Runs the conventional single-model baseline: one onset-style model, a
/// trial is positive when any window clears the threshold.
pub fn run_baseline(
    rec: &EegRecording,
    onset_model: &DetectorModel,
    meta: &SessionMeta,
    mode: ExecMode,
) -> Result<SessionInference, DecisionError> {
    let started = Instant::now();
    let trials = prepare_trials(rec, meta)?;
    let tasks: Vec<usize> = (0..trials.len()).collect();
    let run_task = |trial: &usize| -> TaskResult {
        let t = &trials[*trial];
        let t0 = Instant::now();
        TaskResult {
            trial: *trial,
            output: onset_model
                .score_windows(&t.windows)
                .map(TaskOutput::WindowScores)
                .map_err(DecisionError::from),
            role: DetectorRole::Onset,
            seconds: t0.elapsed().as_secs_f64(),
        }
    };
    let results = execute(&tasks, mode, run_task);

    let mut window_scores: Vec<Option<Vec<f64>>> = vec![None; trials.len()];
    let mut timing = InferenceTiming::default();
    for r in results {
        timing.onset_sec += r.seconds;
        match r.output? {
            TaskOutput::WindowScores(s) => window_scores[r.trial] = Some(s),
            TaskOutput::TrialScore(_) => unreachable!("baseline runs window tasks only"),
        }
    }
    let mut decisions = Vec::with_capacity(trials.len());
    for (i, t) in trials.iter().enumerate() {
        let scores = window_scores[i].take().expect("every trial was scored");
        let (present, onset, max) =
            aggregate_baseline(&scores, &t.windows.window_start_secs)?;
        decisions.push(TrialDecision {
            trial_index: i,
            transition_sec: t.segment.transition_sec,
            target_present_pred: present,
            trial_score: max,
            onset_pred_sec: onset,
            window_scores: scores,
            window_start_secs: t.windows.window_start_secs.clone(),
        });
    }
    timing.wall_sec = started.elapsed().as_secs_f64();
    Ok(SessionInference {
        subject_id: meta.subject_id.clone(),
        session_index: meta.session_index,
        paradigm: meta.paradigm,
        decisions,
        timing,
        model_fingerprints: fingerprints(vec![onset_model]),
    })
}

fn fingerprints(models: Vec<&DetectorModel>) -> BTreeMap<String, String> {
    models
        .into_iter()
        .map(|m| (m.role.tag().to_string(), m.fingerprint.data_hash.clone()))
        .collect()
}

/// Runs every task once and returns all results; order of the returned
/// vector is unspecified, the caller joins by task identity.
fn execute<T: Sync, F: Fn(&T) -> TaskResult + Sync>(
    tasks: &[T],
    mode: ExecMode,
    run: F,
) -> Vec<TaskResult> {
    match mode {
        ExecMode::Serial => tasks.iter().map(run).collect(),
        ExecMode::Concurrent { schedule_seed } => {
            let mut order: Vec<usize> = (0..tasks.len()).collect();
            Rng::new(schedule_seed).shuffle(&mut order);
            let next = AtomicUsize::new(0);
            let results = Mutex::new(Vec::with_capacity(tasks.len()));
            let workers = std::thread::available_parallelism()
                .map(|n| n.get())
                .unwrap_or(2)
                .min(tasks.len().max(1));
            std::thread::scope(|scope| {
                for _ in 0..workers {
                    scope.spawn(|| loop {
                        let slot = next.fetch_add(1, Ordering::Relaxed);
                        if slot >= order.len() {
                            break;
                        }
                        let result = run(&tasks[order[slot]]);
                        results.lock().expect("result sink").push(result);
                    });
                }
            });
            results.into_inner().expect("workers finished")
        }
    }
}
