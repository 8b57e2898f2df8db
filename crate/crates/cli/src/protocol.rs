//! The leave-one-session-out evaluation driver.
//!
//! For each subject and fold it trains the detectors the requested methods
//! need on three sessions, infers on the held-out session, and hands the
//! per-fold decisions to the core report builder. Detector seeds derive
//! from (master seed, subject, fold, role) and never from the method, so
//! the proposed system and the baseline share the identical onset model
//! and a single-method run reproduces the same numbers bit for bit.
//!
//! Folds may run on worker threads; results land in indexed slots and are
//! reduced in fold order, so parallel runs report the same numbers as
//! serial ones.

use std::sync::atomic::{AtomicUsize, Ordering};
use std::sync::Mutex;

use erpstream_core::decision::{DetectorSet, SessionMeta};
use erpstream_core::detector::{train_detector, DetectorError, DetectorRole};
use erpstream_core::metrics::{build_report, loso_folds, EvalReport, FoldOutcome, Method, SubjectOutcomes};
use erpstream_core::net::NetworkHyper;
use erpstream_core::rng::Rng;
use erpstream_core::train::TrainConfig;
use erpstream_core::Paradigm;

use crate::dataset::SubjectSessions;
use crate::error::CliError;
use crate::orchestrator::{run_baseline, run_session, ExecMode};

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum ExecPlan {
    Serial,
    /// Fold jobs on up to this many worker threads.
    Parallel { threads: usize },
}

impl ExecPlan {
    pub fn auto(serial: bool) -> ExecPlan {
        if serial {
            ExecPlan::Serial
        } else {
            ExecPlan::Parallel {
                threads: std::thread::available_parallelism()
                    .map(|n| n.get())
                    .unwrap_or(2),
            }
        }
    }
}

#[derive(Clone)]
pub struct EvalSettings {
    pub train: TrainConfig,
    pub hyper: NetworkHyper,
    pub master_seed: u64,
    pub exec: ExecPlan,
}

/// Training seed for one detector: a pure function of the master seed and
/// the detector's place in the protocol.
fn detector_seed(master: u64, subject: &str, fold: usize, role: DetectorRole) -> u64 {
    Rng::new(master)
        .derive("train")
        .derive(subject)
        .derive_u64(fold as u64)
        .derive(role.tag())
        .seed()
}

struct FoldJob {
    subject: String,
    fold: usize,
}

struct FoldResult {
    /// One outcome per requested method, in method order.
    outcomes: Vec<FoldOutcome>,
}

/// Evaluates the requested methods on one paradigm of the dataset, sharing
/// detector training across methods within each fold.
pub fn evaluate_methods(
    dataset: &SubjectSessions,
    paradigm: Paradigm,
    methods: &[Method],
    settings: &EvalSettings,
) -> Result<Vec<EvalReport>, CliError> {
    let subjects: Vec<&String> = dataset.keys().collect();
    for (subject, sessions) in dataset {
        if sessions.len() != 4 {
            return Err(CliError::Config(format!(
                "subject {subject} has {} {} sessions, leave-one-session-out needs 4",
                sessions.len(),
                paradigm.tag()
            )));
        }
    }

    let jobs: Vec<FoldJob> = subjects
        .iter()
        .flat_map(|s| {
            (0..4).map(|fold| FoldJob {
                subject: (*s).clone(),
                fold,
            })
        })
        .collect();

    let run_job = |job: &FoldJob| -> Result<FoldResult, CliError> {
        let sessions = &dataset[&job.subject];
        let folds = loso_folds(sessions.len())?;
        let fold = &folds[job.fold];
        let train_sessions: Vec<_> = fold
            .train
            .iter()
            .map(|&i| sessions[i].clone())
            .collect();
        let (test_rec, test_manifest) = &sessions[fold.test];
        let meta = SessionMeta::from_manifest(test_manifest);

        let needs_proposed = methods.contains(&Method::Proposed);
        let seed_for =
            |role: DetectorRole| detector_seed(settings.master_seed, &job.subject, job.fold, role);
        let train_role = |role: DetectorRole| {
            let config = TrainConfig {
                seed: seed_for(role),
                ..settings.train.clone()
            };
            train_detector(role, &train_sessions, &settings.hyper, &config)
        };

        // Every requested method scores windows, so the onset detector is
        // always trained; within a fold it is trained exactly once.
        let onset = train_role(DetectorRole::Onset)?;
        let models = if needs_proposed {
            let trial01 = match train_role(DetectorRole::Trial01) {
                Ok(m) => Some(m),
                Err(DetectorError::EmptyTrainingSet { .. }) if paradigm == Paradigm::Ai => None,
                Err(e) => return Err(e.into()),
            };
            Some(DetectorSet {
                trial01,
                trial05: Some(train_role(DetectorRole::Trial05)?),
                onset: onset.clone(),
            })
        } else {
            None
        };

        let mut outcomes = Vec::with_capacity(methods.len());
        for method in methods {
            let inference = match method {
                Method::Proposed => run_session(
                    test_rec,
                    models.as_ref().expect("trained for the proposed method"),
                    &meta,
                    ExecMode::Serial,
                )?,
                Method::Baseline => run_baseline(test_rec, &onset, &meta, ExecMode::Serial)?,
            };
            outcomes.push(FoldOutcome {
                decisions: inference.decisions,
                labels: test_manifest.trials.clone(),
            });
        }
        Ok(FoldResult { outcomes })
    };

    // Run jobs, collect into per-job slots, reduce in job order.
    let mut slots: Vec<Option<Result<FoldResult, CliError>>> = Vec::new();
    slots.resize_with(jobs.len(), || None);
    match settings.exec {
        ExecPlan::Serial => {
            for (i, job) in jobs.iter().enumerate() {
                slots[i] = Some(run_job(job));
            }
        }
        ExecPlan::Parallel { threads } => {
            let next = AtomicUsize::new(0);
            let sink: Mutex<&mut Vec<Option<Result<FoldResult, CliError>>>> = Mutex::new(&mut slots);
            let workers = threads.max(1).min(jobs.len().max(1));
            std::thread::scope(|scope| {
                for _ in 0..workers {
                    scope.spawn(|| loop {
                        let i = next.fetch_add(1, Ordering::Relaxed);
                        if i >= jobs.len() {
                            break;
                        }
                        let result = run_job(&jobs[i]);
                        sink.lock().expect("slot sink")[i] = Some(result);
                    });
                }
            });
        }
    }

    // Assemble per-method reports in fold order.
    let mut per_method_subjects: Vec<Vec<SubjectOutcomes>> = methods
        .iter()
        .map(|_| {
            subjects
                .iter()
                .map(|s| SubjectOutcomes {
                    subject_id: (*s).clone(),
                    folds: Vec::with_capacity(4),
                })
                .collect()
        })
        .collect();
    for (i, slot) in slots.into_iter().enumerate() {
        let result = slot.expect("every job ran")?;
        let subject_index = i / 4;
        for (m, outcome) in result.outcomes.into_iter().enumerate() {
            per_method_subjects[m][subject_index].folds.push(outcome);
        }
    }

    let mut reports = Vec::with_capacity(methods.len());
    for (m, method) in methods.iter().enumerate() {
        reports.push(build_report(*method, paradigm, &per_method_subjects[m])?);
    }
    Ok(reports)
}
