//! Evaluation: trial-level confusion counts, the F-beta score with beta = 2
//! (recall-weighted), leave-one-session-out fold construction, onset error
//! statistics, and the cross-validated report.

use alloc::string::String;
use alloc::vec::Vec;
use core::fmt;
use serde::{Deserialize, Serialize};

use crate::decision::TrialDecision;
use crate::eeg::{Paradigm, TrialLabel};

/// The evaluation emphasizes recall: beta = 2.
pub const F_BETA: f64 = 2.0;

/// An onset prediction within this many seconds of the truth counts as a
/// hit (one window step).
pub const ONSET_HIT_TOLERANCE_SEC: f64 = 0.5;

#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct ConfusionCounts {
    pub true_pos: usize,
    pub false_pos: usize,
    pub false_neg: usize,
    pub true_neg: usize,
}

impl ConfusionCounts {
    pub fn total(&self) -> usize {
        self.true_pos + self.false_pos + self.false_neg + self.true_neg
    }

    pub fn merge(&mut self, other: &ConfusionCounts) {
        self.true_pos += other.true_pos;
        self.false_pos += other.false_pos;
        self.false_neg += other.false_neg;
        self.true_neg += other.true_neg;
    }

    /// `F_beta = (1 + b^2) * tp / ((1 + b^2) * tp + b^2 * fn + fp)`, the
    /// closed form of the precision/recall expression. Conventions:
    /// precision and recall with zero denominators count as 0, and the
    /// score is 0 when both are 0, so an all-negative predictor scores 0.
    pub fn f_beta(&self, beta: f64) -> f64 {
        let b2 = beta * beta;
        let tp = self.true_pos as f64;
        let denom = (1.0 + b2) * tp + b2 * self.false_neg as f64 + self.false_pos as f64;
        if denom == 0.0 {
            return 0.0;
        }
        (1.0 + b2) * tp / denom
    }

    /// Balanced accuracy `(tpr + tnr) / 2`; classes with no trials
    /// contribute a rate of 0.
    pub fn balanced_accuracy(&self) -> f64 {
        let pos = self.true_pos + self.false_neg;
        let neg = self.true_neg + self.false_pos;
        let tpr = if pos > 0 {
            self.true_pos as f64 / pos as f64
        } else {
            0.0
        };
        let tnr = if neg > 0 {
            self.true_neg as f64 / neg as f64
        } else {
            0.0
        };
        0.5 * (tpr + tnr)
    }
}

/// Trial-level confusion of decisions against ground truth, positive class
/// = target present.
pub fn trial_confusion(decisions: &[TrialDecision], labels: &[TrialLabel]) -> ConfusionCounts {
    let mut counts = ConfusionCounts::default();
    for (d, l) in decisions.iter().zip(labels) {
        match (d.target_present_pred, l.target_present) {
            (true, true) => counts.true_pos += 1,
            (true, false) => counts.false_pos += 1,
            (false, true) => counts.false_neg += 1,
            (false, false) => counts.true_neg += 1,
        }
    }
    counts
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub enum ProtocolError {
    /// Leave-one-session-out needs exactly four sessions.
    WrongSessionCount { got: usize },
    /// Decisions and labels must align one to one.
    DecisionCountMismatch { decisions: usize, labels: usize },
}

impl fmt::Display for ProtocolError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            ProtocolError::WrongSessionCount { got } => {
                write!(f, "leave-one-session-out needs 4 sessions, got {got}")
            }
            ProtocolError::DecisionCountMismatch { decisions, labels } => {
                write!(f, "{decisions} decisions against {labels} labels")
            }
        }
    }
}

impl core::error::Error for ProtocolError {}

/// One cross-validation split: session indices for training and testing.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct Fold {
    pub test: usize,
    pub train: Vec<usize>,
}

/// The four leave-one-session-out folds, in session order: fold k tests
/// session k and trains on the rest.
pub fn loso_folds(n_sessions: usize) -> Result<Vec<Fold>, ProtocolError> {
    if n_sessions != 4 {
        return Err(ProtocolError::WrongSessionCount { got: n_sessions });
    }
    Ok((0..n_sessions)
        .map(|test| Fold {
            test,
            train: (0..n_sessions).filter(|&s| s != test).collect(),
        })
        .collect())
}

/// Onset accuracy over the true positives of a decision set.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct OnsetStats {
    pub mean_abs_error_sec: f64,
    /// Fraction of true positives with |error| <= 0.5 s.
    pub hit_rate: f64,
    pub n_true_positives: usize,
}

/// Accumulates onset errors across folds before turning them into stats.
#[derive(Clone, Debug, Default)]
pub struct OnsetAccumulator {
    abs_errors: Vec<f64>,
}

impl OnsetAccumulator {
    /// Folds in the true positives of one evaluated session.
    pub fn add(&mut self, decisions: &[TrialDecision], labels: &[TrialLabel]) {
        for (d, l) in decisions.iter().zip(labels) {
            if !(d.target_present_pred && l.target_present) {
                continue;
            }
            if let (Some(pred), Some(truth)) = (d.onset_pred_sec, l.target_onset_sec) {
                self.abs_errors.push(libm::fabs(pred - truth));
            }
        }
    }

    /// None when the method produced no true positives at all.
    pub fn stats(&self) -> Option<OnsetStats> {
        if self.abs_errors.is_empty() {
            return None;
        }
        let n = self.abs_errors.len();
        let mean = self.abs_errors.iter().sum::<f64>() / n as f64;
        let hits = self
            .abs_errors
            .iter()
            .filter(|&&e| e <= ONSET_HIT_TOLERANCE_SEC)
            .count();
        Some(OnsetStats {
            mean_abs_error_sec: mean,
            hit_rate: hits as f64 / n as f64,
            n_true_positives: n,
        })
    }
}

/// Onset stats for a single evaluated session.
pub fn onset_error(decisions: &[TrialDecision], labels: &[TrialLabel]) -> Option<OnsetStats> {
    let mut acc = OnsetAccumulator::default();
    acc.add(decisions, labels);
    acc.stats()
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Method {
    Proposed,
    Baseline,
}

impl Method {
    pub fn tag(&self) -> &'static str {
        match self {
            Method::Proposed => "proposed",
            Method::Baseline => "baseline",
        }
    }

    pub fn parse(s: &str) -> Option<Method> {
        match s {
            "proposed" => Some(Method::Proposed),
            "baseline" => Some(Method::Baseline),
            _ => None,
        }
    }
}

impl fmt::Display for Method {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.tag())
    }
}

/// One subject's cross-validated scores.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SubjectEval {
    pub subject_id: String,
    pub fold_f_beta: Vec<f64>,
    pub fold_counts: Vec<ConfusionCounts>,
    pub mean_f_beta: f64,
}

/// Cross-validated evaluation of one method on one paradigm.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct EvalReport {
    pub method: Method,
    pub paradigm: Paradigm,
    pub beta: f64,
    pub subjects: Vec<SubjectEval>,
    /// Mean of the per-subject means.
    pub grand_f_beta: f64,
    /// Population standard deviation across the per-subject means.
    pub subject_std: f64,
    pub onset: Option<OnsetStats>,
}

/// Decisions for one tested session alongside its ground truth.
#[derive(Clone, Debug)]
pub struct FoldOutcome {
    pub decisions: Vec<TrialDecision>,
    pub labels: Vec<TrialLabel>,
}

/// One subject's four tested folds.
#[derive(Clone, Debug)]
pub struct SubjectOutcomes {
    pub subject_id: String,
    pub folds: Vec<FoldOutcome>,
}

/// Assembles the cross-validated report from per-fold decisions. This is
/// the single accounting path: the full pipeline and oracle-injection tests
/// both go through here.
pub fn build_report(
    method: Method,
    paradigm: Paradigm,
    subjects: &[SubjectOutcomes],
) -> Result<EvalReport, ProtocolError> {
    let mut subject_evals = Vec::with_capacity(subjects.len());
    let mut onset_acc = OnsetAccumulator::default();
    for s in subjects {
        let mut fold_scores = Vec::with_capacity(s.folds.len());
        let mut fold_counts = Vec::with_capacity(s.folds.len());
        for fold in &s.folds {
            if fold.decisions.len() != fold.labels.len() {
                return Err(ProtocolError::DecisionCountMismatch {
                    decisions: fold.decisions.len(),
                    labels: fold.labels.len(),
                });
            }
            let counts = trial_confusion(&fold.decisions, &fold.labels);
            fold_scores.push(counts.f_beta(F_BETA));
            fold_counts.push(counts);
            onset_acc.add(&fold.decisions, &fold.labels);
        }
        let mean = fold_scores.iter().sum::<f64>() / fold_scores.len().max(1) as f64;
        subject_evals.push(SubjectEval {
            subject_id: s.subject_id.clone(),
            fold_f_beta: fold_scores,
            fold_counts,
            mean_f_beta: mean,
        });
    }
    let n = subject_evals.len().max(1) as f64;
    let grand = subject_evals.iter().map(|s| s.mean_f_beta).sum::<f64>() / n;
    let var = subject_evals
        .iter()
        .map(|s| (s.mean_f_beta - grand) * (s.mean_f_beta - grand))
        .sum::<f64>()
        / n;
    Ok(EvalReport {
        method,
        paradigm,
        beta: F_BETA,
        subjects: subject_evals,
        grand_f_beta: grand,
        subject_std: libm::sqrt(var),
        onset: onset_acc.stats(),
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use alloc::string::ToString;
    use alloc::vec;

    fn counts(tp: usize, fp: usize, fn_: usize, tn: usize) -> ConfusionCounts {
        ConfusionCounts {
            true_pos: tp,
            false_pos: fp,
            false_neg: fn_,
            true_neg: tn,
        }
    }

    /// Literal transcription of the precision/recall formulation, kept
    /// deliberately separate from the closed form in the implementation.
    fn f_beta_reference(c: &ConfusionCounts, beta: f64) -> f64 {
        let tp = c.true_pos as f64;
        let precision = if c.true_pos + c.false_pos > 0 {
            tp / (c.true_pos + c.false_pos) as f64
        } else {
            0.0
        };
        let recall = if c.true_pos + c.false_neg > 0 {
            tp / (c.true_pos + c.false_neg) as f64
        } else {
            0.0
        };
        let b2 = beta * beta;
        if b2 * precision + recall == 0.0 {
            return 0.0;
        }
        (1.0 + b2) * (precision * recall) / (b2 * precision + recall)
    }

    #[test]
    fn perfect_predictor_scores_one() {
        assert_eq!(counts(8, 0, 0, 8).f_beta(2.0), 1.0);
    }

    #[test]
    fn all_positive_predictor_on_half_targets() {
        // 8 targets of 16 trials: precision 0.5, recall 1.0.
        let f2 = counts(8, 8, 0, 0).f_beta(2.0);
        assert!((f2 - 5.0 * 0.5 / (4.0 * 0.5 + 1.0)).abs() < 1e-15);
        assert!((f2 - 0.833333333333).abs() < 1e-9);
    }

    #[test]
    fn zero_recall_scores_zero() {
        assert_eq!(counts(0, 0, 8, 8).f_beta(2.0), 0.0);
        assert_eq!(counts(0, 0, 0, 16).f_beta(2.0), 0.0);
    }

    #[test]
    fn closed_form_matches_reference_everywhere() {
        let mut rng = crate::rng::Rng::new(314);
        for _ in 0..10_000 {
            let c = counts(
                rng.next_below(20),
                rng.next_below(20),
                rng.next_below(20),
                rng.next_below(20),
            );
            let beta = 0.5 + rng.next_f64() * 3.0;
            let got = c.f_beta(beta);
            let want = f_beta_reference(&c, beta);
            assert!(
                (got - want).abs() < 1e-12,
                "{c:?} beta {beta}: {got} vs {want}"
            );
        }
    }

    #[test]
    fn f_beta_monotone_in_true_positives() {
        let mut rng = crate::rng::Rng::new(27);
        for _ in 0..1000 {
            let fp = rng.next_below(10);
            let fn_ = rng.next_below(10);
            let tp = rng.next_below(10);
            let a = counts(tp, fp, fn_, 0).f_beta(2.0);
            let b = counts(tp + 1, fp, fn_, 0).f_beta(2.0);
            assert!(b >= a);
        }
    }

    #[test]
    fn beta_two_rewards_recall() {
        let mut rng = crate::rng::Rng::new(88);
        let mut seen = 0;
        while seen < 500 {
            let tp = 1 + rng.next_below(10);
            let fp = rng.next_below(10);
            let fn_ = rng.next_below(10);
            if fp <= fn_ {
                continue; // want recall > precision
            }
            seen += 1;
            let c = counts(tp, fp, fn_, 0);
            assert!(
                c.f_beta(2.0) > c.f_beta(1.0),
                "recall-heavy counts must gain from beta=2: {c:?}"
            );
        }
    }

    #[test]
    fn loso_folds_partition_sessions() {
        let folds = loso_folds(4).unwrap();
        assert_eq!(folds.len(), 4);
        for (k, fold) in folds.iter().enumerate() {
            assert_eq!(fold.test, k);
            assert_eq!(fold.train.len(), 3);
            assert!(!fold.train.contains(&k));
        }
        let mut tested: Vec<usize> = folds.iter().map(|f| f.test).collect();
        tested.sort_unstable();
        assert_eq!(tested, vec![0, 1, 2, 3]);
    }

    #[test]
    fn loso_rejects_other_session_counts() {
        assert_eq!(
            loso_folds(3).unwrap_err(),
            ProtocolError::WrongSessionCount { got: 3 }
        );
    }

    fn decision(trial: usize, present: bool, onset: Option<f64>) -> TrialDecision {
        TrialDecision {
            trial_index: trial,
            transition_sec: 0.5,
            target_present_pred: present,
            trial_score: if present { 0.9 } else { 0.1 },
            onset_pred_sec: onset,
            window_scores: vec![0.0; 10],
            window_start_secs: (0..10).map(|k| k as f64 * 0.5).collect(),
        }
    }

    #[test]
    fn onset_errors_and_hits() {
        let labels = vec![crate::eeg::TrialLabel::target(0, 0.5, 2)]; // onset 1.0
        let decisions = vec![decision(0, true, Some(1.2))];
        let stats = onset_error(&decisions, &labels).unwrap();
        assert!((stats.mean_abs_error_sec - 0.2).abs() < 1e-12);
        assert_eq!(stats.hit_rate, 1.0);
        assert_eq!(stats.n_true_positives, 1);
    }

    #[test]
    fn no_true_positives_means_no_stats() {
        let labels = vec![crate::eeg::TrialLabel::target(0, 0.5, 2)];
        let decisions = vec![decision(0, false, None)];
        assert_eq!(onset_error(&decisions, &labels), None);
    }

    fn oracle_subject(id: &str) -> SubjectOutcomes {
        let folds = (0..4)
            .map(|_| {
                let labels: Vec<_> = (0..16)
                    .map(|i| {
                        if i < 8 {
                            crate::eeg::TrialLabel::target(i, 0.5, i % 10)
                        } else {
                            crate::eeg::TrialLabel::non_target(i, 0.5)
                        }
                    })
                    .collect();
                let decisions = labels
                    .iter()
                    .map(|l| decision(l.trial_index, l.target_present, l.target_onset_sec))
                    .collect();
                FoldOutcome { decisions, labels }
            })
            .collect();
        SubjectOutcomes {
            subject_id: id.to_string(),
            folds,
        }
    }

    #[test]
    fn oracle_decisions_report_perfect_scores() {
        let subjects = vec![oracle_subject("s01"), oracle_subject("s02")];
        let report = build_report(Method::Proposed, Paradigm::Normal, &subjects).unwrap();
        assert_eq!(report.grand_f_beta, 1.0);
        assert_eq!(report.subject_std, 0.0);
        let onset = report.onset.unwrap();
        assert_eq!(onset.mean_abs_error_sec, 0.0);
        assert_eq!(onset.hit_rate, 1.0);
    }

    #[test]
    fn always_positive_decisions_hit_the_base_rate() {
        let mut subject = oracle_subject("s01");
        for fold in &mut subject.folds {
            for d in &mut fold.decisions {
                d.target_present_pred = true;
                d.onset_pred_sec = Some(0.0);
            }
        }
        let report = build_report(Method::Baseline, Paradigm::Normal, &[subject]).unwrap();
        for s in &report.subjects {
            for &f in &s.fold_f_beta {
                assert!((f - 0.8333333333333334).abs() < 1e-12);
            }
        }
        assert!((report.grand_f_beta - 0.8333333333333334).abs() < 1e-12);
    }

    #[test]
    fn grand_mean_and_std_follow_subject_means() {
        let mut a = oracle_subject("s01");
        // Break two folds of subject a: flip every prediction.
        for fold in &mut a.folds[..2] {
            for d in &mut fold.decisions {
                d.target_present_pred = !d.target_present_pred;
                d.onset_pred_sec = d.target_present_pred.then_some(0.0);
            }
        }
        let b = oracle_subject("s02");
        let report = build_report(Method::Proposed, Paradigm::Ai, &[a, b]).unwrap();
        let m0 = report.subjects[0].mean_f_beta;
        let m1 = report.subjects[1].mean_f_beta;
        assert!((report.grand_f_beta - (m0 + m1) / 2.0).abs() < 1e-15);
        let mean = (m0 + m1) / 2.0;
        let var = ((m0 - mean).powi(2) + (m1 - mean).powi(2)) / 2.0;
        assert!((report.subject_std - var.sqrt()).abs() < 1e-15);
    }

    #[test]
    fn every_trial_is_counted_exactly_once() {
        let subjects = vec![oracle_subject("s01")];
        let report = build_report(Method::Proposed, Paradigm::Normal, &subjects).unwrap();
        let total: usize = report.subjects[0]
            .fold_counts
            .iter()
            .map(|c| c.total())
            .sum();
        assert_eq!(total, 4 * 16);
    }
}
