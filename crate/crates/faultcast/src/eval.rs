//! Evaluation: leave-one-appliance-out cross-validation, ROC analysis, and
//! cost-based alarm threshold selection.
//!
//! Cross-validation folds are the appliances that ever carry a positive
//! window for the alarm under study. Each fold trains on every other
//! appliance's windows and scores the held-out appliance, so a good score
//! demonstrates transfer to a machine the model has never seen.
//!
//! ROC curves sweep the score threshold from high to low; tied scores enter
//! together. The area under the curve is computed by trapezoids, which for
//! this construction equals the Mann-Whitney statistic: the probability
//! that a random positive outscores a random negative, ties counting half.

use crate::features::{FeatureError, FeatureMatrix, FeatureSet};
use crate::model::{train_adaboost, AdaBoostModel, ColumnMatrix, ModelError, TrainConfig};
use crate::telemetry::CohortDataset;
use crate::windowing::{apply_labels, enumerate_windows, LabeledWindow, WindowSpec};
use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use thiserror::Error;

#[derive(Debug, Error)]
pub enum EvalError {
    #[error("scores and labels are empty")]
    EmptyInput,
    #[error("scores ({scores}) and labels ({labels}) diverge")]
    LengthMismatch { scores: usize, labels: usize },
    #[error("need both a positive and a negative sample")]
    SingleClass,
    #[error("score at index {index} is not finite")]
    NonFiniteScore { index: usize },
    #[error("window at index {index} carries no label for alarm {alarm_id}")]
    MissingLabel { index: usize, alarm_id: String },
    #[error("no appliance has a positive window for alarm {alarm_id}")]
    NoFolds { alarm_id: String },
    #[error("training split for alarm {alarm_id} without {appliance_id} has one class")]
    TrainingSingleClass { alarm_id: String, appliance_id: String },
    #[error("no windows fit the extent; telemetry is shorter than one window span")]
    NoWindows,
    #[error(transparent)]
    Model(#[from] ModelError),
    #[error(transparent)]
    Feature(#[from] FeatureError),
}

// ---------------------------------------------------------------------------
// ROC and AUC
// ---------------------------------------------------------------------------

/// One point of a ROC sweep. `threshold` is the lowest score still
/// classified positive at this point.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct RocPoint {
    pub fpr: f64,
    pub tpr: f64,
    pub threshold: f64,
}

/// Threshold sweep from high scores to low, tied scores moving together.
///
/// The first point is always `(0, 0)` at threshold infinity; the last is
/// `(1, 1)` at the minimum score.
pub fn roc_curve(scores: &[f64], labels: &[bool]) -> Result<Vec<RocPoint>, EvalError> {
    check_scored(scores, labels)?;
    let positives = labels.iter().filter(|&&l| l).count();
    let negatives = labels.len() - positives;
    if positives == 0 || negatives == 0 {
        return Err(EvalError::SingleClass);
    }
    let mut order: Vec<usize> = (0..scores.len()).collect();
    order.sort_by(|&a, &b| scores[b].total_cmp(&scores[a]));

    let mut points =
        vec![RocPoint { fpr: 0.0, tpr: 0.0, threshold: f64::INFINITY }];
    let (mut tp, mut fp) = (0usize, 0usize);
    let mut at = 0;
    while at < order.len() {
        let score = scores[order[at]];
        while at < order.len() && scores[order[at]] == score {
            if labels[order[at]] {
                tp += 1;
            } else {
                fp += 1;
            }
            at += 1;
        }
        points.push(RocPoint {
            fpr: fp as f64 / negatives as f64,
            tpr: tp as f64 / positives as f64,
            threshold: score,
        });
    }
    Ok(points)
}

/// Trapezoidal area under a ROC sweep.
pub fn auc(points: &[RocPoint]) -> f64 {
    points
        .windows(2)
        .map(|pair| (pair[1].fpr - pair[0].fpr) * (pair[1].tpr + pair[0].tpr) / 2.0)
        .sum()
}

fn check_scored(scores: &[f64], labels: &[bool]) -> Result<(), EvalError> {
    if scores.len() != labels.len() {
        return Err(EvalError::LengthMismatch { scores: scores.len(), labels: labels.len() });
    }
    if scores.is_empty() {
        return Err(EvalError::EmptyInput);
    }
    if let Some(index) = scores.iter().position(|s| !s.is_finite()) {
        return Err(EvalError::NonFiniteScore { index });
    }
    Ok(())
}

/// Vertically averaged ROC on the standard 101-point false-positive grid.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct MeanRocPoint {
    pub fpr: f64,
    pub tpr: f64,
}

/// Averages curves by true-positive rate at each grid false-positive rate.
///
/// Vertical runs of a curve (several true-positive rates at one
/// false-positive rate) collapse to their best point, and queries between
/// knots interpolate linearly.
pub fn average_roc(curves: &[Vec<RocPoint>]) -> Result<Vec<MeanRocPoint>, EvalError> {
    if curves.is_empty() {
        return Err(EvalError::EmptyInput);
    }
    let knot_sets: Vec<Vec<(f64, f64)>> = curves
        .iter()
        .map(|curve| {
            let mut knots: Vec<(f64, f64)> = Vec::with_capacity(curve.len());
            for point in curve {
                match knots.last_mut() {
                    // The sweep only raises tpr, so the last point at a
                    // duplicate fpr is the envelope point.
                    Some(last) if last.0 == point.fpr => last.1 = point.tpr,
                    _ => knots.push((point.fpr, point.tpr)),
                }
            }
            knots
        })
        .collect();

    let mut averaged = Vec::with_capacity(101);
    for grid_index in 0..=100u32 {
        let fpr = f64::from(grid_index) / 100.0;
        let mean_tpr = knot_sets
            .iter()
            .map(|knots| tpr_at(knots, fpr))
            .sum::<f64>()
            / knot_sets.len() as f64;
        averaged.push(MeanRocPoint { fpr, tpr: mean_tpr });
    }
    Ok(averaged)
}

fn tpr_at(knots: &[(f64, f64)], fpr: f64) -> f64 {
    debug_assert!(!knots.is_empty());
    if fpr <= knots[0].0 {
        return knots[0].1;
    }
    for pair in knots.windows(2) {
        let ((f0, t0), (f1, t1)) = (pair[0], pair[1]);
        if fpr <= f1 {
            return t0 + (t1 - t0) * (fpr - f0) / (f1 - f0);
        }
    }
    knots.last().unwrap().1
}

// ---------------------------------------------------------------------------
// Cost model and threshold selection
// ---------------------------------------------------------------------------

/// Costs of the two error kinds: a missed fault turns into unplanned
/// corrective maintenance; a false alarm sends a crew out for nothing.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct CostModel {
    pub missed_fault: f64,
    pub false_alarm: f64,
}

impl Default for CostModel {
    /// A missed fault is an order of magnitude worse than a wasted check.
    fn default() -> Self {
        CostModel { missed_fault: 10.0, false_alarm: 1.0 }
    }
}

/// (missed faults, false alarms) of the strict-threshold classifier.
pub fn error_counts(scores: &[f64], labels: &[bool], threshold: f64) -> (usize, usize) {
    let mut missed = 0;
    let mut false_alarms = 0;
    for (&score, &label) in scores.iter().zip(labels) {
        let predicted = score > threshold;
        match (label, predicted) {
            (true, false) => missed += 1,
            (false, true) => false_alarms += 1,
            _ => {}
        }
    }
    (missed, false_alarms)
}

/// Total cost `missed * missed_fault + false_alarms * false_alarm`.
pub fn expected_cost(scores: &[f64], labels: &[bool], threshold: f64, cost: &CostModel) -> f64 {
    let (missed, false_alarms) = error_counts(scores, labels, threshold);
    missed as f64 * cost.missed_fault + false_alarms as f64 * cost.false_alarm
}

/// Minimum-cost alarm threshold and its cost.
///
/// Candidates are 0, 1, and the midpoints between consecutive distinct
/// scores; these realize every achievable classification of the sample
/// (classification is strictly greater-than). Cost ties resolve to the
/// largest threshold: when alerting earlier buys nothing, stay quiet.
pub fn select_threshold(
    scores: &[f64],
    labels: &[bool],
    cost: &CostModel,
) -> Result<(f64, f64), EvalError> {
    check_scored(scores, labels)?;
    if labels.iter().all(|&l| l) || labels.iter().all(|&l| !l) {
        return Err(EvalError::SingleClass);
    }
    let mut distinct = scores.to_vec();
    distinct.sort_by(f64::total_cmp);
    distinct.dedup();
    let mut candidates = vec![0.0, 1.0];
    candidates.extend(distinct.windows(2).map(|pair| (pair[0] + pair[1]) / 2.0));

    let mut best: Option<(f64, f64)> = None;
    for threshold in candidates {
        let total = expected_cost(scores, labels, threshold, cost);
        let better = match best {
            None => true,
            Some((best_threshold, best_cost)) => {
                total < best_cost || (total == best_cost && threshold > best_threshold)
            }
        };
        if better {
            best = Some((threshold, total));
        }
    }
    Ok(best.expect("candidate list is never empty"))
}

// ---------------------------------------------------------------------------
// Cross-validation
// ---------------------------------------------------------------------------

/// One leave-one-appliance-out fold.
#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct Fold {
    pub test_appliance: usize,
    pub appliance_id: String,
}

/// Labels of every window for one alarm type, as booleans.
pub fn labels_for(windows: &[LabeledWindow], alarm_id: &str) -> Result<Vec<bool>, EvalError> {
    windows
        .iter()
        .enumerate()
        .map(|(index, window)| {
            window.labels.get(alarm_id).copied().ok_or_else(|| EvalError::MissingLabel {
                index,
                alarm_id: alarm_id.to_owned(),
            })
        })
        .collect()
}

/// Folds for one alarm type: every appliance with at least one positive
/// window, in ascending appliance order.
pub fn make_folds(windows: &[LabeledWindow], alarm_id: &str) -> Result<Vec<Fold>, EvalError> {
    let labels = labels_for(windows, alarm_id)?;
    let mut folds: Vec<Fold> = Vec::new();
    for (window, &label) in windows.iter().zip(&labels) {
        if !label {
            continue;
        }
        if folds.iter().all(|f| f.test_appliance != window.appliance_index) {
            folds.push(Fold {
                test_appliance: window.appliance_index,
                appliance_id: window.appliance_id.clone(),
            });
        }
    }
    folds.sort_by_key(|f| f.test_appliance);
    if folds.is_empty() {
        return Err(EvalError::NoFolds { alarm_id: alarm_id.to_owned() });
    }
    Ok(folds)
}

/// Row indices split into (training, test) by held-out appliance.
pub fn fold_partition(windows: &[LabeledWindow], test_appliance: usize) -> (Vec<usize>, Vec<usize>) {
    let mut train = Vec::new();
    let mut test = Vec::new();
    for (index, window) in windows.iter().enumerate() {
        if window.appliance_index == test_appliance {
            test.push(index);
        } else {
            train.push(index);
        }
    }
    (train, test)
}

/// Trains an ensemble on the selected feature rows.
pub fn train_on_rows(
    features: &FeatureMatrix,
    rows: &[usize],
    labels: &[bool],
    config: &TrainConfig,
) -> Result<AdaBoostModel, EvalError> {
    let matrix =
        ColumnMatrix::from_rows(features.width(), rows.iter().map(|&r| features.row(r)));
    let signed: Vec<i8> = rows.iter().map(|&r| if labels[r] { 1 } else { -1 }).collect();
    let report = train_adaboost(&matrix, &signed, config, &features.schema.fingerprint())?;
    Ok(report.model)
}

/// Scores the selected feature rows.
pub fn score_rows(model: &AdaBoostModel, features: &FeatureMatrix, rows: &[usize]) -> Vec<f64> {
    rows.iter().map(|&r| model.score(features.row(r))).collect()
}

/// Alarm threshold picked on a fold's training scores, applied to its test
/// appliance.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct ThresholdChoice {
    pub threshold: f64,
    /// Cost of the threshold on the scores it was selected from.
    pub train_cost: f64,
    pub test_missed: usize,
    pub test_false_alarms: usize,
    pub test_cost: f64,
}

/// Outcome of one fold: the held-out appliance's scores and ROC.
#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct FoldResult {
    pub fold: Fold,
    pub auc: f64,
    pub roc: Vec<RocPoint>,
    pub test_scores: Vec<f64>,
    pub test_labels: Vec<bool>,
    pub rounds_kept: usize,
    /// Present when the experiment carries a cost model.
    pub threshold: Option<ThresholdChoice>,
}

/// Runs one fold: train without the appliance, score it, sweep the ROC.
/// With a cost model, also selects the alarm threshold on the training
/// scores and reports how it fares on the held-out appliance.
pub fn run_fold(
    features: &FeatureMatrix,
    windows: &[LabeledWindow],
    alarm_id: &str,
    fold: &Fold,
    config: &TrainConfig,
    cost: Option<&CostModel>,
) -> Result<FoldResult, EvalError> {
    let labels = labels_for(windows, alarm_id)?;
    let (train_rows, test_rows) = fold_partition(windows, fold.test_appliance);
    let model = train_on_rows(features, &train_rows, &labels, config).map_err(|e| match e {
        EvalError::Model(ModelError::SingleClass) => EvalError::TrainingSingleClass {
            alarm_id: alarm_id.to_owned(),
            appliance_id: fold.appliance_id.clone(),
        },
        other => other,
    })?;
    let test_scores = score_rows(&model, features, &test_rows);
    let test_labels: Vec<bool> = test_rows.iter().map(|&r| labels[r]).collect();
    let roc = roc_curve(&test_scores, &test_labels)?;
    let threshold = match cost {
        None => None,
        Some(cost) => {
            let train_scores = score_rows(&model, features, &train_rows);
            let train_labels: Vec<bool> = train_rows.iter().map(|&r| labels[r]).collect();
            let (threshold, train_cost) =
                select_threshold(&train_scores, &train_labels, cost)?;
            let (test_missed, test_false_alarms) =
                error_counts(&test_scores, &test_labels, threshold);
            Some(ThresholdChoice {
                threshold,
                train_cost,
                test_missed,
                test_false_alarms,
                test_cost: expected_cost(&test_scores, &test_labels, threshold, cost),
            })
        }
    };
    Ok(FoldResult {
        fold: fold.clone(),
        auc: auc(&roc),
        roc,
        test_scores,
        test_labels,
        rounds_kept: model.rounds.len(),
        threshold,
    })
}

// ---------------------------------------------------------------------------
// Whole experiments
// ---------------------------------------------------------------------------

/// Settings of a full cross-validated comparison.
#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct ExperimentConfig {
    pub window: WindowSpec,
    pub feature_sets: Vec<FeatureSet>,
    pub train: TrainConfig,
    /// Enables per-fold alarm threshold selection when present.
    pub cost: Option<CostModel>,
}

impl Default for ExperimentConfig {
    fn default() -> Self {
        ExperimentConfig {
            window: WindowSpec::default(),
            feature_sets: FeatureSet::ALL.to_vec(),
            train: TrainConfig::default(),
            cost: None,
        }
    }
}

/// Cross-validated results of one (alarm type, feature set) pair.
#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct AlarmEvaluation {
    pub alarm_id: String,
    pub feature_set: FeatureSet,
    pub folds: Vec<FoldResult>,
    /// Arithmetic mean of the per-fold areas.
    pub mean_auc: f64,
    pub mean_roc: Vec<MeanRocPoint>,
}

impl AlarmEvaluation {
    /// Held-out scores and labels pooled across folds, fold order.
    pub fn pooled(&self) -> (Vec<f64>, Vec<bool>) {
        let mut scores = Vec::new();
        let mut labels = Vec::new();
        for fold in &self.folds {
            scores.extend_from_slice(&fold.test_scores);
            labels.extend_from_slice(&fold.test_labels);
        }
        (scores, labels)
    }
}

/// Full comparison: every requested feature set against every alarm type.
#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct ExperimentReport {
    pub evaluations: Vec<AlarmEvaluation>,
    pub window_count: usize,
    pub instants_per_appliance: usize,
}

/// Enumerates windows, extracts each feature set once, and cross-validates
/// every (alarm, feature set) pair. Folds run in parallel; results are
/// ordered feature set outer, alarm inner.
pub fn run_experiment(
    dataset: &CohortDataset,
    config: &ExperimentConfig,
    alarm_ids: &[String],
) -> Result<ExperimentReport, EvalError> {
    let enumeration = enumerate_windows(dataset, &config.window);
    if enumeration.windows.is_empty() {
        return Err(EvalError::NoWindows);
    }
    let mut windows = enumeration.windows;
    apply_labels(&mut windows, &config.window, &dataset.alarms, alarm_ids);
    let extractor = crate::features::FeatureExtractor::new(dataset, &config.window)?;

    let mut evaluations = Vec::new();
    for &set in &config.feature_sets {
        let features = extractor.extract(&windows, set)?;
        for alarm_id in alarm_ids {
            let folds = make_folds(&windows, alarm_id)?;
            let results: Vec<FoldResult> = folds
                .par_iter()
                .map(|fold| {
                    run_fold(&features, &windows, alarm_id, fold, &config.train, config.cost.as_ref())
                })
                .collect::<Result<_, _>>()?;
            let mean_auc =
                results.iter().map(|r| r.auc).sum::<f64>() / results.len() as f64;
            let curves: Vec<Vec<RocPoint>> = results.iter().map(|r| r.roc.clone()).collect();
            let mean_roc = average_roc(&curves)?;
            evaluations.push(AlarmEvaluation {
                alarm_id: alarm_id.clone(),
                feature_set: set,
                folds: results,
                mean_auc,
                mean_roc,
            });
        }
    }
    Ok(ExperimentReport {
        evaluations,
        window_count: windows.len(),
        instants_per_appliance: windows.len() / dataset.appliances.len(),
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;
    use std::collections::BTreeMap;

    /// Definitional Mann-Whitney statistic: fraction of (positive,
    /// negative) pairs where the positive wins, ties counting half.
    fn mann_whitney(scores: &[f64], labels: &[bool]) -> f64 {
        let mut wins = 0.0;
        let mut pairs = 0.0;
        for (i, &li) in labels.iter().enumerate() {
            if !li {
                continue;
            }
            for (j, &lj) in labels.iter().enumerate() {
                if lj {
                    continue;
                }
                pairs += 1.0;
                if scores[i] > scores[j] {
                    wins += 1.0;
                } else if scores[i] == scores[j] {
                    wins += 0.5;
                }
            }
        }
        wins / pairs
    }

    #[test]
    fn roc_sweep_on_a_worked_example() {
        let scores = [0.9, 0.8, 0.7, 0.6];
        let labels = [true, false, true, false];
        let points = roc_curve(&scores, &labels).unwrap();
        assert_eq!(points.len(), 5);
        assert_eq!((points[0].fpr, points[0].tpr), (0.0, 0.0));
        assert_eq!(points[0].threshold, f64::INFINITY);
        assert_eq!((points[1].fpr, points[1].tpr), (0.0, 0.5));
        assert_eq!((points[2].fpr, points[2].tpr), (0.5, 0.5));
        assert_eq!((points[3].fpr, points[3].tpr), (0.5, 1.0));
        assert_eq!((points[4].fpr, points[4].tpr), (1.0, 1.0));
        assert_eq!(auc(&points), 0.75);
        assert_eq!(mann_whitney(&scores, &labels), 0.75);
    }

    #[test]
    fn tied_scores_move_together() {
        let scores = [0.5, 0.5, 0.5, 0.5];
        let labels = [true, false, true, false];
        let points = roc_curve(&scores, &labels).unwrap();
        // One tie group: straight diagonal, area one half.
        assert_eq!(points.len(), 2);
        assert_eq!(auc(&points), 0.5);
    }

    #[test]
    fn degenerate_inputs_are_rejected() {
        assert!(matches!(roc_curve(&[], &[]), Err(EvalError::EmptyInput)));
        assert!(matches!(
            roc_curve(&[0.5, 0.4], &[true, true]),
            Err(EvalError::SingleClass)
        ));
        assert!(matches!(
            roc_curve(&[0.5], &[true, false]),
            Err(EvalError::LengthMismatch { .. })
        ));
        assert!(matches!(
            roc_curve(&[f64::NAN, 0.2], &[true, false]),
            Err(EvalError::NonFiniteScore { index: 0 })
        ));
    }

    #[test]
    fn averaging_a_perfect_and_a_chance_curve() {
        let perfect = roc_curve(&[1.0, 0.9, 0.2, 0.1], &[true, true, false, false]).unwrap();
        let chance = roc_curve(&[0.5, 0.5, 0.5, 0.5], &[true, false, true, false]).unwrap();
        let averaged = average_roc(&[perfect, chance]).unwrap();
        assert_eq!(averaged.len(), 101);
        for point in &averaged {
            // The perfect curve contributes 1 everywhere on the grid; the
            // chance curve contributes its own false-positive rate.
            let expected = (1.0 + point.fpr) / 2.0;
            assert!(
                (point.tpr - expected).abs() < 1e-12,
                "at fpr {} expected {expected}, got {}",
                point.fpr,
                point.tpr
            );
        }
    }

    #[test]
    fn cost_accounting_is_exact_on_integer_costs() {
        let scores = [0.9, 0.8, 0.4, 0.3, 0.2];
        let labels = [true, false, true, false, true];
        // Threshold 0.5: misses the positives at 0.4 and 0.2, false-alarms
        // on the negative at 0.8.
        assert_eq!(error_counts(&scores, &labels, 0.5), (2, 1));
        let cost = CostModel { missed_fault: 10.0, false_alarm: 1.0 };
        assert_eq!(expected_cost(&scores, &labels, 0.5, &cost), 21.0);
        // Strictness: a positive exactly at the threshold is missed.
        assert_eq!(error_counts(&scores, &labels, 0.9), (3, 0));
    }

    #[test]
    fn threshold_selection_finds_the_cheapest_cut() {
        let scores = [0.2, 0.8];
        let labels = [false, true];
        let cost = CostModel { missed_fault: 5.0, false_alarm: 1.0 };
        let (threshold, total) = select_threshold(&scores, &labels, &cost).unwrap();
        assert_eq!(threshold, 0.5);
        assert_eq!(total, 0.0);
    }

    #[test]
    fn threshold_ties_resolve_to_the_largest() {
        // Every candidate errs exactly once at equal cost; the selector
        // must return the largest candidate, 1.0.
        let scores = [0.3, 0.7];
        let labels = [true, false];
        let cost = CostModel { missed_fault: 1.0, false_alarm: 1.0 };
        let (threshold, total) = select_threshold(&scores, &labels, &cost).unwrap();
        assert_eq!(threshold, 1.0);
        assert_eq!(total, 1.0);
    }

    #[test]
    fn threshold_selection_needs_both_classes() {
        assert!(matches!(
            select_threshold(&[0.1, 0.9], &[true, true], &CostModel::default()),
            Err(EvalError::SingleClass)
        ));
    }

    fn window_stub(appliance: usize, labels: &[(&str, bool)]) -> LabeledWindow {
        let mut map = BTreeMap::new();
        for (alarm, label) in labels {
            map.insert((*alarm).to_owned(), *label);
        }
        LabeledWindow {
            appliance_index: appliance,
            appliance_id: format!("ap{appliance:02}"),
            t: crate::time::Timestamp::from_minutes(0),
            labels: map,
        }
    }

    #[test]
    fn folds_are_the_appliances_with_positive_windows() {
        // Mirrors a fleet of 17 where one alarm type fires on six
        // appliances and another on all of them.
        let rare_positive = [2usize, 3, 5, 8, 13, 16];
        let mut windows = Vec::new();
        for appliance in 0..17 {
            let rare = rare_positive.contains(&appliance);
            windows.push(window_stub(appliance, &[("rare", rare), ("common", true)]));
            windows.push(window_stub(appliance, &[("rare", false), ("common", false)]));
        }
        let rare_folds = make_folds(&windows, "rare").unwrap();
        assert_eq!(rare_folds.len(), 6);
        assert_eq!(
            rare_folds.iter().map(|f| f.test_appliance).collect::<Vec<_>>(),
            rare_positive
        );
        let common_folds = make_folds(&windows, "common").unwrap();
        assert_eq!(common_folds.len(), 17);
        assert!(matches!(
            make_folds(&windows, "never"),
            Err(EvalError::MissingLabel { .. })
        ));
        let unlabeled: Vec<LabeledWindow> =
            (0..3).map(|a| window_stub(a, &[("quiet", false)])).collect();
        assert!(matches!(
            make_folds(&unlabeled, "quiet"),
            Err(EvalError::NoFolds { .. })
        ));
    }

    #[test]
    fn fold_partition_splits_by_appliance() {
        let windows: Vec<LabeledWindow> = [0, 1, 2, 0, 1, 2]
            .iter()
            .map(|&a| window_stub(a, &[]))
            .collect();
        let (train, test) = fold_partition(&windows, 1);
        assert_eq!(test, vec![1, 4]);
        assert_eq!(train, vec![0, 2, 3, 5]);
    }

    proptest! {
        /// Trapezoidal AUC equals the Mann-Whitney pair statistic, ties and
        /// all. Scores come from a tiny grid to force heavy tying.
        #[test]
        fn auc_is_the_mann_whitney_statistic(
            data in proptest::collection::vec((0u8..5, prop::bool::ANY), 2..40)
        ) {
            let scores: Vec<f64> = data.iter().map(|d| d.0 as f64 / 4.0).collect();
            let labels: Vec<bool> = data.iter().map(|d| d.1).collect();
            prop_assume!(labels.iter().any(|&l| l) && labels.iter().any(|&l| !l));
            let points = roc_curve(&scores, &labels).unwrap();
            let area = auc(&points);
            let oracle = mann_whitney(&scores, &labels);
            prop_assert!((area - oracle).abs() <= 1e-12, "auc {} vs oracle {}", area, oracle);
        }

        /// Negating every score mirrors the ROC across the diagonal.
        #[test]
        fn reversed_scores_flip_auc(
            data in proptest::collection::vec((0u8..6, prop::bool::ANY), 2..40)
        ) {
            let scores: Vec<f64> = data.iter().map(|d| d.0 as f64 / 5.0).collect();
            let labels: Vec<bool> = data.iter().map(|d| d.1).collect();
            prop_assume!(labels.iter().any(|&l| l) && labels.iter().any(|&l| !l));
            let forward = auc(&roc_curve(&scores, &labels).unwrap());
            let reversed: Vec<f64> = scores.iter().map(|s| 1.0 - s).collect();
            let backward = auc(&roc_curve(&reversed, &labels).unwrap());
            prop_assert!((forward + backward - 1.0).abs() <= 1e-12);
        }

        /// The selected threshold achieves the exhaustive minimum cost over
        /// the full candidate set.
        #[test]
        fn selected_threshold_is_exhaustively_optimal(
            data in proptest::collection::vec((0u8..8, prop::bool::ANY), 2..10),
            missed_cost in 1u8..20,
            alarm_cost in 1u8..20
        ) {
            let scores: Vec<f64> = data.iter().map(|d| d.0 as f64 / 7.0).collect();
            let labels: Vec<bool> = data.iter().map(|d| d.1).collect();
            prop_assume!(labels.iter().any(|&l| l) && labels.iter().any(|&l| !l));
            let cost = CostModel {
                missed_fault: missed_cost as f64,
                false_alarm: alarm_cost as f64,
            };
            let (threshold, total) = select_threshold(&scores, &labels, &cost).unwrap();
            prop_assert_eq!(expected_cost(&scores, &labels, threshold, &cost), total);

            // Every candidate, definitionally recomputed.
            let mut sorted = scores.clone();
            sorted.sort_by(f64::total_cmp);
            sorted.dedup();
            let mut candidates = vec![0.0, 1.0];
            candidates.extend(sorted.windows(2).map(|p| (p[0] + p[1]) / 2.0));
            for candidate in candidates {
                let candidate_cost = expected_cost(&scores, &labels, candidate, &cost);
                prop_assert!(
                    candidate_cost > total
                        || (candidate_cost == total && candidate <= threshold),
                    "candidate {} at cost {} beats selected {} at {}",
                    candidate, candidate_cost, threshold, total
                );
            }
        }
    }

    #[test]
    fn experiment_on_a_faulty_cohort_ranks_the_fault_windows_high() {
        use crate::simulate::{generate_cohort, FaultMode, FaultScript, SimConfig};
        use crate::time::{Duration, Timestamp, MINUTES_PER_DAY};

        let mut sim = SimConfig::new(5, 3, 80);
        sim.noise_std = 0.3;
        for (appliance, day) in [(0usize, 40i64), (1, 65)] {
            sim.faults.push(FaultScript {
                appliance,
                alarm_id: "degrade".into(),
                fault_time: Timestamp::from_minutes(day * MINUTES_PER_DAY),
                lead: Duration::from_days(10),
                affected_sensors: vec![],
                mode: FaultMode::Decorrelate,
                severity: 0.85,
            });
        }
        let dataset = generate_cohort(&sim).unwrap();
        let config = ExperimentConfig {
            window: WindowSpec {
                telemetry_window: Duration::from_days(7),
                action_window: Duration::from_days(3),
                forecast_window: Duration::from_days(7),
                step: Duration::from_days(1),
            },
            feature_sets: vec![FeatureSet::CohortPearson],
            train: TrainConfig { n_rounds: 25, ..TrainConfig::default() },
            cost: Some(CostModel::default()),
        };
        let report =
            run_experiment(&dataset, &config, &["degrade".to_owned()]).unwrap();
        assert_eq!(report.evaluations.len(), 1);
        let evaluation = &report.evaluations[0];
        assert_eq!(evaluation.folds.len(), 2);
        assert!(
            evaluation.mean_auc > 0.8,
            "decorrelation faults should be separable: mean AUC {}",
            evaluation.mean_auc
        );
        for fold in &evaluation.folds {
            let choice = fold.threshold.as_ref().expect("cost model given, so a cut is chosen");
            assert!(choice.threshold.is_finite());
            assert!(choice.test_cost >= 0.0);
        }

        // Re-running the whole experiment must reproduce the numbers
        // exactly; nothing in the pipeline is allowed to be nondeterministic.
        let again = run_experiment(&dataset, &config, &["degrade".to_owned()]).unwrap();
        assert_eq!(again.evaluations[0].mean_auc.to_bits(), evaluation.mean_auc.to_bits());
        for (a, b) in again.evaluations[0].folds.iter().zip(&evaluation.folds) {
            assert_eq!(a.auc.to_bits(), b.auc.to_bits());
        }
    }
}
