//! Weak learners and the boosted ensemble built from them.
//!
//! The weak learner is a depth-limited binary decision tree trained on
//! weighted samples with the Gini criterion. Thresholds sit at midpoints
//! between consecutive distinct feature values; a sample routes left when
//! its value is less than or equal to the threshold. All tie-breaks are
//! deterministic: among equally good splits the lowest feature index wins,
//! then the lowest threshold, and a leaf whose weighted classes balance
//! exactly predicts the negative class.
//!
//! The ensemble is discrete two-class AdaBoost. Each round fits a tree to
//! the current weights, measures its weighted error, converts it to a vote
//! weight, and re-weights samples toward the mistakes. A round with zero
//! error is kept and training stops (nothing left to re-weight); a round no
//! better than chance is discarded and training stops. Scores map the signed
//! vote margin into `[0, 1]`.

use serde::{Deserialize, Serialize};
use std::io;
use thiserror::Error;

/// Shape constraints for a single tree.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct TreeParams {
    /// Number of split levels; 1 is a decision stump.
    pub max_depth: usize,
    /// Minimum samples (by count, not weight) each side of a split keeps.
    pub min_samples_leaf: usize,
}

impl Default for TreeParams {
    fn default() -> Self {
        TreeParams { max_depth: 3, min_samples_leaf: 1 }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum TreeNode {
    Split { feature: usize, threshold: f64, left: usize, right: usize },
    Leaf { class: i8 },
}

/// Binary classification tree over dense feature rows. Node 0 is the root.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct DecisionTree {
    nodes: Vec<TreeNode>,
}

impl DecisionTree {
    pub fn nodes(&self) -> &[TreeNode] {
        &self.nodes
    }

    /// Predicted class in {-1, +1}.
    pub fn predict(&self, x: &[f64]) -> i8 {
        let mut at = 0;
        loop {
            match self.nodes[at] {
                TreeNode::Leaf { class } => return class,
                TreeNode::Split { feature, threshold, left, right } => {
                    at = if x[feature] <= threshold { left } else { right };
                }
            }
        }
    }
}

/// Column-major training matrix; splits scan one feature at a time.
#[derive(Clone, Debug)]
pub struct ColumnMatrix {
    columns: Vec<Vec<f64>>,
    n_samples: usize,
}

impl ColumnMatrix {
    pub fn from_rows<'a>(width: usize, rows: impl Iterator<Item = &'a [f64]>) -> Self {
        let mut columns = vec![Vec::new(); width];
        let mut n_samples = 0;
        for row in rows {
            assert_eq!(row.len(), width, "row width diverges from matrix width");
            for (column, value) in columns.iter_mut().zip(row) {
                column.push(*value);
            }
            n_samples += 1;
        }
        ColumnMatrix { columns, n_samples }
    }

    pub fn n_samples(&self) -> usize {
        self.n_samples
    }

    pub fn n_features(&self) -> usize {
        self.columns.len()
    }

    pub fn value(&self, sample: usize, feature: usize) -> f64 {
        self.columns[feature][sample]
    }

    /// Copies one sample back out as a dense row.
    pub fn row(&self, sample: usize) -> Vec<f64> {
        self.columns.iter().map(|c| c[sample]).collect()
    }
}

/// Fits trees to one matrix under changing sample weights.
///
/// Construction sorts every feature column once; each boosting round reuses
/// the sorted order instead of re-sorting.
pub struct TreeTrainer<'a> {
    matrix: &'a ColumnMatrix,
    /// Per feature: sample indices ordered by value, ties by index.
    sorted: Vec<Vec<u32>>,
}

struct SplitChoice {
    score: f64,
    feature: usize,
    threshold: f64,
}

impl<'a> TreeTrainer<'a> {
    pub fn new(matrix: &'a ColumnMatrix) -> Self {
        assert!(matrix.n_samples() <= u32::MAX as usize, "sample index must fit in u32");
        let sorted = matrix
            .columns
            .iter()
            .map(|column| {
                let mut order: Vec<u32> = (0..matrix.n_samples() as u32).collect();
                order.sort_by(|&a, &b| {
                    column[a as usize].total_cmp(&column[b as usize]).then(a.cmp(&b))
                });
                order
            })
            .collect();
        TreeTrainer { matrix, sorted }
    }

    /// Trains one tree on the given labels and weights.
    pub fn fit(&self, labels: &[i8], weights: &[f64], params: &TreeParams) -> DecisionTree {
        assert_eq!(labels.len(), self.matrix.n_samples());
        assert_eq!(weights.len(), labels.len());
        let mut nodes = Vec::new();
        let members = vec![true; labels.len()];
        self.build(labels, weights, params, &members, labels.len(), 0, &mut nodes);
        DecisionTree { nodes }
    }

    #[allow(clippy::too_many_arguments)]
    fn build(
        &self,
        labels: &[i8],
        weights: &[f64],
        params: &TreeParams,
        members: &[bool],
        member_count: usize,
        depth: usize,
        nodes: &mut Vec<TreeNode>,
    ) -> usize {
        let (mut w_pos, mut w_neg) = (0.0, 0.0);
        let (mut n_pos, mut n_neg) = (0usize, 0usize);
        for (i, &is_member) in members.iter().enumerate() {
            if !is_member {
                continue;
            }
            if labels[i] > 0 {
                w_pos += weights[i];
                n_pos += 1;
            } else {
                w_neg += weights[i];
                n_neg += 1;
            }
        }
        let pure = n_pos == 0 || n_neg == 0;
        let splittable = depth < params.max_depth
            && !pure
            && member_count >= 2 * params.min_samples_leaf;
        let choice = if splittable {
            self.best_split(labels, weights, members, w_pos, w_neg, params.min_samples_leaf)
        } else {
            None
        };
        match choice {
            None => {
                // Exact weight balance falls back to the negative class so a
                // retrained tree never depends on summation order.
                let class = if w_pos > w_neg { 1 } else { -1 };
                nodes.push(TreeNode::Leaf { class });
                nodes.len() - 1
            }
            Some(choice) => {
                let index = nodes.len();
                nodes.push(TreeNode::Leaf { class: 0 });
                let column = &self.matrix.columns[choice.feature];
                let mut left_members = vec![false; members.len()];
                let mut right_members = vec![false; members.len()];
                let mut left_count = 0;
                for (i, &is_member) in members.iter().enumerate() {
                    if !is_member {
                        continue;
                    }
                    if column[i] <= choice.threshold {
                        left_members[i] = true;
                        left_count += 1;
                    } else {
                        right_members[i] = true;
                    }
                }
                let left = self.build(
                    labels, weights, params, &left_members, left_count, depth + 1, nodes,
                );
                let right = self.build(
                    labels,
                    weights,
                    params,
                    &right_members,
                    member_count - left_count,
                    depth + 1,
                    nodes,
                );
                nodes[index] = TreeNode::Split {
                    feature: choice.feature,
                    threshold: choice.threshold,
                    left,
                    right,
                };
                index
            }
        }
    }

    /// Minimum weighted child Gini over all (feature, midpoint) candidates.
    ///
    /// An impure node splits even when no candidate improves on the parent
    /// impurity; deeper levels can still untangle the classes (consider the
    /// two-feature XOR layout, where every root split looks worthless).
    fn best_split(
        &self,
        labels: &[i8],
        weights: &[f64],
        members: &[bool],
        w_pos: f64,
        w_neg: f64,
        min_leaf: usize,
    ) -> Option<SplitChoice> {
        let member_count = members.iter().filter(|&&m| m).count();
        let mut best: Option<SplitChoice> = None;
        for (feature, order) in self.sorted.iter().enumerate() {
            let column = &self.matrix.columns[feature];
            let mut prev_value: Option<f64> = None;
            let (mut left_pos, mut left_neg) = (0.0, 0.0);
            let mut left_count = 0usize;
            for &raw in order {
                let i = raw as usize;
                if !members[i] {
                    continue;
                }
                let value = column[i];
                if let Some(prev) = prev_value {
                    if value != prev
                        && left_count >= min_leaf
                        && member_count - left_count >= min_leaf
                    {
                        let score = gini_term(left_pos, left_neg)
                            + gini_term(w_pos - left_pos, w_neg - left_neg);
                        if best.as_ref().is_none_or(|b| score < b.score) {
                            best = Some(SplitChoice {
                                score,
                                feature,
                                threshold: midpoint(prev, value),
                            });
                        }
                    }
                }
                if labels[i] > 0 {
                    left_pos += weights[i];
                } else {
                    left_neg += weights[i];
                }
                left_count += 1;
                prev_value = Some(value);
            }
        }
        best
    }
}

/// Weight-scaled Gini contribution of one child: `2 * wp * wn / (wp + wn)`
/// up to the constant factor, which cancels in comparisons.
fn gini_term(w_pos: f64, w_neg: f64) -> f64 {
    let total = w_pos + w_neg;
    if total > 0.0 {
        w_pos * w_neg / total
    } else {
        0.0
    }
}

/// Midpoint threshold that is guaranteed to separate `a < b`: it stays
/// strictly below `b`, falling back to `a` itself when rounding would land
/// on `b`.
fn midpoint(a: f64, b: f64) -> f64 {
    let mut t = (a + b) / 2.0;
    if !t.is_finite() {
        t = a / 2.0 + b / 2.0;
    }
    if t < b {
        t
    } else {
        a
    }
}

// ---------------------------------------------------------------------------
// AdaBoost
// ---------------------------------------------------------------------------

/// Ensemble training settings.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct TrainConfig {
    /// Upper bound on boosting rounds; training may stop earlier.
    pub n_rounds: usize,
    pub tree: TreeParams,
    /// Weighted errors are clamped into `[clamp, 1 - clamp]` before the
    /// vote weight is computed, so a perfect round gets a large finite vote.
    pub epsilon_clamp: f64,
    /// Initial weight multiplier for positive samples; 1 keeps the start
    /// uniform.
    pub positive_weight: f64,
}

impl Default for TrainConfig {
    fn default() -> Self {
        TrainConfig {
            n_rounds: 100,
            tree: TreeParams::default(),
            epsilon_clamp: 1e-10,
            positive_weight: 1.0,
        }
    }
}

/// One kept boosting round.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct BoostRound {
    pub tree: DecisionTree,
    pub alpha: f64,
}

/// Trained ensemble, bound to the feature schema it was fitted on.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct AdaBoostModel {
    pub rounds: Vec<BoostRound>,
    pub schema_fingerprint: String,
    pub config: TrainConfig,
}

/// Per-round training diagnostics, including discarded rounds.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct RoundTrace {
    pub round: usize,
    pub weighted_error: f64,
    pub alpha: f64,
    pub kept: bool,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct TrainReport {
    pub model: AdaBoostModel,
    pub trace: Vec<RoundTrace>,
}

#[derive(Debug, Error)]
pub enum ModelError {
    #[error("training data holds a single class; need both labels")]
    SingleClass,
    #[error("label at sample {index} is {value}; labels must be -1 or +1")]
    BadLabel { index: usize, value: i8 },
    #[error("labels ({labels}) and matrix samples ({samples}) diverge")]
    LengthMismatch { labels: usize, samples: usize },
    #[error(
        "the first weak learner was no better than chance, leaving an empty \
         ensemble; the features carry no usable signal"
    )]
    EmptyEnsemble,
    #[error("feature schema fingerprint {got} does not match the model's {expected}")]
    SchemaMismatch { expected: String, got: String },
    #[error("model serialization failed: {0}")]
    Serialization(#[from] serde_json::Error),
    #[error(transparent)]
    Io(#[from] io::Error),
}

/// Trains a discrete AdaBoost ensemble of Gini trees.
///
/// Sample weights start uniform (optionally tilted toward positives),
/// every round renormalizes them to sum 1, and the loop stops early on a
/// perfect round (kept) or a chance-level round (discarded). Training fails
/// only when no round at all survives.
pub fn train_adaboost(
    matrix: &ColumnMatrix,
    labels: &[i8],
    config: &TrainConfig,
    schema_fingerprint: &str,
) -> Result<TrainReport, ModelError> {
    if labels.len() != matrix.n_samples() {
        return Err(ModelError::LengthMismatch {
            labels: labels.len(),
            samples: matrix.n_samples(),
        });
    }
    if let Some((index, &value)) = labels.iter().enumerate().find(|(_, &v)| v != 1 && v != -1) {
        return Err(ModelError::BadLabel { index, value });
    }
    if labels.iter().all(|&l| l > 0) || labels.iter().all(|&l| l < 0) {
        return Err(ModelError::SingleClass);
    }

    let mut weights: Vec<f64> = labels
        .iter()
        .map(|&l| if l > 0 { config.positive_weight } else { 1.0 })
        .collect();
    normalize(&mut weights);

    let trainer = TreeTrainer::new(matrix);
    let mut rounds = Vec::new();
    let mut trace = Vec::new();
    for round in 0..config.n_rounds {
        let tree = trainer.fit(labels, &weights, &config.tree);
        let predictions: Vec<i8> =
            (0..labels.len()).map(|i| tree.predict(&matrix.row(i))).collect();
        let epsilon: f64 = weights
            .iter()
            .zip(labels)
            .zip(&predictions)
            .filter(|((_, &y), &h)| h != y)
            .map(|((w, _), _)| w)
            .sum();
        let clamped = epsilon.clamp(config.epsilon_clamp, 1.0 - config.epsilon_clamp);
        let alpha = 0.5 * ((1.0 - clamped) / clamped).ln();
        if epsilon >= 0.5 {
            trace.push(RoundTrace { round, weighted_error: epsilon, alpha, kept: false });
            break;
        }
        trace.push(RoundTrace { round, weighted_error: epsilon, alpha, kept: true });
        rounds.push(BoostRound { tree, alpha });
        if epsilon == 0.0 {
            break;
        }
        for ((weight, &y), &h) in weights.iter_mut().zip(labels).zip(&predictions) {
            *weight *= (-alpha * f64::from(y) * f64::from(h)).exp();
        }
        normalize(&mut weights);
    }

    if rounds.is_empty() {
        return Err(ModelError::EmptyEnsemble);
    }
    Ok(TrainReport {
        model: AdaBoostModel {
            rounds,
            schema_fingerprint: schema_fingerprint.to_owned(),
            config: config.clone(),
        },
        trace,
    })
}

fn normalize(weights: &mut [f64]) {
    let total: f64 = weights.iter().sum();
    for w in weights.iter_mut() {
        *w /= total;
    }
}

impl AdaBoostModel {
    /// Vote-weighted mean prediction in `[-1, 1]`.
    pub fn raw_margin(&self, x: &[f64]) -> f64 {
        let vote: f64 = self
            .rounds
            .iter()
            .map(|r| r.alpha * f64::from(r.tree.predict(x)))
            .sum();
        let total: f64 = self.rounds.iter().map(|r| r.alpha).sum();
        vote / total
    }

    /// Margin mapped into `[0, 1]`; 0.5 is the ensemble's neutral point.
    pub fn score(&self, x: &[f64]) -> f64 {
        (self.raw_margin(x) + 1.0) / 2.0
    }

    /// Scores a schema-carrying vector, refusing mismatched schemas.
    pub fn score_vector(&self, v: &crate::features::FeatureVector) -> Result<f64, ModelError> {
        let got = v.schema.fingerprint();
        if got != self.schema_fingerprint {
            return Err(ModelError::SchemaMismatch {
                expected: self.schema_fingerprint.clone(),
                got,
            });
        }
        Ok(self.score(&v.values))
    }

    /// Positive exactly when the score strictly exceeds the threshold.
    pub fn classify(&self, x: &[f64], threshold: f64) -> bool {
        self.score(x) > threshold
    }

    pub fn save(&self, writer: impl io::Write) -> Result<(), ModelError> {
        serde_json::to_writer(writer, self)?;
        Ok(())
    }

    pub fn load(reader: impl io::Read) -> Result<Self, ModelError> {
        Ok(serde_json::from_reader(reader)?)
    }
}
