//! Feature extraction: cohort dissimilarity vectors and single-appliance
//! baseline statistics.
//!
//! The cohort features of a window compare the appliance's telemetry slice
//! against the concurrent slice of the same sensor on every peer. Each
//! comparison yields a dissimilarity `d = 1 - r` where `r` is a correlation
//! coefficient, so `d` ranges over `[0, 2]`: 0 for perfectly parallel
//! behavior, 1 for unrelated behavior, 2 for mirrored behavior. Correlation
//! ignores per-appliance offsets and positive scale factors, which is what
//! makes the features transfer across appliances without calibration.
//!
//! The baseline features summarize one appliance in isolation (per-sensor
//! order statistics and moments plus cross-sensor covariances). They are the
//! comparison point the cohort features are measured against: informative
//! while absolute levels are stable, brittle when the operating point moves.
//!
//! Feature schemas are positional: the p-th peer of appliance A is a
//! different machine than the p-th peer of appliance B. Peers are ordered by
//! ascending appliance index with the appliance itself removed.

use crate::telemetry::CohortDataset;
use crate::time::{Duration, Timestamp};
use crate::windowing::{LabeledWindow, WindowSpec};
use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};
use std::collections::BTreeSet;
use std::fmt;
use std::io;
use std::str::FromStr;
use std::sync::Arc;
use thiserror::Error;

/// Correlation measure used for cohort dissimilarities.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub enum Measure {
    Pearson,
    Spearman,
    /// Pearson block followed by the Spearman block.
    Both,
}

/// The five feature representations evaluated against each other.
#[derive(Clone, Copy, Debug, PartialEq, Eq, PartialOrd, Ord, Serialize, Deserialize)]
pub enum FeatureSet {
    Baseline,
    CohortPearson,
    CohortSpearman,
    CohortBoth,
    /// Baseline block followed by both cohort blocks.
    Combined,
}

impl FeatureSet {
    pub const ALL: [FeatureSet; 5] = [
        FeatureSet::Baseline,
        FeatureSet::CohortPearson,
        FeatureSet::CohortSpearman,
        FeatureSet::CohortBoth,
        FeatureSet::Combined,
    ];

    /// Stable lowercase key used in configuration files.
    pub fn key(&self) -> &'static str {
        match self {
            FeatureSet::Baseline => "baseline",
            FeatureSet::CohortPearson => "cohort_pearson",
            FeatureSet::CohortSpearman => "cohort_spearman",
            FeatureSet::CohortBoth => "cohort_ps",
            FeatureSet::Combined => "comb",
        }
    }
}

impl fmt::Display for FeatureSet {
    /// Report row label for this feature set.
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let label = match self {
            FeatureSet::Baseline => "Baseline",
            FeatureSet::CohortPearson => "Cohort_Pearson",
            FeatureSet::CohortSpearman => "Cohort_Spearman",
            FeatureSet::CohortBoth => "Cohort_P&S",
            FeatureSet::Combined => "Comb",
        };
        f.write_str(label)
    }
}

impl FromStr for FeatureSet {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        FeatureSet::ALL
            .into_iter()
            .find(|set| set.key() == s)
            .ok_or_else(|| {
                let keys: Vec<&str> = FeatureSet::ALL.iter().map(|s| s.key()).collect();
                format!("unknown feature set {s:?}; expected one of {}", keys.join(", "))
            })
    }
}

/// Ordered, unique feature names shared by every row of a matrix.
#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct FeatureSchema {
    names: Vec<String>,
}

impl FeatureSchema {
    /// Panics on duplicate names; schema construction is internal and a
    /// collision is a naming bug, not an input problem.
    pub fn new(names: Vec<String>) -> Self {
        let unique: BTreeSet<&String> = names.iter().collect();
        assert_eq!(unique.len(), names.len(), "feature schema has duplicate names");
        FeatureSchema { names }
    }

    pub fn names(&self) -> &[String] {
        &self.names
    }

    pub fn len(&self) -> usize {
        self.names.len()
    }

    pub fn is_empty(&self) -> bool {
        self.names.is_empty()
    }

    /// Hex SHA-256 of the newline-joined names; models refuse vectors whose
    /// schema fingerprint differs from the one they were trained on.
    pub fn fingerprint(&self) -> String {
        let mut hasher = Sha256::new();
        for name in &self.names {
            hasher.update(name.as_bytes());
            hasher.update(b"\n");
        }
        format!("{:x}", hasher.finalize())
    }
}

/// One window's features, tied to the schema that names each position.
#[derive(Clone, Debug, PartialEq)]
pub struct FeatureVector {
    pub schema: Arc<FeatureSchema>,
    pub values: Vec<f64>,
}

/// Row-major feature matrix for a window list, all rows sharing one schema.
#[derive(Clone, Debug, PartialEq)]
pub struct FeatureMatrix {
    pub schema: Arc<FeatureSchema>,
    rows: usize,
    values: Vec<f64>,
}

impl FeatureMatrix {
    pub fn rows(&self) -> usize {
        self.rows
    }

    pub fn width(&self) -> usize {
        self.schema.len()
    }

    pub fn row(&self, index: usize) -> &[f64] {
        let w = self.width();
        &self.values[index * w..(index + 1) * w]
    }

    pub fn row_vector(&self, index: usize) -> FeatureVector {
        FeatureVector { schema: Arc::clone(&self.schema), values: self.row(index).to_vec() }
    }
}

#[derive(Debug, Error)]
pub enum FeatureError {
    #[error("series length mismatch: {left} vs {right}")]
    LengthMismatch { left: usize, right: usize },
    #[error("need at least two samples, got {len}")]
    TooShort { len: usize },
    #[error("telemetry for {appliance}/{sensor} does not cover the window at {t}")]
    Coverage { appliance: String, sensor: String, t: Timestamp },
    #[error("telemetry for {appliance}/{sensor} still has missing samples; impute first")]
    MissingSamples { appliance: String, sensor: String },
    #[error("telemetry for {appliance}/{sensor} is not on the shared cohort grid")]
    UnalignedSeries { appliance: String, sensor: String },
    #[error("duplicate feature name {name} when combining vectors")]
    DuplicateFeature { name: String },
    #[error("cannot combine an empty list of feature vectors")]
    EmptyCombine,
    #[error("window references appliance index {index}, dataset has {count}")]
    UnknownAppliance { index: usize, count: usize },
}

// ---------------------------------------------------------------------------
// Dissimilarities
// ---------------------------------------------------------------------------

/// Pearson dissimilarity `1 - r`.
///
/// Inputs must be equally long with at least two samples. If either slice
/// has zero variance the dissimilarity is defined as 1 (no linear
/// relationship measurable). The result is clamped to `[0, 2]`.
///
/// The computation offsets each slice by its minimum and scales deviations
/// by their largest magnitude before accumulating. Both canonicalizations
/// are exact under transforms that are exact on the inputs, so rescaling a
/// slice by a power of two, or shifting values that live on a coarse binary
/// grid, reproduces the result bit for bit. They also keep every
/// accumulated term in `[-1, 1]`, so no input magnitude can overflow.
pub fn pearson_dissim(x: &[f64], y: &[f64]) -> Result<f64, FeatureError> {
    let (dx, dy) = paired_deviations(x, y)?;
    let (sxx, syy, sxy) = match (normalized_products(&dx), normalized_products(&dy)) {
        (Some((nx, sxx)), Some((ny, syy))) => {
            let sxy: f64 = nx.iter().zip(&ny).map(|(a, b)| a * b).sum();
            (sxx, syy, sxy)
        }
        // A zero-variance side leaves the correlation undefined.
        _ => return Ok(1.0),
    };
    let r = (sxy / (sxx.sqrt() * syy.sqrt())).clamp(-1.0, 1.0);
    Ok(1.0 - r)
}

/// Spearman dissimilarity `1 - r` over average ranks.
///
/// Ties receive the mean of the rank positions they span. Because only the
/// ordering of values enters, any strictly increasing transform of either
/// input leaves the result bit-identical.
pub fn spearman_dissim(x: &[f64], y: &[f64]) -> Result<f64, FeatureError> {
    check_pair(x, y)?;
    pearson_dissim(&average_ranks(x), &average_ranks(y))
}

fn check_pair(x: &[f64], y: &[f64]) -> Result<(), FeatureError> {
    if x.len() != y.len() {
        return Err(FeatureError::LengthMismatch { left: x.len(), right: y.len() });
    }
    if x.len() < 2 {
        return Err(FeatureError::TooShort { len: x.len() });
    }
    Ok(())
}

/// Mean-centered deviations of both slices after offsetting each by its own
/// minimum.
fn paired_deviations(x: &[f64], y: &[f64]) -> Result<(Vec<f64>, Vec<f64>), FeatureError> {
    check_pair(x, y)?;
    Ok((deviations(x), deviations(y)))
}

fn deviations(x: &[f64]) -> Vec<f64> {
    let offset = x.iter().copied().fold(f64::INFINITY, f64::min);
    let shifted: Vec<f64> = x.iter().map(|v| v - offset).collect();
    let mean = shifted.iter().sum::<f64>() / shifted.len() as f64;
    shifted.iter().map(|v| v - mean).collect()
}

/// Deviations scaled by their largest magnitude, plus the scaled sum of
/// squares. `None` when the slice is constant.
fn normalized_products(dev: &[f64]) -> Option<(Vec<f64>, f64)> {
    let max_abs = dev.iter().fold(0.0f64, |m, v| m.max(v.abs()));
    if max_abs == 0.0 {
        return None;
    }
    let scaled: Vec<f64> = dev.iter().map(|v| v / max_abs).collect();
    let sum_sq = scaled.iter().map(|v| v * v).sum();
    Some((scaled, sum_sq))
}

/// 1-based average ranks; tied values share the mean of their positions.
pub fn average_ranks(x: &[f64]) -> Vec<f64> {
    let mut order: Vec<usize> = (0..x.len()).collect();
    order.sort_by(|&a, &b| x[a].total_cmp(&x[b]));
    let mut ranks = vec![0.0; x.len()];
    let mut i = 0;
    while i < order.len() {
        let mut j = i;
        while j + 1 < order.len() && x[order[j + 1]] == x[order[i]] {
            j += 1;
        }
        let mean_rank = (i + j) as f64 / 2.0 + 1.0;
        for &index in &order[i..=j] {
            ranks[index] = mean_rank;
        }
        i = j + 1;
    }
    ranks
}

// ---------------------------------------------------------------------------
// Extraction
// ---------------------------------------------------------------------------

/// Extracts features for windows over one prepared dataset.
///
/// Construction validates that every series is on one shared grid with no
/// missing samples, then holds dense per-sensor arrays so window slices are
/// plain index ranges.
pub struct FeatureExtractor<'a> {
    dataset: &'a CohortDataset,
    spec: &'a WindowSpec,
    roster: Vec<String>,
    /// `dense[appliance][sensor]` in roster order.
    dense: Vec<Vec<Vec<f64>>>,
    start: Timestamp,
    grid: Duration,
    series_len: usize,
}

impl<'a> FeatureExtractor<'a> {
    pub fn new(dataset: &'a CohortDataset, spec: &'a WindowSpec) -> Result<Self, FeatureError> {
        let roster = dataset.sensor_roster();
        let first = dataset
            .appliances
            .first()
            .and_then(|a| a.series.values().next())
            .ok_or(FeatureError::TooShort { len: 0 })?;
        let (start, grid, series_len) = (first.start, first.grid_interval, first.len());
        let mut dense = Vec::with_capacity(dataset.appliances.len());
        for appliance in &dataset.appliances {
            let mut per_sensor = Vec::with_capacity(roster.len());
            for sensor in &roster {
                let series = appliance.series.get(sensor).ok_or_else(|| {
                    FeatureError::UnalignedSeries {
                        appliance: appliance.appliance_id.clone(),
                        sensor: sensor.clone(),
                    }
                })?;
                if series.start != start
                    || series.grid_interval != grid
                    || series.len() != series_len
                {
                    return Err(FeatureError::UnalignedSeries {
                        appliance: appliance.appliance_id.clone(),
                        sensor: sensor.clone(),
                    });
                }
                let values: Option<Vec<f64>> = series.values.iter().copied().collect();
                per_sensor.push(values.ok_or_else(|| FeatureError::MissingSamples {
                    appliance: appliance.appliance_id.clone(),
                    sensor: sensor.clone(),
                })?);
            }
            dense.push(per_sensor);
        }
        Ok(FeatureExtractor { dataset, spec, roster, dense, start, grid, series_len })
    }

    fn appliance_count(&self) -> usize {
        self.dense.len()
    }

    /// Dense samples of the closed range `[t - telemetry_window, t]`.
    fn window_slice(
        &self,
        appliance: usize,
        sensor: usize,
        t: Timestamp,
    ) -> Result<&[f64], FeatureError> {
        let coverage_error = || FeatureError::Coverage {
            appliance: self.dataset.appliances[appliance].appliance_id.clone(),
            sensor: self.roster[sensor].clone(),
            t,
        };
        let span = self.spec.telemetry_window.minutes();
        let offset = t.minutes() - span - self.start.minutes();
        if offset < 0 || offset % self.grid.minutes() != 0 {
            return Err(coverage_error());
        }
        let lo = (offset / self.grid.minutes()) as usize;
        let hi = lo + (span / self.grid.minutes()) as usize;
        if hi >= self.series_len {
            return Err(coverage_error());
        }
        Ok(&self.dense[appliance][sensor][lo..=hi])
    }

    /// Peer indices of `appliance`: ascending, self removed.
    fn peers(&self, appliance: usize) -> impl Iterator<Item = usize> + '_ {
        let n = self.appliance_count();
        (0..n).filter(move |&j| j != appliance)
    }

    pub fn schema(&self, set: FeatureSet) -> FeatureSchema {
        let mut names = Vec::new();
        let peer_count = self.appliance_count() - 1;
        let cohort_block = |measure: &str, names: &mut Vec<String>| {
            for peer in 1..=peer_count {
                for sensor in &self.roster {
                    names.push(format!("{measure}:peer{peer:02}:{sensor}"));
                }
            }
        };
        let baseline_block = |names: &mut Vec<String>| {
            for sensor in &self.roster {
                for stat in ["max", "min", "mean", "std", "skew", "kurt"] {
                    names.push(format!("baseline:{sensor}:{stat}"));
                }
            }
            for (i, a) in self.roster.iter().enumerate() {
                for b in &self.roster[i + 1..] {
                    names.push(format!("baseline:cov:{a}:{b}"));
                }
            }
        };
        match set {
            FeatureSet::Baseline => baseline_block(&mut names),
            FeatureSet::CohortPearson => cohort_block("pearson", &mut names),
            FeatureSet::CohortSpearman => cohort_block("spearman", &mut names),
            FeatureSet::CohortBoth => {
                cohort_block("pearson", &mut names);
                cohort_block("spearman", &mut names);
            }
            FeatureSet::Combined => {
                baseline_block(&mut names);
                cohort_block("pearson", &mut names);
                cohort_block("spearman", &mut names);
            }
        }
        FeatureSchema::new(names)
    }

    /// Cohort dissimilarity vector of one window.
    pub fn cohort_vector(
        &self,
        window: &LabeledWindow,
        measure: Measure,
    ) -> Result<FeatureVector, FeatureError> {
        self.check_window(window)?;
        let set = match measure {
            Measure::Pearson => FeatureSet::CohortPearson,
            Measure::Spearman => FeatureSet::CohortSpearman,
            Measure::Both => FeatureSet::CohortBoth,
        };
        let schema = Arc::new(self.schema(set));
        let mut values = Vec::with_capacity(schema.len());
        if matches!(measure, Measure::Pearson | Measure::Both) {
            self.push_cohort_block(window, pearson_dissim, &mut values)?;
        }
        if matches!(measure, Measure::Spearman | Measure::Both) {
            self.push_cohort_block(window, spearman_dissim, &mut values)?;
        }
        Ok(FeatureVector { schema, values })
    }

    fn push_cohort_block(
        &self,
        window: &LabeledWindow,
        dissim: fn(&[f64], &[f64]) -> Result<f64, FeatureError>,
        values: &mut Vec<f64>,
    ) -> Result<(), FeatureError> {
        let i = window.appliance_index;
        for j in self.peers(i) {
            for sensor in 0..self.roster.len() {
                let own = self.window_slice(i, sensor, window.t)?;
                let peer = self.window_slice(j, sensor, window.t)?;
                values.push(dissim(own, peer)?);
            }
        }
        Ok(())
    }

    /// Baseline statistics vector of one window.
    pub fn baseline_vector(&self, window: &LabeledWindow) -> Result<FeatureVector, FeatureError> {
        self.check_window(window)?;
        let schema = Arc::new(self.schema(FeatureSet::Baseline));
        let mut values = Vec::with_capacity(schema.len());
        let i = window.appliance_index;
        let slices: Vec<&[f64]> = (0..self.roster.len())
            .map(|sensor| self.window_slice(i, sensor, window.t))
            .collect::<Result<_, _>>()?;
        for slice in &slices {
            push_moment_stats(slice, &mut values);
        }
        for (a, slice_a) in slices.iter().enumerate() {
            for slice_b in &slices[a + 1..] {
                values.push(sample_covariance(slice_a, slice_b));
            }
        }
        Ok(FeatureVector { schema, values })
    }

    fn check_window(&self, window: &LabeledWindow) -> Result<(), FeatureError> {
        if window.appliance_index >= self.appliance_count() {
            return Err(FeatureError::UnknownAppliance {
                index: window.appliance_index,
                count: self.appliance_count(),
            });
        }
        Ok(())
    }

    /// Extracts the whole matrix for one feature set, windows in given order.
    ///
    /// The cohort blocks are computed per instant: each (sensor, pair)
    /// dissimilarity is evaluated once and shared by both windows that
    /// reference it, which also guarantees the matrix is symmetric in the
    /// pair. Requires every appliance to contribute the same instants, which
    /// window enumeration guarantees.
    pub fn extract(
        &self,
        windows: &[LabeledWindow],
        set: FeatureSet,
    ) -> Result<FeatureMatrix, FeatureError> {
        for window in windows {
            self.check_window(window)?;
        }
        let schema = Arc::new(self.schema(set));
        let width = schema.len();
        let instants = instant_table(windows, self.appliance_count());

        let cohort = match set {
            FeatureSet::Baseline => None,
            _ => Some(self.cohort_tables(&instants.distinct, set)?),
        };

        let rows: Vec<Vec<f64>> = windows
            .par_iter()
            .enumerate()
            .map(|(row, window)| -> Result<Vec<f64>, FeatureError> {
                let mut values = Vec::with_capacity(width);
                if matches!(set, FeatureSet::Baseline | FeatureSet::Combined) {
                    let baseline = self.baseline_vector(window)?;
                    values.extend_from_slice(&baseline.values);
                }
                if let Some(tables) = &cohort {
                    let t_index = instants.index_of[row];
                    tables.fill_row(window.appliance_index, t_index, &mut values);
                }
                Ok(values)
            })
            .collect::<Result<_, _>>()?;

        let mut values = Vec::with_capacity(windows.len() * width);
        for row in rows {
            debug_assert_eq!(row.len(), width);
            values.extend_from_slice(&row);
        }
        Ok(FeatureMatrix { schema, rows: windows.len(), values })
    }

    /// Pairwise dissimilarity tables for every distinct instant.
    fn cohort_tables(
        &self,
        instants: &[Timestamp],
        set: FeatureSet,
    ) -> Result<CohortTables, FeatureError> {
        let n = self.appliance_count();
        let m = self.roster.len();
        let want_pearson = !matches!(set, FeatureSet::CohortSpearman);
        let want_spearman = !matches!(set, FeatureSet::CohortPearson);
        let per_instant: Vec<(Vec<f64>, Vec<f64>)> = instants
            .par_iter()
            .map(|&t| -> Result<(Vec<f64>, Vec<f64>), FeatureError> {
                let mut pearson = vec![0.0; if want_pearson { n * n * m } else { 0 }];
                let mut spearman = vec![0.0; if want_spearman { n * n * m } else { 0 }];
                for sensor in 0..m {
                    let slices: Vec<&[f64]> = (0..n)
                        .map(|a| self.window_slice(a, sensor, t))
                        .collect::<Result<_, _>>()?;
                    let ranks: Vec<Vec<f64>> = if want_spearman {
                        slices.iter().map(|s| average_ranks(s)).collect()
                    } else {
                        Vec::new()
                    };
                    for i in 0..n {
                        for j in i + 1..n {
                            let at = |a: usize, b: usize| (a * n + b) * m + sensor;
                            if want_pearson {
                                let d = pearson_dissim(slices[i], slices[j])?;
                                pearson[at(i, j)] = d;
                                pearson[at(j, i)] = d;
                            }
                            if want_spearman {
                                let d = pearson_dissim(&ranks[i], &ranks[j])?;
                                spearman[at(i, j)] = d;
                                spearman[at(j, i)] = d;
                            }
                        }
                    }
                }
                Ok((pearson, spearman))
            })
            .collect::<Result<_, _>>()?;
        Ok(CohortTables { appliances: n, sensors: m, per_instant })
    }
}

/// Distinct window instants plus, per window, the index of its instant.
struct InstantTable {
    distinct: Vec<Timestamp>,
    index_of: Vec<usize>,
}

fn instant_table(windows: &[LabeledWindow], appliances: usize) -> InstantTable {
    let mut distinct: Vec<Timestamp> = windows.iter().map(|w| w.t).collect();
    distinct.sort();
    distinct.dedup();
    let index_of = windows
        .iter()
        .map(|w| distinct.binary_search(&w.t).expect("window instant present"))
        .collect();
    debug_assert!(windows.len() <= distinct.len() * appliances);
    InstantTable { distinct, index_of }
}

/// Dense `[instant][appliance pair][sensor]` dissimilarity storage.
struct CohortTables {
    appliances: usize,
    sensors: usize,
    /// Per instant: (pearson, spearman), each `n * n * m` or empty.
    per_instant: Vec<(Vec<f64>, Vec<f64>)>,
}

impl CohortTables {
    fn fill_row(&self, appliance: usize, t_index: usize, values: &mut Vec<f64>) {
        let (pearson, spearman) = &self.per_instant[t_index];
        for table in [pearson, spearman] {
            if table.is_empty() {
                continue;
            }
            for peer in (0..self.appliances).filter(|&j| j != appliance) {
                let base = (appliance * self.appliances + peer) * self.sensors;
                values.extend_from_slice(&table[base..base + self.sensors]);
            }
        }
    }
}

/// Per-sensor baseline statistics appended in schema order:
/// max, min, mean, sample standard deviation, skewness, excess kurtosis.
fn push_moment_stats(slice: &[f64], values: &mut Vec<f64>) {
    let n = slice.len() as f64;
    let max = slice.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    let min = slice.iter().copied().fold(f64::INFINITY, f64::min);
    let mean = slice.iter().sum::<f64>() / n;
    let (mut m2, mut m3, mut m4) = (0.0, 0.0, 0.0);
    for v in slice {
        let d = v - mean;
        let d2 = d * d;
        m2 += d2;
        m3 += d2 * d;
        m4 += d2 * d2;
    }
    let std = (m2 / (n - 1.0)).sqrt();
    m2 /= n;
    m3 /= n;
    m4 /= n;
    // Constant slices have no shape; define both shape moments as 0.
    let (skew, kurt) = if m2 == 0.0 {
        (0.0, 0.0)
    } else {
        (m3 / m2.powf(1.5), m4 / (m2 * m2) - 3.0)
    };
    values.extend_from_slice(&[max, min, mean, std, skew, kurt]);
}

/// Sample covariance with the `n - 1` denominator.
fn sample_covariance(x: &[f64], y: &[f64]) -> f64 {
    let n = x.len() as f64;
    let mean_x = x.iter().sum::<f64>() / n;
    let mean_y = y.iter().sum::<f64>() / n;
    let sum: f64 = x
        .iter()
        .zip(y)
        .map(|(a, b)| (a - mean_x) * (b - mean_y))
        .sum();
    sum / (n - 1.0)
}

/// Concatenates feature vectors into one, keeping name uniqueness.
pub fn combine(parts: &[FeatureVector]) -> Result<FeatureVector, FeatureError> {
    if parts.is_empty() {
        return Err(FeatureError::EmptyCombine);
    }
    let mut names = Vec::new();
    let mut values = Vec::new();
    let mut seen = BTreeSet::new();
    for part in parts {
        for name in part.schema.names() {
            if !seen.insert(name.clone()) {
                return Err(FeatureError::DuplicateFeature { name: name.clone() });
            }
            names.push(name.clone());
        }
        values.extend_from_slice(&part.values);
    }
    Ok(FeatureVector { schema: Arc::new(FeatureSchema::new(names)), values })
}

/// Writes `appliance_id,t,label,<feature names...>` rows for one alarm type.
pub fn write_feature_matrix(
    matrix: &FeatureMatrix,
    windows: &[LabeledWindow],
    alarm_id: &str,
    writer: impl io::Write,
) -> Result<(), io::Error> {
    assert_eq!(matrix.rows(), windows.len(), "matrix and window list diverge");
    let mut out = csv::Writer::from_writer(writer);
    let mut header = vec!["appliance_id".to_owned(), "t".to_owned(), "label".to_owned()];
    header.extend(matrix.schema.names().iter().cloned());
    out.write_record(&header)?;
    for (index, window) in windows.iter().enumerate() {
        let mut record = Vec::with_capacity(3 + matrix.width());
        record.push(window.appliance_id.clone());
        record.push(window.t.minutes().to_string());
        record.push(match window.labels.get(alarm_id) {
            Some(true) => "1".to_owned(),
            Some(false) => "0".to_owned(),
            None => String::new(),
        });
        record.extend(matrix.row(index).iter().map(|v| format!("{v}")));
        out.write_record(&record)?;
    }
    out.flush()
}
