//! Fault forecasting for fleets of identical appliances.
//!
//! The premise: appliances doing the same job under the same conditions
//! should look alike. Each sensor of each appliance is compared against the
//! same sensor on every peer over a sliding telemetry window, and the
//! resulting dissimilarities (one minus the correlation coefficient) become
//! the feature vector of that window. A boosted ensemble of shallow decision
//! trees then learns which dissimilarity patterns precede an alarm far
//! enough in advance to act on. Correlation-based features ignore scale and
//! offset differences between appliances, so the pipeline needs no
//! per-appliance calibration and transfers across seasons where absolute
//! baselines drift.
//!
//! Pipeline stages, one module each:
//!
//! * [`telemetry`]: CSV ingestion, resampling onto a shared grid, median
//!   imputation, alarm-log filtering.
//! * [`windowing`]: sliding-window enumeration and per-alarm labeling.
//! * [`features`]: cohort dissimilarity and single-appliance baseline
//!   feature extraction.
//! * [`model`]: weighted decision trees and discrete AdaBoost, with text
//!   persistence.
//! * [`eval`]: leave-one-appliance-out cross-validation, ROC/AUC, cost-based
//!   alarm-threshold selection.
//! * [`simulate`]: deterministic synthetic cohort generator with scripted
//!   fault anomalies, for experiments and tests.

pub mod eval;
pub mod features;
pub mod model;
pub mod simulate;
pub mod telemetry;
#[cfg(test)]
pub(crate) mod testutil;
pub mod time;
pub mod windowing;
