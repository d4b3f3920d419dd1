//! Sliding-window enumeration and per-alarm labeling.
//!
//! Each appliance's history is cut into instants `t` stepping through the
//! dataset extent. A window at `t` looks back over the closed telemetry
//! range `[t - telemetry_window, t]` and is labeled positive for an alarm
//! type when an event of that type falls inside the half-open forecast range
//! `[t + action_window, t + action_window + forecast_window)`. The action
//! window is the gap a maintenance crew would need between prediction and
//! intervention, so it separates the two ranges.

use crate::telemetry::{AlarmEvent, CohortDataset};
use crate::time::{Duration, TimeRange, Timestamp, MINUTES_PER_DAY};
use serde::{Deserialize, Serialize};
use std::collections::BTreeMap;
use std::io;

/// Window geometry. All durations must be positive.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct WindowSpec {
    /// Length of the telemetry look-back range.
    pub telemetry_window: Duration,
    /// Gap between the window instant and the start of the forecast range.
    pub action_window: Duration,
    /// Length of the forecast range.
    pub forecast_window: Duration,
    /// Spacing between consecutive window instants.
    pub step: Duration,
}

impl Default for WindowSpec {
    fn default() -> Self {
        WindowSpec {
            telemetry_window: Duration::from_days(14),
            action_window: Duration::from_days(7),
            forecast_window: Duration::from_days(7),
            step: Duration::from_days(1),
        }
    }
}

impl WindowSpec {
    pub fn is_valid(&self) -> bool {
        self.telemetry_window.is_positive()
            && self.action_window.is_positive()
            && self.forecast_window.is_positive()
            && self.step.is_positive()
    }

    /// Total span one window consumes from telemetry start to forecast end.
    pub fn total_span(&self) -> Duration {
        self.telemetry_window + self.action_window + self.forecast_window
    }

    /// Closed telemetry range `[t - telemetry_window, t]` of a window at `t`.
    pub fn telemetry_range(&self, t: Timestamp) -> (Timestamp, Timestamp) {
        (t - self.telemetry_window, t)
    }

    /// Half-open forecast range of a window at `t`.
    pub fn forecast_range(&self, t: Timestamp) -> TimeRange {
        let from = t + self.action_window;
        TimeRange::new(from, from + self.forecast_window)
    }
}

/// One window instant for one appliance, with its per-alarm labels.
///
/// `labels` holds one entry per alarm type that has been applied; windows
/// come out of [`enumerate_windows`] unlabeled.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct LabeledWindow {
    /// Position of the appliance in the dataset's sorted appliance list.
    pub appliance_index: usize,
    pub appliance_id: String,
    /// The window instant: end of the telemetry range.
    pub t: Timestamp,
    pub labels: BTreeMap<String, bool>,
}

/// Result of enumerating windows over a dataset.
#[derive(Clone, Debug, Default)]
pub struct WindowEnumeration {
    /// Ordered by appliance index, then by `t` ascending.
    pub windows: Vec<LabeledWindow>,
    /// True when the extent is shorter than one full window span, which
    /// yields no windows at all.
    pub extent_too_short: bool,
}

/// Enumerates every valid window instant for every appliance.
///
/// Instants start at `extent.start + telemetry_window` and advance by
/// `step` while the forecast range still fits inside the extent. Panics if
/// the spec is invalid; geometry mistakes are programming errors here
/// (configuration input is validated at the boundary).
pub fn enumerate_windows(dataset: &CohortDataset, spec: &WindowSpec) -> WindowEnumeration {
    assert!(spec.is_valid(), "window spec durations must all be positive");
    let first = dataset.extent.start + spec.telemetry_window;
    let last_fit = dataset.extent.duration() - spec.total_span();
    if last_fit.minutes() < 0 {
        return WindowEnumeration { windows: Vec::new(), extent_too_short: true };
    }
    let instants_per_appliance = last_fit.minutes() / spec.step.minutes() + 1;
    let mut windows =
        Vec::with_capacity(dataset.appliances.len() * instants_per_appliance as usize);
    for (appliance_index, appliance) in dataset.appliances.iter().enumerate() {
        for i in 0..instants_per_appliance {
            windows.push(LabeledWindow {
                appliance_index,
                appliance_id: appliance.appliance_id.clone(),
                t: first + Duration::from_minutes(i * spec.step.minutes()),
                labels: BTreeMap::new(),
            });
        }
    }
    WindowEnumeration { windows, extent_too_short: false }
}

/// True when an alarm of `alarm_id` for the window's appliance falls inside
/// the window's forecast range.
pub fn label_window(
    window: &LabeledWindow,
    spec: &WindowSpec,
    alarms: &[AlarmEvent],
    alarm_id: &str,
) -> bool {
    let forecast = spec.forecast_range(window.t);
    alarms.iter().any(|alarm| {
        alarm.alarm_id == alarm_id
            && alarm.appliance_id == window.appliance_id
            && forecast.contains(alarm.at)
    })
}

/// Fills `labels` for each requested alarm type on every window.
pub fn apply_labels(
    windows: &mut [LabeledWindow],
    spec: &WindowSpec,
    alarms: &[AlarmEvent],
    alarm_ids: &[String],
) {
    for window in windows.iter_mut() {
        for alarm_id in alarm_ids {
            let label = label_window(window, spec, alarms, alarm_id);
            window.labels.insert(alarm_id.clone(), label);
        }
    }
}

/// Writes a `appliance_id,t,label` manifest for one alarm type. Windows
/// missing that label are written as unlabeled (`label` empty).
pub fn write_window_manifest(
    windows: &[LabeledWindow],
    alarm_id: &str,
    writer: impl io::Write,
) -> Result<(), io::Error> {
    let mut out = csv::Writer::from_writer(writer);
    out.write_record(["appliance_id", "t", "label"])?;
    for window in windows {
        let label = match window.labels.get(alarm_id) {
            Some(true) => "1",
            Some(false) => "0",
            None => "",
        };
        out.write_record([
            window.appliance_id.as_str(),
            window.t.minutes().to_string().as_str(),
            label,
        ])?;
    }
    out.flush()
}

/// Days of data a window spec needs before it yields `n` instants; handy for
/// sizing simulated datasets.
pub fn days_for_instants(spec: &WindowSpec, n: i64) -> i64 {
    let total = spec.total_span().minutes() + (n - 1) * spec.step.minutes();
    (total + MINUTES_PER_DAY - 1) / MINUTES_PER_DAY
}
