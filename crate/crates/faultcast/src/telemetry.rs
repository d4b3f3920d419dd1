//! Cohort telemetry: gridded sensor series, alarm events, CSV interchange,
//! resampling, and median imputation.
//!
//! A cohort is a set of appliances that all expose the same sensor roster.
//! Each sensor's history is a regular grid of minute-aligned samples where a
//! sample is either an observed value or a missing marker. Downstream stages
//! (windowing, features) require a shared grid and no missing samples, which
//! [`prepare`] establishes: resample everything onto one epoch-anchored grid,
//! trim to the common extent, and impute what is still missing.

use crate::time::{Duration, TimeRange, Timestamp};
use serde::{Deserialize, Serialize};
use std::collections::{BTreeMap, BTreeSet};
use std::fmt;
use std::io;
use std::path::{Path, PathBuf};
use thiserror::Error;

/// One sensor's history on a regular time grid.
///
/// Sample `i` is the reading at `start + i * grid_interval`; `None` marks a
/// missing reading. The series is never empty.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SensorSeries {
    pub sensor_id: String,
    pub start: Timestamp,
    pub grid_interval: Duration,
    pub values: Vec<Option<f64>>,
}

impl SensorSeries {
    /// Panics if `values` is empty or the interval is not positive.
    pub fn new(
        sensor_id: impl Into<String>,
        start: Timestamp,
        grid_interval: Duration,
        values: Vec<Option<f64>>,
    ) -> Self {
        assert!(!values.is_empty(), "sensor series must hold at least one sample");
        assert!(grid_interval.is_positive(), "grid interval must be positive");
        SensorSeries { sensor_id: sensor_id.into(), start, grid_interval, values }
    }

    pub fn len(&self) -> usize {
        self.values.len()
    }

    pub fn is_empty(&self) -> bool {
        self.values.is_empty()
    }

    pub fn timestamp_at(&self, index: usize) -> Timestamp {
        self.start + Duration::from_minutes(self.grid_interval.minutes() * index as i64)
    }

    /// First instant past the last sample.
    pub fn end(&self) -> Timestamp {
        self.timestamp_at(self.len())
    }

    /// Index of the sample at exactly `t`, if `t` is on the grid and covered.
    pub fn index_of(&self, t: Timestamp) -> Option<usize> {
        let offset = (t - self.start).minutes();
        if offset < 0 || offset % self.grid_interval.minutes() != 0 {
            return None;
        }
        let index = (offset / self.grid_interval.minutes()) as usize;
        (index < self.len()).then_some(index)
    }

    pub fn has_missing(&self) -> bool {
        self.values.iter().any(Option::is_none)
    }
}

/// All sensor series of one appliance, keyed by sensor id.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ApplianceTelemetry {
    pub appliance_id: String,
    pub series: BTreeMap<String, SensorSeries>,
}

impl ApplianceTelemetry {
    pub fn sensor_ids(&self) -> impl Iterator<Item = &str> {
        self.series.keys().map(String::as_str)
    }
}

/// A historical alarm: appliance, alarm type, and the minute it fired.
#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct AlarmEvent {
    pub appliance_id: String,
    pub alarm_id: String,
    pub at: Timestamp,
}

/// A cohort of appliances with a shared sensor roster, plus its alarm log.
///
/// Appliances are sorted by id; that order defines the appliance index used
/// by windowing and cohort features.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct CohortDataset {
    pub appliances: Vec<ApplianceTelemetry>,
    pub alarms: Vec<AlarmEvent>,
    pub extent: TimeRange,
}

impl CohortDataset {
    pub fn appliance_index(&self, appliance_id: &str) -> Option<usize> {
        self.appliances.iter().position(|a| a.appliance_id == appliance_id)
    }

    /// Sensor ids shared by every appliance, in roster (sorted) order.
    pub fn sensor_roster(&self) -> Vec<String> {
        self.appliances
            .first()
            .map(|a| a.series.keys().cloned().collect())
            .unwrap_or_default()
    }

    pub fn alarm_ids(&self) -> Vec<String> {
        let ids: BTreeSet<&str> = self.alarms.iter().map(|a| a.alarm_id.as_str()).collect();
        ids.into_iter().map(str::to_owned).collect()
    }

    /// Checks the structural invariants: at least two appliances, sorted
    /// appliance ids, identical sensor rosters, and alarms inside the extent.
    pub fn validate(&self) -> Result<(), TelemetryError> {
        if self.appliances.len() < 2 {
            return Err(TelemetryError::TooFewAppliances { found: self.appliances.len() });
        }
        let sorted = self
            .appliances
            .windows(2)
            .all(|pair| pair[0].appliance_id < pair[1].appliance_id);
        if !sorted {
            return Err(TelemetryError::UnsortedAppliances);
        }
        let reference = &self.appliances[0];
        for appliance in &self.appliances {
            if !appliance.series.keys().eq(reference.series.keys()) {
                return Err(TelemetryError::RosterMismatch {
                    appliance: appliance.appliance_id.clone(),
                    reference: reference.appliance_id.clone(),
                });
            }
            // A series filed under the wrong key would silently corrupt
            // roster-ordered feature extraction.
            for (key, series) in &appliance.series {
                if key != &series.sensor_id {
                    return Err(TelemetryError::RosterMismatch {
                        appliance: appliance.appliance_id.clone(),
                        reference: reference.appliance_id.clone(),
                    });
                }
            }
        }
        for alarm in &self.alarms {
            if !self.extent.contains(alarm.at) {
                return Err(TelemetryError::AlarmOutsideExtent {
                    appliance: alarm.appliance_id.clone(),
                    at: alarm.at,
                    extent: self.extent,
                });
            }
        }
        Ok(())
    }
}

/// An input row that was skipped during CSV loading, with the reason.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct RowReject {
    pub line: u64,
    pub reason: String,
}

impl fmt::Display for RowReject {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "line {}: {}", self.line, self.reason)
    }
}

/// Result of loading a cohort from CSV: the dataset plus any rejected rows.
#[derive(Clone, Debug)]
pub struct LoadedCohort {
    pub dataset: CohortDataset,
    pub telemetry_rejects: Vec<RowReject>,
    pub alarm_rejects: Vec<RowReject>,
}

#[derive(Debug, Error)]
pub enum TelemetryError {
    #[error("failed to read {path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: io::Error,
    },
    #[error("malformed CSV in {path}: {source}")]
    Csv {
        path: PathBuf,
        #[source]
        source: csv::Error,
    },
    #[error("{path} is missing required column {column:?}")]
    MissingColumn { path: PathBuf, column: &'static str },
    #[error("{path} contains no usable rows")]
    NoUsableRows { path: PathBuf },
    #[error("a cohort needs at least two appliances, found {found}")]
    TooFewAppliances { found: usize },
    #[error("appliances are not sorted by id")]
    UnsortedAppliances,
    #[error("appliance {appliance} exposes a different sensor roster than {reference}")]
    RosterMismatch { appliance: String, reference: String },
    #[error("alarm for {appliance} at {at} lies outside the dataset extent {extent}")]
    AlarmOutsideExtent { appliance: String, at: Timestamp, extent: TimeRange },
    #[error("resample target must be positive, got {target}")]
    NonPositiveInterval { target: Duration },
    #[error("resample target {target} is finer than the source grid {grid}")]
    TargetBelowGrid { target: Duration, grid: Duration },
    #[error("sensor {sensor}: all samples missing, median imputation impossible")]
    AllMissing { sensor: String },
    #[error("appliances share no common time extent on the target grid")]
    NoCommonExtent,
    #[error("series for {appliance}/{sensor} would span {samples} samples; refusing")]
    OversizedSeries { appliance: String, sensor: String, samples: i64 },
}

/// Upper bound on samples per loaded series; wildly scattered timestamps
/// would otherwise make the gcd grid allocate absurd missing-marker runs.
const MAX_SERIES_SAMPLES: i64 = 1 << 27;

// ---------------------------------------------------------------------------
// CSV interchange
// ---------------------------------------------------------------------------

/// Timestamp column format, detected once per file from its first data row.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
enum TimestampFormat {
    EpochMinutes,
    Iso8601,
}

fn detect_timestamp_format(field: &str) -> TimestampFormat {
    if !field.is_empty() && field.bytes().all(|b| b.is_ascii_digit()) {
        TimestampFormat::EpochMinutes
    } else {
        TimestampFormat::Iso8601
    }
}

fn parse_timestamp(field: &str, format: TimestampFormat) -> Result<Timestamp, String> {
    match format {
        TimestampFormat::EpochMinutes => {
            let minutes: i64 = field
                .parse()
                .map_err(|_| format!("timestamp {field:?} is not a whole minute count"))?;
            if minutes < 0 {
                return Err(format!("timestamp {field:?} is negative"));
            }
            Ok(Timestamp::from_minutes(minutes))
        }
        TimestampFormat::Iso8601 => {
            let parsed = chrono::DateTime::parse_from_rfc3339(field)
                .map_err(|e| format!("timestamp {field:?} is not ISO-8601: {e}"))?;
            let seconds = parsed.timestamp();
            if seconds < 0 {
                return Err(format!("timestamp {field:?} precedes the epoch"));
            }
            if seconds % 60 != 0 {
                return Err(format!("timestamp {field:?} is not minute-aligned"));
            }
            Ok(Timestamp::from_minutes(seconds / 60))
        }
    }
}

fn column_index(
    headers: &csv::StringRecord,
    name: &'static str,
    path: &Path,
) -> Result<usize, TelemetryError> {
    headers
        .iter()
        .position(|h| h.trim() == name)
        .ok_or_else(|| TelemetryError::MissingColumn { path: path.to_path_buf(), column: name })
}

/// Loads a cohort from a telemetry CSV and an alarms CSV.
///
/// Telemetry columns: `timestamp,appliance_id,sensor_id,value`, where an
/// empty value marks a missing reading. Alarm columns:
/// `timestamp,appliance_id,alarm_id`. Timestamps are either integer minutes
/// since the epoch or ISO-8601 UTC, detected per file. Each series' grid is
/// inferred as the gcd of its timestamp gaps. Rows that cannot be parsed, or
/// alarms that reference unknown appliances or fall outside the telemetry
/// extent, are skipped and reported in the returned reject lists.
pub fn load_cohort(
    telemetry_path: &Path,
    alarms_path: &Path,
) -> Result<LoadedCohort, TelemetryError> {
    let telemetry_file = std::fs::File::open(telemetry_path).map_err(|source| {
        TelemetryError::Io { path: telemetry_path.to_path_buf(), source }
    })?;
    let alarms_file = std::fs::File::open(alarms_path)
        .map_err(|source| TelemetryError::Io { path: alarms_path.to_path_buf(), source })?;
    read_cohort(telemetry_file, alarms_file, telemetry_path, alarms_path)
}

/// Reader-based variant of [`load_cohort`]; the paths label error messages.
pub fn read_cohort(
    telemetry: impl io::Read,
    alarms: impl io::Read,
    telemetry_path: &Path,
    alarms_path: &Path,
) -> Result<LoadedCohort, TelemetryError> {
    let (appliances, extent, telemetry_rejects) = read_telemetry(telemetry, telemetry_path)?;
    let dataset_stub = CohortDataset { appliances, alarms: Vec::new(), extent };
    dataset_stub.validate()?;
    let (alarm_events, alarm_rejects) = read_alarms(alarms, alarms_path, &dataset_stub)?;
    let dataset = CohortDataset { alarms: alarm_events, ..dataset_stub };
    Ok(LoadedCohort { dataset, telemetry_rejects, alarm_rejects })
}

type RawSample = (Timestamp, Option<f64>, u64);

fn read_telemetry(
    reader: impl io::Read,
    path: &Path,
) -> Result<(Vec<ApplianceTelemetry>, TimeRange, Vec<RowReject>), TelemetryError> {
    let mut csv_reader = csv::ReaderBuilder::new().flexible(true).comment(Some(b'#')).from_reader(reader);
    let headers = csv_reader
        .headers()
        .map_err(|source| TelemetryError::Csv { path: path.to_path_buf(), source })?
        .clone();
    let ts_col = column_index(&headers, "timestamp", path)?;
    let appliance_col = column_index(&headers, "appliance_id", path)?;
    let sensor_col = column_index(&headers, "sensor_id", path)?;
    let value_col = column_index(&headers, "value", path)?;

    let mut rejects = Vec::new();
    let mut by_series: BTreeMap<String, BTreeMap<String, Vec<RawSample>>> = BTreeMap::new();
    let mut format: Option<TimestampFormat> = None;

    for (row_index, record) in csv_reader.into_records().enumerate() {
        let line = row_index as u64 + 2; // header occupies line 1
        let record = match record {
            Ok(r) => r,
            Err(source) => {
                // A structurally broken line is a row-level problem, not a
                // file-level one; later rows may still be fine.
                rejects.push(RowReject { line, reason: source.to_string() });
                continue;
            }
        };
        let field = |col: usize| record.get(col).unwrap_or("").trim();
        let ts_field = field(ts_col);
        let format = *format.get_or_insert_with(|| detect_timestamp_format(ts_field));
        let at = match parse_timestamp(ts_field, format) {
            Ok(t) => t,
            Err(reason) => {
                rejects.push(RowReject { line, reason });
                continue;
            }
        };
        let appliance = field(appliance_col);
        let sensor = field(sensor_col);
        if appliance.is_empty() || sensor.is_empty() {
            rejects.push(RowReject { line, reason: "empty appliance_id or sensor_id".into() });
            continue;
        }
        let value_field = field(value_col);
        let value = if value_field.is_empty() {
            None
        } else {
            match value_field.parse::<f64>() {
                Ok(v) if v.is_finite() => Some(v),
                Ok(_) => {
                    rejects.push(RowReject { line, reason: format!("non-finite value {value_field:?}") });
                    continue;
                }
                Err(_) => {
                    rejects.push(RowReject { line, reason: format!("unparseable value {value_field:?}") });
                    continue;
                }
            }
        };
        by_series
            .entry(appliance.to_owned())
            .or_default()
            .entry(sensor.to_owned())
            .or_default()
            .push((at, value, line));
    }

    if by_series.is_empty() {
        return Err(TelemetryError::NoUsableRows { path: path.to_path_buf() });
    }

    let mut appliances = Vec::with_capacity(by_series.len());
    let mut extent: Option<TimeRange> = None;
    for (appliance_id, sensors) in by_series {
        let mut series_map = BTreeMap::new();
        for (sensor_id, samples) in sensors {
            let series =
                match assemble_series(&appliance_id, &sensor_id, samples, &mut rejects)? {
                    Some(s) => s,
                    None => continue,
                };
            extent = Some(match extent {
                None => TimeRange::new(series.start, series.end()),
                Some(e) => TimeRange::new(e.start.min(series.start), e.end.max(series.end())),
            });
            series_map.insert(sensor_id, series);
        }
        appliances.push(ApplianceTelemetry { appliance_id, series: series_map });
    }

    let extent = extent.ok_or_else(|| TelemetryError::NoUsableRows { path: path.to_path_buf() })?;
    Ok((appliances, extent, rejects))
}

/// Builds one gridded series from raw rows: sort by time, drop duplicate
/// timestamps (first occurrence wins), infer the grid as the gcd of all
/// gaps, and mark uncovered grid points missing.
fn assemble_series(
    appliance_id: &str,
    sensor_id: &str,
    mut samples: Vec<RawSample>,
    rejects: &mut Vec<RowReject>,
) -> Result<Option<SensorSeries>, TelemetryError> {
    samples.sort_by_key(|(t, _, line)| (*t, *line));
    samples.dedup_by(|later, earlier| {
        let dup = later.0 == earlier.0;
        if dup {
            rejects.push(RowReject {
                line: later.2,
                reason: format!(
                    "duplicate timestamp {} for {appliance_id}/{sensor_id}",
                    later.0
                ),
            });
        }
        dup
    });
    if samples.is_empty() {
        return Ok(None);
    }

    let start = samples[0].0;
    let mut grid = 0i64;
    for pair in samples.windows(2) {
        grid = gcd(grid, (pair[1].0 - pair[0].0).minutes());
    }
    if grid == 0 {
        // Single sample: the grid is undetermined, one minute is the finest.
        grid = 1;
    }
    let span = (samples[samples.len() - 1].0 - start).minutes();
    let len = span / grid + 1;
    if len > MAX_SERIES_SAMPLES {
        return Err(TelemetryError::OversizedSeries {
            appliance: appliance_id.to_owned(),
            sensor: sensor_id.to_owned(),
            samples: len,
        });
    }
    let mut values = vec![None; len as usize];
    for (at, value, _) in samples {
        let index = ((at - start).minutes() / grid) as usize;
        values[index] = value;
    }
    Ok(Some(SensorSeries::new(
        sensor_id,
        start,
        Duration::from_minutes(grid),
        values,
    )))
}

fn gcd(a: i64, b: i64) -> i64 {
    let (mut a, mut b) = (a.abs(), b.abs());
    while b != 0 {
        (a, b) = (b, a % b);
    }
    a
}

fn read_alarms(
    reader: impl io::Read,
    path: &Path,
    dataset: &CohortDataset,
) -> Result<(Vec<AlarmEvent>, Vec<RowReject>), TelemetryError> {
    let mut csv_reader = csv::ReaderBuilder::new().flexible(true).comment(Some(b'#')).from_reader(reader);
    let headers = csv_reader
        .headers()
        .map_err(|source| TelemetryError::Csv { path: path.to_path_buf(), source })?
        .clone();
    let ts_col = column_index(&headers, "timestamp", path)?;
    let appliance_col = column_index(&headers, "appliance_id", path)?;
    let alarm_col = column_index(&headers, "alarm_id", path)?;

    let mut rejects = Vec::new();
    let mut events = Vec::new();
    let mut format: Option<TimestampFormat> = None;
    for (row_index, record) in csv_reader.into_records().enumerate() {
        let line = row_index as u64 + 2;
        let record = match record {
            Ok(r) => r,
            Err(source) => {
                rejects.push(RowReject { line, reason: source.to_string() });
                continue;
            }
        };
        let field = |col: usize| record.get(col).unwrap_or("").trim();
        let ts_field = field(ts_col);
        let format = *format.get_or_insert_with(|| detect_timestamp_format(ts_field));
        let at = match parse_timestamp(ts_field, format) {
            Ok(t) => t,
            Err(reason) => {
                rejects.push(RowReject { line, reason });
                continue;
            }
        };
        let appliance_id = field(appliance_col).to_owned();
        let alarm_id = field(alarm_col).to_owned();
        if appliance_id.is_empty() || alarm_id.is_empty() {
            rejects.push(RowReject { line, reason: "empty appliance_id or alarm_id".into() });
            continue;
        }
        if dataset.appliance_index(&appliance_id).is_none() {
            rejects.push(RowReject {
                line,
                reason: format!("alarm references unknown appliance {appliance_id}"),
            });
            continue;
        }
        if !dataset.extent.contains(at) {
            rejects.push(RowReject {
                line,
                reason: format!("alarm at {at} outside telemetry extent {}", dataset.extent),
            });
            continue;
        }
        events.push(AlarmEvent { appliance_id, alarm_id, at });
    }
    Ok((events, rejects))
}

/// Writes telemetry as `timestamp,appliance_id,sensor_id,value` with integer
/// minute timestamps and empty fields for missing readings. Values use the
/// shortest decimal form that parses back to the identical float, so a write
/// followed by [`read_cohort`] reproduces the dataset exactly.
pub fn write_telemetry_csv(
    dataset: &CohortDataset,
    writer: impl io::Write,
) -> Result<(), io::Error> {
    let mut out = csv::Writer::from_writer(writer);
    out.write_record(["timestamp", "appliance_id", "sensor_id", "value"])?;
    let mut value_buffer = String::new();
    for appliance in &dataset.appliances {
        for series in appliance.series.values() {
            for (index, value) in series.values.iter().enumerate() {
                value_buffer.clear();
                if let Some(v) = value {
                    value_buffer = format!("{v}");
                }
                out.write_record([
                    series.timestamp_at(index).minutes().to_string().as_str(),
                    appliance.appliance_id.as_str(),
                    series.sensor_id.as_str(),
                    value_buffer.as_str(),
                ])?;
            }
        }
    }
    out.flush()
}

/// Writes alarms as `timestamp,appliance_id,alarm_id`, sorted by
/// (time, appliance, alarm) so identical datasets serialize identically.
pub fn write_alarms_csv(alarms: &[AlarmEvent], writer: impl io::Write) -> Result<(), io::Error> {
    let mut sorted: Vec<&AlarmEvent> = alarms.iter().collect();
    sorted.sort_by_key(|a| (a.at, a.appliance_id.clone(), a.alarm_id.clone()));
    let mut out = csv::Writer::from_writer(writer);
    out.write_record(["timestamp", "appliance_id", "alarm_id"])?;
    for alarm in sorted {
        out.write_record([
            alarm.at.minutes().to_string().as_str(),
            alarm.appliance_id.as_str(),
            alarm.alarm_id.as_str(),
        ])?;
    }
    out.flush()
}

// ---------------------------------------------------------------------------
// Resampling and imputation
// ---------------------------------------------------------------------------

/// Resamples a series onto a coarser grid anchored at the epoch.
///
/// Output bin `[b, b + target)` holds the arithmetic mean of the observed
/// source samples inside it; a bin with no observed samples is missing.
/// Anchoring bins at the epoch (not at `series.start`) means every resampled
/// series in a cohort lands on one shared grid. Resampling an epoch-aligned
/// series onto its own grid returns it unchanged.
pub fn resample(series: &SensorSeries, target_interval: Duration) -> Result<SensorSeries, TelemetryError> {
    if !target_interval.is_positive() {
        return Err(TelemetryError::NonPositiveInterval { target: target_interval });
    }
    if target_interval < series.grid_interval {
        return Err(TelemetryError::TargetBelowGrid {
            target: target_interval,
            grid: series.grid_interval,
        });
    }
    let target = target_interval.minutes();
    let out_start = series.start.align_down(target_interval);
    let last = series.timestamp_at(series.len() - 1);
    let bins = (last - out_start).minutes() / target + 1;

    let mut sums = vec![0.0f64; bins as usize];
    let mut counts = vec![0u32; bins as usize];
    for (index, value) in series.values.iter().enumerate() {
        if let Some(v) = value {
            let bin = ((series.timestamp_at(index) - out_start).minutes() / target) as usize;
            sums[bin] += v;
            counts[bin] += 1;
        }
    }
    let values = sums
        .into_iter()
        .zip(counts)
        .map(|(sum, count)| (count > 0).then(|| sum / count as f64))
        .collect();
    Ok(SensorSeries::new(series.sensor_id.clone(), out_start, target_interval, values))
}

/// Replaces every missing sample with the median of the observed ones.
///
/// An even count of observed values takes the mean of the two central ones.
/// Errors if the series has no observed values at all.
pub fn impute_median(series: &SensorSeries) -> Result<SensorSeries, TelemetryError> {
    let mut observed: Vec<f64> = series.values.iter().flatten().copied().collect();
    if observed.is_empty() {
        return Err(TelemetryError::AllMissing { sensor: series.sensor_id.clone() });
    }
    observed.sort_by(f64::total_cmp);
    let mid = observed.len() / 2;
    let median = if observed.len() % 2 == 1 {
        observed[mid]
    } else {
        (observed[mid - 1] + observed[mid]) / 2.0
    };
    let values = series.values.iter().map(|v| Some(v.unwrap_or(median))).collect();
    Ok(SensorSeries::new(
        series.sensor_id.clone(),
        series.start,
        series.grid_interval,
        values,
    ))
}

/// Outcome of [`prepare`]: the analysis-ready dataset plus any alarms that
/// fell outside the trimmed common extent.
#[derive(Clone, Debug)]
pub struct PreparedCohort {
    pub dataset: CohortDataset,
    pub dropped_alarms: Vec<AlarmEvent>,
}

/// Puts a loaded dataset onto one shared grid with no missing samples:
/// resample every series to `target_interval`, trim all series to the
/// cohort-wide common extent, then median-impute per series. Alarms outside
/// the trimmed extent are returned separately rather than silently dropped.
pub fn prepare(
    dataset: &CohortDataset,
    target_interval: Duration,
) -> Result<PreparedCohort, TelemetryError> {
    let mut resampled: Vec<ApplianceTelemetry> = Vec::with_capacity(dataset.appliances.len());
    let mut common: Option<(Timestamp, Timestamp)> = None;
    for appliance in &dataset.appliances {
        let mut series_map = BTreeMap::new();
        for series in appliance.series.values() {
            let out = resample(series, target_interval)?;
            common = Some(match common {
                None => (out.start, out.end()),
                Some((s, e)) => (s.max(out.start), e.min(out.end())),
            });
            series_map.insert(out.sensor_id.clone(), out);
        }
        resampled.push(ApplianceTelemetry {
            appliance_id: appliance.appliance_id.clone(),
            series: series_map,
        });
    }
    let (start, end) = common.ok_or(TelemetryError::NoCommonExtent)?;
    if start >= end {
        return Err(TelemetryError::NoCommonExtent);
    }
    let extent = TimeRange::new(start, end);

    for appliance in &mut resampled {
        for series in appliance.series.values_mut() {
            let from = series.index_of(start).expect("common extent is on the shared grid");
            let len = ((end - start).minutes() / target_interval.minutes()) as usize;
            series.values = series.values[from..from + len].to_vec();
            series.start = start;
            *series = impute_median(series)?;
        }
    }

    let (kept, dropped) = dataset
        .alarms
        .iter()
        .cloned()
        .partition(|alarm| extent.contains(alarm.at));
    let prepared = CohortDataset { appliances: resampled, alarms: kept, extent };
    prepared.validate()?;
    Ok(PreparedCohort { dataset: prepared, dropped_alarms: dropped })
}

// ---------------------------------------------------------------------------
// Alarm exclusions
// ---------------------------------------------------------------------------

/// One audit exclusion: alarms matching the (possibly wildcarded) appliance
/// and alarm ids inside the closed interval `[from, to]` are dropped.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct ExclusionRule {
    /// `None` matches every appliance.
    pub appliance_id: Option<String>,
    /// `None` matches every alarm type.
    pub alarm_id: Option<String>,
    pub from: Timestamp,
    pub to: Timestamp,
}

impl ExclusionRule {
    pub fn matches(&self, alarm: &AlarmEvent) -> bool {
        let appliance_ok = self
            .appliance_id
            .as_deref()
            .is_none_or(|id| id == alarm.appliance_id);
        let alarm_ok = self.alarm_id.as_deref().is_none_or(|id| id == alarm.alarm_id);
        appliance_ok && alarm_ok && self.from <= alarm.at && alarm.at <= self.to
    }
}

/// Drops alarms matched by any rule, preserving the original order.
pub fn filter_alarms(alarms: &[AlarmEvent], rules: &[ExclusionRule]) -> Vec<AlarmEvent> {
    alarms
        .iter()
        .filter(|alarm| !rules.iter().any(|rule| rule.matches(alarm)))
        .cloned()
        .collect()
}

/// Loads exclusion rules from `appliance_id,alarm_id,from,to` CSV, where `*`
/// wildcards an id column. Unparseable rows are reported, not fatal.
pub fn read_exclusions(
    reader: impl io::Read,
    path: &Path,
) -> Result<(Vec<ExclusionRule>, Vec<RowReject>), TelemetryError> {
    let mut csv_reader = csv::ReaderBuilder::new().flexible(true).comment(Some(b'#')).from_reader(reader);
    let headers = csv_reader
        .headers()
        .map_err(|source| TelemetryError::Csv { path: path.to_path_buf(), source })?
        .clone();
    let appliance_col = column_index(&headers, "appliance_id", path)?;
    let alarm_col = column_index(&headers, "alarm_id", path)?;
    let from_col = column_index(&headers, "from", path)?;
    let to_col = column_index(&headers, "to", path)?;

    let mut rules = Vec::new();
    let mut rejects = Vec::new();
    let mut format: Option<TimestampFormat> = None;
    for (row_index, record) in csv_reader.into_records().enumerate() {
        let line = row_index as u64 + 2;
        let record = match record {
            Ok(r) => r,
            Err(source) => {
                rejects.push(RowReject { line, reason: source.to_string() });
                continue;
            }
        };
        let field = |col: usize| record.get(col).unwrap_or("").trim();
        let wildcard = |s: &str| (s != "*").then(|| s.to_owned());
        let format_for = |f: &mut Option<TimestampFormat>, s: &str| {
            *f.get_or_insert_with(|| detect_timestamp_format(s))
        };
        let from_field = field(from_col);
        let fmt = format_for(&mut format, from_field);
        let (from, to) = match (
            parse_timestamp(from_field, fmt),
            parse_timestamp(field(to_col), fmt),
        ) {
            (Ok(f), Ok(t)) if f <= t => (f, t),
            (Ok(f), Ok(t)) => {
                rejects.push(RowReject {
                    line,
                    reason: format!("exclusion range {f}..{t} is reversed"),
                });
                continue;
            }
            (Err(reason), _) | (_, Err(reason)) => {
                rejects.push(RowReject { line, reason });
                continue;
            }
        };
        rules.push(ExclusionRule {
            appliance_id: wildcard(field(appliance_col)),
            alarm_id: wildcard(field(alarm_col)),
            from,
            to,
        });
    }
    Ok((rules, rejects))
}
