//! Synthetic cohort generator.
//!
//! Every appliance runs the same plant model: per-sensor operating level,
//! a yearly seasonal swing, a daily cycle, an appliance-specific calibration
//! bias, and Gaussian measurement noise. Peers therefore track each other
//! closely while healthy, which is exactly the structure the cohort
//! dissimilarity features exploit. Scripted faults distort one appliance's
//! affected sensors during a lead interval before the alarm fires.
//!
//! # Reproducibility
//!
//! All randomness derives from ChaCha8 streams keyed by content, never by
//! call order. The 32-byte stream key is laid out as:
//!
//! * bytes 0..8: the configured seed, little-endian u64,
//! * bytes 8..12: appliance index, little-endian u32,
//! * bytes 12..16: sensor index, little-endian u32,
//! * byte 16: stream kind (0 bias, 1 noise, 2 fault),
//! * remaining bytes zero.
//!
//! Uniform doubles take the top 53 bits of `next_u64`, giving values in
//! `[0, 1)`. Normal draws use the Box-Muller map
//! `sqrt(-2 ln(1 - u1)) * cos(tau * u2)` with two fresh uniforms per draw,
//! so every variate is a pure function of its position in the stream. The
//! exact procedure is spelled out here because regenerating a dataset byte
//! for byte on another machine is part of the crate's contract.

use crate::telemetry::{AlarmEvent, ApplianceTelemetry, CohortDataset, SensorSeries};
use crate::time::{Duration, TimeRange, Timestamp, MINUTES_PER_DAY};
use rand_chacha::ChaCha8Rng;
use rand_core::{RngCore, SeedableRng};
use serde::{Deserialize, Serialize};
use std::collections::BTreeMap;
use std::f64::consts::TAU;
use thiserror::Error;

const DAYS_PER_YEAR: f64 = 365.0;

/// Peak fractional swing of the decorrelation fault's amplitude gain at
/// severity 1. Kept below 1 so the gain never reaches zero.
const SEASONAL_GAIN: f64 = 0.75;

/// How a scripted fault distorts the affected sensors before its alarm.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum FaultMode {
    /// Additive ramp growing by `severity` units per day since onset.
    Drift,
    /// Degrades the sensor in two coupled ways. First, the sub-seasonal
    /// residual (daily cycle plus noise) rotates toward a ghost process
    /// with the same texture: the daily cycle shifts a quarter period and
    /// the noise is redrawn, with blend weights `sqrt(1 - severity)` and
    /// `sqrt(severity)` summing to one in quadrature so the residual's
    /// variance is untouched. The appliance keeps its own seasonal track
    /// and level but stops co-moving with its peers. Second, the residual's
    /// amplitude is scaled by a gain tied to the appliance's own point in
    /// the seasonal cycle, so the swing runs hot near the seasonal peak and
    /// quiet near the trough.
    Decorrelate,
    /// Holds the value sampled at onset for the whole lead interval.
    Flatline,
}

/// One scripted fault: an alarm at `fault_time` preceded by `lead` of
/// degraded behavior on `appliance`.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct FaultScript {
    /// Appliance index into the generated cohort.
    pub appliance: usize,
    /// Alarm type recorded in the event stream.
    pub alarm_id: String,
    pub fault_time: Timestamp,
    /// Length of the degraded interval `[fault_time - lead, fault_time)`.
    pub lead: Duration,
    /// Affected sensor indices; empty means every sensor.
    pub affected_sensors: Vec<usize>,
    pub mode: FaultMode,
    /// Mode-specific magnitude: units per day for drift, blend fraction in
    /// `[0, 1]` for decorrelation, unused for flatline.
    pub severity: f64,
}

/// Cohort generator settings.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SimConfig {
    pub appliances: usize,
    pub sensors: usize,
    pub days: i64,
    pub grid_interval: Duration,
    /// Amplitude of the shared yearly swing.
    pub seasonal_amplitude: f64,
    /// Amplitude of the shared daily cycle.
    pub daily_amplitude: f64,
    /// Appliance calibration biases are uniform in `[-spread, spread]`.
    pub bias_spread: f64,
    /// Standard deviation of per-sample measurement noise.
    pub noise_std: f64,
    /// Per-appliance seasonal phase offset in days; empty means all zero.
    /// An appliance whose offset differs from its peers' runs the same
    /// yearly cycle shifted in time.
    pub seasonal_phase_days: Vec<f64>,
    pub faults: Vec<FaultScript>,
    pub seed: u64,
}

impl SimConfig {
    /// Healthy-cohort defaults; scenarios override single fields.
    pub fn new(appliances: usize, sensors: usize, days: i64) -> Self {
        SimConfig {
            appliances,
            sensors,
            days,
            grid_interval: Duration::from_hours(1),
            seasonal_amplitude: 10.0,
            daily_amplitude: 3.0,
            bias_spread: 2.0,
            noise_std: 0.5,
            seasonal_phase_days: Vec::new(),
            faults: Vec::new(),
            seed: 0,
        }
    }
}

#[derive(Debug, Error)]
pub enum SimError {
    #[error("cohort needs at least two appliances, got {0}")]
    TooFewAppliances(usize),
    #[error("cohort needs at least one sensor")]
    NoSensors,
    #[error("simulation length must be positive, got {0} days")]
    NonPositiveDays(i64),
    #[error("grid interval must be positive")]
    NonPositiveGrid,
    #[error("seasonal_phase_days has {got} entries for {appliances} appliances")]
    PhaseCountMismatch { got: usize, appliances: usize },
    #[error("fault {index}: appliance {appliance} is out of range")]
    FaultApplianceRange { index: usize, appliance: usize },
    #[error("fault {index}: sensor {sensor} is out of range")]
    FaultSensorRange { index: usize, sensor: usize },
    #[error("fault {index}: lead must be positive")]
    FaultLead { index: usize },
    #[error("fault {index}: alarm id must not be empty")]
    FaultAlarmId { index: usize },
    #[error("fault {index}: degraded interval escapes the simulated extent")]
    FaultOutsideExtent { index: usize },
    #[error("fault {index}: decorrelation severity {severity} is outside [0, 1]")]
    FaultSeverity { index: usize, severity: f64 },
}

/// Stream kinds for the keyed generators.
#[derive(Clone, Copy)]
enum StreamKind {
    Bias = 0,
    Noise = 1,
    Fault = 2,
}

fn stream(seed: u64, appliance: usize, sensor: usize, kind: StreamKind) -> ChaCha8Rng {
    let mut key = [0u8; 32];
    key[0..8].copy_from_slice(&seed.to_le_bytes());
    key[8..12].copy_from_slice(&(appliance as u32).to_le_bytes());
    key[12..16].copy_from_slice(&(sensor as u32).to_le_bytes());
    key[16] = kind as u8;
    ChaCha8Rng::from_seed(key)
}

/// Uniform in `[0, 1)` from the top 53 bits of one `next_u64`.
fn next_uniform(rng: &mut ChaCha8Rng) -> f64 {
    (rng.next_u64() >> 11) as f64 / (1u64 << 53) as f64
}

/// Standard normal via Box-Muller; consumes exactly two uniforms.
fn next_normal(rng: &mut ChaCha8Rng) -> f64 {
    let u1 = next_uniform(rng);
    let u2 = next_uniform(rng);
    (-2.0 * (1.0 - u1).ln()).sqrt() * (TAU * u2).cos()
}

/// Operating level of sensor `k`; fixed so cohorts are comparable across
/// configurations.
fn sensor_base(sensor: usize) -> f64 {
    20.0 + 6.0 * sensor as f64
}

/// Daily-cycle phase of sensor `k`, spread so sensors are not redundant.
fn sensor_daily_phase(sensor: usize) -> f64 {
    0.7 * sensor as f64
}

fn validate(config: &SimConfig) -> Result<(), SimError> {
    if config.appliances < 2 {
        return Err(SimError::TooFewAppliances(config.appliances));
    }
    if config.sensors == 0 {
        return Err(SimError::NoSensors);
    }
    if config.days <= 0 {
        return Err(SimError::NonPositiveDays(config.days));
    }
    if !config.grid_interval.is_positive() {
        return Err(SimError::NonPositiveGrid);
    }
    if !config.seasonal_phase_days.is_empty()
        && config.seasonal_phase_days.len() != config.appliances
    {
        return Err(SimError::PhaseCountMismatch {
            got: config.seasonal_phase_days.len(),
            appliances: config.appliances,
        });
    }
    let extent_end = config.days * MINUTES_PER_DAY;
    for (index, fault) in config.faults.iter().enumerate() {
        if fault.appliance >= config.appliances {
            return Err(SimError::FaultApplianceRange { index, appliance: fault.appliance });
        }
        for &sensor in &fault.affected_sensors {
            if sensor >= config.sensors {
                return Err(SimError::FaultSensorRange { index, sensor });
            }
        }
        if !fault.lead.is_positive() {
            return Err(SimError::FaultLead { index });
        }
        if fault.alarm_id.is_empty() {
            return Err(SimError::FaultAlarmId { index });
        }
        let onset_minutes = fault.fault_time.minutes() - fault.lead.minutes();
        if onset_minutes < 0 || fault.fault_time.minutes() >= extent_end {
            return Err(SimError::FaultOutsideExtent { index });
        }
        if matches!(fault.mode, FaultMode::Decorrelate)
            && !(0.0..=1.0).contains(&fault.severity)
        {
            return Err(SimError::FaultSeverity { index, severity: fault.severity });
        }
    }
    Ok(())
}

fn appliance_id(index: usize, count: usize) -> String {
    let width = count.to_string().len().max(2);
    format!("hvac{:0width$}", index + 1)
}

fn sensor_id(index: usize, count: usize) -> String {
    let width = count.to_string().len().max(2);
    format!("s{:0width$}", index + 1)
}

/// Generates the cohort described by `config`, alarms included.
pub fn generate_cohort(config: &SimConfig) -> Result<CohortDataset, SimError> {
    validate(config)?;
    let extent = TimeRange::new(
        Timestamp::from_minutes(0),
        Timestamp::from_minutes(config.days * MINUTES_PER_DAY),
    );
    let grid = config.grid_interval.minutes();
    let n_samples = ((extent.end.minutes() - 1) / grid + 1) as usize;

    let mut appliances = Vec::with_capacity(config.appliances);
    for a in 0..config.appliances {
        let phase_days = config.seasonal_phase_days.get(a).copied().unwrap_or(0.0);
        let mut series = BTreeMap::new();
        for k in 0..config.sensors {
            let bias = {
                let mut rng = stream(config.seed, a, k, StreamKind::Bias);
                (2.0 * next_uniform(&mut rng) - 1.0) * config.bias_spread
            };
            let mut noise = stream(config.seed, a, k, StreamKind::Noise);
            let mut values = Vec::with_capacity(n_samples);
            for j in 0..n_samples {
                let minutes = j as i64 * grid;
                let t_days = minutes as f64 / MINUTES_PER_DAY as f64;
                let seasonal = config.seasonal_amplitude
                    * (TAU * (t_days + phase_days) / DAYS_PER_YEAR).sin();
                let daily = config.daily_amplitude
                    * (TAU * t_days.fract() + sensor_daily_phase(k)).sin();
                let clean = sensor_base(k)
                    + seasonal
                    + daily
                    + bias
                    + config.noise_std * next_normal(&mut noise);
                values.push(Some(clean));
            }
            apply_faults(config, a, k, bias, phase_days, grid, &mut values);
            series.insert(
                sensor_id(k, config.sensors),
                SensorSeries::new(
                    sensor_id(k, config.sensors),
                    Timestamp::from_minutes(0),
                    config.grid_interval,
                    values,
                ),
            );
        }
        appliances.push(ApplianceTelemetry {
            appliance_id: appliance_id(a, config.appliances),
            series,
        });
    }

    let alarms = config
        .faults
        .iter()
        .map(|fault| AlarmEvent {
            appliance_id: appliance_id(fault.appliance, config.appliances),
            alarm_id: fault.alarm_id.clone(),
            at: fault.fault_time,
        })
        .collect();

    Ok(CohortDataset { appliances, alarms, extent })
}

/// Applies every fault touching `(appliance, sensor)` to the clean series.
///
/// Faults are applied in script order; overlapping scripts compose in that
/// order. Decorrelation draws come from the fault stream in ascending
/// sample order, one draw per affected sample, so the distortion does not
/// depend on how many other faults exist.
fn apply_faults(
    config: &SimConfig,
    appliance: usize,
    sensor: usize,
    bias: f64,
    phase_days: f64,
    grid: i64,
    values: &mut [Option<f64>],
) {
    let mut fault_rng = stream(config.seed, appliance, sensor, StreamKind::Fault);
    for fault in &config.faults {
        if fault.appliance != appliance {
            continue;
        }
        if !fault.affected_sensors.is_empty() && !fault.affected_sensors.contains(&sensor) {
            continue;
        }
        let onset = fault.fault_time - fault.lead;
        // First grid sample at or after onset, first at or after the alarm.
        let first = ((onset.minutes() + grid - 1) / grid) as usize;
        let last = (((fault.fault_time.minutes() + grid - 1) / grid) as usize).min(values.len());
        let held = values[first];
        let keep = (1.0 - fault.severity).sqrt();
        let mix = fault.severity.sqrt();
        for (j, value) in values.iter_mut().enumerate().take(last).skip(first) {
            let minutes = j as i64 * grid;
            let clean = value.expect("simulator emits complete series");
            *value = Some(match fault.mode {
                FaultMode::Drift => {
                    let elapsed_days =
                        (minutes - onset.minutes()) as f64 / MINUTES_PER_DAY as f64;
                    clean + fault.severity * elapsed_days
                }
                FaultMode::Decorrelate => {
                    let level = sensor_base(sensor) + bias;
                    let t_days = minutes as f64 / MINUTES_PER_DAY as f64;
                    let year_angle = TAU * (t_days + phase_days) / DAYS_PER_YEAR;
                    let seasonal = config.seasonal_amplitude * year_angle.sin();
                    let quarter_daily = config.daily_amplitude
                        * (TAU * t_days.fract()
                            + sensor_daily_phase(sensor)
                            + std::f64::consts::FRAC_PI_2)
                            .sin();
                    let swapped =
                        quarter_daily + config.noise_std * next_normal(&mut fault_rng);
                    // The gain is constant within any one window, so it
                    // cancels out of correlation features and surfaces only
                    // in per-window spread statistics.
                    let gain = 1.0 + SEASONAL_GAIN * fault.severity * year_angle.sin();
                    let residual = clean - level - seasonal;
                    level + seasonal + gain * (keep * residual + mix * swapped)
                }
                FaultMode::Flatline => held.expect("onset sample exists"),
            });
        }
    }
}
