//! Run configuration: one declarative TOML file per run.
//!
//! A run is described by a single file with sections mirroring the pipeline
//! stages; every subcommand takes the same file and reads the sections it
//! needs. Paths may be overridden through `FAULTCAST_TELEMETRY`,
//! `FAULTCAST_ALARMS`, `FAULTCAST_EXCLUSIONS`, and `FAULTCAST_OUT_DIR`;
//! nothing else is overridable from the environment. Relative paths in the
//! file resolve against the file's own directory, while paths from the
//! environment resolve against the working directory.

use crate::error::CliError;
use faultcast::eval::CostModel;
use faultcast::features::FeatureSet;
use faultcast::model::{TrainConfig, TreeParams};
use faultcast::simulate::{FaultMode, FaultScript, SimConfig};
use faultcast::time::{Duration, Timestamp, MINUTES_PER_DAY};
use faultcast::windowing::WindowSpec;
use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};
use std::path::{Path, PathBuf};

/// Lookup for environment overrides; the binary passes `std::env::var`,
/// tests pass a closure over a map.
pub type EnvLookup<'a> = dyn Fn(&str) -> Option<String> + 'a;

/// The full declarative description of a run.
#[derive(Clone, Debug, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RunConfig {
    pub paths: PathsSection,
    #[serde(default)]
    pub data: DataSection,
    #[serde(default)]
    pub window: WindowSection,
    #[serde(default)]
    pub features: FeaturesSection,
    #[serde(default)]
    pub train: TrainSection,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub cost: Option<CostSection>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub simulate: Option<SimulateSection>,
}

/// Input and output locations.
#[derive(Clone, Debug, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct PathsSection {
    pub telemetry: PathBuf,
    pub alarms: PathBuf,
    /// Optional audit-exclusion rules; omitted means no filtering.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub exclusions: Option<PathBuf>,
    pub out_dir: PathBuf,
}

/// How raw telemetry is put onto the shared analysis grid.
#[derive(Clone, Debug, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct DataSection {
    /// Target resampling interval in minutes.
    pub resample_minutes: i64,
    /// Alarm types to analyze; the single entry `"*"` selects every alarm
    /// id present in the alarms file.
    pub alarm_ids: Vec<String>,
}

impl Default for DataSection {
    fn default() -> Self {
        DataSection { resample_minutes: 60, alarm_ids: vec!["*".to_owned()] }
    }
}

/// Window geometry in whole days.
#[derive(Clone, Debug, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct WindowSection {
    pub telemetry_days: i64,
    pub action_days: i64,
    pub forecast_days: i64,
    pub step_days: i64,
}

impl Default for WindowSection {
    fn default() -> Self {
        WindowSection { telemetry_days: 14, action_days: 7, forecast_days: 7, step_days: 1 }
    }
}

/// Which feature sets to build and compare.
#[derive(Clone, Debug, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct FeaturesSection {
    /// Keys: `baseline`, `cohort_pearson`, `cohort_spearman`, `cohort_ps`,
    /// `comb`.
    pub sets: Vec<String>,
}

impl Default for FeaturesSection {
    fn default() -> Self {
        FeaturesSection {
            sets: FeatureSet::ALL.iter().map(|set| set.key().to_owned()).collect(),
        }
    }
}

/// Classifier settings.
#[derive(Clone, Debug, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct TrainSection {
    pub n_rounds: usize,
    pub max_depth: usize,
    pub min_samples_leaf: usize,
    pub epsilon_clamp: f64,
    pub positive_weight: f64,
}

impl Default for TrainSection {
    fn default() -> Self {
        let train = TrainConfig::default();
        TrainSection {
            n_rounds: train.n_rounds,
            max_depth: train.tree.max_depth,
            min_samples_leaf: train.tree.min_samples_leaf,
            epsilon_clamp: train.epsilon_clamp,
            positive_weight: train.positive_weight,
        }
    }
}

/// Alarm-threshold selection costs; present at all enables selection.
#[derive(Clone, Debug, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct CostSection {
    pub missed_fault: f64,
    pub false_alarm: f64,
}

impl Default for CostSection {
    fn default() -> Self {
        let cost = CostModel::default();
        CostSection { missed_fault: cost.missed_fault, false_alarm: cost.false_alarm }
    }
}

/// Synthetic cohort description, read only by the `simulate` subcommand.
#[derive(Clone, Debug, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SimulateSection {
    pub appliances: usize,
    pub sensors: usize,
    pub days: i64,
    #[serde(default = "default_grid_minutes")]
    pub grid_minutes: i64,
    #[serde(default = "default_seasonal_amplitude")]
    pub seasonal_amplitude: f64,
    #[serde(default = "default_daily_amplitude")]
    pub daily_amplitude: f64,
    #[serde(default = "default_bias_spread")]
    pub bias_spread: f64,
    #[serde(default = "default_noise_std")]
    pub noise_std: f64,
    #[serde(default)]
    pub seed: u64,
    /// Per-appliance yearly phase offsets in days; empty means all zero.
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    pub seasonal_phase_days: Vec<f64>,
    #[serde(default, rename = "fault", skip_serializing_if = "Vec::is_empty")]
    pub faults: Vec<FaultSection>,
}

fn default_grid_minutes() -> i64 {
    60
}
fn default_seasonal_amplitude() -> f64 {
    10.0
}
fn default_daily_amplitude() -> f64 {
    3.0
}
fn default_bias_spread() -> f64 {
    2.0
}
fn default_noise_std() -> f64 {
    0.5
}

/// One scripted fault, written as a `[[simulate.fault]]` table.
#[derive(Clone, Debug, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct FaultSection {
    pub appliance: usize,
    pub alarm_id: String,
    /// Day index of the hard fault (the alarm instant).
    pub fault_day: i64,
    /// Days of anomalous behavior before the fault.
    pub lead_days: i64,
    pub mode: FaultMode,
    pub severity: f64,
    /// Affected sensor indices; empty or omitted means all sensors.
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    pub sensors: Vec<usize>,
}

impl RunConfig {
    pub fn window_spec(&self) -> Result<WindowSpec, CliError> {
        let w = &self.window;
        let spec = WindowSpec {
            telemetry_window: Duration::from_days(w.telemetry_days),
            action_window: Duration::from_days(w.action_days),
            forecast_window: Duration::from_days(w.forecast_days),
            step: Duration::from_days(w.step_days),
        };
        if !spec.is_valid() {
            return Err(CliError::Config(format!(
                "window: all of telemetry_days, action_days, forecast_days, step_days \
                 must be positive (got {}, {}, {}, {})",
                w.telemetry_days, w.action_days, w.forecast_days, w.step_days
            )));
        }
        Ok(spec)
    }

    pub fn feature_sets(&self) -> Result<Vec<FeatureSet>, CliError> {
        if self.features.sets.is_empty() {
            return Err(CliError::Config("features: sets must not be empty".to_owned()));
        }
        let mut sets = Vec::with_capacity(self.features.sets.len());
        for key in &self.features.sets {
            let set: FeatureSet = key
                .parse()
                .map_err(|message| CliError::Config(format!("features: {message}")))?;
            if sets.contains(&set) {
                return Err(CliError::Config(format!("features: {key:?} listed twice")));
            }
            sets.push(set);
        }
        Ok(sets)
    }

    pub fn train_config(&self) -> Result<TrainConfig, CliError> {
        let t = &self.train;
        if t.n_rounds == 0 {
            return Err(CliError::Config("train: n_rounds must be at least 1".to_owned()));
        }
        if t.max_depth == 0 {
            return Err(CliError::Config("train: max_depth must be at least 1".to_owned()));
        }
        if t.min_samples_leaf == 0 {
            return Err(CliError::Config(
                "train: min_samples_leaf must be at least 1".to_owned(),
            ));
        }
        if !(t.epsilon_clamp > 0.0 && t.epsilon_clamp < 0.5) {
            return Err(CliError::Config(
                "train: epsilon_clamp must lie strictly between 0 and 0.5".to_owned(),
            ));
        }
        if !(t.positive_weight.is_finite() && t.positive_weight > 0.0) {
            return Err(CliError::Config(
                "train: positive_weight must be positive and finite".to_owned(),
            ));
        }
        Ok(TrainConfig {
            n_rounds: t.n_rounds,
            tree: TreeParams { max_depth: t.max_depth, min_samples_leaf: t.min_samples_leaf },
            epsilon_clamp: t.epsilon_clamp,
            positive_weight: t.positive_weight,
        })
    }

    pub fn cost_model(&self) -> Result<Option<CostModel>, CliError> {
        let Some(cost) = &self.cost else { return Ok(None) };
        if !(cost.missed_fault.is_finite() && cost.missed_fault >= 0.0)
            || !(cost.false_alarm.is_finite() && cost.false_alarm >= 0.0)
        {
            return Err(CliError::Config(
                "cost: missed_fault and false_alarm must be finite and non-negative".to_owned(),
            ));
        }
        Ok(Some(CostModel { missed_fault: cost.missed_fault, false_alarm: cost.false_alarm }))
    }

    pub fn resample_interval(&self) -> Result<Duration, CliError> {
        if self.data.resample_minutes <= 0 {
            return Err(CliError::Config(
                "data: resample_minutes must be positive".to_owned(),
            ));
        }
        Ok(Duration::from_minutes(self.data.resample_minutes))
    }

    /// Builds the simulator settings; errors if the `[simulate]` section is
    /// missing or inconsistent.
    pub fn sim_config(&self) -> Result<SimConfig, CliError> {
        let section = self.simulate.as_ref().ok_or_else(|| {
            CliError::Config(
                "the simulate subcommand needs a [simulate] section".to_owned(),
            )
        })?;
        if section.grid_minutes <= 0 {
            return Err(CliError::Config(
                "simulate: grid_minutes must be positive".to_owned(),
            ));
        }
        let mut sim =
            SimConfig::new(section.appliances, section.sensors, section.days);
        sim.grid_interval = Duration::from_minutes(section.grid_minutes);
        sim.seasonal_amplitude = section.seasonal_amplitude;
        sim.daily_amplitude = section.daily_amplitude;
        sim.bias_spread = section.bias_spread;
        sim.noise_std = section.noise_std;
        sim.seed = section.seed;
        sim.seasonal_phase_days = section.seasonal_phase_days.clone();
        for fault in &section.faults {
            if fault.fault_day < 0 || fault.lead_days < 0 {
                return Err(CliError::Config(format!(
                    "simulate: fault for alarm {:?} has a negative day",
                    fault.alarm_id
                )));
            }
            sim.faults.push(FaultScript {
                appliance: fault.appliance,
                alarm_id: fault.alarm_id.clone(),
                fault_time: Timestamp::from_minutes(fault.fault_day * MINUTES_PER_DAY),
                lead: Duration::from_days(fault.lead_days),
                affected_sensors: fault.sensors.clone(),
                mode: fault.mode,
                severity: fault.severity,
            });
        }
        Ok(sim)
    }
}

/// A parsed configuration with environment overrides applied, plus the
/// canonical form that gets echoed into every artifact.
#[derive(Clone, Debug)]
pub struct LoadedConfig {
    pub config: RunConfig,
    /// TOML serialization of the effective config (after overrides).
    pub echo: String,
    /// Hex SHA-256 of the raw config file bytes.
    pub file_sha256: String,
}

/// Reads, parses, and resolves a run configuration.
pub fn load_config(path: &Path, env: &EnvLookup) -> Result<LoadedConfig, CliError> {
    let bytes = std::fs::read(path).map_err(|e| {
        CliError::Usage(format!("cannot read config {}: {e}", path.display()))
    })?;
    let text = String::from_utf8(bytes.clone())
        .map_err(|_| CliError::Config(format!("config {} is not UTF-8", path.display())))?;
    let mut config: RunConfig = toml::from_str(&text)
        .map_err(|e| CliError::Config(format!("config {}: {e}", path.display())))?;

    let base = path.parent().unwrap_or_else(|| Path::new("."));
    config.paths.telemetry = resolve_path(base, &config.paths.telemetry);
    config.paths.alarms = resolve_path(base, &config.paths.alarms);
    config.paths.exclusions =
        config.paths.exclusions.as_ref().map(|p| resolve_path(base, p));
    config.paths.out_dir = resolve_path(base, &config.paths.out_dir);

    // Environment overrides, paths only. Values are taken verbatim, so they
    // resolve against the working directory like any command-line path.
    if let Some(v) = env("FAULTCAST_TELEMETRY") {
        config.paths.telemetry = PathBuf::from(v);
    }
    if let Some(v) = env("FAULTCAST_ALARMS") {
        config.paths.alarms = PathBuf::from(v);
    }
    if let Some(v) = env("FAULTCAST_EXCLUSIONS") {
        config.paths.exclusions = Some(PathBuf::from(v));
    }
    if let Some(v) = env("FAULTCAST_OUT_DIR") {
        config.paths.out_dir = PathBuf::from(v);
    }

    let echo = toml::to_string(&config)
        .map_err(|e| CliError::Internal(format!("cannot re-serialize config: {e}")))?;
    let file_sha256 = hex_sha256(&bytes);
    Ok(LoadedConfig { config, echo, file_sha256 })
}

fn resolve_path(base: &Path, path: &Path) -> PathBuf {
    if path.is_absolute() {
        path.to_path_buf()
    } else {
        base.join(path)
    }
}

pub fn hex_sha256(bytes: &[u8]) -> String {
    let digest = Sha256::digest(bytes);
    let mut out = String::with_capacity(64);
    for byte in digest {
        out.push_str(&format!("{byte:02x}"));
    }
    out
}
