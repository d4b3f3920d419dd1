//! Error taxonomy mapped onto process exit codes.
//!
//! Exit codes: 0 success, 1 usage or configuration error, 2 data error,
//! 3 internal invariant violation. Messages carry the originating pipeline
//! stage so a failure in a long run can be traced without a debugger.

use faultcast::eval::EvalError;
use faultcast::features::FeatureError;
use faultcast::model::ModelError;
use faultcast::simulate::SimError;
use faultcast::telemetry::TelemetryError;
use thiserror::Error;

#[derive(Debug, Error)]
pub enum CliError {
    /// Bad invocation: unknown flags, missing arguments, unreadable config.
    #[error("{0}")]
    Usage(String),
    /// The config parsed but describes an invalid run.
    #[error("{0}")]
    Config(String),
    /// The input data cannot support the requested run.
    #[error("{0}")]
    Data(String),
    /// A postcondition the pipeline guarantees was violated; a bug.
    #[error("internal error: {0}")]
    Internal(String),
}

impl CliError {
    pub fn exit_code(&self) -> i32 {
        match self {
            CliError::Usage(_) | CliError::Config(_) => 1,
            CliError::Data(_) => 2,
            CliError::Internal(_) => 3,
        }
    }
}

impl From<TelemetryError> for CliError {
    fn from(e: TelemetryError) -> Self {
        CliError::Data(format!("telemetry: {e}"))
    }
}

impl From<SimError> for CliError {
    fn from(e: SimError) -> Self {
        // Every simulator failure traces back to the [simulate] section.
        CliError::Config(format!("simulate: {e}"))
    }
}

impl From<FeatureError> for CliError {
    fn from(e: FeatureError) -> Self {
        // Feature extraction runs on prepared data; a failure here means a
        // guarantee of prepare() or enumerate_windows() did not hold.
        CliError::Internal(format!("features: {e}"))
    }
}

impl From<ModelError> for CliError {
    fn from(e: ModelError) -> Self {
        match e {
            ModelError::SingleClass | ModelError::EmptyEnsemble => {
                CliError::Data(format!("model: {e}"))
            }
            other => CliError::Internal(format!("model: {other}")),
        }
    }
}

impl From<EvalError> for CliError {
    fn from(e: EvalError) -> Self {
        match e {
            EvalError::NoWindows
            | EvalError::NoFolds { .. }
            | EvalError::SingleClass
            | EvalError::TrainingSingleClass { .. }
            | EvalError::MissingLabel { .. } => CliError::Data(format!("eval: {e}")),
            EvalError::Model(inner) => CliError::from(inner),
            other => CliError::Internal(format!("eval: {other}")),
        }
    }
}
