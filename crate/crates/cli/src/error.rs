use coevo::baselines::BaselineError;
use coevo::effects::SpecError;
use coevo::estimator::EstimationError;
use coevo::oracle::OracleError;
use coevo::panel::DataError;
use coevo::simulator::SimError;
use coevo::synth::SynthError;
use thiserror::Error;

/// How a command that ran to completion ended.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Outcome {
    Success,
    NotConverged,
}

#[derive(Debug, Error)]
pub enum CliError {
    /// Bad or missing input: exit code 2.
    #[error("{0}")]
    Input(String),
    /// The computation itself failed: exit code 1.
    #[error("{0}")]
    Failed(String),
}

impl CliError {
    pub fn exit_code(&self) -> u8 {
        match self {
            CliError::Input(_) => 2,
            CliError::Failed(_) => 1,
        }
    }
}

impl From<DataError> for CliError {
    fn from(e: DataError) -> Self {
        CliError::Input(e.to_string())
    }
}

impl From<SpecError> for CliError {
    fn from(e: SpecError) -> Self {
        CliError::Input(e.to_string())
    }
}

impl From<SimError> for CliError {
    fn from(e: SimError) -> Self {
        match e {
            SimError::NonPositiveRate(_) | SimError::Shape(_) | SimError::Period { .. } => CliError::Input(e.to_string()),
            _ => CliError::Failed(e.to_string()),
        }
    }
}

impl From<EstimationError> for CliError {
    fn from(e: EstimationError) -> Self {
        match e {
            EstimationError::Config(_) => CliError::Input(e.to_string()),
            EstimationError::Simulation(s) => s.into(),
            _ => CliError::Failed(e.to_string()),
        }
    }
}

impl From<SynthError> for CliError {
    fn from(e: SynthError) -> Self {
        match e {
            SynthError::Simulation(s) => s.into(),
            _ => CliError::Input(e.to_string()),
        }
    }
}

impl From<BaselineError> for CliError {
    fn from(e: BaselineError) -> Self {
        match e {
            BaselineError::NonConvergence { .. } => CliError::Failed(e.to_string()),
            _ => CliError::Input(e.to_string()),
        }
    }
}

impl From<OracleError> for CliError {
    fn from(e: OracleError) -> Self {
        CliError::Input(e.to_string())
    }
}
