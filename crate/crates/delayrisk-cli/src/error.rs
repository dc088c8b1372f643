use delayrisk::dde::DdeError;
use delayrisk::graph::GraphError;
use delayrisk::joint::JointError;
use delayrisk::observables::ObservableError;
use delayrisk::risk::RiskError;
use delayrisk::sim::SimError;
use thiserror::Error;

#[derive(Debug, Error)]
pub enum CliError {
    #[error("configuration error: {0}")]
    Config(String),
    #[error("instability: {0}")]
    Unstable(String),
    #[error("numerical failure: {0}")]
    Numeric(String),
}

impl CliError {
    pub fn exit_code(&self) -> i32 {
        match self {
            Self::Config(_) => 2,
            Self::Unstable(_) => 3,
            Self::Numeric(_) => 4,
        }
    }

    pub fn config(msg: impl Into<String>) -> Self {
        Self::Config(msg.into())
    }
}

impl From<std::io::Error> for CliError {
    fn from(e: std::io::Error) -> Self {
        Self::Config(e.to_string())
    }
}

impl From<serde_json::Error> for CliError {
    fn from(e: serde_json::Error) -> Self {
        Self::Config(e.to_string())
    }
}

impl From<GraphError> for CliError {
    fn from(e: GraphError) -> Self {
        match e {
            GraphError::NearlyDisconnected(_) | GraphError::ConnectivityNotReached(_) => Self::Numeric(e.to_string()),
            GraphError::Linalg(_) => Self::Numeric(e.to_string()),
            _ => Self::Config(e.to_string()),
        }
    }
}

impl From<ObservableError> for CliError {
    fn from(e: ObservableError) -> Self {
        Self::Config(e.to_string())
    }
}

impl From<DdeError> for CliError {
    fn from(e: DdeError) -> Self {
        match e {
            DdeError::Unstable(_) => Self::Unstable(e.to_string()),
            DdeError::InvalidStep { .. } | DdeError::InvalidArgument(_) => Self::Config(e.to_string()),
            _ => Self::Numeric(e.to_string()),
        }
    }
}

impl From<RiskError> for CliError {
    fn from(e: RiskError) -> Self {
        match e {
            RiskError::Unstable { .. } => Self::Unstable(e.to_string()),
            RiskError::InvalidParams(_) | RiskError::MissingBeta => Self::Config(e.to_string()),
            RiskError::Observable(e) => e.into(),
            RiskError::Dde(e) => e.into(),
            RiskError::Graph(e) => e.into(),
            RiskError::Numeric(_) | RiskError::Linalg(_) => Self::Numeric(e.to_string()),
        }
    }
}

impl From<JointError> for CliError {
    fn from(e: JointError) -> Self {
        match e {
            JointError::Risk(e) => e.into(),
            JointError::Observable(e) => e.into(),
            JointError::InvalidSplit(_) | JointError::InvalidArgument(_) | JointError::Unbounded(_) => {
                Self::Config(e.to_string())
            }
            JointError::NotPsd(_) | JointError::Numeric(_) | JointError::Linalg(_) => Self::Numeric(e.to_string()),
        }
    }
}

impl From<SimError> for CliError {
    fn from(e: SimError) -> Self {
        match e {
            SimError::Risk(e) => e.into(),
            SimError::Dde(e) => e.into(),
            SimError::Graph(e) => e.into(),
            SimError::Observable(e) => e.into(),
            SimError::InvalidConfig(_) | SimError::PoolTooSmall { .. } => Self::Config(e.to_string()),
        }
    }
}
