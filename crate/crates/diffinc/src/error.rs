use std::path::PathBuf;

/// Process exit codes.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum ExitStatus {
    /// All checks passed.
    Ok = 0,
    /// A certification or construction precondition failed.
    CertificationFailed = 2,
    /// A verification threshold was exceeded.
    ThresholdExceeded = 3,
    /// I/O or configuration error.
    Config = 4,
}

impl ExitStatus {
    pub fn code(self) -> i32 {
        self as i32
    }

    pub fn label(self) -> &'static str {
        match self {
            ExitStatus::Ok => "ok",
            ExitStatus::CertificationFailed => "certification_failed",
            ExitStatus::ThresholdExceeded => "threshold_exceeded",
            ExitStatus::Config => "config_error",
        }
    }
}

#[derive(Debug, thiserror::Error)]
pub enum CliError {
    #[error("{path}: {source}")]
    Io {
        path: PathBuf,
        source: std::io::Error,
    },
    #[error("{path}: {source}")]
    Json {
        path: PathBuf,
        source: serde_json::Error,
    },
    #[error("{path}: {source}")]
    Csv { path: PathBuf, source: csv::Error },
    #[error("{0}")]
    Format(String),
    #[error("{0}")]
    Config(String),
    /// Kernel errors that reject the input curve or construction.
    #[error("{0}")]
    Rejected(diffinc_core::Error),
    /// Kernel errors caused by bad parameters.
    #[error("{0}")]
    Kernel(diffinc_core::Error),
}

impl CliError {
    pub fn io(path: impl Into<PathBuf>, source: std::io::Error) -> Self {
        CliError::Io {
            path: path.into(),
            source,
        }
    }

    pub fn exit_status(&self) -> ExitStatus {
        match self {
            CliError::Rejected(_) => ExitStatus::CertificationFailed,
            _ => ExitStatus::Config,
        }
    }
}

impl From<diffinc_core::Error> for CliError {
    fn from(e: diffinc_core::Error) -> Self {
        use diffinc_core::Error as E;
        match e {
            E::NotUnitSpeed { .. }
            | E::NotImmersion { .. }
            | E::NotNowhereElliptic { .. }
            | E::NotCertified { .. }
            | E::NonMonotonePhase
            | E::WindingMismatch { .. }
            | E::ArcDomain
            | E::CharacteristicsCross { .. }
            | E::Uncovered { .. }
            | E::NoTransversalDirection
            | E::NoWellConditionedPair => CliError::Rejected(e),
            other => CliError::Kernel(other),
        }
    }
}
