use std::path::PathBuf;

use thiserror::Error;

/// Errors raised by the neural substrate.
#[derive(Debug, Error, Clone, PartialEq)]
pub enum NnError {
    #[error("shape mismatch in {layer}: {detail}")]
    Shape { layer: String, detail: String },
    #[error("non-finite gradient in parameter `{param}`")]
    NonFiniteGradient { param: String },
    #[error("gradient for unknown parameter `{0}`")]
    UnknownParameter(String),
    #[error("tape already consumed by a previous backward pass")]
    TapeConsumed,
    #[error("non-finite input: {0}")]
    NonFiniteInput(String),
}

/// Errors raised while training either stage.
#[derive(Debug, Error)]
pub enum TrainError {
    #[error("loss became NaN at epoch {epoch}, batch {batch}")]
    NanLoss { epoch: usize, batch: usize },
    #[error("empty training set")]
    EmptyDataset,
    #[error("label row for device {device} is not one-hot")]
    LabelNotOneHot { device: usize },
    #[error(transparent)]
    Nn(#[from] NnError),
}

/// Errors raised by ingestion and window construction.
#[derive(Debug, Error)]
pub enum DataError {
    #[error("{path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },
    #[error("{path}: csv error: {source}")]
    Csv {
        path: PathBuf,
        #[source]
        source: csv::Error,
    },
    #[error("{path}: missing column `{column}`")]
    MissingColumn { path: PathBuf, column: String },
    #[error("{path}: row {row}: cannot parse timestamp `{value}`")]
    BadTimestamp {
        path: PathBuf,
        row: usize,
        value: String,
    },
    #[error("{path}: row {row}: column `{column}`: cannot parse `{value}` as a number")]
    BadValue {
        path: PathBuf,
        row: usize,
        column: String,
        value: String,
    },
    #[error("{path}: timestamps are not strictly increasing at row {row}")]
    NonMonotonic { path: PathBuf, row: usize },
    #[error("generation file {generation} and weather file {weather} share no timestamps")]
    EmptyJoin { generation: PathBuf, weather: PathBuf },
    #[error("insufficient history: need {required} rows, have {available}")]
    InsufficientHistory { required: usize, available: usize },
    #[error("split needs {required} windows but only {available} are available")]
    SplitTooLarge { required: usize, available: usize },
    #[error("invalid parameter: {0}")]
    InvalidParameter(String),
    #[error("feature `{0}` not present in weather data")]
    UnknownFeature(String),
}

/// Errors raised by the schedulers and the scenario model.
#[derive(Debug, Error, Clone, PartialEq)]
pub enum ScheduleError {
    #[error("scenario is infeasible")]
    Infeasible,
    #[error("no feasible slot for device {device} (`{name}`)")]
    InfeasibleDevice { device: usize, name: String },
    #[error("enumeration would visit {0} assignments, above the cap")]
    CapExceeded(u128),
    #[error("initial sample of {0} random schedules contained no feasible one")]
    NoFeasibleSeed(usize),
    #[error("invalid scenario: {0}")]
    InvalidScenario(String),
}

/// Errors from metric and report computation.
#[derive(Debug, Error, Clone, PartialEq)]
pub enum EvalError {
    #[error("length mismatch: {0} actual vs {1} forecast values")]
    LengthMismatch(usize, usize),
    #[error("empty input")]
    Empty,
    #[error("day count mismatch: {0}")]
    Alignment(String),
}

/// Top-level error used by the command pipeline.
#[derive(Debug, Error)]
pub enum FesError {
    #[error("config error: {0}")]
    Config(String),
    #[error("data error: {0}")]
    Data(#[from] DataError),
    #[error("training error ({stage}): {source}")]
    Training {
        stage: &'static str,
        #[source]
        source: TrainError,
    },
    #[error("scheduling error: {0}")]
    Schedule(#[from] ScheduleError),
    #[error("model error: {0}")]
    Nn(#[from] NnError),
    #[error("evaluation error: {0}")]
    Eval(#[from] EvalError),
    #[error("checkpoint error: {0}")]
    Checkpoint(String),
    #[error("missing checkpoint {0}; run `fes train` first")]
    MissingCheckpoint(PathBuf),
    #[error("io error on {path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },
}

impl FesError {
    pub(crate) fn io(path: impl Into<PathBuf>, source: std::io::Error) -> Self {
        FesError::Io {
            path: path.into(),
            source,
        }
    }

    /// Process exit code for this error class.
    pub fn exit_code(&self) -> i32 {
        match self {
            FesError::Config(_) => 2,
            FesError::Data(_) | FesError::Io { .. } | FesError::Eval(_) => 3,
            FesError::Training { .. } | FesError::Nn(_) => 4,
            FesError::Schedule(_) => 5,
            FesError::Checkpoint(_) | FesError::MissingCheckpoint(_) => 6,
        }
    }
}
