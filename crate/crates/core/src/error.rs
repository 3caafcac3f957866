use thiserror::Error;

pub type Result<T> = std::result::Result<T, Error>;

/// Every failure mode surfaced by the toolkit.
///
/// Variants are grouped by the subsystem that raises them; configuration
/// errors are the ones the CLI maps to the "validation" exit code.
#[derive(Debug, Error)]
pub enum Error {
    // signal generation and filtering
    #[error("Nyquist violation: {0}")]
    NyquistViolation(String),
    #[error("empty signal: {0}")]
    EmptySignal(String),
    #[error("empty tap set")]
    EmptyTaps,
    #[error("invalid argument: {0}")]
    InvalidArgument(String),

    // pulse compression
    #[error("filter length {length} exceeds tap budget {budget}")]
    BudgetExceeded { length: usize, budget: usize },
    #[error("filter length {filter_length} shorter than waveform length {waveform_length}")]
    LengthTooShort {
        filter_length: usize,
        waveform_length: usize,
    },
    #[error("normal equations are singular (condition estimate {condition:.3e})")]
    SingularSystem { condition: f64 },

    // frequency planning
    #[error("no suppression entry or default for mixer product ({m},{n})")]
    MissingSpurEntry { m: u32, n: u32 },
    #[error("bandwidth sweep needs at least one candidate")]
    EmptyCandidates,

    // cascade
    #[error("cascade has no stages")]
    EmptyCascade,

    // timing
    #[error("events overlap: {0}")]
    OverlapError(String),
    #[error("event outside receive window: {0}")]
    WindowError(String),
    #[error("range error: {0}")]
    RangeError(String),
    #[error("schedule has no cal_medium event")]
    MissingCalEvent,

    // simulation
    #[error("unregistered asset `{0}`")]
    UnregisteredAsset(String),
    #[error("inconsistent sample rates: {0}")]
    InconsistentRates(String),

    // configuration
    #[error("parse error: {0}")]
    ParseError(String),
    #[error("unknown key: {0}")]
    UnknownKey(String),
    #[error("cross-reference error: {0}")]
    CrossRefError(String),
    #[error("invariant violated at {path}: {source}")]
    InvariantError {
        path: String,
        #[source]
        source: Box<Error>,
    },

    #[error("malformed file: {0}")]
    Format(String),
    #[error(transparent)]
    Io(#[from] std::io::Error),
    #[error(transparent)]
    Csv(#[from] csv::Error),
}

impl Error {
    /// True for errors caused by bad input (config, schedule or
    /// precondition violations) rather than by the runtime environment.
    pub fn is_validation(&self) -> bool {
        !matches!(self, Error::Io(_) | Error::Csv(_))
    }
}
