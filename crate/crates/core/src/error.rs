use thiserror::Error;

/// Errors raised across the toolkit.
///
/// Variants are split between input/validation problems (bad files, bad
/// parameters) and runtime problems (I/O); the CLI maps the former to exit
/// code 2 and the latter to exit code 1.
#[derive(Debug, Error)]
pub enum Error {
    #[error("i/o error on {path}: {source}")]
    Io {
        path: String,
        #[source]
        source: std::io::Error,
    },

    #[error("{path}:{line}: malformed row: {message}")]
    MalformedRow {
        path: String,
        line: u64,
        message: String,
    },

    #[error("duplicate preference id {id}")]
    DuplicateId { id: String },

    #[error("{path}:{line}: vector has {got} components, expected {expected}")]
    DimensionMismatch {
        path: String,
        line: u64,
        got: usize,
        expected: usize,
    },

    #[error("empty vector file {path}")]
    EmptyVectorFile { path: String },

    #[error("phrase {phrase:?} normalizes to zero tokens")]
    EmptyPhrase { phrase: String },

    #[error("invalid parameter: {0}")]
    InvalidParameter(String),

    #[error("empty input: {0}")]
    EmptyInput(String),

    #[error("split failed to place both classes in both parts after {attempts} attempts")]
    DegenerateSplit { attempts: usize },

    #[error("dataset contains a single class: {0}")]
    SingleClass(String),

    #[error("{abandoned} of {total} realizations abandoned (limit 10%)")]
    TooManyAbandoned { abandoned: usize, total: usize },

    #[error("audience filter lists {got} interests, the cap is {cap}")]
    InterestCapExceeded { got: usize, cap: usize },

    #[error("no recorded fixture for key {key}")]
    FixtureMiss { key: String },

    #[error("oracle returned the sentinel reach for key {key}; refusing to use it")]
    SentinelReach { key: String },

    #[error("unknown country code {0}")]
    UnknownCountry(String),

    #[error("user base is zero for {0}; exposure is undefined")]
    EmptyUserBase(String),

    #[error("snapshot timestamp {got} precedes latest event {latest} for user {user_id}")]
    NonMonotonicTimestamp {
        user_id: String,
        got: String,
        latest: String,
    },

    #[error("non-monotone CDF at value {value}")]
    NonMonotoneCdf { value: f64 },

    #[error("{0}")]
    InvalidInput(String),

    #[error("json error on {path}: {source}")]
    Json {
        path: String,
        #[source]
        source: serde_json::Error,
    },
}

impl Error {
    pub fn io(path: impl Into<String>, source: std::io::Error) -> Self {
        Error::Io {
            path: path.into(),
            source,
        }
    }

    /// True for errors caused by bad inputs or parameters rather than the
    /// environment. The CLI uses this to pick its exit code.
    pub fn is_validation(&self) -> bool {
        !matches!(self, Error::Io { .. })
    }
}
