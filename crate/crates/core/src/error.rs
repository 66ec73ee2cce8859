use std::fmt;

/// One violated input invariant, addressed by its field path in the config document.
#[derive(Debug, Clone, PartialEq)]
pub struct Violation {
    pub path: String,
    pub message: String,
}

impl Violation {
    pub fn new(path: impl Into<String>, message: impl Into<String>) -> Self {
        Self {
            path: path.into(),
            message: message.into(),
        }
    }
}

impl fmt::Display for Violation {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}: {}", self.path, self.message)
    }
}

fn join_violations(v: &[Violation]) -> String {
    v.iter()
        .map(|x| x.to_string())
        .collect::<Vec<_>>()
        .join("; ")
}

#[derive(Debug, thiserror::Error)]
pub enum Error {
    #[error("invalid input: {}", join_violations(.0))]
    Validation(Vec<Violation>),

    #[error("invalid argument: {0}")]
    InvalidArgument(String),

    #[error("photon grid would need {modes} modes, above the cap of {cap}")]
    GridTooLarge { modes: usize, cap: usize },

    #[error("frequency mapping is not strictly monotone near Omega = {at}")]
    NonMonotoneMapping { at: f64 },

    #[error("mapped frequency {omega} eV leaves the positive-frequency domain")]
    NonPositiveFrequency { omega: f64 },

    #[error("self-energy pole: z = {z} eV coincides with a photon mode")]
    Pole { z: f64 },

    #[error("singular electronic resolvent at omega = {omega} eV")]
    SingularResolvent { omega: f64 },

    #[error("photon modes {first} and {second} share the energy {energy} eV")]
    DegenerateModes {
        first: usize,
        second: usize,
        energy: f64,
    },

    #[error("root bracketing failed in ({lo}, {hi}) eV: {reason}")]
    Bracketing { lo: f64, hi: f64, reason: String },

    #[error("dense solve of size {size} exceeds the cap of {cap}")]
    DenseCapExceeded { size: usize, cap: usize },

    #[error("unknown electronic state '{0}'")]
    UnknownState(String),

    #[error("population of state {state} is not exponential in the fit window: {reason}")]
    NotExponential { state: usize, reason: String },

    #[error("unknown preset '{0}'")]
    UnknownPreset(String),

    #[error("config error at {path}: {message}")]
    Config { path: String, message: String },

    #[error("malformed file {path}: {message}")]
    Format { path: String, message: String },

    #[error(transparent)]
    Io(#[from] std::io::Error),
}

impl Error {
    /// Process exit status used by the command-line front end.
    pub fn exit_code(&self) -> i32 {
        match self {
            Error::Validation(_)
            | Error::InvalidArgument(_)
            | Error::GridTooLarge { .. }
            | Error::NonMonotoneMapping { .. }
            | Error::NonPositiveFrequency { .. }
            | Error::UnknownState(_)
            | Error::UnknownPreset(_)
            | Error::Config { .. }
            | Error::Format { .. } => 2,
            Error::Io(_) => 1,
            _ => 3,
        }
    }
}

pub type Result<T> = std::result::Result<T, Error>;
