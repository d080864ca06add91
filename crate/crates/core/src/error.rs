use alloc::string::String;

/// Errors raised by constructors, statistics and fits.
#[derive(Debug, Clone, PartialEq, thiserror::Error)]
pub enum Error {
    #[error("matrix is not unitary (max |UU† - I| = {deviation:e})")]
    NotUnitary { deviation: f64 },
    #[error("expected a square matrix, got {len} entries for dimension {dim}")]
    NotSquare { dim: usize, len: usize },
    #[error("dimension mismatch: expected {expected}, found {found}")]
    DimensionMismatch { expected: usize, found: usize },
    #[error("mode index {index} out of range for {modes} modes")]
    ModeOutOfRange { index: usize, modes: usize },
    #[error("mode index {0} listed more than once")]
    DuplicateMode(usize),
    #[error("unknown notable matrix `{0}`")]
    UnknownNotable(String),
    #[error("input configuration has a mode with more than one photon")]
    CollisionalInput,
    #[error("{photons} photons do not fit collision-free into {modes} modes")]
    TooManyPhotons { photons: usize, modes: usize },
    #[error("invalid mode configuration: {0}")]
    InvalidConfig(String),
    #[error("distributions do not share the same outcome labels")]
    LabelMismatch,
    #[error("invalid distribution: {0}")]
    InvalidDistribution(String),
    #[error("{name} = {value} is outside its allowed range")]
    OutOfRange { name: &'static str, value: f64 },
    #[error("{modes} modes is not a power of {photons}")]
    NotAPower { modes: usize, photons: usize },
    #[error("invalid parameters: {0}")]
    InvalidParameters(String),
    #[error("event has zero probability under both hypotheses")]
    ImpossibleEvent,
    #[error("events are impossible under both hypotheses taken together")]
    ContradictoryEvidence,
    #[error("likelihood vanishes on the whole grid")]
    ZeroLikelihood,
    #[error("no sign change in the search interval ({0})")]
    NoSignChange(&'static str),
    #[error("event input is not part of the configured input set")]
    UnknownInput,
    #[error("outcome label does not belong to the distribution")]
    UnknownOutcome,
    #[error("optimisation did not converge: {0}")]
    NoConvergence(String),
    #[error("unsupported: {0}")]
    Unsupported(String),
}

pub type Result<T> = core::result::Result<T, Error>;
