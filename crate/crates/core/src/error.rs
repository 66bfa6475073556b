//! Error types shared across the estimation toolkit.

use crate::model_spec::Param;

/// Convenience alias used throughout the crate.
pub type Result<T> = std::result::Result<T, CoreError>;

/// Errors raised while loading data, evaluating models, or estimating.
#[derive(Debug, thiserror::Error)]
pub enum CoreError {
    #[error("row {row}: duplicate alternative '{alt}' for observation '{obs_id}'")]
    DuplicateAlternative { row: u64, obs_id: String, alt: String },

    #[error("observation '{obs_id}' has {count} chosen rows; exactly one is required")]
    ChosenCount { obs_id: String, count: usize },

    #[error("observation '{obs_id}': chosen alternative '{alt}' is unavailable")]
    ChosenUnavailable { obs_id: String, alt: String },

    #[error("row {row}: unknown person_id '{person_id}'")]
    UnknownPerson { row: u64, person_id: String },

    #[error("row {row}: {message}")]
    MalformedRow { row: u64, message: String },

    #[error("observation '{obs_id}' has {available} available alternatives; at least two are required")]
    TooFewAlternatives { obs_id: String, available: usize },

    #[error("empty choice set: every mode is unavailable")]
    EmptyChoiceSet,

    #[error("e-mobility may only appear in stated-preference observations (obs '{obs_id}')")]
    EMobilityOnRp { obs_id: String },

    #[error("parameter {0:?} is not part of the model specification")]
    VariableNotInSpec(Param),

    #[error("empty input: {0}")]
    EmptyInput(&'static str),

    #[error("length mismatch: {what} ({left} vs {right})")]
    LengthMismatch { what: &'static str, left: usize, right: usize },

    #[error("importance weights must not all be zero")]
    AllZeroWeights,

    #[error("value out of range: {what} = {value}, expected {expected}")]
    OutOfRange { what: &'static str, value: f64, expected: &'static str },

    #[error("division by zero: {0}")]
    DivisionByZero(&'static str),

    #[error("draw count must be positive")]
    NoDraws,

    #[error("{requested} draw dimensions requested but only {available} prime bases configured")]
    TooManyDimensions { requested: usize, available: usize },

    #[error("probability of chosen alternative underflowed to zero for observation '{obs_id}'")]
    ZeroProbability { obs_id: String },

    #[error("simulated probability underflowed to zero for person '{person_id}'")]
    SimulatedUnderflow { person_id: String },

    #[error("non-finite objective at {context}")]
    NonFiniteObjective { context: String },

    #[error("iteration cap of {0} reached before convergence")]
    IterationCap(usize),

    #[error("singular Hessian (reciprocal condition estimate {rcond:.3e})")]
    SingularHessian { rcond: f64 },

    #[error("no RP observations carry an SP-trigger linkage flag")]
    NoLinkedRp,

    #[error("cross-validation requires k >= 2 (got {0})")]
    BadFoldCount(usize),

    #[error("parameter name mismatch: {0}")]
    ParamNameMismatch(String),

    #[error("model spec file: {0}")]
    SpecFile(String),

    #[error("all draw likelihoods underflowed for person '{person_id}'")]
    ConditionalUnderflow { person_id: String },

    #[error(transparent)]
    Io(#[from] std::io::Error),

    #[error(transparent)]
    Csv(#[from] csv::Error),
}
