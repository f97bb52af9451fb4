use thiserror::Error;

/// Errors shared across the workbench modules.
#[derive(Debug, Error)]
pub enum HbError {
    #[error("dimension mismatch: {0}")]
    DimensionMismatch(String),

    #[error("non-invertible group element")]
    SingularGroupElement,

    #[error("not positive definite")]
    NotPositiveDefinite,

    #[error("condition number {cond:.3e} exceeds guard {guard:.1e}; rescale before inverting")]
    IllConditioned { cond: f64, guard: f64 },

    #[error("monodromy not unipotent")]
    NotUnipotent,

    #[error("matrix not nilpotent")]
    NotNilpotent,

    #[error("outside model chart: y = {y} is not above the cut {y_min}")]
    OutsideChart { y: f64, y_min: f64 },

    #[error("flow stalled: step underflow without energy decrease at sweep {sweep}")]
    FlowStalled { sweep: usize },

    #[error("no residue limit: {0}")]
    NoResidueLimit(String),

    #[error("beyond Prop. 1 scope: {0}")]
    BeyondScope(String),

    #[error("split germ first: term mixes weight labels")]
    MixedWeightGerm,

    #[error("excluded weight k = 1")]
    ExcludedWeight,

    #[error("data not L2: {0}")]
    DataNotL2(String),

    #[error("invalid input: {0}")]
    InvalidInput(String),
}

pub type Result<T> = std::result::Result<T, HbError>;
