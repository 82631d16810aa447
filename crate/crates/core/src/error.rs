use thiserror::Error;

pub type Result<T, E = Error> = std::result::Result<T, E>;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum Error {
    #[error("invalid chart: {0}")]
    InvalidChart(String),

    #[error("chart mismatch: {left} vs {right}")]
    ChartMismatch { left: String, right: String },

    #[error("expected {expected} tangent vectors, got {got}")]
    WrongVectorCount { expected: usize, got: usize },

    #[error("vector has {got} components on a {expected}-dimensional chart")]
    WrongVectorLength { expected: usize, got: usize },

    #[error("derivative order {0} not supported (1 or 2 only)")]
    DerivativeOrder(usize),

    #[error("derivative of order {requested} requested but only {available} available")]
    OrderUnavailable { requested: usize, available: i8 },

    #[error("potential is not positive on the chart (V = {value:.3e} at {at:?})")]
    NonPositivePotential { value: f64, at: [f64; 3] },

    #[error("chart box contains the singular set of charge {index} at {position:?}")]
    ChargeInChart { index: usize, position: [f64; 3] },

    #[error("base factors use different sign conventions")]
    ConventionMismatch,

    #[error("explicit connection requires a flat base, got {0}")]
    NotFlatBase(String),

    #[error("2-form is not closed on the chart: max |dσ| = {residual:.3e}")]
    NotClosed { residual: f64 },

    #[error("connection does not match the base triple: residual {residual:.3e}")]
    ConnectionMismatch { residual: f64 },

    #[error("metric is singular at {at:?}")]
    SingularMetric { at: Vec<f64> },

    #[error("ideal design matrix is rank deficient (rank {rank} of {columns}) at {at:?}")]
    RankDeficient {
        rank: usize,
        columns: usize,
        at: Vec<f64>,
    },

    #[error("invalid integration range [{t0}, {t1}]")]
    InvalidRange { t0: f64, t1: f64 },

    #[error("quadrature grid is empty")]
    EmptyGrid,

    #[error("lattice Gram matrix is not symmetric")]
    NonSymmetricGram,

    #[error("polarization degree must be positive, got {0}")]
    InvalidDegree(i64),

    #[error("quaternionic dimension m must be at least 2, got {0}")]
    DimensionTooSmall(usize),

    #[error("configuration error: {0}")]
    Config(String),

    #[error("i/o error: {0}")]
    Io(String),

    #[error("invalid argument: {0}")]
    InvalidArgument(String),
}
