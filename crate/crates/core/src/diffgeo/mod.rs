//! Chart-based exterior calculus and the differentiation engine.

pub mod chart;
pub mod field;
pub mod form;
pub mod jet;
pub mod sampling;
pub mod tensor;

pub use chart::{Chart, Interval};
pub use field::{
    differentiate, eval_batch, eval_batch_with, partial_derivative, values_batch, DiffMode,
    ScalarField,
};
pub use form::{increasing_sets, DifferentialForm, FormValue, IndexSet};
pub use jet::Jet;
pub use sampling::Sampler;
pub use tensor::{MetricJets, MetricSource, SliceMetric, TensorField, Valence};
