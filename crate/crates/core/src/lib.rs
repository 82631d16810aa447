//! Numerical verification of quaternionic Kähler metrics built over
//! hyper-Kähler bases with a torus bundle and a warping coordinate.
//!
//! ```
//! use qkverify::connection::flat_connection;
//! use qkverify::diffgeo::{DiffMode, Sampler};
//! use qkverify::hk_bases::make_flat_torus_base;
//! use qkverify::qk::{assemble_qk_model, ideal_residual};
//!
//! let base = make_flat_torus_base();
//! let model = assemble_qk_model(&base, &flat_connection(&base)?)?;
//! let report = ideal_residual(&model, Sampler::new(7, 4), 1e-8, DiffMode::Exact);
//! assert!(report.passed);
//! # Ok::<(), qkverify::Error>(())
//! ```

// Negated comparisons reject NaN on purpose.
#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod config;
pub mod connection;
pub mod curvature;
pub mod diffgeo;
pub mod error;
pub mod hk_bases;
pub mod linalg;
pub mod obstructions;
pub mod qk;
pub mod quadrature;
pub mod report;
pub mod run;
pub mod volume;

pub use error::{Error, Result};

#[cfg(doctest)]
mod book {
    #[doc = include_str!("../../../book/src/introduction.md")]
    mod introduction {}
    #[doc = include_str!("../../../book/src/forms.md")]
    mod forms {}
    #[doc = include_str!("../../../book/src/bases.md")]
    mod bases {}
    #[doc = include_str!("../../../book/src/connection.md")]
    mod connection {}
    #[doc = include_str!("../../../book/src/model.md")]
    mod model {}
    #[doc = include_str!("../../../book/src/curvature.md")]
    mod curvature {}
    #[doc = include_str!("../../../book/src/volume.md")]
    mod volume {}
    #[doc = include_str!("../../../book/src/obstructions.md")]
    mod obstructions {}
    #[doc = include_str!("../../../book/src/cli.md")]
    mod cli {}
}
