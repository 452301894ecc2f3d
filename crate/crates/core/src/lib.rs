//! Wind-ramp identification toolkit.
//!
//! Stages: denoise a wind-speed series by variational mode decomposition with
//! pole-rate screening ([`poles`]), cut it into between-extrema segments and
//! score each with a ramp factor ([`ramp`]), match each segment against a
//! historical database with FastDTW ([`matching`]), and feed the resulting
//! features to baseline forecasters ([`forecast`]) judged with grid-code
//! metrics ([`metrics`]). [`attention`] is a numeric kit for probabilistic
//! sparse attention.

// Negated float comparisons reject NaN along with out-of-range values.
#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod attention;
pub mod csv_io;
pub mod error;
pub mod forecast;
pub mod matching;
pub mod metrics;
pub mod pipeline;
pub mod poles;
pub mod ramp;
pub mod series;
pub mod synth;
pub mod vmd;

pub use error::{Error, Result};
