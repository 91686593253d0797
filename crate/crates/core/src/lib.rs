//! Link-level simulation of multi-user uplink receivers that pair a
//! two-stage analog combiner with low-resolution ADCs.
//!
//! The crate is organized bottom-up:
//!
//! * [`channel`] draws geometric, Rayleigh and beamspace channel realizations.
//! * [`quantizer`] holds the additive quantization noise model and a
//!   Lloyd-Max scalar quantizer used to validate it.
//! * [`combiner`] builds the analog combiners (ARV-TSAC, Greedy-MI, SVD,
//!   SVD+DFT, AoA) and the MRC/ZF/MMSE digital combiners.
//! * [`metrics`] evaluates mutual information, per-user rates and the
//!   closed-form theory expressions.
//! * [`montecarlo`] runs seeded, paired parameter sweeps and writes CSV.
//! * [`validation`] checks the Monte Carlo moments and quantizer model
//!   against their closed forms.

// Negated comparisons are used on purpose so that NaN inputs are rejected.
#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod channel;
pub mod combiner;
pub mod error;
pub mod linalg;
pub mod metrics;
pub mod montecarlo;
pub mod quantizer;
pub mod validation;

pub use error::{Error, Result};
pub use linalg::ComplexMatrix;

/// Converts a power ratio in dB to linear scale.
pub fn db_to_linear(db: f64) -> f64 {
    10f64.powf(db / 10.0)
}
