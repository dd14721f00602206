//! Bounds and exact simulation for dynamically decoupled quantum gates.
//!
//! The crate computes the effective noise strength of gates protected by
//! dynamical decoupling (DD) under Hamiltonian noise. It provides:
//!
//! * [`op_core`]: dense complex linear algebra for a system plus a small bath.
//! * [`noise_model`]: system-bath Hamiltonians and their norm parameters.
//! * [`pulse_schedule`]: named pulse sequences, gate pulses, concatenation and
//!   toggling-frame segments.
//! * [`magnus_engine`]: exact Magnus terms for piecewise-constant Hamiltonians.
//! * [`analytic_bounds`]: closed-form bound coefficients and the series constants.
//! * [`threshold_overhead`]: suppression thresholds, overhead ratios and
//!   strategy regions.
//! * [`cdd_recursion`]: concatenated-DD level recursions.
//! * [`spectral_filter`]: switching functions, filter transforms and
//!   correlator-based noise strengths.
//! * [`experiments`]: exact effective noise strength and reproducible sweeps.

#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod analytic_bounds;
pub mod cdd_recursion;
pub mod error;
pub mod experiments;
pub mod magnus_engine;
pub mod noise_model;
pub mod op_core;
pub mod pulse_schedule;
pub mod quadrature;
pub mod spectral_filter;
pub mod threshold_overhead;

pub use error::{DdError, ErrorCategory, Result};
pub use op_core::Operator;
