//! Deferred life-annuity valuation under stochastic mortality.
//!
//! The crate provides three routes to the conditional annuity value
//! a(Z(T)) and benchmarks them against each other:
//!
//! 1. nested Monte Carlo (unbiased, expensive),
//! 2. closed-form deterministic projections of the period effects,
//! 3. statistical emulators (kriging and splines) trained on designed,
//!    batched simulation data.
//!
//! Core numeric code is generic over the scalar type via [`real::Real`]
//! (`f32` or `f64`); the aliases at the crate root pin the `f64` lane used
//! by the CLI and the shipped configurations.

pub mod analytic;
pub mod annuity;
pub mod config;
pub mod design;
pub mod emulate;
pub mod error;
pub mod harness;
pub mod linalg;
pub mod mortality;
pub mod real;
pub mod rng;
pub mod stats;

pub use error::{Error, Result};
pub use real::Real;
pub use rng::RngStream;

/// Concrete `f64` aliases for the main public types.
pub type Matrix64 = linalg::DenseMatrix<f64>;
pub type AgeStructure64 = mortality::AgeStructure<f64>;
pub type MortalityPath64 = mortality::MortalityPath<f64>;
pub type ChenCoxModel64 = mortality::ChenCoxModel<f64>;
pub type TwoPopModel64 = mortality::TwoPopModel<f64>;
pub type CbdModel64 = mortality::CbdModel<f64>;
pub type AnnuitySpec64 = annuity::AnnuitySpec<f64>;
pub type TrainingSet64 = emulate::TrainingSet<f64>;
pub type KernelSpec64 = emulate::KernelSpec<f64>;
pub type KrigingFit64 = emulate::KrigingFit<f64>;
pub type SplineFit64 = emulate::SplineFit<f64>;
pub type EmulatorFit64 = emulate::EmulatorFit<f64>;
pub type Design64 = design::Design<f64>;
pub type EvalReport64 = harness::EvalReport<f64>;
pub type CaseStudyConfig64 = config::CaseStudyConfig<f64>;
