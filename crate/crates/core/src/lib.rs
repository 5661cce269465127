//! Reduced-order modeling of bolt loosening in a lap joint coupling two
//! grounded oscillators.
//!
//! The bolt tension is a dynamic degree of freedom: it sets the effective
//! stiffness and damping of the joint through logistic constitutive laws
//! and decays through a first-order law driven by the fourth power of the
//! relative velocity across the joint. This crate provides:
//!
//! - [`joint_models`]: the tension-dependent constitutive models and the
//!   bolt calibration polynomial;
//! - [`dynamics`]: the coupled five-state equations of motion and their
//!   adaptive Runge-Kutta integration under a measured or synthetic force;
//! - [`modal`]: closed-form two-degree-of-freedom modal algebra and
//!   time-domain estimation (average-period frequency, log-decrement
//!   damping);
//! - [`sigproc`]: the measurement conditioning chain (zero-phase Butterworth
//!   filtering, cumulative trapezoidal integration, decimation, alignment);
//! - [`fitting`]: nonlinear least squares for the constitutive models and
//!   the zero-intercept calibration fit;
//! - [`identify`]: pattern-search identification of the per-case loosening
//!   rate;
//! - [`synth`]: a synthetic-experiment generator standing in for the rig;
//! - [`cli`]: the batch commands wiring the stages into reproducible jobs.

pub mod cli;
pub mod dynamics;
pub mod error;
pub mod fitting;
pub mod identify;
pub mod joint_models;
pub mod modal;
pub mod sigproc;
pub mod synth;

pub use error::{Error, Result};
