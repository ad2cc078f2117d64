//! Simulation, learning and evaluation toolkit for a curved fiber Bragg
//! grating (FBG) tactile skin.
//!
//! The crate is organized bottom-up:
//!
//! * [`geometry`]: developed skin surface, serpentine fiber path and the
//!   16 graded-spacing FBG placements.
//! * [`simulator`]: contact → wavelength-shift forward model with elliptical
//!   receptive fields, interrogator noise and the indentation protocol.
//! * [`neural`]: a small f64 tensor / layer engine trained with SGD + momentum.
//! * [`pipeline`]: CNN force regression, 50 mN gate, four shifted-grid MLP
//!   localizers and their multigrid fusion.
//! * [`psychometrics`]: Von Frey detection protocol and sigmoid fitting.
//! * [`evaluation`]: splits, cross-validation, baselines, statistics and
//!   receptive-field characterization.
//! * [`cli`]: configuration, dataset persistence and command orchestration.

#![allow(clippy::neg_cmp_op_on_partial_ord)] // `!(x > 0.0)` also rejects NaN.

pub mod cli;
pub mod error;
pub mod evaluation;
pub mod geometry;
pub mod neural;
pub mod pipeline;
pub mod psychometrics;
pub mod simulator;
pub(crate) mod textfmt;

pub use error::{Error, Result};
