//! Bias-field control of excitation transfer on spin networks, with three
//! robustness analyses of the synthesized controllers: differential and
//! logarithmic sensitivity, and structured-singular-value bounds under
//! large structured perturbations.
//!
//! Module map:
//! - [`network`]: Hamiltonians and perturbation directions
//! - [`dynamics`]: propagation, averaged fidelity, sensitivities
//! - [`synthesis`]: multi-start controller ensembles
//! - [`lft`]: plant and closed-loop matrices of the uncertainty model
//! - [`ssv`]: μ upper/lower bounds and a brute-force oracle
//! - [`experiment`]: studies, Kendall τ, CSV/SVG output

#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod dynamics;
pub mod error;
pub mod experiment;
pub mod lft;
pub mod linalg;
pub mod network;
pub mod optimize;
pub mod par;
pub mod ssv;
pub mod synthesis;

pub use error::{Error, Result};
pub use par::ExecMode;
