//! Online decision making with hard per-step constraints and a soft convex
//! goal on the time-averaged impact. A dual price on the goal is learned by
//! projected subgradient steps; each step solves its local problem exactly
//! against the current price.
//!
//! Layout: [`goalset`] holds goal-set geometry (support points, polar-cone
//! projection, exact distances), [`oracles`] the per-step exact solvers,
//! [`dual_learner`] the online loop and dual-side diagnostics,
//! [`input_models`] arrival-order models, [`analysis`] metrics and offline
//! baselines, [`instances`] seeded generators and the instance container,
//! and [`cli`] the command-line front end.

pub mod analysis;
pub mod cli;
pub mod dual_learner;
pub mod error;
pub mod goalset;
pub mod input_models;
pub mod instances;
pub mod oracles;
mod vecmath;

pub use error::{Error, Result};
