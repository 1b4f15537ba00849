//! Time-optimal, collision-free trajectory planning for 3D overhead cranes
//! with friction-aware feedforward, plus a stick-slip closed-loop simulator
//! and friction-uncertainty experiments.

pub mod config;
pub mod error;
pub mod experiments;
pub mod flatness;
pub mod geometry;
pub mod io;
pub mod jet;
pub mod model;
pub mod optimizer;
pub mod plan;
pub mod real;
pub mod seed;
pub mod simulator;

pub use error::{CraneError, Result};
