//! Stream-function guidance with vortex flows for marine vessels.
//!
//! The pipeline plans grid waypoints on a composite stream function, joins
//! them with C³ Bézier segments obtained from a small quadratic program, and
//! tracks the resulting path with a backstepping maneuvering controller on a
//! 3DOF vessel model.

pub mod cli;
pub mod config;
pub mod control;
pub mod flowfield;
pub mod output;
pub mod pathgen;
pub mod planner;
pub mod plot;
pub mod qp;
pub mod simulator;
pub mod vessel;
pub mod workspace;

/// Planar vector in the North-East frame (`x` North, `y` East).
pub type Vec2 = nalgebra::Vector2<f64>;
