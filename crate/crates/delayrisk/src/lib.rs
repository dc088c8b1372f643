//! Systemic risk analysis for noisy time-delay linear consensus networks.

pub mod graph;
pub mod linalg;
pub mod special;
pub mod dde;
pub mod observables;
pub mod risk;
pub mod rng;
pub mod joint;
pub mod limits;
pub mod topology;
pub mod sim;
