//! Anytime, asymptotically optimal planning for multi-arm
//! pick-and-place-via-handoff tasks.
//!
//! The planner searches a tree over pairs of (composite arm configuration,
//! task mode). Composite configurations are vertices of an implicit tensor
//! product of per-arm roadmaps; task modes are nodes of a directed graph of
//! picks, handoffs and places. Neither product is ever materialized.

pub mod baselines;
pub mod budget;
pub mod fixtures;
pub mod geometry;
pub mod instance;
pub mod plan;
pub mod planner;
pub mod roadmap;
pub mod taskspec;
pub mod validate;
