//! Scene files, benchmark sweeps and plan rendering around the planners of
//! `handoff-core`.

pub mod bench;
pub mod planners;
pub mod render;
pub mod scene_io;
