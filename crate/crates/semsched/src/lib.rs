//! File formats, sweeps and a thread-safe arrival buffer around
//! [`semsched_core`].

pub mod dataset;
pub mod live;
pub mod output;
pub mod scenario;
pub mod sweep;

pub use semsched_core as core;
