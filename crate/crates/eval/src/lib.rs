//! End-to-end evaluation: the sensing → completion → boundary detection
//! → spatial reuse pipeline, the circular baseline, parameter sweeps and
//! their CSV tables.

pub mod baseline;
pub mod metrics;
pub mod output;
pub mod pipeline;
pub mod sweep;
