//! File formats, parallel execution and command implementations on top of
//! `qbplab-core`.

pub mod cli;
pub mod documents;
pub mod io;
pub mod parallel;
pub mod params;

pub use parallel::Pool;
