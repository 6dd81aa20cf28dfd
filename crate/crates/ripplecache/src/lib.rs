//! Config files, file formats, sweeps and statistics around `ripplecache-core`.

pub mod config;
pub mod csvio;
pub mod internals;
pub mod summary;
pub mod sweep;
pub mod topofile;
