#![no_std]
extern crate alloc;

pub mod adaptation;
pub mod baselines;
pub mod catalog;
pub mod classic;
pub mod experiment;
pub mod finder;
pub mod metrics;
pub mod placement;
pub mod reward;
pub mod sim;
pub mod topology;
