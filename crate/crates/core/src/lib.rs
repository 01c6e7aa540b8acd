//! Protocols over bounded-size single-writer registers, and the machinery to run
//! them under every schedule.

pub mod eps2;
pub mod falsifier;
pub mod fastsim;
pub mod frac;
pub mod iterated;
pub mod ringnet;
pub mod task;
pub mod shmem;

pub use frac::Frac;
