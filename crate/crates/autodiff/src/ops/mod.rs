//! Raw forward/backward kernels over flat slices. [`crate::Graph`] wires them
//! into the tape; they are public so tests can drive them directly.

pub mod attention;
pub mod conv;
pub mod lstm;
pub mod norm;
pub mod pool;
