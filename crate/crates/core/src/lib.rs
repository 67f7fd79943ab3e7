pub mod baseline_csp;
pub mod data_io;
pub mod harness;
pub mod model;
pub mod preprocess;
pub mod synthgen;
