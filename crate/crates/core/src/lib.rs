//! Statistical and symbolic testing of (epsilon, 0)-differential privacy.
//!
//! A program is run many times on one input; the recorded samples are
//! grouped by output and checked against every symbolic path of the program
//! on a neighbouring input. A bucket whose coupling formula is unsatisfiable
//! is evidence that the program is not differentially private.

pub mod benchmarks;
pub mod bucketing;
pub mod constraints;
pub mod dsl;
pub mod generators;
pub mod harness;
pub mod interp;
pub mod sampler;
pub mod solver;
pub mod symbolic;
pub mod value;
