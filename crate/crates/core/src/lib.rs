//! Broadcast Bell scenarios on dense complex tensors: models, the Bowles
//! test, witness evaluation and branch-level self-testing.

pub mod bowles;
pub mod cli;
pub mod error;
pub mod kit;
pub mod network;
pub mod selftest;
pub mod tensor;
pub mod witness;

pub use error::{Error, Result};
pub use tensor::LabeledOperator;
