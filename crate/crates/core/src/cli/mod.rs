//! Command implementations and report plumbing for the `broadcast` binary.

pub mod commands;
pub mod report;
pub mod source;

pub use commands::{
    cmd_bowles, cmd_pt_spectrum, cmd_selftest, cmd_werner_sweep, cmd_witness, Grid, Options,
};
pub use report::{Check, Report, Table};
pub use source::{load_state_file, SourceSpec, StateFile};
