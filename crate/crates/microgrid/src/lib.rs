//! File formats, batch execution and the command-line driver around
//! [`microgrid_core`].

pub mod cli;
pub mod io;
pub mod output;
pub mod report;
pub mod sweep;
pub mod tune;

pub use io::{apply_override, load_scenario, parse_scenario, LoadError};
pub use microgrid_core as core;

/// Process exit codes.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
#[repr(u8)]
pub enum Exit {
    Ok = 0,
    Internal = 1,
    Input = 2,
    Numerical = 3,
}
