//! Command-line front end for the cascade simulator: configuration,
//! parameter sweeps and machine-readable output.

pub mod config;
pub mod output;
pub mod sweep;

/// Process exit codes.
pub mod exit {
    pub const OK: u8 = 0;
    pub const USAGE: u8 = 1;
    pub const POINT_FAILURE: u8 = 2;
    pub const IO: u8 = 3;
}
