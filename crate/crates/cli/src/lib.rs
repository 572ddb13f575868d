//! Command-line front end for the Dirac spectral library: configuration
//! parsing, subcommand drivers, CSV I/O, and the bundled verification
//! suites.

pub mod commands;
pub mod config;
pub mod io;
pub mod rng;
pub mod verify;
