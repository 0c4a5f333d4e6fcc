//! Configuration-driven runs of the `nmqsd-core` numerics with reproducible,
//! file-based outputs. The `nmqsd` binary is a thin command-line front end
//! over [`run`].

pub mod config;
mod error;
pub mod io;
mod run;

pub use config::{ConfigError, RunConfig, Task};
pub use error::{Error, Result};
pub use run::{run, Manifest};
