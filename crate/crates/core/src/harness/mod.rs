//! Stream generation, game orchestration, configuration, persistence,
//! and the command-line interface.

pub mod cli;
pub mod config;
pub mod io;
pub mod run;
pub mod stream;

pub use config::{DoublingConfig, Mode, RunConfig, Tolerances};
pub use run::{doubling_wrapper, run_game};
pub use stream::{Stream, StreamSpec};
