//! Schema server and the `semschema` command line tool.

pub mod commands;
pub mod server;

pub use commands::{run, Cli, Io};
pub use server::{router, serve, AppState, ServerConfig, Snapshot};
