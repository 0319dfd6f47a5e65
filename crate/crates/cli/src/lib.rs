//! Library half of the `topicforge` binary: parameter schemas,
//! configuration resolution, run manifests, and the command
//! implementations. Kept as a library so integration tests can exercise
//! the pieces directly.

pub mod commands;
pub mod config;
pub mod manifest;
pub mod schema;
