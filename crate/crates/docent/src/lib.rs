//! Files, command line and network providers for the `docent-core` engine.

pub mod cache;
pub mod cli;
pub mod files;
pub mod live;
