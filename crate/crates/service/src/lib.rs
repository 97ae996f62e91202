//! CLI commands and HTTP API over the vinewatch pipeline.

pub mod api;
pub mod commands;
pub mod config;
pub mod session;

pub use api::router;
pub use commands::CommandError;
pub use config::ServiceConfig;
pub use session::ApiSession;
