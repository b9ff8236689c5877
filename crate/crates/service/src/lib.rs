//! The PAiR service: sessions over a shared Chronicle pool, the NDJSON
//! protocol, a TCP server and a scenario runner.

pub mod config;
pub mod protocol;
pub mod service;
pub mod session;
pub mod scenario;
pub mod server;
