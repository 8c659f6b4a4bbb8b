//! External-memory graph sketching.

pub mod apps;
pub mod cc;
pub mod cuts;
pub mod em;
pub mod error;
pub mod graph;
pub mod ingest;
pub mod kconn;
pub mod sketch;
pub mod stream;
pub mod validate;

pub use error::{Error, Result};
