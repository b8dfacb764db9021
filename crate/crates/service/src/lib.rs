//! HTTP service, event-log persistence and command-line front end for the
//! evaluation engine in `ikiwisi-core`.

pub mod catalog;
pub mod commands;
pub mod data;
pub mod eval;
pub mod http;
pub mod store;

pub use catalog::{Catalog, CatalogError};
pub use data::{load_data_dir, write_data_dir, DataSet};
pub use eval::{evaluate, EvalReport, EvalRequest};
