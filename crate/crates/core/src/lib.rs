pub mod composite;
pub mod directed;
pub mod error;
pub mod flow;
pub mod generate;
pub mod graph;
pub mod harness;
pub mod instance;
pub mod layering;
pub mod oracle;
pub mod prize;
pub mod rounding;
pub mod single_sink;

pub use error::{Error, Result};
