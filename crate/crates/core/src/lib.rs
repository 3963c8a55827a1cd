pub mod cli;
pub mod config;
pub mod data;
pub mod error;
pub mod model;
pub mod objectives;
pub mod report;
pub mod train;

pub use config::{FeatureMapSpec, ModelConfig, SfrbConv};
pub use error::{Error, Result};
pub use lvsnet_tensor as tensor;
