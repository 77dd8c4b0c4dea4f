pub mod classify;
pub mod cli;
pub mod curvature;
pub mod error;
pub mod expr;
pub mod families;
pub mod maps;
pub mod metric;
pub mod models;
pub mod optimize;
pub mod quadrature;
pub mod tensor;

pub use error::{Error, Result};
pub use metric::{MetricField, Signature};
