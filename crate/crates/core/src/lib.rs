pub mod discretize;
pub mod error;
pub mod fom;
pub mod hosvd;
pub mod io;
pub mod metrics;
pub mod models;
pub mod rom;
pub mod tensor;

pub use error::{Error, Result};
