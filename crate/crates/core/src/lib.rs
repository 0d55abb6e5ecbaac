pub mod constants;
pub mod error;
pub mod lm;
pub mod loss_budget;
pub mod qubit_budget;
pub mod spr_regression;
pub mod tls_model;
pub mod uncert;
pub mod xps;

pub use error::{Error, Result};
pub use uncert::UValue;
