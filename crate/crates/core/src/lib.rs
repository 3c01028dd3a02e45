pub mod controller;
pub mod error;
pub mod estimation;
pub mod harness;
pub mod rem;
pub mod sim;
pub mod trust;

pub use error::{Error, Result};
