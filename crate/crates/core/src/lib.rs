pub mod action;
pub mod char_forms;
pub mod cli;
pub mod error;
pub mod euler_lagrange;
pub mod field;
pub mod forms;
pub mod geometry;

pub use error::{Error, Result};
