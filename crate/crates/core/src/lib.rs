pub mod error;
pub mod matops;
pub mod plant;

pub use error::{Error, Result};
pub mod synthesis;
pub mod controllers;
pub mod sim;
pub mod analysis;
pub mod config;
pub mod cli;
