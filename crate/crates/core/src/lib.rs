pub mod dense;
pub mod error;
pub mod platform;

pub use error::{Error, Result};
pub mod flops;
pub mod vm;
pub mod cannon;
pub mod caqr;
pub mod schedule;
pub mod calu;
pub mod cost;
pub mod exec;
pub mod stability;
pub mod cli;
