pub mod advantage;
pub mod agent;
pub mod cli;
pub mod env;
pub mod error;
pub mod seed;
pub mod stats;
pub mod trainer;
pub mod verify;

pub use error::{EvpoError, Result};
