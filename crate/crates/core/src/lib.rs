pub mod bench;
pub mod circuit;
pub mod data;
pub mod dualrep;
pub mod error;
pub mod fsdist;
pub mod pruner;
pub mod qmath;
pub mod train;
pub mod verify;

pub use error::{Error, Result};
