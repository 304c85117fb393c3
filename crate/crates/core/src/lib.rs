pub mod channel;
pub mod coding;
pub mod elm;
pub mod error;
pub mod link;
pub mod numerics;
pub mod postdistort;
pub mod rng;
pub mod sim;
pub mod turbo;
pub mod verification;

pub use error::{Error, Result};
