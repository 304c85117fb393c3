//! Reference oracles and the acceptance checks built on them.

pub mod acceptance;
pub mod oracles;
