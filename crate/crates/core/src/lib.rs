//! Supply, buffer and fallback simulation of key-secured grid communication,
//! with the matching techno-economic evaluation.

pub mod analytics;
pub mod architecture;
pub mod buffer;
pub mod economics;
pub mod error;
pub mod manifest;
pub mod rng;
pub mod simulator;
pub mod supply;
pub mod topology;
pub mod traffic;

pub use architecture::Architecture;
pub use error::{Error, Result};
