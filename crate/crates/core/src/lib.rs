//! Trace-driven simulator and optimizer for mmwave beam management in urban
//! vehicular downlink networks.

pub mod channel;
pub mod engine;
pub mod error;
pub mod geometry;
pub mod link;
pub mod optimum;
pub mod radio;
pub mod report;
pub mod rng;
pub mod scenario;
pub mod strategies;

pub use error::{Error, Result};
