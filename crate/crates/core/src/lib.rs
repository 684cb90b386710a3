//! Privacy-preserving transmit design for cell-free MIMO ISAC.
//!
//! A set of distributed multi-antenna access points serves downlink users
//! while illuminating a radar target. The precoder maximizes sensing SINR
//! under user-SINR and per-antenna power constraints, and the choice of
//! which APs act as sensing receivers is made to reduce how much the sensing
//! beams leak towards users. A simulated adversary (one of the users)
//! estimates the transmit signals, recovers the beam directions and
//! triangulates the target.

pub mod adversary;
pub mod config;
pub mod error;
pub mod framework;
pub mod harness;
pub mod precoder;
pub mod rng;
pub mod scenario;
pub mod selection;
pub mod signals;
pub mod verify;

pub use config::{Profile, ScenarioConfig, Scoring};
pub use error::{Error, Result};
