//! Simulation engine and detectors for fixed-symbol aided grant-free random
//! access.
//!
//! Devices that wake up in a frame pick one of `N_p` slots and send a packet
//! whose first symbol is a known unit value. The base station runs
//! message-passing activity detection ([`mpad`]) on the received fixed
//! symbols of all slots, then recovers the collided data in each slot with an
//! MMSE multi-user detector ([`mud`]). [`baselines`] holds linear reference
//! detectors and [`harness`] drives Monte-Carlo sweeps.

pub mod baselines;
pub mod config;
pub mod error;
pub mod harness;
pub mod model;
pub mod mpad;
pub mod mud;
pub mod rng;

pub use config::SystemConfig;
pub use error::{Error, Result};
pub use model::{synthesize_frame, BinaryMatrix, Frame, IndicatorMatrix};
pub use mpad::{detect, DetectionResult, DetectorParams, WeightSet};
pub use rng::FrameSeed;
