//! Link-level simulator and analytic toolkit for multi-device OFDM
//! symbiotic radio with frequency-shifting backscatter devices.

pub mod config;
pub mod analytic;
pub mod backscatter;
pub mod channel;
pub mod cli;
pub mod detect;
pub mod error;
pub mod harness;
pub mod ofdm;

pub use error::{Error, Result};
