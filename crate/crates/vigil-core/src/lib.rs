//! Core algorithms for the vigil predictive-maintenance toolkit.
//!
//! Everything in this crate is pure computation over `f64` buffers: no IO,
//! no threads, no global state. All randomness flows through [`rng::Rng`],
//! which is seeded explicitly, so every result is reproducible bit for bit
//! on any platform. The crate builds without the standard library (`alloc`
//! is required).
//!
//! The pieces compose into two pipelines:
//!
//! - time-series anomaly detection: [`arima`] and [`lstm`] one-step
//!   forecasters feed the relative-error rule in [`anomaly`];
//! - defect classification: [`features`] turns raw vibration signals into
//!   labeled windows, [`classifier`] trains dense networks on them (built
//!   on [`nn`]) and moves trained weights and encoders between sensors.
//!
//! [`sim`] generates the synthetic sensor corpora the two pipelines are
//! exercised against.

#![cfg_attr(not(feature = "std"), no_std)]

extern crate alloc;

pub mod anomaly;
pub mod arima;
pub mod classifier;
pub mod error;
pub mod features;
pub mod gradcheck;
pub mod lstm;
pub mod nn;
pub mod rng;
pub mod sim;

mod math;

pub use error::{Error, Result};
