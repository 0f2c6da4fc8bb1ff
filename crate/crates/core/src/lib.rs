//! Autoencoder-based joint communication and sensing (JCAS).
//!
//! A transmitter with a learned constellation and a learned beamformer
//! serves one communication user over a Rayleigh channel while a co-located
//! radar receiver detects up to `T_max` Swerling-1 targets and estimates
//! their azimuth angles. Everything in this crate is pure computation and
//! only needs `alloc`; file formats, the CLI and thread pools live in the
//! `jcas` companion crate.
//!
//! Module map:
//!
//! * [`numerics`] complex matrices, Hermitian Jacobi eigensolver, least
//!   squares, sampling and the seeded RNG streams.
//! * [`nn`] dense networks with a recording tape, losses and Adam.
//! * [`channel`] uniform linear array, Rayleigh link and radar returns.
//! * [`model`] the five subnets wired into the transmit/receive chain, LLRs
//!   and BMI.
//! * [`detection`] counting and one-hot target encodings, Pd/Pf and the
//!   fixed false alarm rate calibration.
//! * [`set_methods`] permutation handling between true and estimated angles.
//! * [`pipeline`], [`training`], [`validation`] the end-to-end minibatch,
//!   the three-stage schedule and the evaluation protocol.
//! * [`esprit`] covariance and single-snapshot Hankel ESPRIT.

#![no_std]

extern crate alloc;

pub mod channel;
pub mod detection;
pub mod error;
pub mod esprit;
pub mod model;
pub mod nn;
pub mod numerics;
pub mod pipeline;
pub mod set_methods;
pub mod training;
pub mod validation;

pub use error::{Error, Result};
pub use num_complex::Complex64;
