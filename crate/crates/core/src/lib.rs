//! Core library for task-wise single-trial ERP detection in streams of
//! satellite-image EEG sessions.
//!
//! Everything in this crate is pure computation over in-memory data:
//! domain types for recordings and sessions, a seed-deterministic synthetic
//! session generator, beep-trigger segmentation and sliding windows, a
//! from-scratch compact convolutional network with AdamW training, the three
//! task-specific detectors, per-trial decision aggregation, and the F-beta
//! cross-validation metrics. File formats, concurrency, and the command-line
//! frontend live in the companion `erpstream` crate.
//!
//! The crate is `no_std` (with `alloc`); float math goes through `libm` so
//! results are identical with or without the standard library.

#![cfg_attr(not(test), no_std)]

extern crate alloc;

pub mod decision;
pub mod detector;
pub mod eeg;
pub mod gradcheck;
pub mod metrics;
pub mod net;
pub mod optim;
pub mod real;
pub mod rng;
pub mod segment;
pub mod synth;
pub mod tensor;
pub mod train;

pub use eeg::{
    validate_recording, EegRecording, Paradigm, SessionManifest, TrialLabel, TrialSegment,
    TriggerCode, TriggerEvent,
};
pub use rng::Rng;
pub use tensor::{Array2, Array3};
