//! Audio-visual voice activity detection for musical scenes.
//!
//! The crate trains and evaluates a multi-branch network that detects a target
//! performer's speech and singing voice. An audio CRNN produces one embedding
//! per event class, a convolutional visual branch produces a vocalization
//! embedding from mouth-region frames, and scaled dot-product attention
//! re-weights the acoustic embeddings by their similarity to the visual one
//! before the final audio-visual decision.
//!
//! Module map:
//!
//! - [`numcore`]: tensors, layers with hand-written backward passes, Adam,
//!   gradient checking and the checkpoint container.
//! - [`dsp`]: WAV input and the log mel-bank front-end.
//! - [`synthgen`]: seeded synthetic scenes standing in for real recordings.
//! - [`model`]: the audio and visual branches and the assembled network.
//! - [`fusion`]: attention weights and the audio-visual heads.
//! - [`training`]: the weighted multi-term objective, training loop, sweeps
//!   and ablations.
//! - [`evalkit`]: block decisions to events, and event-based metrics.
//! - [`config`]: the flat `key = value` run configuration.

pub mod class;
pub mod config;
pub mod dsp;
pub mod error;
pub mod evalkit;
pub mod fusion;
pub mod model;
pub mod numcore;
pub mod synthgen;
pub mod training;

pub use class::EventClass;
pub use error::{Error, Result};
