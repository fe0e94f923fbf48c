//! End-to-end dialogue-act classification from raw audio.
//!
//! The network fuses frame-level prosody (energy and pitch) into log
//! mel-filterbank features through a learned per-frame gate, encodes the
//! result with a stacked bidirectional LSTM, and attends the encoder states
//! over a multi-scale CNN summary of the prosody track through a
//! dual-affinity (similarity × dissimilarity-gate) fusion before a softmax
//! classifier.
//!
//! Crate map:
//!
//! - [`features`]: framing, LFBE, energy and pitch extraction, feature cache.
//! - [`numerics`]: tensors, tape-based reverse-mode gradients, Adam,
//!   finite-difference gradient checks, checkpoint container.
//! - [`model`]: configuration, ablations, forward pass, gate traces.
//! - [`data`]: manifests, label combining, WAV I/O, synthetic corpus,
//!   batching.
//! - [`training`]: training loop, evaluation, Mann-Whitney U, multi-run
//!   protocol and reports.
//! - [`cli`]: the `pdac` command-line front end.
//!
//! Runnable walkthroughs live in the crate's `examples/` directory.

pub mod cli;
pub mod data;
pub mod features;
pub mod model;
pub mod numerics;
pub mod training;
