//! End-to-end simulation and estimation of sample-rate offsets in
//! stereo reproduction over unsynchronized wireless loudspeakers.
//!
//! The crate covers the whole chain:
//!
//! * [`room`] — shoebox image-source impulse responses and acoustic
//!   scene synthesis for a microphone array and a pair of listener
//!   ears, with per-device clock offsets injected into the playback
//!   paths.
//! * [`resample`] — STFT-domain offset application (overlap-save phase
//!   ramps) and compensation (conjugate ramps driven by an estimate
//!   trace).
//! * [`beamform`] — oracle relative transfer functions from
//!   solo-activity phases and a diagonally loaded LCMV beamformer that
//!   isolates each loudspeaker at the array.
//! * [`dwacd`] — streaming offset estimation from the drift between
//!   temporally spaced coherence functions, with golden-section lag
//!   refinement and activity gating.
//! * [`binaural`] — interaural coherence and ITD maps over a
//!   gammatone-spaced filterbank, plus difference maps against a
//!   reference condition.
//! * [`stft`], [`search`] — the shared analysis/synthesis and scalar
//!   optimization primitives everything above is built on.
//!
//! Hot loops (impulse-response batches, scene paths, band maps) are
//! data-parallel via rayon when the default `parallel` feature is on;
//! disabling it yields a dependency-light sequential build with
//! identical results.

// Index-parallel loops over multiple arrays read clearer than zipped
// iterator chains in the DSP kernels, and `!(x > 0.0)` deliberately
// rejects NaN where `x <= 0.0` would not.
#![allow(clippy::needless_range_loop, clippy::neg_cmp_op_on_partial_ord)]

pub mod beamform;
pub mod binaural;
pub mod dwacd;
pub mod error;
pub mod noise;
pub mod parallel;
pub mod resample;
pub mod room;
pub mod search;
pub mod signal;
pub mod stft;
pub mod wav;

pub use error::{Error, Result};
pub use signal::TimeSignal;
pub use stft::{istft, stft, Spectrogram, StftConfig, WindowKind};

pub use num_complex;
