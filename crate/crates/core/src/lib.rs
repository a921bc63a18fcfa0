//! Streaming directional speech understanding for a five-microphone glasses
//! array.
//!
//! The crate covers the whole cascade: spatial scene simulation, fixed
//! beamforming, chunk-wise mask-based separation, wearer/partner chunk
//! attribution, sliding-window requests to a speech language model, and
//! scoring (speaker-attributed WER, BLEU, SI-SDR). Serialized output
//! training targets are built and parsed by [`sot`].

pub mod attribution;
pub mod audio;
pub mod beamformer;
pub mod dsp;
pub mod error;
pub mod lang;
pub mod metrics;
pub mod ndjson;
pub mod scene;
pub mod separator;
pub mod slm;
pub mod sot;
pub mod speaker;

pub use audio::{AudioClip, ManifestEntry, Segment, WavEncoding, SAMPLE_RATE};
pub use error::{Error, Result};
pub use speaker::Speaker;

/// Samples in one 600 ms streaming chunk at 16 kHz.
pub const CHUNK_SAMPLES: usize = 9_600;

/// Duration of one streaming chunk in seconds.
pub const CHUNK_SECONDS: f64 = 0.6;
