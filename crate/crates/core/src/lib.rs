//! Deterministic building blocks for evaluating self-supervised speech
//! features on diarization and separation.
//!
//! The crate covers three groups of functionality:
//!
//! * data carriers and file formats ([`media_io`]): PCM16 WAV, RTTM and the
//!   `SSLF` feature-stack container;
//! * pipeline mechanics: [`powerset`] label codec, [`fusion`] of layer-wise
//!   features, [`diarize`] (chunking, AHC, stitching), [`tasnet`]
//!   encode/mask/decode and the [`resampler`];
//! * scorers: [`der`] (false alarm, missed detection, confusion under an
//!   optimal speaker mapping) and [`sep`] (SDR, SI-SDR, SDRi, PIT).

pub mod assignment;
pub mod der;
pub mod diarize;
pub mod error;
pub mod fusion;
pub mod media_io;
pub mod powerset;
pub mod resampler;
pub mod sep;
pub mod tasnet;

pub use der::{compute_der, optimal_mapping, DerReport};
pub use diarize::{ChunkSegmentation, DiarizeConfig};
pub use error::{Error, Result};
pub use fusion::{FeatureMatrix, LayerWeights};
pub use media_io::{Annotation, AudioBuffer, FeatureStack, Segment};
pub use powerset::PowersetSpace;
pub use resampler::FirFilter;
pub use sep::{Metric, SepReport};
pub use tasnet::{EncoderBasis, MaskSet, Nonlinearity};

/// Frame rate of self-supervised speech encoders (20 ms hop at 16 kHz).
pub const SSL_FRAME_RATE: f32 = 50.0;
