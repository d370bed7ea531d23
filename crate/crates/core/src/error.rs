use thiserror::Error;

use crate::der::DerError;
use crate::diarize::DiarizeError;
use crate::fusion::FusionError;
use crate::media_io::{RttmError, SslfError, WavError};
use crate::powerset::PowersetError;
use crate::resampler::ResampleError;
use crate::sep::SepError;
use crate::tasnet::TasnetError;

/// Crate-level error, wrapping each module's own error type.
#[derive(Debug, Error)]
pub enum Error {
    #[error(transparent)]
    Wav(#[from] WavError),
    #[error(transparent)]
    Rttm(#[from] RttmError),
    #[error(transparent)]
    Sslf(#[from] SslfError),
    #[error(transparent)]
    Resample(#[from] ResampleError),
    #[error(transparent)]
    Powerset(#[from] PowersetError),
    #[error(transparent)]
    Fusion(#[from] FusionError),
    #[error(transparent)]
    Tasnet(#[from] TasnetError),
    #[error(transparent)]
    Diarize(#[from] DiarizeError),
    #[error(transparent)]
    Der(#[from] DerError),
    #[error(transparent)]
    Sep(#[from] SepError),
}

pub type Result<T> = std::result::Result<T, Error>;
