//! `SSLF` feature-stack container.
//!
//! Layout (all little-endian):
//!
//! ```text
//! offset  size  field
//!      0     4  magic "SSLF"
//!      4     4  version (u32, = 1)
//!      8     4  n_layers (u32)
//!     12     4  n_frames (u32)
//!     16     4  dim (u32)
//!     20     4  frame_rate (f32)
//!     24     …  n_layers·n_frames·dim f32 values, layer-major then frame-major
//! ```

use std::fs;
use std::path::Path;

use thiserror::Error;

use super::FeatureStack;

pub const SSLF_MAGIC: &[u8; 4] = b"SSLF";
pub const SSLF_VERSION: u32 = 1;
pub const SSLF_HEADER_LEN: usize = 24;

#[derive(Debug, Error)]
pub enum SslfError {
    #[error("i/o error: {0}")]
    Io(#[from] std::io::Error),
    #[error("bad magic, expected \"SSLF\"")]
    BadMagic,
    #[error("unsupported SSLF version {0}")]
    UnsupportedVersion(u32),
    #[error("size mismatch: header declares {declared} payload bytes, file holds {actual}")]
    SizeMismatch { declared: u64, actual: u64 },
    #[error("invalid header: {0}")]
    InvalidHeader(String),
    #[error("non-finite value at payload index {0}")]
    NonFinite(usize),
}

fn u32_at(bytes: &[u8], at: usize) -> u32 {
    u32::from_le_bytes(bytes[at..at + 4].try_into().unwrap())
}

pub fn encode_feature_stack(stack: &FeatureStack) -> Vec<u8> {
    let mut out = Vec::with_capacity(SSLF_HEADER_LEN + stack.data().len() * 4);
    out.extend_from_slice(SSLF_MAGIC);
    out.extend_from_slice(&SSLF_VERSION.to_le_bytes());
    for n in [stack.n_layers(), stack.n_frames(), stack.dim()] {
        out.extend_from_slice(&(n as u32).to_le_bytes());
    }
    out.extend_from_slice(&stack.frame_rate().to_le_bytes());
    for v in stack.data() {
        out.extend_from_slice(&v.to_le_bytes());
    }
    out
}

pub fn decode_feature_stack(bytes: &[u8]) -> Result<FeatureStack, SslfError> {
    if bytes.len() < 4 || &bytes[..4] != SSLF_MAGIC {
        return Err(SslfError::BadMagic);
    }
    if bytes.len() < SSLF_HEADER_LEN {
        return Err(SslfError::SizeMismatch {
            declared: SSLF_HEADER_LEN as u64,
            actual: bytes.len() as u64,
        });
    }
    let version = u32_at(bytes, 4);
    if version != SSLF_VERSION {
        return Err(SslfError::UnsupportedVersion(version));
    }
    let n_layers = u32_at(bytes, 8);
    let n_frames = u32_at(bytes, 12);
    let dim = u32_at(bytes, 16);
    let frame_rate = f32::from_le_bytes(bytes[20..24].try_into().unwrap());
    if n_layers == 0 || n_frames == 0 || dim == 0 {
        return Err(SslfError::InvalidHeader(format!(
            "zero-sized shape {n_layers}×{n_frames}×{dim}"
        )));
    }
    if !(frame_rate.is_finite() && frame_rate > 0.0) {
        return Err(SslfError::InvalidHeader(format!("frame rate {frame_rate}")));
    }
    let count = u64::from(n_layers) * u64::from(n_frames) * u64::from(dim);
    let declared = count * 4;
    let actual = (bytes.len() - SSLF_HEADER_LEN) as u64;
    if declared != actual {
        return Err(SslfError::SizeMismatch { declared, actual });
    }
    let data: Vec<f32> = bytes[SSLF_HEADER_LEN..]
        .chunks_exact(4)
        .map(|b| f32::from_le_bytes(b.try_into().unwrap()))
        .collect();
    if let Some(i) = data.iter().position(|v| !v.is_finite()) {
        return Err(SslfError::NonFinite(i));
    }
    FeatureStack::new(n_layers as usize, n_frames as usize, dim as usize, frame_rate, data)
        .ok_or_else(|| SslfError::InvalidHeader("inconsistent shape".into()))
}

pub fn read_feature_stack(path: impl AsRef<Path>) -> Result<FeatureStack, SslfError> {
    decode_feature_stack(&fs::read(path)?)
}

pub fn write_feature_stack(stack: &FeatureStack, path: impl AsRef<Path>) -> Result<(), SslfError> {
    fs::write(path, encode_feature_stack(stack))?;
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    #[test]
    fn minimal_stack_layout() {
        let stack = FeatureStack::new(1, 1, 1, 50.0, vec![0.0]).unwrap();
        let bytes = encode_feature_stack(&stack);
        assert_eq!(bytes.len(), 28);
        assert_eq!(&bytes[..4], b"SSLF");
        assert_eq!(u32_at(&bytes, 4), 1);
        assert_eq!(f32::from_le_bytes(bytes[20..24].try_into().unwrap()), 50.0);
        assert_eq!(decode_feature_stack(&bytes).unwrap(), stack);
    }

    #[test]
    fn declared_size_beyond_payload() {
        let stack = FeatureStack::new(1, 2, 3, 50.0, vec![1.0; 6]).unwrap();
        let mut bytes = encode_feature_stack(&stack);
        bytes[12..16].copy_from_slice(&3u32.to_le_bytes());
        assert!(matches!(
            decode_feature_stack(&bytes),
            Err(SslfError::SizeMismatch { declared: 36, actual: 24 })
        ));
    }

    #[test]
    fn rejects_bad_magic_and_non_finite() {
        let stack = FeatureStack::new(1, 1, 2, 50.0, vec![1.0, 2.0]).unwrap();
        let mut bytes = encode_feature_stack(&stack);
        bytes[0] = b'X';
        assert!(matches!(decode_feature_stack(&bytes), Err(SslfError::BadMagic)));
        let mut bytes = encode_feature_stack(&stack);
        bytes[28..32].copy_from_slice(&f32::NAN.to_le_bytes());
        assert!(matches!(decode_feature_stack(&bytes), Err(SslfError::NonFinite(1))));
        let mut bytes = encode_feature_stack(&stack);
        bytes[4] = 2;
        assert!(matches!(decode_feature_stack(&bytes), Err(SslfError::UnsupportedVersion(2))));
    }

    #[test]
    fn random_stack_round_trips_bit_exact() {
        let mut rng = ChaCha8Rng::seed_from_u64(13);
        let data: Vec<f32> = (0..13 * 500 * 32).map(|_| rng.gen_range(-10.0f32..10.0)).collect();
        let stack = FeatureStack::new(13, 500, 32, 50.0, data).unwrap();
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("feats.sslf");
        write_feature_stack(&stack, &path).unwrap();
        let back = read_feature_stack(&path).unwrap();
        assert_eq!(back.n_layers(), 13);
        assert!(back
            .data()
            .iter()
            .zip(stack.data())
            .all(|(a, b)| a.to_bits() == b.to_bits()));
    }
}
