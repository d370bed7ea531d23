use std::fs;
use std::path::Path;

use thiserror::Error;

use super::AudioBuffer;

const FORMAT_PCM: u16 = 1;
const FORMAT_EXTENSIBLE: u16 = 0xFFFE;

#[derive(Debug, Error)]
pub enum WavError {
    #[error("i/o error: {0}")]
    Io(#[from] std::io::Error),
    #[error("malformed WAV header: {0}")]
    MalformedHeader(String),
    #[error("expected mono audio, found {0} channels")]
    Multichannel(u16),
    #[error("unsupported encoding (format tag {format_tag:#06x}, {bits} bits); only PCM16 is supported")]
    UnsupportedEncoding { format_tag: u16, bits: u16 },
}

fn malformed(msg: impl Into<String>) -> WavError {
    WavError::MalformedHeader(msg.into())
}

fn u16_at(bytes: &[u8], at: usize) -> u16 {
    u16::from_le_bytes([bytes[at], bytes[at + 1]])
}

fn u32_at(bytes: &[u8], at: usize) -> u32 {
    u32::from_le_bytes([bytes[at], bytes[at + 1], bytes[at + 2], bytes[at + 3]])
}

struct Format {
    channels: u16,
    sample_rate: u32,
}

fn parse_fmt(chunk: &[u8]) -> Result<Format, WavError> {
    if chunk.len() < 16 {
        return Err(malformed(format!("fmt chunk too short ({} bytes)", chunk.len())));
    }
    let mut format_tag = u16_at(chunk, 0);
    let channels = u16_at(chunk, 2);
    let sample_rate = u32_at(chunk, 4);
    let bits = u16_at(chunk, 14);
    if format_tag == FORMAT_EXTENSIBLE {
        // cbSize(2) validBits(2) channelMask(4) then the sub-format GUID.
        if chunk.len() < 26 {
            return Err(malformed("extensible fmt chunk too short"));
        }
        format_tag = u16_at(chunk, 24);
    }
    if channels == 0 {
        return Err(malformed("zero channels"));
    }
    if sample_rate == 0 {
        return Err(malformed("zero sample rate"));
    }
    if format_tag != FORMAT_PCM || bits != 16 {
        return Err(WavError::UnsupportedEncoding { format_tag, bits });
    }
    if channels != 1 {
        return Err(WavError::Multichannel(channels));
    }
    Ok(Format {
        channels,
        sample_rate,
    })
}

/// Decodes an in-memory RIFF/WAVE file holding PCM16 mono audio.
///
/// Samples are scaled by `1/32768`.
pub fn decode_wav(bytes: &[u8]) -> Result<AudioBuffer, WavError> {
    if bytes.len() < 12 || &bytes[0..4] != b"RIFF" || &bytes[8..12] != b"WAVE" {
        return Err(malformed("missing RIFF/WAVE signature"));
    }
    let mut pos = 12;
    let mut format: Option<Format> = None;
    let mut data: Option<&[u8]> = None;
    while pos + 8 <= bytes.len() {
        let id = &bytes[pos..pos + 4];
        let size = u32_at(bytes, pos + 4) as usize;
        let body_start = pos + 8;
        let body_end = body_start
            .checked_add(size)
            .filter(|&end| end <= bytes.len())
            .ok_or_else(|| malformed(format!("chunk {:?} overruns file", String::from_utf8_lossy(id))))?;
        let body = &bytes[body_start..body_end];
        match id {
            b"fmt " => format = Some(parse_fmt(body)?),
            b"data" => {
                data = Some(body);
                if format.is_some() {
                    break;
                }
            }
            _ => {}
        }
        // chunks are word aligned
        pos = body_end + (size & 1);
    }
    let format = format.ok_or_else(|| malformed("no fmt chunk"))?;
    let data = data.ok_or_else(|| malformed("no data chunk"))?;
    debug_assert_eq!(format.channels, 1);
    if data.len() % 2 != 0 {
        return Err(malformed("data chunk length is not a multiple of the frame size"));
    }
    let samples = data
        .chunks_exact(2)
        .map(|b| f32::from(i16::from_le_bytes([b[0], b[1]])) / 32768.0)
        .collect();
    AudioBuffer::new(samples, format.sample_rate).ok_or_else(|| malformed("invalid sample rate"))
}

pub fn read_wav(path: impl AsRef<Path>) -> Result<AudioBuffer, WavError> {
    decode_wav(&fs::read(path)?)
}

fn quantize(sample: f32) -> i16 {
    (sample.clamp(-1.0, 1.0) * 32767.0).round() as i16
}

/// Encodes a buffer as a 44-byte-header PCM16 mono WAV file.
///
/// Samples are clipped to `[-1, 1]` and quantized as `round(sample * 32767)`.
pub fn encode_wav(buffer: &AudioBuffer) -> Vec<u8> {
    let data_len = (buffer.len() * 2) as u32;
    let rate = buffer.sample_rate();
    let mut out = Vec::with_capacity(44 + data_len as usize);
    out.extend_from_slice(b"RIFF");
    out.extend_from_slice(&(36 + data_len).to_le_bytes());
    out.extend_from_slice(b"WAVE");
    out.extend_from_slice(b"fmt ");
    out.extend_from_slice(&16u32.to_le_bytes());
    out.extend_from_slice(&FORMAT_PCM.to_le_bytes());
    out.extend_from_slice(&1u16.to_le_bytes());
    out.extend_from_slice(&rate.to_le_bytes());
    out.extend_from_slice(&(rate * 2).to_le_bytes());
    out.extend_from_slice(&2u16.to_le_bytes());
    out.extend_from_slice(&16u16.to_le_bytes());
    out.extend_from_slice(b"data");
    out.extend_from_slice(&data_len.to_le_bytes());
    for &s in buffer.samples() {
        out.extend_from_slice(&quantize(s).to_le_bytes());
    }
    out
}

pub fn write_wav(buffer: &AudioBuffer, path: impl AsRef<Path>) -> Result<(), WavError> {
    fs::write(path, encode_wav(buffer))?;
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    fn header(format_tag: u16, channels: u16, rate: u32, bits: u16, data: &[u8]) -> Vec<u8> {
        let block = channels * bits / 8;
        let mut out = Vec::new();
        out.extend_from_slice(b"RIFF");
        out.extend_from_slice(&(36 + data.len() as u32).to_le_bytes());
        out.extend_from_slice(b"WAVEfmt ");
        out.extend_from_slice(&16u32.to_le_bytes());
        out.extend_from_slice(&format_tag.to_le_bytes());
        out.extend_from_slice(&channels.to_le_bytes());
        out.extend_from_slice(&rate.to_le_bytes());
        out.extend_from_slice(&(rate * u32::from(block)).to_le_bytes());
        out.extend_from_slice(&block.to_le_bytes());
        out.extend_from_slice(&bits.to_le_bytes());
        out.extend_from_slice(b"data");
        out.extend_from_slice(&(data.len() as u32).to_le_bytes());
        out.extend_from_slice(data);
        out
    }

    #[test]
    fn one_second_of_silence() {
        let bytes = header(1, 1, 8000, 16, &vec![0u8; 16000]);
        let audio = decode_wav(&bytes).unwrap();
        assert_eq!(audio.sample_rate(), 8000);
        assert_eq!(audio.len(), 8000);
        assert!(audio.samples().iter().all(|&s| s == 0.0));
    }

    #[test]
    fn full_scale_positive_sample() {
        let bytes = header(1, 1, 16000, 16, &32767i16.to_le_bytes());
        let audio = decode_wav(&bytes).unwrap();
        assert_eq!(audio.samples()[0], 32767.0 / 32768.0);
    }

    #[test]
    fn errors_are_distinct() {
        assert!(matches!(decode_wav(b"RIFX0000WAVE"), Err(WavError::MalformedHeader(_))));
        let stereo = header(1, 2, 16000, 16, &[0; 8]);
        assert!(matches!(decode_wav(&stereo), Err(WavError::Multichannel(2))));
        let float = header(3, 1, 16000, 32, &[0; 8]);
        assert!(matches!(
            decode_wav(&float),
            Err(WavError::UnsupportedEncoding { format_tag: 3, bits: 32 })
        ));
        let pcm8 = header(1, 1, 16000, 8, &[0; 8]);
        assert!(matches!(decode_wav(&pcm8), Err(WavError::UnsupportedEncoding { bits: 8, .. })));
        let mut truncated = header(1, 1, 16000, 16, &[0; 8]);
        truncated.truncate(truncated.len() - 4);
        assert!(matches!(decode_wav(&truncated), Err(WavError::MalformedHeader(_))));
    }

    #[test]
    fn skips_unknown_chunks() {
        let mut bytes = header(1, 1, 8000, 16, &1000i16.to_le_bytes());
        // splice a LIST chunk with odd size (padded) between fmt and data
        let list = [b"LIST".as_slice(), &3u32.to_le_bytes(), &[1, 2, 3, 0]].concat();
        bytes.splice(36..36, list);
        let audio = decode_wav(&bytes).unwrap();
        assert_eq!(audio.samples(), &[1000.0 / 32768.0]);
    }

    #[test]
    fn empty_buffer_writes_valid_file() {
        let bytes = encode_wav(&AudioBuffer::new(vec![], 16000).unwrap());
        assert_eq!(bytes.len(), 44);
        assert_eq!(u32_at(&bytes, 40), 0);
        assert!(decode_wav(&bytes).unwrap().is_empty());
    }

    #[test]
    fn clipping_and_header_duration() {
        let bytes = encode_wav(&AudioBuffer::new(vec![1.5, -1.5], 8000).unwrap());
        assert_eq!(i16::from_le_bytes([bytes[44], bytes[45]]), 32767);
        assert_eq!(i16::from_le_bytes([bytes[46], bytes[47]]), -32767);

        let bytes = encode_wav(&AudioBuffer::silence(16000, 16000).unwrap());
        let byte_rate = u32_at(&bytes, 28);
        let data_len = u32_at(&bytes, 40);
        assert_eq!(f64::from(data_len) / f64::from(byte_rate), 1.0);
    }

    #[test]
    fn round_trip_is_within_quantization_error() {
        let mut rng = ChaCha8Rng::seed_from_u64(7);
        let samples: Vec<f32> = (0..4096).map(|_| rng.gen_range(-1.0f32..=1.0)).collect();
        let audio = AudioBuffer::new(samples.clone(), 16000).unwrap();
        let back = decode_wav(&encode_wav(&audio)).unwrap();
        assert_eq!(back.sample_rate(), 16000);
        for (&a, &b) in samples.iter().zip(back.samples()) {
            // write scales by 32767 and read by 32768, so the round trip
            // carries a |s|/32768 gain error on top of half an LSB
            let bound = (0.5 + a.abs()) / 32768.0 + 1e-7;
            assert!((a - b).abs() <= bound, "{a} -> {b}");
            if a.abs() <= 0.5 {
                assert!((a - b).abs() <= 1.0 / 32768.0);
            }
        }
    }
}
