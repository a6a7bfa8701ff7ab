//! Minimal IEEE-float 64-bit WAV encoding.

/// Interleaves `channels` (all the same length) into a WAV byte stream.
pub fn encode_f64(channels: &[Vec<f64>], sample_rate_hz: u32) -> Vec<u8> {
    let n = channels.len() as u16;
    let frames = channels.first().map_or(0, Vec::len) as u32;
    let block_align = n as u32 * 8;
    let data_len = frames * block_align;
    let mut out = Vec::with_capacity(58 + data_len as usize);
    out.extend_from_slice(b"RIFF");
    out.extend_from_slice(&(50 + data_len).to_le_bytes());
    out.extend_from_slice(b"WAVE");
    out.extend_from_slice(b"fmt ");
    out.extend_from_slice(&18u32.to_le_bytes());
    out.extend_from_slice(&3u16.to_le_bytes()); // IEEE float
    out.extend_from_slice(&n.to_le_bytes());
    out.extend_from_slice(&sample_rate_hz.to_le_bytes());
    out.extend_from_slice(&(sample_rate_hz * block_align).to_le_bytes());
    out.extend_from_slice(&(block_align as u16).to_le_bytes());
    out.extend_from_slice(&64u16.to_le_bytes());
    out.extend_from_slice(&0u16.to_le_bytes());
    out.extend_from_slice(b"fact");
    out.extend_from_slice(&4u32.to_le_bytes());
    out.extend_from_slice(&frames.to_le_bytes());
    out.extend_from_slice(b"data");
    out.extend_from_slice(&data_len.to_le_bytes());
    for i in 0..frames as usize {
        for ch in channels {
            out.extend_from_slice(&ch[i].to_le_bytes());
        }
    }
    out
}
