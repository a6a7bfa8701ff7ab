//! Frequency-weighted segmental SNR.
//!
//! Frames of 25 ms with a 10 ms hop are Hann-windowed and transformed with a
//! 512-point FFT (zero-padded); magnitude spectra are pooled into 25
//! triangular mel bands between 50 Hz and fs/2. Per band,
//! `SNR = 10 log10(X^2 / (X - Y)^2)` is clamped to [-10, 35] dB and weighted by
//! `X^0.2`, where `X` and `Y` are the reference and test band magnitudes.

use num_complex::Complex64;
use rustfft::FftPlanner;

use crate::error::{Error, Result};

pub const FRAME_MS: f64 = 25.0;
pub const HOP_MS: f64 = 10.0;
pub const FFT_SIZE: usize = 512;
pub const MEL_BANDS: usize = 25;
pub const LOWEST_BAND_HZ: f64 = 50.0;
pub const WEIGHT_EXPONENT: f64 = 0.2;
pub const SNR_FLOOR_DB: f64 = -10.0;
pub const SNR_CEIL_DB: f64 = 35.0;

fn hz_to_mel(f: f64) -> f64 {
    2595.0 * (1.0 + f / 700.0).log10()
}

fn mel_to_hz(m: f64) -> f64 {
    700.0 * (10f64.powf(m / 2595.0) - 1.0)
}

/// `filters[band][bin]` over the `FFT_SIZE/2 + 1` non-negative bins.
pub fn mel_filterbank(sample_rate_hz: f64) -> Vec<Vec<f64>> {
    let (lo, hi) = (hz_to_mel(LOWEST_BAND_HZ), hz_to_mel(sample_rate_hz / 2.0));
    let edges: Vec<f64> = (0..MEL_BANDS + 2)
        .map(|i| mel_to_hz(lo + (hi - lo) * i as f64 / (MEL_BANDS + 1) as f64))
        .collect();
    let bins = FFT_SIZE / 2 + 1;
    (0..MEL_BANDS)
        .map(|j| {
            let (a, b, c) = (edges[j], edges[j + 1], edges[j + 2]);
            (0..bins)
                .map(|k| {
                    let f = k as f64 * sample_rate_hz / FFT_SIZE as f64;
                    if f > a && f <= b {
                        (f - a) / (b - a)
                    } else if f > b && f < c {
                        (c - f) / (c - b)
                    } else {
                        0.0
                    }
                })
                .collect()
        })
        .collect()
}

/// Frame length and hop in samples.
pub fn frame_layout(sample_rate_hz: f64) -> (usize, usize) {
    let frame = (FRAME_MS * 1e-3 * sample_rate_hz).round() as usize;
    let hop = (HOP_MS * 1e-3 * sample_rate_hz).round() as usize;
    (frame, hop)
}

/// Band magnitudes of each frame of `x`: `result[frame][band]`.
pub fn band_magnitudes(x: &[f64], sample_rate_hz: f64) -> Result<Vec<Vec<f64>>> {
    let (frame, hop) = frame_layout(sample_rate_hz);
    if frame == 0 || frame > FFT_SIZE || hop == 0 {
        return Err(Error::Signal(format!(
            "sample rate {sample_rate_hz} Hz gives an unusable frame of {frame} samples"
        )));
    }
    let window: Vec<f64> = (0..frame)
        .map(|n| 0.5 - 0.5 * (2.0 * std::f64::consts::PI * n as f64 / (frame - 1) as f64).cos())
        .collect();
    let bank = mel_filterbank(sample_rate_hz);
    let fft = FftPlanner::<f64>::new().plan_fft_forward(FFT_SIZE);
    let frames = if x.len() <= frame { 1 } else { (x.len() - frame) / hop + 1 };
    Ok((0..frames)
        .map(|i| {
            let mut buf = vec![Complex64::new(0.0, 0.0); FFT_SIZE];
            for (n, w) in window.iter().enumerate() {
                if let Some(v) = x.get(i * hop + n) {
                    buf[n] = Complex64::new(v * w, 0.0);
                }
            }
            fft.process(&mut buf);
            bank.iter()
                .map(|filt| filt.iter().zip(&buf).map(|(g, z)| g * z.norm()).sum())
                .collect()
        })
        .collect())
}

/// Weighted mean SNR of `test` against `reference`, in dB.
pub fn fwsegsnr(reference: &[f64], test: &[f64], sample_rate_hz: f64) -> Result<f64> {
    if reference.len() != test.len() {
        return Err(Error::Signal(format!(
            "reference ({}) and test ({}) lengths differ",
            reference.len(),
            test.len()
        )));
    }
    if reference.iter().all(|&v| v == 0.0) {
        return Err(Error::Signal("reference signal is all zero".into()));
    }
    let xs = band_magnitudes(reference, sample_rate_hz)?;
    let ys = band_magnitudes(test, sample_rate_hz)?;
    let (mut total, mut counted) = (0.0, 0usize);
    for (x, y) in xs.iter().zip(&ys) {
        let (mut num, mut den) = (0.0, 0.0);
        for (&xb, &yb) in x.iter().zip(y) {
            let w = xb.powf(WEIGHT_EXPONENT);
            if w == 0.0 {
                continue;
            }
            let err = (xb - yb) * (xb - yb);
            let snr = if err == 0.0 {
                SNR_CEIL_DB
            } else {
                (10.0 * (xb * xb / err).log10()).clamp(SNR_FLOOR_DB, SNR_CEIL_DB)
            };
            num += w * snr;
            den += w;
        }
        if den > 0.0 {
            total += num / den;
            counted += 1;
        }
    }
    if counted == 0 {
        return Err(Error::Signal("reference has no energy in any analysis band".into()));
    }
    Ok(total / counted as f64)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn tone(len: usize, f: f64) -> Vec<f64> {
        (0..len).map(|n| (2.0 * std::f64::consts::PI * f * n as f64 / 16000.0).sin()).collect()
    }

    #[test]
    fn identical_signals_hit_the_ceiling() {
        let x = tone(4000, 440.0);
        assert!((fwsegsnr(&x, &x, 16000.0).unwrap() - SNR_CEIL_DB).abs() < 1e-12);
    }

    #[test]
    fn overwhelming_noise_hits_the_floor() {
        let x = tone(4000, 440.0);
        let noise: Vec<f64> = (0..4000).map(|n| 1e4 * (((n * 7919) % 101) as f64 - 50.0)).collect();
        let y: Vec<f64> = x.iter().zip(&noise).map(|(a, b)| a + b).collect();
        assert!((fwsegsnr(&x, &y, 16000.0).unwrap() - SNR_FLOOR_DB).abs() < 1e-9);
    }

    #[test]
    fn zero_reference_is_an_error() {
        assert!(fwsegsnr(&[0.0; 800], &[1.0; 800], 16000.0).is_err());
        assert!(fwsegsnr(&[1.0; 800], &[1.0; 799], 16000.0).is_err());
    }

    #[test]
    fn frame_count() {
        let bands = band_magnitudes(&vec![1.0; 80000], 16000.0).unwrap();
        assert_eq!(bands.len(), 498);
        assert_eq!(frame_layout(16000.0), (400, 160));
    }

    #[test]
    fn filterbank_covers_band() {
        let bank = mel_filterbank(16000.0);
        assert_eq!(bank.len(), MEL_BANDS);
        // Every bin between 50 Hz and 8 kHz belongs to some band.
        for k in 2..256 {
            assert!(bank.iter().any(|b| b[k] > 0.0), "bin {k}");
        }
    }
}
