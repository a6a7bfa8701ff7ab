//! Least-squares FIR approximation of narrowband weights.
//!
//! Each channel's taps minimize
//!
//! ```text
//! sum_p q_p |sum_l t_l exp(-j w_p l) - W(w_p) exp(-j w_p tau)|^2  +  mu sum_l v_l t_l^2
//! ```
//!
//! with `tau = (L-1)/2`, `q_p = 1` inside the pass-band and `0.01` outside.
//! The small `mu` term is added only when `L` exceeds the number of real
//! constraints (about `2P`). It favours taps concentrated around a prior
//! center `c` (`v_l` grows with `(l - c)^2`), which picks the smooth
//! interpolant between design frequencies. A grid of spacing `fs/K` only pins
//! the response modulo a `K`-sample period, so `c` must sit where the target
//! impulse response actually is: `tau` minus any modeling delay of the
//! steering model.

use std::path::Path;

use nalgebra::{Cholesky, DMatrix, DVector, Dyn};
use num_complex::Complex64;
use serde::{Deserialize, Serialize};

use super::narrowband::NarrowbandWeights;
use crate::error::{read_file, write_file, Error, Result};
use crate::spatial::FrequencyGrid;

/// Fit weight for frequencies outside the pass-band.
pub const DONT_CARE_WEIGHT: f64 = 0.01;
/// Ridge strength relative to the mean diagonal of the fit's normal matrix.
pub const TAP_PRIOR_STRENGTH: f64 = 1e-7;
/// Prior weight at the center, relative to the weight half a filter length away.
pub const TAP_PRIOR_FLOOR: f64 = 1e-4;

/// N channels of L real taps plus provenance.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FirBeamformer {
    pub sample_rate_hz: f64,
    #[serde(rename = "L")]
    pub length: usize,
    /// `taps[channel][lag]`
    pub taps: Vec<Vec<f64>>,
    pub group_delay_samples: f64,
    pub spec_digest: String,
    /// Relative pass-band fit error at the design frequencies, dB (floored at -400).
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub fit_error_db: Option<f64>,
}

impl FirBeamformer {
    pub fn new(sample_rate_hz: f64, taps: Vec<Vec<f64>>, spec_digest: String) -> Result<Self> {
        let length = taps.first().map_or(0, Vec::len);
        let bf = Self {
            sample_rate_hz,
            length,
            group_delay_samples: (length as f64 - 1.0) / 2.0,
            taps,
            spec_digest,
            fit_error_db: None,
        };
        bf.validate()?;
        Ok(bf)
    }

    pub fn validate(&self) -> Result<()> {
        if self.taps.is_empty() {
            return Err(Error::InvalidArgument("beamformer has no channels".into()));
        }
        if !(self.sample_rate_hz > 0.0) {
            return Err(Error::InvalidArgument("sample rate must be positive".into()));
        }
        if self.length < 1 || self.taps.iter().any(|t| t.len() != self.length) {
            return Err(Error::InvalidArgument(format!(
                "every channel must have L = {} taps",
                self.length
            )));
        }
        if self.taps.iter().flatten().any(|t| !t.is_finite()) {
            return Err(Error::InvalidArgument("taps must be finite".into()));
        }
        Ok(())
    }

    pub fn channels(&self) -> usize {
        self.taps.len()
    }

    /// DTFT of every channel at `freq_hz`.
    pub fn response(&self, freq_hz: f64) -> Vec<Complex64> {
        self.taps
            .iter()
            .map(|t| crate::steering::dtft(t, freq_hz, self.sample_rate_hz))
            .collect()
    }

    pub fn from_json(text: &str) -> Result<Self> {
        let bf: FirBeamformer = serde_json::from_str(text)?;
        bf.validate()?;
        Ok(bf)
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string(self).expect("beamformer serializes")
    }

    pub fn load(path: &Path) -> Result<Self> {
        Self::from_json(&read_file(path)?)
    }

    pub fn save(&self, path: &Path) -> Result<()> {
        write_file(path, self.to_json().as_bytes())
    }

    /// N-channel IEEE-float 64-bit WAV with the taps as samples.
    pub fn to_wav(&self) -> Vec<u8> {
        crate::wav::encode_f64(&self.taps, self.sample_rate_hz.round() as u32)
    }
}

/// Precomputed normal equations for fitting L taps on one frequency grid.
/// The same factorization serves every channel and every design on that grid.
pub struct FirFitter {
    grid: FrequencyGrid,
    length: usize,
    center: f64,
    weights: Vec<f64>,
    factor: Cholesky<f64, Dyn>,
}

impl FirFitter {
    /// Tap prior centered on the group delay `(L-1)/2`.
    pub fn new(grid: &FrequencyGrid, length: usize) -> Result<Self> {
        Self::with_center(grid, length, (length as f64 - 1.0) / 2.0)
    }

    /// Tap prior centered on `center` (clamped to the filter span).
    pub fn with_center(grid: &FrequencyGrid, length: usize, center: f64) -> Result<Self> {
        if !center.is_finite() {
            return Err(Error::InvalidArgument(format!("prior center must be finite, got {center}")));
        }
        if grid.len() < 2 {
            return Err(Error::InvalidArgument("FIR fit needs at least 2 design frequencies".into()));
        }
        if length < 2 {
            return Err(Error::InvalidArgument(format!("FIR length must be >= 2, got {length}")));
        }
        let fs = grid.sample_rate_hz;
        let weights: Vec<f64> = grid
            .freqs_hz
            .iter()
            .map(|&f| if grid.in_band(f) { 1.0 } else { DONT_CARE_WEIGHT })
            .collect();
        // sum_p q_p (c c^T + s s^T) is Toeplitz with entries sum_p q_p cos(w_p k).
        let toeplitz: Vec<f64> = (0..length)
            .map(|k| {
                grid.freqs_hz
                    .iter()
                    .zip(&weights)
                    .map(|(&f, &q)| q * (2.0 * std::f64::consts::PI * f / fs * k as f64).cos())
                    .sum()
            })
            .collect();
        let center = center.clamp(0.0, length as f64 - 1.0);
        let half = length as f64 / 2.0;
        // Real constraints: two per frequency, one at DC and at Nyquist.
        let nyquist = fs / 2.0;
        let constraints: usize = grid
            .freqs_hz
            .iter()
            .map(|&f| if f == 0.0 || (f - nyquist).abs() < 1e-9 * nyquist { 1 } else { 2 })
            .sum();
        let mu = if length > constraints {
            TAP_PRIOR_STRENGTH * toeplitz[0]
        } else {
            0.0
        };
        let normal = DMatrix::from_fn(length, length, |l, m| {
            let base = toeplitz[l.abs_diff(m)];
            if l == m {
                let off = (l as f64 - center) / half;
                base + mu * (TAP_PRIOR_FLOOR + off * off)
            } else {
                base
            }
        });
        let factor = normal
            .cholesky()
            .ok_or_else(|| Error::Singular("FIR normal equations are not positive definite".into()))?;
        Ok(Self {
            grid: grid.clone(),
            length,
            center,
            weights,
            factor,
        })
    }

    pub fn grid(&self) -> &FrequencyGrid {
        &self.grid
    }

    pub fn length(&self) -> usize {
        self.length
    }

    pub fn center(&self) -> f64 {
        self.center
    }

    pub fn group_delay(&self) -> f64 {
        (self.length as f64 - 1.0) / 2.0
    }

    /// Taps for one channel whose narrowband targets are `targets[p]`, plus the
    /// squared pass-band error and squared pass-band target energy.
    pub fn fit_channel(&self, targets: &[Complex64]) -> Result<(Vec<f64>, f64, f64)> {
        if targets.len() != self.grid.len() {
            return Err(Error::InvalidArgument(format!(
                "{} targets for {} design frequencies",
                targets.len(),
                self.grid.len()
            )));
        }
        let fs = self.grid.sample_rate_hz;
        let tau = self.group_delay();
        let delayed: Vec<Complex64> = self
            .grid
            .freqs_hz
            .iter()
            .zip(targets)
            .map(|(&f, &w)| w * Complex64::from_polar(1.0, -2.0 * std::f64::consts::PI * f / fs * tau))
            .collect();
        let mut rhs = DVector::zeros(self.length);
        for ((&f, &q), b) in self.grid.freqs_hz.iter().zip(&self.weights).zip(&delayed) {
            let omega = 2.0 * std::f64::consts::PI * f / fs;
            for (l, r) in rhs.iter_mut().enumerate() {
                let (s, c) = (omega * l as f64).sin_cos();
                *r += q * (c * b.re - s * b.im);
            }
        }
        let taps = self.factor.solve(&rhs);
        let taps: Vec<f64> = taps.iter().copied().collect();
        let (mut err, mut energy) = (0.0, 0.0);
        for (&f, b) in self.grid.freqs_hz.iter().zip(&delayed) {
            if self.grid.in_band(f) {
                let got = crate::steering::dtft(&taps, f, fs);
                err += (got - b).norm_sqr();
                energy += b.norm_sqr();
            }
        }
        Ok((taps, err, energy))
    }

    /// FIR approximation of a broadband narrowband design.
    pub fn fit(&self, weights: &[NarrowbandWeights], spec_digest: String) -> Result<FirBeamformer> {
        if weights.len() != self.grid.len() {
            return Err(Error::InvalidArgument(format!(
                "{} narrowband solutions for {} design frequencies",
                weights.len(),
                self.grid.len()
            )));
        }
        for (w, &f) in weights.iter().zip(&self.grid.freqs_hz) {
            if (w.freq_hz - f).abs() > 1e-9 * f.max(1.0) {
                return Err(Error::InvalidArgument(format!(
                    "weights at {} Hz do not match design frequency {f} Hz",
                    w.freq_hz
                )));
            }
        }
        let channels = weights[0].w.len();
        if weights.iter().any(|w| w.w.len() != channels) {
            return Err(Error::InvalidArgument("inconsistent channel counts across frequencies".into()));
        }
        let mut taps = Vec::with_capacity(channels);
        let (mut err, mut energy) = (0.0, 0.0);
        for n in 0..channels {
            let targets: Vec<Complex64> = weights.iter().map(|w| w.w[n]).collect();
            let (t, e, s) = self.fit_channel(&targets)?;
            taps.push(t);
            err += e;
            energy += s;
        }
        let mut bf = FirBeamformer::new(self.grid.sample_rate_hz, taps, spec_digest)?;
        bf.fit_error_db = Some(if energy > 0.0 && err > 0.0 {
            (10.0 * (err / energy).log10()).max(-400.0)
        } else {
            -400.0
        });
        Ok(bf)
    }
}

/// Fits L-tap FIR filters to `weights` sampled on `grid`.
pub fn fir_approximation(
    weights: &[NarrowbandWeights],
    length: usize,
    grid: &FrequencyGrid,
) -> Result<FirBeamformer> {
    FirFitter::new(grid, length)?.fit(weights, String::new())
}

#[cfg(test)]
mod tests {
    use super::*;

    fn weights_from(grid: &FrequencyGrid, per_channel: &[Vec<Complex64>]) -> Vec<NarrowbandWeights> {
        grid.freqs_hz
            .iter()
            .enumerate()
            .map(|(p, &f)| NarrowbandWeights {
                freq_hz: f,
                w: per_channel.iter().map(|c| c[p]).collect(),
                lambda: 0.0,
                residual: 0.0,
                wng_linear: 1.0,
            })
            .collect()
    }

    #[test]
    fn recovers_known_taps() {
        let grid = FrequencyGrid::uniform(16000.0, 129, (300.0, 5000.0)).unwrap();
        let known = vec![0.3, -0.1, 0.05, 0.7, -0.2, 0.0, 0.11, -0.04];
        let l = known.len();
        let tau = (l as f64 - 1.0) / 2.0;
        // Pre-advance so that the fit's tau delay lands back on the taps.
        let targets: Vec<Complex64> = grid
            .freqs_hz
            .iter()
            .map(|&f| {
                crate::steering::dtft(&known, f, 16000.0)
                    * Complex64::from_polar(1.0, 2.0 * std::f64::consts::PI * f / 16000.0 * tau)
            })
            .collect();
        let bf = fir_approximation(&weights_from(&grid, &[targets]), l, &grid).unwrap();
        for (a, b) in bf.taps[0].iter().zip(&known) {
            assert!((a - b).abs() < 1e-9, "{a} vs {b}");
        }
        assert_eq!(bf.group_delay_samples, 3.5);
    }

    #[test]
    fn zero_targets_give_zero_taps() {
        let grid = FrequencyGrid::uniform(16000.0, 33, (300.0, 5000.0)).unwrap();
        let zeros = vec![Complex64::new(0.0, 0.0); 33];
        let bf = fir_approximation(&weights_from(&grid, &[zeros.clone(), zeros]), 64, &grid).unwrap();
        assert!(bf.taps.iter().flatten().all(|&t| t == 0.0));
    }

    #[test]
    fn wav_header_layout() {
        let bf = FirBeamformer::new(16000.0, vec![vec![1.0, 0.5], vec![0.25, -1.0]], "x".into()).unwrap();
        let wav = bf.to_wav();
        assert_eq!(&wav[0..4], b"RIFF");
        assert_eq!(u16::from_le_bytes([wav[20], wav[21]]), 3);
        assert_eq!(u16::from_le_bytes([wav[22], wav[23]]), 2);
        assert_eq!(u16::from_le_bytes([wav[34], wav[35]]), 64);
        assert_eq!(wav.len(), 58 + 2 * 2 * 8);
        let first = f64::from_le_bytes(wav[58..66].try_into().unwrap());
        let second = f64::from_le_bytes(wav[66..74].try_into().unwrap());
        assert_eq!((first, second), (1.0, 0.25));
    }

    #[test]
    fn json_roundtrip() {
        let mut bf = FirBeamformer::new(16000.0, vec![vec![0.1, 1.0 / 3.0]], "abc".into()).unwrap();
        bf.fit_error_db = Some(-37.25);
        let text = bf.to_json();
        assert!(text.contains("\"L\":2"));
        let back = FirBeamformer::from_json(&text).unwrap();
        assert_eq!(back, bf);
        assert_eq!(back.to_json(), text);
    }
}
