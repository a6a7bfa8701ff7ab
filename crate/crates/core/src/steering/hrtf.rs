//! Stored HRIR sets: file format, lookup, DTFT evaluation and synthesis from
//! the rigid-sphere model.

use std::path::Path;

use num_complex::Complex64;
use rustfft::FftPlanner;
use serde::{Deserialize, Serialize};

use super::sphere::{sphere_field_response, SphereProblem};
use crate::error::{read_file, write_file, Error, Result};
use crate::spatial::{ArrayGeometry, Direction, SourcePosition};

/// Default angular tolerance for nearest-neighbor direction lookup.
pub const LOOKUP_TOLERANCE_DEG: f64 = 0.5;

const FORMAT_VERSION: u32 = 1;
const DUPLICATE_DIRECTION_DEG: f64 = 1e-6;

/// Per-direction, per-microphone head-related impulse responses measured (or
/// synthesized) at one source distance.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct HrtfSet {
    pub version: u32,
    pub sample_rate_hz: f64,
    pub source_distance_m: f64,
    pub mics: usize,
    pub directions: Vec<Direction>,
    /// `hrirs[direction][mic][tap]`
    pub hrirs: Vec<Vec<Vec<f64>>>,
    /// Common modeling delay present in every HRIR, in samples.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub bulk_delay_samples: Option<f64>,
}

impl HrtfSet {
    pub fn new(
        sample_rate_hz: f64,
        source_distance_m: f64,
        mics: usize,
        directions: Vec<Direction>,
        hrirs: Vec<Vec<Vec<f64>>>,
        bulk_delay_samples: Option<f64>,
    ) -> Result<Self> {
        let set = Self {
            version: FORMAT_VERSION,
            sample_rate_hz,
            source_distance_m,
            mics,
            directions,
            hrirs,
            bulk_delay_samples,
        };
        set.validate()?;
        Ok(set)
    }

    pub fn validate(&self) -> Result<()> {
        let schema = |msg: String| Err(Error::HrtfSchema(msg));
        if self.version != FORMAT_VERSION {
            return schema(format!("unsupported version {}", self.version));
        }
        if !(self.sample_rate_hz > 0.0) || !self.sample_rate_hz.is_finite() {
            return schema(format!("sample rate must be positive, got {}", self.sample_rate_hz));
        }
        if !(self.source_distance_m > 0.0) || !self.source_distance_m.is_finite() {
            return schema(format!(
                "source distance must be positive, got {}",
                self.source_distance_m
            ));
        }
        if self.mics == 0 {
            return schema("at least one microphone is required".into());
        }
        if self.directions.is_empty() {
            return schema("direction list is empty".into());
        }
        for d in &self.directions {
            d.validate().map_err(|e| Error::HrtfSchema(e.to_string()))?;
        }
        if self.hrirs.len() != self.directions.len() {
            return schema(format!(
                "{} HRIR groups for {} directions",
                self.hrirs.len(),
                self.directions.len()
            ));
        }
        let taps = self.hrirs[0].first().map_or(0, Vec::len);
        if taps == 0 {
            return schema("HRIRs must have at least one tap".into());
        }
        for (i, group) in self.hrirs.iter().enumerate() {
            if group.len() != self.mics {
                return schema(format!("direction {i} has {} mics, expected {}", group.len(), self.mics));
            }
            for (n, h) in group.iter().enumerate() {
                if h.len() != taps {
                    return schema(format!(
                        "HRIR for direction {i}, mic {n} has {} taps, expected {taps}",
                        h.len()
                    ));
                }
                if h.iter().any(|t| !t.is_finite()) {
                    return schema(format!("non-finite tap in direction {i}, mic {n}"));
                }
            }
        }
        for i in 0..self.directions.len() {
            for j in i + 1..self.directions.len() {
                if self.directions[i].angle_to_deg(&self.directions[j]) < DUPLICATE_DIRECTION_DEG {
                    return schema(format!("directions {i} and {j} are duplicates"));
                }
            }
        }
        if let Some(d) = self.bulk_delay_samples {
            if !d.is_finite() || d < 0.0 {
                return schema(format!("bulk delay must be finite and non-negative, got {d}"));
            }
        }
        Ok(())
    }

    /// Mean over all HRIRs of the energy-weighted tap index.
    pub fn energy_centroid(&self) -> f64 {
        let (mut sum, mut count) = (0.0, 0usize);
        for h in self.hrirs.iter().flatten() {
            let e: f64 = h.iter().map(|v| v * v).sum();
            if e > 0.0 {
                sum += h.iter().enumerate().map(|(i, v)| i as f64 * v * v).sum::<f64>() / e;
                count += 1;
            }
        }
        if count == 0 {
            0.0
        } else {
            sum / count as f64
        }
    }

    pub fn taps(&self) -> usize {
        self.hrirs[0][0].len()
    }

    pub fn from_json(text: &str) -> Result<Self> {
        let set: HrtfSet = serde_json::from_str(text).map_err(|e| Error::HrtfSchema(e.to_string()))?;
        set.validate()?;
        Ok(set)
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string(self).expect("HRTF set serializes")
    }

    pub fn load(path: &Path) -> Result<Self> {
        Self::from_json(&read_file(path)?)
    }

    pub fn save(&self, path: &Path) -> Result<()> {
        write_file(path, self.to_json().as_bytes())
    }

    /// Index of the stored direction nearest to `dir`, if within `tolerance_deg`.
    pub fn nearest(&self, dir: &Direction, tolerance_deg: f64) -> Result<usize> {
        let (idx, angle) = self
            .directions
            .iter()
            .enumerate()
            .map(|(i, d)| (i, d.angle_to_deg(dir)))
            .min_by(|a, b| a.1.total_cmp(&b.1))
            .expect("non-empty direction list");
        if angle <= tolerance_deg {
            Ok(idx)
        } else {
            Err(Error::HrtfLookup {
                azimuth_deg: dir.azimuth_deg,
                polar_deg: dir.elevation_polar_deg,
                tolerance_deg,
            })
        }
    }

    /// HRIRs (one per mic) for the stored direction nearest to the source.
    ///
    /// The source range must match the set's measurement distance within 1%.
    pub fn hrirs_for(&self, src: &SourcePosition) -> Result<&[Vec<f64>]> {
        let rel = (src.distance_m - self.source_distance_m).abs() / self.source_distance_m;
        if rel > 0.01 {
            return Err(Error::InvalidArgument(format!(
                "source at {} m does not match HRTF set distance {} m",
                src.distance_m, self.source_distance_m
            )));
        }
        let idx = self.nearest(&src.direction, LOOKUP_TOLERANCE_DEG)?;
        Ok(&self.hrirs[idx])
    }
}

/// DTFT of a real impulse response at `freq_hz`.
pub fn dtft(taps: &[f64], freq_hz: f64, sample_rate_hz: f64) -> Complex64 {
    let omega = 2.0 * std::f64::consts::PI * freq_hz / sample_rate_hz;
    taps.iter()
        .enumerate()
        .map(|(l, &t)| t * Complex64::from_polar(1.0, -omega * l as f64))
        .sum()
}

/// Per-mic HRTF values `h_n(omega)` for the stored direction nearest to `dir`.
pub fn hrtf_response(set: &HrtfSet, dir: &Direction, freq_hz: f64) -> Result<Vec<Complex64>> {
    hrtf_response_with_tolerance(set, dir, freq_hz, LOOKUP_TOLERANCE_DEG)
}

pub fn hrtf_response_with_tolerance(
    set: &HrtfSet,
    dir: &Direction,
    freq_hz: f64,
    tolerance_deg: f64,
) -> Result<Vec<Complex64>> {
    let idx = set.nearest(dir, tolerance_deg)?;
    Ok(set.hrirs[idx]
        .iter()
        .map(|h| dtft(h, freq_hz, set.sample_rate_hz))
        .collect())
}

/// Parameters for synthesizing an HRIR set from the rigid-sphere model.
#[derive(Debug, Clone)]
pub struct SphereSynthesis {
    pub radius_m: f64,
    pub source_distance_m: f64,
    pub sample_rate_hz: f64,
    /// HRIR length; must be a power of two.
    pub taps: usize,
    pub max_order: usize,
    pub speed_of_sound: f64,
}

/// Projects a mic onto the sphere surface if it lies inside; mics outside the
/// sphere stay where they are and are evaluated as field points.
pub(crate) fn mic_radius_on_sphere(pos_norm: f64, radius_m: f64) -> Result<f64> {
    if (pos_norm - radius_m).abs() <= 1e-6 * radius_m {
        Ok(radius_m)
    } else if pos_norm > radius_m {
        Ok(pos_norm)
    } else if pos_norm > 0.0 {
        Ok(radius_m)
    } else {
        Err(Error::Geometry(
            "a microphone at the sphere center cannot be projected onto the surface".into(),
        ))
    }
}

/// Sphere transfer value for every mic of `geom` toward a source at `src`.
pub(crate) fn sphere_mic_responses(
    geom: &ArrayGeometry,
    radius_m: f64,
    src: &SourcePosition,
    freq_hz: f64,
    max_order: usize,
    speed_of_sound: f64,
) -> Result<Vec<Complex64>> {
    let u = src.direction.unit_vector();
    geom.mics()
        .iter()
        .map(|p| {
            let norm = p.norm();
            let mic_radius_m = mic_radius_on_sphere(norm, radius_m)?;
            let cos = (p.dot(&u) / norm).clamp(-1.0, 1.0);
            sphere_field_response(
                &SphereProblem {
                    radius_m,
                    mic_radius_m,
                    source_distance_m: src.distance_m,
                    mic_angle_rad: cos.acos(),
                    speed_of_sound,
                },
                freq_hz,
                max_order,
            )
        })
        .collect()
}

/// Fade applied to HRIR ends: a short rise over the first `taps / 16` samples
/// and a fall over the last `taps / 8`.
pub fn tail_window(taps: usize) -> Vec<f64> {
    let rise = (taps / 16).max(1);
    let fall = (taps / 8).max(1);
    (0..taps)
        .map(|t| {
            if t < rise {
                0.5 - 0.5 * (std::f64::consts::PI * (t as f64 + 0.5) / rise as f64).cos()
            } else if t >= taps - fall {
                let i = (taps - t) as f64 - 0.5;
                0.5 - 0.5 * (std::f64::consts::PI * i / fall as f64).cos()
            } else {
                1.0
            }
        })
        .collect()
}

/// Synthesizes an HRIR set for `directions` from the rigid-sphere model.
///
/// For each direction and mic the sphere transfer value is sampled on the
/// `taps`-point DFT grid up to fs/2, given a common causal delay of `taps/4`
/// samples, made conjugate-symmetric, inverse transformed and tail-windowed.
pub fn synthesize_sphere_hrtf_set(
    geom: &ArrayGeometry,
    params: &SphereSynthesis,
    directions: &[Direction],
) -> Result<HrtfSet> {
    let t = params.taps;
    if t < 4 || !t.is_power_of_two() {
        return Err(Error::InvalidArgument(format!("HRIR length {t} must be a power of two >= 4")));
    }
    if directions.is_empty() {
        return Err(Error::InvalidArgument("no directions to synthesize".into()));
    }
    let fs = params.sample_rate_hz;
    let bulk = (t / 4) as f64;
    let bins = t / 2 + 1;
    let window = tail_window(t);
    let ifft = FftPlanner::<f64>::new().plan_fft_inverse(t);

    let hrirs = directions
        .iter()
        .map(|dir| {
            let src = SourcePosition::new(*dir, params.source_distance_m)?;
            // spectra[bin][mic]
            let spectra = (0..bins)
                .map(|b| {
                    let f = b as f64 * fs / t as f64;
                    sphere_mic_responses(geom, params.radius_m, &src, f, params.max_order, params.speed_of_sound)
                })
                .collect::<Result<Vec<_>>>()?;
            Ok((0..geom.len())
                .map(|n| {
                    let mut buf = vec![Complex64::new(0.0, 0.0); t];
                    for (b, spec) in spectra.iter().enumerate() {
                        let omega = 2.0 * std::f64::consts::PI * b as f64 / t as f64;
                        buf[b] = spec[n] * Complex64::from_polar(1.0, -omega * bulk);
                    }
                    buf[0] = Complex64::new(buf[0].re, 0.0);
                    buf[t / 2] = Complex64::new(buf[t / 2].re, 0.0);
                    for b in 1..t / 2 {
                        buf[t - b] = buf[b].conj();
                    }
                    ifft.process(&mut buf);
                    buf.iter()
                        .zip(&window)
                        .map(|(v, w)| v.re / t as f64 * w)
                        .collect()
                })
                .collect())
        })
        .collect::<Result<Vec<Vec<Vec<f64>>>>>()?;

    HrtfSet::new(fs, params.source_distance_m, geom.len(), directions.to_vec(), hrirs, Some(bulk))
}
