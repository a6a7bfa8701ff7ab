//! Coordinate conventions, array geometry, direction grids and wave vectors.
//!
//! Directions use azimuth measured in the x-y plane from +x and a polar angle
//! measured from +z. Broadside (the look direction of a head-mounted array
//! facing forward) is azimuth 90°, i.e. the +y axis.

use std::path::Path;

use nalgebra::Vector3;
use serde::{Deserialize, Serialize};

use crate::error::{read_file, write_file, Error, Result};

pub type Vec3 = Vector3<f64>;

/// Default speed of sound in m/s.
pub const SPEED_OF_SOUND: f64 = 343.0;

const MIC_COINCIDENCE_TOL_M: f64 = 1e-9;
const GRID_TOL: f64 = 1e-9;

/// A look or source direction.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Direction {
    pub azimuth_deg: f64,
    pub elevation_polar_deg: f64,
}

impl Direction {
    /// Builds a direction, wrapping the azimuth into [0, 360).
    pub fn new(azimuth_deg: f64, elevation_polar_deg: f64) -> Result<Self> {
        if !azimuth_deg.is_finite() || !elevation_polar_deg.is_finite() {
            return Err(Error::Direction("angles must be finite".into()));
        }
        if !(0.0..=180.0).contains(&elevation_polar_deg) {
            return Err(Error::Direction(format!(
                "polar angle {elevation_polar_deg} outside [0, 180]"
            )));
        }
        let mut az = azimuth_deg.rem_euclid(360.0);
        if az >= 360.0 {
            az = 0.0;
        }
        Ok(Self {
            azimuth_deg: az,
            elevation_polar_deg,
        })
    }

    /// Horizontal-plane direction (polar angle 90°).
    pub fn horizontal(azimuth_deg: f64) -> Result<Self> {
        Self::new(azimuth_deg, 90.0)
    }

    pub fn validate(&self) -> Result<()> {
        if !(0.0..360.0).contains(&self.azimuth_deg) {
            return Err(Error::Direction(format!(
                "azimuth {} outside [0, 360)",
                self.azimuth_deg
            )));
        }
        Self::new(self.azimuth_deg, self.elevation_polar_deg).map(|_| ())
    }

    /// Unit vector pointing from the array origin toward the source.
    pub fn unit_vector(&self) -> Vec3 {
        unit_propagation_vector(self)
    }

    /// Great-circle angle to `other` in degrees.
    pub fn angle_to_deg(&self, other: &Direction) -> f64 {
        let c = self.unit_vector().dot(&other.unit_vector()).clamp(-1.0, 1.0);
        c.acos().to_degrees()
    }
}

/// Unit vector from the array origin toward a source in direction `dir`.
///
/// The corresponding wave vector is `k = -(omega / c) * u`.
pub fn unit_propagation_vector(dir: &Direction) -> Vec3 {
    let az = dir.azimuth_deg.to_radians();
    let pol = dir.elevation_polar_deg.to_radians();
    let (s_pol, c_pol) = pol.sin_cos();
    let (s_az, c_az) = az.sin_cos();
    let mut u = Vec3::new(s_pol * c_az, s_pol * s_az, c_pol);
    // Snap rounding noise so the axis-aligned cases are exact.
    for x in u.iter_mut() {
        if x.abs() < 1e-15 {
            *x = 0.0;
        }
    }
    u
}

/// Wave vector `k(omega) = -(omega / c) u` for a plane wave arriving from `dir`.
pub fn wave_vector(dir: &Direction, freq_hz: f64, speed_of_sound: f64) -> Vec3 {
    let omega = 2.0 * std::f64::consts::PI * freq_hz;
    -(omega / speed_of_sound) * unit_propagation_vector(dir)
}

/// Azimuth scan `start, start + step, ...` up to `end` at a fixed polar angle.
///
/// The number of directions is `floor((end - start) / step) + 1`.
pub fn direction_grid(
    azimuth_start_deg: f64,
    azimuth_end_deg: f64,
    azimuth_step_deg: f64,
    elevation_polar_deg: f64,
) -> Result<Vec<Direction>> {
    if !(azimuth_step_deg > 0.0) || !azimuth_step_deg.is_finite() {
        return Err(Error::InvalidArgument(format!(
            "azimuth step must be positive, got {azimuth_step_deg}"
        )));
    }
    let span = azimuth_end_deg - azimuth_start_deg;
    if !(span >= 0.0) || azimuth_start_deg < 0.0 || azimuth_end_deg >= 360.0 {
        return Err(Error::InvalidArgument(format!(
            "azimuth span [{azimuth_start_deg}, {azimuth_end_deg}] must lie inside [0, 360)"
        )));
    }
    let count = (span / azimuth_step_deg + GRID_TOL).floor() as usize + 1;
    (0..count)
        .map(|i| Direction::new(azimuth_start_deg + i as f64 * azimuth_step_deg, elevation_polar_deg))
        .collect()
}

/// A source direction plus its range from the array origin.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SourcePosition {
    pub direction: Direction,
    pub distance_m: f64,
}

impl SourcePosition {
    pub fn new(direction: Direction, distance_m: f64) -> Result<Self> {
        if !(distance_m > 0.0) || !distance_m.is_finite() {
            return Err(Error::InvalidArgument(format!(
                "source distance must be positive, got {distance_m}"
            )));
        }
        Ok(Self {
            direction,
            distance_m,
        })
    }

    /// Source at horizontal distance `horizontal_m` raised `height_m` above
    /// the array plane. Polar angle and range follow from the right triangle.
    pub fn elevated(azimuth_deg: f64, horizontal_m: f64, height_m: f64) -> Result<Self> {
        if !(horizontal_m > 0.0) {
            return Err(Error::InvalidArgument(format!(
                "horizontal distance must be positive, got {horizontal_m}"
            )));
        }
        let polar = 90.0 - height_m.atan2(horizontal_m).to_degrees();
        Self::new(Direction::new(azimuth_deg, polar)?, horizontal_m.hypot(height_m))
    }

    pub fn position(&self) -> Vec3 {
        self.distance_m * self.direction.unit_vector()
    }
}

/// Microphone positions in head-centered Cartesian coordinates (meters).
#[derive(Debug, Clone, PartialEq)]
pub struct ArrayGeometry {
    mics: Vec<Vec3>,
    labels: Vec<String>,
    reference_mic: usize,
}

#[derive(Debug, Serialize, Deserialize)]
struct GeometryFile {
    version: u32,
    mics: Vec<[f64; 3]>,
    #[serde(default)]
    labels: Vec<String>,
    reference_mic: usize,
}

const DEFAULT_HEAD_GEOMETRY: &str = include_str!("../../../configs/head5.json");

impl ArrayGeometry {
    pub fn new(mics: Vec<Vec3>, labels: Vec<String>, reference_mic: usize) -> Result<Self> {
        if mics.is_empty() {
            return Err(Error::Geometry("at least one microphone is required".into()));
        }
        if mics.iter().any(|p| p.iter().any(|c| !c.is_finite())) {
            return Err(Error::Geometry("microphone coordinates must be finite".into()));
        }
        if reference_mic >= mics.len() {
            return Err(Error::Geometry(format!(
                "reference mic {reference_mic} out of range for {} mics",
                mics.len()
            )));
        }
        let labels = if labels.is_empty() {
            (0..mics.len()).map(|i| format!("mic{i}")).collect()
        } else if labels.len() != mics.len() {
            return Err(Error::Geometry(format!(
                "{} labels for {} mics",
                labels.len(),
                mics.len()
            )));
        } else {
            labels
        };
        for i in 0..mics.len() {
            for j in i + 1..mics.len() {
                if (mics[i] - mics[j]).norm() <= MIC_COINCIDENCE_TOL_M {
                    return Err(Error::Geometry(format!("mics {i} and {j} coincide")));
                }
            }
        }
        Ok(Self {
            mics,
            labels,
            reference_mic,
        })
    }

    /// Single microphone at the origin.
    pub fn single_origin() -> Self {
        Self::new(vec![Vec3::zeros()], Vec::new(), 0).expect("valid geometry")
    }

    /// The bundled five-microphone forehead array on a 6 cm head.
    pub fn default_head() -> Self {
        Self::from_json(DEFAULT_HEAD_GEOMETRY).expect("bundled geometry is valid")
    }

    pub fn mics(&self) -> &[Vec3] {
        &self.mics
    }

    pub fn labels(&self) -> &[String] {
        &self.labels
    }

    pub fn reference_mic(&self) -> usize {
        self.reference_mic
    }

    pub fn len(&self) -> usize {
        self.mics.len()
    }

    pub fn is_empty(&self) -> bool {
        self.mics.is_empty()
    }

    pub fn from_json(text: &str) -> Result<Self> {
        // serde_json refuses NaN/Inf literals, so only finite values get through.
        let file: GeometryFile = serde_json::from_str(text)?;
        if file.version != 1 {
            return Err(Error::Geometry(format!("unsupported version {}", file.version)));
        }
        Self::new(
            file.mics.iter().map(|m| Vec3::new(m[0], m[1], m[2])).collect(),
            file.labels,
            file.reference_mic,
        )
    }

    pub fn to_json(&self) -> String {
        let file = GeometryFile {
            version: 1,
            mics: self.mics.iter().map(|m| [m.x, m.y, m.z]).collect(),
            labels: self.labels.clone(),
            reference_mic: self.reference_mic,
        };
        serde_json::to_string_pretty(&file).expect("geometry serializes")
    }

    pub fn load(path: &Path) -> Result<Self> {
        Self::from_json(&read_file(path)?)
    }

    pub fn save(&self, path: &Path) -> Result<()> {
        write_file(path, self.to_json().as_bytes())
    }
}

/// Design frequencies plus the pass-band used for FIR fitting and reports.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FrequencyGrid {
    pub sample_rate_hz: f64,
    pub freqs_hz: Vec<f64>,
    pub band: (f64, f64),
}

impl FrequencyGrid {
    pub fn new(sample_rate_hz: f64, freqs_hz: Vec<f64>, band: (f64, f64)) -> Result<Self> {
        if !(sample_rate_hz > 0.0) || !sample_rate_hz.is_finite() {
            return Err(Error::FrequencyGrid("sample rate must be positive".into()));
        }
        if freqs_hz.is_empty() {
            return Err(Error::FrequencyGrid("at least one frequency is required".into()));
        }
        let nyquist = sample_rate_hz / 2.0;
        if freqs_hz.iter().any(|&f| !(0.0..=nyquist * (1.0 + 1e-12)).contains(&f)) {
            return Err(Error::FrequencyGrid(format!(
                "frequencies must lie in [0, {nyquist}]"
            )));
        }
        if freqs_hz.windows(2).any(|w| w[1] <= w[0]) {
            return Err(Error::FrequencyGrid("frequencies must be strictly increasing".into()));
        }
        let (lo, hi) = band;
        let first = freqs_hz[0];
        let last = freqs_hz[freqs_hz.len() - 1];
        if !(lo <= hi) || lo < first || hi > last {
            return Err(Error::FrequencyGrid(format!(
                "band [{lo}, {hi}] must be ordered and inside [{first}, {last}]"
            )));
        }
        Ok(Self {
            sample_rate_hz,
            freqs_hz,
            band,
        })
    }

    /// `count` uniformly spaced points covering [0, fs/2].
    pub fn uniform(sample_rate_hz: f64, count: usize, band: (f64, f64)) -> Result<Self> {
        if count < 2 {
            return Err(Error::FrequencyGrid("uniform grid needs at least 2 points".into()));
        }
        let step = sample_rate_hz / 2.0 / (count - 1) as f64;
        Self::new(
            sample_rate_hz,
            (0..count).map(|p| p as f64 * step).collect(),
            band,
        )
    }

    pub fn len(&self) -> usize {
        self.freqs_hz.len()
    }

    pub fn is_empty(&self) -> bool {
        self.freqs_hz.is_empty()
    }

    pub fn in_band(&self, freq_hz: f64) -> bool {
        freq_hz >= self.band.0 && freq_hz <= self.band.1
    }
}
