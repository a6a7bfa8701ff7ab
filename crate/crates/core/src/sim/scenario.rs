//! Two-source scenarios and their test signals.

use std::path::Path;
use std::sync::Arc;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;
use serde::{Deserialize, Serialize};

use super::engine::{energy, render_source};
use crate::error::{read_file, write_file, Error, Result};
use crate::spatial::{Direction, SourcePosition};
use crate::steering::HrtfSet;

/// Height of the sources above the array plane in the distance experiments.
pub const SOURCE_HEIGHT_M: f64 = 0.73;
/// Distance at which the design HRTFs are taken.
pub const DESIGN_DISTANCE_M: f64 = 1.1;
/// Interferer azimuths of the averaged protocol.
pub const AVERAGE_INTERFERERS_DEG: [f64; 8] = [10.0, 30.0, 50.0, 70.0, 110.0, 130.0, 150.0, 170.0];
pub const DEFAULT_DURATION_S: f64 = 5.0;

/// Coefficients `a1, a2` of the all-pole spectral tilt `1 / (1 - a1 z^-1 - a2 z^-2)`.
const TILT: (f64, f64) = (1.3, -0.4);

/// White Gaussian noise through a fixed low-pass tilt, scaled to unit RMS.
pub fn speech_shaped_noise(seed: u64, samples: usize) -> Vec<f64> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let (mut y1, mut y2) = (0.0, 0.0);
    let mut out: Vec<f64> = (0..samples)
        .map(|_| {
            let e: f64 = rng.sample(StandardNormal);
            let y = e + TILT.0 * y1 + TILT.1 * y2;
            y2 = y1;
            y1 = y;
            y
        })
        .collect();
    let rms = (energy(&out) / samples.max(1) as f64).sqrt();
    if rms > 0.0 {
        out.iter_mut().for_each(|v| *v /= rms);
    }
    out
}

/// Source location in a scenario file; `el` is the polar angle in degrees.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SourceSpec {
    pub az: f64,
    pub el: f64,
    pub dist: f64,
}

impl SourceSpec {
    pub fn position(&self) -> Result<SourcePosition> {
        SourcePosition::new(Direction::new(self.az, self.el)?, self.dist)
    }

    /// Source at `horizontal_m` from the array, [`SOURCE_HEIGHT_M`] above it.
    pub fn elevated(az: f64, horizontal_m: f64) -> Result<Self> {
        let p = SourcePosition::elevated(az, horizontal_m, SOURCE_HEIGHT_M)?;
        Ok(Self {
            az,
            el: p.direction.elevation_polar_deg,
            dist: p.distance_m,
        })
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ScenarioConfig {
    pub target: SourceSpec,
    pub interferer: SourceSpec,
    #[serde(default)]
    pub sir_in_db: f64,
    pub seed: u64,
    #[serde(default = "default_duration")]
    pub duration_s: f64,
}

fn default_duration() -> f64 {
    DEFAULT_DURATION_S
}

impl ScenarioConfig {
    /// Target at 90 deg, interferer at `interferer_az`, both at
    /// [`DESIGN_DISTANCE_M`] and raised by [`SOURCE_HEIGHT_M`].
    pub fn standard(interferer_az: f64, seed: u64) -> Result<Self> {
        Ok(Self {
            target: SourceSpec::elevated(90.0, DESIGN_DISTANCE_M)?,
            interferer: SourceSpec::elevated(interferer_az, DESIGN_DISTANCE_M)?,
            sir_in_db: 0.0,
            seed,
            duration_s: DEFAULT_DURATION_S,
        })
    }

    pub fn validate(&self) -> Result<()> {
        self.target.position()?;
        self.interferer.position()?;
        if !self.sir_in_db.is_finite() {
            return Err(Error::InvalidArgument("sir_in_db must be finite".into()));
        }
        if !(self.duration_s > 0.0) || !self.duration_s.is_finite() {
            return Err(Error::InvalidArgument(format!("duration must be positive, got {}", self.duration_s)));
        }
        Ok(())
    }

    pub fn from_json(text: &str) -> Result<Self> {
        let cfg: Self = serde_json::from_str(text)?;
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("scenario serializes")
    }

    pub fn load(path: &Path) -> Result<Self> {
        Self::from_json(&read_file(path)?)
    }

    pub fn save(&self, path: &Path) -> Result<()> {
        write_file(path, self.to_json().as_bytes())
    }

    /// Same scenario with the interferer moved to `az`.
    pub fn with_interferer_azimuth(&self, az: f64) -> Self {
        let mut c = self.clone();
        c.interferer.az = az;
        c
    }

    /// Same scenario with both sources moved to `horizontal_m`.
    pub fn at_distance(&self, horizontal_m: f64) -> Result<Self> {
        let mut c = self.clone();
        c.target = SourceSpec::elevated(self.target.az, horizontal_m)?;
        c.interferer = SourceSpec::elevated(self.interferer.az, horizontal_m)?;
        Ok(c)
    }

    /// Builds the signals: the target uses `seed`, the interferer `seed + 1`.
    pub fn build(&self, sample_rate_hz: f64) -> Result<Scenario> {
        self.validate()?;
        let samples = (self.duration_s * sample_rate_hz).round() as usize;
        if samples == 0 {
            return Err(Error::InvalidArgument("scenario is shorter than one sample".into()));
        }
        Scenario::new(
            self.target.position()?,
            self.interferer.position()?,
            Arc::new(speech_shaped_noise(self.seed, samples)),
            Arc::new(speech_shaped_noise(self.seed.wrapping_add(1), samples)),
            self.sir_in_db,
            self.seed,
            sample_rate_hz,
        )
    }
}

/// Positions and dry signals of one target and one interferer.
#[derive(Debug, Clone)]
pub struct Scenario {
    pub target: SourcePosition,
    pub interferer: SourcePosition,
    pub target_signal: Arc<Vec<f64>>,
    pub interferer_signal: Arc<Vec<f64>>,
    /// Target-to-interferer energy ratio at the reference mic.
    pub sir_in_db: f64,
    pub seed: u64,
    pub sample_rate_hz: f64,
}

impl Scenario {
    pub fn new(
        target: SourcePosition,
        interferer: SourcePosition,
        target_signal: Arc<Vec<f64>>,
        interferer_signal: Arc<Vec<f64>>,
        sir_in_db: f64,
        seed: u64,
        sample_rate_hz: f64,
    ) -> Result<Self> {
        if target_signal.is_empty() || interferer_signal.is_empty() {
            return Err(Error::Signal("scenario signals must be non-empty".into()));
        }
        if target_signal.len() != interferer_signal.len() {
            return Err(Error::Signal("target and interferer signals differ in length".into()));
        }
        if !(sample_rate_hz > 0.0) {
            return Err(Error::InvalidArgument("sample rate must be positive".into()));
        }
        Ok(Self {
            target,
            interferer,
            target_signal,
            interferer_signal,
            sir_in_db,
            seed,
            sample_rate_hz,
        })
    }

    /// Microphone signals of both components, with the interferer scaled to
    /// meet `sir_in_db` at `reference_mic`.
    pub fn render(&self, set: &HrtfSet, reference_mic: usize) -> Result<Rendered> {
        if (set.sample_rate_hz - self.sample_rate_hz).abs() > 1e-9 * self.sample_rate_hz {
            return Err(Error::InvalidArgument(format!(
                "HRTF set rate {} Hz does not match scenario rate {} Hz",
                set.sample_rate_hz, self.sample_rate_hz
            )));
        }
        let target = render_source(set, &self.target, &self.target_signal)?;
        let mut interferer = render_source(set, &self.interferer, &self.interferer_signal)?;
        let (et, ei) = (energy(&target[reference_mic]), energy(&interferer[reference_mic]));
        if !(et > 0.0) || !(ei > 0.0) {
            return Err(Error::Signal("a source is silent at the reference microphone".into()));
        }
        let gain = (et / ei / 10f64.powf(self.sir_in_db / 10.0)).sqrt();
        for ch in &mut interferer {
            ch.iter_mut().for_each(|v| *v *= gain);
        }
        Ok(Rendered {
            target,
            interferer,
            reference_mic,
        })
    }
}

/// Rendered microphone signals, split by source.
#[derive(Debug, Clone)]
pub struct Rendered {
    pub target: Vec<Vec<f64>>,
    pub interferer: Vec<Vec<f64>>,
    pub reference_mic: usize,
}

impl Rendered {
    pub fn mixture(&self) -> Vec<Vec<f64>> {
        self.target
            .iter()
            .zip(&self.interferer)
            .map(|(t, i)| t.iter().zip(i).map(|(a, b)| a + b).collect())
            .collect()
    }
}
