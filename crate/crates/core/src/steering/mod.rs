//! Sensor responses `g_n(omega, phi, theta)` and steering matrices.
//!
//! Three backends are available: plane-wave free-field propagation, the
//! analytic rigid-sphere model, and stored HRIR sets. All share the phase
//! convention `g_n = exp(-j k^T p_n)` with `k = -(omega / c) u`, so a mic closer
//! to the source gets a positive phase.

pub mod hrtf;
pub mod sphere;

use std::sync::Arc;

use nalgebra::{DMatrix, DVector};
use num_complex::Complex64;
use serde::{Deserialize, Serialize};

pub use hrtf::{
    dtft, hrtf_response, synthesize_sphere_hrtf_set, HrtfSet, SphereSynthesis, LOOKUP_TOLERANCE_DEG,
};
pub use sphere::{sphere_field_response, sphere_response, SphereProblem};

use crate::error::{Error, Result};
use crate::spatial::{wave_vector, ArrayGeometry, Direction, SourcePosition, SPEED_OF_SOUND};

/// Default head radius for the rigid-sphere model.
pub const DEFAULT_HEAD_RADIUS_M: f64 = 0.06;
/// Default truncation order for the sphere series.
pub const DEFAULT_MAX_ORDER: usize = 80;

/// Parameters of the rigid-sphere steering backend.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SphereModel {
    pub radius_m: f64,
    pub max_order: usize,
    /// Range of the (point) sources the model is evaluated for.
    pub source_distance_m: f64,
    pub speed_of_sound: f64,
}

impl SphereModel {
    pub fn new(radius_m: f64, max_order: usize, source_distance_m: f64) -> Result<Self> {
        let model = Self {
            radius_m,
            max_order,
            source_distance_m,
            speed_of_sound: SPEED_OF_SOUND,
        };
        model.validate()?;
        Ok(model)
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.radius_m > 0.0) {
            return Err(Error::InvalidArgument(format!(
                "sphere radius must be positive, got {}",
                self.radius_m
            )));
        }
        if self.max_order < 1 {
            return Err(Error::InvalidArgument("max_order must be at least 1".into()));
        }
        if !(self.source_distance_m > self.radius_m) {
            return Err(Error::SourceInsideSphere {
                distance_m: self.source_distance_m,
                radius_m: self.radius_m,
            });
        }
        Ok(())
    }
}

/// Which propagation model produces the sensor responses.
#[derive(Debug, Clone)]
pub enum SteeringModel {
    FreeField { speed_of_sound: f64 },
    RigidSphere(SphereModel),
    HrtfSet(Arc<HrtfSet>),
}

impl SteeringModel {
    pub fn free_field() -> Self {
        SteeringModel::FreeField {
            speed_of_sound: SPEED_OF_SOUND,
        }
    }

    pub fn hrtf(set: HrtfSet) -> Self {
        SteeringModel::HrtfSet(Arc::new(set))
    }

    /// Short backend tag used in reports.
    pub fn tag(&self) -> &'static str {
        match self {
            SteeringModel::FreeField { .. } => "freefield",
            SteeringModel::RigidSphere(_) => "sphere",
            SteeringModel::HrtfSet(_) => "hrtf",
        }
    }

    /// Stable one-line description for provenance digests.
    pub fn describe(&self) -> String {
        match self {
            SteeringModel::FreeField { speed_of_sound } => format!("freefield(c={speed_of_sound})"),
            SteeringModel::RigidSphere(s) => format!(
                "sphere(a={},order={},r={},c={})",
                s.radius_m, s.max_order, s.source_distance_m, s.speed_of_sound
            ),
            SteeringModel::HrtfSet(set) => {
                use sha2::{Digest, Sha256};
                let digest = Sha256::digest(set.to_json().as_bytes());
                format!(
                    "hrtf(fs={},r={},dirs={},sha256={})",
                    set.sample_rate_hz,
                    set.source_distance_m,
                    set.directions.len(),
                    hex::encode(&digest[..8])
                )
            }
        }
    }

    /// Checks that the backend can serve `geom` at sample rate `fs`.
    pub fn check_compatible(&self, geom: &ArrayGeometry, sample_rate_hz: f64) -> Result<()> {
        match self {
            SteeringModel::FreeField { speed_of_sound } => {
                if !(*speed_of_sound > 0.0) {
                    return Err(Error::InvalidArgument("speed of sound must be positive".into()));
                }
                Ok(())
            }
            SteeringModel::RigidSphere(s) => {
                s.validate()?;
                for p in geom.mics() {
                    hrtf::mic_radius_on_sphere(p.norm(), s.radius_m)?;
                }
                Ok(())
            }
            SteeringModel::HrtfSet(set) => {
                if set.mics != geom.len() {
                    return Err(Error::ChannelMismatch {
                        expected: geom.len(),
                        got: set.mics,
                    });
                }
                if (set.sample_rate_hz - sample_rate_hz).abs() > 1e-9 * sample_rate_hz {
                    return Err(Error::InvalidArgument(format!(
                        "HRTF set sample rate {} Hz does not match design rate {} Hz",
                        set.sample_rate_hz, sample_rate_hz
                    )));
                }
                Ok(())
            }
        }
    }

    /// Common modeling delay (samples) baked into this backend's responses.
    pub fn bulk_delay_samples(&self) -> f64 {
        match self {
            SteeringModel::HrtfSet(set) => set.bulk_delay_samples.unwrap_or(0.0),
            _ => 0.0,
        }
    }

    /// Where the impulse responses of this backend are concentrated, in
    /// samples: the stored bulk delay, or else the mean energy centroid of
    /// the stored HRIRs. Zero for the analytic models.
    pub fn delay_center_samples(&self) -> f64 {
        match self {
            SteeringModel::HrtfSet(set) => set.bulk_delay_samples.unwrap_or_else(|| set.energy_centroid()),
            _ => 0.0,
        }
    }

    /// Sensor responses of every mic for a source in direction `dir`.
    pub fn response(&self, geom: &ArrayGeometry, dir: &Direction, freq_hz: f64) -> Result<Vec<Complex64>> {
        match self {
            SteeringModel::FreeField { speed_of_sound } => {
                Ok(freefield_response_with_speed(geom, dir, freq_hz, *speed_of_sound))
            }
            SteeringModel::RigidSphere(s) => {
                let src = SourcePosition::new(*dir, s.source_distance_m)?;
                hrtf::sphere_mic_responses(geom, s.radius_m, &src, freq_hz, s.max_order, s.speed_of_sound)
            }
            SteeringModel::HrtfSet(set) => {
                if set.mics != geom.len() {
                    return Err(Error::ChannelMismatch {
                        expected: geom.len(),
                        got: set.mics,
                    });
                }
                hrtf_response(set, dir, freq_hz)
            }
        }
    }
}

/// Plane-wave free-field responses `exp(+j (omega/c) u^T p_n)` at c = 343 m/s.
pub fn freefield_response(geom: &ArrayGeometry, dir: &Direction, freq_hz: f64) -> Vec<Complex64> {
    freefield_response_with_speed(geom, dir, freq_hz, SPEED_OF_SOUND)
}

pub fn freefield_response_with_speed(
    geom: &ArrayGeometry,
    dir: &Direction,
    freq_hz: f64,
    speed_of_sound: f64,
) -> Vec<Complex64> {
    let k = wave_vector(dir, freq_hz, speed_of_sound);
    geom.mics()
        .iter()
        .map(|p| Complex64::from_polar(1.0, -k.dot(p)))
        .collect()
}

/// `G(omega_p)` with one row per design direction, plus the look vector `d(omega_p)`.
#[derive(Debug, Clone)]
pub struct SteeringMatrix {
    pub freq_hz: f64,
    pub entries: DMatrix<Complex64>,
    pub look_vector: DVector<Complex64>,
}

impl SteeringMatrix {
    pub fn new(freq_hz: f64, entries: DMatrix<Complex64>, look_vector: DVector<Complex64>) -> Result<Self> {
        if entries.ncols() != look_vector.len() {
            return Err(Error::ChannelMismatch {
                expected: entries.ncols(),
                got: look_vector.len(),
            });
        }
        if entries.nrows() == 0 {
            return Err(Error::Singular("empty direction set".into()));
        }
        if !(look_vector.norm() > 0.0) {
            return Err(Error::Singular("look vector has zero norm".into()));
        }
        Ok(Self {
            freq_hz,
            entries,
            look_vector,
        })
    }

    pub fn directions(&self) -> usize {
        self.entries.nrows()
    }

    pub fn mics(&self) -> usize {
        self.entries.ncols()
    }
}

/// Assembles `[G]_{mn} = g_n(omega, dir_m)` and `d = g(omega, look)` from one backend.
pub fn steering_matrix(
    model: &SteeringModel,
    geom: &ArrayGeometry,
    directions: &[Direction],
    look: &Direction,
    freq_hz: f64,
) -> Result<SteeringMatrix> {
    if directions.is_empty() {
        return Err(Error::Singular("empty direction set".into()));
    }
    let n = geom.len();
    let mut entries = DMatrix::from_element(directions.len(), n, Complex64::new(0.0, 0.0));
    for (m, dir) in directions.iter().enumerate() {
        for (col, g) in model.response(geom, dir, freq_hz)?.into_iter().enumerate() {
            entries[(m, col)] = g;
        }
    }
    let look_vector = DVector::from_vec(model.response(geom, look, freq_hz)?);
    SteeringMatrix::new(freq_hz, entries, look_vector)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::spatial::{direction_grid, Vec3};

    #[test]
    fn origin_mic_has_zero_phase() {
        let geom = ArrayGeometry::single_origin();
        for f in [0.0, 440.0, 7000.0] {
            let g = freefield_response(&geom, &Direction::new(33.0, 71.0).unwrap(), f);
            assert_eq!(g, vec![Complex64::new(1.0, 0.0)]);
        }
    }

    #[test]
    fn half_wavelength_gives_pi() {
        let f = 1000.0;
        let geom = ArrayGeometry::new(vec![Vec3::new(SPEED_OF_SOUND / (2.0 * f), 0.0, 0.0)], vec![], 0).unwrap();
        let g = freefield_response(&geom, &Direction::new(0.0, 90.0).unwrap(), f)[0];
        assert!((g - Complex64::new(-1.0, 0.0)).norm() < 1e-12);
    }

    #[test]
    fn symmetric_pair() {
        let geom = ArrayGeometry::new(vec![Vec3::new(0.0, -0.05, 0.0), Vec3::new(0.0, 0.05, 0.0)], vec![], 0).unwrap();
        // Source along x is broadside to a pair on the y axis.
        let broad = freefield_response(&geom, &Direction::new(0.0, 90.0).unwrap(), 2000.0);
        assert!((broad[0] - broad[1]).norm() < 1e-12);
        let end = freefield_response(&geom, &Direction::new(90.0, 90.0).unwrap(), 2000.0);
        assert!((end[0] - end[1].conj()).norm() < 1e-12);
    }

    #[test]
    fn freefield_unit_magnitude() {
        let geom = ArrayGeometry::default_head();
        for dir in direction_grid(0.0, 350.0, 10.0, 60.0).unwrap() {
            for f in [0.0, 123.0, 4000.0, 8000.0] {
                for g in freefield_response(&geom, &dir, f) {
                    assert!((g.norm() - 1.0).abs() < 1e-12);
                }
            }
        }
    }

    #[test]
    fn origin_only_matrix_is_ones() {
        let geom = ArrayGeometry::single_origin();
        let dirs = direction_grid(0.0, 180.0, 45.0, 90.0).unwrap();
        let sm = steering_matrix(&SteeringModel::free_field(), &geom, &dirs, &dirs[2], 1500.0).unwrap();
        assert_eq!(sm.entries.shape(), (5, 1));
        assert!(sm.entries.iter().all(|g| *g == Complex64::new(1.0, 0.0)));
    }

    #[test]
    fn look_vector_matches_row() {
        let geom = ArrayGeometry::default_head();
        let dirs = direction_grid(0.0, 180.0, 5.0, 90.0).unwrap();
        let model = SteeringModel::RigidSphere(SphereModel::new(0.06, 80, 1.1).unwrap());
        let sm = steering_matrix(&model, &geom, &dirs, &dirs[18], 2000.0).unwrap();
        for n in 0..geom.len() {
            assert_eq!(sm.entries[(18, n)], sm.look_vector[n]);
        }
    }

    #[test]
    fn repeated_direction_repeats_row() {
        let geom = ArrayGeometry::default_head();
        let d = Direction::new(40.0, 70.0).unwrap();
        let model = SteeringModel::RigidSphere(SphereModel::new(0.06, 80, 1.1).unwrap());
        let sm = steering_matrix(&model, &geom, &[d, d], &d, 3000.0).unwrap();
        for n in 0..geom.len() {
            assert_eq!(sm.entries[(0, n)], sm.entries[(1, n)]);
        }
    }

    #[test]
    fn sphere_matrix_is_bounded() {
        let geom = ArrayGeometry::default_head();
        let dirs = direction_grid(0.0, 180.0, 5.0, 90.0).unwrap();
        assert_eq!(dirs.len(), 37);
        let model = SteeringModel::RigidSphere(SphereModel::new(0.06, 80, 1.1).unwrap());
        for f in [300.0, 1000.0, 3000.0, 5000.0, 8000.0] {
            let sm = steering_matrix(&model, &geom, &dirs, &dirs[18], f).unwrap();
            assert!(sm.entries.iter().all(|g| g.re.is_finite() && g.im.is_finite() && g.norm() <= 3.0));
        }
    }

    #[test]
    fn hrtf_backend_checks_rate() {
        let set = HrtfSet::new(
            8000.0,
            1.1,
            1,
            vec![Direction::new(90.0, 90.0).unwrap()],
            vec![vec![vec![1.0]]],
            None,
        )
        .unwrap();
        let model = SteeringModel::hrtf(set);
        assert!(model.check_compatible(&ArrayGeometry::single_origin(), 16000.0).is_err());
        assert!(model.check_compatible(&ArrayGeometry::single_origin(), 8000.0).is_ok());
    }
}
