//! Broadband robust least-squares design: one constrained LS problem per
//! design frequency, followed by an FIR approximation of the optimal weights.

pub mod fir;
pub mod narrowband;

use std::sync::{Arc, Mutex};

use nalgebra::DVector;
use num_complex::Complex64;
use rayon::prelude::*;
use sha2::{Digest, Sha256};

pub use fir::{fir_approximation, FirBeamformer, FirFitter, DONT_CARE_WEIGHT};
pub use narrowband::{solve_narrowband, NarrowbandWeights};

use crate::error::{Error, Result};
use crate::spatial::{direction_grid, ArrayGeometry, Direction, FrequencyGrid};
use crate::steering::{steering_matrix, SteeringModel};

pub const DEFAULT_SAMPLE_RATE_HZ: f64 = 16000.0;
pub const DEFAULT_DESIGN_POINTS: usize = 129;
pub const DEFAULT_BAND_HZ: (f64, f64) = (300.0, 5000.0);
pub const DEFAULT_FIR_LENGTH: usize = 1024;
pub const DEFAULT_GAMMA_DB: f64 = -10.0;
pub const DEFAULT_AZIMUTH_STEP_DEG: f64 = 5.0;

/// Everything needed to design one beamformer.
#[derive(Debug, Clone)]
pub struct DesignSpec {
    pub grid: FrequencyGrid,
    pub directions: Vec<Direction>,
    /// Desired response per direction, the same at every frequency.
    pub desired: Vec<f64>,
    pub look: Direction,
    pub gamma_db: f64,
    pub fir_length: usize,
    pub model: SteeringModel,
}

impl DesignSpec {
    pub fn new(
        grid: FrequencyGrid,
        directions: Vec<Direction>,
        desired: Vec<f64>,
        look: Direction,
        gamma_db: f64,
        fir_length: usize,
        model: SteeringModel,
    ) -> Result<Self> {
        let spec = Self {
            grid,
            directions,
            desired,
            look,
            gamma_db,
            fir_length,
            model,
        };
        spec.validate()?;
        Ok(spec)
    }

    /// Azimuth scan 0..=180° (5° steps) at the look's polar angle, unit desired
    /// response at the look direction and zero elsewhere, 129 design points
    /// over [0, 8 kHz], pass-band 300-5000 Hz, L = 1024.
    pub fn standard(model: SteeringModel, look: Direction, gamma_db: f64) -> Result<Self> {
        let grid = FrequencyGrid::uniform(DEFAULT_SAMPLE_RATE_HZ, DEFAULT_DESIGN_POINTS, DEFAULT_BAND_HZ)?;
        let directions = direction_grid(0.0, 180.0, DEFAULT_AZIMUTH_STEP_DEG, look.elevation_polar_deg)?;
        let desired = one_hot(&directions, &look)?;
        Self::new(grid, directions, desired, look, gamma_db, DEFAULT_FIR_LENGTH, model)
    }

    pub fn gamma_linear(&self) -> f64 {
        10f64.powf(self.gamma_db / 10.0)
    }

    pub fn validate(&self) -> Result<()> {
        if self.directions.is_empty() {
            return Err(Error::Singular("empty direction set".into()));
        }
        if self.desired.len() != self.directions.len() {
            return Err(Error::InvalidArgument(format!(
                "{} desired values for {} directions",
                self.desired.len(),
                self.directions.len()
            )));
        }
        if self.desired.iter().any(|b| !(0.0..=1.0).contains(b)) {
            return Err(Error::InvalidArgument("desired response entries must lie in [0, 1]".into()));
        }
        let look_idx = look_index(&self.directions, &self.look).ok_or_else(|| {
            Error::InvalidArgument("look direction must be one of the design directions".into())
        })?;
        if self.desired[look_idx] != 1.0 {
            return Err(Error::InvalidArgument("desired response at the look direction must be 1".into()));
        }
        if !self.gamma_db.is_finite() {
            return Err(Error::InvalidArgument("WNG bound must be finite".into()));
        }
        if self.fir_length < 2 {
            return Err(Error::InvalidArgument(format!("FIR length must be >= 2, got {}", self.fir_length)));
        }
        Ok(())
    }

    pub fn desired_vector(&self) -> DVector<Complex64> {
        DVector::from_iterator(self.desired.len(), self.desired.iter().map(|&b| Complex64::new(b, 0.0)))
    }

    /// Short hash identifying this spec (and geometry) in output files.
    pub fn digest(&self, geom: &ArrayGeometry) -> String {
        let mut h = Sha256::new();
        h.update(geom.to_json().as_bytes());
        h.update(serde_json::to_string(&self.grid).expect("grid serializes").as_bytes());
        h.update(serde_json::to_string(&self.directions).expect("directions serialize").as_bytes());
        h.update(serde_json::to_string(&self.desired).expect("desired serializes").as_bytes());
        h.update(serde_json::to_string(&self.look).expect("look serializes").as_bytes());
        h.update(format!("{}|{}|{}", self.gamma_db, self.fir_length, self.model.describe()).as_bytes());
        hex::encode(&h.finalize()[..16])
    }

    /// Copy with a different look direction; the desired response follows it.
    pub fn steered(&self, look: Direction) -> Result<Self> {
        let desired = one_hot(&self.directions, &look)?;
        Self::new(
            self.grid.clone(),
            self.directions.clone(),
            desired,
            look,
            self.gamma_db,
            self.fir_length,
            self.model.clone(),
        )
    }
}

fn look_index(directions: &[Direction], look: &Direction) -> Option<usize> {
    directions.iter().position(|d| d.angle_to_deg(look) < 1e-6)
}

/// 1 at the look direction, 0 elsewhere.
pub fn one_hot(directions: &[Direction], look: &Direction) -> Result<Vec<f64>> {
    let idx = look_index(directions, look).ok_or_else(|| {
        Error::InvalidArgument(format!(
            "look direction (az {}, polar {}) is not on the design grid",
            look.azimuth_deg, look.elevation_polar_deg
        ))
    })?;
    Ok((0..directions.len()).map(|i| if i == idx { 1.0 } else { 0.0 }).collect())
}

/// Solves the narrowband problem independently at every design frequency.
pub fn design_broadband(spec: &DesignSpec, geom: &ArrayGeometry) -> Result<Vec<NarrowbandWeights>> {
    spec.validate()?;
    spec.model.check_compatible(geom, spec.grid.sample_rate_hz)?;
    let desired = spec.desired_vector();
    let gamma = spec.gamma_linear();
    let results: Vec<Result<NarrowbandWeights>> = spec
        .grid
        .freqs_hz
        .par_iter()
        .map(|&f| {
            let sm = steering_matrix(&spec.model, geom, &spec.directions, &spec.look, f)?;
            solve_narrowband(&sm, &desired, gamma)
        })
        .collect();
    results
        .into_iter()
        .enumerate()
        .map(|(index, r)| {
            r.map_err(|e| Error::DesignAtFrequency {
                index,
                freq_hz: spec.grid.freqs_hz[index],
                source: Box::new(e),
            })
        })
        .collect()
}

/// A finished design: narrowband solutions plus their FIR realization.
#[derive(Debug, Clone)]
pub struct Design {
    pub narrowband: Vec<NarrowbandWeights>,
    pub fir: FirBeamformer,
}

/// Tap prior center for the FIR fit of `spec`: the group delay minus the
/// modeling delay of its steering model.
pub fn prior_center(spec: &DesignSpec) -> f64 {
    (spec.fir_length as f64 - 1.0) / 2.0 - spec.model.delay_center_samples()
}

/// FIR fitters for one grid and length, built on first use per prior center.
pub struct FitterCache {
    grid: FrequencyGrid,
    length: usize,
    fitters: Mutex<Vec<Arc<FirFitter>>>,
}

impl FitterCache {
    pub fn new(grid: FrequencyGrid, length: usize) -> Self {
        Self {
            grid,
            length,
            fitters: Mutex::new(Vec::new()),
        }
    }

    pub fn grid(&self) -> &FrequencyGrid {
        &self.grid
    }

    pub fn length(&self) -> usize {
        self.length
    }

    pub fn fitter(&self, center: f64) -> Result<Arc<FirFitter>> {
        let mut fitters = self.fitters.lock().unwrap_or_else(|e| e.into_inner());
        let clamped = center.clamp(0.0, self.length as f64 - 1.0);
        if let Some(f) = fitters.iter().find(|f| (f.center() - clamped).abs() < 1e-9) {
            return Ok(f.clone());
        }
        let f = Arc::new(FirFitter::with_center(&self.grid, self.length, center)?);
        fitters.push(f.clone());
        Ok(f)
    }
}

/// Full pipeline, reusing factorizations from `cache` across designs.
pub fn design_with_cache(spec: &DesignSpec, geom: &ArrayGeometry, cache: &FitterCache) -> Result<Design> {
    if cache.length() != spec.fir_length || cache.grid() != &spec.grid {
        return Err(Error::InvalidArgument("fitter cache does not match the design grid and length".into()));
    }
    let fitter = cache.fitter(prior_center(spec))?;
    let narrowband = design_broadband(spec, geom)?;
    let fir = fitter.fit(&narrowband, spec.digest(geom))?;
    Ok(Design { narrowband, fir })
}

pub fn design_fir(spec: &DesignSpec, geom: &ArrayGeometry) -> Result<Design> {
    let fitter = FirFitter::with_center(&spec.grid, spec.fir_length, prior_center(spec))?;
    let narrowband = design_broadband(spec, geom)?;
    let fir = fitter.fit(&narrowband, spec.digest(geom))?;
    Ok(Design { narrowband, fir })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn standard_spec_shape() {
        let look = Direction::new(90.0, 90.0).unwrap();
        let spec = DesignSpec::standard(SteeringModel::free_field(), look, -10.0).unwrap();
        assert_eq!(spec.directions.len(), 37);
        assert_eq!(spec.desired.iter().filter(|&&b| b == 1.0).count(), 1);
        assert_eq!(spec.desired[18], 1.0);
        assert!((spec.gamma_linear() - 0.1).abs() < 1e-15);
    }

    #[test]
    fn spec_rejects_off_grid_look() {
        let look = Direction::new(92.0, 90.0).unwrap();
        assert!(DesignSpec::standard(SteeringModel::free_field(), look, -10.0).is_err());
    }

    #[test]
    fn infeasible_frequency_index_is_reported() {
        let look = Direction::new(90.0, 90.0).unwrap();
        let spec = DesignSpec::standard(SteeringModel::free_field(), look, 7.1).unwrap();
        match design_broadband(&spec, &ArrayGeometry::default_head()) {
            Err(Error::DesignAtFrequency { index, source, .. }) => {
                assert_eq!(index, 0);
                assert!(matches!(*source, Error::InfeasibleWng { .. }));
            }
            other => panic!("unexpected {other:?}"),
        }
    }

    #[test]
    fn digest_tracks_spec() {
        let geom = ArrayGeometry::default_head();
        let look = Direction::new(90.0, 90.0).unwrap();
        let a = DesignSpec::standard(SteeringModel::free_field(), look, -10.0).unwrap();
        let b = DesignSpec::standard(SteeringModel::free_field(), look, -20.0).unwrap();
        assert_eq!(a.digest(&geom), a.clone().digest(&geom));
        assert_ne!(a.digest(&geom), b.digest(&geom));
    }
}
