//! Beampatterns `B(omega, phi, theta) = sum_n W_n(omega) g_n(omega, phi, theta)`
//! and white-noise gain of narrowband or FIR designs.

use std::fmt::Write as _;

use num_complex::Complex64;
use rayon::prelude::*;

use crate::design::{FirBeamformer, NarrowbandWeights};
use crate::error::{Error, Result};
use crate::spatial::{ArrayGeometry, Direction};
use crate::steering::SteeringModel;

/// Floor applied to dB values of zero magnitude.
pub const DB_FLOOR: f64 = -80.0;
/// Default number of report frequencies.
pub const REPORT_POINTS: usize = 512;

/// Filters whose response can be evaluated at arbitrary frequencies.
#[derive(Debug, Clone, Copy)]
pub enum Filters<'a> {
    Fir(&'a FirBeamformer),
    /// Only evaluable at the design frequencies.
    Narrowband(&'a [NarrowbandWeights]),
}

impl<'a> From<&'a FirBeamformer> for Filters<'a> {
    fn from(bf: &'a FirBeamformer) -> Self {
        Filters::Fir(bf)
    }
}

impl<'a> From<&'a [NarrowbandWeights]> for Filters<'a> {
    fn from(w: &'a [NarrowbandWeights]) -> Self {
        Filters::Narrowband(w)
    }
}

impl Filters<'_> {
    pub fn channels(&self) -> usize {
        match self {
            Filters::Fir(bf) => bf.channels(),
            Filters::Narrowband(w) => w.first().map_or(0, |x| x.w.len()),
        }
    }

    /// `W_n(omega)` for every channel.
    pub fn weights_at(&self, freq_hz: f64) -> Result<Vec<Complex64>> {
        match self {
            Filters::Fir(bf) => Ok(bf.response(freq_hz)),
            Filters::Narrowband(ws) => ws
                .iter()
                .find(|w| (w.freq_hz - freq_hz).abs() <= 1e-9 * freq_hz.max(1.0))
                .map(|w| w.w.clone())
                .ok_or_else(|| {
                    Error::InvalidArgument(format!("no narrowband solution at {freq_hz} Hz"))
                }),
        }
    }
}

fn check_channels(filters: &Filters, geom: &ArrayGeometry) -> Result<()> {
    if filters.channels() != geom.len() {
        return Err(Error::ChannelMismatch {
            expected: geom.len(),
            got: filters.channels(),
        });
    }
    Ok(())
}

/// Complex array response over a frequency x direction grid.
#[derive(Debug, Clone)]
pub struct Beampattern {
    pub freqs_hz: Vec<f64>,
    pub directions: Vec<Direction>,
    /// `values[f][m]`
    pub values: Vec<Vec<Complex64>>,
    pub backend: String,
}

impl Beampattern {
    /// Response at the direction nearest to `dir` for every frequency.
    pub fn column(&self, dir: &Direction) -> Vec<Complex64> {
        let idx = self
            .directions
            .iter()
            .enumerate()
            .min_by(|a, b| a.1.angle_to_deg(dir).total_cmp(&b.1.angle_to_deg(dir)))
            .map(|(i, _)| i)
            .unwrap_or(0);
        self.values.iter().map(|row| row[idx]).collect()
    }
}

pub fn beampattern(
    filters: Filters,
    model: &SteeringModel,
    geom: &ArrayGeometry,
    directions: &[Direction],
    freqs_hz: &[f64],
) -> Result<Beampattern> {
    check_channels(&filters, geom)?;
    let values = freqs_hz
        .par_iter()
        .map(|&f| {
            let w = filters.weights_at(f)?;
            directions
                .iter()
                .map(|dir| {
                    let g = model.response(geom, dir, f)?;
                    Ok(w.iter().zip(&g).map(|(a, b)| a * b).sum())
                })
                .collect::<Result<Vec<Complex64>>>()
        })
        .collect::<Result<Vec<_>>>()?;
    Ok(Beampattern {
        freqs_hz: freqs_hz.to_vec(),
        directions: directions.to_vec(),
        values,
        backend: model.tag().to_string(),
    })
}

/// `10 log10 |x|^2`, floored at [`DB_FLOOR`].
pub fn power_db(x: Complex64) -> f64 {
    let p = x.norm_sqr();
    if p > 0.0 {
        (10.0 * p.log10()).max(DB_FLOOR)
    } else {
        DB_FLOOR
    }
}

/// Element-wise `10 log10 |B|^2` with a floor for zero magnitudes.
pub fn bp_db(bp: &Beampattern) -> Vec<Vec<f64>> {
    bp.values
        .iter()
        .map(|row| row.iter().map(|&b| power_db(b)).collect())
        .collect()
}

/// CSV with azimuths in the header and one row per frequency.
pub fn beampattern_csv(bp: &Beampattern) -> String {
    let db = bp_db(bp);
    let mut out = String::from("freq_hz");
    for d in &bp.directions {
        write!(out, ",{}", d.azimuth_deg).unwrap();
    }
    out.push('\n');
    for (f, row) in bp.freqs_hz.iter().zip(&db) {
        write!(out, "{f}").unwrap();
        for v in row {
            write!(out, ",{v}").unwrap();
        }
        out.push('\n');
    }
    out
}

#[derive(Debug, Clone, PartialEq)]
pub struct WngCurve {
    pub freqs_hz: Vec<f64>,
    pub wng_db: Vec<f64>,
}

impl WngCurve {
    pub fn to_csv(&self) -> String {
        let mut out = String::from("freq_hz,wng_db\n");
        for (f, w) in self.freqs_hz.iter().zip(&self.wng_db) {
            writeln!(out, "{f},{w}").unwrap();
        }
        out
    }
}

/// `|w^T d|^2 / (w^H w)` in dB, with `d` from `model` toward `look`.
pub fn wng_curve(
    filters: Filters,
    model: &SteeringModel,
    geom: &ArrayGeometry,
    look: &Direction,
    freqs_hz: &[f64],
) -> Result<WngCurve> {
    check_channels(&filters, geom)?;
    let wng_db = freqs_hz
        .par_iter()
        .map(|&f| {
            let w = filters.weights_at(f)?;
            let d = model.response(geom, look, f)?;
            let energy: f64 = w.iter().map(|x| x.norm_sqr()).sum();
            if !(energy > 0.0) {
                return Err(Error::InvalidArgument(format!("zero weight vector at {f} Hz")));
            }
            let gain: Complex64 = w.iter().zip(&d).map(|(a, b)| a * b).sum();
            Ok(10.0 * (gain.norm_sqr() / energy).log10())
        })
        .collect::<Result<Vec<f64>>>()?;
    Ok(WngCurve {
        freqs_hz: freqs_hz.to_vec(),
        wng_db,
    })
}

/// `count` uniformly spaced frequencies from `lo` to `hi` inclusive.
pub fn linspace(lo: f64, hi: f64, count: usize) -> Vec<f64> {
    match count {
        0 => Vec::new(),
        1 => vec![lo],
        _ => (0..count)
            .map(|i| lo + (hi - lo) * i as f64 / (count - 1) as f64)
            .collect(),
    }
}
