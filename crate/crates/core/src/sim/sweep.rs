//! Localization-error experiments: design with an assumed source position,
//! render with the true one, score the output.

use std::fmt::Write as _;
use std::path::Path;
use std::sync::Arc;

use num_complex::Complex64;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::engine::{energy, fsb_process, shadow_decompose, sir_db};
use super::metrics::fwsegsnr;
use super::scenario::{Rendered, Scenario, SOURCE_HEIGHT_M};
use crate::analysis::linspace;
use crate::design::{design_with_cache, DesignSpec, FirBeamformer, FitterCache, DEFAULT_BAND_HZ};
use crate::error::{write_file, Error, Result};
use crate::spatial::{direction_grid, ArrayGeometry, Direction, FrequencyGrid, SourcePosition};
use crate::steering::{synthesize_sphere_hrtf_set, HrtfSet, SphereSynthesis, SteeringModel};

/// Points used for the pass-band distortion measure.
const DISTORTION_POINTS: usize = 256;
/// Tolerance of the shadow-sum check, relative to the output peak.
const SHADOW_TOL: f64 = 1e-9;

/// Which steering model a beamformer is designed with.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum DesignKind {
    #[serde(rename = "hrtf")]
    Hrtf,
    #[serde(rename = "freefield")]
    FreeField,
}

impl DesignKind {
    pub fn as_str(&self) -> &'static str {
        match self {
            DesignKind::Hrtf => "hrtf",
            DesignKind::FreeField => "freefield",
        }
    }
}

impl std::str::FromStr for DesignKind {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "hrtf" => Ok(DesignKind::Hrtf),
            "freefield" => Ok(DesignKind::FreeField),
            other => Err(Error::InvalidArgument(format!("unknown design kind '{other}' (hrtf|freefield)"))),
        }
    }
}

/// A designed beamformer plus the modeling delay of the model it came from.
#[derive(Debug, Clone)]
pub struct Designed {
    pub fir: FirBeamformer,
    pub bulk_delay_samples: f64,
}

/// Designs with the standard spec, sharing FIR factorizations.
pub struct Designer {
    geom: ArrayGeometry,
    gamma_db: f64,
    fitters: FitterCache,
}

impl Designer {
    pub fn new(geom: ArrayGeometry, gamma_db: f64, fir_length: usize) -> Result<Self> {
        let grid = FrequencyGrid::uniform(
            crate::design::DEFAULT_SAMPLE_RATE_HZ,
            crate::design::DEFAULT_DESIGN_POINTS,
            DEFAULT_BAND_HZ,
        )?;
        Ok(Self {
            geom,
            gamma_db,
            fitters: FitterCache::new(grid, fir_length),
        })
    }

    pub fn geometry(&self) -> &ArrayGeometry {
        &self.geom
    }

    pub fn band(&self) -> (f64, f64) {
        self.fitters.grid().band
    }

    pub fn sample_rate_hz(&self) -> f64 {
        self.fitters.grid().sample_rate_hz
    }

    /// `set` is used by [`DesignKind::Hrtf`] and ignored otherwise.
    pub fn design(&self, kind: DesignKind, set: &Arc<HrtfSet>, look: Direction) -> Result<Designed> {
        let model = match kind {
            DesignKind::Hrtf => SteeringModel::HrtfSet(set.clone()),
            DesignKind::FreeField => SteeringModel::free_field(),
        };
        let mut spec = DesignSpec::standard(model, look, self.gamma_db)?;
        spec.fir_length = self.fitters.length();
        let bulk = spec.model.bulk_delay_samples();
        let design = design_with_cache(&spec, &self.geom, &self.fitters)?;
        Ok(Designed {
            fir: design.fir,
            bulk_delay_samples: bulk,
        })
    }
}

/// Scores of one beamformer on one scenario.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Metrics {
    pub sir_in_db: f64,
    pub sir_out_db: f64,
    pub sir_gain_db: f64,
    pub fwsegsnr_in_db: f64,
    pub fwsegsnr_out_db: f64,
    /// Pass-band error of the target path against a pure delay, dB.
    pub distortion_db: f64,
}

impl Metrics {
    pub fn mean(items: &[Metrics]) -> Result<Metrics> {
        if items.is_empty() {
            return Err(Error::InvalidArgument("nothing to average".into()));
        }
        let n = items.len() as f64;
        let avg = |f: fn(&Metrics) -> f64| items.iter().map(f).sum::<f64>() / n;
        Ok(Metrics {
            sir_in_db: avg(|m| m.sir_in_db),
            sir_out_db: avg(|m| m.sir_out_db),
            sir_gain_db: avg(|m| m.sir_gain_db),
            fwsegsnr_in_db: avg(|m| m.fwsegsnr_in_db),
            fwsegsnr_out_db: avg(|m| m.fwsegsnr_out_db),
            distortion_db: avg(|m| m.distortion_db),
        })
    }
}

/// Relative error of the target path `sum_n W_n H_n` against a pure delay of
/// `tau + acoustic bulk - design bulk` samples over the pass-band, in dB.
pub fn target_distortion_db(
    designed: &Designed,
    acoustic: &HrtfSet,
    target: &SourcePosition,
    band: (f64, f64),
) -> Result<f64> {
    let hrirs = acoustic.hrirs_for(target)?;
    let fs = designed.fir.sample_rate_hz;
    let delay = designed.fir.group_delay_samples + acoustic.bulk_delay_samples.unwrap_or(0.0)
        - designed.bulk_delay_samples;
    let freqs = linspace(band.0, band.1, DISTORTION_POINTS);
    let err: f64 = freqs
        .iter()
        .map(|&f| {
            let w = designed.fir.response(f);
            let path: Complex64 = w
                .iter()
                .zip(hrirs)
                .map(|(wn, h)| wn * crate::steering::dtft(h, f, fs))
                .sum();
            let comp = Complex64::from_polar(1.0, 2.0 * std::f64::consts::PI * f * delay / fs);
            (path * comp - 1.0).norm_sqr()
        })
        .sum();
    Ok(10.0 * (err / freqs.len() as f64).max(1e-30).log10())
}

/// Runs the engine on pre-rendered signals and computes every metric.
/// Fails if processing the mixture differs from the sum of the components.
pub fn evaluate(
    designed: &Designed,
    acoustic: &HrtfSet,
    target: &SourcePosition,
    rendered: &Rendered,
    band: (f64, f64),
) -> Result<Metrics> {
    let fs = designed.fir.sample_rate_hz;
    let r = rendered.reference_mic;
    let shadow = shadow_decompose(&designed.fir, &rendered.target, &rendered.interferer)?;
    let direct = fsb_process(&designed.fir, &rendered.mixture())?;
    let peak = direct.iter().fold(1.0f64, |m, v| m.max(v.abs()));
    let worst = shadow
        .mixture()
        .iter()
        .zip(&direct)
        .fold(0.0f64, |m, (a, b)| m.max((a - b).abs()));
    if worst > SHADOW_TOL * peak {
        return Err(Error::Internal(format!("shadow components miss the mixture output by {worst:e}")));
    }
    if energy(&shadow.target_out) == 0.0 {
        return Err(Error::Signal("beamformer output contains no target energy".into()));
    }
    let sir_in = sir_db(&rendered.target[r], &rendered.interferer[r])?;
    let sir_out = sir_db(&shadow.target_out, &shadow.interferer_out)?;
    let mix_in: Vec<f64> = rendered.target[r].iter().zip(&rendered.interferer[r]).map(|(a, b)| a + b).collect();
    Ok(Metrics {
        sir_in_db: sir_in,
        sir_out_db: sir_out,
        sir_gain_db: sir_out - sir_in,
        fwsegsnr_in_db: fwsegsnr(&rendered.target[r], &mix_in, fs)?,
        fwsegsnr_out_db: fwsegsnr(&shadow.target_out, &direct, fs)?,
        distortion_db: target_distortion_db(designed, acoustic, target, band)?,
    })
}

/// One line of a sweep report; metrics are averaged over `scenarios`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SweepRow {
    pub design: DesignKind,
    pub error_label: String,
    pub steer_azimuth_deg: f64,
    pub steer_polar_deg: f64,
    /// Range of the true target from the array center.
    pub distance_m: f64,
    /// Present when the row covers a single scenario.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub interferer_azimuth_deg: Option<f64>,
    pub scenarios: usize,
    pub sir_gain_db: f64,
    pub fwsegsnr_in_db: f64,
    pub fwsegsnr_out_db: f64,
    pub distortion_db: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SweepReport {
    pub mode: String,
    pub seed: u64,
    pub rows: Vec<SweepRow>,
}

impl SweepReport {
    pub const CSV_HEADER: &'static str = "design,error_label,steer_azimuth_deg,steer_polar_deg,distance_m,\
interferer_azimuth_deg,scenarios,sir_gain_db,fwsegsnr_in_db,fwsegsnr_out_db,distortion_db";

    pub fn to_csv(&self) -> String {
        let mut out = format!("# mode={} seed={}\n{}\n", self.mode, self.seed, Self::CSV_HEADER);
        for r in &self.rows {
            let int = r.interferer_azimuth_deg.map(|a| a.to_string()).unwrap_or_default();
            writeln!(
                out,
                "{},{},{},{},{},{},{},{},{},{},{}",
                r.design.as_str(),
                r.error_label,
                r.steer_azimuth_deg,
                r.steer_polar_deg,
                r.distance_m,
                int,
                r.scenarios,
                r.sir_gain_db,
                r.fwsegsnr_in_db,
                r.fwsegsnr_out_db,
                r.distortion_db
            )
            .unwrap();
        }
        out
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("report serializes")
    }

    pub fn from_json(text: &str) -> Result<Self> {
        Ok(serde_json::from_str(text)?)
    }

    pub fn save_json(&self, path: &Path) -> Result<()> {
        write_file(path, self.to_json().as_bytes())
    }

    pub fn save_csv(&self, path: &Path) -> Result<()> {
        write_file(path, self.to_csv().as_bytes())
    }

    /// Human-readable table.
    pub fn summary(&self) -> String {
        let mut out = format!(
            "{:<10} {:>10} {:>9} {:>11} {:>11} {:>12}\n",
            "design", "case", "SIR gain", "fwSNR in", "fwSNR out", "distortion"
        );
        for r in &self.rows {
            writeln!(
                out,
                "{:<10} {:>10} {:>9.2} {:>11.2} {:>11.2} {:>12.1}",
                r.design.as_str(),
                r.error_label,
                r.sir_gain_db,
                r.fwsegsnr_in_db,
                r.fwsegsnr_out_db,
                r.distortion_db
            )
            .unwrap();
        }
        out
    }
}

fn error_label(e: f64) -> String {
    if e == 0.0 {
        "0deg".into()
    } else {
        format!("{e:+}deg")
    }
}

fn row(
    kind: DesignKind,
    label: String,
    look: &Direction,
    scenarios: &[&Scenario],
    metrics: &[Metrics],
) -> Result<SweepRow> {
    let mean = Metrics::mean(metrics)?;
    Ok(SweepRow {
        design: kind,
        error_label: label,
        steer_azimuth_deg: look.azimuth_deg,
        steer_polar_deg: look.elevation_polar_deg,
        distance_m: scenarios[0].target.distance_m,
        interferer_azimuth_deg: (scenarios.len() == 1).then(|| scenarios[0].interferer.direction.azimuth_deg),
        scenarios: scenarios.len(),
        sir_gain_db: mean.sir_gain_db,
        fwsegsnr_in_db: mean.fwsegsnr_in_db,
        fwsegsnr_out_db: mean.fwsegsnr_out_db,
        distortion_db: mean.distortion_db,
    })
}

fn check_scenarios(scenarios: &[Scenario]) -> Result<()> {
    let first = scenarios
        .first()
        .ok_or_else(|| Error::InvalidArgument("no scenarios to evaluate".into()))?;
    if scenarios.iter().any(|s| s.target != first.target || s.seed != first.seed) {
        return Err(Error::InvalidArgument(
            "scenarios of one sweep must share the target position and seed".into(),
        ));
    }
    Ok(())
}

fn render_all(scenarios: &[Scenario], set: &HrtfSet, reference_mic: usize) -> Result<Vec<Rendered>> {
    scenarios.par_iter().map(|s| s.render(set, reference_mic)).collect()
}

/// Designs steered to `target azimuth + error` for every error (and design
/// kind), each evaluated on all `scenarios` rendered through `set`. The HRTF
/// design uses the same `set`. Rows are averaged over scenarios.
pub fn doa_error_sweep(
    designer: &Designer,
    set: &Arc<HrtfSet>,
    kinds: &[DesignKind],
    scenarios: &[Scenario],
    errors_deg: &[f64],
) -> Result<SweepReport> {
    check_scenarios(scenarios)?;
    let target = scenarios[0].target;
    let jobs: Vec<(DesignKind, f64)> = kinds
        .iter()
        .flat_map(|&k| errors_deg.iter().map(move |&e| (k, e)))
        .collect();
    let designs = jobs
        .par_iter()
        .map(|&(kind, e)| {
            let look = Direction::new(target.direction.azimuth_deg + e, target.direction.elevation_polar_deg)?;
            Ok((look, designer.design(kind, set, look)?))
        })
        .collect::<Result<Vec<_>>>()?;
    let rendered = render_all(scenarios, set, designer.geometry().reference_mic())?;
    let band = designer.band();
    let rows = jobs
        .iter()
        .zip(&designs)
        .map(|(&(kind, e), (look, designed))| {
            let metrics = rendered
                .par_iter()
                .map(|r| evaluate(designed, set, &target, r, band))
                .collect::<Result<Vec<_>>>()?;
            row(kind, error_label(e), look, &scenarios.iter().collect::<Vec<_>>(), &metrics)
        })
        .collect::<Result<Vec<_>>>()?;
    Ok(SweepReport {
        mode: "doa".into(),
        seed: scenarios[0].seed,
        rows,
    })
}

/// Acoustics and scenarios at one true robot-source distance.
#[derive(Debug, Clone)]
pub struct DistanceCase {
    pub horizontal_m: f64,
    pub acoustic: Arc<HrtfSet>,
    pub scenarios: Vec<Scenario>,
}

/// One design per kind, made with `design_set` toward `design_look`, then
/// evaluated at every true distance.
pub fn distance_error_sweep(
    designer: &Designer,
    design_set: &Arc<HrtfSet>,
    design_look: Direction,
    kinds: &[DesignKind],
    cases: &[DistanceCase],
) -> Result<SweepReport> {
    if cases.is_empty() {
        return Err(Error::InvalidArgument("no distances to evaluate".into()));
    }
    for c in cases {
        check_scenarios(&c.scenarios)?;
    }
    let designs = kinds
        .par_iter()
        .map(|&k| designer.design(k, design_set, design_look))
        .collect::<Result<Vec<_>>>()?;
    let band = designer.band();
    let reference = designer.geometry().reference_mic();
    let mut rows = Vec::new();
    let rendered = cases
        .iter()
        .map(|c| render_all(&c.scenarios, &c.acoustic, reference))
        .collect::<Result<Vec<_>>>()?;
    for (kind, designed) in kinds.iter().zip(&designs) {
        for (case, rs) in cases.iter().zip(&rendered) {
            let target = case.scenarios[0].target;
            let metrics = rs
                .par_iter()
                .map(|r| evaluate(designed, &case.acoustic, &target, r, band))
                .collect::<Result<Vec<_>>>()?;
            rows.push(row(
                *kind,
                format!("d={}m", case.horizontal_m),
                &design_look,
                &case.scenarios.iter().collect::<Vec<_>>(),
                &metrics,
            )?);
        }
    }
    Ok(SweepReport {
        mode: "distance".into(),
        seed: cases[0].scenarios[0].seed,
        rows,
    })
}

/// Sphere-model HRIR set for sources at `horizontal_m` from the array and
/// [`SOURCE_HEIGHT_M`] above it, over azimuths 0..355 deg in 5 deg steps.
pub fn sphere_set_for_distance(
    geom: &ArrayGeometry,
    radius_m: f64,
    horizontal_m: f64,
    sample_rate_hz: f64,
    taps: usize,
    max_order: usize,
) -> Result<HrtfSet> {
    let pos = SourcePosition::elevated(0.0, horizontal_m, SOURCE_HEIGHT_M)?;
    let directions = direction_grid(0.0, 355.0, 5.0, pos.direction.elevation_polar_deg)?;
    synthesize_sphere_hrtf_set(
        geom,
        &SphereSynthesis {
            radius_m,
            source_distance_m: pos.distance_m,
            sample_rate_hz,
            taps,
            max_order,
            speed_of_sound: crate::spatial::SPEED_OF_SOUND,
        },
        &directions,
    )
}
