use std::fmt::Write as _;
use std::path::{Path, PathBuf};
use std::sync::Arc;

use anyhow::{anyhow, bail, Context, Result};
use beamkit::analysis::{beampattern_csv, linspace, wng_curve, Filters};
use beamkit::design::{design_fir, DesignSpec, FirBeamformer};
use beamkit::sim::{
    distance_error_sweep, doa_error_sweep, evaluate, sphere_set_for_distance, DesignKind, Designer, DistanceCase,
    Metrics, ScenarioConfig, SourceSpec, AVERAGE_INTERFERERS_DEG, SOURCE_HEIGHT_M,
};
use beamkit::spatial::{direction_grid, ArrayGeometry, Direction, SourcePosition, SPEED_OF_SOUND};
use beamkit::steering::{synthesize_sphere_hrtf_set, HrtfSet, SphereModel, SphereSynthesis, SteeringModel};
use log::info;
use serde::{Deserialize, Serialize};

use crate::args::*;

/// Taps of synthesized HRIR sets.
const SYNTH_TAPS: usize = 256;
const SCENARIO_1_INTERFERER_DEG: f64 = 70.0;
const DEFAULT_SEED: u64 = 1;

/// Files produced by a subcommand, written together once it has finished.
#[derive(Default)]
struct Outputs(Vec<(PathBuf, Vec<u8>)>);

impl Outputs {
    fn add(&mut self, path: impl Into<PathBuf>, bytes: impl Into<Vec<u8>>) {
        self.0.push((path.into(), bytes.into()));
    }

    fn write(self) -> Result<()> {
        for (path, bytes) in self.0 {
            if let Some(dir) = path.parent().filter(|d| !d.as_os_str().is_empty()) {
                std::fs::create_dir_all(dir).with_context(|| format!("creating {}", dir.display()))?;
            }
            std::fs::write(&path, bytes).with_context(|| format!("writing {}", path.display()))?;
            info!("wrote {}", path.display());
        }
        Ok(())
    }
}

fn geometry(path: Option<&Path>) -> Result<ArrayGeometry> {
    match path {
        Some(p) => Ok(ArrayGeometry::load(p)?),
        None => Ok(ArrayGeometry::default_head()),
    }
}

fn steering_model(args: &ModelArgs) -> Result<SteeringModel> {
    Ok(match args.model {
        ModelKind::FreeField => SteeringModel::free_field(),
        ModelKind::Sphere => SteeringModel::RigidSphere(SphereModel::new(
            args.radius,
            args.max_order,
            args.source_distance,
        )?),
        ModelKind::Hrtf => {
            let path = args.hrtf.as_deref().ok_or_else(|| anyhow!("--model hrtf needs --hrtf <path>"))?;
            SteeringModel::hrtf(HrtfSet::load(path)?)
        }
    })
}

/// Polar angle to use when none was given: that of the HRTF set's first
/// direction, else the horizontal plane.
fn default_polar(model: &SteeringModel, look_el: Option<f64>) -> f64 {
    match (look_el, model) {
        (Some(el), _) => el,
        (None, SteeringModel::HrtfSet(set)) => set.directions.first().map_or(90.0, |d| d.elevation_polar_deg),
        (None, _) => 90.0,
    }
}

fn load_beamformer(path: Option<&Path>) -> Result<FirBeamformer> {
    let path = path.ok_or_else(|| anyhow!("--beamformer <path> is required"))?;
    Ok(FirBeamformer::load(path)?)
}

pub fn design(args: DesignArgs) -> Result<()> {
    let geom = geometry(args.model.geometry.as_deref())?;
    let model = steering_model(&args.model)?;
    let look = Direction::new(args.look_az, default_polar(&model, args.look_el))?;
    let mut spec = DesignSpec::standard(model, look, args.gamma_db)?;
    spec.fir_length = args.fir_length;
    spec.validate()?;
    info!(
        "designing {} beamformer: look az {} polar {}, gamma {} dB, L = {}",
        spec.model.tag(),
        look.azimuth_deg,
        look.elevation_polar_deg,
        args.gamma_db,
        args.fir_length
    );
    let design = design_fir(&spec, &geom)?;

    let mut table = String::from("freq_hz,residual,lambda,wng_db\n");
    info!("{:>9} {:>13} {:>11} {:>9}", "freq_hz", "residual", "lambda", "wng_db");
    for w in &design.narrowband {
        info!("{:>9.2} {:>13.6e} {:>11.3e} {:>9.3}", w.freq_hz, w.residual, w.lambda, w.wng_db());
        writeln!(table, "{},{},{},{}", w.freq_hz, w.residual, w.lambda, w.wng_db())?;
    }
    if let Some(e) = design.fir.fit_error_db {
        info!("FIR fit error {e:.1} dB");
    }

    let mut out = Outputs::default();
    out.add(&args.out, design.fir.to_json());
    if let Some(p) = &args.wav {
        out.add(p, design.fir.to_wav());
    }
    if let Some(p) = &args.table {
        out.add(p, table);
    }
    out.write()
}

pub fn beampattern(args: PatternArgs) -> Result<()> {
    let bf = load_beamformer(args.beamformer.as_deref())?;
    let geom = geometry(args.model.geometry.as_deref())?;
    let model = steering_model(&args.model)?;
    let polar = default_polar(&model, args.look_el);
    let directions = match (&model, args.az_step) {
        (SteeringModel::HrtfSet(set), None) => {
            let mut dirs: Vec<Direction> = set
                .directions
                .iter()
                .filter(|d| d.azimuth_deg <= 180.0 && (d.elevation_polar_deg - polar).abs() < 1e-6)
                .copied()
                .collect();
            dirs.sort_by(|a, b| a.azimuth_deg.total_cmp(&b.azimuth_deg));
            if dirs.is_empty() {
                bail!("HRTF set has no directions at polar angle {polar}");
            }
            dirs
        }
        (_, step) => direction_grid(0.0, 180.0, step.unwrap_or(1.0), polar)?,
    };
    let freqs = linspace(args.freqs.fmin, args.freqs.fmax, args.freqs.freqs);
    let bp = beamkit::analysis::beampattern(Filters::Fir(&bf), &model, &geom, &directions, &freqs)?;
    info!("beampattern: {} frequencies x {} directions", freqs.len(), directions.len());
    let mut out = Outputs::default();
    out.add(&args.out, beampattern_csv(&bp));
    out.write()
}

pub fn wng(args: WngArgs) -> Result<()> {
    let bf = load_beamformer(args.beamformer.as_deref())?;
    let geom = geometry(args.model.geometry.as_deref())?;
    let model = steering_model(&args.model)?;
    let look = Direction::new(args.look_az, default_polar(&model, args.look_el))?;
    let freqs = linspace(args.freqs.fmin, args.freqs.fmax, args.freqs.freqs);
    let curve = wng_curve(Filters::Fir(&bf), &model, &geom, &look, &freqs)?;
    if let Some(min) = curve.wng_db.iter().copied().reduce(f64::min) {
        info!("minimum WNG {min:.2} dB");
    }
    let mut out = Outputs::default();
    out.add(&args.out, curve.to_csv());
    out.write()
}

pub fn synth_hrtf(args: SynthArgs) -> Result<()> {
    let geom = geometry(args.geometry.as_deref())?;
    if args.distance.is_empty() {
        bail!("at least one --distance is required");
    }
    let mut out = Outputs::default();
    for &d in &args.distance {
        let pos = SourcePosition::elevated(0.0, d, args.height)?;
        let end = 360.0 - args.az_step;
        let directions = direction_grid(0.0, end.max(0.0), args.az_step, pos.direction.elevation_polar_deg)?;
        let set = synthesize_sphere_hrtf_set(
            &geom,
            &SphereSynthesis {
                radius_m: args.radius,
                source_distance_m: pos.distance_m,
                sample_rate_hz: args.sample_rate,
                taps: args.taps,
                max_order: args.max_order,
                speed_of_sound: SPEED_OF_SOUND,
            },
            &directions,
        )
        .with_context(|| format!("synthesizing the set for {d} m"))?;
        info!(
            "distance {d} m: range {:.4} m, polar {:.2} deg, {} directions",
            pos.distance_m,
            pos.direction.elevation_polar_deg,
            directions.len()
        );
        out.add(args.out.join(format!("hrtf_{d}m.json")), set.to_json());
    }
    out.write()
}

/// Scenario from file or the standard one, with flag overrides applied.
fn base_scenario(args: &ScenarioArgs) -> Result<ScenarioConfig> {
    let mut cfg = match &args.scenario {
        Some(p) => ScenarioConfig::load(p)?,
        None => ScenarioConfig::standard(SCENARIO_1_INTERFERER_DEG, DEFAULT_SEED)?,
    };
    if let Some(seed) = args.seed {
        cfg.seed = seed;
    }
    if let Some(d) = args.duration {
        cfg.duration_s = d;
    }
    if let Some(az) = args.interferer_az {
        cfg = cfg.with_interferer_azimuth(az);
    }
    cfg.validate()?;
    Ok(cfg)
}

/// Sphere set covering azimuths 0..355 deg in 5 deg steps at the target's
/// polar angle and range.
fn set_for_target(geom: &ArrayGeometry, args: &ScenarioArgs, target: &SourceSpec) -> Result<HrtfSet> {
    let directions = direction_grid(0.0, 355.0, 5.0, target.el)?;
    Ok(synthesize_sphere_hrtf_set(
        geom,
        &SphereSynthesis {
            radius_m: args.radius,
            source_distance_m: target.dist,
            sample_rate_hz: beamkit::design::DEFAULT_SAMPLE_RATE_HZ,
            taps: SYNTH_TAPS,
            max_order: args.max_order,
            speed_of_sound: SPEED_OF_SOUND,
        },
        &directions,
    )?)
}

#[derive(Debug, Serialize, Deserialize)]
struct SimulationReport {
    design: DesignKind,
    doa_error_deg: f64,
    steer_azimuth_deg: f64,
    steer_polar_deg: f64,
    scenario: ScenarioConfig,
    metrics: Metrics,
}

pub fn simulate(args: SimulateArgs) -> Result<()> {
    let geom = geometry(args.scenario.geometry.as_deref())?;
    let cfg = base_scenario(&args.scenario)?;
    let set = Arc::new(set_for_target(&geom, &args.scenario, &cfg.target)?);
    let designer = Designer::new(geom.clone(), args.scenario.gamma_db, args.scenario.fir_length)?;
    let look = Direction::new(cfg.target.az + args.doa_error, cfg.target.el)?;
    let designed = designer.design(args.design, &set, look)?;
    let scenario = cfg.build(designer.sample_rate_hz())?;
    let rendered = scenario.render(&set, geom.reference_mic())?;
    let metrics = evaluate(&designed, &set, &scenario.target, &rendered, designer.band())?;
    info!(
        "SIR gain {:.2} dB, fwSegSNR {:.2} -> {:.2} dB, distortion {:.1} dB",
        metrics.sir_gain_db, metrics.fwsegsnr_in_db, metrics.fwsegsnr_out_db, metrics.distortion_db
    );
    let report = SimulationReport {
        design: args.design,
        doa_error_deg: args.doa_error,
        steer_azimuth_deg: look.azimuth_deg,
        steer_polar_deg: look.elevation_polar_deg,
        scenario: cfg,
        metrics,
    };
    let mut out = Outputs::default();
    out.add(&args.out, serde_json::to_string_pretty(&report)?);
    if let Some(p) = &args.wav {
        let output = beamkit::sim::fsb_process(&designed.fir, &rendered.mixture())?;
        let mut reference = rendered.mixture().swap_remove(rendered.reference_mic);
        reference.resize(output.len(), 0.0);
        out.add(p, beamkit::wav::encode_f64(&[reference, output], designer.sample_rate_hz().round() as u32));
    }
    out.write()
}

pub fn sweep(args: SweepArgs) -> Result<()> {
    let s = &args.scenario;
    let geom = geometry(s.geometry.as_deref())?;
    let base = base_scenario(s)?;
    let designer = Designer::new(geom.clone(), s.gamma_db, s.fir_length)?;
    let fs = designer.sample_rate_hz();
    let variants = |cfg: &ScenarioConfig| -> Vec<ScenarioConfig> {
        if args.average {
            AVERAGE_INTERFERERS_DEG.iter().map(|&az| cfg.with_interferer_azimuth(az)).collect()
        } else {
            vec![cfg.clone()]
        }
    };
    let report = match args.mode {
        SweepMode::Doa => {
            let kinds = args.designs.clone().unwrap_or_else(|| vec![DesignKind::Hrtf]);
            let set = Arc::new(match &args.hrtf {
                Some(p) => HrtfSet::load(p)?,
                None => set_for_target(&geom, s, &base.target)?,
            });
            let scenarios = variants(&base)
                .iter()
                .map(|c| c.build(fs))
                .collect::<beamkit::Result<Vec<_>>>()?;
            info!(
                "doa sweep: {} design kind(s) x {} error(s) x {} scenario(s)",
                kinds.len(),
                args.errors.len(),
                scenarios.len()
            );
            doa_error_sweep(&designer, &set, &kinds, &scenarios, &args.errors)?
        }
        SweepMode::Distance => {
            if args.hrtf.is_some() {
                bail!("--hrtf is only used by the doa mode; the distance mode synthesizes its sets");
            }
            let kinds = args
                .designs
                .clone()
                .unwrap_or_else(|| vec![DesignKind::Hrtf, DesignKind::FreeField]);
            let mut horizontal = args.distance.clone();
            horizontal.push(args.design_distance);
            horizontal.sort_by(f64::total_cmp);
            horizontal.dedup();
            let sets = horizontal
                .iter()
                .map(|&d| Ok((d, Arc::new(sphere_set_for_distance(&geom, s.radius, d, fs, SYNTH_TAPS, s.max_order)?))))
                .collect::<Result<Vec<_>>>()?;
            let set_at = |d: f64| sets.iter().find(|(h, _)| *h == d).map(|(_, set)| set.clone()).unwrap();
            let cases = args
                .distance
                .iter()
                .map(|&d| {
                    let scenarios = variants(&base.at_distance(d)?)
                        .iter()
                        .map(|c| c.build(fs))
                        .collect::<beamkit::Result<Vec<_>>>()?;
                    Ok(DistanceCase {
                        horizontal_m: d,
                        acoustic: set_at(d),
                        scenarios,
                    })
                })
                .collect::<Result<Vec<_>>>()?;
            let design_target = SourcePosition::elevated(base.target.az, args.design_distance, SOURCE_HEIGHT_M)?;
            info!(
                "distance sweep: design at {} m, evaluated at {:?} m",
                args.design_distance, args.distance
            );
            distance_error_sweep(&designer, &set_at(args.design_distance), design_target.direction, &kinds, &cases)?
        }
    };
    eprint!("{}", report.summary());
    let stem = match args.mode {
        SweepMode::Doa => "sweep_doa",
        SweepMode::Distance => "sweep_distance",
    };
    let mut out = Outputs::default();
    out.add(args.out.join(format!("{stem}.json")), report.to_json());
    out.add(args.out.join(format!("{stem}.csv")), report.to_csv());
    out.write()
}
