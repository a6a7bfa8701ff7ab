use std::path::PathBuf;

use beamkit::design::{DEFAULT_BAND_HZ, DEFAULT_FIR_LENGTH, DEFAULT_GAMMA_DB, DEFAULT_SAMPLE_RATE_HZ};
use beamkit::sim::{DesignKind, DESIGN_DISTANCE_M, SOURCE_HEIGHT_M};
use beamkit::steering::{DEFAULT_HEAD_RADIUS_M, DEFAULT_MAX_ORDER};
use clap::{Args, Parser, Subcommand, ValueEnum};
use serde::{Deserialize, Serialize};

#[derive(Debug, Parser)]
#[command(name = "beamkit", version, about = "Robust least-squares beamformer design and evaluation")]
pub struct Cli {
    /// JSON object whose keys replace the corresponding flags.
    #[arg(long, global = true)]
    pub config: Option<PathBuf>,

    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Design a beamformer and write its FIR filters.
    Design(DesignArgs),
    /// Beampattern of a saved beamformer as a dB table.
    Beampattern(PatternArgs),
    /// White-noise gain of a saved beamformer.
    Wng(WngArgs),
    /// Synthesize rigid-sphere HRIR sets.
    SynthHrtf(SynthArgs),
    /// Run one two-speaker scenario through one design.
    Simulate(SimulateArgs),
    /// Localization-error sweeps.
    Sweep(SweepArgs),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum ModelKind {
    #[value(name = "freefield")]
    FreeField,
    Sphere,
    Hrtf,
}

/// Array geometry and steering model.
#[derive(Debug, Clone, Args, Serialize, Deserialize)]
pub struct ModelArgs {
    #[arg(long, value_enum, default_value_t = ModelKind::FreeField)]
    pub model: ModelKind,
    /// HRTF set JSON, required with `--model hrtf`.
    #[arg(long)]
    pub hrtf: Option<PathBuf>,
    /// Geometry JSON; defaults to the built-in five-mic head array.
    #[arg(long)]
    pub geometry: Option<PathBuf>,
    /// Sphere radius in meters.
    #[arg(long, default_value_t = DEFAULT_HEAD_RADIUS_M)]
    pub radius: f64,
    /// Source range in meters for the sphere model.
    #[arg(long, default_value_t = DESIGN_DISTANCE_M)]
    pub source_distance: f64,
    #[arg(long, default_value_t = DEFAULT_MAX_ORDER)]
    pub max_order: usize,
}

#[derive(Debug, Clone, Args, Serialize, Deserialize)]
pub struct DesignArgs {
    #[command(flatten)]
    #[serde(flatten)]
    pub model: ModelArgs,
    /// Lower bound on the white-noise gain in dB.
    #[arg(long, default_value_t = DEFAULT_GAMMA_DB, allow_negative_numbers = true)]
    pub gamma_db: f64,
    #[arg(long, default_value_t = 90.0, allow_negative_numbers = true)]
    pub look_az: f64,
    /// Polar angle of the look direction; 90 unless an HRTF set says otherwise.
    #[arg(long)]
    pub look_el: Option<f64>,
    #[arg(long, default_value_t = DEFAULT_FIR_LENGTH)]
    pub fir_length: usize,
    #[arg(long, default_value = "beamformer.json")]
    pub out: PathBuf,
    /// Also write the taps as a multichannel float WAV.
    #[arg(long)]
    pub wav: Option<PathBuf>,
    /// Also write the per-frequency residual/lambda/WNG table as CSV.
    #[arg(long)]
    pub table: Option<PathBuf>,
}

/// Evaluation frequencies.
#[derive(Debug, Clone, Args, Serialize, Deserialize)]
pub struct FreqArgs {
    #[arg(long, default_value_t = analysis_points())]
    pub freqs: usize,
    #[arg(long, default_value_t = DEFAULT_BAND_HZ.0)]
    pub fmin: f64,
    #[arg(long, default_value_t = DEFAULT_BAND_HZ.1)]
    pub fmax: f64,
}

fn analysis_points() -> usize {
    beamkit::analysis::REPORT_POINTS
}

#[derive(Debug, Clone, Args, Serialize, Deserialize)]
pub struct PatternArgs {
    #[command(flatten)]
    #[serde(flatten)]
    pub model: ModelArgs,
    #[command(flatten)]
    #[serde(flatten)]
    pub freqs: FreqArgs,
    /// Beamformer JSON written by `design`.
    #[arg(long)]
    pub beamformer: Option<PathBuf>,
    /// Polar angle of the azimuth scan.
    #[arg(long)]
    pub look_el: Option<f64>,
    /// Azimuth step of the 0..180 scan; an HRTF model uses its stored azimuths by default.
    #[arg(long)]
    pub az_step: Option<f64>,
    #[arg(long, default_value = "beampattern.csv")]
    pub out: PathBuf,
}

#[derive(Debug, Clone, Args, Serialize, Deserialize)]
pub struct WngArgs {
    #[command(flatten)]
    #[serde(flatten)]
    pub model: ModelArgs,
    #[command(flatten)]
    #[serde(flatten)]
    pub freqs: FreqArgs,
    #[arg(long)]
    pub beamformer: Option<PathBuf>,
    #[arg(long, default_value_t = 90.0, allow_negative_numbers = true)]
    pub look_az: f64,
    #[arg(long)]
    pub look_el: Option<f64>,
    #[arg(long, default_value = "wng.csv")]
    pub out: PathBuf,
}

#[derive(Debug, Clone, Args, Serialize, Deserialize)]
pub struct SynthArgs {
    #[arg(long)]
    pub geometry: Option<PathBuf>,
    #[arg(long, default_value_t = DEFAULT_HEAD_RADIUS_M)]
    pub radius: f64,
    /// Horizontal source distance in meters; repeat for several sets.
    #[arg(long, default_values_t = [DESIGN_DISTANCE_M])]
    pub distance: Vec<f64>,
    /// Source height above the array in meters.
    #[arg(long, default_value_t = SOURCE_HEIGHT_M, allow_negative_numbers = true)]
    pub height: f64,
    #[arg(long, default_value_t = 256)]
    pub taps: usize,
    #[arg(long, default_value_t = DEFAULT_MAX_ORDER)]
    pub max_order: usize,
    #[arg(long, default_value_t = DEFAULT_SAMPLE_RATE_HZ)]
    pub sample_rate: f64,
    #[arg(long, default_value_t = 5.0)]
    pub az_step: f64,
    /// Output directory; files are named `hrtf_<distance>m.json`.
    #[arg(long, default_value = ".")]
    pub out: PathBuf,
}

/// Scenario selection shared by `simulate` and `sweep`.
#[derive(Debug, Clone, Args, Serialize, Deserialize)]
pub struct ScenarioArgs {
    /// Scenario JSON; defaults to the standard scenario with the interferer at 70 deg.
    #[arg(long)]
    pub scenario: Option<PathBuf>,
    #[arg(long)]
    pub seed: Option<u64>,
    /// Signal length in seconds.
    #[arg(long)]
    pub duration: Option<f64>,
    #[arg(long, allow_negative_numbers = true)]
    pub interferer_az: Option<f64>,
    #[arg(long, default_value_t = DEFAULT_GAMMA_DB, allow_negative_numbers = true)]
    pub gamma_db: f64,
    #[arg(long, default_value_t = DEFAULT_FIR_LENGTH)]
    pub fir_length: usize,
    #[arg(long)]
    pub geometry: Option<PathBuf>,
    #[arg(long, default_value_t = DEFAULT_HEAD_RADIUS_M)]
    pub radius: f64,
    #[arg(long, default_value_t = DEFAULT_MAX_ORDER)]
    pub max_order: usize,
}

#[derive(Debug, Clone, Args, Serialize, Deserialize)]
pub struct SimulateArgs {
    #[command(flatten)]
    #[serde(flatten)]
    pub scenario: ScenarioArgs,
    #[arg(long, default_value = "hrtf")]
    pub design: DesignKind,
    /// Steering error in degrees added to the target azimuth.
    #[arg(long, default_value_t = 0.0, allow_negative_numbers = true)]
    pub doa_error: f64,
    #[arg(long, default_value = "simulate.json")]
    pub out: PathBuf,
    /// Also write the reference-mic mixture and the beamformer output as WAV.
    #[arg(long)]
    pub wav: Option<PathBuf>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum SweepMode {
    Doa,
    Distance,
}

#[derive(Debug, Clone, Args, Serialize, Deserialize)]
pub struct SweepArgs {
    #[command(flatten)]
    #[serde(flatten)]
    pub scenario: ScenarioArgs,
    #[arg(long, value_enum, default_value_t = SweepMode::Doa)]
    pub mode: SweepMode,
    /// Average over the eight standard interferer positions.
    #[arg(long)]
    pub average: bool,
    /// Design kinds, comma separated; hrtf for doa, hrtf,freefield for distance.
    #[arg(long, value_delimiter = ',')]
    pub designs: Option<Vec<DesignKind>>,
    #[arg(long, value_delimiter = ',', allow_hyphen_values = true,
          default_values_t = [-10.0, -5.0, 0.0, 5.0, 10.0])]
    pub errors: Vec<f64>,
    /// True horizontal distances for the distance mode; repeatable.
    #[arg(long, default_values_t = [DESIGN_DISTANCE_M, 2.0])]
    pub distance: Vec<f64>,
    /// Horizontal distance the distance-mode designs assume.
    #[arg(long, default_value_t = DESIGN_DISTANCE_M)]
    pub design_distance: f64,
    /// HRTF set used for design and acoustics in the doa mode instead of a synthesized one.
    #[arg(long)]
    pub hrtf: Option<PathBuf>,
    /// Output directory for `sweep_<mode>.json` and `.csv`.
    #[arg(long, default_value = ".")]
    pub out: PathBuf,
}
