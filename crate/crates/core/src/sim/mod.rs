//! Desk-scale simulation of the localization-error experiments.
//!
//! Sources are rendered through HRIR sets ([`engine::render_source`]),
//! processed by the filter-and-sum engine and scored with SIR gain and
//! frequency-weighted segmental SNR. Target and interferer are always
//! processed separately so output SIR is exact.

pub mod engine;
pub mod metrics;
pub mod scenario;
pub mod sweep;

pub use engine::{convolve, fsb_process, render_source, shadow_decompose, Shadow};
pub use metrics::fwsegsnr;
pub use scenario::{
    speech_shaped_noise, Rendered, Scenario, ScenarioConfig, SourceSpec, AVERAGE_INTERFERERS_DEG,
    DESIGN_DISTANCE_M, SOURCE_HEIGHT_M,
};
pub use sweep::{
    distance_error_sweep, doa_error_sweep, evaluate, sphere_set_for_distance, DesignKind, Designed, Designer,
    DistanceCase, Metrics, SweepReport, SweepRow,
};
