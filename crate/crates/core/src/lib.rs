//! Oregonator reaction-diffusion model of Belousov-Zhabotinsky liquid marbles:
//! masked-lattice integration, virtual electrodes, excitability schedules and
//! analysis of the recorded potential.


// `!(x > 0.0)` is used on purpose so that NaN is rejected too.
#![allow(clippy::neg_cmp_op_on_partial_ord)]
pub mod analysis;
pub mod config;
pub mod dynamics;
pub mod error;
pub mod experiments;
pub mod field;
pub mod geometry;
pub mod io;
pub mod measurement;
pub mod schedule;

pub use analysis::{
    classify_spike, classify_spike_with, detect_periods, detect_periods_with, fit_period_curve,
    period_ratio, DetectorConfig, PeriodStats, SegmentFit, SpikeClass, SpikeCriteria, SpikeShape,
    Thresholds,
};
pub use config::{parse_config, parse_config_with, RunConfig, ScenarioKind};
pub use dynamics::{
    euler_step, integrate, laplacian5, reaction_rates, steady_state, IntegratorConfig, Observer,
    OregonatorParams, SimState,
};
pub use error::{Error, Result};
pub use experiments::{
    calibrate_phi_for_ratio, run_cooling_cycle, run_phi_sweep, run_scenario, run_spike_shape,
    Calibration, HeldSourceSetup, Scenario, ScenarioResult, SegmentStats, Snapshot,
    SpikeShapeConfig, SweepPoint,
};
pub use field::ScalarField2D;
pub use geometry::{
    edge_site, make_annulus_mask, make_disc_mask, stimulate, Compass, Mask, RectDomain, Shape,
    StimulusMode, StimulusSite,
};
pub use measurement::{measure_potential, ElectrodePair, PotentialTrace, TraceRecorder};
pub use schedule::{PhiSchedule, PhiSegment, ThermalEvent, ThermalModel};
