//! Scenario runner: single-wave spike shapes on the disc, excitability sweeps
//! and cooling cycles on the annulus with a held source, and calibration of
//! the cooled excitability against a target period ratio.

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::analysis::{
    classify_spike_with, detect_periods_with, DetectorConfig, PeriodStats, SpikeCriteria,
    SpikeShape,
};
use crate::dynamics::{integrate, IntegratorConfig, Observer, OregonatorParams, SimState};
use crate::error::{invalid, Error, Result};
use crate::field::ScalarField2D;
use crate::geometry::{
    edge_site, make_annulus_mask, make_disc_mask, stimulate, Compass, Mask, RectDomain,
    Shape, StimulusMode, StimulusSite, DEFAULT_SITE_RADIUS,
};
use crate::measurement::{ElectrodePair, PotentialTrace, TraceRecorder};
use crate::schedule::PhiSchedule;

/// Activator level above which a node is drawn as excited.
pub const SNAPSHOT_THRESHOLD: f64 = 0.04;
pub const DEFAULT_STEP_CAP: u64 = 100_000;
/// Upper end of the calibration bracket.
pub const PHI_CALIBRATION_MAX: f64 = 0.08;
/// Cooled excitability matching a 2.1 period ratio from `phi = 0.03` with
/// [`HeldSourceSetup::calibration`].
pub const CALIBRATED_PHI_HIGH: f64 = 0.0692578125;

/// Binarised activator field: 255 excited, 128 quiet, 0 outside the domain.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct Snapshot {
    pub iteration: u64,
    pub width: usize,
    pub height: usize,
    pub pixels: Vec<u8>,
}

pub fn render_snapshot(u: &ScalarField2D, mask: &Mask, threshold: f64, iteration: u64) -> Result<Snapshot> {
    if u.dims() != mask.dims() {
        return Err(Error::DimensionMismatch {
            expected: mask.dims(),
            got: u.dims(),
        });
    }
    let pixels = u
        .values()
        .iter()
        .zip(mask.in_domain_flags())
        .map(|(&x, &d)| match (d, x > threshold) {
            (false, _) => 0,
            (true, true) => 255,
            (true, false) => 128,
        })
        .collect();
    Ok(Snapshot {
        iteration,
        width: mask.width(),
        height: mask.height(),
        pixels,
    })
}

struct SnapshotRecorder<'a> {
    mask: &'a Mask,
    stride: u64,
    threshold: f64,
    frames: Vec<Snapshot>,
}

impl Observer for SnapshotRecorder<'_> {
    fn stride(&self) -> u64 {
        self.stride
    }

    fn observe(&mut self, state: &SimState) -> Result<()> {
        self.frames
            .push(render_snapshot(&state.u, self.mask, self.threshold, state.iteration)?);
        Ok(())
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct SnapshotSpec {
    pub stride: u64,
    pub threshold: f64,
}

impl Default for SnapshotSpec {
    fn default() -> Self {
        Self {
            stride: 150,
            threshold: SNAPSHOT_THRESHOLD,
        }
    }
}

/// How a trace is cut into analysis windows.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct SegmentAnalysis {
    /// Model time skipped at the start of every window.
    pub settle_time: f64,
    pub detector: DetectorConfig,
}

impl Default for SegmentAnalysis {
    fn default() -> Self {
        Self {
            settle_time: 30.0,
            detector: DetectorConfig::default(),
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SegmentStats {
    pub start_iteration: u64,
    pub end_iteration: u64,
    /// `phi` at the start of the segment.
    pub phi: f64,
    pub stats: PeriodStats,
    /// At least two full periods were detected.
    pub sufficient: bool,
}

#[derive(Clone, Debug, PartialEq)]
pub struct ScenarioResult {
    pub trace: PotentialTrace,
    pub snapshots: Vec<Snapshot>,
    pub stats: Vec<SegmentStats>,
    pub final_state: SimState,
    /// Serialized configuration that reproduces the run; filled by the caller
    /// that owns the configuration document.
    pub metadata: String,
}

/// Everything needed for one integration run.
#[derive(Clone, Debug)]
pub struct Scenario {
    pub mask: Mask,
    pub params: OregonatorParams,
    pub integrator: IntegratorConfig,
    pub electrodes: ElectrodePair,
    pub stimuli: Vec<StimulusSite>,
    pub schedule: PhiSchedule,
    pub n_steps: u64,
    pub record_stride: u64,
    pub snapshots: Option<SnapshotSpec>,
    /// Stop early once no node exceeds this activator level.
    pub stop_when_quiet: Option<f64>,
    pub analysis: SegmentAnalysis,
}

/// Steps between checks for a quiet medium.
const QUIET_CHECK_STRIDE: u64 = 150;

/// Starts from the homogeneous steady state at the schedule's initial `phi`,
/// applies the stimuli and integrates.
pub fn run_scenario(sc: &Scenario) -> Result<ScenarioResult> {
    sc.schedule.validate()?;
    if sc.record_stride == 0 {
        return Err(invalid("record_stride", "must be at least 1"));
    }
    let params = sc.params.with_phi(sc.schedule.phi_at(0));
    let mut state = SimState::quiescent(&sc.mask, &params)?;
    for site in &sc.stimuli {
        state = stimulate(state, site, &sc.mask)?;
    }
    let mut recorder = TraceRecorder::new(&sc.electrodes, &sc.mask, sc.record_stride, sc.integrator.dt, 0)?;
    let mut snaps = sc.snapshots.map(|s| SnapshotRecorder {
        mask: &sc.mask,
        stride: s.stride,
        threshold: s.threshold,
        frames: Vec::new(),
    });

    let chunk = if sc.stop_when_quiet.is_some() {
        QUIET_CHECK_STRIDE
    } else {
        sc.n_steps.max(1)
    };
    let mut done = 0;
    while done < sc.n_steps && !sc.schedule.terminated_at(state.iteration) {
        let n = chunk.min(sc.n_steps - done);
        let mut observers: Vec<&mut dyn Observer> = vec![&mut recorder];
        if let Some(s) = snaps.as_mut() {
            observers.push(s);
        }
        state = integrate(state, &params, &sc.integrator, &sc.mask, &sc.schedule, n, &mut observers)?;
        done += n;
        if let Some(level) = sc.stop_when_quiet {
            let active = state
                .u
                .values()
                .iter()
                .zip(sc.mask.in_domain_flags())
                .any(|(&u, &d)| d && u > level);
            if !active {
                break;
            }
        }
    }
    let trace = recorder.into_trace();
    let stats = segment_stats(&trace, &sc.schedule, state.iteration, &sc.analysis)?;
    Ok(ScenarioResult {
        trace,
        snapshots: snaps.map(|s| s.frames).unwrap_or_default(),
        stats,
        final_state: state,
        metadata: String::new(),
    })
}

/// Period statistics of each schedule segment, skipping the settle time.
pub fn segment_stats(
    trace: &PotentialTrace,
    schedule: &PhiSchedule,
    end_iteration: u64,
    analysis: &SegmentAnalysis,
) -> Result<Vec<SegmentStats>> {
    let dt = trace.dt;
    schedule
        .spans(end_iteration)
        .into_iter()
        .filter(|(a, b)| b > a)
        .map(|(a, b)| {
            let window = trace.window(a as f64 * dt + analysis.settle_time, b as f64 * dt);
            let stats = detect_periods_with(&window, &analysis.detector)?;
            Ok(SegmentStats {
                start_iteration: a,
                end_iteration: b,
                phi: schedule.phi_at(a),
                sufficient: stats.periods.len() >= 2,
                stats,
            })
        })
        .collect()
}

/// Spike-shape pin: two 50x40 rectangles in the northern half, 36 nodes apart,
/// scaled with the disc radius (exact at 185).
pub fn spike_electrodes(radius: usize) -> ElectrodePair {
    let scale = |n: usize| (n * radius + 92) / 185;
    let c = radius;
    let (half_gap, w, h, rise) = (scale(18), scale(50).max(1), scale(40).max(1), scale(45));
    let y0 = c - rise;
    ElectrodePair {
        e1: RectDomain {
            x0: c - half_gap - w,
            x1: c - half_gap - 1,
            y0,
            y1: y0 + h - 1,
        },
        e2: RectDomain {
            x0: c + half_gap + 1,
            x1: c + half_gap + w,
            y0,
            y1: y0 + h - 1,
        },
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct SpikeShapeConfig {
    pub radius: usize,
    pub electrodes: Option<ElectrodePair>,
    pub site_radius: usize,
    pub record_stride: u64,
    pub snapshots: Option<SnapshotSpec>,
    pub max_steps: u64,
    pub criteria: SpikeCriteria,
}

impl Default for SpikeShapeConfig {
    fn default() -> Self {
        Self {
            radius: 185,
            electrodes: None,
            site_radius: DEFAULT_SITE_RADIUS,
            record_stride: 10,
            snapshots: Some(SnapshotSpec::default()),
            max_steps: DEFAULT_STEP_CAP,
            criteria: SpikeCriteria::default(),
        }
    }
}

impl SpikeShapeConfig {
    pub fn electrodes(&self) -> ElectrodePair {
        self.electrodes.unwrap_or_else(|| spike_electrodes(self.radius))
    }

    pub fn scenario(&self, origin: Compass, params: &OregonatorParams, cfg: &IntegratorConfig) -> Result<Scenario> {
        let mask = make_disc_mask(self.radius)?;
        let mut site = edge_site(&mask, origin)?;
        site.radius = self.site_radius;
        Ok(Scenario {
            params: *params,
            integrator: *cfg,
            electrodes: self.electrodes(),
            stimuli: vec![site],
            schedule: PhiSchedule::constant(params.phi),
            n_steps: self.max_steps,
            record_stride: self.record_stride,
            snapshots: self.snapshots,
            stop_when_quiet: Some(SNAPSHOT_THRESHOLD),
            analysis: SegmentAnalysis::default(),
            mask,
        })
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct SpikeShapeOutcome {
    pub origin: Compass,
    pub shape: SpikeShape,
    pub result: ScenarioResult,
}

/// One wave from a boundary point of the disc, run until it has died out.
pub fn run_spike_shape(
    origin: Compass,
    params: &OregonatorParams,
    cfg: &IntegratorConfig,
    setup: &SpikeShapeConfig,
) -> Result<SpikeShapeOutcome> {
    let result = run_scenario(&setup.scenario(origin, params, cfg)?)?;
    let shape = classify_spike_with(&result.trace, &setup.criteria)?;
    Ok(SpikeShapeOutcome {
        origin,
        shape,
        result,
    })
}

/// Annulus with a held source, the arrangement used for sweeps, cooling
/// cycles and calibration.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct HeldSourceSetup {
    pub outer_radius: usize,
    pub inner_radius: usize,
    pub source: Compass,
    pub source_radius: usize,
    pub electrodes: Option<ElectrodePair>,
    pub record_stride: u64,
    /// Steps per constant-`phi` run.
    pub n_steps: u64,
    pub analysis: SegmentAnalysis,
}

impl Default for HeldSourceSetup {
    fn default() -> Self {
        Self {
            outer_radius: 185,
            inner_radius: 150,
            source: Compass::E,
            source_radius: 20,
            electrodes: None,
            record_stride: 10,
            n_steps: 90_000,
            analysis: SegmentAnalysis::default(),
        }
    }
}

/// Two 4x20 strips just inside the northern rim, 9 nodes apart.
pub fn ring_electrodes(outer_radius: usize) -> ElectrodePair {
    let c = outer_radius;
    let y0 = 8;
    ElectrodePair {
        e1: RectDomain {
            x0: c - 8,
            x1: c - 5,
            y0,
            y1: y0 + 19,
        },
        e2: RectDomain {
            x0: c + 5,
            x1: c + 8,
            y0,
            y1: y0 + 19,
        },
    }
}

impl HeldSourceSetup {
    /// Shorter runs used by the calibration search.
    pub fn calibration() -> Self {
        Self {
            n_steps: 60_000,
            analysis: SegmentAnalysis {
                settle_time: 25.0,
                ..SegmentAnalysis::default()
            },
            ..Self::default()
        }
    }

    pub fn electrodes(&self) -> ElectrodePair {
        self.electrodes.unwrap_or_else(|| ring_electrodes(self.outer_radius))
    }

    pub fn mask(&self) -> Result<Mask> {
        make_annulus_mask(self.outer_radius, self.inner_radius)
    }

    pub fn source_site(&self, mask: &Mask) -> Result<StimulusSite> {
        let mut site = edge_site(mask, self.source)?;
        site.radius = self.source_radius;
        site.mode = StimulusMode::HeldSource;
        Ok(site)
    }

    /// Constant-`phi` scenario at `params.phi`; sweeps and calibration replace
    /// the schedule.
    pub fn template(&self, params: &OregonatorParams, cfg: &IntegratorConfig) -> Result<Scenario> {
        let mask = self.mask()?;
        Ok(Scenario {
            params: *params,
            integrator: *cfg,
            electrodes: self.electrodes(),
            stimuli: vec![self.source_site(&mask)?],
            schedule: PhiSchedule::constant(params.phi),
            n_steps: self.n_steps,
            record_stride: self.record_stride,
            snapshots: None,
            stop_when_quiet: None,
            analysis: self.analysis,
            mask,
        })
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SweepPoint {
    pub phi: f64,
    pub stats: PeriodStats,
    /// Fewer than two events means no sustained oscillation.
    pub sustained: bool,
    /// Excited arcs crossing the mid-ring circle at the end of the run; absent
    /// unless the mask is an annulus.
    pub fronts: Option<usize>,
}

/// Number of excited arcs on the circle halfway between the annulus radii.
pub fn count_ring_fronts(u: &ScalarField2D, mask: &Mask, threshold: f64) -> Option<usize> {
    let Some(Shape::Annulus {
        outer_radius,
        inner_radius,
    }) = mask.shape()
    else {
        return None;
    };
    let c = outer_radius as f64;
    let r = 0.5 * (outer_radius + inner_radius) as f64;
    let n = 2048;
    let excited: Vec<bool> = (0..n)
        .map(|k| {
            let a = std::f64::consts::TAU * k as f64 / n as f64;
            let x = (c + r * a.cos()).round() as usize;
            let y = (c - r * a.sin()).round() as usize;
            u.get(x, y) > threshold
        })
        .collect();
    if excited.iter().all(|&e| e) {
        return Some(1);
    }
    Some((0..n).filter(|&k| excited[k] && !excited[(k + n - 1) % n]).count())
}

/// The template run at constant `phi` for its configured step count.
pub fn sweep_point(phi: f64, template: &Scenario) -> Result<(SweepPoint, ScenarioResult)> {
    let mut sc = template.clone();
    sc.params = sc.params.with_phi(phi);
    sc.schedule = PhiSchedule::constant(phi);
    let result = run_scenario(&sc)?;
    let stats = result
        .stats
        .first()
        .map(|s| s.stats.clone())
        .unwrap_or_else(|| PeriodStats::from_events(Vec::new()));
    let point = SweepPoint {
        phi,
        sustained: stats.n_events() >= 2,
        fronts: count_ring_fronts(&result.final_state.u, &sc.mask, SNAPSHOT_THRESHOLD),
        stats,
    };
    Ok((point, result))
}

/// Runs each `phi` independently (in parallel); results keep input order.
pub fn run_phi_sweep(phi_values: &[f64], template: &Scenario) -> Result<Vec<SweepPoint>> {
    phi_values
        .par_iter()
        .map(|&phi| sweep_point(phi, template).map(|(p, _)| p))
        .collect()
}

/// The template under a time-varying schedule, with statistics per segment.
pub fn run_cooling_cycle(schedule: &PhiSchedule, n_steps: u64, template: &Scenario) -> Result<ScenarioResult> {
    let mut sc = template.clone();
    sc.schedule = schedule.clone();
    sc.n_steps = n_steps;
    run_scenario(&sc)
}

/// Step schedule holding each `phi` for `segment_steps` iterations.
pub fn segment_schedule(phis: &[f64], segment_steps: u64) -> Result<PhiSchedule> {
    if segment_steps == 0 {
        return Err(invalid("segment_steps", "must be at least 1"));
    }
    let points: Vec<(u64, f64)> = phis
        .iter()
        .enumerate()
        .map(|(k, &phi)| (k as u64 * segment_steps, phi))
        .collect();
    PhiSchedule::steps(&points)
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Calibration {
    pub phi_low: f64,
    pub phi_high: f64,
    pub ratio: f64,
    pub target_ratio: f64,
    /// Every `(phi, mean period)` evaluated, in order.
    pub evaluations: Vec<(f64, Option<f64>)>,
}

const RATIO_TOLERANCE: f64 = 0.05;
const PHI_TOLERANCE: f64 = 1e-4;

/// Bisection on `phi_high` in `(phi_low, PHI_CALIBRATION_MAX]` until the
/// period ratio of constant-`phi` template runs is within 5% of the target or
/// the bracket is narrower than 1e-4. A `phi` without sustained oscillation
/// counts as an infinitely long period.
pub fn calibrate_phi_for_ratio(target_ratio: f64, phi_low: f64, template: &Scenario) -> Result<Calibration> {
    if !(target_ratio.is_finite() && target_ratio >= 1.0) {
        return Err(invalid("target_ratio", "must be at least 1"));
    }
    if !(0.0..PHI_CALIBRATION_MAX).contains(&phi_low) {
        return Err(invalid("phi_low", format!("must lie in [0, {PHI_CALIBRATION_MAX})")));
    }
    let mut evaluations = Vec::new();
    let mut period = |phi: f64| -> Result<Option<f64>> {
        let (point, _) = sweep_point(phi, template)?;
        let p = point.stats.mean_period.filter(|_| point.sustained);
        evaluations.push((phi, p));
        Ok(p)
    };
    let done = |phi_high: f64, ratio: f64, evaluations: Vec<(f64, Option<f64>)>| Calibration {
        phi_low,
        phi_high,
        ratio,
        target_ratio,
        evaluations,
    };
    if target_ratio == 1.0 {
        return Ok(done(phi_low, 1.0, evaluations));
    }
    let p_low = period(phi_low)?.ok_or_else(|| {
        Error::Insufficient(format!("no sustained oscillation at phi_low = {phi_low}"))
    })?;

    let (mut a, mut b) = (phi_low, PHI_CALIBRATION_MAX);
    let mut best_finite: f64 = 1.0;
    let mut closest: Option<(f64, f64)> = None;
    while b - a >= PHI_TOLERANCE {
        let m = 0.5 * (a + b);
        let r = period(m)?.map_or(f64::INFINITY, |p| p / p_low);
        if r.is_finite() {
            best_finite = best_finite.max(r);
            if closest.is_none_or(|(_, cr)| (r - target_ratio).abs() < (cr - target_ratio).abs()) {
                closest = Some((m, r));
            }
        }
        if (r / target_ratio - 1.0).abs() <= RATIO_TOLERANCE {
            return Ok(done(m, r, evaluations));
        }
        if r < target_ratio {
            a = m;
        } else {
            b = m;
        }
    }
    match closest {
        Some((phi, r)) if (r / target_ratio - 1.0).abs() <= RATIO_TOLERANCE => Ok(done(phi, r, evaluations)),
        _ => Err(Error::Unreachable {
            target: target_ratio,
            min: 1.0,
            max: best_finite,
        }),
    }
}
