//! Declarative run configuration in TOML.
//!
//! Every omitted key is filled with its default during [`parse_config`], so
//! the echo written next to a run's outputs is complete and re-parses to an
//! equal configuration.

use std::path::PathBuf;

use serde::{Deserialize, Serialize};

use crate::analysis::{DetectorConfig, SpikeCriteria};
use crate::dynamics::{IntegratorConfig, OregonatorParams};
use crate::error::{Error, Result};
use crate::experiments::{
    ring_electrodes, segment_schedule, spike_electrodes, HeldSourceSetup, Scenario,
    SegmentAnalysis, SnapshotSpec, SpikeShapeConfig, CALIBRATED_PHI_HIGH, DEFAULT_STEP_CAP,
    SNAPSHOT_THRESHOLD,
};
use crate::geometry::{edge_site, Compass, Mask, Shape, StimulusMode, StimulusSite, DEFAULT_SITE_RADIUS};
use crate::measurement::ElectrodePair;
use crate::schedule::{thermal_to_schedule, PhiSchedule, ThermalEvent, ThermalModel};

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum ScenarioKind {
    Run,
    SpikeShape,
    SweepPhi,
    CoolingCycle,
    Calibrate,
}

impl ScenarioKind {
    fn held_source(self) -> bool {
        matches!(self, Self::SweepPhi | Self::CoolingCycle | Self::Calibrate)
    }

    pub fn name(self) -> &'static str {
        match self {
            Self::Run => "run",
            Self::SpikeShape => "spike-shape",
            Self::SweepPhi => "sweep-phi",
            Self::CoolingCycle => "cooling-cycle",
            Self::Calibrate => "calibrate",
        }
    }
}

/// Signed radii so that negative values reach validation with a key name.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(tag = "shape", rename_all = "kebab-case", deny_unknown_fields)]
pub enum GeometryConfig {
    Disc { radius: i64 },
    Annulus { outer_radius: i64, inner_radius: i64 },
}

impl GeometryConfig {
    pub fn shape(&self) -> Result<Shape> {
        let positive = |key: &str, r: i64| -> Result<usize> {
            if r > 0 {
                Ok(r as usize)
            } else {
                Err(config_invalid(&format!("geometry.{key}"), format!("must be positive, got {r}")))
            }
        };
        match *self {
            GeometryConfig::Disc { radius } => Ok(Shape::Disc {
                radius: positive("radius", radius)?,
            }),
            GeometryConfig::Annulus {
                outer_radius,
                inner_radius,
            } => {
                let outer = positive("outer_radius", outer_radius)?;
                let inner = positive("inner_radius", inner_radius)?;
                if inner >= outer {
                    return Err(config_invalid("geometry.inner_radius", "must be below outer_radius"));
                }
                Ok(Shape::Annulus {
                    outer_radius: outer,
                    inner_radius: inner,
                })
            }
        }
    }
}

/// A stimulation site given either by compass point on the rim or by centre.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct StimulusConfig {
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub site: Option<Compass>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub center: Option<(usize, usize)>,
    #[serde(default = "default_site_radius")]
    pub radius: usize,
    #[serde(default)]
    pub mode: StimulusMode,
}

fn default_site_radius() -> usize {
    DEFAULT_SITE_RADIUS
}

impl StimulusConfig {
    pub fn resolve(&self, mask: &Mask, key: &str) -> Result<StimulusSite> {
        let center = match (self.site, self.center) {
            (Some(c), None) => edge_site(mask, c)?.center,
            (None, Some(c)) => c,
            _ => return Err(config_invalid(key, "give exactly one of `site` or `center`")),
        };
        if center.0 >= mask.width() || center.1 >= mask.height() {
            return Err(config_invalid(&format!("{key}.center"), "outside the lattice"));
        }
        Ok(StimulusSite {
            center,
            radius: self.radius,
            mode: self.mode,
        })
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ThermalEventConfig {
    /// Seconds from the start of the recording.
    pub time: f64,
    pub event: ThermalEvent,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ThermalConfig {
    #[serde(default)]
    pub model: ThermalModel,
    #[serde(default)]
    pub events: Vec<ThermalEventConfig>,
}

impl ThermalConfig {
    pub fn schedule(&self, dt: f64) -> Result<PhiSchedule> {
        let events: Vec<(f64, ThermalEvent)> = self.events.iter().map(|e| (e.time, e.event)).collect();
        thermal_to_schedule(&self.model, &events, dt)
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct SweepConfig {
    pub phi_values: Vec<f64>,
}

impl Default for SweepConfig {
    fn default() -> Self {
        Self {
            phi_values: vec![0.01, 0.02, 0.03, 0.04, 0.05, 0.06, 0.07],
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct CoolingConfig {
    /// One constant-`phi` segment per entry, used when no explicit schedule
    /// or thermal protocol is given.
    pub phis: Vec<f64>,
    pub segment_steps: u64,
}

impl Default for CoolingConfig {
    fn default() -> Self {
        Self {
            phis: vec![0.03, CALIBRATED_PHI_HIGH, 0.03],
            segment_steps: 80_000,
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct CalibrationConfig {
    pub target_ratio: f64,
    pub phi_low: f64,
}

impl Default for CalibrationConfig {
    fn default() -> Self {
        Self {
            target_ratio: 2.1,
            phi_low: 0.03,
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RunConfig {
    pub scenario: ScenarioKind,
    /// Spike-shape origin; all of S, E and NE when omitted.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub origin: Option<Compass>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub output_dir: Option<PathBuf>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub n_steps: Option<u64>,
    #[serde(default = "default_record_stride")]
    pub record_stride: u64,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub snapshot_stride: Option<u64>,
    #[serde(default = "default_snapshot_threshold")]
    pub snapshot_threshold: f64,
    #[serde(default)]
    pub params: OregonatorParams,
    #[serde(default)]
    pub integrator: IntegratorConfig,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub geometry: Option<GeometryConfig>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub electrodes: Option<ElectrodePair>,
    #[serde(default)]
    pub stimuli: Vec<StimulusConfig>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub schedule: Option<PhiSchedule>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub thermal: Option<ThermalConfig>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub analysis: Option<SegmentAnalysis>,
    #[serde(default)]
    pub spike: SpikeCriteria,
    #[serde(default)]
    pub sweep: SweepConfig,
    #[serde(default)]
    pub cooling: CoolingConfig,
    #[serde(default)]
    pub calibration: CalibrationConfig,
}

fn default_record_stride() -> u64 {
    10
}

fn default_snapshot_threshold() -> f64 {
    SNAPSHOT_THRESHOLD
}

fn config_invalid(key: &str, reason: impl Into<String>) -> Error {
    Error::ConfigInvalid {
        key: key.to_string(),
        reason: reason.into(),
    }
}

/// Re-labels a parameter error with the section it came from.
fn in_section(section: &str, e: Error) -> Error {
    match e {
        Error::InvalidParameter { name, reason } => config_invalid(&format!("{section}.{name}"), reason),
        other => other,
    }
}

fn line_column(text: &str, offset: usize) -> (usize, usize) {
    let before = &text[..offset.min(text.len())];
    let line = before.matches('\n').count() + 1;
    let column = before.rsplit('\n').next().map_or(0, |l| l.chars().count()) + 1;
    (line, column)
}

/// Parses, fills scenario defaults and validates.
pub fn parse_config(text: &str) -> Result<RunConfig> {
    let raw: RunConfig = toml::from_str(text).map_err(|e| {
        let (line, column) = e.span().map_or((0, 0), |s| line_column(text, s.start));
        Error::ConfigParse {
            line,
            column,
            message: e.message().to_string(),
        }
    })?;
    raw.resolved()
}

/// Like [`parse_config`], with `key=value` overrides applied to the document
/// first. Keys are dotted paths (`params.phi`, `calibration.target_ratio`);
/// values are TOML literals, and anything that does not parse as one is taken
/// as a bare string (`origin=NE`).
pub fn parse_config_with(text: &str, overrides: &[(String, String)]) -> Result<RunConfig> {
    let mut doc: toml::Table = toml::from_str(text).map_err(|e| {
        let (line, column) = e.span().map_or((0, 0), |s| line_column(text, s.start));
        Error::ConfigParse {
            line,
            column,
            message: e.message().to_string(),
        }
    })?;
    for (key, value) in overrides {
        let value = toml::from_str::<toml::Table>(&format!("v = {value}"))
            .ok()
            .and_then(|mut t| t.remove("v"))
            .unwrap_or_else(|| toml::Value::String(value.clone()));
        let mut parts: Vec<&str> = key.split('.').collect();
        let last = parts.pop().filter(|k| !k.is_empty()).ok_or_else(|| config_invalid(key, "empty key"))?;
        let mut table = &mut doc;
        for part in parts {
            let entry = table
                .entry(part.to_string())
                .or_insert_with(|| toml::Value::Table(toml::Table::new()));
            table = entry
                .as_table_mut()
                .ok_or_else(|| config_invalid(key, format!("`{part}` is not a table")))?;
        }
        table.insert(last.to_string(), value);
    }
    let raw: RunConfig = RunConfig::deserialize(doc).map_err(|e| Error::ConfigParse {
        line: 0,
        column: 0,
        message: e.message().to_string(),
    })?;
    raw.resolved()
}

impl RunConfig {
    /// Configuration with every default filled for `kind`.
    pub fn defaults_for(kind: ScenarioKind) -> Result<Self> {
        parse_config(&format!("scenario = \"{}\"\n", kind.name()))
    }

    pub fn to_toml(&self) -> String {
        toml::to_string(self).expect("run configs always serialize")
    }

    /// Fills scenario-dependent defaults, then validates.
    pub fn resolved(mut self) -> Result<Self> {
        let kind = self.scenario;
        let geometry = *self.geometry.get_or_insert(if kind.held_source() {
            GeometryConfig::Annulus {
                outer_radius: 185,
                inner_radius: 150,
            }
        } else {
            GeometryConfig::Disc { radius: 185 }
        });
        let outer = geometry.shape()?.outer_radius();
        if self.electrodes.is_none() {
            self.electrodes = Some(match kind {
                ScenarioKind::SpikeShape => spike_electrodes(outer),
                ScenarioKind::Run => ElectrodePair::default_for_disc(outer),
                _ => ring_electrodes(outer),
            });
        }
        if kind.held_source() && self.stimuli.is_empty() {
            let h = HeldSourceSetup::default();
            self.stimuli.push(StimulusConfig {
                site: Some(h.source),
                center: None,
                radius: h.source_radius,
                mode: StimulusMode::HeldSource,
            });
        }
        if kind == ScenarioKind::SpikeShape && self.snapshot_stride.is_none() {
            self.snapshot_stride = Some(SnapshotSpec::default().stride);
        }
        if self.analysis.is_none() {
            self.analysis = Some(match kind {
                ScenarioKind::Calibrate => HeldSourceSetup::calibration().analysis,
                _ => SegmentAnalysis::default(),
            });
        }
        if kind == ScenarioKind::CoolingCycle && self.schedule.is_none() {
            self.schedule = Some(match &self.thermal {
                Some(t) => t.schedule(self.integrator.dt).map_err(|e| in_section("thermal", e))?,
                None => segment_schedule(&self.cooling.phis, self.cooling.segment_steps)
                    .map_err(|e| in_section("cooling", e))?,
            });
        }
        if kind == ScenarioKind::Run && self.schedule.is_none() {
            self.schedule = Some(PhiSchedule::constant(self.params.phi));
        }
        if self.n_steps.is_none() {
            self.n_steps = Some(match kind {
                ScenarioKind::Run => 10_000,
                ScenarioKind::SpikeShape => DEFAULT_STEP_CAP,
                ScenarioKind::SweepPhi => HeldSourceSetup::default().n_steps,
                ScenarioKind::Calibrate => HeldSourceSetup::calibration().n_steps,
                ScenarioKind::CoolingCycle => {
                    let s = self.schedule.as_ref().expect("filled above");
                    let last = s.segments().last().map_or(0, |seg| seg.start);
                    s.terminate_at().unwrap_or(last + self.cooling.segment_steps)
                }
            });
        }
        self.validate()?;
        Ok(self)
    }

    pub fn validate(&self) -> Result<()> {
        self.params.validate().map_err(|e| in_section("params", e))?;
        self.integrator.validate().map_err(|e| in_section("integrator", e))?;
        if self.record_stride == 0 {
            return Err(config_invalid("record_stride", "must be at least 1"));
        }
        if self.snapshot_stride == Some(0) {
            return Err(config_invalid("snapshot_stride", "must be at least 1"));
        }
        if !self.snapshot_threshold.is_finite() {
            return Err(config_invalid("snapshot_threshold", "must be finite"));
        }
        let mask = self.mask()?;
        if let Some(e) = &self.electrodes {
            e.resolve(&mask).map_err(|err| config_invalid("electrodes", err.to_string()))?;
        }
        if self.scenario == ScenarioKind::SpikeShape && !self.stimuli.is_empty() {
            return Err(config_invalid("stimuli", "spike-shape places its own stimulus; use `origin`"));
        }
        for (k, s) in self.stimuli.iter().enumerate() {
            s.resolve(&mask, &format!("stimuli[{k}]"))?;
        }
        if let Some(s) = &self.schedule {
            s.validate().map_err(|e| in_section("schedule", e))?;
        }
        if self.sweep.phi_values.iter().any(|p| !(p.is_finite() && *p >= 0.0)) {
            return Err(config_invalid("sweep.phi_values", "values must be non-negative"));
        }
        if !(self.calibration.target_ratio >= 1.0) {
            return Err(config_invalid("calibration.target_ratio", "must be at least 1"));
        }
        if !(self.calibration.phi_low >= 0.0) {
            return Err(config_invalid("calibration.phi_low", "must be non-negative"));
        }
        Ok(())
    }

    pub fn shape(&self) -> Result<Shape> {
        self.geometry
            .ok_or_else(|| config_invalid("geometry", "unresolved"))?
            .shape()
    }

    pub fn mask(&self) -> Result<Mask> {
        self.shape()?.build()
    }

    pub fn analysis(&self) -> SegmentAnalysis {
        self.analysis.unwrap_or_default()
    }

    pub fn detector(&self) -> DetectorConfig {
        self.analysis().detector
    }

    /// Scenario for `run`, and the constant-`phi` template for the
    /// held-source experiments.
    pub fn scenario(&self) -> Result<Scenario> {
        let mask = self.mask()?;
        let stimuli = self
            .stimuli
            .iter()
            .enumerate()
            .map(|(k, s)| s.resolve(&mask, &format!("stimuli[{k}]")))
            .collect::<Result<Vec<_>>>()?;
        Ok(Scenario {
            params: self.params,
            integrator: self.integrator,
            electrodes: self.electrodes.ok_or_else(|| config_invalid("electrodes", "unresolved"))?,
            stimuli,
            schedule: self
                .schedule
                .clone()
                .unwrap_or_else(|| PhiSchedule::constant(self.params.phi)),
            n_steps: self.n_steps.unwrap_or(0),
            record_stride: self.record_stride,
            snapshots: self.snapshot_stride.map(|stride| SnapshotSpec {
                stride,
                threshold: self.snapshot_threshold,
            }),
            stop_when_quiet: None,
            analysis: self.analysis(),
            mask,
        })
    }

    pub fn spike_setup(&self) -> Result<SpikeShapeConfig> {
        let Shape::Disc { radius } = self.shape()? else {
            return Err(config_invalid("geometry.shape", "spike-shape runs need a disc"));
        };
        Ok(SpikeShapeConfig {
            radius,
            electrodes: self.electrodes,
            site_radius: DEFAULT_SITE_RADIUS,
            record_stride: self.record_stride,
            snapshots: self.snapshot_stride.map(|stride| SnapshotSpec {
                stride,
                threshold: self.snapshot_threshold,
            }),
            max_steps: self.n_steps.unwrap_or(DEFAULT_STEP_CAP),
            criteria: self.spike,
        })
    }

    pub fn origins(&self) -> Vec<Compass> {
        self.origin
            .map_or_else(|| vec![Compass::S, Compass::E, Compass::NE], |o| vec![o])
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn minimal_spike_config_gets_defaults() {
        let c = parse_config("scenario = \"spike-shape\"\norigin = \"NE\"\n").unwrap();
        assert_eq!(c.params.epsilon, 0.02);
        assert_eq!(c.params.f, 1.4);
        assert_eq!(c.params.q, 0.002);
        assert_eq!(c.integrator.dt, 0.001);
        assert_eq!(c.integrator.dx, 0.25);
        assert_eq!(c.geometry, Some(GeometryConfig::Disc { radius: 185 }));
        assert_eq!(c.origins(), vec![Compass::NE]);
        assert_eq!(c.snapshot_stride, Some(150));
        assert_eq!(c.electrodes, Some(spike_electrodes(185)));
    }

    #[test]
    fn negative_radius_names_the_key() {
        let err = parse_config("scenario = \"run\"\n[geometry]\nshape = \"disc\"\nradius = -5\n").unwrap_err();
        match err {
            Error::ConfigInvalid { key, .. } => assert_eq!(key, "geometry.radius"),
            other => panic!("{other:?}"),
        }
    }

    #[test]
    fn unknown_keys_are_parse_errors_with_position() {
        let err = parse_config("scenario = \"run\"\n[params]\nepsilonn = 0.02\n").unwrap_err();
        match err {
            Error::ConfigParse { line, column, message } => {
                assert_eq!(line, 3, "{message}");
                assert_eq!(column, 1);
                assert!(message.contains("epsilonn"), "{message}");
            }
            other => panic!("{other:?}"),
        }
        assert!(parse_config("scenario = \"warp\"\n").is_err());
        assert!(parse_config("scenario = \"run\"\nrecord_stride = 0\n").is_err());
    }

    #[test]
    fn overrides_apply_before_defaults() {
        let set = |k: &str, v: &str| (k.to_string(), v.to_string());
        let c = parse_config_with(
            "scenario = \"run\"\n[params]\nphi = 0.03\n",
            &[
                set("scenario", "spike-shape"),
                set("origin", "E"),
                set("geometry.shape", "disc"),
                set("geometry.radius", "60"),
                set("params.phi", "0.04"),
            ],
        )
        .unwrap();
        assert_eq!(c.scenario, ScenarioKind::SpikeShape);
        assert_eq!(c.origin, Some(Compass::E));
        assert_eq!(c.params.phi, 0.04);
        assert_eq!(c.electrodes, Some(spike_electrodes(60)));

        let err = parse_config_with("scenario = \"run\"\n", &[set("params.phii", "1")]).unwrap_err();
        assert!(matches!(err, Error::ConfigParse { .. }), "{err:?}");
        assert!(parse_config_with("scenario = \"run\"\n", &[set("params.phi.x", "1")]).is_err());
    }

    #[test]
    fn echo_round_trips_for_every_kind() {
        for kind in [
            ScenarioKind::Run,
            ScenarioKind::SpikeShape,
            ScenarioKind::SweepPhi,
            ScenarioKind::CoolingCycle,
            ScenarioKind::Calibrate,
        ] {
            let c = RunConfig::defaults_for(kind).unwrap();
            let echo = c.to_toml();
            assert_eq!(parse_config(&echo).unwrap(), c, "{echo}");
        }
    }

    #[test]
    fn thermal_protocol_builds_the_cooling_schedule() {
        let text = r#"
scenario = "cooling-cycle"
[thermal]
events = [{ time = 0.0, event = "power-on" }, { time = 300.0, event = "power-off" }, { time = 900.0, event = "terminate" }]
"#;
        let c = parse_config(text).unwrap();
        let s = c.schedule.as_ref().unwrap();
        assert_eq!(s.terminate_at(), Some(90_000));
        assert_eq!(c.n_steps, Some(90_000));
        assert_eq!(parse_config(&c.to_toml()).unwrap(), c);
    }

    #[test]
    fn stimulus_needs_one_location() {
        let text = "scenario = \"run\"\n[[stimuli]]\nradius = 3\n";
        assert!(matches!(parse_config(text), Err(Error::ConfigInvalid { .. })));
        let text = "scenario = \"run\"\n[[stimuli]]\nsite = \"E\"\nmode = \"held-source\"\n";
        let c = parse_config(text).unwrap();
        let sc = c.scenario().unwrap();
        assert_eq!(sc.stimuli[0].center, (370, 185));
        assert_eq!(sc.stimuli[0].mode, StimulusMode::HeldSource);
    }
}
