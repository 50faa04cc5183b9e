//! Time-varying excitability programs and the thermal protocol that drives them.

use serde::{Deserialize, Serialize};

use crate::error::{invalid, Result};

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct PhiSegment {
    pub start: u64,
    pub phi: f64,
    /// Interpolate linearly towards the next segment's `phi`.
    #[serde(default)]
    pub ramp: bool,
}

/// Piecewise `phi` as a function of iteration.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct PhiSchedule {
    segments: Vec<PhiSegment>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    terminate_at: Option<u64>,
}

impl PhiSchedule {
    pub fn new(segments: Vec<PhiSegment>) -> Result<Self> {
        let s = Self {
            segments,
            terminate_at: None,
        };
        s.validate()?;
        Ok(s)
    }

    pub fn constant(phi: f64) -> Self {
        Self {
            segments: vec![PhiSegment {
                start: 0,
                phi,
                ramp: false,
            }],
            terminate_at: None,
        }
    }

    /// Step changes at the given iterations; the first entry must start at 0.
    pub fn steps(points: &[(u64, f64)]) -> Result<Self> {
        Self::new(
            points
                .iter()
                .map(|&(start, phi)| PhiSegment {
                    start,
                    phi,
                    ramp: false,
                })
                .collect(),
        )
    }

    pub fn with_termination(mut self, iteration: u64) -> Self {
        self.terminate_at = Some(iteration);
        self
    }

    pub fn validate(&self) -> Result<()> {
        let first = self
            .segments
            .first()
            .ok_or_else(|| invalid("schedule", "needs at least one segment"))?;
        if first.start != 0 {
            return Err(invalid("schedule", "first segment must start at iteration 0"));
        }
        if self.segments.windows(2).any(|w| w[1].start <= w[0].start) {
            return Err(invalid("schedule", "segment starts must strictly increase"));
        }
        if let Some(bad) = self
            .segments
            .iter()
            .find(|s| !(s.phi.is_finite() && s.phi >= 0.0))
        {
            return Err(invalid("schedule", format!("phi {} is negative", bad.phi)));
        }
        Ok(())
    }

    pub fn segments(&self) -> &[PhiSegment] {
        &self.segments
    }

    pub fn terminate_at(&self) -> Option<u64> {
        self.terminate_at
    }

    pub fn terminated_at(&self, iteration: u64) -> bool {
        self.terminate_at.is_some_and(|t| iteration >= t)
    }

    fn segment_index(&self, iteration: u64) -> usize {
        self.segments.partition_point(|s| s.start <= iteration) - 1
    }

    pub fn phi_at(&self, iteration: u64) -> f64 {
        let k = self.segment_index(iteration);
        let seg = &self.segments[k];
        match self.segments.get(k + 1) {
            Some(next) if seg.ramp => {
                let frac = (iteration - seg.start) as f64 / (next.start - seg.start) as f64;
                seg.phi + (next.phi - seg.phi) * frac
            }
            _ => seg.phi,
        }
    }

    /// `[start, end)` iteration spans of each segment, the last one closed by `end`.
    pub fn spans(&self, end: u64) -> Vec<(u64, u64)> {
        let end = self.terminate_at.map_or(end, |t| t.min(end));
        self.segments
            .iter()
            .enumerate()
            .map(|(k, s)| {
                let stop = self.segments.get(k + 1).map_or(end, |n| n.start.min(end));
                (s.start.min(end), stop)
            })
            .collect()
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum ThermalEvent {
    PowerOn,
    PowerOff,
    /// End of the recording.
    Terminate,
}

/// Linear cooling and warming between ambient and target temperature, with
/// `phi` interpolated affinely in temperature.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct ThermalModel {
    /// Degrees Celsius.
    pub t_ambient: f64,
    pub t_target: f64,
    /// Degrees per second, negative.
    pub cooling_rate: f64,
    /// Degrees per second, positive.
    pub warming_rate: f64,
    pub phi_at_ambient: f64,
    pub phi_at_target: f64,
    /// Wall-clock seconds represented by one unit of model time.
    pub seconds_per_model_time: f64,
}

impl Default for ThermalModel {
    fn default() -> Self {
        Self {
            t_ambient: 20.0,
            t_target: -1.0,
            cooling_rate: -0.1,
            warming_rate: 0.05,
            phi_at_ambient: 0.03,
            phi_at_target: crate::experiments::CALIBRATED_PHI_HIGH,
            seconds_per_model_time: 10.0,
        }
    }
}

impl ThermalModel {
    pub fn validate(&self) -> Result<()> {
        if !(self.cooling_rate < 0.0) {
            return Err(invalid("cooling_rate", "must be negative"));
        }
        if !(self.warming_rate > 0.0) {
            return Err(invalid("warming_rate", "must be positive"));
        }
        if !(self.t_target < self.t_ambient) {
            return Err(invalid("t_target", "must be below t_ambient"));
        }
        if !(self.phi_at_target >= self.phi_at_ambient && self.phi_at_ambient >= 0.0) {
            return Err(invalid("phi_at_target", "must be >= phi_at_ambient >= 0"));
        }
        if !(self.seconds_per_model_time > 0.0) {
            return Err(invalid("seconds_per_model_time", "must be positive"));
        }
        Ok(())
    }

    pub fn phi_at_temperature(&self, t: f64) -> f64 {
        let frac = (self.t_ambient - t) / (self.t_ambient - self.t_target);
        self.phi_at_ambient + (self.phi_at_target - self.phi_at_ambient) * frac.clamp(0.0, 1.0)
    }
}

fn check_events(events: &[(f64, ThermalEvent)]) -> Result<()> {
    if events.iter().any(|(t, _)| !(t.is_finite() && *t >= 0.0)) {
        return Err(invalid("events", "event times must be finite and non-negative"));
    }
    if events.windows(2).any(|w| w[1].0 < w[0].0) {
        return Err(invalid("events", "events must be time-ordered"));
    }
    Ok(())
}

/// Temperature at `time` seconds. The marble starts at ambient; power-on cools
/// at `cooling_rate`, power-off warms at `warming_rate`, clamped to the
/// `[t_target, t_ambient]` band.
pub fn temperature_at(model: &ThermalModel, events: &[(f64, ThermalEvent)], time: f64) -> f64 {
    let mut temp = model.t_ambient;
    let mut rate = 0.0;
    let mut last = 0.0;
    for &(t, ev) in events {
        if t > time {
            break;
        }
        temp = (temp + rate * (t - last)).clamp(model.t_target, model.t_ambient);
        last = t;
        match ev {
            ThermalEvent::PowerOn => rate = model.cooling_rate,
            ThermalEvent::PowerOff => rate = model.warming_rate,
            ThermalEvent::Terminate => {}
        }
    }
    (temp + rate * (time - last)).clamp(model.t_target, model.t_ambient)
}

/// Discretises the thermal protocol into a one-second-resolution `phi`
/// schedule. Consecutive equal values are merged.
pub fn thermal_to_schedule(
    model: &ThermalModel,
    events: &[(f64, ThermalEvent)],
    dt: f64,
) -> Result<PhiSchedule> {
    model.validate()?;
    check_events(events)?;
    if !(dt > 0.0) {
        return Err(invalid("dt", "must be positive"));
    }
    let to_iteration = |seconds: f64| (seconds / model.seconds_per_model_time / dt).round() as u64;

    // Past the last event the temperature settles within the longest leg.
    let span = model.t_ambient - model.t_target;
    let settle = span / -model.cooling_rate + span / model.warming_rate;
    let horizon = events.last().map_or(0.0, |(t, _)| *t + settle).ceil() as u64;

    let mut segments: Vec<PhiSegment> = Vec::new();
    for second in 0..=horizon {
        let phi = model.phi_at_temperature(temperature_at(model, events, second as f64));
        let start = to_iteration(second as f64);
        match segments.last() {
            Some(prev) if prev.phi == phi => {}
            Some(prev) if prev.start == start => {
                segments.last_mut().unwrap().phi = phi;
            }
            _ => segments.push(PhiSegment {
                start,
                phi,
                ramp: false,
            }),
        }
    }
    let mut schedule = PhiSchedule::new(segments)?;
    if let Some((t, _)) = events.iter().find(|(_, e)| *e == ThermalEvent::Terminate) {
        schedule = schedule.with_termination(to_iteration(*t));
    }
    Ok(schedule)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn schedule_validation() {
        assert!(PhiSchedule::steps(&[]).is_err());
        assert!(PhiSchedule::steps(&[(5, 0.05)]).is_err());
        assert!(PhiSchedule::steps(&[(0, 0.05), (0, 0.06)]).is_err());
        assert!(PhiSchedule::steps(&[(0, -0.01)]).is_err());
        assert!(PhiSchedule::steps(&[(0, 0.05), (10, 0.06)]).is_ok());
    }

    #[test]
    fn phi_lookup_with_ramp() {
        let s = PhiSchedule::new(vec![
            PhiSegment {
                start: 0,
                phi: 0.02,
                ramp: false,
            },
            PhiSegment {
                start: 100,
                phi: 0.02,
                ramp: true,
            },
            PhiSegment {
                start: 200,
                phi: 0.06,
                ramp: false,
            },
        ])
        .unwrap();
        assert_eq!(s.phi_at(0), 0.02);
        assert_eq!(s.phi_at(99), 0.02);
        assert!((s.phi_at(150) - 0.04).abs() < 1e-15);
        assert_eq!(s.phi_at(200), 0.06);
        assert_eq!(s.phi_at(10_000), 0.06);
        assert_eq!(s.spans(300), vec![(0, 100), (100, 200), (200, 300)]);
    }

    #[test]
    fn no_events_is_constant() {
        let m = ThermalModel::default();
        let s = thermal_to_schedule(&m, &[], 0.001).unwrap();
        assert_eq!(s.segments().len(), 1);
        assert_eq!(s.phi_at(123_456), m.phi_at_ambient);
    }

    #[test]
    fn cooling_reaches_target_after_210_seconds() {
        let m = ThermalModel::default();
        let ev = [(0.0, ThermalEvent::PowerOn)];
        assert!((temperature_at(&m, &ev, 209.0) - (-0.9)).abs() < 1e-9);
        assert_eq!(temperature_at(&m, &ev, 210.0), -1.0);
        assert_eq!(temperature_at(&m, &ev, 500.0), -1.0);
        let s = thermal_to_schedule(&m, &ev, 0.001).unwrap();
        // 1 s = 100 iterations with 10 s per model time unit.
        assert_eq!(s.phi_at(21_000), m.phi_at_target);
        assert!(s.phi_at(20_900) < m.phi_at_target);
    }

    #[test]
    fn warming_is_half_as_steep() {
        let m = ThermalModel::default();
        let ev = [(0.0, ThermalEvent::PowerOn), (300.0, ThermalEvent::PowerOff)];
        let cool = temperature_at(&m, &ev, 10.0) - temperature_at(&m, &ev, 0.0);
        let warm = temperature_at(&m, &ev, 310.0) - temperature_at(&m, &ev, 300.0);
        assert!((warm + cool / 2.0).abs() < 1e-12, "cool {cool} warm {warm}");
        assert_eq!(temperature_at(&m, &ev, 300.0 + 420.0), m.t_ambient);
    }

    #[test]
    fn unordered_events_rejected() {
        let m = ThermalModel::default();
        let ev = [(10.0, ThermalEvent::PowerOn), (5.0, ThermalEvent::PowerOff)];
        assert!(thermal_to_schedule(&m, &ev, 0.001).is_err());
    }

    #[test]
    fn terminate_event_truncates() {
        let m = ThermalModel::default();
        let ev = [(0.0, ThermalEvent::PowerOn), (50.0, ThermalEvent::Terminate)];
        let s = thermal_to_schedule(&m, &ev, 0.001).unwrap();
        assert_eq!(s.terminate_at(), Some(5_000));
        assert!(s.terminated_at(5_000));
    }
}
