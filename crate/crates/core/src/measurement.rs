//! Virtual electrodes: the potential is the summed activator under the second
//! rectangle minus the summed activator under the first.

use serde::{Deserialize, Serialize};

use crate::dynamics::{Observer, SimState};
use crate::error::{invalid, Error, Result};
use crate::geometry::{Mask, RectDomain};

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ElectrodePair {
    pub e1: RectDomain,
    pub e2: RectDomain,
}

impl ElectrodePair {
    pub fn new(e1: RectDomain, e2: RectDomain) -> Result<Self> {
        let pair = Self { e1, e2 };
        pair.check_disjoint()?;
        Ok(pair)
    }

    fn check_disjoint(&self) -> Result<()> {
        self.e1.check_order()?;
        self.e2.check_order()?;
        if self.e1.intersects(&self.e2) {
            return Err(invalid("electrodes", "e1 and e2 overlap"));
        }
        Ok(())
    }

    /// Two vertical 6x40 strips in the northern half, mirror images of each
    /// other, 40 nodes apart.
    pub fn default_for_disc(radius: usize) -> Self {
        let c = radius;
        let (half_gap, w, h) = (20, 6, 40);
        let y0 = c.saturating_sub(radius * 2 / 3);
        Self {
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

    pub fn swapped(&self) -> Self {
        Self {
            e1: self.e2,
            e2: self.e1,
        }
    }

    pub fn mirrored_x(&self, width: usize) -> Self {
        Self {
            e1: self.e1.mirrored_x(width),
            e2: self.e2.mirrored_x(width),
        }
    }

    /// Resolves both rectangles to their in-domain node lists.
    pub fn resolve(&self, mask: &Mask) -> Result<ResolvedElectrodes> {
        self.check_disjoint()?;
        let nodes = |name: &str, r: &RectDomain| -> Result<Vec<usize>> {
            if !r.within(mask.width(), mask.height()) {
                return Err(invalid(
                    name,
                    format!("{r} exceeds the {}x{} lattice", mask.width(), mask.height()),
                ));
            }
            let n = r.domain_nodes(mask);
            if n.is_empty() {
                return Err(Error::OutsideDomain {
                    what: format!("electrode {name} {r}"),
                });
            }
            Ok(n)
        };
        Ok(ResolvedElectrodes {
            e1: nodes("e1", &self.e1)?,
            e2: nodes("e2", &self.e2)?,
        })
    }
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub struct ResolvedElectrodes {
    e1: Vec<usize>,
    e2: Vec<usize>,
}

impl ResolvedElectrodes {
    #[inline]
    pub fn potential(&self, u: &[f64]) -> f64 {
        let sum = |nodes: &[usize]| nodes.iter().map(|&i| u[i]).sum::<f64>();
        sum(&self.e2) - sum(&self.e1)
    }

    pub fn counts(&self) -> (usize, usize) {
        (self.e1.len(), self.e2.len())
    }
}

pub fn measure_potential(state: &SimState, electrodes: &ElectrodePair, mask: &Mask) -> Result<f64> {
    if state.u.dims() != mask.dims() {
        return Err(Error::DimensionMismatch {
            expected: mask.dims(),
            got: state.u.dims(),
        });
    }
    Ok(electrodes.resolve(mask)?.potential(state.u.values()))
}

/// Evenly sampled potential signal. Sample `k` sits at
/// `start_time + k * record_stride * dt`.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct PotentialTrace {
    pub record_stride: u64,
    pub dt: f64,
    pub start_time: f64,
    pub samples: Vec<f64>,
}

impl PotentialTrace {
    pub fn new(record_stride: u64, dt: f64, start_time: f64) -> Self {
        Self {
            record_stride,
            dt,
            start_time,
            samples: Vec::new(),
        }
    }

    /// Trace of a simulation recorded after each `record_stride`-th step.
    pub fn for_simulation(record_stride: u64, dt: f64, first_iteration: u64) -> Self {
        Self::new(record_stride, dt, first_iteration as f64 * dt)
    }

    pub fn spacing(&self) -> f64 {
        self.record_stride as f64 * self.dt
    }

    pub fn time(&self, k: usize) -> f64 {
        self.start_time + k as f64 * self.spacing()
    }

    pub fn len(&self) -> usize {
        self.samples.len()
    }

    pub fn is_empty(&self) -> bool {
        self.samples.is_empty()
    }

    /// Samples whose time lies in `[t0, t1)`, as a trace of its own.
    pub fn window(&self, t0: f64, t1: f64) -> PotentialTrace {
        let h = self.spacing();
        let first = ((t0 - self.start_time) / h).ceil().max(0.0) as usize;
        let last = (((t1 - self.start_time) / h).ceil().max(0.0) as usize).min(self.len());
        let first = first.min(last);
        PotentialTrace {
            record_stride: self.record_stride,
            dt: self.dt,
            start_time: self.time(first),
            samples: self.samples[first..last].to_vec(),
        }
    }

    pub fn peak_abs(&self) -> f64 {
        self.samples.iter().fold(0.0, |m, s| m.max(s.abs()))
    }
}

/// Appends one potential sample for the current state.
pub fn record(
    trace: &mut PotentialTrace,
    state: &SimState,
    electrodes: &ResolvedElectrodes,
) {
    trace.samples.push(electrodes.potential(state.u.values()));
}

/// Observer that records the electrode potential every `record_stride` steps.
pub struct TraceRecorder {
    electrodes: ResolvedElectrodes,
    trace: PotentialTrace,
}

impl TraceRecorder {
    pub fn new(
        electrodes: &ElectrodePair,
        mask: &Mask,
        record_stride: u64,
        dt: f64,
        start_iteration: u64,
    ) -> Result<Self> {
        if record_stride == 0 {
            return Err(invalid("record_stride", "must be at least 1"));
        }
        // First sample lands on the first multiple of the stride after the start.
        let first = (start_iteration / record_stride + 1) * record_stride;
        Ok(Self {
            electrodes: electrodes.resolve(mask)?,
            trace: PotentialTrace::for_simulation(record_stride, dt, first),
        })
    }

    pub fn trace(&self) -> &PotentialTrace {
        &self.trace
    }

    pub fn into_trace(self) -> PotentialTrace {
        self.trace
    }
}

impl Observer for TraceRecorder {
    fn stride(&self) -> u64 {
        self.trace.record_stride
    }

    fn observe(&mut self, state: &SimState) -> Result<()> {
        record(&mut self.trace, state, &self.electrodes);
        Ok(())
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::dynamics::{integrate, IntegratorConfig, OregonatorParams};
    use crate::geometry::make_disc_mask;
    use crate::schedule::PhiSchedule;

    fn rect(x0: usize, y0: usize, x1: usize, y1: usize) -> RectDomain {
        RectDomain::new(x0, y0, x1, y1).unwrap()
    }

    #[test]
    fn default_electrodes_are_symmetric() {
        let m = make_disc_mask(185).unwrap();
        let e = ElectrodePair::default_for_disc(185);
        assert_eq!(e.mirrored_x(m.width()), e.swapped());
        let r = e.resolve(&m).unwrap();
        assert_eq!(r.counts(), (240, 240));
    }

    #[test]
    fn uniform_field_reads_zero_and_swap_negates() {
        let m = make_disc_mask(30).unwrap();
        let e = ElectrodePair::new(rect(10, 10, 13, 20), rect(17, 10, 20, 20)).unwrap();
        let s = SimState::uniform(&m, 0.4, 0.0).unwrap();
        assert_eq!(measure_potential(&s, &e, &m).unwrap(), 0.0);

        let mut s = s;
        s.u.set(18, 12, 0.9);
        s.u.set(11, 15, 0.123);
        let p = measure_potential(&s, &e, &m).unwrap();
        assert!(p > 0.0);
        assert_eq!(measure_potential(&s, &e.swapped(), &m).unwrap(), -p);
    }

    #[test]
    fn overlapping_or_outside_rejected() {
        assert!(ElectrodePair::new(rect(0, 0, 5, 5), rect(5, 5, 8, 8)).is_err());
        let m = make_disc_mask(10).unwrap();
        let s = SimState::uniform(&m, 0.0, 0.0).unwrap();
        let corner = ElectrodePair::new(rect(0, 0, 1, 1), rect(9, 9, 11, 11)).unwrap();
        assert!(matches!(
            measure_potential(&s, &corner, &m),
            Err(Error::OutsideDomain { .. })
        ));
        let off = ElectrodePair::new(rect(8, 8, 9, 9), rect(15, 15, 30, 30)).unwrap();
        assert!(measure_potential(&s, &off, &m).is_err());
    }

    #[test]
    fn recorder_sample_counts() {
        let m = make_disc_mask(12).unwrap();
        let p = OregonatorParams::default();
        let cfg = IntegratorConfig::default();
        let e = ElectrodePair::new(rect(5, 5, 7, 9), rect(15, 5, 17, 9)).unwrap();
        let s = SimState::quiescent(&m, &p).unwrap();
        for (stride, steps, expected) in [(1, 40, 40), (150, 450, 3), (7, 20, 2)] {
            let mut rec = TraceRecorder::new(&e, &m, stride, cfg.dt, 0).unwrap();
            integrate(
                s.clone(),
                &p,
                &cfg,
                &m,
                &PhiSchedule::constant(p.phi),
                steps,
                &mut [&mut rec],
            )
            .unwrap();
            assert_eq!(rec.trace().len(), expected);
            assert_eq!(rec.trace().time(0), stride as f64 * cfg.dt);
        }
    }

    #[test]
    fn window_selects_by_time() {
        let t = PotentialTrace {
            record_stride: 10,
            dt: 0.1,
            start_time: 1.0,
            samples: (0..10).map(f64::from).collect(),
        };
        let w = t.window(2.0, 4.0);
        assert_eq!(w.samples, vec![1.0, 2.0]);
        assert_eq!(w.start_time, 2.0);
        assert!(t.window(50.0, 60.0).is_empty());
    }
}
