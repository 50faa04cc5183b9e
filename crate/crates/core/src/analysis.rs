//! Period extraction, spike morphology and period-versus-excitability fits.

use nalgebra::{DMatrix, DVector};
use serde::{Deserialize, Serialize};

use crate::error::{invalid, Error, Result};
use crate::measurement::PotentialTrace;

/// Hysteresis levels for the crossing detector.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "mode", rename_all = "kebab-case", deny_unknown_fields)]
pub enum Thresholds {
    Absolute { hi: f64, lo: f64 },
    /// Fractions of the peak-to-baseline amplitude, baseline being the median.
    Relative { hi: f64, lo: f64 },
}

impl Default for Thresholds {
    fn default() -> Self {
        Thresholds::Relative { hi: 0.4, lo: 0.1 }
    }
}

#[derive(Clone, Copy, Debug, Default, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct DetectorConfig {
    pub thresholds: Thresholds,
    /// Moving-median window (samples) subtracted before detection.
    pub detrend_window: Option<usize>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct PeriodStats {
    pub event_times: Vec<f64>,
    pub periods: Vec<f64>,
    pub mean_period: Option<f64>,
    pub sigma: Option<f64>,
    pub frequency: Option<f64>,
}

impl PeriodStats {
    pub fn from_events(event_times: Vec<f64>) -> Self {
        let periods: Vec<f64> = event_times.windows(2).map(|w| w[1] - w[0]).collect();
        let (mean_period, sigma) = if periods.is_empty() {
            (None, None)
        } else {
            let n = periods.len() as f64;
            let mean = periods.iter().sum::<f64>() / n;
            let sigma = if periods.len() > 1 {
                (periods.iter().map(|p| (p - mean).powi(2)).sum::<f64>() / (n - 1.0)).sqrt()
            } else {
                0.0
            };
            (Some(mean), Some(sigma))
        };
        Self {
            event_times,
            periods,
            mean_period,
            sigma,
            frequency: mean_period.filter(|&m| m > 0.0).map(|m| 1.0 / m),
        }
    }

    pub fn n_events(&self) -> usize {
        self.event_times.len()
    }
}

fn check_finite(samples: &[f64]) -> Result<()> {
    if samples.iter().any(|s| !s.is_finite()) {
        return Err(Error::NonFinite("trace samples"));
    }
    Ok(())
}

/// Schmitt-trigger events: the first sample above `hi` after the signal has
/// been below `lo`. The detector starts disarmed.
fn schmitt_events(trace: &PotentialTrace, samples: &[f64], hi: f64, lo: f64) -> Vec<f64> {
    let mut armed = false;
    let mut events = Vec::new();
    for (k, &s) in samples.iter().enumerate() {
        if armed && s > hi {
            events.push(trace.time(k));
            armed = false;
        } else if s < lo {
            armed = true;
        }
    }
    events
}

/// Absolute-threshold detector.
pub fn detect_periods(trace: &PotentialTrace, threshold_hi: f64, threshold_lo: f64) -> Result<PeriodStats> {
    detect_periods_with(
        trace,
        &DetectorConfig {
            thresholds: Thresholds::Absolute {
                hi: threshold_hi,
                lo: threshold_lo,
            },
            detrend_window: None,
        },
    )
}

pub fn detect_periods_with(trace: &PotentialTrace, cfg: &DetectorConfig) -> Result<PeriodStats> {
    check_finite(&trace.samples)?;
    let detrended;
    let samples: &[f64] = match cfg.detrend_window {
        Some(w) => {
            detrended = detrend_moving_median(&trace.samples, w)?;
            &detrended
        }
        None => &trace.samples,
    };
    let (hi, lo) = match cfg.thresholds {
        Thresholds::Absolute { hi, lo } => {
            if !(hi.is_finite() && lo.is_finite()) {
                return Err(Error::NonFinite("detector thresholds"));
            }
            if hi <= lo {
                return Err(invalid("thresholds", "hi must exceed lo"));
            }
            (hi, lo)
        }
        Thresholds::Relative { hi, lo } => {
            if !(hi > lo && lo >= 0.0 && hi <= 1.0) {
                return Err(invalid("thresholds", "relative levels need 0 <= lo < hi <= 1"));
            }
            if samples.is_empty() {
                return Ok(PeriodStats::from_events(Vec::new()));
            }
            let base = lower_median(samples);
            let peak = samples.iter().copied().fold(f64::NEG_INFINITY, f64::max);
            let amp = peak - base;
            if amp <= 0.0 {
                return Ok(PeriodStats::from_events(Vec::new()));
            }
            (base + hi * amp, base + lo * amp)
        }
    };
    Ok(PeriodStats::from_events(schmitt_events(trace, samples, hi, lo)))
}

fn lower_median(samples: &[f64]) -> f64 {
    let mut s = samples.to_vec();
    s.sort_by(f64::total_cmp);
    s[(s.len() - 1) / 2]
}

/// Subtracts a centred moving median (window clipped at the ends).
pub fn detrend_moving_median(samples: &[f64], window: usize) -> Result<Vec<f64>> {
    if window == 0 {
        return Err(invalid("detrend_window", "must be at least 1"));
    }
    check_finite(samples)?;
    let half = window / 2;
    let mut buf = Vec::with_capacity(window);
    Ok(samples
        .iter()
        .enumerate()
        .map(|(k, &s)| {
            let a = k.saturating_sub(half);
            let b = (k + window - half).min(samples.len());
            buf.clear();
            buf.extend_from_slice(&samples[a..b]);
            s - lower_median(&buf)
        })
        .collect())
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum SpikeClass {
    Flat,
    /// A single lobe beyond the noise band.
    Monophasic,
    Biphasic,
    ActionLike,
}

impl std::fmt::Display for SpikeClass {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(match self {
            SpikeClass::Flat => "flat",
            SpikeClass::Monophasic => "monophasic",
            SpikeClass::Biphasic => "biphasic",
            SpikeClass::ActionLike => "action-like",
        })
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct SpikeCriteria {
    pub noise_band: f64,
    /// A lobe's extent is where it exceeds this fraction of its own extremum.
    pub lobe_fraction: f64,
    /// Largest gap between lobes, relative to the narrower lobe, that still
    /// counts as an immediate undershoot.
    pub max_adjacent_gap: f64,
}

impl Default for SpikeCriteria {
    fn default() -> Self {
        Self {
            noise_band: 1e-3,
            lobe_fraction: 0.1,
            max_adjacent_gap: 0.25,
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct SpikeShape {
    pub classification: SpikeClass,
    pub peak: f64,
    pub trough: f64,
    /// Trough time minus peak time.
    pub peak_to_trough_interval: f64,
    /// Gap between the lobes divided by the narrower lobe's width; absent
    /// unless both lobes are present.
    pub gap_ratio: Option<f64>,
}

#[derive(Clone, Copy, Debug)]
struct Lobe {
    start: usize,
    end: usize,
}

fn lobe_around(samples: &[f64], center: usize, level: f64, sign: f64) -> Lobe {
    let above = |k: usize| sign * samples[k] > level;
    let mut start = center;
    while start > 0 && above(start - 1) {
        start -= 1;
    }
    let mut end = center;
    while end + 1 < samples.len() && above(end + 1) {
        end += 1;
    }
    Lobe { start, end }
}

pub fn classify_spike(window: &PotentialTrace, noise_band: f64) -> Result<SpikeShape> {
    classify_spike_with(
        window,
        &SpikeCriteria {
            noise_band,
            ..SpikeCriteria::default()
        },
    )
}

pub fn classify_spike_with(window: &PotentialTrace, c: &SpikeCriteria) -> Result<SpikeShape> {
    let s = &window.samples;
    if s.is_empty() {
        return Err(Error::Insufficient("empty spike window".into()));
    }
    check_finite(s)?;
    if !(c.noise_band >= 0.0 && c.lobe_fraction > 0.0 && c.lobe_fraction < 1.0 && c.max_adjacent_gap >= 0.0) {
        return Err(invalid("spike criteria", "need noise_band >= 0, 0 < lobe_fraction < 1"));
    }
    let (mut ip, mut it) = (0, 0);
    for (k, &x) in s.iter().enumerate() {
        if x > s[ip] {
            ip = k;
        }
        if x < s[it] {
            it = k;
        }
    }
    let (peak, trough) = (s[ip], s[it]);
    let mut shape = SpikeShape {
        classification: SpikeClass::Flat,
        peak,
        trough,
        peak_to_trough_interval: window.time(it) - window.time(ip),
        gap_ratio: None,
    };
    let pos = peak > c.noise_band;
    let neg = -trough > c.noise_band;
    shape.classification = match (pos, neg) {
        (false, false) => SpikeClass::Flat,
        (true, false) | (false, true) => SpikeClass::Monophasic,
        (true, true) => {
            let lp = lobe_around(s, ip, c.noise_band.max(c.lobe_fraction * peak), 1.0);
            let ln = lobe_around(s, it, c.noise_band.max(c.lobe_fraction * -trough), -1.0);
            let (first, second, positive_first) = if lp.start < ln.start {
                (lp, ln, true)
            } else {
                (ln, lp, false)
            };
            let gap = second.start.saturating_sub(first.end + 1) as f64;
            let width = |l: Lobe| (l.end - l.start + 1) as f64;
            let ratio = gap / width(first).min(width(second));
            shape.gap_ratio = Some(ratio);
            if positive_first && peak >= -trough && ratio <= c.max_adjacent_gap {
                SpikeClass::ActionLike
            } else {
                SpikeClass::Biphasic
            }
        }
    };
    Ok(shape)
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SegmentFit {
    /// `[a0, a1]` for `a0 + a1 x`.
    pub linear_coeffs: [f64; 2],
    pub linear_r2: f64,
    /// `[c0, c1, c2, c3]` for `c0 + c1 x + c2 x^2 + c3 x^3`.
    pub cubic_coeffs: [f64; 4],
    pub cubic_r2: f64,
    pub n_points: usize,
}

fn r_squared(ys: &[f64], rss: f64) -> f64 {
    let mean = ys.iter().sum::<f64>() / ys.len() as f64;
    let tss: f64 = ys.iter().map(|y| (y - mean).powi(2)).sum();
    if tss == 0.0 {
        return if rss == 0.0 { 1.0 } else { 0.0 };
    }
    (1.0 - rss / tss).clamp(0.0, 1.0)
}

fn eval_poly(c: &[f64], x: f64) -> f64 {
    c.iter().rev().fold(0.0, |acc, &a| acc * x + a)
}

fn rss(c: &[f64], xs: &[f64], ys: &[f64]) -> f64 {
    xs.iter().zip(ys).map(|(&x, &y)| (y - eval_poly(c, x)).powi(2)).sum()
}

/// Least-squares polynomial of the given degree, minimum-norm when the
/// points underdetermine it. Fitted on standardised abscissae for conditioning.
fn polyfit(xs: &[f64], ys: &[f64], degree: usize) -> Vec<f64> {
    let n = xs.len();
    let center = xs.iter().sum::<f64>() / n as f64;
    let spread = xs.iter().map(|x| (x - center).abs()).fold(0.0, f64::max);
    let scale = if spread > 0.0 { spread } else { 1.0 };
    let a = DMatrix::from_fn(n, degree + 1, |i, j| ((xs[i] - center) / scale).powi(j as i32));
    let b = DVector::from_column_slice(ys);
    let z = a
        .svd(true, true)
        .solve(&b, 1e-12)
        .expect("both singular-vector sets were requested");
    // Expand sum_j z_j ((x - center)/scale)^j back into powers of x.
    let mut out = vec![0.0; degree + 1];
    for (j, &zj) in z.iter().enumerate() {
        let k = zj / scale.powi(j as i32);
        let mut binom = 1.0;
        for (m, o) in out.iter_mut().enumerate().take(j + 1) {
            *o += k * binom * (-center).powi((j - m) as i32);
            binom = binom * (j - m) as f64 / (m + 1) as f64;
        }
    }
    out
}

fn fit_segment(points: &[(f64, f64)]) -> SegmentFit {
    let xs: Vec<f64> = points.iter().map(|p| p.0).collect();
    let ys: Vec<f64> = points.iter().map(|p| p.1).collect();
    let lin = polyfit(&xs, &ys, 1);
    let lin_rss = rss(&lin, &xs, &ys);
    let mut cub = polyfit(&xs, &ys, 3);
    let mut cub_rss = rss(&cub, &xs, &ys);
    // The linear model is a cubic too; never report the larger residual.
    if cub_rss > lin_rss {
        cub = vec![lin[0], lin[1], 0.0, 0.0];
        cub_rss = lin_rss;
    }
    SegmentFit {
        linear_coeffs: [lin[0], lin[1]],
        linear_r2: r_squared(&ys, lin_rss),
        cubic_coeffs: [cub[0], cub[1], cub[2], cub[3]],
        cubic_r2: r_squared(&ys, cub_rss),
        n_points: points.len(),
    }
}

/// Fits the points with `φ <= split` and those with `φ >= split` separately.
pub fn fit_period_curve(points: &[(f64, f64)], split: f64) -> Result<(SegmentFit, SegmentFit)> {
    if points.iter().any(|(x, y)| !x.is_finite() || !y.is_finite()) || !split.is_finite() {
        return Err(Error::NonFinite("fit points"));
    }
    let low: Vec<_> = points.iter().copied().filter(|p| p.0 <= split).collect();
    let high: Vec<_> = points.iter().copied().filter(|p| p.0 >= split).collect();
    if low.len() < 2 || high.len() < 2 {
        return Err(Error::Insufficient(format!(
            "{} points at or below split {split} and {} at or above; need 2 each",
            low.len(),
            high.len()
        )));
    }
    Ok((fit_segment(&low), fit_segment(&high)))
}

pub fn period_ratio(before: &PeriodStats, after: &PeriodStats) -> Result<f64> {
    match (before.mean_period, after.mean_period) {
        (Some(b), Some(a)) if b > 0.0 => Ok(a / b),
        (Some(_), Some(_)) => Err(invalid("period_ratio", "reference period is not positive")),
        _ => Err(Error::Insufficient("period ratio needs two mean periods".into())),
    }
}
