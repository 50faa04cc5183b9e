//! Trace CSV, sweep and segment tables, and binary graymap snapshots.

use std::fmt::Write as _;
use std::fs;
use std::io::Write as _;
use std::path::Path;

use crate::analysis::PeriodStats;
use crate::error::{invalid, Error, Result};
use crate::experiments::{render_snapshot, SegmentStats, Snapshot, SweepPoint};
use crate::field::ScalarField2D;
use crate::geometry::Mask;
use crate::measurement::PotentialTrace;

fn io_err(path: &Path) -> impl FnOnce(std::io::Error) -> Error + '_ {
    move |source| Error::Io {
        path: path.to_path_buf(),
        source,
    }
}

pub fn write_bytes(path: &Path, bytes: &[u8]) -> Result<()> {
    fs::write(path, bytes).map_err(io_err(path))
}

fn opt(x: Option<f64>) -> String {
    x.map(|v| v.to_string()).unwrap_or_default()
}

/// `time,potential` rows; `{}` formatting of `f64` is shortest round-trip.
pub fn trace_csv(trace: &PotentialTrace) -> String {
    let mut out = String::from("time,potential\n");
    for (k, s) in trace.samples.iter().enumerate() {
        let _ = writeln!(out, "{},{}", trace.time(k), s);
    }
    out
}

pub fn write_trace_csv(trace: &PotentialTrace, path: &Path) -> Result<()> {
    write_bytes(path, trace_csv(trace).as_bytes())
}

/// Relative deviation from the first sample spacing tolerated on import.
const SPACING_TOLERANCE: f64 = 1e-6;

/// Reads a two-column CSV with a header row (time, value). Times must be
/// increasing and evenly spaced.
pub fn read_trace_csv(path: &Path) -> Result<PotentialTrace> {
    let csv_err = |message: String| Error::Csv {
        path: path.to_path_buf(),
        message,
    };
    let mut reader = csv::ReaderBuilder::new()
        .has_headers(true)
        .trim(csv::Trim::All)
        .from_path(path)
        .map_err(|e| match e.into_kind() {
            csv::ErrorKind::Io(source) => Error::Io {
                path: path.to_path_buf(),
                source,
            },
            other => csv_err(format!("{other:?}")),
        })?;
    let mut times = Vec::new();
    let mut samples = Vec::new();
    for (k, row) in reader.records().enumerate() {
        let row = row.map_err(|e| csv_err(e.to_string()))?;
        if row.len() < 2 {
            return Err(csv_err(format!("row {} has {} columns, need 2", k + 2, row.len())));
        }
        let num = |i: usize| -> Result<f64> {
            let v: f64 = row[i]
                .parse()
                .map_err(|_| csv_err(format!("row {}: `{}` is not a number", k + 2, &row[i])))?;
            if v.is_finite() {
                Ok(v)
            } else {
                Err(csv_err(format!("row {}: non-finite value", k + 2)))
            }
        };
        times.push(num(0)?);
        samples.push(num(1)?);
    }
    let (start_time, spacing) = match times.as_slice() {
        [] => (0.0, 1.0),
        [t] => (*t, 1.0),
        [t0, t1, ..] => (*t0, t1 - t0),
    };
    if !(spacing > 0.0) {
        return Err(csv_err("times must increase".into()));
    }
    for (k, t) in times.iter().enumerate() {
        let expected = start_time + k as f64 * spacing;
        if (t - expected).abs() > SPACING_TOLERANCE * spacing.max(t.abs()) {
            return Err(csv_err(format!(
                "row {}: time {t} breaks the uniform spacing {spacing}",
                k + 2
            )));
        }
    }
    Ok(PotentialTrace {
        record_stride: 1,
        dt: spacing,
        start_time,
        samples,
    })
}

/// Binary PGM (`P5`, maxval 255).
pub fn pgm_bytes(s: &Snapshot) -> Vec<u8> {
    let mut out = format!("P5\n{} {}\n255\n", s.width, s.height).into_bytes();
    out.extend_from_slice(&s.pixels);
    out
}

pub fn write_pgm(s: &Snapshot, path: &Path) -> Result<()> {
    write_bytes(path, &pgm_bytes(s))
}

/// 255 where in-domain and `u > threshold`, 128 elsewhere in the domain,
/// 0 outside.
pub fn write_snapshot(u: &ScalarField2D, mask: &Mask, threshold: f64, path: &Path) -> Result<()> {
    write_pgm(&render_snapshot(u, mask, threshold, 0)?, path)
}

/// Splits a PGM written by [`pgm_bytes`] back into dimensions and pixels.
pub fn parse_pgm(bytes: &[u8]) -> Result<(usize, usize, Vec<u8>)> {
    let bad = || invalid("pgm", "not a P5 graymap with maxval 255");
    let mut fields = Vec::new();
    let mut pos = 0;
    while fields.len() < 4 {
        while pos < bytes.len() && bytes[pos].is_ascii_whitespace() {
            pos += 1;
        }
        let start = pos;
        while pos < bytes.len() && !bytes[pos].is_ascii_whitespace() {
            pos += 1;
        }
        if start == pos {
            return Err(bad());
        }
        fields.push(std::str::from_utf8(&bytes[start..pos]).map_err(|_| bad())?.to_string());
    }
    let w: usize = fields[1].parse().map_err(|_| bad())?;
    let h: usize = fields[2].parse().map_err(|_| bad())?;
    if fields[0] != "P5" || fields[3] != "255" || bytes.len() != pos + 1 + w * h {
        return Err(bad());
    }
    Ok((w, h, bytes[pos + 1..].to_vec()))
}

pub fn sweep_table(points: &[SweepPoint]) -> String {
    let mut out = String::from("phi,mean_period,sigma,n_events\n");
    for p in points {
        let _ = writeln!(
            out,
            "{},{},{},{}",
            p.phi,
            opt(p.stats.mean_period),
            opt(p.stats.sigma),
            p.stats.n_events()
        );
    }
    out
}

pub fn segment_table(segments: &[SegmentStats]) -> String {
    let mut out =
        String::from("start_iteration,end_iteration,phi,mean_period,sigma,n_events,sufficient\n");
    for s in segments {
        let _ = writeln!(
            out,
            "{},{},{},{},{},{},{}",
            s.start_iteration,
            s.end_iteration,
            s.phi,
            opt(s.stats.mean_period),
            opt(s.stats.sigma),
            s.stats.n_events(),
            s.sufficient
        );
    }
    out
}

pub fn period_stats_csv(stats: &PeriodStats) -> String {
    format!(
        "mean_period,sigma,frequency,n_events\n{},{},{},{}\n",
        opt(stats.mean_period),
        opt(stats.sigma),
        opt(stats.frequency),
        stats.n_events()
    )
}

pub fn write_text(path: &Path, text: &str) -> Result<()> {
    let mut f = fs::File::create(path).map_err(io_err(path))?;
    f.write_all(text.as_bytes()).map_err(io_err(path))
}
