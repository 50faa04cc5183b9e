//! `bzlm`: runs the Oregonator experiments and analyses potential traces.

use std::fmt::Write as _;
use std::fs;
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use anyhow::{bail, Context, Result};
use bzlm_core::analysis::{detect_periods_with, fit_period_curve, period_ratio, DetectorConfig, Thresholds};
use bzlm_core::experiments::{calibrate_phi_for_ratio, run_cooling_cycle, run_phi_sweep, run_scenario, run_spike_shape, ScenarioResult};
use bzlm_core::io::{period_stats_csv, read_trace_csv, segment_table, sweep_table, write_pgm, write_text, write_trace_csv};
use bzlm_core::{parse_config_with, RunConfig, ScenarioKind};
use clap::{Args, Parser, Subcommand};

#[derive(Parser)]
#[command(name = "bzlm", version, about = "Oregonator simulations of a Belousov-Zhabotinsky disc and ring")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Run whatever scenario the config file names.
    Run(Common),
    /// One wave from each origin; traces, snapshots and classifications.
    SpikeShapes {
        #[command(flatten)]
        common: Common,
        /// Single origin instead of S, E and NE.
        #[arg(long)]
        origin: Option<String>,
    },
    /// Oscillation period for each `phi` on the ring.
    SweepPhi {
        #[command(flatten)]
        common: Common,
        /// Comma-separated `phi` values.
        #[arg(long, value_delimiter = ',')]
        phi: Vec<f64>,
    },
    /// Piecewise-constant `phi` protocol with per-segment periods.
    CoolingCycle {
        #[command(flatten)]
        common: Common,
        /// Comma-separated `phi` per segment.
        #[arg(long, value_delimiter = ',')]
        phis: Vec<f64>,
        #[arg(long)]
        segment_steps: Option<u64>,
    },
    /// Search the high `phi` giving a target period ratio.
    Calibrate {
        #[command(flatten)]
        common: Common,
        #[arg(long)]
        target: Option<f64>,
        #[arg(long)]
        phi_low: Option<f64>,
    },
    /// Period statistics of a `time,value` CSV, printed as CSV.
    Analyze {
        trace: PathBuf,
        /// Absolute upper threshold; needs --lo. Relative 0.4/0.1 otherwise.
        #[arg(long, requires = "lo", allow_hyphen_values = true)]
        hi: Option<f64>,
        #[arg(long, requires = "hi", allow_hyphen_values = true)]
        lo: Option<f64>,
        /// Subtract a moving median of this many samples first.
        #[arg(long)]
        detrend: Option<usize>,
    },
}

#[derive(Args)]
struct Common {
    /// TOML run configuration; defaults for the subcommand when omitted.
    #[arg(long)]
    config: Option<PathBuf>,
    /// Output directory (overrides `output_dir`; `out` if neither is set).
    #[arg(long)]
    out: Option<PathBuf>,
    /// Step count (`n_steps`).
    #[arg(long)]
    steps: Option<u64>,
    /// Any config key, e.g. `--set params.phi=0.04`. Repeatable.
    #[arg(long = "set", value_name = "KEY=VALUE")]
    set: Vec<String>,
}

type Overrides = Vec<(String, String)>;

fn list(xs: &[f64]) -> String {
    let items: Vec<String> = xs.iter().map(|x| format!("{x:?}")).collect();
    format!("[{}]", items.join(", "))
}

fn load(common: &Common, kind: Option<ScenarioKind>, mut extra: Overrides) -> Result<(RunConfig, PathBuf)> {
    let text = match &common.config {
        Some(path) => fs::read_to_string(path).with_context(|| format!("reading {}", path.display()))?,
        None => match kind {
            Some(k) => format!("scenario = \"{}\"\n", k.name()),
            None => bail!("`run` needs --config"),
        },
    };
    let mut overrides: Overrides = Vec::new();
    if let Some(k) = kind {
        overrides.push(("scenario".into(), format!("\"{}\"", k.name())));
    }
    if let Some(n) = common.steps {
        overrides.push(("n_steps".into(), n.to_string()));
    }
    overrides.append(&mut extra);
    for kv in &common.set {
        let (k, v) = kv.split_once('=').with_context(|| format!("--set expects KEY=VALUE, got `{kv}`"))?;
        overrides.push((k.trim().to_string(), v.trim().to_string()));
    }
    let cfg = parse_config_with(&text, &overrides).with_context(|| match &common.config {
        Some(p) => format!("config {}", p.display()),
        None => "config".to_string(),
    })?;
    let out = common
        .out
        .clone()
        .or_else(|| cfg.output_dir.clone())
        .unwrap_or_else(|| PathBuf::from("out"));
    fs::create_dir_all(&out).with_context(|| format!("creating {}", out.display()))?;
    write_text(&out.join("config.toml"), &cfg.to_toml())?;
    Ok((cfg, out))
}

fn write_snapshots(result: &ScenarioResult, dir: &Path) -> Result<()> {
    if result.snapshots.is_empty() {
        return Ok(());
    }
    fs::create_dir_all(dir).with_context(|| format!("creating {}", dir.display()))?;
    for s in &result.snapshots {
        write_pgm(s, &dir.join(format!("u_{:08}.pgm", s.iteration)))?;
    }
    Ok(())
}

fn execute(cfg: &RunConfig, out: &Path) -> Result<()> {
    match cfg.scenario {
        ScenarioKind::Run => {
            let result = run_scenario(&cfg.scenario()?)?;
            write_trace_csv(&result.trace, &out.join("trace.csv"))?;
            write_snapshots(&result, &out.join("snapshots"))?;
            let table = segment_table(&result.stats);
            write_text(&out.join("segments.csv"), &table)?;
            print!("{table}");
        }
        ScenarioKind::SpikeShape => {
            let setup = cfg.spike_setup()?;
            let mut summary = String::from("origin,classification,peak,trough,peak_to_trough_interval,gap_ratio\n");
            for origin in cfg.origins() {
                let r = run_spike_shape(origin, &cfg.params, &cfg.integrator, &setup)?;
                let name = format!("{origin:?}");
                write_trace_csv(&r.result.trace, &out.join(format!("trace_{name}.csv")))?;
                write_snapshots(&r.result, &out.join(format!("snapshots_{name}")))?;
                let s = &r.shape;
                let gap = s.gap_ratio.map(|g| g.to_string()).unwrap_or_default();
                let _ = writeln!(
                    summary,
                    "{name},{},{},{},{},{gap}",
                    s.classification, s.peak, s.trough, s.peak_to_trough_interval
                );
                println!(
                    "{name}: {} (peak {:.4}, trough {:.4})",
                    s.classification, s.peak, s.trough
                );
            }
            write_text(&out.join("spike_shapes.csv"), &summary)?;
        }
        ScenarioKind::SweepPhi => {
            let points = run_phi_sweep(&cfg.sweep.phi_values, &cfg.scenario()?)?;
            let table = sweep_table(&points);
            write_text(&out.join("sweep.csv"), &table)?;
            print!("{table}");
            let curve: Vec<(f64, f64)> = points
                .iter()
                .filter_map(|p| p.stats.mean_period.filter(|_| p.sustained).map(|m| (p.phi, m)))
                .collect();
            if let Ok((low, high)) = fit_period_curve(&curve, 0.05) {
                eprintln!(
                    "fit: linear r2 {:.4} for phi <= 0.05, cubic r2 {:.4} for phi >= 0.05",
                    low.linear_r2, high.cubic_r2
                );
            }
        }
        ScenarioKind::CoolingCycle => {
            let sc = cfg.scenario()?;
            let result = run_cooling_cycle(&sc.schedule, sc.n_steps, &sc)?;
            write_trace_csv(&result.trace, &out.join("trace.csv"))?;
            write_snapshots(&result, &out.join("snapshots"))?;
            let table = segment_table(&result.stats);
            write_text(&out.join("segments.csv"), &table)?;
            print!("{table}");
            for w in result.stats.windows(2) {
                if let Ok(r) = period_ratio(&w[0].stats, &w[1].stats) {
                    eprintln!("period ratio phi {} -> {}: {r:.4}", w[0].phi, w[1].phi);
                }
            }
        }
        ScenarioKind::Calibrate => {
            let c = cfg.calibration;
            let cal = calibrate_phi_for_ratio(c.target_ratio, c.phi_low, &cfg.scenario()?)?;
            let mut table = String::from("phi,mean_period\n");
            for (phi, p) in &cal.evaluations {
                let _ = writeln!(table, "{phi},{}", p.map(|p| p.to_string()).unwrap_or_default());
            }
            write_text(&out.join("calibration.csv"), &table)?;
            println!(
                "phi_low {} phi_high {} ratio {:.4} (target {})",
                cal.phi_low, cal.phi_high, cal.ratio, cal.target_ratio
            );
        }
    }
    Ok(())
}

fn analyze(path: &Path, hi: Option<f64>, lo: Option<f64>, detrend: Option<usize>) -> Result<()> {
    let trace = read_trace_csv(path)?;
    let mut cfg = DetectorConfig {
        detrend_window: detrend,
        ..DetectorConfig::default()
    };
    if let (Some(hi), Some(lo)) = (hi, lo) {
        cfg.thresholds = Thresholds::Absolute { hi, lo };
    }
    print!("{}", period_stats_csv(&detect_periods_with(&trace, &cfg)?));
    Ok(())
}

fn dispatch(cli: Cli) -> Result<()> {
    let (common, kind, extra): (Common, Option<ScenarioKind>, Overrides) = match cli.command {
        Command::Analyze { trace, hi, lo, detrend } => return analyze(&trace, hi, lo, detrend),
        Command::Run(common) => (common, None, Vec::new()),
        Command::SpikeShapes { common, origin } => {
            let extra = origin.map(|o| vec![("origin".into(), format!("\"{o}\""))]).unwrap_or_default();
            (common, Some(ScenarioKind::SpikeShape), extra)
        }
        Command::SweepPhi { common, phi } => {
            let mut extra = Vec::new();
            if !phi.is_empty() {
                extra.push(("sweep.phi_values".into(), list(&phi)));
            }
            (common, Some(ScenarioKind::SweepPhi), extra)
        }
        Command::CoolingCycle { common, phis, segment_steps } => {
            let mut extra = Vec::new();
            if !phis.is_empty() {
                extra.push(("cooling.phis".into(), list(&phis)));
            }
            if let Some(n) = segment_steps {
                extra.push(("cooling.segment_steps".into(), n.to_string()));
            }
            (common, Some(ScenarioKind::CoolingCycle), extra)
        }
        Command::Calibrate { common, target, phi_low } => {
            let mut extra = Vec::new();
            if let Some(t) = target {
                extra.push(("calibration.target_ratio".into(), format!("{t:?}")));
            }
            if let Some(p) = phi_low {
                extra.push(("calibration.phi_low".into(), format!("{p:?}")));
            }
            (common, Some(ScenarioKind::Calibrate), extra)
        }
    };
    let (cfg, out) = load(&common, kind, extra)?;
    execute(&cfg, &out)
}

fn main() -> ExitCode {
    // clap exits with status 2 on usage errors.
    let cli = Cli::parse();
    match dispatch(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e:#}");
            ExitCode::from(1)
        }
    }
}
