mod config;

use std::fs;
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use anyhow::{bail, Context, Result};
use clap::{Args, Parser, Subcommand};
use serde::Serialize;

use pairspec::experiment::{self, SettingReport};
use pairspec::optimize::{self, BoundPoint};
use pairspec::{metrics, Engine};

use config::{RunConfig, RunManifest};

/// Heralding efficiency, purity and fidelity of filtered photon-pair sources.
#[derive(Parser, Debug)]
#[command(name = "pairspec", version, about)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand, Debug)]
enum Command {
    /// Metrics for the configured source and filters.
    Metrics(Common),
    /// Equal signal and idler filter bandwidths.
    Sweep(Common),
    /// All combinations of signal and idler filter bandwidths.
    Heatmap(Common),
    /// Best achievable fidelity per phasematching angle.
    Bound(Common),
    /// Purity of a measured joint spectrum and heralding from counts.
    Analyze(Common),
}

#[derive(Args, Debug)]
struct Common {
    /// JSON config, or a manifest written by an earlier run.
    #[arg(long, short)]
    config: PathBuf,
    /// Overrides the engine given in the config.
    #[arg(long)]
    engine: Option<Engine>,
    /// Output file; a `<out>.manifest.json` is written next to it.
    #[arg(long, short)]
    out: Option<PathBuf>,
    /// Overrides the optimizer seed.
    #[arg(long)]
    seed: Option<u64>,
    /// Overrides the points per axis of numeric grids.
    #[arg(long)]
    grid: Option<usize>,
}

impl Common {
    fn load(&self) -> Result<RunConfig> {
        let mut cfg = RunConfig::load(&self.config)?;
        if let Some(e) = self.engine {
            cfg.engine = e;
        }
        if let Some(s) = self.seed {
            cfg.optimizer.seed = s;
        }
        if let Some(n) = self.grid {
            if n < 2 {
                bail!("--grid needs at least 2 points");
            }
            cfg.grid.n_points = n;
            cfg.optimizer.numeric_grid.n_points = n;
        }
        Ok(cfg)
    }
}

/// Writes `text` to `out` plus its manifest, or prints it.
fn emit(name: &str, cfg: &RunConfig, out: Option<&Path>, text: &str) -> Result<()> {
    match out {
        Some(path) => {
            fs::write(path, text).with_context(|| format!("cannot write {}", path.display()))?;
            RunManifest::new(name, cfg, vec![path.to_path_buf()]).write_for(path)?;
        }
        None => print!("{text}"),
    }
    Ok(())
}

fn json<T: Serialize>(value: &T) -> Result<String> {
    Ok(serde_json::to_string_pretty(value)? + "\n")
}

fn run_metrics(cfg: &RunConfig) -> Result<String> {
    let m = metrics::compute(
        cfg.engine,
        cfg.source()?,
        &cfg.signal_filter,
        &cfg.idler_filter,
        &cfg.grid,
    )?;
    json(&m)
}

fn run_sweep(cfg: &RunConfig) -> Result<String> {
    let sweep = cfg
        .sweep
        .as_ref()
        .context("config has no \"sweep\" section")?;
    let result = optimize::sweep_equal_filters(
        cfg.source()?,
        sweep.shape,
        &sweep.fwhm_nm.values()?,
        cfg.engine,
        &cfg.grid,
    )?;
    Ok(result.to_csv())
}

fn run_heatmap(cfg: &RunConfig) -> Result<String> {
    let h = cfg
        .heatmap
        .as_ref()
        .context("config has no \"heatmap\" section")?;
    let result = optimize::sweep_filter_grid(
        cfg.source()?,
        h.shape,
        &h.signal_fwhm_nm.values()?,
        &h.idler_fwhm_nm.values()?,
        cfg.engine,
        &cfg.grid,
    )?;
    Ok(result.to_csv())
}

fn run_bound(cfg: &RunConfig) -> Result<String> {
    let b = cfg
        .bound
        .as_ref()
        .context("config has no \"bound\" section")?;
    let source = cfg.source()?;
    let pm = b.pm_fwhm_nm.unwrap_or(source.pm_fwhm_nm);
    let points = optimize::bound_curve(
        source,
        &b.theta_deg.values()?,
        pm,
        b.filter_shape,
        &cfg.optimizer,
    )?;
    let mut out = BoundPoint::csv_header();
    out.push('\n');
    for p in &points {
        out.push_str(&p.csv_row());
        out.push('\n');
    }
    Ok(out)
}

#[derive(Serialize)]
struct JsiReport {
    path: PathBuf,
    purity: f64,
    correlation_coefficient: f64,
}

#[derive(Serialize)]
struct AnalyzeReport<'a> {
    #[serde(skip_serializing_if = "Option::is_none")]
    jsi: Option<JsiReport>,
    #[serde(skip_serializing_if = "Option::is_none")]
    reference_label: Option<String>,
    #[serde(skip_serializing_if = "Option::is_none")]
    settings: Option<Vec<SettingReport>>,
    config: &'a RunConfig,
}

fn run_analyze(cfg: &RunConfig) -> Result<String> {
    let a = &cfg.analyze;
    if a.jsi_path.is_none() && a.counts_path.is_none() {
        bail!("analyze needs \"jsi_path\" or \"counts_path\"");
    }
    let jsi = match &a.jsi_path {
        Some(path) => {
            let mut m = experiment::load_jsi(path)?;
            if let Some(jitter) = a.jitter_fwhm_ps {
                let d = a
                    .dispersion_ps_per_nm
                    .context("\"jitter_fwhm_ps\" requires \"dispersion_ps_per_nm\"")?;
                m = experiment::apply_jitter(&m, jitter, d)?;
            }
            match (a.time_window_nm_s, a.time_window_nm_i) {
                (Some(ws), Some(wi)) => m = experiment::time_filter(&m, ws, wi)?,
                (None, None) => {}
                _ => bail!("time windows must be given for both photons"),
            }
            Some(JsiReport {
                path: path.clone(),
                purity: experiment::purity_from_jsi(&m)?,
                correlation_coefficient: m.correlation_coefficient()?,
            })
        }
        None => None,
    };
    let (reference_label, settings) = match &a.counts_path {
        Some(path) => {
            let records = experiment::load_counts(path)?;
            let label = a.reference_label.as_deref().unwrap_or("reference");
            let reference = records
                .iter()
                .find(|r| r.label == label)
                .with_context(|| format!("no record labelled {label:?} in {}", path.display()))?;
            (
                Some(label.to_string()),
                Some(experiment::analyze_counts(&records, reference)?),
            )
        }
        None => (None, None),
    };
    json(&AnalyzeReport {
        jsi,
        reference_label,
        settings,
        config: cfg,
    })
}

type Runner = fn(&RunConfig) -> Result<String>;

fn run(cli: Cli) -> Result<()> {
    let (name, common, f): (&str, &Common, Runner) = match &cli.command {
        Command::Metrics(c) => ("metrics", c, run_metrics),
        Command::Sweep(c) => ("sweep", c, run_sweep),
        Command::Heatmap(c) => ("heatmap", c, run_heatmap),
        Command::Bound(c) => ("bound", c, run_bound),
        Command::Analyze(c) => ("analyze", c, run_analyze),
    };
    let cfg = common.load()?;
    let text = f(&cfg)?;
    emit(name, &cfg, common.out.as_deref(), &text)
}

/// 2 for numerical failures, 1 for everything else.
fn exit_code(err: &anyhow::Error) -> u8 {
    use pairspec::Error as E;
    let numerical = err.chain().any(|e| {
        matches!(
            e.downcast_ref::<E>(),
            Some(
                E::Singular(_)
                    | E::Truncation { .. }
                    | E::GridMismatch(_)
                    | E::ZeroMass
                    | E::UndefinedEfficiency(_)
            )
        )
    });
    if numerical {
        2
    } else {
        1
    }
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) => {
            let code = if e.use_stderr() { 1 } else { 0 };
            let _ = e.print();
            return ExitCode::from(code);
        }
    };
    match run(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e:#}");
            ExitCode::from(exit_code(&e))
        }
    }
}
