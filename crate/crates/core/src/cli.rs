//! Command-line front end: configuration loading, subcommands and result
//! serialization.

use std::io::Write;
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Parser, Subcommand};
use serde::Serialize;
use serde_json::json;
use thiserror::Error;

use crate::cavity::{CavityKind, OperatingPoint};
use crate::config::{ConfigError, OutputFormat, ResonanceMode, RunConfig};
use crate::solver::{appendix_lower_threshold, solve_point, SolverError};
use crate::sweep::{
    length_cut, resonance_curve, resonance_surface, zone_scan, zone_widths, Range, SweepError,
};

/// Environment variable overriding the output directory.
pub const OUT_DIR_ENV: &str = "OPOLOCK_OUT_DIR";

#[derive(Debug, Error)]
pub enum CliError {
    #[error(transparent)]
    Config(#[from] ConfigError),
    #[error("numerical failure: {0}")]
    Numerical(String),
    #[error("i/o failure on {path}: {source}")]
    Io {
        path: String,
        #[source]
        source: std::io::Error,
    },
}

impl From<SolverError> for CliError {
    fn from(e: SolverError) -> Self {
        CliError::Numerical(e.to_string())
    }
}

impl From<SweepError> for CliError {
    fn from(e: SweepError) -> Self {
        CliError::Numerical(e.to_string())
    }
}

impl CliError {
    pub fn exit_code(&self) -> u8 {
        match self {
            CliError::Config(ConfigError::Invalid { .. } | ConfigError::Parse { .. }) => 2,
            CliError::Config(ConfigError::Io { .. }) => 2,
            CliError::Numerical(_) | CliError::Io { .. } => 1,
        }
    }
}

#[derive(Debug, Parser)]
#[command(name = "opolock", version, about = "Thresholds and locking zones of a type-II OPO with an intracavity waveplate")]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
    /// Configuration file (TOML, JSON, or a JSON sidecar from a previous run).
    #[arg(long, global = true)]
    pub config: Option<PathBuf>,
    /// Output directory.
    #[arg(long, global = true)]
    pub out: Option<PathBuf>,
    /// Output format for tabular results.
    #[arg(long, global = true, value_enum)]
    pub format: Option<OutputFormat>,
    /// Worker threads (0 = all cores).
    #[arg(long, global = true, default_value_t = 0)]
    pub threads: usize,
}

#[derive(Debug, Clone, Copy, Subcommand)]
pub enum Command {
    /// Threshold roots at the configured operating point.
    Threshold,
    /// Locking-zone map over the configured (δL, δT) grid.
    Zone,
    /// Threshold on resonance (or a δL cut) as configured in [resonance].
    Resonance,
    /// Zone widths through the minimum-threshold point.
    Widths,
}

impl Command {
    fn name(self) -> &'static str {
        match self {
            Command::Threshold => "threshold",
            Command::Zone => "zone",
            Command::Resonance => "resonance",
            Command::Widths => "widths",
        }
    }
}

/// Formats a float with 17 significant digits; non-finite values as
/// `inf`, `-inf` or `nan`.
pub fn fmt_f64(v: f64) -> String {
    if v.is_nan() {
        "nan".to_string()
    } else if v.is_infinite() {
        if v > 0.0 { "inf" } else { "-inf" }.to_string()
    } else {
        format!("{v:.16e}")
    }
}

fn fmt_opt(v: Option<f64>) -> String {
    v.map(fmt_f64).unwrap_or_else(|| "inf".to_string())
}

/// Writes `contents` to a temporary sibling file and renames it into place.
pub fn write_atomic(path: &Path, contents: &[u8]) -> Result<(), CliError> {
    let io = |source| CliError::Io {
        path: path.display().to_string(),
        source,
    };
    if let Some(parent) = path.parent() {
        if !parent.as_os_str().is_empty() {
            std::fs::create_dir_all(parent).map_err(io)?;
        }
    }
    let mut tmp = path.as_os_str().to_owned();
    tmp.push(".tmp");
    let tmp = PathBuf::from(tmp);
    std::fs::write(&tmp, contents).map_err(io)?;
    std::fs::rename(&tmp, path).map_err(io)
}

#[derive(Debug, Serialize)]
struct Metadata {
    command: &'static str,
    version: &'static str,
    timestamp_unix: u64,
    outputs: Vec<String>,
}

/// JSON sidecar: the full configuration echo plus run metadata. Loading it
/// with `--config` reproduces the run.
pub fn sidecar(cfg: &RunConfig, command: Command, outputs: &[PathBuf]) -> serde_json::Value {
    let timestamp_unix = std::time::SystemTime::now()
        .duration_since(std::time::UNIX_EPOCH)
        .map(|d| d.as_secs())
        .unwrap_or(0);
    json!({
        "config": cfg,
        "metadata": Metadata {
            command: command.name(),
            version: env!("CARGO_PKG_VERSION"),
            timestamp_unix,
            outputs: outputs
                .iter()
                .map(|p| p.file_name().unwrap_or_default().to_string_lossy().into_owned())
                .collect(),
        },
    })
}

fn json_bytes(v: &serde_json::Value) -> Vec<u8> {
    let mut s = serde_json::to_string_pretty(v).expect("serializable");
    s.push('\n');
    s.into_bytes()
}

/// Threshold report for the configured point.
pub fn cmd_threshold(cfg: &RunConfig) -> Result<serde_json::Value, CliError> {
    cfg.validate()?;
    let opo = cfg.opo();
    let mut op = OperatingPoint::new(cfg.point.dl_m, cfg.point.dt_k);
    op.xi = cfg.point.xi_rad;
    op.sigma = cfg.point.sigma;
    let phases = opo.phases(&op);
    let coupling = opo.coupling(&op);
    let result = solve_point(&opo, &op)?;

    let appendix_check = match opo.kind {
        CavityKind::Ring if coupling.g_prime.norm() > 0.0 => {
            let r = opo.mirrors.effective_reflectivity();
            appendix_lower_threshold(
                phases.alpha0,
                phases.psi,
                phases.eps.abs(),
                r,
                phases.delta,
                phases.theta,
                coupling.g_prime.norm(),
            )
            .ok()
            .map(|intensity| {
                let standard = ((1.0 - r) / (r * coupling.g)).powi(2);
                intensity / standard
            })
        }
        _ => None,
    };
    let oscillates = result.lower().map(|s| op.sigma >= s).unwrap_or(false);
    Ok(json!({
        "cavity": opo.kind,
        "status": result.status,
        "roots": result.roots,
        "det_residuals": result.det_residuals,
        "sigma": op.sigma,
        "oscillates": oscillates,
        "phases": phases,
        "g": coupling.g,
        "g_prime_abs": coupling.g_prime.norm(),
        "appendix_check": appendix_check,
    }))
}

/// CSV of a zone map: one row per cell, δT outer.
pub fn zone_csv(map: &crate::sweep::ZoneMap) -> String {
    let mut s = String::from("dL_m,dT_K,sigma_th,in_zone\n");
    for (i, dt) in map.dt.iter().enumerate() {
        for (j, dl) in map.dl.iter().enumerate() {
            let cell = map.cell(i, j);
            let sigma = if cell.flagged {
                "nan".to_string()
            } else {
                fmt_opt(cell.sigma_th)
            };
            s.push_str(&format!(
                "{},{},{},{}\n",
                fmt_f64(*dl),
                fmt_f64(*dt),
                sigma,
                u8::from(map.in_zone(i, j))
            ));
        }
    }
    s
}

fn zone_json(map: &crate::sweep::ZoneMap) -> serde_json::Value {
    let rows: Vec<_> = map
        .dt
        .iter()
        .enumerate()
        .flat_map(|(i, dt)| {
            map.dl.iter().enumerate().map(move |(j, dl)| {
                let cell = map.cell(i, j);
                json!({
                    "dL_m": dl,
                    "dT_K": dt,
                    "sigma_th": cell.sigma_th,
                    "flagged": cell.flagged,
                    "in_zone": map.in_zone(i, j),
                })
            })
        })
        .collect();
    json!({ "sigma": map.sigma, "cells": rows })
}

/// Writes the table in the requested format plus the sidecar; returns the
/// written paths.
fn emit(
    cfg: &RunConfig,
    command: Command,
    out_dir: &Path,
    stem: &str,
    format: OutputFormat,
    csv: impl FnOnce() -> String,
    json_table: impl FnOnce() -> serde_json::Value,
) -> Result<Vec<PathBuf>, CliError> {
    let table = match format {
        OutputFormat::Csv => {
            let p = out_dir.join(format!("{stem}.csv"));
            write_atomic(&p, csv().as_bytes())?;
            p
        }
        OutputFormat::Json => {
            let p = out_dir.join(format!("{stem}.json"));
            write_atomic(&p, &json_bytes(&json_table()))?;
            p
        }
    };
    let side = out_dir.join(format!("{stem}.meta.json"));
    let outputs = vec![table.clone()];
    write_atomic(&side, &json_bytes(&sidecar(cfg, command, &outputs)))?;
    Ok(vec![table, side])
}

pub fn cmd_zone(cfg: &RunConfig, out_dir: &Path, format: OutputFormat) -> Result<Vec<PathBuf>, CliError> {
    cfg.validate()?;
    let map = zone_scan(&cfg.opo(), &cfg.zone.grid(), cfg.zone.sigma)?;
    emit(cfg, Command::Zone, out_dir, "zone", format, || zone_csv(&map), || zone_json(&map))
}

pub fn cmd_resonance(
    cfg: &RunConfig,
    out_dir: &Path,
    format: OutputFormat,
) -> Result<Vec<PathBuf>, CliError> {
    cfg.validate()?;
    let opo = cfg.opo();
    let r = &cfg.resonance;
    match r.mode {
        ResonanceMode::Temperature | ResonanceMode::Xi => {
            let axis = r.mode.axis().expect("1-D mode");
            let values = match r.mode {
                ResonanceMode::Temperature => Range::new(r.dt_min_k, r.dt_max_k, r.dt_count),
                _ => Range::new(r.xi_min_rad, r.xi_max_rad, r.xi_count),
            }
            .values();
            let curve = resonance_curve(&opo, axis, &values, r.fixed_dt_k, r.fixed_xi_rad, r.window_dl_m)?;
            let csv = || {
                let mut s = String::from("scan_value,sigma_res,argmin_dL_m\n");
                for p in &curve.points {
                    s.push_str(&format!(
                        "{},{},{}\n",
                        fmt_f64(p.scan_value),
                        fmt_opt(p.sigma_res),
                        p.argmin_dl.map(fmt_f64).unwrap_or_else(|| "nan".to_string())
                    ));
                }
                s
            };
            emit(cfg, Command::Resonance, out_dir, "resonance", format, csv, || json!(curve))
        }
        ResonanceMode::Surface => {
            let surface = resonance_surface(
                &opo,
                &Range::new(r.xi_min_rad, r.xi_max_rad, r.xi_count),
                &Range::new(r.dt_min_k, r.dt_max_k, r.dt_count),
                r.window_dl_m,
            )?;
            let csv = || {
                let mut s = String::from("xi_rad,dT_K,sigma_res\n");
                for (i, xi) in surface.xi.iter().enumerate() {
                    for (j, dt) in surface.dt.iter().enumerate() {
                        s.push_str(&format!(
                            "{},{},{}\n",
                            fmt_f64(*xi),
                            fmt_f64(*dt),
                            fmt_opt(surface.at(i, j))
                        ));
                    }
                }
                s
            };
            emit(cfg, Command::Resonance, out_dir, "resonance_surface", format, csv, || json!(surface))
        }
        ResonanceMode::Cut => {
            let cut = length_cut(
                &opo,
                &Range::new(r.dl_min_m, r.dl_max_m, r.dl_count),
                r.fixed_dt_k,
                r.fixed_xi_rad,
            )?;
            let csv = || {
                let mut s = String::from("dL_m,sigma_th\n");
                for (dl, sigma) in &cut {
                    s.push_str(&format!("{},{}\n", fmt_f64(*dl), fmt_opt(*sigma)));
                }
                s
            };
            let table = || {
                json!(cut
                    .iter()
                    .map(|(dl, s)| json!({"dL_m": dl, "sigma_th": s}))
                    .collect::<Vec<_>>())
            };
            emit(cfg, Command::Resonance, out_dir, "cut", format, csv, table)
        }
    }
}

pub fn cmd_widths(cfg: &RunConfig, out_dir: &Path, format: OutputFormat) -> Result<Vec<PathBuf>, CliError> {
    cfg.validate()?;
    let w = zone_widths(&cfg.opo(), cfg.widths.sigma, cfg.widths.dt_k, cfg.widths.xi_rad)?;
    let csv = || {
        format!(
            "dL_width_m,dT_width_K,center_dL_m,center_dT_K,sigma_min\n{},{},{},{},{}\n",
            fmt_f64(w.dl_width),
            fmt_f64(w.dt_width),
            fmt_f64(w.center_dl),
            fmt_f64(w.center_dt),
            fmt_f64(w.sigma_min)
        )
    };
    emit(cfg, Command::Widths, out_dir, "widths", format, csv, || json!(w))
}

/// Output directory precedence: `--out`, then the environment, then the
/// configuration file.
pub fn resolve_out_dir(flag: Option<&Path>, cfg: &RunConfig) -> PathBuf {
    if let Some(p) = flag {
        return p.to_path_buf();
    }
    match std::env::var_os(OUT_DIR_ENV) {
        Some(v) if !v.is_empty() => PathBuf::from(v),
        _ => PathBuf::from(&cfg.output.dir),
    }
}

/// Runs one parsed invocation and maps the outcome to an exit code.
pub fn run(cli: Cli) -> ExitCode {
    match execute(&cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(e.exit_code())
        }
    }
}

fn execute(cli: &Cli) -> Result<(), CliError> {
    if cli.threads > 0 {
        // A second initialization only fails if a pool already exists.
        let _ = rayon::ThreadPoolBuilder::new()
            .num_threads(cli.threads)
            .build_global();
    }
    let cfg = match &cli.config {
        Some(path) => RunConfig::load(path)?,
        None => RunConfig::default(),
    };
    let format = cli.format.unwrap_or(cfg.output.format);
    match cli.command {
        Command::Threshold => {
            let report = cmd_threshold(&cfg)?;
            let text = serde_json::to_string_pretty(&report).expect("serializable");
            // A closed stdout (e.g. piped into `head`) is not an error.
            let _ = writeln!(std::io::stdout(), "{text}");
            if let Some(dir) = &cli.out {
                write_atomic(&dir.join("threshold.json"), &json_bytes(&report))?;
            }
        }
        Command::Zone | Command::Resonance | Command::Widths => {
            let out_dir = resolve_out_dir(cli.out.as_deref(), &cfg);
            let written = match cli.command {
                Command::Zone => cmd_zone(&cfg, &out_dir, format)?,
                Command::Resonance => cmd_resonance(&cfg, &out_dir, format)?,
                _ => cmd_widths(&cfg, &out_dir, format)?,
            };
            let mut stdout = std::io::stdout().lock();
            for p in written {
                let _ = writeln!(stdout, "{}", p.display());
            }
        }
    }
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn floats_keep_seventeen_digits() {
        let v = 0.1f64 + 0.2;
        let s = fmt_f64(v);
        assert_eq!(s.parse::<f64>().unwrap(), v);
        assert_eq!(s, "3.0000000000000004e-1");
        assert_eq!(fmt_f64(f64::INFINITY), "inf");
        assert_eq!("inf".parse::<f64>().unwrap(), f64::INFINITY);
    }

    #[test]
    fn config_errors_exit_with_two() {
        let e = CliError::Config(ConfigError::Invalid {
            field: "crystal.length_m".into(),
            reason: "must be positive".into(),
        });
        assert_eq!(e.exit_code(), 2);
        assert_eq!(CliError::Numerical("x".into()).exit_code(), 1);
    }

    #[test]
    fn atomic_write_replaces_file() {
        let dir = tempfile::tempdir().unwrap();
        let p = dir.path().join("nested/a.csv");
        write_atomic(&p, b"one").unwrap();
        write_atomic(&p, b"two").unwrap();
        assert_eq!(std::fs::read_to_string(&p).unwrap(), "two");
        assert!(!dir.path().join("nested/a.csv.tmp").exists());
    }
}
