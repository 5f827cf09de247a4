//! Argument definitions and the flag > config file > default resolution.

use std::path::{Path, PathBuf};

use clap::{Args, Parser, Subcommand};
use serde::Deserialize;

use crate::error::{CliError, CliResult};

#[derive(Debug, Parser)]
#[command(name = "fieldcorr", version, about = "Correlated field-fluctuation sampler")]
pub struct Cli {
    /// Cap on worker threads; results do not depend on it.
    #[arg(long, global = true)]
    pub threads: Option<usize>,

    /// TOML file with per-command defaults, e.g. a `[sweep]` table.
    #[arg(long, global = true)]
    pub config: Option<PathBuf>,

    /// Directory for output files.
    #[arg(long, global = true, env = "FIELDCORR_OUT_DIR")]
    pub out_dir: Option<PathBuf>,

    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Evaluate, find roots of, or integrate a correlation kernel.
    #[command(subcommand)]
    Kernel(KernelCommand),
    /// Simulated against analytic correlation over a grid of separations.
    Sweep(SweepOpts),
    /// Check the smeared-correlator quadrature against its closed form.
    VerifyQuadrature(VerifyOpts),
    /// Correlated random walks and their mean squared displacement.
    Walk(WalkOpts),
    /// Measure a Monte Carlo calibration table.
    Calibrate(CalibrateOpts),
}

#[derive(Debug, Subcommand)]
pub enum KernelCommand {
    /// Kernel values at one separation or a `start:stop:count` range.
    Eval(KernelEvalOpts),
    /// Sign changes of the kernel on an interval.
    Roots(KernelRootsOpts),
    /// Integral of the kernel over [0, inf).
    Integral(KernelIntegralOpts),
}

/// Merges `$file` into `$cli` field by field, keeping values already set on the command line.
macro_rules! fill_from {
    ($cli:ident, $file:ident, $($field:ident),+ $(,)?) => {
        $( if $cli.$field.is_none() { $cli.$field = $file.$field.clone(); } )+
    };
}

#[derive(Debug, Default, Clone, Args, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct KernelEvalOpts {
    #[arg(long)]
    pub kernel: Option<String>,
    /// Wavenumber of the squeezed-state kernel.
    #[arg(long)]
    pub k: Option<String>,
    #[arg(long)]
    pub t0: Option<String>,
    /// Write CSV here instead of standard output.
    #[arg(long)]
    pub output: Option<PathBuf>,
}

#[derive(Debug, Default, Clone, Args, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct KernelRootsOpts {
    #[arg(long)]
    pub kernel: Option<String>,
    #[arg(long)]
    pub k: Option<String>,
    #[arg(long)]
    pub from: Option<String>,
    #[arg(long)]
    pub to: Option<String>,
}

#[derive(Debug, Default, Clone, Args, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct KernelIntegralOpts {
    #[arg(long)]
    pub kernel: Option<String>,
}

#[derive(Debug, Default, Clone, Args, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct SweepOpts {
    #[arg(long)]
    pub kernel: Option<String>,
    #[arg(long)]
    pub k: Option<String>,
    /// tanfit, exact or table.
    #[arg(long)]
    pub method: Option<String>,
    /// pair, chain-raw or chain-normalized.
    #[arg(long)]
    pub mode: Option<String>,
    #[arg(long)]
    pub points: Option<String>,
    #[arg(long)]
    pub steps: Option<String>,
    #[arg(long)]
    pub t0_max: Option<String>,
    #[arg(long)]
    pub seed: Option<String>,
    /// Calibration table CSV for `--method table`.
    #[arg(long)]
    pub table: Option<PathBuf>,
    /// Base variance the table was measured at.
    #[arg(long)]
    pub table_sigma2: Option<String>,
    /// Stem of the output files.
    #[arg(long)]
    pub name: Option<String>,
}

#[derive(Debug, Default, Clone, Args, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct VerifyOpts {
    /// Comma-separated separations.
    #[arg(long)]
    pub t0: Option<String>,
    /// Comma-separated logarithm scales.
    #[arg(long)]
    pub alpha: Option<String>,
    #[arg(long)]
    pub tol: Option<String>,
    /// Half-width of the integration box.
    #[arg(long)]
    pub truncation: Option<String>,
    #[arg(long)]
    pub name: Option<String>,
}

#[derive(Debug, Default, Clone, Args, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct WalkOpts {
    /// Comma-separated shift factors, each with |f| <= 1.
    #[arg(long, allow_hyphen_values = true)]
    pub f: Option<String>,
    #[arg(long)]
    pub steps: Option<String>,
    #[arg(long)]
    pub walkers: Option<String>,
    #[arg(long)]
    pub seed: Option<String>,
    #[arg(long)]
    pub mode: Option<String>,
    #[arg(long)]
    pub sigma2: Option<String>,
    /// Fit window `lo:hi` in steps.
    #[arg(long)]
    pub fit_window: Option<String>,
    /// Print fit coefficients and slope ratios.
    #[arg(long)]
    #[serde(skip)]
    pub fit: bool,
    #[arg(long)]
    pub name: Option<String>,
}

#[derive(Debug, Default, Clone, Args, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct CalibrateOpts {
    #[arg(long)]
    pub mode: Option<String>,
    /// Shift grid `start:stop:count`.
    #[arg(long, allow_hyphen_values = true)]
    pub grid: Option<String>,
    #[arg(long)]
    pub steps: Option<String>,
    #[arg(long)]
    pub seed: Option<String>,
    #[arg(long)]
    pub sigma2: Option<String>,
    #[arg(long)]
    pub name: Option<String>,
}

/// Per-command tables of a configuration file.
#[derive(Debug, Default, Deserialize)]
#[serde(default, deny_unknown_fields, rename_all = "kebab-case")]
pub struct ConfigFile {
    pub kernel: KernelEvalOpts,
    pub sweep: SweepOpts,
    pub verify_quadrature: VerifyOpts,
    pub walk: WalkOpts,
    pub calibrate: CalibrateOpts,
}

impl ConfigFile {
    pub fn load(path: &Path) -> CliResult<Self> {
        let text =
            std::fs::read_to_string(path).map_err(|e| CliError::Io(format!("{}: {e}", path.display())))?;
        let table: toml::Table =
            toml::from_str(&text).map_err(|e| CliError::Usage(format!("{}: {e}", path.display())))?;
        // Numbers and arrays are accepted and turned into the strings the flags use.
        let normalized = toml::Value::Table(stringify_leaves(table));
        normalized
            .try_into()
            .map_err(|e| CliError::Usage(format!("{}: {e}", path.display())))
    }
}

fn stringify_leaves(table: toml::Table) -> toml::Table {
    table
        .into_iter()
        .map(|(k, v)| {
            let v = match v {
                toml::Value::Table(t) => toml::Value::Table(stringify_leaves(t)),
                toml::Value::String(s) => toml::Value::String(s),
                toml::Value::Array(items) => toml::Value::String(
                    items
                        .iter()
                        .map(|i| match i {
                            toml::Value::String(s) => s.clone(),
                            other => other.to_string(),
                        })
                        .collect::<Vec<_>>()
                        .join(","),
                ),
                other => toml::Value::String(other.to_string()),
            };
            (k, v)
        })
        .collect()
}

impl KernelEvalOpts {
    pub fn merge(mut self, file: &Self) -> Self {
        fill_from!(self, file, kernel, k, t0, output);
        self
    }
}

impl SweepOpts {
    pub fn merge(mut self, file: &Self) -> Self {
        fill_from!(
            self,
            file,
            kernel,
            k,
            method,
            mode,
            points,
            steps,
            t0_max,
            seed,
            table,
            table_sigma2,
            name
        );
        self
    }
}

impl VerifyOpts {
    pub fn merge(mut self, file: &Self) -> Self {
        fill_from!(self, file, t0, alpha, tol, truncation, name);
        self
    }
}

impl WalkOpts {
    pub fn merge(mut self, file: &Self) -> Self {
        fill_from!(self, file, f, steps, walkers, seed, mode, sigma2, fit_window, name);
        self
    }
}

impl CalibrateOpts {
    pub fn merge(mut self, file: &Self) -> Self {
        fill_from!(self, file, mode, grid, steps, seed, sigma2, name);
        self
    }
}

/// Parses `value` or falls back to `default`, naming the flag in errors.
pub fn parse_or<T: std::str::FromStr>(value: &Option<String>, flag: &str, default: T) -> CliResult<T> {
    match value {
        None => Ok(default),
        Some(s) => s
            .trim()
            .parse()
            .map_err(|_| CliError::Usage(format!("--{flag}: cannot parse '{s}'"))),
    }
}

pub fn parse_list(s: &str, flag: &str) -> CliResult<Vec<f64>> {
    let out = s
        .split(',')
        .filter(|p| !p.trim().is_empty())
        .map(|p| {
            let v: f64 = p
                .trim()
                .parse()
                .map_err(|_| CliError::Usage(format!("--{flag}: cannot parse '{p}'")))?;
            if v.is_finite() {
                Ok(v)
            } else {
                Err(CliError::Usage(format!("--{flag}: '{p}' is not finite")))
            }
        })
        .collect::<CliResult<Vec<_>>>()?;
    if out.is_empty() {
        return Err(CliError::Usage(format!("--{flag}: empty list")));
    }
    Ok(out)
}

/// `start:stop:count` as an inclusive uniform grid; a bare number is a single point.
pub fn parse_range(s: &str, flag: &str) -> CliResult<Vec<f64>> {
    let parts: Vec<&str> = s.split(':').collect();
    let num = |p: &str| -> CliResult<f64> {
        p.trim()
            .parse::<f64>()
            .ok()
            .filter(|v| v.is_finite())
            .ok_or_else(|| CliError::Usage(format!("--{flag}: malformed range '{s}'")))
    };
    match parts.as_slice() {
        [single] => Ok(vec![num(single)?]),
        [start, stop, count] => {
            let (a, b) = (num(start)?, num(stop)?);
            let n: usize = count
                .trim()
                .parse()
                .map_err(|_| CliError::Usage(format!("--{flag}: malformed count in '{s}'")))?;
            if n == 0 {
                return Err(CliError::Usage(format!("--{flag}: range '{s}' is empty")));
            }
            if n == 1 {
                return Ok(vec![a]);
            }
            Ok((0..n)
                .map(|i| {
                    if i + 1 == n {
                        b
                    } else {
                        a + (b - a) * i as f64 / (n - 1) as f64
                    }
                })
                .collect())
        }
        _ => Err(CliError::Usage(format!(
            "--{flag}: malformed range '{s}', expected start:stop:count"
        ))),
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn ranges() {
        assert_eq!(parse_range("2", "t0").unwrap(), vec![2.0]);
        assert_eq!(parse_range("0:1:3", "t0").unwrap(), vec![0.0, 0.5, 1.0]);
        assert!(parse_range("0:1:0", "t0").is_err());
        assert!(parse_range("0:1", "t0").is_err());
        assert!(parse_range("a:1:2", "t0").is_err());
    }

    #[test]
    fn lists() {
        assert_eq!(parse_list("-0.5,0,0.5", "f").unwrap(), vec![-0.5, 0.0, 0.5]);
        assert!(parse_list("", "f").is_err());
        assert!(parse_list("1,x", "f").is_err());
        assert!(parse_list("inf", "f").is_err());
    }

    #[test]
    fn config_file_precedence() {
        let dir = tempfile::tempdir().unwrap();
        let p = dir.path().join("c.toml");
        std::fs::write(&p, "[walk]\nf = [0.25, -0.25]\nsteps = 50\nseed = \"4\"\n").unwrap();
        let file = ConfigFile::load(&p).unwrap();
        let cli = WalkOpts {
            steps: Some("20".into()),
            ..Default::default()
        };
        let merged = cli.merge(&file.walk);
        assert_eq!(merged.steps.as_deref(), Some("20"));
        assert_eq!(merged.f.as_deref(), Some("0.25,-0.25"));
        assert_eq!(merged.seed.as_deref(), Some("4"));
        assert_eq!(merged.walkers, None);

        std::fs::write(&p, "[walk]\nbogus = 1\n").unwrap();
        assert!(matches!(ConfigFile::load(&p), Err(CliError::Usage(_))));
    }
}
