//! `fieldcorr` command-line entry point.
//!
//! Exit codes: 0 success, 1 usage error, 2 numerical failure, 3 I/O failure.

#![allow(clippy::neg_cmp_op_on_partial_ord)]

mod cli;
mod commands;
mod error;

use std::path::PathBuf;
use std::process::ExitCode;

use clap::Parser;

use cli::{Cli, Command, ConfigFile, KernelCommand};
use error::{CliError, CliResult};

fn run(cli: Cli) -> CliResult<()> {
    if let Some(n) = cli.threads {
        if n == 0 {
            return Err(CliError::Usage("--threads must be at least 1".into()));
        }
        rayon::ThreadPoolBuilder::new()
            .num_threads(n)
            .build_global()
            .map_err(|e| CliError::Usage(format!("--threads: {e}")))?;
    }
    let file = match &cli.config {
        Some(path) => ConfigFile::load(path)?,
        None => ConfigFile::default(),
    };
    let out_dir = cli.out_dir.clone().unwrap_or_else(|| PathBuf::from("."));
    match cli.command {
        Command::Kernel(KernelCommand::Eval(o)) => commands::kernel_eval(&o.merge(&file.kernel)),
        Command::Kernel(KernelCommand::Roots(o)) => commands::kernel_roots(&o),
        Command::Kernel(KernelCommand::Integral(o)) => commands::kernel_integral(&o),
        Command::Sweep(o) => commands::sweep(&o.merge(&file.sweep), &out_dir),
        Command::VerifyQuadrature(o) => {
            commands::verify_quadrature(&o.merge(&file.verify_quadrature), &out_dir)
        }
        Command::Walk(o) => commands::walk(&o.merge(&file.walk), &out_dir),
        Command::Calibrate(o) => commands::calibrate(&o.merge(&file.calibrate), &out_dir),
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
            eprintln!("error: {e}");
            ExitCode::from(e.exit_code() as u8)
        }
    }
}
