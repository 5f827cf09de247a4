use std::collections::BTreeMap;
use std::io::Write;
use std::path::{Path, PathBuf};

use fieldcorr::io::{self, NumericCsv, RunManifest, KERNEL_HEADER};
use fieldcorr::kernels::{integral_to_infinity, zero_crossings};
use fieldcorr::walker::{asymptotic_window, fit_sqrt_growth, growth_exponent, msd_oracle};
use fieldcorr::{
    CalibrationMethod, CalibrationModel, ChainConfig, CorrelationKernel, KernelKind, SamplerMode,
    SmearingSpec, SweepConfig, WalkConfig,
};
use serde_json::json;

use crate::cli::{
    parse_list, parse_or, parse_range, CalibrateOpts, KernelEvalOpts, KernelIntegralOpts, KernelRootsOpts,
    SweepOpts, VerifyOpts, WalkOpts,
};
use crate::error::{CliError, CliResult};

fn usage<T>(msg: impl Into<String>) -> CliResult<T> {
    Err(CliError::Usage(msg.into()))
}

fn parse_kind(s: Option<&str>) -> CliResult<KernelKind> {
    match s {
        None => usage("--kernel is required (scalar, em or squeezed)"),
        Some(s) => s
            .parse()
            .map_err(|e: fieldcorr::Error| CliError::Usage(e.to_string())),
    }
}

fn parse_mode(s: &Option<String>) -> CliResult<SamplerMode> {
    match s {
        None => Ok(SamplerMode::ChainRaw),
        Some(s) => s
            .parse()
            .map_err(|e: fieldcorr::Error| CliError::Usage(e.to_string())),
    }
}

fn build_kernel(kind: KernelKind, k: &Option<String>) -> CliResult<CorrelationKernel> {
    let k = parse_or(k, "k", 1.0)?;
    CorrelationKernel::new(kind, k).map_err(|e| CliError::Usage(e.to_string()))
}

fn write_csv(csv: &NumericCsv, dir: &Path, name: &str, manifest: &mut RunManifest) -> CliResult<PathBuf> {
    let path = dir.join(name);
    let digest = csv.write_file(&path)?;
    manifest.add_output(Path::new(name), digest);
    Ok(path)
}

fn prepare_dir(dir: &Path) -> CliResult<()> {
    std::fs::create_dir_all(dir).map_err(|e| CliError::Io(format!("{}: {e}", dir.display())))
}

pub fn kernel_eval(opts: &KernelEvalOpts) -> CliResult<()> {
    let kernel = build_kernel(parse_kind(opts.kernel.as_deref())?, &opts.k)?;
    let Some(t0) = &opts.t0 else {
        return usage("--t0 is required");
    };
    let mut csv = NumericCsv::new(&KERNEL_HEADER);
    for t in parse_range(t0, "t0")? {
        csv.push(vec![t, kernel.eval(t)?]);
    }
    match &opts.output {
        Some(path) => {
            csv.write_file(path)?;
        }
        None => {
            let bytes = csv.to_bytes()?;
            std::io::stdout().lock().write_all(&bytes)?;
        }
    }
    Ok(())
}

pub fn kernel_roots(opts: &KernelRootsOpts) -> CliResult<()> {
    let kernel = build_kernel(parse_kind(opts.kernel.as_deref())?, &opts.k)?;
    let lo = parse_or(&opts.from, "from", 0.0)?;
    let hi = parse_or(&opts.to, "to", 10.0)?;
    if !(lo < hi) {
        return usage(format!("--from must be below --to, got {lo} and {hi}"));
    }
    let mut csv = NumericCsv::new(&["root"]);
    for r in zero_crossings(&kernel, lo, hi)? {
        csv.push(vec![r]);
    }
    std::io::stdout().lock().write_all(&csv.to_bytes()?)?;
    Ok(())
}

pub fn kernel_integral(opts: &KernelIntegralOpts) -> CliResult<()> {
    let kernel = build_kernel(parse_kind(opts.kernel.as_deref())?, &None)?;
    let res = integral_to_infinity(&kernel)?;
    let mut csv = NumericCsv::new(&["value", "abs_error"]);
    csv.push(vec![res.value, res.abs_error]);
    std::io::stdout().lock().write_all(&csv.to_bytes()?)?;
    Ok(())
}

pub fn sweep(opts: &SweepOpts, out_dir: &Path) -> CliResult<()> {
    let kind = parse_kind(opts.kernel.as_deref())?;
    let kernel = build_kernel(kind, &opts.k)?;
    let method: CalibrationMethod = match &opts.method {
        None => CalibrationMethod::ExactChainInversion,
        Some(s) => s
            .parse()
            .map_err(|e: fieldcorr::Error| CliError::Usage(e.to_string()))?,
    };
    let mode = parse_mode(&opts.mode)?;
    let defaults = SweepConfig::default();
    let config = SweepConfig {
        n_points: parse_or(&opts.points, "points", defaults.n_points)?,
        t0_max: parse_or(&opts.t0_max, "t0-max", defaults.t0_max)?,
        steps_per_point: parse_or(&opts.steps, "steps", defaults.steps_per_point)?,
        seed: parse_or(&opts.seed, "seed", defaults.seed)?,
    };
    config.validate().map_err(|e| CliError::Usage(e.to_string()))?;
    let table_sigma2 = parse_or(&opts.table_sigma2, "table-sigma2", 1.0)?;

    let model = match method {
        CalibrationMethod::PaperTanFit => CalibrationModel::paper_tan_fit(mode),
        CalibrationMethod::ExactChainInversion => CalibrationModel::exact(mode),
        CalibrationMethod::MonteCarloTable => {
            let Some(path) = &opts.table else {
                return usage("--method table needs --table FILE");
            };
            let csv =
                NumericCsv::read_file(path).map_err(|e| CliError::Io(format!("{}: {e}", path.display())))?;
            CalibrationModel::from_table(io::table_from_csv(&csv, mode, table_sigma2)?)
        }
    };

    prepare_dir(out_dir)?;
    let stem = opts
        .name
        .clone()
        .unwrap_or_else(|| format!("sweep_{}_{}_{}", kind.name(), method.name(), mode.name()));
    let resolved = json!({
        "kernel": kind.name(),
        "k": kernel.wavenumber(),
        "method": method.name(),
        "mode": mode.name(),
        "points": config.n_points,
        "steps": config.steps_per_point,
        "t0_max": config.t0_max,
        "seed": config.seed,
        "table": opts.table.as_ref().map(|p| p.display().to_string()),
        "table_sigma2": table_sigma2,
    });
    let mut manifest = RunManifest::new("sweep", resolved, Some(config.seed));

    let result = fieldcorr::sampler::correlation_sweep(&kernel, &model, &config)?;
    let summary = result.summary();
    write_csv(
        &io::sweep_to_csv(&result),
        out_dir,
        &format!("{stem}.csv"),
        &mut manifest,
    )?;
    let mut notes: BTreeMap<String, usize> = BTreeMap::new();
    for row in &result.rows {
        if let Some(n) = &row.note {
            *notes.entry(n.clone()).or_default() += 1;
        }
    }
    manifest.results = json!({ "summary": summary, "infeasible_notes": notes });
    manifest.write_file(&out_dir.join(format!("{stem}.json")))?;

    let variance = kernel.variance();
    println!(
        "sweep {} {} {}: {} feasible, {} infeasible",
        kind.name(),
        method.name(),
        mode.name(),
        summary.feasible,
        summary.infeasible
    );
    println!(
        "max |dev| = {:.6}  rms dev = {:.6}  (variance-normalized: {:.6} / {:.6})",
        summary.max_abs_dev,
        summary.rms_dev,
        summary.max_abs_dev / variance,
        summary.rms_dev / variance
    );
    for (note, count) in &notes {
        eprintln!("warning: {count} point(s) infeasible: {note}");
    }
    if summary.feasible == 0 {
        return Err(CliError::Numerical("every sweep point was infeasible".into()));
    }
    Ok(())
}

pub fn verify_quadrature(opts: &VerifyOpts, out_dir: &Path) -> CliResult<()> {
    let t0 = parse_list(opts.t0.as_deref().unwrap_or("0,0.5,1,2,4,8"), "t0")?;
    let alphas = parse_list(opts.alpha.as_deref().unwrap_or("0.1,1,10"), "alpha")?;
    let defaults = SmearingSpec::default();
    let tol = parse_or(&opts.tol, "tol", 1e-6f64)?;
    let truncation = parse_or(&opts.truncation, "truncation", defaults.truncation_t)?;
    let specs = alphas
        .iter()
        .map(|&alpha| {
            let spec = SmearingSpec {
                alpha,
                truncation_t: truncation,
                // The quadrature target is kept below the pass threshold.
                abs_tol: tol.min(defaults.abs_tol),
            };
            spec.validate()
                .map(|_| spec)
                .map_err(|e| CliError::Usage(e.to_string()))
        })
        .collect::<CliResult<Vec<_>>>()?;
    if !(tol > 0.0) {
        return usage(format!("--tol must be positive, got {tol}"));
    }

    prepare_dir(out_dir)?;
    let stem = opts.name.clone().unwrap_or_else(|| "quadrature".into());
    let resolved = json!({ "t0": t0, "alpha": alphas, "tol": tol, "truncation": truncation });
    let mut manifest = RunManifest::new("verify-quadrature", resolved, None);

    let mut reports = Vec::with_capacity(specs.len());
    for spec in &specs {
        reports.push(fieldcorr::smearing::verify_closed_form(&t0, spec)?);
    }
    let mut failures = 0;
    let mut max_dev = 0.0f64;
    for row in reports.iter().flat_map(|r| &r.rows) {
        let ok = row.converged && row.abs_dev < tol;
        max_dev = max_dev.max(row.abs_dev);
        if !ok {
            failures += 1;
            eprintln!(
                "FAIL t0={} alpha={} dev={:e} err_bound={:e}{}",
                row.t0,
                row.alpha,
                row.abs_dev,
                row.err_bound,
                if row.converged { "" } else { " (not converged)" }
            );
        }
    }
    // Every alpha must give the same answer at each separation.
    let mut alpha_spread = 0.0f64;
    for i in 0..t0.len() {
        let vals: Vec<f64> = reports.iter().map(|r| r.rows[i].quad_value).collect();
        let (lo, hi) = vals
            .iter()
            .fold((f64::INFINITY, f64::NEG_INFINITY), |(lo, hi), &v| {
                (lo.min(v), hi.max(v))
            });
        alpha_spread = alpha_spread.max(hi - lo);
    }

    write_csv(
        &io::report_to_csv(&reports),
        out_dir,
        &format!("{stem}.csv"),
        &mut manifest,
    )?;
    manifest.results = json!({
        "max_abs_dev": max_dev,
        "alpha_spread": alpha_spread,
        "tail_bound": specs[0].tail_bound(),
        "failures": failures,
    });
    manifest.write_file(&out_dir.join(format!("{stem}.json")))?;

    println!(
        "{} points, max |dev| = {:e}, alpha spread = {:e}, failures = {}",
        t0.len() * specs.len(),
        max_dev,
        alpha_spread,
        failures
    );
    if failures > 0 {
        return Err(CliError::Numerical(format!(
            "{failures} point(s) outside tolerance {tol:e}"
        )));
    }
    Ok(())
}

fn parse_window(s: &Option<String>, n_steps: usize) -> CliResult<(usize, usize)> {
    let default = (1, 100.min(n_steps));
    let Some(s) = s else { return Ok(default) };
    let parts: Vec<&str> = s.split(':').collect();
    match parts.as_slice() {
        [a, b] => match (a.trim().parse(), b.trim().parse()) {
            (Ok(a), Ok(b)) => Ok((a, b)),
            _ => usage(format!("--fit-window: malformed '{s}'")),
        },
        _ => usage(format!("--fit-window: expected lo:hi, got '{s}'")),
    }
}

fn f_label(f: f64) -> String {
    io::fmt_num(f)
}

pub fn walk(opts: &WalkOpts, out_dir: &Path) -> CliResult<()> {
    let fs = parse_list(opts.f.as_deref().unwrap_or("-0.5,0,0.5"), "f")?;
    if let Some(bad) = fs.iter().find(|f| f.abs() > 1.0) {
        return usage(format!("--f: shift factors need |f| <= 1, got {bad}"));
    }
    let n_steps = parse_or(&opts.steps, "steps", 100usize)?;
    let n_walkers = parse_or(&opts.walkers, "walkers", 100_000usize)?;
    let seed = parse_or(&opts.seed, "seed", 0u64)?;
    let mode = parse_mode(&opts.mode)?;
    let sigma2 = parse_or(&opts.sigma2, "sigma2", 1.0f64)?;
    if !(sigma2 > 0.0 && sigma2.is_finite()) {
        return usage(format!("--sigma2 must be positive, got {sigma2}"));
    }
    if n_steps < 1 || n_walkers < 1 {
        return usage("--steps and --walkers must be at least 1");
    }
    let window = parse_window(&opts.fit_window, n_steps)?;

    prepare_dir(out_dir)?;
    let stem = opts.name.clone().unwrap_or_else(|| "walk".into());
    let resolved = json!({
        "f": fs, "steps": n_steps, "walkers": n_walkers, "seed": seed,
        "mode": mode.name(), "sigma2": sigma2, "fit_window": [window.0, window.1],
    });
    let mut manifest = RunManifest::new("walk", resolved, Some(seed));

    let mut per_f = Vec::new();
    let mut slopes = Vec::new();
    for &f in &fs {
        let config = WalkConfig {
            sigma2,
            fit_window: window,
            ..WalkConfig::new(f, mode, n_steps, n_walkers, seed)
        };
        let result = fieldcorr::walker::run_walk_ensemble(&config)?;
        write_csv(
            &io::walk_to_csv(&result),
            out_dir,
            &format!("{stem}_f{}.csv", f_label(f)),
            &mut manifest,
        )?;
        let fit = match result.fit {
            Some(fit) => fit,
            None => fit_sqrt_growth(&result, window)?,
        };
        let exponent = growth_exponent(&result, asymptotic_window(n_steps)).ok();
        let oracle = ChainConfig::new(f, sigma2, mode)
            .ok()
            .map(|c| msd_oracle(&c, n_steps));
        slopes.push((f, fit.c1, fit.c1_stderr));
        per_f.push(json!({
            "f": f,
            "c1": fit.c1, "c1_stderr": fit.c1_stderr,
            "c0": fit.c0, "c0_stderr": fit.c0_stderr,
            "growth_exponent": exponent,
            "msd_final": result.msd[n_steps].msd,
            "msd_final_stderr": result.msd[n_steps].stderr,
            "msd_final_oracle": oracle,
        }));
        if opts.fit {
            println!(
                "f = {:>6}: c1 = {:.5} +- {:.5}  c0 = {:.5} +- {:.5}  exponent = {}",
                f_label(f),
                fit.c1,
                fit.c1_stderr,
                fit.c0,
                fit.c0_stderr,
                exponent.map_or("n/a".into(), |e| format!("{e:.4}"))
            );
        } else {
            println!(
                "f = {:>6}: <y^2> at N = {n_steps} is {:.4} +- {:.4}",
                f_label(f),
                result.msd[n_steps].msd,
                result.msd[n_steps].stderr
            );
        }
    }

    let reference = slopes.iter().find(|s| s.0 == 0.0).map(|s| s.1);
    let ratios: Vec<_> = match reference {
        Some(c1_zero) => slopes
            .iter()
            .map(|&(f, c1, _)| json!({ "f": f, "ratio_to_f0": c1 / c1_zero }))
            .collect(),
        None => Vec::new(),
    };
    if opts.fit {
        if let Some(c1_zero) = reference {
            for &(f, c1, _) in slopes.iter().filter(|s| s.0 != 0.0) {
                println!("c1({}) / c1(0) = {:.4}", f_label(f), c1 / c1_zero);
            }
        }
    }
    manifest.results = json!({ "fits": per_f, "ratios": ratios });
    manifest.write_file(&out_dir.join(format!("{stem}.json")))?;
    Ok(())
}

pub fn calibrate(opts: &CalibrateOpts, out_dir: &Path) -> CliResult<()> {
    let mode = parse_mode(&opts.mode)?;
    let grid = parse_range(opts.grid.as_deref().unwrap_or("-0.98:0.98:41"), "grid")?;
    let steps = parse_or(&opts.steps, "steps", 100_000usize)?;
    let seed = parse_or(&opts.seed, "seed", 0u64)?;
    let sigma2 = parse_or(&opts.sigma2, "sigma2", 1.0f64)?;
    if grid.len() < 2 {
        return usage("--grid needs at least 2 points");
    }

    prepare_dir(out_dir)?;
    let stem = opts
        .name
        .clone()
        .unwrap_or_else(|| format!("calibration_{}", mode.name()));
    let resolved =
        json!({ "mode": mode.name(), "grid": grid, "steps": steps, "seed": seed, "sigma2": sigma2 });
    let mut manifest = RunManifest::new("calibrate", resolved, Some(seed));

    let table = fieldcorr::calibration::calibrate_monte_carlo(mode, sigma2, &grid, steps, seed)?;
    write_csv(
        &io::table_to_csv(&table),
        out_dir,
        &format!("{stem}.csv"),
        &mut manifest,
    )?;
    manifest.results = json!({ "rows": table.rows().len() });
    manifest.write_file(&out_dir.join(format!("{stem}.json")))?;
    println!("{} shifts calibrated in {} mode", table.rows().len(), mode.name());
    Ok(())
}
