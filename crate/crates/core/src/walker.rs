//! Random walk of a test particle whose displacement each step is the sampled
//! field value, and fits of the resulting mean squared displacement.

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::sampler::{ChainConfig, SamplerMode, ShiftChain};

/// Walkers per aggregation block. Fixed so that summation order, and hence
/// every output bit, is independent of the thread count.
const BLOCK: usize = 1024;

/// Default fit window `[1, 100]`.
pub const DEFAULT_FIT_WINDOW: (usize, usize) = (1, 100);

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct WalkConfig {
    pub f: f64,
    pub sigma2: f64,
    pub mode: SamplerMode,
    pub n_steps: usize,
    pub n_walkers: usize,
    pub seed: u64,
    /// Inclusive range of step counts used for the linear fit.
    pub fit_window: (usize, usize),
}

impl WalkConfig {
    pub fn new(f: f64, mode: SamplerMode, n_steps: usize, n_walkers: usize, seed: u64) -> Self {
        Self {
            f,
            sigma2: 1.0,
            mode,
            n_steps,
            n_walkers,
            seed,
            fit_window: (DEFAULT_FIT_WINDOW.0, DEFAULT_FIT_WINDOW.1.min(n_steps)),
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct MsdPoint {
    pub n: usize,
    pub msd: f64,
    pub stderr: f64,
}

/// Least-squares line `msd ~ c1 N + c0`, i.e. `y ~ sqrt(c1 N + c0)`.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct SqrtGrowthFit {
    pub c1: f64,
    pub c0: f64,
    /// Ensemble standard errors; NaN when fitted from averages alone.
    pub c1_stderr: f64,
    pub c0_stderr: f64,
    pub window: (usize, usize),
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct WalkEnsembleResult {
    pub config: WalkConfig,
    /// `msd[N]` for `N = 0..=n_steps`.
    pub msd: Vec<MsdPoint>,
    pub fit: Option<SqrtGrowthFit>,
}

fn check_window(window: (usize, usize), n_max: usize) -> Result<()> {
    let (lo, hi) = window;
    if lo > hi || hi > n_max {
        return Err(Error::DegenerateWindow(format!(
            "window [{lo}, {hi}] not inside [0, {n_max}]"
        )));
    }
    if hi - lo + 1 < 10 {
        return Err(Error::DegenerateWindow(format!(
            "window [{lo}, {hi}] has fewer than 10 points"
        )));
    }
    Ok(())
}

/// OLS weights: slope = sum w1[i] y_i and intercept = sum w0[i] y_i over the window.
fn ols_weights(window: (usize, usize)) -> (Vec<f64>, Vec<f64>) {
    let xs: Vec<f64> = (window.0..=window.1).map(|n| n as f64).collect();
    let m = xs.len() as f64;
    let mean = xs.iter().sum::<f64>() / m;
    let sxx: f64 = xs.iter().map(|x| (x - mean) * (x - mean)).sum();
    let w1: Vec<f64> = xs.iter().map(|x| (x - mean) / sxx).collect();
    let w0: Vec<f64> = w1.iter().map(|w| 1.0 / m - mean * w).collect();
    (w1, w0)
}

#[derive(Clone)]
struct BlockSums {
    sq: Vec<f64>,
    quad: Vec<f64>,
    slope: [f64; 2],
    intercept: [f64; 2],
}

impl BlockSums {
    fn zeros(len: usize) -> Self {
        Self {
            sq: vec![0.0; len],
            quad: vec![0.0; len],
            slope: [0.0; 2],
            intercept: [0.0; 2],
        }
    }

    fn merge(&mut self, other: &BlockSums) {
        for (a, b) in self.sq.iter_mut().zip(&other.sq) {
            *a += b;
        }
        for (a, b) in self.quad.iter_mut().zip(&other.quad) {
            *a += b;
        }
        for k in 0..2 {
            self.slope[k] += other.slope[k];
            self.intercept[k] += other.intercept[k];
        }
    }
}

/// Runs `n_walkers` independent walks of `n_steps` steps.
///
/// Walker `i` draws from stream `(seed, i)`. The fit over `config.fit_window`
/// carries ensemble standard errors computed from per-walker projections.
pub fn run_walk_ensemble(config: &WalkConfig) -> Result<WalkEnsembleResult> {
    if config.n_steps < 1 || config.n_walkers < 1 {
        return Err(Error::Precondition(format!(
            "need n_steps >= 1 and n_walkers >= 1, got {} and {}",
            config.n_steps, config.n_walkers
        )));
    }
    let chain = ChainConfig::new(config.f, config.sigma2, config.mode)?;
    let fit_window = check_window(config.fit_window, config.n_steps)
        .ok()
        .map(|_| config.fit_window);
    let weights = fit_window.map(ols_weights);
    let len = config.n_steps + 1;

    let n_blocks = config.n_walkers.div_ceil(BLOCK);
    let blocks: Vec<BlockSums> = (0..n_blocks)
        .into_par_iter()
        .map(|b| {
            let mut sums = BlockSums::zeros(len);
            let mut y2 = vec![0.0; len];
            let end = ((b + 1) * BLOCK).min(config.n_walkers);
            for walker in b * BLOCK..end {
                let mut sampler = ShiftChain::new(chain, config.seed, walker as u64);
                let mut y = 0.0;
                for n in 1..len {
                    y += sampler.draw_next();
                    let s = y * y;
                    y2[n] = s;
                    sums.sq[n] += s;
                    sums.quad[n] += s * s;
                }
                if let (Some((w1, w0)), Some((lo, _))) = (&weights, fit_window) {
                    let window = &y2[lo..lo + w1.len()];
                    let slope: f64 = w1.iter().zip(window).map(|(w, v)| w * v).sum();
                    let icpt: f64 = w0.iter().zip(window).map(|(w, v)| w * v).sum();
                    sums.slope[0] += slope;
                    sums.slope[1] += slope * slope;
                    sums.intercept[0] += icpt;
                    sums.intercept[1] += icpt * icpt;
                }
            }
            sums
        })
        .collect();

    let mut total = BlockSums::zeros(len);
    for b in &blocks {
        total.merge(b);
    }

    let w = config.n_walkers as f64;
    let mean_and_err = |sum: f64, sum_sq: f64| {
        let mean = sum / w;
        let err = if config.n_walkers > 1 {
            let var = ((sum_sq - w * mean * mean) / (w - 1.0)).max(0.0);
            (var / w).sqrt()
        } else {
            f64::NAN
        };
        (mean, err)
    };
    let msd = (0..len)
        .map(|n| {
            let (m, e) = mean_and_err(total.sq[n], total.quad[n]);
            MsdPoint { n, msd: m, stderr: e }
        })
        .collect();
    let fit = fit_window.map(|window| {
        let (c1, c1_stderr) = mean_and_err(total.slope[0], total.slope[1]);
        let (c0, c0_stderr) = mean_and_err(total.intercept[0], total.intercept[1]);
        SqrtGrowthFit {
            c1,
            c0,
            c1_stderr,
            c0_stderr,
            window,
        }
    });
    Ok(WalkEnsembleResult {
        config: *config,
        msd,
        fit,
    })
}

/// Ordinary least squares of `msd` against `N` over the inclusive window.
pub fn fit_sqrt_growth(result: &WalkEnsembleResult, window: (usize, usize)) -> Result<SqrtGrowthFit> {
    check_window(window, result.msd.len().saturating_sub(1))?;
    let (w1, w0) = ols_weights(window);
    let ys = &result.msd[window.0..=window.1];
    let c1 = w1.iter().zip(ys).map(|(w, p)| w * p.msd).sum();
    let c0 = w0.iter().zip(ys).map(|(w, p)| w * p.msd).sum();
    Ok(SqrtGrowthFit {
        c1,
        c0,
        c1_stderr: f64::NAN,
        c0_stderr: f64::NAN,
        window,
    })
}

/// Window `[N/5, N]` for [`growth_exponent`], away from the small-N transient.
pub fn asymptotic_window(n_steps: usize) -> (usize, usize) {
    ((n_steps / 5).max(1), n_steps)
}

/// Slope of `ln msd` against `ln N` over the window; 1 for diffusive growth.
pub fn growth_exponent(result: &WalkEnsembleResult, window: (usize, usize)) -> Result<f64> {
    check_window(window, result.msd.len().saturating_sub(1))?;
    if window.0 == 0 {
        return Err(Error::DegenerateWindow("log-log fit needs N >= 1".into()));
    }
    let pts: Vec<(f64, f64)> = result.msd[window.0..=window.1]
        .iter()
        .map(|p| ((p.n as f64).ln(), p.msd.ln()))
        .collect();
    let m = pts.len() as f64;
    let mx = pts.iter().map(|p| p.0).sum::<f64>() / m;
    let my = pts.iter().map(|p| p.1).sum::<f64>() / m;
    let sxy: f64 = pts.iter().map(|p| (p.0 - mx) * (p.1 - my)).sum();
    let sxx: f64 = pts.iter().map(|p| (p.0 - mx) * (p.0 - mx)).sum();
    Ok(sxy / sxx)
}

/// `sum_{i,j < n} f^|i-j|` in closed form.
pub fn geometric_partial_sum(f: f64, n: usize) -> f64 {
    let nf = n as f64;
    if f == 1.0 {
        return nf * nf;
    }
    let g = 1.0 - f;
    nf * (1.0 + f) / g - 2.0 * f * (1.0 - f.powi(n as i32)) / (g * g)
}

/// Exact `<y_N^2>` for the given sampler configuration.
pub fn msd_oracle(config: &ChainConfig, n: usize) -> f64 {
    let ChainConfig { f, sigma2, mode } = *config;
    match mode {
        SamplerMode::ChainRaw => sigma2 / (1.0 - f * f) * geometric_partial_sum(f, n),
        SamplerMode::ChainNormalized => sigma2 * geometric_partial_sum(f, n),
        SamplerMode::PairMode => {
            let pairs = (n / 2) as f64;
            let odd = if n % 2 == 1 { sigma2 } else { 0.0 };
            pairs * sigma2 * (2.0 + 2.0 * f + f * f) + odd
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn brute_force_ar1(f: f64, n: usize) -> f64 {
        let mut s = 0.0;
        for i in 0..n {
            for j in 0..n {
                s += f.powi((i as i32 - j as i32).abs());
            }
        }
        s
    }

    #[test]
    fn partial_sum_matches_brute_force() {
        for f in [-0.9, -0.5, 0.0, 0.3, 0.5, 0.99, 1.0] {
            for n in [1, 2, 10, 50, 100] {
                let a = geometric_partial_sum(f, n);
                let b = brute_force_ar1(f, n);
                assert!(
                    (a - b).abs() <= 1e-10 * b.abs().max(1.0),
                    "f = {f}, n = {n}: {a} vs {b}"
                );
            }
        }
    }

    #[test]
    fn oracle_reference_values() {
        let cfg = ChainConfig::new(0.5, 1.0, SamplerMode::ChainRaw).unwrap();
        let v = msd_oracle(&cfg, 100);
        assert!((v - brute_force_ar1(0.5, 100) / 0.75).abs() < 1e-9);
        assert!((v - 394.6667).abs() < 1e-3);
        let cfg = ChainConfig::new(-0.5, 1.0, SamplerMode::ChainRaw).unwrap();
        assert!((msd_oracle(&cfg, 100) - 45.0370).abs() < 1e-3);
    }

    #[test]
    fn pair_oracle_by_enumeration() {
        // covariance of (x1, x2) = sigma2 [[1, f], [f, 1 + f^2]], pairs independent
        let (f, s2) = (0.4, 2.0);
        let cfg = ChainConfig::new(f, s2, SamplerMode::PairMode).unwrap();
        for n in 1..12 {
            let mut total = 0.0;
            for i in 0..n {
                for j in 0..n {
                    total += if i / 2 != j / 2 {
                        0.0
                    } else if i == j {
                        if i % 2 == 0 {
                            s2
                        } else {
                            s2 * (1.0 + f * f)
                        }
                    } else {
                        f * s2
                    };
                }
            }
            assert!((msd_oracle(&cfg, n) - total).abs() < 1e-12, "n = {n}");
        }
    }

    #[test]
    fn fit_exact_line() {
        let msd = (0..=100)
            .map(|n| MsdPoint {
                n,
                msd: n as f64,
                stderr: 0.0,
            })
            .collect();
        let res = WalkEnsembleResult {
            config: WalkConfig::new(0.0, SamplerMode::ChainRaw, 100, 1, 0),
            msd,
            fit: None,
        };
        let fit = fit_sqrt_growth(&res, (1, 100)).unwrap();
        assert!((fit.c1 - 1.0).abs() < 1e-12);
        assert!(fit.c0.abs() < 1e-10);
        assert!((growth_exponent(&res, (20, 100)).unwrap() - 1.0).abs() < 1e-12);
        assert!(fit_sqrt_growth(&res, (1, 5)).is_err());
        assert!(fit_sqrt_growth(&res, (50, 200)).is_err());
        assert!(growth_exponent(&res, (0, 20)).is_err());
    }

    #[test]
    fn preconditions() {
        let mut cfg = WalkConfig::new(0.0, SamplerMode::ChainRaw, 0, 10, 0);
        assert!(run_walk_ensemble(&cfg).is_err());
        cfg.n_steps = 10;
        cfg.n_walkers = 0;
        assert!(run_walk_ensemble(&cfg).is_err());
        let cfg = WalkConfig::new(1.5, SamplerMode::ChainRaw, 10, 10, 0);
        assert!(run_walk_ensemble(&cfg).is_err());
        let cfg = WalkConfig::new(1.0, SamplerMode::ChainRaw, 10, 10, 0);
        assert!(matches!(run_walk_ensemble(&cfg), Err(Error::NonStationary)));
    }

    #[test]
    fn short_walks_skip_the_fit() {
        let res = run_walk_ensemble(&WalkConfig::new(0.2, SamplerMode::ChainRaw, 5, 100, 1)).unwrap();
        assert!(res.fit.is_none());
        assert_eq!(res.msd.len(), 6);
        assert_eq!(res.msd[0].msd, 0.0);
        assert!(res.msd.iter().all(|p| p.msd >= 0.0));
    }

    #[test]
    fn uncorrelated_walk_is_diffusive() {
        for mode in [
            SamplerMode::PairMode,
            SamplerMode::ChainRaw,
            SamplerMode::ChainNormalized,
        ] {
            let res = run_walk_ensemble(&WalkConfig::new(0.0, mode, 100, 100_000, 3)).unwrap();
            for n in [10, 50, 100] {
                let p = res.msd[n];
                assert!((p.msd - n as f64).abs() < 4.0 * p.stderr, "{mode}: {p:?}");
            }
        }
    }

    #[test]
    fn ensemble_fit_agrees_with_refit() {
        let res = run_walk_ensemble(&WalkConfig::new(0.5, SamplerMode::ChainRaw, 100, 5_000, 2)).unwrap();
        let fit = res.fit.unwrap();
        let refit = fit_sqrt_growth(&res, fit.window).unwrap();
        assert!((fit.c1 - refit.c1).abs() < 1e-9 * fit.c1.abs());
        assert!((fit.c0 - refit.c0).abs() < 1e-9 * fit.c1.abs());
        assert!(fit.c1_stderr > 0.0);
    }
}
