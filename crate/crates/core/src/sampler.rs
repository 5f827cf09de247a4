//! Gaussian outcomes whose distribution is recentred on a multiple of the
//! previous outcome.
//!
//! A [`ShiftChain`] draws `x_{n+1} ~ N(f x_n, s^2)`. How `s^2` is chosen and
//! whether consecutive draws form one long chain or independent pairs is set by
//! the [`SamplerMode`]:
//!
//! | mode              | innovation variance | lag-1 covariance      | marginal variance |
//! |-------------------|---------------------|-----------------------|-------------------|
//! | `PairMode`        | `sigma2`            | `f sigma2`            | first draw `sigma2` |
//! | `ChainRaw`        | `sigma2`            | `f sigma2 / (1-f^2)`  | `sigma2 / (1-f^2)` |
//! | `ChainNormalized` | `sigma2 (1-f^2)`    | `f sigma2`            | `sigma2`          |

use std::fmt;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::calibration::CalibrationModel;
use crate::error::{Error, Result};
use crate::kernels::{CorrelationKernel, KernelKind};
use crate::rng::Stream;

/// Default number of separations per correlation sweep.
pub const DEFAULT_SWEEP_POINTS: usize = 801;
/// Default sampler steps behind each sweep point.
pub const DEFAULT_STEPS_PER_POINT: usize = 20_000;
/// Inflation applied to the i.i.d. standard error of serially correlated products.
pub const SERIAL_STDERR_INFLATION: f64 = 1.732_050_807_568_877_2;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum SamplerMode {
    /// Independent (x1, x2) measurement pairs; only x2 is shifted.
    PairMode,
    /// One chain with unit-scale innovations; marginal variance grows as 1/(1-f^2).
    ChainRaw,
    /// One chain with innovations shrunk so the marginal variance stays sigma2.
    ChainNormalized,
}

impl SamplerMode {
    pub fn name(self) -> &'static str {
        match self {
            SamplerMode::PairMode => "pair",
            SamplerMode::ChainRaw => "chain-raw",
            SamplerMode::ChainNormalized => "chain-normalized",
        }
    }

    /// Closed-form lag-1 covariance for shift `f` and base variance `sigma2`.
    pub fn lag1_covariance(self, f: f64, sigma2: f64) -> f64 {
        match self {
            SamplerMode::PairMode | SamplerMode::ChainNormalized => f * sigma2,
            SamplerMode::ChainRaw => f * sigma2 / (1.0 - f * f),
        }
    }

    /// Stationary marginal variance of a chain (for `PairMode`, of the unshifted draw).
    pub fn marginal_variance(self, f: f64, sigma2: f64) -> f64 {
        match self {
            SamplerMode::PairMode | SamplerMode::ChainNormalized => sigma2,
            SamplerMode::ChainRaw => sigma2 / (1.0 - f * f),
        }
    }

    fn innovation_variance(self, f: f64, sigma2: f64) -> f64 {
        match self {
            SamplerMode::PairMode | SamplerMode::ChainRaw => sigma2,
            SamplerMode::ChainNormalized => sigma2 * (1.0 - f * f),
        }
    }
}

impl fmt::Display for SamplerMode {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl std::str::FromStr for SamplerMode {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "pair" => Ok(SamplerMode::PairMode),
            "chain-raw" | "raw" => Ok(SamplerMode::ChainRaw),
            "chain-normalized" | "normalized" => Ok(SamplerMode::ChainNormalized),
            other => Err(Error::InvalidParameter(format!(
                "unknown sampler mode '{other}' (expected pair, chain-raw or chain-normalized)"
            ))),
        }
    }
}

/// Parameters shared by every chain of a run.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct ChainConfig {
    pub f: f64,
    pub sigma2: f64,
    pub mode: SamplerMode,
}

impl ChainConfig {
    pub fn new(f: f64, sigma2: f64, mode: SamplerMode) -> Result<Self> {
        if !f.is_finite() || f.abs() > 1.0 {
            return Err(Error::InvalidParameter(format!(
                "shift factor must satisfy |f| <= 1, got {f}"
            )));
        }
        if !(sigma2.is_finite() && sigma2 > 0.0) {
            return Err(Error::InvalidParameter(format!(
                "sigma2 must be positive, got {sigma2}"
            )));
        }
        if mode == SamplerMode::ChainRaw && f.abs() == 1.0 {
            return Err(Error::NonStationary);
        }
        Ok(Self { f, sigma2, mode })
    }

    pub fn lag1_covariance(&self) -> f64 {
        self.mode.lag1_covariance(self.f, self.sigma2)
    }
}

/// Stateful correlated Gaussian sampler. Single owner; not shared between threads.
#[derive(Clone, Debug)]
pub struct ShiftChain {
    config: ChainConfig,
    innovation_sd: f64,
    start_sd: f64,
    last_outcome: Option<f64>,
    draws: u64,
    stream: Stream,
}

impl ShiftChain {
    /// A chain on stream `(seed, stream_id)`, started from its stationary law.
    pub fn new(config: ChainConfig, seed: u64, stream_id: u64) -> Self {
        let ChainConfig { f, sigma2, mode } = config;
        Self {
            config,
            innovation_sd: mode.innovation_variance(f, sigma2).sqrt(),
            start_sd: mode.marginal_variance(f, sigma2).sqrt(),
            last_outcome: None,
            draws: 0,
            stream: Stream::new(seed, stream_id),
        }
    }

    /// Starts a raw chain at zero instead of its stationary law and discards
    /// `steps` draws. Other modes already start stationary.
    pub fn with_burn_in(mut self, steps: usize) -> Self {
        if self.config.mode == SamplerMode::ChainRaw {
            self.start_sd = self.config.sigma2.sqrt();
            for _ in 0..steps {
                self.draw_next();
            }
            self.draws = 0;
        }
        self
    }

    pub fn config(&self) -> &ChainConfig {
        &self.config
    }

    pub fn last_outcome(&self) -> Option<f64> {
        self.last_outcome
    }

    /// Draws the next outcome and advances the chain.
    #[inline]
    pub fn draw_next(&mut self) -> f64 {
        let fresh = match self.config.mode {
            SamplerMode::PairMode => self.draws.is_multiple_of(2),
            _ => self.last_outcome.is_none(),
        };
        let x = if fresh {
            self.stream.normal(0.0, self.start_sd)
        } else {
            let prev = self.last_outcome.expect("shifted draw follows an outcome");
            self.stream.normal(self.config.f * prev, self.innovation_sd)
        };
        self.last_outcome = Some(x);
        self.draws += 1;
        x
    }
}

/// Mean of a set of products with its standard error.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct Lag1Estimate {
    pub estimate: f64,
    /// Standard error treating the products as independent.
    pub stderr: f64,
    pub n_products: usize,
    /// True if the products came from one serially correlated chain.
    pub serial: bool,
}

impl Lag1Estimate {
    /// Standard error for reporting: inflated by sqrt(3) for chain products.
    pub fn reported_stderr(&self) -> f64 {
        if self.serial {
            SERIAL_STDERR_INFLATION * self.stderr
        } else {
            self.stderr
        }
    }
}

#[derive(Default)]
struct MeanAccumulator {
    n: usize,
    sum: f64,
    sum_sq: f64,
}

impl MeanAccumulator {
    #[inline]
    fn push(&mut self, v: f64) {
        self.n += 1;
        self.sum += v;
        self.sum_sq += v * v;
    }

    fn mean(&self) -> f64 {
        self.sum / self.n as f64
    }

    fn stderr(&self) -> f64 {
        let n = self.n as f64;
        if self.n < 2 {
            return f64::NAN;
        }
        let mean = self.sum / n;
        let var = ((self.sum_sq - n * mean * mean) / (n - 1.0)).max(0.0);
        (var / n).sqrt()
    }
}

/// Average product of consecutive outcomes over a fresh sequence.
///
/// For chains, `n_steps` draws give `n_steps - 1` products. In `PairMode` each
/// step is one independent measurement pair and contributes one product.
pub fn estimate_lag1(
    config: &ChainConfig,
    n_steps: usize,
    seed: u64,
    stream_id: u64,
) -> Result<Lag1Estimate> {
    if n_steps < 2 {
        return Err(Error::Precondition(format!(
            "need at least 2 steps, got {n_steps}"
        )));
    }
    let mut chain = ShiftChain::new(*config, seed, stream_id);
    let mut acc = MeanAccumulator::default();
    match config.mode {
        SamplerMode::PairMode => {
            for _ in 0..n_steps {
                let x1 = chain.draw_next();
                let x2 = chain.draw_next();
                acc.push(x1 * x2);
            }
        }
        SamplerMode::ChainRaw | SamplerMode::ChainNormalized => {
            let mut prev = chain.draw_next();
            for _ in 1..n_steps {
                let x = chain.draw_next();
                acc.push(prev * x);
                prev = x;
            }
        }
    }
    Ok(Lag1Estimate {
        estimate: acc.mean(),
        stderr: acc.stderr(),
        n_products: acc.n,
        serial: config.mode != SamplerMode::PairMode,
    })
}

/// Moments of one long chain: mean, variance and lag-1/lag-2 autocovariances.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct ChainMoments {
    pub n: usize,
    pub mean: f64,
    pub variance: f64,
    pub lag1: Lag1Estimate,
    pub lag2: Lag1Estimate,
    /// Fourth standardized moment of the innovations `x_{n+1} - f x_n`.
    pub innovation_kurtosis: f64,
}

/// Runs one chain (`ChainRaw` or `ChainNormalized`) for `n_steps` and collects its moments.
pub fn chain_moments(
    config: &ChainConfig,
    n_steps: usize,
    seed: u64,
    stream_id: u64,
) -> Result<ChainMoments> {
    if config.mode == SamplerMode::PairMode {
        return Err(Error::InvalidParameter("chain moments need a chain mode".into()));
    }
    if n_steps < 3 {
        return Err(Error::Precondition(format!(
            "need at least 3 steps, got {n_steps}"
        )));
    }
    let mut chain = ShiftChain::new(*config, seed, stream_id);
    let mut x = MeanAccumulator::default();
    let (mut l1, mut l2) = (MeanAccumulator::default(), MeanAccumulator::default());
    let (mut m2, mut m4) = (0.0, 0.0);
    let mut prev2 = f64::NAN;
    let mut prev1 = chain.draw_next();
    x.push(prev1);
    for i in 1..n_steps {
        let v = chain.draw_next();
        x.push(v);
        l1.push(prev1 * v);
        if i >= 2 {
            l2.push(prev2 * v);
        }
        let e = v - config.f * prev1;
        m2 += e * e;
        m4 += e.powi(4);
        prev2 = prev1;
        prev1 = v;
    }
    let n_innov = (n_steps - 1) as f64;
    let m2 = m2 / n_innov;
    let variance = x.sum_sq / x.n as f64 - x.mean() * x.mean();
    let lag = |acc: &MeanAccumulator| Lag1Estimate {
        estimate: acc.mean(),
        stderr: acc.stderr(),
        n_products: acc.n,
        serial: true,
    };
    Ok(ChainMoments {
        n: n_steps,
        mean: x.mean(),
        variance,
        lag1: lag(&l1),
        lag2: lag(&l2),
        innovation_kurtosis: (m4 / n_innov) / (m2 * m2),
    })
}

/// Grid and sampling budget of a correlation sweep.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct SweepConfig {
    pub n_points: usize,
    pub t0_max: f64,
    pub steps_per_point: usize,
    pub seed: u64,
}

impl Default for SweepConfig {
    fn default() -> Self {
        Self {
            n_points: DEFAULT_SWEEP_POINTS,
            t0_max: 8.0,
            steps_per_point: DEFAULT_STEPS_PER_POINT,
            seed: 0,
        }
    }
}

impl SweepConfig {
    pub fn validate(&self) -> Result<()> {
        if self.n_points < 2 {
            return Err(Error::Precondition(format!(
                "sweep needs at least 2 points, got {}",
                self.n_points
            )));
        }
        if !(self.t0_max.is_finite() && self.t0_max > 0.0) {
            return Err(Error::Precondition(format!(
                "t0_max must be positive, got {}",
                self.t0_max
            )));
        }
        if self.steps_per_point < 100 {
            return Err(Error::Precondition(format!(
                "need at least 100 steps per point, got {}",
                self.steps_per_point
            )));
        }
        Ok(())
    }

    pub fn t0_at(&self, i: usize) -> f64 {
        if i + 1 == self.n_points {
            self.t0_max
        } else {
            self.t0_max * i as f64 / (self.n_points - 1) as f64
        }
    }
}

/// One separation of a sweep. Infeasible calibrations leave the simulated
/// fields as NaN and set `note`.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SweepRow {
    pub t0: f64,
    pub c_analytic: f64,
    pub f_shift: f64,
    pub c_simulated: f64,
    pub stderr: f64,
    pub n_steps: usize,
    pub note: Option<String>,
}

impl SweepRow {
    pub fn is_feasible(&self) -> bool {
        self.note.is_none()
    }
}

/// Provenance carried alongside sweep rows.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SweepManifest {
    pub seed: u64,
    pub kernel: KernelKind,
    pub wavenumber_k: f64,
    pub method: String,
    pub mode: SamplerMode,
    pub n_points: usize,
    pub t0_max: f64,
    pub steps_per_point: usize,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SweepResult {
    pub rows: Vec<SweepRow>,
    pub manifest: SweepManifest,
}

/// Deviation of simulated from analytic correlation over the feasible rows.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct SweepSummary {
    pub max_abs_dev: f64,
    pub rms_dev: f64,
    pub feasible: usize,
    pub infeasible: usize,
}

impl SweepResult {
    pub fn summary(&self) -> SweepSummary {
        let mut max_abs_dev = 0.0f64;
        let mut sum_sq = 0.0;
        let mut feasible = 0;
        for row in self.rows.iter().filter(|r| r.is_feasible()) {
            let d = row.c_simulated - row.c_analytic;
            max_abs_dev = max_abs_dev.max(d.abs());
            sum_sq += d * d;
            feasible += 1;
        }
        SweepSummary {
            max_abs_dev,
            rms_dev: if feasible > 0 {
                (sum_sq / feasible as f64).sqrt()
            } else {
                f64::NAN
            },
            feasible,
            infeasible: self.rows.len() - feasible,
        }
    }
}

/// Simulated against analytic correlation on the uniform grid `[0, t0_max]`.
///
/// Point `i` runs on stream `(seed, i)`, so the result does not depend on the
/// number of worker threads.
pub fn correlation_sweep(
    kernel: &CorrelationKernel,
    calib: &CalibrationModel,
    config: &SweepConfig,
) -> Result<SweepResult> {
    config.validate()?;
    let mode = calib.sampler_mode();
    let rows = (0..config.n_points)
        .into_par_iter()
        .map(|i| {
            let t0 = config.t0_at(i);
            let c_analytic = kernel.value(t0);
            let shifted = calib
                .shift_for(kernel, t0)
                .and_then(|f| ChainConfig::new(f, kernel.variance(), mode))
                .and_then(|cfg| {
                    estimate_lag1(&cfg, config.steps_per_point, config.seed, i as u64).map(|e| (cfg.f, e))
                });
            match shifted {
                Ok((f_shift, est)) => SweepRow {
                    t0,
                    c_analytic,
                    f_shift,
                    c_simulated: est.estimate,
                    stderr: est.reported_stderr(),
                    n_steps: config.steps_per_point,
                    note: None,
                },
                Err(e) => SweepRow {
                    t0,
                    c_analytic,
                    f_shift: f64::NAN,
                    c_simulated: f64::NAN,
                    stderr: f64::NAN,
                    n_steps: 0,
                    note: Some(e.to_string()),
                },
            }
        })
        .collect();
    Ok(SweepResult {
        rows,
        manifest: SweepManifest {
            seed: config.seed,
            kernel: kernel.kind(),
            wavenumber_k: kernel.wavenumber(),
            method: calib.method().name().to_string(),
            mode,
            n_points: config.n_points,
            t0_max: config.t0_max,
            steps_per_point: config.steps_per_point,
        },
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    fn cfg(f: f64, mode: SamplerMode) -> ChainConfig {
        ChainConfig::new(f, 1.0, mode).unwrap()
    }

    #[test]
    fn config_validation() {
        assert!(ChainConfig::new(1.5, 1.0, SamplerMode::PairMode).is_err());
        assert!(ChainConfig::new(0.5, 0.0, SamplerMode::PairMode).is_err());
        assert!(matches!(
            ChainConfig::new(1.0, 1.0, SamplerMode::ChainRaw),
            Err(Error::NonStationary)
        ));
        assert!(ChainConfig::new(-1.0, 1.0, SamplerMode::ChainNormalized).is_ok());
    }

    #[test]
    fn unshifted_draws_are_centred() {
        for mode in [
            SamplerMode::PairMode,
            SamplerMode::ChainRaw,
            SamplerMode::ChainNormalized,
        ] {
            let mut chain = ShiftChain::new(cfg(0.0, mode), 11, 0);
            let n = 100_000;
            let mean = (0..n).map(|_| chain.draw_next()).sum::<f64>() / n as f64;
            assert!(mean.abs() < 4.0 / (n as f64).sqrt(), "{mode}: {mean}");
        }
    }

    #[test]
    fn raw_chain_lag1() {
        let est = estimate_lag1(&cfg(0.5, SamplerMode::ChainRaw), 1_000_000, 5, 0).unwrap();
        assert!((est.estimate - 2.0 / 3.0).abs() < 0.005, "{est:?}");
    }

    #[test]
    fn normalized_chain_variance_and_lag1() {
        let m = chain_moments(&cfg(0.5, SamplerMode::ChainNormalized), 1_000_000, 6, 0).unwrap();
        assert!((m.variance - 1.0).abs() < 0.006, "{m:?}");
        assert!((m.lag1.estimate - 0.5).abs() < 0.005, "{m:?}");
    }

    #[test]
    fn independent_lag1_near_zero() {
        let est = estimate_lag1(&cfg(0.0, SamplerMode::ChainRaw), 20_000, 1, 0).unwrap();
        assert!(est.estimate.abs() < 4.0 * est.stderr);
        assert!((est.stderr - (1.0f64 / 20_000.0).sqrt()).abs() < 0.001);
    }

    #[test]
    fn golden_ratio_shift_gives_unit_covariance() {
        let f = (5f64.sqrt() - 1.0) / 2.0;
        let est = estimate_lag1(&cfg(f, SamplerMode::ChainRaw), 20_000, 2, 0).unwrap();
        assert!(
            (est.estimate - 1.0).abs() < 4.0 * est.reported_stderr(),
            "{est:?}"
        );
    }

    #[test]
    fn too_few_steps() {
        assert!(estimate_lag1(&cfg(0.1, SamplerMode::ChainRaw), 1, 0, 0).is_err());
        assert!(chain_moments(&cfg(0.1, SamplerMode::PairMode), 100, 0, 0).is_err());
    }

    #[test]
    fn pair_mode_restarts_every_pair() {
        // f = 1 copies x1 into the mean of x2; the next pair must start fresh.
        let mut chain = ShiftChain::new(cfg(1.0, SamplerMode::PairMode), 3, 0);
        let n = 200_000;
        let mut cross = MeanAccumulator::default();
        let mut prev = None;
        for _ in 0..n {
            let x1 = chain.draw_next();
            let x2 = chain.draw_next();
            if let Some(p) = prev {
                cross.push(p * x1);
            }
            prev = Some(x2);
        }
        assert!(cross.mean().abs() < 5.0 * cross.stderr());
    }

    #[test]
    fn burn_in_start() {
        let a = ShiftChain::new(cfg(0.5, SamplerMode::ChainRaw), 1, 0).with_burn_in(100);
        assert!(a.last_outcome().is_some());
        let b = ShiftChain::new(cfg(0.5, SamplerMode::ChainNormalized), 1, 0).with_burn_in(100);
        assert!(b.last_outcome().is_none());
    }

    #[test]
    fn innovations_are_gaussian() {
        let m = chain_moments(&cfg(0.6, SamplerMode::ChainRaw), 1_000_000, 8, 0).unwrap();
        assert!((m.innovation_kurtosis - 3.0).abs() < 0.1, "{m:?}");
    }

    #[test]
    fn raw_stationary_variance() {
        for (i, f) in [0.3, -0.3, 0.6, -0.6].into_iter().enumerate() {
            let m = chain_moments(&cfg(f, SamplerMode::ChainRaw), 1_000_000, 21, i as u64).unwrap();
            let expect = 1.0 / (1.0 - f * f);
            assert!(((m.variance - expect) / expect).abs() < 0.01, "f = {f}: {m:?}");
        }
    }

    #[test]
    fn sweep_preconditions() {
        let kernel = CorrelationKernel::unit_quartic();
        let calib = CalibrationModel::exact(SamplerMode::ChainRaw);
        let bad = SweepConfig {
            n_points: 1,
            ..Default::default()
        };
        assert!(correlation_sweep(&kernel, &calib, &bad).is_err());
        let bad = SweepConfig {
            steps_per_point: 10,
            ..Default::default()
        };
        assert!(correlation_sweep(&kernel, &calib, &bad).is_err());
    }

    #[test]
    fn sweep_grid_and_zero_crossing_row() {
        let kernel = CorrelationKernel::scalar();
        let calib = CalibrationModel::exact(SamplerMode::ChainRaw);
        let config = SweepConfig {
            n_points: 5,
            t0_max: 8.0,
            steps_per_point: 20_000,
            seed: 4,
        };
        let res = correlation_sweep(&kernel, &calib, &config).unwrap();
        let t0s: Vec<f64> = res.rows.iter().map(|r| r.t0).collect();
        assert_eq!(t0s, vec![0.0, 2.0, 4.0, 6.0, 8.0]);
        let root = &res.rows[1];
        assert_eq!(root.f_shift, 0.0);
        assert!(root.c_simulated.abs() < 3.0 * root.stderr);
        assert!(res.rows.iter().all(|r| r.f_shift.abs() <= 1.0));
    }
}
