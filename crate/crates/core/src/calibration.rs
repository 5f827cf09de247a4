//! Maps a target correlation `C(t0)` to the shift factor `f` fed to the sampler.
//!
//! Three routes are provided:
//!
//! * [`CalibrationMethod::PaperTanFit`] inverts the empirical trial form
//!   `C(f) = a tan(b f)` with the published constants, exactly as printed.
//! * [`CalibrationMethod::ExactChainInversion`] solves the sampler's own
//!   closed-form lag-1 covariance for `f`.
//! * [`CalibrationMethod::MonteCarloTable`] inverts a measured `(f, C)` table
//!   by monotone cubic interpolation.

use std::f64::consts::{FRAC_PI_2, PI};
use std::fmt;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{check_finite, Error, Result};
use crate::kernels::{CorrelationKernel, KernelKind};
use crate::sampler::{estimate_lag1, ChainConfig, SamplerMode};

/// Published tan-fit amplitude for the smeared scalar kernel.
pub const SCALAR_TAN_A: f64 = 0.01404;
/// Published tan-fit slope for the smeared scalar kernel.
pub const SCALAR_TAN_B: f64 = 1.58;
/// Published tan-fit amplitude shared by the unit-variance quartic and cosine kernels.
pub const UNIT_TAN_A: f64 = 0.672;
/// Published tan-fit slope shared by the unit-variance quartic and cosine kernels.
pub const UNIT_TAN_B: f64 = 1.59;

/// Minimum sampler steps behind each Monte Carlo table row.
pub const MIN_TABLE_STEPS: usize = 10_000;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum CalibrationMethod {
    PaperTanFit,
    ExactChainInversion,
    MonteCarloTable,
}

impl CalibrationMethod {
    pub fn name(self) -> &'static str {
        match self {
            CalibrationMethod::PaperTanFit => "tanfit",
            CalibrationMethod::ExactChainInversion => "exact",
            CalibrationMethod::MonteCarloTable => "table",
        }
    }
}

impl fmt::Display for CalibrationMethod {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl std::str::FromStr for CalibrationMethod {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "tanfit" | "paper" => Ok(CalibrationMethod::PaperTanFit),
            "exact" => Ok(CalibrationMethod::ExactChainInversion),
            "table" | "monte-carlo" => Ok(CalibrationMethod::MonteCarloTable),
            other => Err(Error::InvalidParameter(format!(
                "unknown calibration method '{other}' (expected tanfit, exact or table)"
            ))),
        }
    }
}

/// Published `(a, b)` for a kernel kind.
pub fn paper_constants(kind: KernelKind) -> (f64, f64) {
    match kind {
        KernelKind::ScalarLorentzian => (SCALAR_TAN_A, SCALAR_TAN_B),
        KernelKind::UnitVarianceQuartic | KernelKind::SqueezedCosine => (UNIT_TAN_A, UNIT_TAN_B),
    }
}

/// Numerator of the printed arctan maps. For the scalar kernel the printed
/// denominator carries `4 pi`, one power of pi short of the closed form, so
/// this is `pi C(t0)` there and `C(t0)` for the unit-variance kernels.
fn printed_tan_argument(kind: KernelKind, t0: f64, k: f64) -> f64 {
    match kind {
        KernelKind::ScalarLorentzian => {
            let t2 = t0 * t0;
            let d = 4.0 + t2;
            (4.0 - t2) / (4.0 * PI * d * d)
        }
        KernelKind::UnitVarianceQuartic => {
            let t2 = t0 * t0;
            let d = 1.0 + t2;
            (1.0 - 6.0 * t2 + t2 * t2) / (d * d * d * d)
        }
        KernelKind::SqueezedCosine => (k * t0).cos(),
    }
}

/// Shift factor from the published arctan map for `kind` at separation `t0`.
pub fn f_from_t0_paper(kind: KernelKind, t0: f64, k: f64) -> Result<f64> {
    check_finite("t0", t0)?;
    if kind == KernelKind::SqueezedCosine && !(k.is_finite() && k > 0.0) {
        return Err(Error::InvalidParameter(format!(
            "wavenumber k must be positive, got {k}"
        )));
    }
    let (a, b) = paper_constants(kind);
    Ok((printed_tan_argument(kind, t0, k) / a).atan() / b)
}

/// The unique `f` in (-1, 1) with `f sigma2 / (1 - f^2) = c_target`.
pub fn f_exact_chain(c_target: f64, sigma2: f64) -> Result<f64> {
    check_finite("c_target", c_target)?;
    if !(sigma2.is_finite() && sigma2 > 0.0) {
        return Err(Error::InvalidParameter(format!(
            "sigma2 must be positive, got {sigma2}"
        )));
    }
    if c_target == 0.0 {
        return Ok(0.0);
    }
    // Rationalised root of c f^2 + sigma2 f - c = 0; avoids cancellation at small c.
    let disc = (sigma2 * sigma2 + 4.0 * c_target * c_target).sqrt();
    Ok(2.0 * c_target / (sigma2 + disc))
}

/// Inverse of the pair covariance `f sigma2`; infeasible outside `|c| <= sigma2`.
pub fn f_pair(c_target: f64, sigma2: f64) -> Result<f64> {
    check_finite("c_target", c_target)?;
    if !(sigma2.is_finite() && sigma2 > 0.0) {
        return Err(Error::InvalidParameter(format!(
            "sigma2 must be positive, got {sigma2}"
        )));
    }
    if c_target.abs() > sigma2 {
        return Err(Error::InfeasibleCalibration {
            target: c_target,
            min: -sigma2,
            max: sigma2,
        });
    }
    Ok(c_target / sigma2)
}

/// The trial form `a tan(b f)`.
pub fn c_of_f_tanfit(f: f64, a: f64, b: f64) -> Result<f64> {
    check_finite("f", f)?;
    if !(a > 0.0 && b > 0.0 && a.is_finite() && b.is_finite()) {
        return Err(Error::InvalidParameter(format!(
            "a and b must be positive, got a = {a}, b = {b}"
        )));
    }
    let limit = FRAC_PI_2 / b;
    if f.abs() >= limit {
        return Err(Error::InvalidParameter(format!(
            "|f| = {} must be below pi/(2b) = {limit}",
            f.abs()
        )));
    }
    Ok(a * (b * f).tan())
}

/// One measured calibration point.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct TableRow {
    pub f: f64,
    pub c_estimate: f64,
    pub stderr: f64,
    pub n_steps: usize,
}

/// Measured lag-1 covariance against shift factor, strictly increasing in both.
#[derive(Clone, Debug, PartialEq)]
pub struct CalibrationTable {
    pub mode: SamplerMode,
    pub sigma2: f64,
    rows: Vec<TableRow>,
    forward: Pchip,
}

impl CalibrationTable {
    /// Validates monotonicity and builds the interpolants.
    pub fn new(mode: SamplerMode, sigma2: f64, rows: Vec<TableRow>) -> Result<Self> {
        if rows.len() < 2 {
            return Err(Error::Precondition(format!(
                "calibration table needs at least 2 rows, got {}",
                rows.len()
            )));
        }
        if !(sigma2.is_finite() && sigma2 > 0.0) {
            return Err(Error::InvalidParameter(format!(
                "sigma2 must be positive, got {sigma2}"
            )));
        }
        for w in rows.windows(2) {
            if !(w[1].f > w[0].f) {
                return Err(Error::Precondition(format!(
                    "table shift factors must increase strictly: {} then {}",
                    w[0].f, w[1].f
                )));
            }
            if !(w[1].c_estimate > w[0].c_estimate) {
                return Err(Error::CalibrationResolution { f: w[1].f });
            }
        }
        if rows.iter().any(|r| r.f.abs() > 1.0) {
            return Err(Error::Precondition(
                "table shift factors must satisfy |f| <= 1".into(),
            ));
        }
        let fs: Vec<f64> = rows.iter().map(|r| r.f).collect();
        let cs: Vec<f64> = rows.iter().map(|r| r.c_estimate).collect();
        Ok(Self {
            mode,
            sigma2,
            forward: Pchip::new(fs, cs),
            rows,
        })
    }

    pub fn rows(&self) -> &[TableRow] {
        &self.rows
    }

    /// Interpolated covariance at shift `f`.
    pub fn covariance_at(&self, f: f64) -> Result<f64> {
        let (lo, hi) = (self.rows[0].f, self.rows[self.rows.len() - 1].f);
        if !(f >= lo && f <= hi) {
            return Err(Error::InvalidParameter(format!(
                "f = {f} outside table range [{lo}, {hi}]"
            )));
        }
        Ok(self.forward.eval(f))
    }

    /// Shift factor achieving covariance `c` at this table's `sigma2`, found by
    /// inverting the forward interpolant so that the two always agree.
    pub fn shift_for_covariance(&self, c: f64) -> Result<f64> {
        check_finite("c_target", c)?;
        let (lo, hi) = (self.rows[0].c_estimate, self.rows[self.rows.len() - 1].c_estimate);
        if !(lo..=hi).contains(&c) {
            return Err(Error::InfeasibleCalibration {
                target: c,
                min: lo,
                max: hi,
            });
        }
        Ok(self.forward.solve_increasing(c))
    }
}

/// Rule turning a kernel value into a shift factor, bound to the sampler mode it targets.
#[derive(Clone, Debug, PartialEq)]
pub struct CalibrationModel {
    method: CalibrationMethod,
    /// Tan-fit constants; `None` selects the published values for the kernel kind.
    tan_constants: Option<(f64, f64)>,
    table: Option<CalibrationTable>,
    sampler_mode: SamplerMode,
}

impl CalibrationModel {
    /// Published arctan maps. The constants were fitted against a chain sampler.
    pub fn paper_tan_fit(mode: SamplerMode) -> Self {
        Self {
            method: CalibrationMethod::PaperTanFit,
            tan_constants: None,
            table: None,
            sampler_mode: mode,
        }
    }

    /// Tan-fit with caller-supplied constants applied to the raw kernel value.
    pub fn tan_fit(a: f64, b: f64, mode: SamplerMode) -> Result<Self> {
        if !(a > 0.0 && a.is_finite()) || !(b >= FRAC_PI_2 && b.is_finite()) {
            return Err(Error::InvalidParameter(format!(
                "tan fit needs a > 0 and b >= pi/2 so that |f| < 1; got a = {a}, b = {b}"
            )));
        }
        Ok(Self {
            method: CalibrationMethod::PaperTanFit,
            tan_constants: Some((a, b)),
            table: None,
            sampler_mode: mode,
        })
    }

    pub fn exact(mode: SamplerMode) -> Self {
        Self {
            method: CalibrationMethod::ExactChainInversion,
            tan_constants: None,
            table: None,
            sampler_mode: mode,
        }
    }

    pub fn from_table(table: CalibrationTable) -> Self {
        Self {
            method: CalibrationMethod::MonteCarloTable,
            tan_constants: None,
            sampler_mode: table.mode,
            table: Some(table),
        }
    }

    pub fn method(&self) -> CalibrationMethod {
        self.method
    }

    pub fn sampler_mode(&self) -> SamplerMode {
        self.sampler_mode
    }

    pub fn table(&self) -> Option<&CalibrationTable> {
        self.table.as_ref()
    }

    /// Shift factor that reproduces `kernel(t0)` as the lag-1 covariance.
    pub fn shift_for(&self, kernel: &CorrelationKernel, t0: f64) -> Result<f64> {
        let c = kernel.eval(t0)?;
        self.shift_for_value(kernel, t0, c)
    }

    fn shift_for_value(&self, kernel: &CorrelationKernel, t0: f64, c: f64) -> Result<f64> {
        let sigma2 = kernel.variance();
        let f = match self.method {
            CalibrationMethod::PaperTanFit => match self.tan_constants {
                None => f_from_t0_paper(kernel.kind(), t0, kernel.wavenumber())?,
                Some((a, b)) => (c / a).atan() / b,
            },
            CalibrationMethod::ExactChainInversion => match self.sampler_mode {
                SamplerMode::ChainRaw => f_exact_chain(c, sigma2)?,
                SamplerMode::PairMode | SamplerMode::ChainNormalized => f_pair(c, sigma2)?,
            },
            CalibrationMethod::MonteCarloTable => {
                let table = self.table.as_ref().expect("table model carries a table");
                // Covariance is linear in sigma2 at fixed f in every mode.
                table.shift_for_covariance(c * table.sigma2 / sigma2)?
            }
        };
        if f.abs() > 1.0 {
            return Err(Error::InfeasibleCalibration {
                target: c,
                min: f64::NEG_INFINITY,
                max: f64::INFINITY,
            });
        }
        Ok(f)
    }

    /// Lag-1 covariance the model predicts for shift `f` at base variance `sigma2`.
    pub fn predicted_covariance(&self, kind: KernelKind, f: f64, sigma2: f64) -> Result<f64> {
        match self.method {
            CalibrationMethod::PaperTanFit => {
                let (a, b) = self.tan_constants.unwrap_or_else(|| paper_constants(kind));
                let c = c_of_f_tanfit(f, a, b)?;
                // The printed scalar map carries an extra factor of pi.
                Ok(
                    if self.tan_constants.is_none() && kind == KernelKind::ScalarLorentzian {
                        c / PI
                    } else {
                        c
                    },
                )
            }
            CalibrationMethod::ExactChainInversion => Ok(self.sampler_mode.lag1_covariance(f, sigma2)),
            CalibrationMethod::MonteCarloTable => {
                let table = self.table.as_ref().expect("table model carries a table");
                Ok(table.covariance_at(f)? * sigma2 / table.sigma2)
            }
        }
    }
}

/// 41 uniform shift factors on [-0.98, 0.98].
pub fn default_f_grid() -> Vec<f64> {
    uniform_grid(-0.98, 0.98, 41)
}

pub(crate) fn uniform_grid(lo: f64, hi: f64, n: usize) -> Vec<f64> {
    match n {
        0 => Vec::new(),
        1 => vec![lo],
        _ => (0..n)
            .map(|i| {
                if i + 1 == n {
                    hi
                } else {
                    lo + (hi - lo) * i as f64 / (n - 1) as f64
                }
            })
            .collect(),
    }
}

/// Measures the lag-1 covariance at every grid shift and returns the table.
///
/// Grid point `i` runs on stream `(seed, i)`.
pub fn calibrate_monte_carlo(
    mode: SamplerMode,
    sigma2: f64,
    f_grid: &[f64],
    steps_per_point: usize,
    seed: u64,
) -> Result<CalibrationTable> {
    if f_grid.len() < 2 {
        return Err(Error::Precondition(format!(
            "f grid needs at least 2 points, got {}",
            f_grid.len()
        )));
    }
    if steps_per_point < MIN_TABLE_STEPS {
        return Err(Error::Precondition(format!(
            "need at least {MIN_TABLE_STEPS} steps per point, got {steps_per_point}"
        )));
    }
    for w in f_grid.windows(2) {
        if !(w[1] > w[0]) {
            return Err(Error::Precondition("f grid must be strictly increasing".into()));
        }
    }
    if f_grid.iter().any(|f| !(f.abs() < 1.0)) {
        return Err(Error::Precondition("f grid must lie inside (-1, 1)".into()));
    }
    let rows = f_grid
        .par_iter()
        .enumerate()
        .map(|(i, &f)| {
            let cfg = ChainConfig::new(f, sigma2, mode)?;
            let est = estimate_lag1(&cfg, steps_per_point, seed, i as u64)?;
            Ok(TableRow {
                f,
                c_estimate: est.estimate,
                stderr: est.reported_stderr(),
                n_steps: steps_per_point,
            })
        })
        .collect::<Result<Vec<_>>>()?;
    CalibrationTable::new(mode, sigma2, rows)
}

/// Shape-preserving piecewise cubic Hermite interpolant (Fritsch-Carlson slopes).
#[derive(Clone, Debug, PartialEq)]
struct Pchip {
    x: Vec<f64>,
    y: Vec<f64>,
    d: Vec<f64>,
}

impl Pchip {
    fn new(x: Vec<f64>, y: Vec<f64>) -> Self {
        let n = x.len();
        let h: Vec<f64> = x.windows(2).map(|w| w[1] - w[0]).collect();
        let delta: Vec<f64> = (0..n - 1).map(|i| (y[i + 1] - y[i]) / h[i]).collect();
        let mut d = vec![0.0; n];
        if n == 2 {
            d[0] = delta[0];
            d[1] = delta[0];
        } else {
            for i in 1..n - 1 {
                if delta[i - 1] * delta[i] > 0.0 {
                    let w1 = 2.0 * h[i] + h[i - 1];
                    let w2 = h[i] + 2.0 * h[i - 1];
                    d[i] = (w1 + w2) / (w1 / delta[i - 1] + w2 / delta[i]);
                }
            }
            d[0] = end_slope(h[0], h[1], delta[0], delta[1]);
            d[n - 1] = end_slope(h[n - 2], h[n - 3], delta[n - 2], delta[n - 3]);
        }
        Self { x, y, d }
    }

    fn eval(&self, xq: f64) -> f64 {
        let n = self.x.len();
        let i = match self.x.partition_point(|&v| v <= xq) {
            0 => 0,
            p if p >= n => n - 2,
            p => p - 1,
        };
        let h = self.x[i + 1] - self.x[i];
        let s = (xq - self.x[i]) / h;
        let s2 = s * s;
        let s3 = s2 * s;
        let h00 = 2.0 * s3 - 3.0 * s2 + 1.0;
        let h10 = s3 - 2.0 * s2 + s;
        let h01 = -2.0 * s3 + 3.0 * s2;
        let h11 = s3 - s2;
        h00 * self.y[i] + h10 * h * self.d[i] + h01 * self.y[i + 1] + h11 * h * self.d[i + 1]
    }

    /// Abscissa where the (monotone increasing) interpolant equals `yq`.
    fn solve_increasing(&self, yq: f64) -> f64 {
        let n = self.y.len();
        let seg = self.y.partition_point(|&v| v <= yq).clamp(1, n - 1) - 1;
        if self.y[seg] == yq {
            return self.x[seg];
        }
        let (mut a, mut b) = (self.x[seg], self.x[seg + 1]);
        loop {
            let mid = 0.5 * (a + b);
            if mid <= a || mid >= b {
                return mid;
            }
            if self.eval(mid) < yq {
                a = mid;
            } else {
                b = mid;
            }
        }
    }
}

fn end_slope(h0: f64, h1: f64, del0: f64, del1: f64) -> f64 {
    let d = ((2.0 * h0 + h1) * del0 - h0 * del1) / (h0 + h1);
    if d.signum() != del0.signum() {
        0.0
    } else if del0.signum() != del1.signum() && d.abs() > 3.0 * del0.abs() {
        3.0 * del0
    } else {
        d
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    #[test]
    fn published_map_values() {
        let f = f_from_t0_paper(KernelKind::UnitVarianceQuartic, 0.0, 1.0).unwrap();
        assert!((f - (1.0f64 / 0.672).atan() / 1.59).abs() < 1e-15);
        assert!((f - 0.6157).abs() < 1e-4);
        let f = f_from_t0_paper(KernelKind::UnitVarianceQuartic, 2f64.sqrt() - 1.0, 1.0).unwrap();
        assert!(f.abs() < 1e-15);
        let f = f_from_t0_paper(KernelKind::ScalarLorentzian, 0.0, 1.0).unwrap();
        let expect = (4.0 / (4.0 * PI * 0.01404 * 16.0)).atan() / 1.58;
        assert!((f - expect).abs() < 1e-15);
        assert!((f - 0.605).abs() < 1e-3);
        let f = f_from_t0_paper(KernelKind::SqueezedCosine, PI, 1.0).unwrap();
        assert!((f + (1.0f64 / 0.672).atan() / 1.59).abs() < 1e-15);
        assert!(f_from_t0_paper(KernelKind::SqueezedCosine, 0.0, -1.0).is_err());
    }

    #[test]
    fn exact_chain_values() {
        assert_eq!(f_exact_chain(0.0, 1.0).unwrap(), 0.0);
        let f = f_exact_chain(1.0, 1.0).unwrap();
        assert!((f - (5f64.sqrt() - 1.0) / 2.0).abs() < 1e-15);
        let f = f_exact_chain(-0.25, 1.0).unwrap();
        assert!((f + 0.236_068).abs() < 1e-6);
        assert!((f / (1.0 - f * f) + 0.25).abs() < 1e-15);
        assert!(f_exact_chain(1e300, 1.0).unwrap() < 1.0);
        assert!(f_exact_chain(1.0, 0.0).is_err());
    }

    #[test]
    fn exact_chain_monte_carlo_oracle() {
        let f = f_exact_chain(-0.25, 1.0).unwrap();
        let cfg = ChainConfig::new(f, 1.0, SamplerMode::ChainRaw).unwrap();
        let est = estimate_lag1(&cfg, 1_000_000, 12, 0).unwrap();
        assert!((est.estimate + 0.25).abs() < 0.004, "{est:?}");
    }

    #[test]
    fn pair_inversion_rejects_out_of_range() {
        assert_eq!(f_pair(0.5, 1.0).unwrap(), 0.5);
        assert!(matches!(
            f_pair(1.5, 1.0),
            Err(Error::InfeasibleCalibration { .. })
        ));
        let model = CalibrationModel::exact(SamplerMode::PairMode);
        let kernel = CorrelationKernel::unit_quartic();
        assert_eq!(model.shift_for(&kernel, 0.0).unwrap(), 1.0);
    }

    #[test]
    fn tanfit_values() {
        assert_eq!(c_of_f_tanfit(0.0, 0.672, 1.59).unwrap(), 0.0);
        let c = c_of_f_tanfit(0.3, 0.672, 1.59).unwrap();
        assert!((c - 0.672 * 0.477f64.tan()).abs() < 1e-12);
        assert!((c - 0.347).abs() < 1e-3);
        let limit = FRAC_PI_2 / 1.59;
        let mut prev = 0.0;
        for eps in [1e-1, 1e-2, 1e-4, 1e-8] {
            let v = c_of_f_tanfit(limit - eps, 0.672, 1.59).unwrap();
            assert!(v > prev);
            prev = v;
        }
        assert!(prev > 1e6);
        assert!(c_of_f_tanfit(limit, 0.672, 1.59).is_err());
    }

    #[test]
    fn tanfit_tracks_raw_chain_covariance() {
        for i in -62..=62 {
            let f = i as f64 / 100.0;
            let tan = c_of_f_tanfit(f, UNIT_TAN_A, UNIT_TAN_B).unwrap();
            assert!((tan - f / (1.0 - f * f)).abs() <= 0.08, "f = {f}");
        }
    }

    #[test]
    fn published_model_round_trips_through_trial_form() {
        let model = CalibrationModel::paper_tan_fit(SamplerMode::ChainRaw);
        let kernel = CorrelationKernel::unit_quartic();
        for t0 in [0.0, 0.2, 0.7, 1.5, 3.0] {
            let f = model.shift_for(&kernel, t0).unwrap();
            let c = model.predicted_covariance(kernel.kind(), f, 1.0).unwrap();
            assert!((c - kernel.value(t0)).abs() < 1e-12);
        }
        let scalar = CorrelationKernel::scalar();
        for t0 in [0.0, 1.0, 5.0] {
            let f = model.shift_for(&scalar, t0).unwrap();
            let c = model
                .predicted_covariance(scalar.kind(), f, scalar.variance())
                .unwrap();
            assert!((c - scalar.value(t0)).abs() < 1e-15);
        }
    }

    #[test]
    fn custom_tan_constants() {
        assert!(CalibrationModel::tan_fit(0.5, 1.0, SamplerMode::ChainRaw).is_err());
        let m = CalibrationModel::tan_fit(0.672, 1.59, SamplerMode::ChainRaw).unwrap();
        let f = m.shift_for(&CorrelationKernel::unit_quartic(), 0.0).unwrap();
        assert!((f - f_from_t0_paper(KernelKind::UnitVarianceQuartic, 0.0, 1.0).unwrap()).abs() < 1e-15);
    }

    #[test]
    fn pchip_preserves_monotonicity() {
        let x = vec![0.0, 1.0, 2.0, 3.0, 4.0];
        let y = vec![0.0, 0.1, 0.2, 5.0, 5.1];
        let p = Pchip::new(x.clone(), y.clone());
        let mut prev = f64::NEG_INFINITY;
        for i in 0..=400 {
            let v = p.eval(i as f64 / 100.0);
            assert!(v >= prev);
            prev = v;
        }
        for (xi, yi) in x.iter().zip(&y) {
            assert!((p.eval(*xi) - yi).abs() < 1e-14);
        }
    }

    #[test]
    fn table_requires_monotone_estimates() {
        let row = |f: f64, c: f64| TableRow {
            f,
            c_estimate: c,
            stderr: 0.01,
            n_steps: 10_000,
        };
        let err = CalibrationTable::new(
            SamplerMode::PairMode,
            1.0,
            vec![row(-0.5, -0.5), row(0.0, 0.1), row(0.5, 0.05)],
        );
        assert!(matches!(err, Err(Error::CalibrationResolution { .. })));
        let t = CalibrationTable::new(
            SamplerMode::PairMode,
            1.0,
            vec![row(-0.5, -0.5), row(0.0, 0.0), row(0.5, 0.5)],
        )
        .unwrap();
        assert!((t.shift_for_covariance(0.25).unwrap() - 0.25).abs() < 1e-12);
        assert!(matches!(
            t.shift_for_covariance(0.75),
            Err(Error::InfeasibleCalibration { .. })
        ));
    }

    #[test]
    fn monte_carlo_table_rows() {
        let grid = [-0.5, 0.0, 0.5];
        let raw = calibrate_monte_carlo(SamplerMode::ChainRaw, 1.0, &grid, 200_000, 9).unwrap();
        let r = raw.rows();
        assert!(r[1].c_estimate.abs() < 2.0 * r[1].stderr);
        assert!(
            (r[2].c_estimate - 2.0 / 3.0).abs() < 3.0 * r[2].stderr,
            "{:?}",
            r[2]
        );
        let pair = calibrate_monte_carlo(SamplerMode::PairMode, 1.0, &grid, 200_000, 9).unwrap();
        assert!((pair.rows()[2].c_estimate - 0.5).abs() < 3.0 * pair.rows()[2].stderr);
    }

    #[test]
    fn monte_carlo_preconditions() {
        let g = default_f_grid();
        assert_eq!(g.len(), 41);
        assert_eq!(g[0], -0.98);
        assert_eq!(g[40], 0.98);
        assert!(calibrate_monte_carlo(SamplerMode::PairMode, 1.0, &g, 100, 0).is_err());
        assert!(calibrate_monte_carlo(SamplerMode::PairMode, 1.0, &[0.5, 0.1], 10_000, 0).is_err());
        assert!(calibrate_monte_carlo(SamplerMode::PairMode, 1.0, &[0.5, 1.0], 10_000, 0).is_err());
        assert!(calibrate_monte_carlo(SamplerMode::PairMode, 1.0, &[], 10_000, 0).is_err());
    }

    #[test]
    fn table_model_round_trip() {
        let table = calibrate_monte_carlo(SamplerMode::ChainRaw, 1.0, &default_f_grid(), 50_000, 1).unwrap();
        let model = CalibrationModel::from_table(table);
        let kernel = CorrelationKernel::unit_quartic();
        for t0 in [0.0, 0.3, 1.0, 2.0] {
            let f = model.shift_for(&kernel, t0).unwrap();
            let c = model.predicted_covariance(kernel.kind(), f, 1.0).unwrap();
            assert!((c - kernel.value(t0)).abs() < 1e-12, "t0 = {t0}");
        }
        // variance rescaling: scalar kernel looks up c / sigma2
        let scalar = CorrelationKernel::scalar();
        let f = model.shift_for(&scalar, 0.0).unwrap();
        assert!((f - model.shift_for(&kernel, 0.0).unwrap()).abs() < 1e-12);
    }

    proptest! {
        #[test]
        fn exact_inversion_round_trip(c in -50.0f64..50.0, sigma2 in 0.01f64..10.0) {
            let f = f_exact_chain(c, sigma2).unwrap();
            prop_assert!(f.abs() < 1.0);
            let back = SamplerMode::ChainRaw.lag1_covariance(f, sigma2);
            // 1 - f^2 loses digits as |c| / sigma2 grows
            let condition = 1.0 + c.abs() / sigma2;
            prop_assert!((back - c).abs() <= 1e-14 * condition * c.abs().max(sigma2));
            prop_assert_eq!(f, -f_exact_chain(-c, sigma2).unwrap());
            prop_assert_eq!(f > 0.0, c > 0.0);
        }

        #[test]
        fn published_maps_are_odd_and_bounded(t0 in 0.0f64..20.0, k in 0.1f64..5.0) {
            for kind in [KernelKind::ScalarLorentzian, KernelKind::UnitVarianceQuartic, KernelKind::SqueezedCosine] {
                let f = f_from_t0_paper(kind, t0, k).unwrap();
                let (a, b) = paper_constants(kind);
                prop_assert!(f.abs() < FRAC_PI_2 / b);
                prop_assert!(f.abs() < 1.0);
                let arg = printed_tan_argument(kind, t0, k);
                prop_assert_eq!((-arg / a).atan() / b, -f);
                prop_assert_eq!(f > 0.0, arg > 0.0);
            }
        }
    }
}
