//! Analytic correlation functions of Lorentzian-smeared and squeezed-state fields.
//!
//! All times are measured in units of the Lorentzian smearing width, which is
//! fixed to one.

use std::f64::consts::PI;
use std::fmt;

use serde::{Deserialize, Serialize};

use crate::error::{check_finite, Error, Result};
use crate::quadrature::{self, Settings};

/// Which closed-form correlator a [`CorrelationKernel`] evaluates.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum KernelKind {
    /// Smeared massless scalar vacuum correlator, `(4 - t^2) / (4 pi^2 (t^2 + 4)^2)`.
    ScalarLorentzian,
    /// Smeared inverse-quartic vacuum correlator rescaled to unit variance.
    UnitVarianceQuartic,
    /// Single occupied squeezed mode, `cos(k t)`.
    SqueezedCosine,
}

impl KernelKind {
    pub fn name(self) -> &'static str {
        match self {
            KernelKind::ScalarLorentzian => "scalar",
            KernelKind::UnitVarianceQuartic => "em",
            KernelKind::SqueezedCosine => "squeezed",
        }
    }
}

impl fmt::Display for KernelKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl std::str::FromStr for KernelKind {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "scalar" => Ok(KernelKind::ScalarLorentzian),
            "em" | "quartic" => Ok(KernelKind::UnitVarianceQuartic),
            "squeezed" | "cosine" => Ok(KernelKind::SqueezedCosine),
            other => Err(Error::InvalidParameter(format!(
                "unknown kernel '{other}' (expected scalar, em or squeezed)"
            ))),
        }
    }
}

/// A stationary correlation function `C(t0)` with its variance `C(0)`.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct CorrelationKernel {
    kind: KernelKind,
    wavenumber_k: f64,
    variance: f64,
    /// Field-dependent prefactor of the inverse-quartic correlator. Carried as
    /// metadata only; the unit-variance form does not depend on it.
    kappa_note: Option<f64>,
}

impl CorrelationKernel {
    pub fn scalar() -> Self {
        Self {
            kind: KernelKind::ScalarLorentzian,
            wavenumber_k: 1.0,
            variance: eval_scalar_unchecked(0.0),
            kappa_note: None,
        }
    }

    pub fn unit_quartic() -> Self {
        Self {
            kind: KernelKind::UnitVarianceQuartic,
            wavenumber_k: 1.0,
            variance: 1.0,
            kappa_note: None,
        }
    }

    pub fn squeezed(k: f64) -> Result<Self> {
        check_wavenumber(k)?;
        Ok(Self {
            kind: KernelKind::SqueezedCosine,
            wavenumber_k: k,
            variance: 1.0,
            kappa_note: None,
        })
    }

    /// Builds a kernel of the given kind; `k` is only consulted for the cosine kernel.
    pub fn new(kind: KernelKind, k: f64) -> Result<Self> {
        match kind {
            KernelKind::ScalarLorentzian => Ok(Self::scalar()),
            KernelKind::UnitVarianceQuartic => Ok(Self::unit_quartic()),
            KernelKind::SqueezedCosine => Self::squeezed(k),
        }
    }

    pub fn with_kappa(mut self, kappa: f64) -> Result<Self> {
        if !(kappa.is_finite() && kappa > 0.0) {
            return Err(Error::InvalidParameter(format!(
                "kappa must be positive, got {kappa}"
            )));
        }
        self.kappa_note = Some(kappa);
        Ok(self)
    }

    pub fn kind(&self) -> KernelKind {
        self.kind
    }

    pub fn wavenumber(&self) -> f64 {
        self.wavenumber_k
    }

    pub fn variance(&self) -> f64 {
        self.variance
    }

    pub fn kappa_note(&self) -> Option<f64> {
        self.kappa_note
    }

    /// Evaluates the kernel, rejecting non-finite times.
    pub fn eval(&self, t0: f64) -> Result<f64> {
        check_finite("t0", t0)?;
        Ok(self.value(t0))
    }

    /// Evaluates the kernel without validating `t0`.
    #[inline]
    pub fn value(&self, t0: f64) -> f64 {
        match self.kind {
            KernelKind::ScalarLorentzian => eval_scalar_unchecked(t0),
            KernelKind::UnitVarianceQuartic => eval_unit_quartic_unchecked(t0),
            KernelKind::SqueezedCosine => (self.wavenumber_k * t0).cos(),
        }
    }
}

fn check_wavenumber(k: f64) -> Result<()> {
    if k.is_finite() && k > 0.0 {
        Ok(())
    } else {
        Err(Error::InvalidParameter(format!(
            "wavenumber k must be positive, got {k}"
        )))
    }
}

#[inline]
fn eval_scalar_unchecked(t0: f64) -> f64 {
    let t2 = t0 * t0;
    let d = t2 + 4.0;
    (4.0 - t2) / (4.0 * PI * PI * d * d)
}

#[inline]
fn eval_unit_quartic_unchecked(t0: f64) -> f64 {
    let t2 = t0 * t0;
    let d = 1.0 + t2;
    let d2 = d * d;
    (1.0 - 6.0 * t2 + t2 * t2) / (d2 * d2)
}

/// Smeared massless scalar correlator `(4 - t0^2) / (4 pi^2 (t0^2 + 4)^2)`.
pub fn eval_scalar(t0: f64) -> Result<f64> {
    check_finite("t0", t0).map(eval_scalar_unchecked)
}

/// Unit-variance inverse-quartic correlator `(1 - 6 t0^2 + t0^4) / (1 + t0^2)^4`.
pub fn eval_unit_quartic(t0: f64) -> Result<f64> {
    check_finite("t0", t0).map(eval_unit_quartic_unchecked)
}

/// Single-mode squeezed bath correlator `cos(k t0)`.
pub fn eval_squeezed(t0: f64, k: f64) -> Result<f64> {
    check_finite("t0", t0)?;
    check_wavenumber(k)?;
    Ok((k * t0).cos())
}

const SCAN_SUBDIVISIONS: usize = 10_000;

/// All sign changes of the kernel in `[lo, hi]`, sorted ascending.
///
/// The interval is scanned on a uniform grid; each bracketed root is bisected
/// down to adjacent floating-point numbers. Roots of even multiplicity (no sign
/// change) are not reported unless they land exactly on a grid node.
pub fn zero_crossings(kernel: &CorrelationKernel, lo: f64, hi: f64) -> Result<Vec<f64>> {
    check_finite("lo", lo)?;
    check_finite("hi", hi)?;
    if lo > hi {
        return Err(Error::Precondition(format!(
            "interval [{lo}, {hi}] is not ordered"
        )));
    }
    let mut roots = Vec::new();
    if lo == hi {
        if kernel.value(lo) == 0.0 {
            roots.push(lo);
        }
        return Ok(roots);
    }
    let node = |i: usize| {
        if i == SCAN_SUBDIVISIONS {
            hi
        } else {
            lo + (hi - lo) * (i as f64) / (SCAN_SUBDIVISIONS as f64)
        }
    };
    let mut x_prev = node(0);
    let mut v_prev = kernel.value(x_prev);
    if v_prev == 0.0 {
        roots.push(x_prev);
    }
    for i in 1..=SCAN_SUBDIVISIONS {
        let x = node(i);
        let v = kernel.value(x);
        if v == 0.0 {
            roots.push(x);
        } else if v_prev != 0.0 && (v_prev < 0.0) != (v < 0.0) {
            roots.push(bisect(|t| kernel.value(t), x_prev, x, v_prev));
        }
        x_prev = x;
        v_prev = v;
    }
    Ok(roots)
}

fn bisect<F: Fn(f64) -> f64>(f: F, mut a: f64, mut b: f64, mut fa: f64) -> f64 {
    loop {
        let mid = 0.5 * (a + b);
        if mid <= a || mid >= b {
            return mid;
        }
        let fm = f(mid);
        if fm == 0.0 {
            return mid;
        }
        if (fm < 0.0) == (fa < 0.0) {
            a = mid;
            fa = fm;
        } else {
            b = mid;
        }
    }
}

/// Result of integrating a kernel over the half line.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct HalfLineIntegral {
    pub value: f64,
    pub abs_error: f64,
}

/// `integral_0^inf C(t0) dt0` by adaptive quadrature after mapping `[0, inf)` onto `[0, 1)`.
pub fn integral_to_infinity(kernel: &CorrelationKernel) -> Result<HalfLineIntegral> {
    if kernel.kind() == KernelKind::SqueezedCosine {
        return Err(Error::NonIntegrableKernel("squeezed"));
    }
    let settings = Settings {
        abs_tol: 1e-13,
        max_subdivisions: 4000,
    };
    let est = quadrature::integrate_half_line(|t| kernel.value(t), settings)?;
    Ok(HalfLineIntegral {
        value: est.value,
        abs_error: est.error,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    #[test]
    fn scalar_values() {
        assert_eq!(eval_scalar(2.0).unwrap(), 0.0);
        let c0 = eval_scalar(0.0).unwrap();
        assert!((c0 - 1.0 / (16.0 * PI * PI)).abs() < 1e-18);
        assert!((c0 - 6.3326e-3).abs() < 1e-7);
        let tmin = 2.0 * 3f64.sqrt();
        assert!((eval_scalar(tmin).unwrap() + 1.0 / (128.0 * PI * PI)).abs() < 1e-17);
        // minimum: neighbours are larger
        assert!(eval_scalar(tmin + 1e-3).unwrap() > eval_scalar(tmin).unwrap());
        assert!(eval_scalar(tmin - 1e-3).unwrap() > eval_scalar(tmin).unwrap());
    }

    #[test]
    fn quartic_values() {
        assert_eq!(eval_unit_quartic(0.0).unwrap(), 1.0);
        assert_eq!(eval_unit_quartic(1.0).unwrap(), -0.25);
        assert!(eval_unit_quartic(2f64.sqrt() - 1.0).unwrap().abs() < 1e-15);
    }

    #[test]
    fn squeezed_values() {
        for k in [0.5, 1.0, 3.0] {
            assert_eq!(eval_squeezed(0.0, k).unwrap(), 1.0);
            assert!((eval_squeezed(PI / k, k).unwrap() + 1.0).abs() < 1e-15);
            assert!(eval_squeezed(PI / (2.0 * k), k).unwrap().abs() < 1e-15);
        }
        assert!(eval_squeezed(1.0, 0.0).is_err());
        assert!(eval_squeezed(1.0, -2.0).is_err());
        assert!(CorrelationKernel::squeezed(0.0).is_err());
    }

    #[test]
    fn non_finite_rejected() {
        assert!(eval_scalar(f64::NAN).is_err());
        assert!(eval_unit_quartic(f64::INFINITY).is_err());
        assert!(eval_squeezed(f64::NEG_INFINITY, 1.0).is_err());
        assert!(CorrelationKernel::unit_quartic().eval(f64::NAN).is_err());
    }

    #[test]
    fn variance_is_value_at_zero() {
        for kernel in [
            CorrelationKernel::scalar(),
            CorrelationKernel::unit_quartic(),
            CorrelationKernel::squeezed(2.5).unwrap(),
        ] {
            assert_eq!(kernel.variance(), kernel.eval(0.0).unwrap());
        }
    }

    #[test]
    fn kappa_is_metadata_only() {
        let plain = CorrelationKernel::unit_quartic();
        let tagged = plain.with_kappa(3.0).unwrap();
        assert_eq!(tagged.kappa_note(), Some(3.0));
        for t in [0.0, 0.3, 1.7] {
            assert_eq!(plain.value(t), tagged.value(t));
        }
        assert!(plain.with_kappa(-1.0).is_err());
    }

    #[test]
    fn roots() {
        let r = zero_crossings(&CorrelationKernel::scalar(), 0.0, 10.0).unwrap();
        assert_eq!(r, vec![2.0]);

        let r = zero_crossings(&CorrelationKernel::unit_quartic(), 0.0, 10.0).unwrap();
        assert_eq!(r.len(), 2);
        let s2 = 2f64.sqrt();
        assert!((r[0] - (s2 - 1.0)).abs() <= 1e-12 * (s2 - 1.0));
        assert!((r[1] - (s2 + 1.0)).abs() <= 1e-12 * (s2 + 1.0));

        let r = zero_crossings(&CorrelationKernel::squeezed(1.0).unwrap(), 0.0, 7.0).unwrap();
        assert_eq!(r.len(), 2);
        assert!((r[0] - PI / 2.0).abs() <= 1e-12 * PI);
        assert!((r[1] - 1.5 * PI).abs() <= 1e-12 * PI);

        assert!(zero_crossings(&CorrelationKernel::scalar(), 3.0, 1.0).is_err());
        assert!(zero_crossings(&CorrelationKernel::scalar(), 0.0, 1.0)
            .unwrap()
            .is_empty());
    }

    #[test]
    fn sign_structure() {
        let s = CorrelationKernel::scalar();
        let q = CorrelationKernel::unit_quartic();
        let (r1, r2) = (2f64.sqrt() - 1.0, 2f64.sqrt() + 1.0);
        for i in 0..1000 {
            let u = i as f64 / 1000.0;
            assert!(s.value(2.0 * u) > 0.0);
            assert!(s.value(2.0 + 1e-3 + 50.0 * u) < 0.0);
            assert!(q.value(r1 * u) > 0.0);
            assert!(q.value(r1 + (r2 - r1) * (0.001 + 0.998 * u)) < 0.0);
            assert!(q.value(r2 + 1e-3 + 50.0 * u) > 0.0);
        }
    }

    #[test]
    fn scalar_decay() {
        let target = -1.0 / (4.0 * PI * PI);
        for t in [1e3, 1e4] {
            let v = t * t * eval_scalar(t).unwrap();
            assert!(((v - target) / target).abs() < 0.01);
        }
    }

    #[test]
    fn integrals_vanish() {
        for kernel in [CorrelationKernel::unit_quartic(), CorrelationKernel::scalar()] {
            let i = integral_to_infinity(&kernel).unwrap();
            assert!(i.value.abs() < 1e-10, "{:?}: {i:?}", kernel.kind());
            assert!(i.abs_error < 1e-10);
        }
        assert!(matches!(
            integral_to_infinity(&CorrelationKernel::squeezed(1.0).unwrap()),
            Err(Error::NonIntegrableKernel(_))
        ));
    }

    #[test]
    fn half_integrals_are_nontrivial() {
        // The vanishing total hides cancelling lobes: the positive part of the
        // scalar kernel integrates to t/(t^2+4) at t = 2, i.e. 1/4 over 4 pi^2.
        let s = CorrelationKernel::scalar();
        let est = quadrature::integrate(|t| s.value(t), 0.0, 2.0, Settings::default()).unwrap();
        assert!((est.value - 0.25 / (4.0 * PI * PI)).abs() < 1e-12);
    }

    #[test]
    fn kind_parsing() {
        assert_eq!(
            "em".parse::<KernelKind>().unwrap(),
            KernelKind::UnitVarianceQuartic
        );
        assert_eq!(
            "scalar".parse::<KernelKind>().unwrap(),
            KernelKind::ScalarLorentzian
        );
        assert!("vector".parse::<KernelKind>().is_err());
    }

    proptest! {
        #[test]
        fn even_and_bounded(t in -1e3f64..1e3, k in 0.01f64..20.0) {
            for kernel in [
                CorrelationKernel::scalar(),
                CorrelationKernel::unit_quartic(),
                CorrelationKernel::squeezed(k).unwrap(),
            ] {
                let v = kernel.value(t);
                prop_assert_eq!(v, kernel.value(-t));
                prop_assert!(v.abs() <= kernel.variance());
            }
        }
    }
}
