//! Globally adaptive 7/15-point Gauss-Kronrod quadrature.
//!
//! The interval with the largest local error estimate is bisected until the
//! summed estimate drops below the absolute tolerance or the subdivision
//! budget is spent. Endpoint singularities of logarithmic type converge under
//! plain bisection because the Kronrod nodes never touch the panel ends.

use std::cmp::Ordering;
use std::collections::BinaryHeap;

use crate::error::{Error, Result};

const XGK: [f64; 8] = [
    0.991_455_371_120_812_639_206_854_697_526_329,
    0.949_107_912_342_758_524_526_189_684_047_851,
    0.864_864_423_359_769_072_789_712_788_640_926,
    0.741_531_185_599_394_439_863_864_773_280_788,
    0.586_087_235_467_691_130_294_144_845_693_013,
    0.405_845_151_377_397_166_906_606_412_076_961,
    0.207_784_955_007_898_467_600_689_403_773_245,
    0.0,
];

const WGK: [f64; 8] = [
    0.022_935_322_010_529_224_963_732_008_058_970,
    0.063_092_092_629_978_553_290_700_663_189_204,
    0.104_790_010_322_250_183_839_876_322_541_518,
    0.140_653_259_715_525_918_745_189_590_510_238,
    0.169_004_726_639_267_902_826_583_426_598_550,
    0.190_350_578_064_785_409_913_256_402_421_014,
    0.204_432_940_075_298_892_414_161_999_234_649,
    0.209_482_141_084_727_828_012_999_174_891_714,
];

// Gauss weights for the odd-indexed Kronrod nodes XGK[1], XGK[3], XGK[5], XGK[7].
const WG: [f64; 4] = [
    0.129_484_966_168_869_693_270_611_432_679_082,
    0.279_705_391_489_276_667_901_467_771_423_780,
    0.381_830_050_505_118_944_950_369_775_488_975,
    0.417_959_183_673_469_387_755_102_040_816_327,
];

/// Value and absolute error estimate of a quadrature.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct Estimate {
    pub value: f64,
    pub error: f64,
    pub evaluations: usize,
}

/// Tolerance and budget for [`integrate`].
#[derive(Clone, Copy, Debug)]
pub struct Settings {
    pub abs_tol: f64,
    pub max_subdivisions: usize,
}

impl Default for Settings {
    fn default() -> Self {
        Self {
            abs_tol: 1e-10,
            max_subdivisions: 2000,
        }
    }
}

/// One Gauss-Kronrod 15-point panel on `[a, b]`: (kronrod value, |kronrod - gauss|).
pub fn gk15<F: FnMut(f64) -> f64>(f: &mut F, a: f64, b: f64) -> (f64, f64) {
    let center = 0.5 * (a + b);
    let half = 0.5 * (b - a);
    let fc = f(center);
    let mut kronrod = fc * WGK[7];
    let mut gauss = fc * WG[3];
    for (j, (&x, &w)) in XGK.iter().zip(WGK.iter()).take(7).enumerate() {
        let dx = half * x;
        let pair = f(center - dx) + f(center + dx);
        kronrod += w * pair;
        if j % 2 == 1 {
            gauss += WG[j / 2] * pair;
        }
    }
    let value = kronrod * half;
    let err = ((kronrod - gauss) * half).abs();
    (value, err)
}

#[derive(Debug)]
struct Panel {
    a: f64,
    b: f64,
    value: f64,
    error: f64,
}

impl PartialEq for Panel {
    fn eq(&self, other: &Self) -> bool {
        self.error.total_cmp(&other.error) == Ordering::Equal
    }
}
impl Eq for Panel {}
impl PartialOrd for Panel {
    fn partial_cmp(&self, other: &Self) -> Option<Ordering> {
        Some(self.cmp(other))
    }
}
impl Ord for Panel {
    fn cmp(&self, other: &Self) -> Ordering {
        self.error.total_cmp(&other.error)
    }
}

/// Integrates `f` over `[a, b]` split first at the given interior breakpoints.
///
/// On failure the returned [`Error::Convergence`] carries the best estimate and
/// the achieved error bound.
pub fn integrate_with_breaks<F: FnMut(f64) -> f64>(
    mut f: F,
    breaks: &[f64],
    settings: Settings,
) -> Result<Estimate> {
    match integrate_raw(&mut f, breaks, settings) {
        (est, true) => Ok(est),
        (est, false) => Err(Error::Convergence {
            estimate: est.value,
            bound: est.error,
            tolerance: settings.abs_tol,
        }),
    }
}

/// Like [`integrate_with_breaks`] but always returns the best estimate, plus a
/// flag telling whether the tolerance was met.
pub(crate) fn integrate_raw<F: FnMut(f64) -> f64>(
    f: &mut F,
    breaks: &[f64],
    settings: Settings,
) -> (Estimate, bool) {
    debug_assert!(breaks.len() >= 2);
    let mut heap = BinaryHeap::with_capacity(settings.max_subdivisions + breaks.len());
    let mut evaluations = 0;
    for w in breaks.windows(2) {
        let (value, error) = gk15(f, w[0], w[1]);
        evaluations += 15;
        heap.push(Panel {
            a: w[0],
            b: w[1],
            value,
            error,
        });
    }
    let total = |heap: &BinaryHeap<Panel>| {
        heap.iter()
            .fold((0.0, 0.0), |(v, e), p| (v + p.value, e + p.error))
    };

    let mut splits = 0;
    loop {
        let (value, error) = total(&heap);
        if error <= settings.abs_tol {
            return (
                Estimate {
                    value,
                    error,
                    evaluations,
                },
                true,
            );
        }
        if splits >= settings.max_subdivisions {
            return (
                Estimate {
                    value,
                    error,
                    evaluations,
                },
                false,
            );
        }
        let worst = heap.pop().expect("heap holds at least one panel");
        let mid = 0.5 * (worst.a + worst.b);
        if mid <= worst.a || mid >= worst.b {
            // Panel cannot be split further in floating point.
            heap.push(worst);
            let (value, error) = total(&heap);
            return (
                Estimate {
                    value,
                    error,
                    evaluations,
                },
                false,
            );
        }
        for (a, b) in [(worst.a, mid), (mid, worst.b)] {
            let (value, error) = gk15(f, a, b);
            evaluations += 15;
            heap.push(Panel { a, b, value, error });
        }
        splits += 1;
    }
}

/// Integrates `f` over the finite interval `[a, b]`.
pub fn integrate<F: FnMut(f64) -> f64>(f: F, a: f64, b: f64, settings: Settings) -> Result<Estimate> {
    integrate_with_breaks(f, &[a, b], settings)
}

/// Integrates `f` over `[0, inf)` after the change of variables `t = u / (1 - u)`.
///
/// The integrand must decay at least like `t^-2` so the transformed integrand
/// stays bounded as `u -> 1`.
pub fn integrate_half_line<F: FnMut(f64) -> f64>(mut f: F, settings: Settings) -> Result<Estimate> {
    let g = move |u: f64| {
        let one_minus = 1.0 - u;
        let t = u / one_minus;
        if !t.is_finite() {
            return 0.0;
        }
        f(t) / (one_minus * one_minus)
    };
    integrate(g, 0.0, 1.0, settings)
}
