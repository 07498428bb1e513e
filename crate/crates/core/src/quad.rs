//! Globally adaptive Gauss–Kronrod (7, 15) quadrature over real, complex
//! and operator-valued integrands, plus Gauss–Legendre rules.

use alloc::vec::Vec;
use core::ops::{Add, Sub};

// Float methods for f64 when std is not linked.
#[allow(unused_imports)]
use num_traits::Float;

use crate::error::Error;
use crate::linalg::{Operator2, C64};

/// Values that can be integrated: a vector space with a magnitude.
pub trait QuadValue: Copy + Add<Output = Self> + Sub<Output = Self> {
    fn zero() -> Self;
    fn scaled(self, w: f64) -> Self;
    fn magnitude(&self) -> f64;
}

impl QuadValue for f64 {
    fn zero() -> Self {
        0.0
    }
    fn scaled(self, w: f64) -> Self {
        self * w
    }
    fn magnitude(&self) -> f64 {
        self.abs()
    }
}

impl QuadValue for C64 {
    fn zero() -> Self {
        C64::new(0.0, 0.0)
    }
    fn scaled(self, w: f64) -> Self {
        self * w
    }
    fn magnitude(&self) -> f64 {
        self.norm()
    }
}

impl QuadValue for Operator2 {
    fn zero() -> Self {
        Operator2::ZERO
    }
    fn scaled(self, w: f64) -> Self {
        self.scale_re(w)
    }
    fn magnitude(&self) -> f64 {
        self.max_abs()
    }
}

/// Failure to reach the requested tolerance within the subdivision budget.
#[derive(Debug, Clone, Copy)]
pub struct QuadFailure<T> {
    pub estimate: T,
    pub error: f64,
}

impl<T: QuadValue> From<QuadFailure<T>> for Error {
    fn from(f: QuadFailure<T>) -> Self {
        Error::Integration {
            message: "adaptive quadrature exceeded its subdivision budget".into(),
            estimate: f.estimate.magnitude(),
            error: f.error,
        }
    }
}

/// Subdivision budget per call.
pub const MAX_INTERVALS: usize = 4000;

#[allow(clippy::excessive_precision)]
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
#[allow(clippy::excessive_precision)]
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
// Gauss weights for the odd-indexed Kronrod nodes 1, 3, 5, 7.
#[allow(clippy::excessive_precision)]
const WG: [f64; 4] = [
    0.129_484_966_168_869_693_270_611_432_679_082,
    0.279_705_391_489_276_667_901_467_771_423_780,
    0.381_830_050_505_118_944_950_369_775_488_975,
    0.417_959_183_673_469_387_755_102_040_816_327,
];

fn gk15<T: QuadValue, F: FnMut(f64) -> T>(f: &mut F, a: f64, b: f64) -> (T, f64) {
    let c = 0.5 * (a + b);
    let h = 0.5 * (b - a);
    let fc = f(c);
    let mut kron = fc.scaled(WGK[7]);
    let mut gauss = fc.scaled(WG[3]);
    for j in 0..7 {
        let x = h * XGK[j];
        let s = f(c - x) + f(c + x);
        kron = kron + s.scaled(WGK[j]);
        if j % 2 == 1 {
            gauss = gauss + s.scaled(WG[j / 2]);
        }
    }
    let kron = kron.scaled(h);
    let gauss = gauss.scaled(h);
    let err = (kron - gauss).magnitude();
    (kron, err)
}

struct Panel<T> {
    a: f64,
    b: f64,
    value: T,
    error: f64,
}

/// `∫_a^b f` to absolute error `tol`.
///
/// The target is relaxed to `64 ε |I|` when the requested tolerance lies
/// below what double precision can resolve.
pub fn integrate<T, F>(f: F, a: f64, b: f64, tol: f64) -> Result<T, QuadFailure<T>>
where
    T: QuadValue,
    F: FnMut(f64) -> T,
{
    integrate_with(f, a, b, tol, 0.0)
}

/// [`integrate`] with a mixed target: stops once the error estimate is
/// below `max(abs_tol, rel_tol·|I|)`.
pub fn integrate_with<T, F>(
    mut f: F,
    a: f64,
    b: f64,
    abs_tol: f64,
    rel_tol: f64,
) -> Result<T, QuadFailure<T>>
where
    T: QuadValue,
    F: FnMut(f64) -> T,
{
    if !(a < b) {
        return Ok(T::zero());
    }
    let (v, e) = gk15(&mut f, a, b);
    let mut panels = Vec::with_capacity(64);
    panels.push(Panel {
        a,
        b,
        value: v,
        error: e,
    });
    let mut total = v;
    let mut total_err = e;
    loop {
        let mag = total.magnitude();
        if !mag.is_finite() || !total_err.is_finite() {
            return Err(QuadFailure {
                estimate: total,
                error: total_err,
            });
        }
        let floor = (64.0 * f64::EPSILON).max(rel_tol) * mag;
        if total_err <= abs_tol.max(floor) {
            return Ok(total);
        }
        if panels.len() >= MAX_INTERVALS {
            return Err(QuadFailure {
                estimate: total,
                error: total_err,
            });
        }
        let (worst, _) = panels
            .iter()
            .enumerate()
            .fold((0, -1.0), |(bi, be), (i, p)| {
                if p.error > be {
                    (i, p.error)
                } else {
                    (bi, be)
                }
            });
        let p = panels.swap_remove(worst);
        let mid = 0.5 * (p.a + p.b);
        if !(p.a < mid && mid < p.b) {
            // Interval exhausted at machine resolution.
            return Err(QuadFailure {
                estimate: total,
                error: total_err,
            });
        }
        let (v1, e1) = gk15(&mut f, p.a, mid);
        let (v2, e2) = gk15(&mut f, mid, p.b);
        panels.push(Panel {
            a: p.a,
            b: mid,
            value: v1,
            error: e1,
        });
        panels.push(Panel {
            a: mid,
            b: p.b,
            value: v2,
            error: e2,
        });
        // Re-sum to avoid drift from repeated add/subtract.
        total = panels.iter().fold(T::zero(), |acc, q| acc + q.value);
        total_err = panels.iter().map(|q| q.error).sum();
    }
}

/// [`integrate`] split at every breakpoint strictly inside `(a, b)`; the
/// tolerance is shared between pieces in proportion to their length.
pub fn integrate_piecewise<T, F>(
    f: F,
    a: f64,
    b: f64,
    breaks: &[f64],
    tol: f64,
) -> Result<T, QuadFailure<T>>
where
    T: QuadValue,
    F: FnMut(f64) -> T,
{
    integrate_piecewise_with(f, a, b, breaks, tol, 0.0)
}

/// [`integrate_piecewise`] with an additional relative target per piece.
pub fn integrate_piecewise_with<T, F>(
    mut f: F,
    a: f64,
    b: f64,
    breaks: &[f64],
    tol: f64,
    rel_tol: f64,
) -> Result<T, QuadFailure<T>>
where
    T: QuadValue,
    F: FnMut(f64) -> T,
{
    if !(a < b) {
        return Ok(T::zero());
    }
    let mut total = T::zero();
    let mut lo = a;
    let len = b - a;
    let mut pieces = breaks.iter().copied().filter(|&x| x > a && x < b).peekable();
    loop {
        let hi = pieces.next().unwrap_or(b);
        let part_tol = tol * (hi - lo) / len;
        match integrate_with(&mut f, lo, hi, part_tol, rel_tol) {
            Ok(v) => total = total + v,
            Err(fail) => {
                return Err(QuadFailure {
                    estimate: total + fail.estimate,
                    error: fail.error,
                })
            }
        }
        if hi >= b {
            return Ok(total);
        }
        lo = hi;
    }
}

/// Nodes and weights of the `n`-point Gauss–Legendre rule on `[-1, 1]`.
pub fn gauss_legendre(n: usize) -> Vec<(f64, f64)> {
    let mut rule = Vec::with_capacity(n);
    let nf = n as f64;
    for i in 0..n {
        // Tricomi initial guess, then Newton on P_n.
        let mut x = (core::f64::consts::PI * (i as f64 + 0.75) / (nf + 0.5)).cos();
        let mut dp = 0.0;
        for _ in 0..100 {
            let (mut p0, mut p1) = (1.0, x);
            for k in 2..=n {
                let kf = k as f64;
                let p2 = ((2.0 * kf - 1.0) * x * p1 - (kf - 1.0) * p0) / kf;
                p0 = p1;
                p1 = p2;
            }
            let pn = if n == 0 { 1.0 } else { p1 };
            let pn1 = if n == 0 { 0.0 } else { p0 };
            dp = nf * (x * pn - pn1) / (x * x - 1.0);
            let dx = pn / dp;
            x -= dx;
            if dx.abs() < 1e-16 {
                break;
            }
        }
        let w = 2.0 / ((1.0 - x * x) * dp * dp);
        rule.push((x, w));
    }
    rule
}

/// Fixed composite Gauss–Legendre rule: `panels` equal panels on `[a, b]`.
pub fn composite_gauss<T, F>(mut f: F, a: f64, b: f64, rule: &[(f64, f64)], panels: usize) -> T
where
    T: QuadValue,
    F: FnMut(f64) -> T,
{
    let h = (b - a) / panels as f64;
    let mut total = T::zero();
    for p in 0..panels {
        let lo = a + h * p as f64;
        let c = lo + 0.5 * h;
        for &(x, w) in rule {
            total = total + f(c + 0.5 * h * x).scaled(0.5 * h * w);
        }
    }
    total
}
