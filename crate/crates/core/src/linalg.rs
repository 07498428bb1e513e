//! Fixed-size complex linear algebra: kets and operators on the atom space
//! `(|g⟩, |e⟩)` and 4×4 operators on one bath qubit ⊗ atom.

use core::ops::{Add, AddAssign, Mul, Neg, Sub};

use num_complex::Complex;
// Float methods for f64 when std is not linked.
#[allow(unused_imports)]
use num_traits::Float;

use crate::error::{Error, Result};

pub type C64 = Complex<f64>;

pub(crate) const I: C64 = C64::new(0.0, 1.0);
pub(crate) const ZERO: C64 = C64::new(0.0, 0.0);
pub(crate) const ONE: C64 = C64::new(1.0, 0.0);

#[inline]
pub(crate) fn real(x: f64) -> C64 {
    C64::new(x, 0.0)
}

/// Numerical tolerances for the structural checks in this module.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Tolerances {
    /// `max |A − A†|` accepted as Hermitian.
    pub hermitian: f64,
    /// `|Tr ρ − 1|` accepted for a density operator.
    pub trace: f64,
    /// Most negative eigenvalue accepted as positive semidefinite.
    pub psd: f64,
    /// `max |U†U − 1|` accepted as unitary.
    pub unitary: f64,
    /// `|⟨ψ|ψ⟩ − 1|` accepted as a normalized ket.
    pub ket_norm: f64,
}

impl Tolerances {
    pub const DEFAULT: Tolerances = Tolerances {
        hermitian: 1e-12,
        trace: 1e-10,
        psd: 1e-10,
        unitary: 1e-10,
        ket_norm: 1e-12,
    };
}

impl Default for Tolerances {
    fn default() -> Self {
        Self::DEFAULT
    }
}

/// Two-component ket `g|g⟩ + e|e⟩`.
#[derive(Debug, Clone, Copy, PartialEq, Default)]
pub struct Ket2 {
    pub g: C64,
    pub e: C64,
}

impl Ket2 {
    pub const ZERO: Ket2 = Ket2 { g: ZERO, e: ZERO };

    pub const fn new(g: C64, e: C64) -> Self {
        Ket2 { g, e }
    }

    pub const fn ground() -> Self {
        Ket2 { g: ONE, e: ZERO }
    }

    pub const fn excited() -> Self {
        Ket2 { g: ZERO, e: ONE }
    }

    /// `(|g⟩ + |e⟩)/√2`
    pub fn plus() -> Self {
        let a = real(core::f64::consts::FRAC_1_SQRT_2);
        Ket2 { g: a, e: a }
    }

    pub fn norm_sqr(&self) -> f64 {
        self.g.norm_sqr() + self.e.norm_sqr()
    }

    /// `⟨self|other⟩`
    pub fn inner(&self, other: &Ket2) -> C64 {
        self.g.conj() * other.g + self.e.conj() * other.e
    }

    pub fn scale(&self, c: C64) -> Ket2 {
        Ket2 {
            g: self.g * c,
            e: self.e * c,
        }
    }

    pub fn is_finite(&self) -> bool {
        self.g.is_finite() && self.e.is_finite()
    }

    /// Largest absolute component difference.
    pub fn max_abs_diff(&self, other: &Ket2) -> f64 {
        (self.g - other.g).norm().max((self.e - other.e).norm())
    }

    /// `|self⟩⟨self|`
    pub fn projector(&self) -> Operator2 {
        Operator2::outer(self, self)
    }
}

impl Add for Ket2 {
    type Output = Ket2;
    fn add(self, rhs: Ket2) -> Ket2 {
        Ket2 {
            g: self.g + rhs.g,
            e: self.e + rhs.e,
        }
    }
}

impl Sub for Ket2 {
    type Output = Ket2;
    fn sub(self, rhs: Ket2) -> Ket2 {
        Ket2 {
            g: self.g - rhs.g,
            e: self.e - rhs.e,
        }
    }
}

/// 2×2 complex operator, `m[row][col]` with row/column 0 = `|g⟩`.
#[derive(Debug, Clone, Copy, PartialEq, Default)]
pub struct Operator2(pub [[C64; 2]; 2]);

impl Operator2 {
    pub const ZERO: Operator2 = Operator2([[ZERO; 2]; 2]);
    pub const IDENTITY: Operator2 = Operator2([[ONE, ZERO], [ZERO, ONE]]);

    pub const fn new(gg: C64, ge: C64, eg: C64, ee: C64) -> Self {
        Operator2([[gg, ge], [eg, ee]])
    }

    pub fn diag(gg: f64, ee: f64) -> Self {
        Operator2::new(real(gg), ZERO, ZERO, real(ee))
    }

    /// `σ₋ = |g⟩⟨e|`
    pub const fn sigma_minus() -> Self {
        Operator2::new(ZERO, ONE, ZERO, ZERO)
    }

    /// `σ₊ = |e⟩⟨g|`
    pub const fn sigma_plus() -> Self {
        Operator2::new(ZERO, ZERO, ONE, ZERO)
    }

    /// `σ_z = |e⟩⟨e| − |g⟩⟨g|`
    pub fn sigma_z() -> Self {
        Operator2::diag(-1.0, 1.0)
    }

    /// `|k⟩⟨b|`
    pub fn outer(k: &Ket2, b: &Ket2) -> Self {
        Operator2::new(
            k.g * b.g.conj(),
            k.g * b.e.conj(),
            k.e * b.g.conj(),
            k.e * b.e.conj(),
        )
    }

    #[inline]
    pub fn gg(&self) -> C64 {
        self.0[0][0]
    }
    #[inline]
    pub fn ge(&self) -> C64 {
        self.0[0][1]
    }
    #[inline]
    pub fn eg(&self) -> C64 {
        self.0[1][0]
    }
    #[inline]
    pub fn ee(&self) -> C64 {
        self.0[1][1]
    }

    pub fn dagger(&self) -> Self {
        let m = &self.0;
        Operator2::new(m[0][0].conj(), m[1][0].conj(), m[0][1].conj(), m[1][1].conj())
    }

    pub fn trace(&self) -> C64 {
        self.0[0][0] + self.0[1][1]
    }

    pub fn scale(&self, c: C64) -> Self {
        let m = &self.0;
        Operator2::new(m[0][0] * c, m[0][1] * c, m[1][0] * c, m[1][1] * c)
    }

    pub fn scale_re(&self, c: f64) -> Self {
        let m = &self.0;
        Operator2::new(m[0][0] * c, m[0][1] * c, m[1][0] * c, m[1][1] * c)
    }

    pub fn apply(&self, k: &Ket2) -> Ket2 {
        let m = &self.0;
        Ket2 {
            g: m[0][0] * k.g + m[0][1] * k.e,
            e: m[1][0] * k.g + m[1][1] * k.e,
        }
    }

    /// `[self, other]`
    pub fn commutator(&self, other: &Operator2) -> Self {
        *self * *other - *other * *self
    }

    /// `{self, other}`
    pub fn anticommutator(&self, other: &Operator2) -> Self {
        *self * *other + *other * *self
    }

    pub fn max_abs(&self) -> f64 {
        self.0
            .iter()
            .flatten()
            .fold(0.0_f64, |acc, z| acc.max(z.norm()))
    }

    pub fn max_abs_diff(&self, other: &Operator2) -> f64 {
        (*self - *other).max_abs()
    }

    pub fn is_finite(&self) -> bool {
        self.0.iter().flatten().all(|z| z.is_finite())
    }

    pub fn hermiticity_defect(&self) -> f64 {
        self.max_abs_diff(&self.dagger())
    }

    pub fn is_hermitian(&self, tol: &Tolerances) -> bool {
        self.hermiticity_defect() <= tol.hermitian
    }

    /// Eigenvalues (ascending) of the Hermitian part, by the closed-form
    /// quadratic formula.
    pub fn hermitian_eigenvalues(&self) -> [f64; 2] {
        let a = self.0[0][0].re;
        let d = self.0[1][1].re;
        let b = (self.0[0][1] + self.0[1][0].conj()) * 0.5;
        let mean = 0.5 * (a + d);
        let half_gap = (0.25 * (a - d) * (a - d) + b.norm_sqr()).sqrt();
        [mean - half_gap, mean + half_gap]
    }

    /// Hermitian, unit trace and positive semidefinite within `tol`.
    pub fn is_density(&self, tol: &Tolerances) -> bool {
        self.is_hermitian(tol)
            && (self.trace() - ONE).norm() <= tol.trace
            && self.hermitian_eigenvalues()[0] >= -tol.psd
    }

    /// Spectral decomposition `Σ λ_i |v_i⟩⟨v_i|` of a Hermitian operator,
    /// eigenvalues ascending, eigenvectors normalized.
    pub fn hermitian_eigen(&self) -> [(f64, Ket2); 2] {
        let [lo, hi] = self.hermitian_eigenvalues();
        let a = self.0[0][0].re;
        let d = self.0[1][1].re;
        let b = (self.0[0][1] + self.0[1][0].conj()) * 0.5;
        if b.norm() <= f64::EPSILON * (a.abs() + d.abs()).max(f64::MIN_POSITIVE) {
            return if a <= d {
                [(a, Ket2::ground()), (d, Ket2::excited())]
            } else {
                [(d, Ket2::excited()), (a, Ket2::ground())]
            };
        }
        // (A − λ)v = 0 with v = (b, λ − a)
        let vec_for = |lambda: f64| {
            let v = Ket2::new(b, real(lambda - a));
            v.scale(real(1.0 / v.norm_sqr().sqrt()))
        };
        [(lo, vec_for(lo)), (hi, vec_for(hi))]
    }
}

impl Add for Operator2 {
    type Output = Operator2;
    fn add(self, rhs: Operator2) -> Operator2 {
        let (a, b) = (&self.0, &rhs.0);
        Operator2::new(a[0][0] + b[0][0], a[0][1] + b[0][1], a[1][0] + b[1][0], a[1][1] + b[1][1])
    }
}

impl AddAssign for Operator2 {
    fn add_assign(&mut self, rhs: Operator2) {
        *self = *self + rhs;
    }
}

impl Sub for Operator2 {
    type Output = Operator2;
    fn sub(self, rhs: Operator2) -> Operator2 {
        let (a, b) = (&self.0, &rhs.0);
        Operator2::new(a[0][0] - b[0][0], a[0][1] - b[0][1], a[1][0] - b[1][0], a[1][1] - b[1][1])
    }
}

impl Neg for Operator2 {
    type Output = Operator2;
    fn neg(self) -> Operator2 {
        self.scale_re(-1.0)
    }
}

impl Mul for Operator2 {
    type Output = Operator2;
    fn mul(self, rhs: Operator2) -> Operator2 {
        let (a, b) = (&self.0, &rhs.0);
        Operator2::new(
            a[0][0] * b[0][0] + a[0][1] * b[1][0],
            a[0][0] * b[0][1] + a[0][1] * b[1][1],
            a[1][0] * b[0][0] + a[1][1] * b[1][0],
            a[1][0] * b[0][1] + a[1][1] * b[1][1],
        )
    }
}

impl Mul<f64> for Operator2 {
    type Output = Operator2;
    fn mul(self, rhs: f64) -> Operator2 {
        self.scale_re(rhs)
    }
}

impl Mul<C64> for Operator2 {
    type Output = Operator2;
    fn mul(self, rhs: C64) -> Operator2 {
        self.scale(rhs)
    }
}

/// ½‖a − b‖₁ for Hermitian `a`, `b`.
pub fn trace_distance(a: &Operator2, b: &Operator2) -> Result<f64> {
    trace_distance_with(a, b, &Tolerances::DEFAULT)
}

pub fn trace_distance_with(a: &Operator2, b: &Operator2, tol: &Tolerances) -> Result<f64> {
    if !a.is_finite() || !b.is_finite() {
        return Err(Error::invalid("trace distance of non-finite operator"));
    }
    if !a.is_hermitian(tol) || !b.is_hermitian(tol) {
        return Err(Error::invalid("trace distance requires Hermitian operators"));
    }
    let [l0, l1] = (*a - *b).hermitian_eigenvalues();
    Ok(0.5 * (l0.abs() + l1.abs()))
}

/// 4×4 complex operator. As a bath-qubit ⊗ atom operator the basis is
/// `(|0,g⟩, |0,e⟩, |1,g⟩, |1,e⟩)`; it also serves as a superoperator on
/// row-major vectorized 2×2 operators.
#[derive(Debug, Clone, Copy, PartialEq, Default)]
pub struct Operator4(pub [[C64; 4]; 4]);

impl Operator4 {
    pub const ZERO: Operator4 = Operator4([[ZERO; 4]; 4]);

    pub fn identity() -> Self {
        let mut m = Self::ZERO;
        for i in 0..4 {
            m.0[i][i] = ONE;
        }
        m
    }

    /// `a ⊗ b` with `a` acting on the first (slow) index.
    pub fn kron(a: &Operator2, b: &Operator2) -> Self {
        let mut m = Self::ZERO;
        for (i, row) in m.0.iter_mut().enumerate() {
            for (j, x) in row.iter_mut().enumerate() {
                *x = a.0[i / 2][j / 2] * b.0[i % 2][j % 2];
            }
        }
        m
    }

    /// Atom block `⟨out|·|inp⟩` for bath-qubit indices `out`, `inp ∈ {0,1}`.
    pub fn block(&self, out: usize, inp: usize) -> Operator2 {
        let r = 2 * out;
        let c = 2 * inp;
        Operator2::new(
            self.0[r][c],
            self.0[r][c + 1],
            self.0[r + 1][c],
            self.0[r + 1][c + 1],
        )
    }

    /// Inverse of [`Operator4::block`]: `blocks[out][inp]`.
    pub fn from_blocks(blocks: [[Operator2; 2]; 2]) -> Self {
        let mut m = Self::ZERO;
        for (i, row) in m.0.iter_mut().enumerate() {
            for (j, x) in row.iter_mut().enumerate() {
                *x = blocks[i / 2][j / 2].0[i % 2][j % 2];
            }
        }
        m
    }

    pub fn dagger(&self) -> Self {
        let mut m = Self::ZERO;
        for i in 0..4 {
            for j in 0..4 {
                m.0[i][j] = self.0[j][i].conj();
            }
        }
        m
    }

    pub fn scale(&self, c: C64) -> Self {
        let mut m = *self;
        m.0.iter_mut().flatten().for_each(|x| *x *= c);
        m
    }

    /// Maximum absolute row sum (induced ∞-norm).
    pub fn norm_inf(&self) -> f64 {
        self.0
            .iter()
            .map(|row| row.iter().map(|z| z.norm()).sum::<f64>())
            .fold(0.0, f64::max)
    }

    pub fn max_abs_diff(&self, other: &Operator4) -> f64 {
        self.0
            .iter()
            .flatten()
            .zip(other.0.iter().flatten())
            .fold(0.0_f64, |acc, (a, b)| acc.max((a - b).norm()))
    }

    pub fn is_finite(&self) -> bool {
        self.0.iter().flatten().all(|z| z.is_finite())
    }

    /// `max |U†U − 1|`
    pub fn unitarity_defect(&self) -> f64 {
        (self.dagger() * *self).max_abs_diff(&Self::identity())
    }

    pub fn is_unitary(&self, tol: &Tolerances) -> bool {
        self.unitarity_defect() <= tol.unitary
    }

    pub fn apply(&self, v: &[C64; 4]) -> [C64; 4] {
        let mut out = [ZERO; 4];
        for (o, row) in out.iter_mut().zip(self.0.iter()) {
            *o = row.iter().zip(v.iter()).map(|(a, b)| a * b).sum();
        }
        out
    }
}

impl Add for Operator4 {
    type Output = Operator4;
    fn add(self, rhs: Operator4) -> Operator4 {
        let mut m = self;
        for (x, y) in m.0.iter_mut().flatten().zip(rhs.0.iter().flatten()) {
            *x += *y;
        }
        m
    }
}

impl Sub for Operator4 {
    type Output = Operator4;
    fn sub(self, rhs: Operator4) -> Operator4 {
        self + rhs.scale(real(-1.0))
    }
}

impl Mul for Operator4 {
    type Output = Operator4;
    fn mul(self, rhs: Operator4) -> Operator4 {
        let mut m = Operator4::ZERO;
        for i in 0..4 {
            for k in 0..4 {
                let a = self.0[i][k];
                for j in 0..4 {
                    m.0[i][j] += a * rhs.0[k][j];
                }
            }
        }
        m
    }
}

/// Matrix exponential by scaling and squaring with a degree-18 Taylor
/// polynomial on the scaled matrix (‖A/2^s‖∞ ≤ 1/2).
pub fn expm4(a: &Operator4) -> Result<Operator4> {
    if !a.is_finite() {
        return Err(Error::invalid("matrix exponential of non-finite matrix"));
    }
    let norm = a.norm_inf();
    let mut squarings = 0u32;
    let mut scale = 1.0;
    while norm * scale > 0.5 {
        scale *= 0.5;
        squarings += 1;
    }
    let x = a.scale(real(scale));
    // Horner: I + x(I + x/2(I + x/3(...)))
    let id = Operator4::identity();
    let mut acc = id;
    for k in (1..=18).rev() {
        acc = id + (x * acc).scale(real(1.0 / k as f64));
    }
    for _ in 0..squarings {
        acc = acc * acc;
    }
    Ok(acc)
}
