//! Single-photon wavepacket envelopes `ξ_t` and the integrals of `ξ` that
//! recur in every closed form.

use alloc::vec::Vec;

// Float methods for f64 when std is not linked.
#[allow(unused_imports)]
use num_traits::Float;

use crate::error::{Error, Result};
use crate::linalg::{real, C64, ZERO};
use crate::quad;

/// Decay rate `Γ` and detuning `Δ₀ = (ω_c − ω₀)/2` of the atom.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ModelParams {
    decay: f64,
    detuning: f64,
}

impl ModelParams {
    pub fn new(decay: f64, detuning: f64) -> Result<Self> {
        if !(decay > 0.0 && decay.is_finite()) {
            return Err(Error::invalid("decay rate must be positive and finite"));
        }
        if !detuning.is_finite() {
            return Err(Error::invalid("detuning must be finite"));
        }
        Ok(ModelParams { decay, detuning })
    }

    /// `Γ = 0`: atom and field decouple. Only meaningful for building
    /// collision unitaries.
    pub fn uncoupled(detuning: f64) -> Self {
        ModelParams {
            decay: 0.0,
            detuning,
        }
    }

    /// `Γ`
    pub fn decay(&self) -> f64 {
        self.decay
    }

    /// `Δ₀`
    pub fn detuning(&self) -> f64 {
        self.detuning
    }

    /// `γ = Γ/2 − 2iΔ₀`
    pub fn gamma(&self) -> C64 {
        C64::new(0.5 * self.decay, -2.0 * self.detuning)
    }
}

/// How [`PulseEnvelope::tabulated`] treats a sample set whose norm is off.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum Normalization {
    /// Reject envelopes with `|∫|ξ|² − 1| > 1e−9`.
    #[default]
    Strict,
    /// Rescale the samples to unit norm.
    Renormalize,
}

/// Accepted deviation of `∫|ξ|²` from one.
pub const NORM_TOLERANCE: f64 = 1e-9;

#[derive(Debug, Clone, PartialEq)]
pub enum PulseShape {
    /// `ξ_t = √(Ω/2)` on `[0, 2/Ω]`, zero afterwards.
    Square { bandwidth: f64 },
    /// `ξ_t = √Ω e^{−Ωt/2}`.
    Exponential { bandwidth: f64 },
    /// Linear interpolation between samples, zero outside the grid.
    Tabulated(Tabulated),
    /// `ξ ≡ 0`: no photon. Not normalized; used for vacuum-limit checks.
    Vacuum,
}

#[derive(Debug, Clone, PartialEq)]
pub struct Tabulated {
    times: Vec<f64>,
    values: Vec<C64>,
    /// `∫_{t₀}^{t_i} |ξ|²` at every knot.
    cumulative: Vec<f64>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct PulseEnvelope {
    shape: PulseShape,
    support_end: f64,
    breaks: Vec<f64>,
}

/// `(e^{zt} − 1)/z`, continuous through `z = 0`.
pub(crate) fn phi1(z: C64, t: f64) -> C64 {
    if z == ZERO {
        return real(t);
    }
    expm1c(z * t) / z
}

/// `∫₀^h u e^{zu} du`
pub(crate) fn phi2(z: C64, h: f64) -> C64 {
    let w = z * h;
    if w.norm() < 0.5 {
        let mut term = real(1.0);
        let mut sum = real(0.5);
        for n in 1..30 {
            term = term * w / n as f64;
            sum += term / (n as f64 + 2.0);
        }
        sum * h * h
    } else {
        (real(h) * w.exp() - phi1(z, h)) / z
    }
}

/// `e^w − 1` without cancellation for small `|w|`.
pub(crate) fn expm1c(w: C64) -> C64 {
    let (x, y) = (w.re, w.im);
    let s = (0.5 * y).sin();
    C64::new(x.exp_m1() * y.cos() - 2.0 * s * s, x.exp() * y.sin())
}

impl Tabulated {
    fn segment_weight(v0: C64, v1: C64, h: f64) -> f64 {
        h * (v0.norm_sqr() + (v0 * v1.conj()).re + v1.norm_sqr()) / 3.0
    }

    fn build(times: Vec<f64>, values: Vec<C64>) -> Self {
        let mut cumulative = Vec::with_capacity(times.len());
        let mut acc = 0.0;
        cumulative.push(0.0);
        for i in 1..times.len() {
            acc += Self::segment_weight(values[i - 1], values[i], times[i] - times[i - 1]);
            cumulative.push(acc);
        }
        Tabulated {
            times,
            values,
            cumulative,
        }
    }

    pub fn times(&self) -> &[f64] {
        &self.times
    }

    pub fn values(&self) -> &[C64] {
        &self.values
    }

    fn total(&self) -> f64 {
        *self.cumulative.last().unwrap_or(&0.0)
    }

    /// Index `i` with `times[i] <= t < times[i+1]`, if `t` is inside the grid.
    fn segment(&self, t: f64) -> Option<usize> {
        let n = self.times.len();
        if n < 2 || t < self.times[0] || t > self.times[n - 1] {
            return None;
        }
        let i = self.times.partition_point(|&x| x <= t);
        Some(i.saturating_sub(1).min(n - 2))
    }

    fn interpolate(&self, i: usize, t: f64) -> C64 {
        let (t0, t1) = (self.times[i], self.times[i + 1]);
        let u = (t - t0) / (t1 - t0);
        self.values[i] * (1.0 - u) + self.values[i + 1] * u
    }

    fn value(&self, t: f64) -> C64 {
        match self.segment(t) {
            Some(i) => self.interpolate(i, t),
            None => ZERO,
        }
    }

    fn value_right(&self, t: f64) -> C64 {
        let n = self.times.len();
        if n >= 2 && t >= self.times[n - 1] {
            return ZERO;
        }
        self.value(t)
    }

    fn value_left(&self, t: f64) -> C64 {
        if !self.times.is_empty() && t <= self.times[0] {
            return ZERO;
        }
        self.value(t)
    }

    fn weight_before(&self, t: f64) -> f64 {
        let n = self.times.len();
        if n < 2 || t <= self.times[0] {
            return 0.0;
        }
        if t >= self.times[n - 1] {
            return self.total();
        }
        let i = self.segment(t).unwrap_or(0);
        let v0 = self.values[i];
        let vt = self.interpolate(i, t);
        self.cumulative[i] + Self::segment_weight(v0, vt, t - self.times[i])
    }

    fn slope(&self, i: usize) -> C64 {
        (self.values[i + 1] - self.values[i]) / (self.times[i + 1] - self.times[i])
    }

    /// `∫_{t_i}^{t_i + h} ξ_s e^{bs} ds` inside segment `i`.
    fn segment_overlap(&self, i: usize, b: C64, h: f64) -> C64 {
        let s0 = self.times[i];
        (b * s0).exp() * (self.values[i] * phi1(b, h) + self.slope(i) * phi2(b, h))
    }

    fn overlap(&self, b: C64, t: f64) -> C64 {
        let n = self.times.len();
        let mut acc = ZERO;
        if n < 2 || t <= self.times[0] {
            return acc;
        }
        for i in 0..n - 1 {
            let (s0, s1) = (self.times[i], self.times[i + 1]);
            if t >= s1 {
                acc += self.segment_overlap(i, b, s1 - s0);
            } else {
                acc += self.segment_overlap(i, b, t - s0);
                break;
            }
        }
        acc
    }

    /// `∫₀ᵗ ξ*_{t₁} e^{a t₁} ∫₀^{t₁} ξ_s e^{bs} ds dt₁`, one pass over the
    /// segments carrying the inner integral along.
    fn nested(&self, a: C64, b: C64, t: f64, rel: f64) -> Result<C64> {
        let n = self.times.len();
        let mut inner = ZERO;
        let mut acc = ZERO;
        if n < 2 || t <= self.times[0] {
            return Ok(acc);
        }
        for i in 0..n - 1 {
            let (s0, s1) = (self.times[i], self.times[i + 1]);
            let end = s1.min(t);
            let start_inner = inner;
            let piece: C64 = quad::integrate_with(
                |t1| {
                    let xi = self.interpolate(i, t1);
                    xi.conj() * (a * t1).exp() * (start_inner + self.segment_overlap(i, b, t1 - s0))
                },
                s0,
                end,
                1e-16,
                rel,
            )?;
            acc += piece;
            if t <= s1 {
                break;
            }
            inner += self.segment_overlap(i, b, s1 - s0);
        }
        Ok(acc)
    }
}

impl PulseEnvelope {
    /// Square pulse of height `√(Ω/2)` and duration `2/Ω`.
    pub fn square(bandwidth: f64) -> Result<Self> {
        check_bandwidth(bandwidth)?;
        let end = 2.0 / bandwidth;
        Ok(PulseEnvelope {
            shape: PulseShape::Square { bandwidth },
            support_end: end,
            breaks: alloc::vec![end],
        })
    }

    /// Decaying exponential `√Ω e^{−Ωt/2}`; support truncated where the
    /// amplitude falls to 1e−12.
    pub fn exponential(bandwidth: f64) -> Result<Self> {
        check_bandwidth(bandwidth)?;
        Ok(PulseEnvelope {
            shape: PulseShape::Exponential { bandwidth },
            support_end: 2.0 * (1e12_f64).ln() / bandwidth,
            breaks: Vec::new(),
        })
    }

    /// Piecewise-linear envelope through `(times[i], values[i])`; times must
    /// be non-negative and strictly increasing.
    pub fn tabulated(times: Vec<f64>, values: Vec<C64>, norm: Normalization) -> Result<Self> {
        if times.len() < 2 || times.len() != values.len() {
            return Err(Error::invalid(
                "tabulated pulse needs at least two samples and matching lengths",
            ));
        }
        if times[0] < 0.0 || times.iter().any(|t| !t.is_finite()) {
            return Err(Error::invalid("sample times must be finite and non-negative"));
        }
        if times.windows(2).any(|w| w[1] <= w[0]) {
            return Err(Error::invalid("sample times must be strictly increasing"));
        }
        if values.iter().any(|v| !v.is_finite()) {
            return Err(Error::invalid("non-finite pulse amplitude"));
        }
        let mut tab = Tabulated::build(times, values);
        let total = tab.total();
        match norm {
            Normalization::Strict if (total - 1.0).abs() > NORM_TOLERANCE => {
                return Err(Error::invalid(alloc::format!(
                    "pulse norm {total} deviates from 1 by more than {NORM_TOLERANCE:e}"
                )));
            }
            Normalization::Renormalize => {
                if !(total > 0.0) {
                    return Err(Error::invalid("cannot renormalize an all-zero pulse"));
                }
                let s = 1.0 / total.sqrt();
                let values = tab.values.iter().map(|v| v * s).collect();
                tab = Tabulated::build(tab.times, values);
            }
            _ => {}
        }
        let support_end = *tab.times.last().unwrap();
        let breaks = tab.times.clone();
        Ok(PulseEnvelope {
            shape: PulseShape::Tabulated(tab),
            support_end,
            breaks,
        })
    }

    pub fn vacuum() -> Self {
        PulseEnvelope {
            shape: PulseShape::Vacuum,
            support_end: 0.0,
            breaks: Vec::new(),
        }
    }

    pub fn shape(&self) -> &PulseShape {
        &self.shape
    }

    /// End of the support; integrals over `[0, ∞)` truncate here.
    pub fn support_end(&self) -> f64 {
        self.support_end
    }

    /// Points where `ξ` may be discontinuous or kinked.
    pub fn breakpoints(&self) -> &[f64] {
        &self.breaks
    }

    /// Characteristic duration `2/Ω` of the analytic pulses.
    pub fn duration_scale(&self) -> Option<f64> {
        match self.shape {
            PulseShape::Square { bandwidth } | PulseShape::Exponential { bandwidth } => {
                Some(2.0 / bandwidth)
            }
            _ => None,
        }
    }

    /// `ξ_t`
    pub fn eval(&self, t: f64) -> Result<C64> {
        if !(t >= 0.0) {
            return Err(Error::invalid("pulse evaluated at negative or NaN time"));
        }
        Ok(self.at(t))
    }

    /// `ξ_t`, zero for `t < 0`.
    pub(crate) fn at(&self, t: f64) -> C64 {
        if t < 0.0 {
            return ZERO;
        }
        match &self.shape {
            PulseShape::Square { bandwidth } => {
                if t <= 2.0 / bandwidth {
                    real((0.5 * bandwidth).sqrt())
                } else {
                    ZERO
                }
            }
            PulseShape::Exponential { bandwidth } => {
                real(bandwidth.sqrt() * (-0.5 * bandwidth * t).exp())
            }
            PulseShape::Tabulated(tab) => tab.value(t),
            PulseShape::Vacuum => ZERO,
        }
    }

    /// Limit of `ξ_s` as `s → t⁺`: the value held on `[t, t + dt)`.
    pub fn at_right(&self, t: f64) -> C64 {
        match &self.shape {
            PulseShape::Square { bandwidth } if t >= 2.0 / bandwidth => ZERO,
            PulseShape::Tabulated(tab) => tab.value_right(t),
            _ => self.at(t),
        }
    }

    /// Limit of `ξ_s` as `s → t⁻`.
    pub fn at_left(&self, t: f64) -> C64 {
        match &self.shape {
            PulseShape::Square { .. } if t <= 0.0 => ZERO,
            PulseShape::Tabulated(tab) => tab.value_left(t),
            _ if t <= 0.0 => ZERO,
            _ => self.at(t),
        }
    }

    /// `∫_t^∞ |ξ_s|² ds`
    pub fn tail(&self, t: f64) -> Result<f64> {
        if !(t >= 0.0) {
            return Err(Error::invalid("tail evaluated at negative or NaN time"));
        }
        Ok(match &self.shape {
            PulseShape::Square { bandwidth } => (1.0 - 0.5 * bandwidth * t).max(0.0),
            PulseShape::Exponential { bandwidth } => (-bandwidth * t).exp(),
            PulseShape::Tabulated(tab) => (tab.total() - tab.weight_before(t)).max(0.0),
            PulseShape::Vacuum => 0.0,
        })
    }

    pub(crate) fn tail_at(&self, t: f64) -> f64 {
        self.tail(t.max(0.0)).unwrap_or(0.0)
    }

    /// `∫₀ᵗ |ξ_s|² ds`, computed without cancellation for small `t`.
    pub fn weight_before(&self, t: f64) -> f64 {
        if t <= 0.0 {
            return 0.0;
        }
        match &self.shape {
            PulseShape::Square { bandwidth } => (0.5 * bandwidth * t).min(1.0),
            PulseShape::Exponential { bandwidth } => -(-bandwidth * t).exp_m1(),
            PulseShape::Tabulated(tab) => tab.weight_before(t),
            PulseShape::Vacuum => 0.0,
        }
    }

    /// `∫₀ᵗ ξ_s e^{bs} ds` for any complex rate `b`.
    pub fn overlap(&self, b: C64, t: f64) -> C64 {
        if t <= 0.0 {
            return ZERO;
        }
        match &self.shape {
            PulseShape::Square { bandwidth } => {
                let end = t.min(2.0 / bandwidth);
                real((0.5 * bandwidth).sqrt()) * phi1(b, end)
            }
            PulseShape::Exponential { bandwidth } => {
                real(bandwidth.sqrt()) * phi1(b - 0.5 * bandwidth, t)
            }
            PulseShape::Tabulated(tab) => tab.overlap(b, t),
            PulseShape::Vacuum => ZERO,
        }
    }

    /// `I(t) = ∫₀ᵗ ξ_s e^{γs} ds`
    pub fn overlap_i(&self, params: &ModelParams, t: f64) -> C64 {
        self.overlap(params.gamma(), t)
    }

    /// `∫₀ᵗ dt₁ ξ*_{t₁} e^{a t₁} ∫₀^{t₁} ds ξ_s e^{bs}`
    pub fn nested(&self, a: C64, b: C64, t: f64) -> Result<C64> {
        const REL: f64 = 1e-13;
        if t <= 0.0 {
            return Ok(ZERO);
        }
        match &self.shape {
            PulseShape::Vacuum => Ok(ZERO),
            PulseShape::Tabulated(tab) => tab.nested(a, b, t, REL),
            _ => {
                let v = quad::integrate_piecewise_with(
                    |t1| self.at(t1).conj() * (a * t1).exp() * self.overlap(b, t1),
                    0.0,
                    t,
                    &self.breaks,
                    1e-16,
                    REL,
                )?;
                Ok(v)
            }
        }
    }

    /// `J(t) = ∫₀ᵗ dt₁ ξ*_{t₁} e^{γ* t₁} ∫₀^{t₁} ds ξ_s e^{−γ* s}`
    pub fn overlap_j(&self, params: &ModelParams, t: f64) -> Result<C64> {
        let g = params.gamma().conj();
        self.nested(g, -g, t)
    }

    pub fn is_vacuum(&self) -> bool {
        matches!(self.shape, PulseShape::Vacuum)
    }

    /// `sup_t |ξ_t|`
    pub fn peak_amplitude(&self) -> f64 {
        match &self.shape {
            PulseShape::Square { bandwidth } => (0.5 * bandwidth).sqrt(),
            PulseShape::Exponential { bandwidth } => bandwidth.sqrt(),
            PulseShape::Tabulated(tab) => tab.values.iter().map(|v| v.norm()).fold(0.0, f64::max),
            PulseShape::Vacuum => 0.0,
        }
    }
}

fn check_bandwidth(bandwidth: f64) -> Result<()> {
    if bandwidth > 0.0 && bandwidth.is_finite() {
        Ok(())
    } else {
        Err(Error::invalid("pulse bandwidth must be positive and finite"))
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use alloc::vec;

    #[test]
    fn gamma_components() {
        let p = ModelParams::new(1.3, 0.4).unwrap();
        assert_eq!(p.gamma().re, 0.65);
        assert_eq!(p.gamma().im, -0.8);
        assert!(ModelParams::new(0.0, 0.0).is_err());
    }

    #[test]
    fn square_values() {
        let p = PulseEnvelope::square(0.5).unwrap();
        assert_eq!(p.eval(1.0).unwrap(), real(0.5));
        assert_eq!(p.eval(5.0).unwrap(), ZERO);
        assert_eq!(p.eval(4.0).unwrap(), real(0.5));
        assert_eq!(p.at_right(4.0), ZERO);
        assert!(p.eval(-0.1).is_err());
        assert_eq!(p.tail(0.0).unwrap(), 1.0);
        assert_eq!(p.tail(4.0).unwrap(), 0.0);
    }

    #[test]
    fn exponential_values() {
        let p = PulseEnvelope::exponential(1.0).unwrap();
        assert_eq!(p.eval(0.0).unwrap(), real(1.0));
        assert!((p.tail(2f64.ln()).unwrap() - 0.5).abs() < 1e-15);
        assert!((p.support_end() - 2.0 * 12.0 * 10f64.ln()).abs() < 1e-12);
    }

    #[test]
    fn phi_helpers_are_continuous_at_zero() {
        let t = 2.5;
        let at0 = phi1(ZERO, t);
        let near = phi1(C64::new(1e-9, -1e-9), t);
        assert!((at0 - near).norm() < 1e-8);
        let z = C64::new(0.3, 0.2);
        // both branches of phi2 agree near the switch
        let h_small = 0.49 / z.norm();
        let h_big = 0.51 / z.norm();
        let via_series = phi2(z, h_small);
        let via_closed = phi2(z, h_big);
        let num: C64 = quad::integrate(|u| (z * u).exp() * u, 0.0, h_small, 1e-15).unwrap();
        assert!((via_series - num).norm() < 1e-14);
        let num: C64 = quad::integrate(|u| (z * u).exp() * u, 0.0, h_big, 1e-15).unwrap();
        assert!((via_closed - num).norm() < 1e-14);
    }

    #[test]
    fn tabulated_rejects_bad_input() {
        let bad_order = PulseEnvelope::tabulated(vec![0.0, 0.0], vec![ZERO, ZERO], Normalization::Strict);
        assert!(bad_order.is_err());
        let unnormalized =
            PulseEnvelope::tabulated(vec![0.0, 1.0], vec![real(1.0), real(1.1)], Normalization::Strict);
        assert!(unnormalized.is_err());
        let fixed = PulseEnvelope::tabulated(
            vec![0.0, 1.0, 2.0],
            vec![real(2.0), real(2.0), real(1.0)],
            Normalization::Renormalize,
        )
        .unwrap();
        assert!((fixed.tail(0.0).unwrap() - 1.0).abs() < 1e-15);
        assert_eq!(fixed.eval(2.5).unwrap(), ZERO);
    }
}
