//! Three-outcome photon-counting POVM `{M_{t|0}, M_{t|1}, M_{t|2}}`, count
//! probabilities, moments and the Mandel Q parameter.

// Float methods for f64 when std is not linked.
#[allow(unused_imports)]
use num_traits::Float;

use crate::error::{Error, Result};
use crate::linalg::{Operator2, Tolerances};
use crate::pulse::PulseEnvelope;
use crate::quad;
use crate::trajectory::{breaks_within, AtomModel};

/// Allowed mismatch between the two moment routes in [`count_probs`].
pub const MOMENT_AGREEMENT: f64 = 1e-9;

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct PovmSet {
    pub m0: Operator2,
    pub m1: Operator2,
    pub m2: Operator2,
    pub t: f64,
}

impl PovmSet {
    pub fn elements(&self) -> [Operator2; 3] {
        [self.m0, self.m1, self.m2]
    }

    /// Largest entry of `|M₀ + M₁ + M₂ − 1|`.
    pub fn completeness_defect(&self) -> f64 {
        (self.m0 + self.m1 + self.m2).max_abs_diff(&Operator2::IDENTITY)
    }

    /// Smallest eigenvalue over the three elements.
    pub fn min_eigenvalue(&self) -> f64 {
        self.elements()
            .iter()
            .map(|m| m.hermitian_eigenvalues()[0])
            .fold(f64::INFINITY, f64::min)
    }

    pub fn is_valid(&self, tol: &Tolerances) -> bool {
        self.elements()
            .iter()
            .all(|m| m.is_hermitian(tol) && m.hermitian_eigenvalues()[0] >= -tol.psd)
            && self.completeness_defect() <= 1e-9
    }

    /// `Tr(M_{t|m} ρ)`
    pub fn probabilities(&self, rho: &Operator2) -> [f64; 3] {
        self.elements().map(|m| (m * *rho).trace().re)
    }
}

/// Pulse integrals shared by the POVM, the moments and the identities.
#[derive(Debug, Clone, Copy)]
struct Integrals {
    /// `e^{−Γt}`
    decay: f64,
    /// `∫₀ᵗ |ξ|²`
    before: f64,
    /// `∫_t^∞ |ξ|²`
    tail: f64,
    /// `Γ e^{−Γt} |I(t)|²`
    absorbed: f64,
    /// `Γ e^{−Γt} Re J(t)`
    interference: f64,
}

fn integrals(model: &AtomModel, t: f64) -> Result<Integrals> {
    if !(t >= 0.0) || !t.is_finite() {
        return Err(Error::invalid("time must be finite and non-negative"));
    }
    let p = model.params();
    let pulse = model.pulse();
    let rate = p.decay();
    let decay = (-rate * t).exp();
    Ok(Integrals {
        decay,
        before: pulse.weight_before(t),
        tail: pulse.tail(t)?,
        absorbed: rate * decay * pulse.overlap_i(p, t).norm_sqr(),
        interference: rate * decay * pulse.overlap_j(p, t)?.re,
    })
}

/// POVM elements from single pulse integrals (all elements are diagonal).
pub fn povm(model: &AtomModel, t: f64) -> Result<PovmSet> {
    let q = integrals(model, t)?;
    let m0 = Operator2::diag(q.tail + q.absorbed, q.decay * q.tail);
    let m1 = Operator2::diag(
        q.before - q.absorbed,
        (1.0 - q.decay) * q.tail + q.decay * q.before + q.absorbed - 4.0 * q.interference,
    );
    let m2 = Operator2::diag(
        0.0,
        (1.0 - q.decay) * q.before - q.absorbed + 4.0 * q.interference,
    );
    Ok(PovmSet { m0, m1, m2, t })
}

/// POVM elements evaluated directly as integrals over detection times
/// (slow; used to cross-check [`povm`]).
pub fn povm_unsimplified(model: &AtomModel, t: f64, tol: f64) -> Result<PovmSet> {
    let q = integrals(model, t)?;
    let p = model.params();
    let pulse = model.pulse();
    let rate = p.decay();
    let gamma = p.gamma();
    let breaks = breaks_within(pulse, t);

    let m1_g = quad::integrate_piecewise(
        |t1| (pulse.at(t1) - (-gamma * t1).exp() * pulse.overlap(gamma, t1) * rate).norm_sqr(),
        0.0,
        t,
        &breaks,
        tol,
    )?;
    let i_t = pulse.overlap(gamma, t);
    let m1_e_inner = quad::integrate_piecewise(
        |t1| {
            let late = (-gamma * t1).exp() * (i_t - pulse.overlap(gamma, t1));
            (pulse.at(t1) - late * rate).norm_sqr()
        },
        0.0,
        t,
        &breaks,
        tol,
    )?;
    let pair = pair_integral(pulse, model, t, tol)?;

    Ok(PovmSet {
        m0: Operator2::diag(q.tail + q.absorbed, q.decay * q.tail),
        m1: Operator2::diag(m1_g, (1.0 - q.decay) * q.tail + q.decay * m1_e_inner),
        m2: Operator2::diag(0.0, rate * pair),
        t,
    })
}

/// `∫₀ᵗ dt₂ ∫₀^{t₂} dt₁ e^{−Γ(t₁+t₂)} |ξ_{t₁}e^{γt₁} + ξ_{t₂}e^{γt₂} − Γ∫_{t₁}^{t₂} ξ_s e^{γs} ds|²`
/// with the innermost integral taken by quadrature.
fn pair_integral(pulse: &PulseEnvelope, model: &AtomModel, t: f64, tol: f64) -> Result<f64> {
    let p = model.params();
    let rate = p.decay();
    let gamma = p.gamma();
    let breaks = breaks_within(pulse, t);
    let span = t.max(1.0);
    let mut failure = None;
    let v = quad::integrate_piecewise(
        |t2| {
            let inner_breaks = breaks_within(pulse, t2);
            let r = quad::integrate_piecewise(
                |t1| {
                    let between = direct_overlap(pulse, gamma, t1, t2, tol / (span * span));
                    let amp = pulse.at(t1) * (gamma * t1).exp() + pulse.at(t2) * (gamma * t2).exp()
                        - between * rate;
                    (-rate * (t1 + t2)).exp() * amp.norm_sqr()
                },
                0.0,
                t2,
                &inner_breaks,
                tol / span,
            );
            r.unwrap_or_else(|e| {
                failure = Some(Error::from(e));
                0.0
            })
        },
        0.0,
        t,
        &breaks,
        tol,
    )?;
    match failure {
        Some(e) => Err(e),
        None => Ok(v),
    }
}

/// `∫_a^b ξ_s e^{γs} ds` by quadrature.
fn direct_overlap(pulse: &PulseEnvelope, gamma: crate::C64, a: f64, b: f64, tol: f64) -> crate::C64 {
    let breaks = pulse.breakpoints();
    quad::integrate_piecewise(|s| pulse.at(s) * (gamma * s).exp(), a, b, breaks, tol)
        .unwrap_or_else(|f| f.estimate)
}

/// Count probabilities and moments at time `t`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct CountStatistics {
    pub p0: f64,
    pub p1: f64,
    pub p2: f64,
    pub mean: f64,
    pub second_moment: f64,
    /// `None` when the mean count is zero.
    pub mandel_q: Option<f64>,
}

impl CountStatistics {
    /// Statistics of an arbitrary distribution over `{0, 1, 2}` counts.
    pub fn from_probabilities(p0: f64, p1: f64, p2: f64) -> Self {
        let mean = p1 + 2.0 * p2;
        let second_moment = p1 + 4.0 * p2;
        let mut s = CountStatistics {
            p0,
            p1,
            p2,
            mean,
            second_moment,
            mandel_q: None,
        };
        s.mandel_q = mandel_q(&s).ok();
        s
    }

    pub fn variance(&self) -> f64 {
        self.second_moment - self.mean * self.mean
    }
}

/// `P_t(m) = Tr(M_{t|m}ρ₀)` together with the mean and second moment.
///
/// The moments are computed both from their closed forms and as
/// `Σ m^k P_t(m)`; a disagreement beyond [`MOMENT_AGREEMENT`] is reported as
/// an integration failure.
pub fn count_probs(model: &AtomModel, t: f64) -> Result<CountStatistics> {
    let set = povm(model, t)?;
    let [p0, p1, p2] = set.probabilities(model.rho0());
    let stats = CountStatistics::from_probabilities(p0, p1, p2);

    let (mean, second) = closed_form_moments(model, t)?;
    let gap = (mean - stats.mean).abs().max((second - stats.second_moment).abs());
    if !(gap <= MOMENT_AGREEMENT) {
        return Err(Error::Integration {
            message: "closed-form moments disagree with the count distribution".into(),
            estimate: mean,
            error: gap,
        });
    }
    Ok(stats)
}

/// Mean and second moment of the count from their closed forms.
pub fn closed_form_moments(model: &AtomModel, t: f64) -> Result<(f64, f64)> {
    let q = integrals(model, t)?;
    let pg = model.rho0().gg().re;
    let pe = model.rho0().ee().re;
    let ground = q.before - q.absorbed;
    let grow = 1.0 - q.decay;
    let mean = ground * pg
        + (grow * (1.0 + q.before) + q.decay * q.before - q.absorbed + 4.0 * q.interference) * pe;
    let second = ground * pg
        + (grow * (1.0 + 3.0 * q.before) + q.decay * q.before - 3.0 * q.absorbed
            + 12.0 * q.interference)
            * pe;
    Ok((mean, second))
}

/// `Q = (⟨m²⟩ − ⟨m⟩²)/⟨m⟩ − 1`
pub fn mandel_q(stats: &CountStatistics) -> Result<f64> {
    if !(stats.mean > 0.0) {
        return Err(Error::UndefinedStatistic("Mandel Q needs a positive mean count".into()));
    }
    Ok(stats.variance() / stats.mean - 1.0)
}

/// Absolute residuals of the three integral identities that reduce the
/// POVM to single integrals. The left sides are evaluated by direct
/// quadrature of their inner integrals, the right sides through the
/// overlap functions of the pulse.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct IdentityResiduals {
    pub ground_branch: f64,
    pub excited_branch: f64,
    pub pair: f64,
}

impl IdentityResiduals {
    pub fn max(&self) -> f64 {
        self.ground_branch.max(self.excited_branch).max(self.pair)
    }
}

pub fn verify_povm_identities(model: &AtomModel, t: f64, tol: f64) -> Result<IdentityResiduals> {
    let q = integrals(model, t)?;
    if t == 0.0 {
        return Ok(IdentityResiduals {
            ground_branch: 0.0,
            excited_branch: 0.0,
            pair: 0.0,
        });
    }
    let p = model.params();
    let pulse = model.pulse();
    let rate = p.decay();
    let gamma = p.gamma();
    let breaks = breaks_within(pulse, t);
    let span = t.max(1.0);
    let inner_tol = tol / (span * span);
    let abs_i2 = pulse.overlap_i(p, t).norm_sqr();
    let re_j = pulse.overlap_j(p, t)?.re;

    let lhs1 = quad::integrate_piecewise(
        |t1| {
            let amp = pulse.at(t1) * (gamma * t1).exp()
                - direct_overlap(pulse, gamma, 0.0, t1, inner_tol) * rate;
            (-rate * t1).exp() * amp.norm_sqr()
        },
        0.0,
        t,
        &breaks,
        tol,
    )?;
    let rhs1 = q.before - rate * q.decay * abs_i2;

    let lhs2 = quad::integrate_piecewise(
        |t1| {
            let late = (-gamma * t1).exp() * direct_overlap(pulse, gamma, t1, t, inner_tol);
            (pulse.at(t1) - late * rate).norm_sqr()
        },
        0.0,
        t,
        &breaks,
        tol,
    )?;
    let rhs2 = q.before + rate * abs_i2 - 4.0 * rate * re_j;

    let lhs3 = pair_integral(pulse, model, t, tol)?;
    let rhs3 = (1.0 - q.decay) * q.before / rate - q.decay * abs_i2 + 4.0 * q.decay * re_j;

    Ok(IdentityResiduals {
        ground_branch: (lhs1 - rhs1).abs(),
        excited_branch: (lhs2 - rhs2).abs(),
        pair: (lhs3 - rhs3).abs(),
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::linalg::Ket2;
    use crate::pulse::ModelParams;

    fn model(psi: Ket2) -> AtomModel {
        AtomModel::pure(
            ModelParams::new(1.0, 0.0).unwrap(),
            PulseEnvelope::exponential(0.5).unwrap(),
            psi,
        )
        .unwrap()
    }

    #[test]
    fn origin_is_trivial_measurement() {
        let set = povm(&model(Ket2::ground()), 0.0).unwrap();
        assert!(set.m0.max_abs_diff(&Operator2::IDENTITY) < 1e-15);
        assert!(set.m1.max_abs() < 1e-15 && set.m2.max_abs() < 1e-15);
    }

    #[test]
    fn poisson_record_has_zero_q() {
        // Mean 1/2, variance 1/2.
        let s = CountStatistics {
            p0: 0.0,
            p1: 0.0,
            p2: 0.0,
            mean: 0.5,
            second_moment: 0.75,
            mandel_q: None,
        };
        assert!(mandel_q(&s).unwrap().abs() < 1e-15);
    }

    #[test]
    fn q_undefined_without_counts() {
        let s = count_probs(&model(Ket2::ground()), 0.0).unwrap();
        assert_eq!(s.mandel_q, None);
        assert!(matches!(mandel_q(&s), Err(Error::UndefinedStatistic(_))));
    }

    #[test]
    fn ground_start_q_is_minus_mean() {
        let m = model(Ket2::ground());
        for t in [0.5, 2.0, 7.0] {
            let s = count_probs(&m, t).unwrap();
            assert!((s.mandel_q.unwrap() + s.mean).abs() < 1e-12);
        }
    }
}
