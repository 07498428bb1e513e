//! Closed-form conditional vectors of the two-level atom for records with
//! zero, one and two photon detections, and the detection-time densities
//! derived from them.
//!
//! A record is summarized by a pair of unnormalized vectors `(|α⟩, |β⟩)`:
//! `|α⟩` is the branch where the atom has not yet met the photon, `|β⟩` the
//! branch where it has. The conditional operator is
//! `|α⟩⟨α| ∫_t^∞|ξ|² + |β⟩⟨β|`; its trace is the probability (density) of
//! the record. No record with three or more detections has nonzero weight,
//! so no such constructor exists.

use alloc::vec;
use alloc::vec::Vec;

// Float methods for f64 when std is not linked.
#[allow(unused_imports)]
use num_traits::Float;

use crate::error::{Error, Result};
use crate::linalg::{Ket2, Operator2, Tolerances, C64, ZERO};
use crate::pulse::{ModelParams, PulseEnvelope};
use crate::quad;

/// Atom parameters, input pulse and initial atom state.
#[derive(Debug, Clone, PartialEq)]
pub struct AtomModel {
    params: ModelParams,
    pulse: PulseEnvelope,
    rho0: Operator2,
    psi0: Option<Ket2>,
}

impl AtomModel {
    /// Pure initial state `|ψ₀⟩`, which must be normalized.
    pub fn pure(params: ModelParams, pulse: PulseEnvelope, psi0: Ket2) -> Result<Self> {
        if !psi0.is_finite() || (psi0.norm_sqr() - 1.0).abs() > Tolerances::DEFAULT.ket_norm {
            return Err(Error::invalid("initial ket must be finite and normalized"));
        }
        Ok(AtomModel {
            params,
            pulse,
            rho0: psi0.projector(),
            psi0: Some(psi0),
        })
    }

    /// Arbitrary initial density operator. A rank-one `ρ₀` also records its
    /// ket, so the conditional-vector functions accept it.
    pub fn mixed(params: ModelParams, pulse: PulseEnvelope, rho0: Operator2) -> Result<Self> {
        if !rho0.is_finite() || !rho0.is_density(&Tolerances::DEFAULT) {
            return Err(Error::invalid("initial state is not a density operator"));
        }
        let [(low, _), (high, top)] = rho0.hermitian_eigen();
        let psi0 = (low.abs() <= Tolerances::DEFAULT.psd && (high - 1.0).abs() <= 1e-10).then_some(top);
        Ok(AtomModel {
            params,
            pulse,
            rho0,
            psi0,
        })
    }

    pub fn params(&self) -> &ModelParams {
        &self.params
    }

    pub fn pulse(&self) -> &PulseEnvelope {
        &self.pulse
    }

    pub fn rho0(&self) -> &Operator2 {
        &self.rho0
    }

    pub fn psi0(&self) -> Option<&Ket2> {
        self.psi0.as_ref()
    }

    pub fn with_pure_state(&self, psi0: Ket2) -> Result<Self> {
        AtomModel::pure(self.params, self.pulse.clone(), psi0)
    }

    /// `H_S = −Δ₀ σ_z`
    pub fn hamiltonian(&self) -> Operator2 {
        Operator2::sigma_z().scale_re(-self.params.detuning())
    }

    /// `L = √Γ σ₋`
    pub fn coupling(&self) -> Operator2 {
        Operator2::sigma_minus().scale_re(self.params.decay().sqrt())
    }

    pub fn ground_population(&self) -> f64 {
        self.rho0.gg().re
    }

    pub fn excited_population(&self) -> f64 {
        self.rho0.ee().re
    }

    /// `ρ₀ = Σ w_i |ψ_i⟩⟨ψ_i|` with positive weights.
    pub fn pure_components(&self) -> Vec<(f64, Ket2)> {
        if let Some(psi) = self.psi0 {
            return vec![(1.0, psi)];
        }
        self.rho0
            .hermitian_eigen()
            .into_iter()
            .filter(|(w, _)| *w > 1e-15)
            .collect()
    }

    /// Time after which the pulse tail and the free decay `e^{−Γt}` are both
    /// below 1e−12.
    pub fn horizon(&self) -> f64 {
        self.pulse.support_end() + (1e12_f64).ln() / self.params.decay()
    }

    fn ket(&self) -> Result<Ket2> {
        self.psi0.ok_or_else(|| {
            Error::UnsupportedState(
                "conditional vectors need a pure initial state; decompose the mixture first".into(),
            )
        })
    }
}

/// Unnormalized conditional vectors for one detection record.
#[derive(Debug, Clone, PartialEq)]
pub struct ConditionalPair {
    pub alpha: Ket2,
    pub beta: Ket2,
    pub t: f64,
    /// Detection times, strictly increasing.
    pub detections: Vec<f64>,
}

impl ConditionalPair {
    /// `|α⟩⟨α| ∫_t^∞|ξ|² + |β⟩⟨β|`
    pub fn operator(&self, pulse: &PulseEnvelope) -> Operator2 {
        cond_operator(self, pulse)
    }
}

fn check_time(t: f64) -> Result<()> {
    if t >= 0.0 && t.is_finite() {
        Ok(())
    } else {
        Err(Error::invalid("time must be finite and non-negative"))
    }
}

/// `e^{−γt} ∫₀ᵗ ξ_s e^{γs} ds`
fn decayed_overlap(pulse: &PulseEnvelope, gamma: C64, t: f64) -> C64 {
    (-gamma * t).exp() * pulse.overlap(gamma, t)
}

/// No detection in `[0, t]`.
pub fn cond_zero(model: &AtomModel, t: f64) -> Result<ConditionalPair> {
    check_time(t)?;
    let psi = model.ket()?;
    let p = &model.params;
    let delta = p.detuning();
    let half = 0.5 * p.decay();
    let excited_phase = C64::new(-half * t, delta * t).exp();
    let alpha = Ket2::new(C64::new(0.0, -delta * t).exp() * psi.g, excited_phase * psi.e);
    let beta_e = -excited_phase * p.decay().sqrt() * model.pulse.overlap_i(p, t) * psi.g;
    Ok(ConditionalPair {
        alpha,
        beta: Ket2::new(ZERO, beta_e),
        t,
        detections: Vec::new(),
    })
}

/// One detection at `t1`, none other in `[0, t]`.
pub fn cond_one(model: &AtomModel, t: f64, t1: f64) -> Result<ConditionalPair> {
    check_time(t1)?;
    if t1 > t || !t.is_finite() {
        return Err(Error::invalid("detection time must lie in [0, t]"));
    }
    let psi = model.ket()?;
    let p = &model.params;
    let gamma = p.gamma();
    let rate = p.decay();
    let phase_t = C64::new(0.0, -p.detuning() * t).exp();
    let xi1 = model.pulse.at(t1);

    let alpha_g = phase_t * rate.sqrt() * (-gamma * t1).exp() * psi.e;

    let early = decayed_overlap(&model.pulse, gamma, t1);
    let later = (-gamma * t1).exp() * (model.pulse.overlap(gamma, t) - model.pulse.overlap(gamma, t1));
    let beta_g = phase_t * (xi1 - early * rate) * psi.g;
    let beta_e = phase_t * (-gamma * t).exp() * (xi1 - later * rate) * psi.e;

    Ok(ConditionalPair {
        alpha: Ket2::new(alpha_g, ZERO),
        beta: Ket2::new(beta_g, beta_e),
        t,
        detections: vec![t1],
    })
}

/// `ξ_{t₁}e^{γt₁} + ξ_{t₂}e^{γt₂} − Γ∫_{t₁}^{t₂} ξ_s e^{γs} ds`
fn two_count_amplitude(pulse: &PulseEnvelope, params: &ModelParams, t1: f64, t2: f64) -> C64 {
    let gamma = params.gamma();
    pulse.at(t1) * (gamma * t1).exp() + pulse.at(t2) * (gamma * t2).exp()
        - (pulse.overlap(gamma, t2) - pulse.overlap(gamma, t1)) * params.decay()
}

/// Detections at `t1 < t2`, none other in `[0, t]`. `α` vanishes: after two
/// counts the photon has certainly been met.
pub fn cond_two(model: &AtomModel, t: f64, t1: f64, t2: f64) -> Result<ConditionalPair> {
    check_time(t1)?;
    if !(t1 <= t2 && t2 <= t) || !t.is_finite() {
        return Err(Error::invalid("detection times must satisfy 0 ≤ t1 ≤ t2 ≤ t"));
    }
    let psi = model.ket()?;
    let p = &model.params;
    let prefactor = C64::new(0.0, -p.detuning() * t).exp() * (-p.gamma() * (t1 + t2)).exp() * p.decay().sqrt();
    let beta_g = prefactor * two_count_amplitude(&model.pulse, p, t1, t2) * psi.e;
    Ok(ConditionalPair {
        alpha: Ket2::ZERO,
        beta: Ket2::new(beta_g, ZERO),
        t,
        detections: vec![t1, t2],
    })
}

/// Unnormalized conditional state `|α⟩⟨α| ∫_t^∞|ξ|² + |β⟩⟨β|`.
pub fn cond_operator(pair: &ConditionalPair, pulse: &PulseEnvelope) -> Operator2 {
    pair.alpha.projector().scale_re(pulse.tail_at(pair.t)) + pair.beta.projector()
}

/// Probability `P_t(0)` of no detection in `[0, t]`, for any `ρ₀`.
pub fn prob_no_count(model: &AtomModel, t: f64) -> Result<f64> {
    check_time(t)?;
    let p = &model.params;
    let decay = (-p.decay() * t).exp();
    let pg = model.ground_population();
    let pe = model.excited_population();
    let absorbed = p.decay() * decay * model.pulse.overlap_i(p, t).norm_sqr();
    Ok((pg + decay * pe) * model.pulse.tail(t)? + absorbed * pg)
}

/// Density `p(t₁)` of the first detection.
///
/// Only the populations of `ρ₀` enter: the one-count record splits into
/// terms proportional to `⟨g|ψ₀⟩` and `⟨e|ψ₀⟩` that never interfere in the
/// trace, so initial coherences do not contribute.
pub fn p_one(model: &AtomModel, t1: f64) -> Result<f64> {
    check_time(t1)?;
    let p = &model.params;
    let rate = p.decay();
    let xi = model.pulse.at(t1);
    let excited = (-rate * t1).exp() * (rate * model.pulse.tail(t1)? + xi.norm_sqr());
    let ground = (xi - decayed_overlap(&model.pulse, p.gamma(), t1) * rate).norm_sqr();
    Ok(excited * model.excited_population() + ground * model.ground_population())
}

/// Joint density `p(t₂, t₁)` of the first two detections (`t₁ ≤ t₂`).
pub fn p_two(model: &AtomModel, t1: f64, t2: f64) -> Result<f64> {
    check_time(t1)?;
    if !(t1 <= t2) || !t2.is_finite() {
        return Err(Error::invalid("p_two requires t1 ≤ t2"));
    }
    let p = &model.params;
    let rate = p.decay();
    let amp = two_count_amplitude(&model.pulse, p, t1, t2);
    Ok(rate * (-rate * (t1 + t2)).exp() * amp.norm_sqr() * model.excited_population())
}

/// Breakpoints of the pulse inside `(0, end)`.
pub(crate) fn breaks_within(pulse: &PulseEnvelope, end: f64) -> Vec<f64> {
    pulse
        .breakpoints()
        .iter()
        .copied()
        .filter(|&b| b > 0.0 && b < end)
        .collect()
}

/// Mean time of the first (`m = 1`) or second (`m = 2`) detection,
/// integrating the densities up to [`AtomModel::horizon`] to absolute
/// tolerance `tol`.
pub fn mean_time(model: &AtomModel, m: u32, tol: f64) -> Result<f64> {
    let end = model.horizon();
    let breaks = breaks_within(&model.pulse, end);
    match m {
        1 => {
            let v = quad::integrate_piecewise(
                |t1| t1 * p_one(model, t1).unwrap_or(0.0),
                0.0,
                end,
                &breaks,
                tol,
            )?;
            Ok(v)
        }
        2 => {
            if (model.excited_population() - 1.0).abs() > 1e-12 {
                return Err(Error::precondition(
                    "second-count density is normalized only for an excited initial state",
                ));
            }
            let inner_tol = tol / end.max(1.0);
            let mut failure = None;
            let v = quad::integrate_piecewise(
                |t2| {
                    let local = breaks_within(&model.pulse, t2);
                    match quad::integrate_piecewise(
                        |t1| p_two(model, t1, t2).unwrap_or(0.0),
                        0.0,
                        t2,
                        &local,
                        inner_tol / end.max(1.0),
                    ) {
                        Ok(inner) => t2 * inner,
                        Err(e) => {
                            failure = Some(Error::from(e));
                            0.0
                        }
                    }
                },
                0.0,
                end,
                &breaks,
                tol,
            )?;
            match failure {
                Some(e) => Err(e),
                None => Ok(v),
            }
        }
        _ => Err(Error::invalid("mean time is defined for the first or second count only")),
    }
}

/// `∫₀^∞ p(t₁) dt₁` (equals one for every initial state).
pub fn first_count_normalization(model: &AtomModel, tol: f64) -> Result<f64> {
    let end = model.horizon();
    let breaks = breaks_within(&model.pulse, end);
    Ok(quad::integrate_piecewise(|t1| p_one(model, t1).unwrap_or(0.0), 0.0, end, &breaks, tol)?)
}

/// `∫₀^∞ dt₂ ∫₀^{t₂} dt₁ p(t₂, t₁)` (one for an excited initial state).
pub fn second_count_normalization(model: &AtomModel, tol: f64) -> Result<f64> {
    let end = model.horizon();
    let breaks = breaks_within(&model.pulse, end);
    let mut failure = None;
    let v = quad::integrate_piecewise(
        |t2| {
            let local = breaks_within(&model.pulse, t2);
            quad::integrate_piecewise(
                |t1| p_two(model, t1, t2).unwrap_or(0.0),
                0.0,
                t2,
                &local,
                tol / end.max(1.0),
            )
            .unwrap_or_else(|e| {
                failure = Some(Error::from(e));
                0.0
            })
        },
        0.0,
        end,
        &breaks,
        tol,
    )?;
    match failure {
        Some(e) => Err(e),
        None => Ok(v),
    }
}
