//! Repeated-interactions model: the field is a chain of qubits, each of
//! which interacts with the atom for a time `τ` through
//! `V = exp(−iτH)`, `H = 1⊗H_S + (i/√τ)(σ⁺⊗L − σ⁻⊗L†)`, and is then
//! measured in `{|0⟩, |1⟩}`.
//!
//! After `j` collisions the joint state of the atom and the unmeasured
//! qubits is `√τ Σ_{k≥j} ξ_k |1_k⟩⊗|α_j⟩ + |vac⟩⊗|β_j⟩`, so the pair
//! `(α_j, β_j)` is all that has to be propagated.

use alloc::vec::Vec;

// Float methods for f64 when std is not linked.
#[allow(unused_imports)]
use num_traits::Float;

use crate::error::{Error, Result};
use crate::linalg::{expm4, Ket2, Operator2, Operator4, C64};
use crate::pulse::{ModelParams, PulseEnvelope};
use crate::rng::CounterRng;
use crate::trajectory::{cond_zero, AtomModel};

/// Blocks `A_{ε'ε} = ⟨ε'|V|ε⟩` of one collision unitary.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct CollisionBlocks {
    pub a00: Operator2,
    pub a01: Operator2,
    pub a10: Operator2,
    pub a11: Operator2,
}

impl CollisionBlocks {
    pub fn assembled(&self) -> Operator4 {
        Operator4::from_blocks([[self.a00, self.a01], [self.a10, self.a11]])
    }
}

/// Collision Hamiltonian on `qubit ⊗ atom`.
pub fn collision_hamiltonian(params: &ModelParams, tau: f64) -> Operator4 {
    let h_s = Operator2::sigma_z().scale_re(-params.detuning());
    let l = Operator2::sigma_minus().scale_re(params.decay().sqrt());
    // Bath raising operator |1⟩⟨0| in the qubit basis (|0⟩, |1⟩).
    let raise = Operator2::sigma_plus();
    let lower = raise.dagger();
    let coupling = Operator4::kron(&raise, &l) - Operator4::kron(&lower, &l.dagger());
    Operator4::kron(&Operator2::IDENTITY, &h_s) + coupling.scale(C64::new(0.0, 1.0 / tau.sqrt()))
}

pub fn build_blocks(params: &ModelParams, tau: f64) -> Result<CollisionBlocks> {
    if !(tau > 0.0) || !tau.is_finite() {
        return Err(Error::invalid("collision time must be positive"));
    }
    let h = collision_hamiltonian(params, tau);
    let v = expm4(&h.scale(C64::new(0.0, -tau)))?;
    Ok(CollisionBlocks {
        a00: v.block(0, 0),
        a01: v.block(0, 1),
        a10: v.block(1, 0),
        a11: v.block(1, 1),
    })
}

/// Pulse amplitudes seen by successive qubits: `ξ_k = ξ(kτ⁺)`, rescaled so
/// that `Σ_k τ|ξ_k|² = 1` exactly.
#[derive(Debug, Clone, PartialEq)]
pub struct DiscretePulse {
    tau: f64,
    xi: Vec<C64>,
    /// `suffix[k] = Σ_{i≥k} τ|ξ_i|²`, with one trailing zero.
    suffix: Vec<f64>,
}

impl DiscretePulse {
    pub fn sample(pulse: &PulseEnvelope, tau: f64) -> Result<Self> {
        if !(tau > 0.0) || !tau.is_finite() {
            return Err(Error::invalid("collision time must be positive"));
        }
        let n = (pulse.support_end() / tau).ceil() as usize;
        let mut xi: Vec<C64> = (0..n).map(|k| pulse.at_right(k as f64 * tau)).collect();
        let weight: f64 = xi.iter().map(|x| tau * x.norm_sqr()).sum();
        if weight > 0.0 {
            let s = 1.0 / weight.sqrt();
            for x in &mut xi {
                *x *= s;
            }
        }
        let mut suffix = alloc::vec![0.0; n + 1];
        for k in (0..n).rev() {
            suffix[k] = suffix[k + 1] + tau * xi[k].norm_sqr();
        }
        Ok(DiscretePulse { tau, xi, suffix })
    }

    pub fn tau(&self) -> f64 {
        self.tau
    }

    /// `ξ_k`, zero past the sampled support.
    pub fn amplitude(&self, k: usize) -> C64 {
        self.xi.get(k).copied().unwrap_or(C64::new(0.0, 0.0))
    }

    /// `Σ_{i≥k} τ|ξ_i|²`
    pub fn tail(&self, k: usize) -> f64 {
        self.suffix.get(k).copied().unwrap_or(0.0)
    }

    pub fn len(&self) -> usize {
        self.xi.len()
    }

    pub fn is_empty(&self) -> bool {
        self.xi.is_empty()
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct CollisionConfig {
    pub tau: f64,
    pub n_steps: usize,
    pub pulse: PulseEnvelope,
    pub params: ModelParams,
    pub psi0: Ket2,
}

impl CollisionConfig {
    /// Chain long enough to reach `t_end`; the model must have a pure initial state.
    pub fn from_model(model: &AtomModel, tau: f64, t_end: f64) -> Result<Self> {
        let psi0 = *model.psi0().ok_or_else(|| {
            Error::UnsupportedState("the collision model propagates a pure initial state".into())
        })?;
        if !(t_end >= 0.0) || !t_end.is_finite() {
            return Err(Error::invalid("t_end must be finite and non-negative"));
        }
        Ok(CollisionConfig {
            tau,
            n_steps: (t_end / tau).round() as usize,
            pulse: model.pulse().clone(),
            params: *model.params(),
            psi0,
        })
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct CollisionState {
    pub alpha: Ket2,
    pub beta: Ket2,
    /// Collisions performed so far.
    pub j: usize,
    /// `Σ_{k≥j} τ|ξ_k|²`: weight of the photon not yet met.
    pub tail_weight: f64,
    /// Outcomes in order of measurement; `true` is a click.
    pub outcomes: Vec<bool>,
}

impl CollisionState {
    pub fn initial(psi0: Ket2, pulse: &DiscretePulse) -> Self {
        CollisionState {
            alpha: psi0,
            beta: Ket2::ZERO,
            j: 0,
            tail_weight: pulse.tail(0),
            outcomes: Vec::new(),
        }
    }

    /// Unnormalized probability of the outcomes so far:
    /// `‖β‖² + tail_weight·‖α‖²`.
    pub fn record_weight(&self) -> f64 {
        self.beta.norm_sqr() + self.tail_weight * self.alpha.norm_sqr()
    }
}

/// Both candidate successors `(no click, click)` of `s` after collision `s.j`.
pub fn branches(s: &CollisionState, blocks: &CollisionBlocks, pulse: &DiscretePulse) -> [(Ket2, Ket2); 2] {
    let feed = pulse.amplitude(s.j) * pulse.tau().sqrt();
    let dark = (
        blocks.a00.apply(&s.alpha),
        blocks.a00.apply(&s.beta) + blocks.a01.apply(&s.alpha).scale(feed),
    );
    let click = (
        blocks.a10.apply(&s.alpha),
        blocks.a10.apply(&s.beta) + blocks.a11.apply(&s.alpha).scale(feed),
    );
    [dark, click]
}

/// Perform collision `s.j` and measure the qubit; a click is chosen when
/// `u` falls below its conditional probability.
pub fn collision_step(
    s: CollisionState,
    blocks: &CollisionBlocks,
    pulse: &DiscretePulse,
    u: f64,
) -> Result<CollisionState> {
    let tail = pulse.tail(s.j + 1);
    let [dark, click] = branches(&s, blocks, pulse);
    let w_dark = dark.1.norm_sqr() + tail * dark.0.norm_sqr();
    let w_click = click.1.norm_sqr() + tail * click.0.norm_sqr();
    let total = w_dark + w_click;
    if !(total > 0.0) {
        return Err(Error::DegenerateState { step: s.j });
    }
    let clicked = u < w_click / total;
    let (alpha, beta) = if clicked { click } else { dark };
    let mut outcomes = s.outcomes;
    outcomes.push(clicked);
    Ok(CollisionState {
        alpha,
        beta,
        j: s.j + 1,
        tail_weight: tail,
        outcomes,
    })
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct CollisionSample {
    pub j: usize,
    pub alpha: Ket2,
    pub beta: Ket2,
    pub tail_weight: f64,
    pub record_weight: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct ChainRun {
    pub outcomes: Vec<bool>,
    /// Record weight after each collision.
    pub weights: Vec<f64>,
    pub samples: Vec<CollisionSample>,
}

impl ChainRun {
    pub fn clicks(&self) -> usize {
        self.outcomes.iter().filter(|&&o| o).count()
    }
}

/// Sample one measurement record of `cfg.n_steps` collisions, recording
/// the pair at the steps listed in `sample_steps`. Draw `j` of run `run`
/// is `CounterRng::new(seed).uniform(run, j)`.
pub fn run_chain(cfg: &CollisionConfig, seed: u64, run: u64, sample_steps: &[usize]) -> Result<ChainRun> {
    let blocks = build_blocks(&cfg.params, cfg.tau)?;
    let pulse = DiscretePulse::sample(&cfg.pulse, cfg.tau)?;
    let rng = CounterRng::new(seed);
    let mut state = CollisionState::initial(cfg.psi0, &pulse);
    let mut weights = Vec::with_capacity(cfg.n_steps);
    let mut samples = Vec::with_capacity(sample_steps.len());
    let snapshot = |s: &CollisionState| CollisionSample {
        j: s.j,
        alpha: s.alpha,
        beta: s.beta,
        tail_weight: s.tail_weight,
        record_weight: s.record_weight(),
    };
    if sample_steps.contains(&0) {
        samples.push(snapshot(&state));
    }
    for j in 0..cfg.n_steps {
        state = collision_step(state, &blocks, &pulse, rng.uniform(run, j as u64))?;
        weights.push(state.record_weight());
        if sample_steps.contains(&(j + 1)) {
            samples.push(snapshot(&state));
        }
    }
    Ok(ChainRun {
        outcomes: state.outcomes,
        weights,
        samples,
    })
}

/// Unnormalized pair `(α_j, β_j)` of the record with no clicks, for
/// `j = 0..=n_steps`.
pub fn zero_record_branch(cfg: &CollisionConfig) -> Result<Vec<(Ket2, Ket2)>> {
    let blocks = build_blocks(&cfg.params, cfg.tau)?;
    let pulse = DiscretePulse::sample(&cfg.pulse, cfg.tau)?;
    let feed_scale = cfg.tau.sqrt();
    let mut alpha = cfg.psi0;
    let mut beta = Ket2::ZERO;
    let mut out = Vec::with_capacity(cfg.n_steps + 1);
    out.push((alpha, beta));
    for j in 0..cfg.n_steps {
        let feed = pulse.amplitude(j) * feed_scale;
        beta = blocks.a00.apply(&beta) + blocks.a01.apply(&alpha).scale(feed);
        alpha = blocks.a00.apply(&alpha);
        out.push((alpha, beta));
    }
    Ok(out)
}

#[derive(Debug, Clone, PartialEq)]
pub struct ConvergenceTable {
    /// `(τ, max componentwise error of (α, β) against the closed form)`.
    pub rows: Vec<(f64, f64)>,
    /// Least-squares slope of `log error` against `log τ`.
    pub order: f64,
}

/// Compare the no-click branch of the chain with the continuous no-count
/// vectors at `grid_points` equally spaced times in `(0, t_end]`, for each
/// `τ` in `tau_list`.
pub fn convergence_study(model: &AtomModel, tau_list: &[f64], t_end: f64, grid_points: usize) -> Result<ConvergenceTable> {
    if tau_list.len() < 2 || tau_list.windows(2).any(|w| !(w[1] < w[0])) {
        return Err(Error::invalid("need at least two strictly decreasing collision times"));
    }
    if grid_points == 0 || !(t_end > 0.0) {
        return Err(Error::invalid("need a positive horizon and at least one grid point"));
    }
    let mut rows = Vec::with_capacity(tau_list.len());
    for &tau in tau_list {
        let cfg = CollisionConfig::from_model(model, tau, t_end)?;
        let branch = zero_record_branch(&cfg)?;
        let mut worst: f64 = 0.0;
        for i in 1..=grid_points {
            let t = t_end * i as f64 / grid_points as f64;
            let j = ((t / tau).round() as usize).min(cfg.n_steps);
            let exact = cond_zero(model, j as f64 * tau)?;
            let (alpha, beta) = branch[j];
            worst = worst
                .max(alpha.max_abs_diff(&exact.alpha))
                .max(beta.max_abs_diff(&exact.beta));
        }
        rows.push((tau, worst));
    }
    Ok(ConvergenceTable {
        order: fitted_order(&rows),
        rows,
    })
}

/// Least-squares slope through `(ln x, ln y)`.
pub fn fitted_order(rows: &[(f64, f64)]) -> f64 {
    let n = rows.len() as f64;
    let pts: Vec<(f64, f64)> = rows.iter().map(|&(x, y)| (x.ln(), y.ln())).collect();
    let mx = pts.iter().map(|p| p.0).sum::<f64>() / n;
    let my = pts.iter().map(|p| p.1).sum::<f64>() / n;
    let sxy: f64 = pts.iter().map(|p| (p.0 - mx) * (p.1 - my)).sum();
    let sxx: f64 = pts.iter().map(|p| (p.0 - mx) * (p.0 - mx)).sum();
    sxy / sxx
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::linalg::Tolerances;

    #[test]
    fn blocks_are_unitary() {
        let p = ModelParams::new(1.0, 0.3).unwrap();
        for tau in [1e-1, 1e-2, 1e-4] {
            let b = build_blocks(&p, tau).unwrap();
            assert!(b.assembled().is_unitary(&Tolerances::DEFAULT));
        }
    }

    #[test]
    fn decoupled_blocks() {
        let p = ModelParams::uncoupled(0.8);
        let tau = 0.01;
        let b = build_blocks(&p, tau).unwrap();
        let zero = C64::new(0.0, 0.0);
        let free = Operator2::new(C64::new(0.0, -0.8 * tau).exp(), zero, zero, C64::new(0.0, 0.8 * tau).exp());
        assert!(b.a00.max_abs_diff(&free) < 1e-14);
        assert!(b.a10.max_abs() < 1e-15 && b.a01.max_abs() < 1e-15);
    }

    #[test]
    fn discrete_pulse_is_normalized() {
        let d = DiscretePulse::sample(&PulseEnvelope::square(0.5).unwrap(), 1e-3).unwrap();
        assert!((d.tail(0) - 1.0).abs() < 1e-12);
        assert_eq!(d.tail(d.len() + 5), 0.0);
    }

    #[test]
    fn ground_start_cannot_click_without_field() {
        let p = ModelParams::new(1.0, 0.0).unwrap();
        let pulse = DiscretePulse::sample(&PulseEnvelope::vacuum(), 1e-2).unwrap();
        let b = build_blocks(&p, 1e-2).unwrap();
        let s = CollisionState::initial(Ket2::ground(), &pulse);
        let [_, click] = branches(&s, &b, &pulse);
        assert!(click.0.norm_sqr() + click.1.norm_sqr() < 1e-30);
    }
}
