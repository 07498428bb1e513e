//! Unconditional (a priori) atom state: closed form, the coupled master
//! equations for `(ϱ, ϱ⁰¹, ϱ¹⁰, ϱ⁰⁰)`, and assembly from the conditional
//! operators of every detection record.

use alloc::vec::Vec;

// Float methods for f64 when std is not linked.
#[allow(unused_imports)]
use num_traits::Float;

use crate::error::{Error, Result};
use crate::linalg::{expm4, real, I, Operator2, Operator4, Tolerances, C64, ZERO};
use crate::pulse::PulseEnvelope;
use crate::quad;
use crate::trajectory::{breaks_within, cond_one, cond_operator, cond_two, cond_zero, AtomModel};

/// `ℒρ = −i[H_S, ρ] − ½{L†L, ρ} + LρL†`
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Lindbladian {
    h: Operator2,
    l: Operator2,
    ldl: Operator2,
}

/// Row-major index of entry `(r, c)` in the vectorized operator.
fn vec_index(r: usize, c: usize) -> usize {
    2 * r + c
}

pub fn vectorize(op: &Operator2) -> [C64; 4] {
    [op.0[0][0], op.0[0][1], op.0[1][0], op.0[1][1]]
}

pub fn unvectorize(v: &[C64; 4]) -> Operator2 {
    Operator2::new(v[0], v[1], v[2], v[3])
}

impl Lindbladian {
    pub fn new(model: &AtomModel) -> Self {
        let h = model.hamiltonian();
        let l = model.coupling();
        Lindbladian {
            h,
            l,
            ldl: l.dagger() * l,
        }
    }

    pub fn hamiltonian(&self) -> Operator2 {
        self.h
    }

    pub fn coupling(&self) -> Operator2 {
        self.l
    }

    pub fn apply(&self, rho: &Operator2) -> Operator2 {
        let unitary = self.h.commutator(rho).scale(-I);
        unitary - self.ldl.anticommutator(rho).scale_re(0.5) + self.l * *rho * self.l.dagger()
    }

    /// Matrix of `ℒ` acting on row-major vectorized operators.
    pub fn superoperator(&self) -> Operator4 {
        let mut m = Operator4::ZERO;
        for r in 0..2 {
            for c in 0..2 {
                let mut basis = Operator2::ZERO;
                basis.0[r][c] = real(1.0);
                let image = vectorize(&self.apply(&basis));
                let col = vec_index(r, c);
                for (row, v) in image.iter().enumerate() {
                    m.0[row][col] = *v;
                }
            }
        }
        m
    }

    /// `e^{ℒt}` as a matrix on vectorized operators.
    pub fn propagator(&self, t: f64) -> Result<Operator4> {
        expm4(&self.superoperator().scale(real(t)))
    }

    /// `e^{ℒt} ρ`
    pub fn evolve(&self, rho: &Operator2, t: f64) -> Result<Operator2> {
        Ok(unvectorize(&self.propagator(t)?.apply(&vectorize(rho))))
    }
}

/// `(ϱ, ϱ⁰¹, ϱ¹⁰, ϱ⁰⁰)` at time `t`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct HierarchyState {
    pub varrho: Operator2,
    pub varrho01: Operator2,
    pub varrho10: Operator2,
    pub varrho00: Operator2,
    pub t: f64,
}

impl HierarchyState {
    pub fn initial(rho0: &Operator2) -> Self {
        HierarchyState {
            varrho: *rho0,
            varrho01: Operator2::ZERO,
            varrho10: Operator2::ZERO,
            varrho00: *rho0,
            t: 0.0,
        }
    }

    /// `max |ϱ¹⁰ − (ϱ⁰¹)†|`
    pub fn adjoint_defect(&self) -> f64 {
        self.varrho10.max_abs_diff(&self.varrho01.dagger())
    }

    fn combine(&self, d: &Derivative, h: f64) -> Self {
        HierarchyState {
            varrho: self.varrho + d.0.scale_re(h),
            varrho01: self.varrho01 + d.1.scale_re(h),
            varrho10: self.varrho10 + d.2.scale_re(h),
            varrho00: self.varrho00 + d.3.scale_re(h),
            t: self.t + h,
        }
    }
}

struct Derivative(Operator2, Operator2, Operator2, Operator2);

impl Derivative {
    fn sum(parts: [(&Derivative, f64); 4]) -> Derivative {
        let mut out = Derivative(Operator2::ZERO, Operator2::ZERO, Operator2::ZERO, Operator2::ZERO);
        for (d, w) in parts {
            out.0 += d.0.scale_re(w);
            out.1 += d.1.scale_re(w);
            out.2 += d.2.scale_re(w);
            out.3 += d.3.scale_re(w);
        }
        out
    }
}

fn hierarchy_rhs(lind: &Lindbladian, s: &HierarchyState, xi: C64) -> Derivative {
    let l = lind.l;
    let ld = l.dagger();
    let d = lind.apply(&s.varrho)
        + s.varrho01.commutator(&ld).scale(xi)
        + l.commutator(&s.varrho10).scale(xi.conj());
    let d01 = lind.apply(&s.varrho01) + l.commutator(&s.varrho00).scale(xi.conj());
    let d10 = lind.apply(&s.varrho10) + s.varrho00.commutator(&ld).scale(xi);
    let d00 = lind.apply(&s.varrho00);
    Derivative(d, d01, d10, d00)
}

/// Largest RK4 step used for the hierarchy: `min(1e−3/Γ, 1e−3·2/Ω)`.
pub fn hierarchy_step(model: &AtomModel) -> f64 {
    let by_decay = 1e-3 / model.params().decay();
    match model.pulse().duration_scale() {
        Some(scale) => by_decay.min(1e-3 * scale),
        None => by_decay,
    }
}

/// Invariant drift beyond which integration is abandoned.
pub const HIERARCHY_DRIFT_LIMIT: f64 = 1e-6;

fn rk4_step(lind: &Lindbladian, pulse: &PulseEnvelope, s: &HierarchyState, h: f64) -> HierarchyState {
    let t = s.t;
    let xi_start = pulse.at_right(t);
    let xi_mid = pulse.at(t + 0.5 * h);
    let xi_end = pulse.at_left(t + h);
    let k1 = hierarchy_rhs(lind, s, xi_start);
    let k2 = hierarchy_rhs(lind, &s.combine(&k1, 0.5 * h), xi_mid);
    let k3 = hierarchy_rhs(lind, &s.combine(&k2, 0.5 * h), xi_mid);
    let k4 = hierarchy_rhs(lind, &s.combine(&k3, h), xi_end);
    let incr = Derivative::sum([(&k1, 1.0), (&k2, 2.0), (&k3, 2.0), (&k4, 1.0)]);
    let mut next = s.combine(&incr, h / 6.0);
    next.t = t + h;
    next
}

/// Fixed-step RK4 integration of the coupled master equations, returning
/// the state at every grid time. Steps never straddle a pulse breakpoint.
pub fn integrate_hierarchy(model: &AtomModel, t_grid: &[f64]) -> Result<Vec<HierarchyState>> {
    integrate_hierarchy_with_step(model, t_grid, hierarchy_step(model))
}

/// [`integrate_hierarchy`] with an explicit maximum step.
pub fn integrate_hierarchy_with_step(
    model: &AtomModel,
    t_grid: &[f64],
    max_step: f64,
) -> Result<Vec<HierarchyState>> {
    if !(max_step > 0.0) {
        return Err(Error::invalid("step must be positive"));
    }
    if t_grid.iter().any(|t| !(*t >= 0.0) || !t.is_finite()) || t_grid.windows(2).any(|w| w[1] < w[0]) {
        return Err(Error::invalid("time grid must be finite, non-negative and non-decreasing"));
    }
    let lind = Lindbladian::new(model);
    let pulse = model.pulse();
    let mut state = HierarchyState::initial(model.rho0());
    let mut out = Vec::with_capacity(t_grid.len());
    let mut steps = 0usize;
    for &target in t_grid {
        // Knots between the current time and the target.
        let mut stops: Vec<f64> = breaks_within(pulse, target)
            .into_iter()
            .filter(|&b| b > state.t)
            .collect();
        stops.push(target);
        for stop in stops {
            let span = stop - state.t;
            if span <= 0.0 {
                continue;
            }
            let n = (span / max_step).ceil().max(1.0) as usize;
            let h = span / n as f64;
            let origin = state.t;
            for i in 0..n {
                state = rk4_step(&lind, pulse, &state, h);
                state.t = if i + 1 == n { stop } else { origin + h * (i + 1) as f64 };
                steps += 1;
            }
            let drift = (state.varrho.trace() - real(1.0)).norm().max(state.adjoint_defect());
            if !(drift <= HIERARCHY_DRIFT_LIMIT) {
                return Err(Error::Integration {
                    message: alloc::format!("hierarchy invariants drifted after {steps} steps"),
                    estimate: state.varrho.trace().re,
                    error: drift,
                });
            }
        }
        out.push(state);
    }
    Ok(out)
}

/// Closed-form a priori state at time `t`.
pub fn apriori_closed_form(model: &AtomModel, t: f64) -> Result<Operator2> {
    if !(t >= 0.0) || !t.is_finite() {
        return Err(Error::invalid("time must be finite and non-negative"));
    }
    let p = model.params();
    let pulse = model.pulse();
    let rate = p.decay();
    let gamma = p.gamma();
    let decay = (-rate * t).exp();
    let absorbed = rate * decay * pulse.overlap_i(p, t).norm_sqr();
    let rho0 = model.rho0();
    let pe = rho0.ee().re;

    let re_j = if pe != 0.0 { pulse.overlap_j(p, t)?.re } else { 0.0 };
    let ee = absorbed + pe * decay * (1.0 - 4.0 * rate * re_j);

    let ge = if rho0.ge() != ZERO {
        let k = pulse.nested(-gamma, gamma, t)?;
        rho0.ge() * (-gamma.conj() * t).exp() * (real(1.0) - k * (2.0 * rate))
    } else {
        ZERO
    };
    Ok(Operator2::new(real(1.0 - ee), ge, ge.conj(), real(ee)))
}

/// Excitation probability `Γe^{−Γt}|I(t)|²` for a ground-state start.
pub fn excitation_prob(model: &AtomModel, t: f64) -> Result<f64> {
    let rho0 = model.rho0();
    if (rho0.gg().re - 1.0).abs() > Tolerances::DEFAULT.trace {
        return Err(Error::precondition("excitation probability requires a ground-state start"));
    }
    if !(t >= 0.0) {
        return Err(Error::invalid("time must be non-negative"));
    }
    let p = model.params();
    Ok(p.decay() * (-p.decay() * t).exp() * model.pulse().overlap_i(p, t).norm_sqr())
}

/// A priori state assembled from the no-count operator plus the integrals
/// of the one- and two-count conditional operators over detection times.
/// Mixed `ρ₀` is handled through its eigen-decomposition.
pub fn apriori_from_counting(model: &AtomModel, t: f64, quad_tol: f64) -> Result<Operator2> {
    if !(t >= 0.0) || !t.is_finite() {
        return Err(Error::invalid("time must be finite and non-negative"));
    }
    let mut total = Operator2::ZERO;
    for (w, psi) in model.pure_components() {
        let pure = model.with_pure_state(psi)?;
        total += counting_pure(&pure, t, quad_tol)?.scale_re(w);
    }
    Ok(total)
}

fn counting_pure(model: &AtomModel, t: f64, tol: f64) -> Result<Operator2> {
    let pulse = model.pulse();
    let breaks = breaks_within(pulse, t);
    let zero = cond_operator(&cond_zero(model, t)?, pulse);

    let one = quad::integrate_piecewise(
        |t1| match cond_one(model, t, t1) {
            Ok(pair) => cond_operator(&pair, pulse),
            Err(_) => Operator2::ZERO,
        },
        0.0,
        t,
        &breaks,
        tol,
    )?;

    let excited = model.psi0().map_or(0.0, |k| k.e.norm_sqr());
    let two = if excited == 0.0 {
        Operator2::ZERO
    } else {
        let mut failure = None;
        let v = quad::integrate_piecewise(
            |t2| {
                let inner_breaks = breaks_within(pulse, t2);
                quad::integrate_piecewise(
                    |t1| match cond_two(model, t, t1, t2) {
                        Ok(pair) => cond_operator(&pair, pulse),
                        Err(_) => Operator2::ZERO,
                    },
                    0.0,
                    t2,
                    &inner_breaks,
                    tol / t.max(1.0),
                )
                .unwrap_or_else(|e| {
                    failure = Some(Error::from(e));
                    Operator2::ZERO
                })
            },
            0.0,
            t,
            &breaks,
            tol,
        )?;
        if let Some(e) = failure {
            return Err(e);
        }
        v
    };
    Ok(zero + one + two)
}

/// Solution of the coupled master equations written with `e^{ℒt}`:
/// `ϱ⁰⁰ = e^{ℒt}ρ₀`, `ϱ⁰¹ = ∫₀ᵗ e^{ℒ(t−s)} ξ*_s [L, ϱ⁰⁰_s] ds` and
/// `ϱ = e^{ℒt}ρ₀ + ∫₀ᵗ e^{ℒ(t−s)} (ξ_s[ϱ⁰¹_s, L†] + ξ*_s[L, ϱ¹⁰_s]) ds`.
/// Evaluated by nested quadrature; intended for verification only.
pub fn exponential_form(model: &AtomModel, t: f64, tol: f64) -> Result<HierarchyState> {
    let lind = Lindbladian::new(model);
    let sup = lind.superoperator();
    let pulse = model.pulse();
    let rho0 = *model.rho0();
    let l = lind.l;
    let ld = l.dagger();
    let flow = |op: &Operator2, s: f64| -> Operator2 {
        match expm4(&sup.scale(real(s))) {
            Ok(u) => unvectorize(&u.apply(&vectorize(op))),
            Err(_) => Operator2::ZERO,
        }
    };
    let coherence = |s: f64, tol: f64| -> Result<Operator2> {
        let breaks = breaks_within(pulse, s);
        Ok(quad::integrate_piecewise(
            |u| flow(&l.commutator(&flow(&rho0, u)).scale(pulse.at(u).conj()), s - u),
            0.0,
            s,
            &breaks,
            tol,
        )?)
    };
    let varrho00 = flow(&rho0, t);
    let varrho01 = coherence(t, tol)?;
    let breaks = breaks_within(pulse, t);
    let mut failure = None;
    let source = quad::integrate_piecewise(
        |s| {
            let c01 = coherence(s, tol / t.max(1.0)).unwrap_or_else(|e| {
                failure = Some(e);
                Operator2::ZERO
            });
            let xi = pulse.at(s);
            let kick = c01.commutator(&ld).scale(xi) + l.commutator(&c01.dagger()).scale(xi.conj());
            flow(&kick, t - s)
        },
        0.0,
        t,
        &breaks,
        tol,
    )?;
    if let Some(e) = failure {
        return Err(e);
    }
    Ok(HierarchyState {
        varrho: varrho00 + source,
        varrho01,
        varrho10: varrho01.dagger(),
        varrho00,
        t,
    })
}
