use fockfilter_core::apriori::{apriori_closed_form, Lindbladian};
use fockfilter_core::filter::*;
use fockfilter_core::povm::count_probs;
use fockfilter_core::trajectory::prob_no_count;
use fockfilter_core::{AtomModel, Error, Ket2, ModelParams, Operator2, PulseEnvelope, C64};

fn model(psi: Ket2, pulse: PulseEnvelope, detuning: f64) -> AtomModel {
    AtomModel::pure(ModelParams::new(1.0, detuning).unwrap(), pulse, psi).unwrap()
}

fn square() -> PulseEnvelope {
    PulseEnvelope::square(0.5).unwrap()
}

fn config(dt: f64, t_end: f64, n_traj: usize, grid: Vec<f64>) -> SdeConfig {
    SdeConfig {
        dt,
        t_end,
        n_traj,
        seed0: 20_240_611,
        output_grid: grid,
    }
}

/// Deterministic drift of the unconditional state, from its definition.
fn unconditional_drift(m: &AtomModel, s: &FilterState) -> Operator2 {
    let lind = Lindbladian::new(m);
    let l = lind.coupling();
    let xi = m.pulse().at_right(s.t);
    lind.apply(&s.rho) + s.rho01.commutator(&l.dagger()).scale(xi) + l.commutator(&s.rho10).scale(xi.conj())
}

/// Exact expectation of one step: click with probability `k·dt`.
fn one_step_mean(m: &AtomModel, s: &FilterState, dt: f64) -> Operator2 {
    let (jump, clicked) = filter_step(s, m, dt, 0.0).unwrap();
    let (stay, quiet) = filter_step(s, m, dt, 1.0 - 1e-16).unwrap();
    assert!(clicked && !quiet);
    let p = s.k * dt;
    jump.rho.scale_re(p) + stay.rho.scale_re(1.0 - p)
}

/// A mid-pulse state with nonzero coherences, reached by forced no-click steps.
fn warmed(m: &AtomModel) -> FilterState {
    let mut s = FilterState::initial(m);
    for _ in 0..700 {
        s = filter_step(&s, m, 1e-3, 1.0 - 1e-16).unwrap().0;
    }
    s
}

#[test]
fn initial_state_examples() {
    let m = model(Ket2::plus(), square(), 0.0);
    let s = FilterState::initial(&m);
    assert_eq!(s.rho, Ket2::plus().projector());
    assert_eq!(s.rho00, s.rho);
    assert_eq!(s.rho01, Operator2::ZERO);
    // k = ⟨L†L⟩ + |ξ|² = Γ/2 + Ω/2.
    assert!((s.k - 0.75).abs() < 1e-15);
    assert_eq!(s.adjoint_defect(), 0.0);
}

#[test]
fn one_step_mean_reproduces_the_unconditional_drift() {
    for psi in [Ket2::ground(), Ket2::excited(), Ket2::plus()] {
        let m = model(psi, PulseEnvelope::exponential(0.5).unwrap(), 0.3);
        let s = warmed(&m);
        let mut errors = vec![];
        let steps = [1e-2, 5e-3, 2.5e-3, 1.25e-3];
        for dt in steps {
            let mean = one_step_mean(&m, &s, dt);
            let predicted = s.rho + unconditional_drift(&m, &s).scale_re(dt);
            let err = mean.max_abs_diff(&predicted);
            assert!(err <= 10.0 * dt * dt);
            errors.push(err);
        }
        // For the excited start the second-order term vanishes and only
        // roundoff is left.
        if errors[3] > 1e-13 {
            let slope = ((errors[0] / errors[3]).ln()) / (steps[0] / steps[3]).ln();
            assert!((1.8..=2.2).contains(&slope), "slope {slope}");
        }
    }
}

#[test]
fn compensated_trace_drift_is_second_order() {
    for psi in [Ket2::ground(), Ket2::excited(), Ket2::plus()] {
        let m = model(psi, PulseEnvelope::exponential(0.5).unwrap(), 0.3);
        let kernel = FilterKernel::new(&m);
        let s = warmed(&m);
        let steps = [4e-3, 2e-3, 1e-3];
        let drift: Vec<f64> = steps
            .iter()
            .map(|&dt| {
                let lin = kernel.linear_no_jump_step(&m, &s, dt);
                (lin.rho.trace().re * (1.0 + s.k * dt) - 1.0).abs()
            })
            .collect();
        let slope = (drift[0] / drift[2]).ln() / (steps[0] / steps[2]).ln();
        assert!((1.8..=2.2).contains(&slope), "slope {slope}");
    }
}

#[test]
fn no_click_weight_is_the_zero_count_probability() {
    for psi in [Ket2::ground(), Ket2::excited(), Ket2::plus()] {
        let m = model(psi, square(), 0.2);
        let dt = 1e-4;
        let mut s = FilterState::initial(&m);
        let mut weight = 1.0;
        for i in 0..30_000 {
            s.t = i as f64 * dt;
            weight *= 1.0 - s.k * dt;
            s = filter_step(&s, &m, dt, 1.0 - 1e-16).unwrap().0;
        }
        let exact = prob_no_count(&m, 3.0).unwrap();
        assert!((weight - exact).abs() <= 1e-3 * exact.max(0.1), "{weight} vs {exact}");
    }
}

#[test]
fn unnormalized_no_click_step_is_linear() {
    let m = model(Ket2::plus(), square(), 0.4);
    let kernel = FilterKernel::new(&m);
    let a = warmed(&m);
    let b = FilterState::initial(&model(Ket2::excited(), square(), 0.4));
    let mix = |x: &FilterState, y: &FilterState, p: f64, q: f64| FilterState {
        rho: x.rho.scale_re(p) + y.rho.scale_re(q),
        rho01: x.rho01.scale_re(p) + y.rho01.scale_re(q),
        rho10: x.rho10.scale_re(p) + y.rho10.scale_re(q),
        rho00: x.rho00.scale_re(p) + y.rho00.scale_re(q),
        t: x.t,
        k: 0.0,
    };
    let mut b = b;
    b.t = a.t;
    let dt = 1e-3;
    let lhs = kernel.linear_no_jump_step(&m, &mix(&a, &b, 0.3, 1.7), dt);
    let rhs = mix(&kernel.linear_no_jump_step(&m, &a, dt), &kernel.linear_no_jump_step(&m, &b, dt), 0.3, 1.7);
    assert!(lhs.rho.max_abs_diff(&rhs.rho) < 1e-14);
    assert!(lhs.rho01.max_abs_diff(&rhs.rho01) < 1e-14);
    assert!(lhs.rho00.max_abs_diff(&rhs.rho00) < 1e-14);

    // Normalizing the linear step gives the filter's no-click branch.
    let lin = kernel.linear_no_jump_step(&m, &a, dt);
    let (stay, _) = filter_step(&a, &m, dt, 1.0 - 1e-16).unwrap();
    let scale = 1.0 / lin.rho.trace().re;
    assert!(lin.rho.scale_re(scale).max_abs_diff(&stay.rho) < 1e-14);
}

#[test]
fn no_click_branch_stays_positive_through_the_dark_point() {
    // Ground start on resonance: the no-click intensity touches zero where
    // dP_t(0)/dt = −(e^{−t/2} − 1/2)² vanishes, at t = 2 ln 2.
    for pulse in [square(), PulseEnvelope::exponential(0.5).unwrap()] {
        for psi in [Ket2::ground(), Ket2::plus()] {
            let m = model(psi, pulse.clone(), 0.0);
            for dt in [4e-3, 2e-3, 1e-3] {
                let mut s = FilterState::initial(&m);
                for _ in 0..(8.0 / dt) as usize {
                    s = filter_step(&s, &m, dt, 1.0 - 1e-16).unwrap().0;
                    assert!(s.k >= 0.0);
                    assert!(s.rho.hermitian_eigenvalues()[0] >= -1e-8);
                    assert!((s.rho.trace().re - 1.0).abs() <= 1e-12);
                }
            }
        }
    }
    let m = model(Ket2::ground(), square(), 0.0);
    let dt = 1e-3;
    let mut s = FilterState::initial(&m);
    let mut lowest = (f64::INFINITY, 0.0);
    for i in 0..3000 {
        s.t = i as f64 * dt;
        if s.k < lowest.0 {
            lowest = (s.k, s.t);
        }
        s = filter_step(&s, &m, dt, 1.0 - 1e-16).unwrap().0;
    }
    assert!(lowest.0 < 1e-6);
    assert!((lowest.1 - 2.0 * 2f64.ln()).abs() < 2e-3);
}

#[test]
fn trajectories_are_deterministic() {
    let m = model(Ket2::ground(), square(), 0.0);
    let cfg = config(1e-3, 6.0, 100, vec![0.0, 3.0, 6.0]);
    let mut differ = false;
    for traj in 0..20 {
        let a = run_trajectory(&m, &cfg, traj).unwrap();
        assert_eq!(a, run_trajectory(&m, &cfg, traj).unwrap());
        differ |= a.jump_times != run_trajectory(&m, &cfg, traj + 100).unwrap().jump_times;
        for s in &a.samples {
            assert!((s.state.rho.trace().re - 1.0).abs() < 1e-12);
            assert!(s.state.adjoint_defect() < 1e-12);
        }
    }
    assert!(differ);
}

#[test]
fn excited_start_survival_is_exponential() {
    let m = model(Ket2::excited(), PulseEnvelope::vacuum(), 0.0);
    let grid = vec![0.5, 1.0, 2.0, 3.0];
    let n = 4000;
    let pts = ensemble_average(&m, &config(2e-3, 3.0, n, grid)).unwrap();
    for p in pts {
        let survive = (-p.t).exp();
        let sigma = (survive * (1.0 - survive) / n as f64).sqrt();
        assert!((p.count_frequencies[0] - survive).abs() <= 4.0 * sigma + 2e-3, "t = {}", p.t);
        assert!((p.mean.ee().re - survive).abs() <= 4.0 * sigma + 2e-3);
    }
}

#[test]
fn ensemble_matches_a_priori_statistics() {
    let m = model(Ket2::ground(), square(), 0.3);
    let grid = vec![1.0, 2.5, 4.0, 6.0];
    let n = 3000;
    let pts = ensemble_average(&m, &config(2e-3, 6.0, n, grid)).unwrap();
    for p in pts {
        let exact = apriori_closed_form(&m, p.t).unwrap();
        let stats = count_probs(&m, p.t).unwrap();
        let tol = |se: f64| 5.0 * se + 5e-3;
        assert!((p.mean.ee().re - exact.ee().re).abs() <= tol(p.std_err[1]), "ee at {}", p.t);
        assert!((p.mean.ge().re - exact.ge().re).abs() <= tol(p.std_err[2]));
        assert!((p.mean.ge().im - exact.ge().im).abs() <= tol(p.std_err[3]));
        assert!((p.mean_counts - stats.mean).abs() <= tol(p.mean_counts_se));
        // The compensator has the same mean as the count.
        assert!((p.mean_intensity - stats.mean).abs() <= tol(p.mean_intensity_se));
        assert_eq!(p.count_frequencies[2] + p.count_frequencies[3], 0.0);
    }
}

#[test]
fn first_click_times_follow_the_zero_count_law() {
    let m = model(Ket2::ground(), square(), 0.0);
    let cfg = config(1e-3, 8.0, 2000, vec![]);
    let mut firsts = vec![];
    let mut never = 0usize;
    for traj in 0..cfg.n_traj as u64 {
        let r = run_trajectory(&m, &cfg, traj).unwrap();
        assert_eq!(r.excess_jumps, 0);
        match r.jump_times.first() {
            Some(t) => firsts.push(*t),
            None => never += 1,
        }
    }
    firsts.sort_by(f64::total_cmp);
    let n = cfg.n_traj as f64;
    // Kolmogorov–Smirnov distance against 1 − P_t(0), censored at t_end.
    let mut d: f64 = 0.0;
    for (i, t) in firsts.iter().enumerate() {
        let cdf = 1.0 - prob_no_count(&m, *t).unwrap();
        d = d.max((cdf - i as f64 / n).abs()).max(((i + 1) as f64 / n - cdf).abs());
    }
    let tail = prob_no_count(&m, 8.0).unwrap();
    d = d.max((never as f64 / n - tail).abs());
    assert!(d < 1.63 / n.sqrt(), "KS distance {d}");
}

#[test]
fn config_checks() {
    let m = model(Ket2::ground(), square(), 0.0);
    assert!(matches!(ensemble_average(&m, &config(1e-3, 1.0, 99, vec![])), Err(Error::Precondition(_))));
    assert!(config(0.0, 1.0, 100, vec![]).validate().is_err());
    assert!(config(1e-3, 1.0, 100, vec![0.5, 0.2]).validate().is_err());
    assert!(config(1e-3, 1.0, 100, vec![2.0]).validate().is_err());
    assert_eq!(config(1e-3, 1.0, 100, vec![]).n_steps(), 1000);

    let bound = 2.25;
    let cfg = config(1e-3, 6.0, 100, vec![]);
    assert!((cfg.max_jump_probability(&m) - bound * 1e-3).abs() < 1e-12);
    assert!(!cfg.jump_probability_too_large(&m));
    assert!(config(0.05, 6.0, 100, vec![]).jump_probability_too_large(&m));
}

#[test]
fn clipping_only_absorbs_roundoff() {
    let m = model(Ket2::ground(), square(), 0.0);
    let kernel = FilterKernel::new(&m);
    let mut s = FilterState::initial(&m);
    s.rho = Operator2::diag(1.0 + 1e-13, -1e-13);
    s.rho00 = Operator2::ZERO;
    assert_eq!(kernel.intensity(&s, C64::new(0.0, 0.0)).unwrap(), 0.0);
    s.rho = Operator2::diag(1.0 + 1e-6, -1e-6);
    assert!(kernel.intensity(&s, C64::new(0.0, 0.0)).is_err());
}
