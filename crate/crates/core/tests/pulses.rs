use fockfilter_core::pulse::Normalization;
use fockfilter_core::quad::{composite_gauss, gauss_legendre, integrate_piecewise};
use fockfilter_core::{ModelParams, PulseEnvelope, C64};

fn params(decay: f64, detuning: f64) -> ModelParams {
    ModelParams::new(decay, detuning).unwrap()
}

/// `∫₀ᵗ ξ_s e^{bs} ds` by adaptive quadrature on the definition.
fn overlap_oracle(p: &PulseEnvelope, b: C64, t: f64) -> C64 {
    integrate_piecewise(|s| p.eval(s).unwrap() * (b * s).exp(), 0.0, t, p.breakpoints(), 1e-13).unwrap()
}

/// Nested Gauss–Legendre evaluation of
/// `∫₀ᵗ dt₁ ξ*_{t₁} e^{a t₁} ∫₀^{t₁} ξ_s e^{bs} ds`.
fn nested_oracle(p: &PulseEnvelope, a: C64, b: C64, t: f64) -> C64 {
    let rule = gauss_legendre(20);
    composite_gauss(
        |t1| {
            let inner: C64 = composite_gauss(|s| p.eval(s).unwrap() * (b * s).exp(), 0.0, t1, &rule, 8);
            p.eval(t1).unwrap().conj() * (a * t1).exp() * inner
        },
        0.0,
        t,
        &rule,
        40,
    )
}

#[test]
fn eval_examples() {
    let sq = PulseEnvelope::square(0.5).unwrap();
    assert!((sq.eval(1.0).unwrap().re - 0.5).abs() < 1e-15);
    assert_eq!(sq.eval(5.0).unwrap(), C64::new(0.0, 0.0));
    assert!(sq.eval(-1.0).is_err());
    let ex = PulseEnvelope::exponential(1.0).unwrap();
    assert_eq!(ex.eval(0.0).unwrap(), C64::new(1.0, 0.0));
}

#[test]
fn tail_examples() {
    for p in [PulseEnvelope::square(0.5).unwrap(), PulseEnvelope::exponential(1.3).unwrap()] {
        assert_eq!(p.tail(0.0).unwrap(), 1.0);
    }
    let ex = PulseEnvelope::exponential(1.0).unwrap();
    assert!((ex.tail(2f64.ln()).unwrap() - 0.5).abs() < 1e-15);
    assert_eq!(PulseEnvelope::square(0.5).unwrap().tail(4.0).unwrap(), 0.0);
}

#[test]
fn exponential_support_end_bounds_tail() {
    let ex = PulseEnvelope::exponential(0.5).unwrap();
    assert!(ex.tail(ex.support_end()).unwrap() <= 1e-12);
}

#[test]
fn closed_forms_match_quadrature_on_grid() {
    let m = params(1.0, 0.25);
    for p in [PulseEnvelope::square(0.5).unwrap(), PulseEnvelope::exponential(0.5).unwrap()] {
        // The exponential support is long; its overlap oracle is checked where
        // e^{γt} stays moderate.
        let end = p.support_end().min(40.0);
        for i in 0..100 {
            let t = end * i as f64 / 99.0;
            let tail: f64 = integrate_piecewise(
                |s| p.eval(s).unwrap().norm_sqr(),
                t,
                p.support_end(),
                p.breakpoints(),
                1e-13,
            )
            .unwrap();
            assert!((p.tail(t).unwrap() - tail).abs() <= 1e-8, "tail at {t}");
            let oracle = overlap_oracle(&p, m.gamma(), t);
            let closed = p.overlap_i(&m, t);
            let scale = oracle.norm().max(1.0);
            assert!((closed - oracle).norm() <= 1e-8 * scale, "I at {t}");
        }
    }
}

#[test]
fn overlap_i_examples() {
    let m = params(1.0, 0.0);
    let sq = PulseEnvelope::square(0.5).unwrap();
    assert_eq!(sq.overlap_i(&m, 0.0), C64::new(0.0, 0.0));
    let v = sq.overlap_i(&m, 2.0);
    let oracle = overlap_oracle(&sq, m.gamma(), 2.0);
    assert!((v - oracle).norm() < 1e-12);
    assert!((v.re - (1f64.exp() - 1.0)).abs() < 1e-12);

    // Resonant case: γ − Ω/2 = 0, so I(t) = √Ω t.
    let ex = PulseEnvelope::exponential(1.0).unwrap();
    assert!((ex.overlap_i(&m, 1.0) - C64::new(1.0, 0.0)).norm() < 1e-14);
    for omega in [1.0 - 1e-8, 1.0 + 1e-8] {
        let near = PulseEnvelope::exponential(omega).unwrap();
        let q = overlap_oracle(&near, m.gamma(), 1.0);
        assert!((near.overlap_i(&m, 1.0) - q).norm() < 1e-10);
    }
}

#[test]
fn overlap_i_continuous_across_resonance() {
    // Ω = Γ, so γ − Ω/2 = −2iΔ₀; sweep |γ − Ω/2| through 1e−6 (1 ± 0.5).
    let ex = PulseEnvelope::exponential(1.0).unwrap();
    let t = 3.0;
    let value = |z: f64| ex.overlap_i(&params(1.0, 0.5 * z), t);
    for z in [0.5e-6, 1.0e-6, 1.5e-6] {
        let m = params(1.0, 0.5 * z);
        let oracle = overlap_oracle(&ex, m.gamma(), t);
        assert!((value(z) - oracle).norm() <= 1e-12);
    }
    // No jump around |γ − Ω/2| = 1e−6.
    let below = value(1e-6 * (1.0 - 1e-9));
    let above = value(1e-6 * (1.0 + 1e-9));
    assert!((below - above).norm() <= 1e-9);
    // Between the two outer points the change is the first-order one, t²/2 per unit z.
    let step = (value(1.5e-6) - value(0.5e-6)).norm();
    assert!((step - 0.5 * t * t * 1e-6).abs() <= 1e-9);
}

#[test]
fn overlap_j_matches_nested_gauss_legendre() {
    let cases = [
        (PulseEnvelope::square(0.5).unwrap(), params(1.0, 0.0), 2.0),
        (PulseEnvelope::exponential(0.5).unwrap(), params(1.0, 0.3), 3.0),
    ];
    for (p, m, t) in cases {
        let g = m.gamma().conj();
        let oracle = nested_oracle(&p, g, -g, t);
        let j = p.overlap_j(&m, t).unwrap();
        assert!((j - oracle).norm() <= 1e-8, "{j} vs {oracle}");
        assert_eq!(p.overlap_j(&m, 0.0).unwrap(), C64::new(0.0, 0.0));
    }
}

#[test]
fn tabulated_pulse_agrees_with_its_own_quadrature() {
    // A smooth Gaussian-like envelope on a fine grid, renormalized.
    let times: Vec<f64> = (0..=400).map(|i| i as f64 * 0.05).collect();
    let values: Vec<C64> = times
        .iter()
        .map(|t| C64::new((-(t - 6.0) * (t - 6.0) / 4.0).exp(), 0.1 * (t - 6.0) / 6.0))
        .collect();
    let p = PulseEnvelope::tabulated(times, values, Normalization::Renormalize).unwrap();
    assert!((p.tail(0.0).unwrap() - 1.0).abs() < 1e-12);
    let m = params(1.0, 0.4);
    for t in [0.0, 0.37, 5.0, 6.02, 12.5, 20.0, 25.0] {
        let weight: f64 = integrate_piecewise(|s| p.eval(s).unwrap().norm_sqr(), 0.0, t, p.breakpoints(), 1e-14).unwrap();
        assert!((p.weight_before(t) - weight).abs() < 1e-11);
        assert!((p.overlap_i(&m, t) - overlap_oracle(&p, m.gamma(), t)).norm() < 1e-9);
        let g = m.gamma().conj();
        let nested = p.nested(g, -g, t).unwrap();
        let oracle: C64 = integrate_piecewise(
            |t1| p.eval(t1).unwrap().conj() * (g * t1).exp() * overlap_oracle(&p, -g, t1),
            0.0,
            t,
            p.breakpoints(),
            1e-12,
        )
        .unwrap();
        assert!((nested - oracle).norm() < 1e-9, "J at {t}");
    }
    assert_eq!(p.eval(30.0).unwrap(), C64::new(0.0, 0.0));
}

#[test]
fn quadrature_examples() {
    use fockfilter_core::quad::integrate;
    let one: f64 = integrate(|_| 1.0, 0.0, 1.0, 1e-12).unwrap();
    assert!((one - 1.0).abs() < 1e-12);
    let omega = 0.8;
    let end = PulseEnvelope::exponential(omega).unwrap().support_end();
    let norm: f64 = integrate(|t| omega * (-omega * t).exp(), 0.0, end, 1e-10).unwrap();
    assert!((norm - 1.0).abs() < 1e-10);
    let z: C64 = integrate(|t| C64::new(0.0, t).exp(), 0.0, 2.0 * std::f64::consts::PI, 1e-12).unwrap();
    assert!(z.norm() < 1e-12);
}
