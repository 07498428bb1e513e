use fockfilter_core::collision::collision_hamiltonian;
use fockfilter_core::linalg::{expm4, trace_distance, trace_distance_with};
use fockfilter_core::{Ket2, ModelParams, Operator2, Operator4, Tolerances, C64};
use proptest::prelude::*;

fn c(re: f64, im: f64) -> C64 {
    C64::new(re, im)
}

/// Plain Taylor series to a fixed order, no scaling.
fn taylor(a: &Operator4, order: usize) -> Operator4 {
    let mut term = Operator4::identity();
    let mut sum = term;
    for k in 1..=order {
        term = (term * *a).scale(c(1.0 / k as f64, 0.0));
        sum = sum + term;
    }
    sum
}

#[test]
fn expm_of_collision_hamiltonian_matches_taylor_series() {
    let tau = 0.01;
    let h = collision_hamiltonian(&ModelParams::new(1.0, 0.0).unwrap(), tau);
    let a = h.scale(c(0.0, -tau));
    let v = expm4(&a).unwrap();
    assert!(v.unitarity_defect() <= 1e-10);
    // ‖A‖ ≈ 0.1, so the order-8 remainder is ~1e-13.
    assert!(v.max_abs_diff(&taylor(&a, 8)) < 1e-12);
}

#[test]
fn expm_of_diagonal() {
    let mut a = Operator4::ZERO;
    let thetas = [0.3, -1.2, 2.5, 4.0];
    for (i, th) in thetas.iter().enumerate() {
        a.0[i][i] = c(0.0, *th);
    }
    let v = expm4(&a).unwrap();
    for (i, th) in thetas.iter().enumerate() {
        assert!((v.0[i][i] - c(0.0, *th).exp()).norm() < 1e-14);
    }
    assert!(expm4(&Operator4::ZERO).unwrap().max_abs_diff(&Operator4::identity()) == 0.0);
}

#[test]
fn trace_distance_examples() {
    let g = Ket2::ground().projector();
    let e = Ket2::excited().projector();
    assert_eq!(trace_distance(&g, &g).unwrap(), 0.0);
    assert!((trace_distance(&g, &e).unwrap() - 1.0).abs() < 1e-15);
    let mixed = Operator2::IDENTITY.scale_re(0.5);
    assert!((trace_distance(&g, &mixed).unwrap() - 0.5).abs() < 1e-15);
    let skew = Operator2::sigma_minus();
    assert!(trace_distance(&skew, &g).is_err());
    assert!(trace_distance_with(&g, &e, &Tolerances::DEFAULT).is_ok());
}

#[test]
fn basic_operator_algebra() {
    let e = Ket2::excited();
    assert_eq!(Operator2::outer(&e, &e), Operator2::diag(0.0, 1.0));
    assert_eq!(Operator2::outer(&e, &e).trace(), c(1.0, 0.0));
    assert_eq!(Operator2::sigma_minus().dagger(), Operator2::sigma_plus());
    assert_eq!(Operator2::sigma_plus().apply(&Ket2::ground()), e);
}

fn hermitian() -> impl Strategy<Value = Operator2> {
    (-1.0..1.0f64, -1.0..1.0f64, -1.0..1.0f64, -1.0..1.0f64).prop_map(|(a, d, re, im)| {
        Operator2::new(c(a, 0.0), c(re, im), c(re, -im), c(d, 0.0))
    })
}

fn bounded4() -> impl Strategy<Value = Operator4> {
    proptest::collection::vec((-1.0..1.0f64, -1.0..1.0f64), 16).prop_map(|v| {
        let mut m = Operator4::ZERO;
        for (i, (re, im)) in v.into_iter().enumerate() {
            m.0[i / 4][i % 4] = c(re, im);
        }
        // Infinity norm ≤ 5.
        let n = m.norm_inf();
        if n > 5.0 {
            m.scale(c(5.0 / n, 0.0))
        } else {
            m
        }
    })
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(1000))]

    #[test]
    fn trace_distance_triangle(a in hermitian(), b in hermitian(), d in hermitian()) {
        let ab = trace_distance(&a, &b).unwrap();
        let bd = trace_distance(&b, &d).unwrap();
        let ad = trace_distance(&a, &d).unwrap();
        prop_assert!(ad <= ab + bd + 1e-12);
    }

    #[test]
    fn exponential_inverse(a in bounded4()) {
        let p = expm4(&a).unwrap() * expm4(&a.scale(c(-1.0, 0.0))).unwrap();
        prop_assert!(p.max_abs_diff(&Operator4::identity()) <= 1e-10);
    }

    #[test]
    fn eigen_decomposition_reconstructs(a in hermitian()) {
        let mut back = Operator2::ZERO;
        for (lambda, v) in a.hermitian_eigen() {
            back += v.projector().scale_re(lambda);
        }
        prop_assert!(back.max_abs_diff(&a) < 1e-12);
    }
}
