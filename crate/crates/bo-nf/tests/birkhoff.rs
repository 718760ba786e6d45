use bo_nf::birkhoff::*;
use bo_nf::finite_gap::{build_potential, FiniteGapParams};
use bo_nf::lax::LaxSpectrum;
use bo_nf::spectral::FourierSeries;
use bo_nf::C64;

fn potentials() -> Vec<FourierSeries> {
    vec![
        build_potential(&FiniteGapParams::one_gap(0.5, 0.3).unwrap(), 96).unwrap(),
        build_potential(&FiniteGapParams::new(vec![0.3, 0.25], vec![0.4, -1.1]).unwrap(), 96).unwrap(),
    ]
}

#[test]
fn zeta_moduli_are_the_gaps() {
    for q in potentials() {
        let spec = LaxSpectrum::compute(&q, 96).unwrap();
        let z = zetas(&spec, 20).unwrap();
        for (i, c) in z.iter().enumerate() {
            assert!((c.norm_sqr() - spec.gap(i + 1)).abs() < 1e-10);
        }
    }
}

#[test]
fn differential_at_zero_is_minus_fourier() {
    let v = FourierSeries::from_fn(8, |n| if n == 0 { C64::new(0.0, 0.0) } else { C64::new(1.0 / (n * n) as f64, 0.5 / n as f64) }).symmetrized();
    let eps = 1e-4;
    let zp = birkhoff_forward(&v.scale(C64::new(eps, 0.0)), 32, 8).unwrap();
    let zm = birkhoff_forward(&v.scale(C64::new(-eps, 0.0)), 32, 8).unwrap();
    for n in 1..=8i64 {
        let d = (zp.get(n) - zm.get(n)) / (2.0 * eps);
        assert!((d + v.coeff(n)).norm() < 1e-6, "n = {n}: {d} vs {}", v.coeff(n));
    }
}

#[test]
fn reversal_conjugates_coordinates() {
    for q in potentials() {
        let a = birkhoff_forward(&q, 96, 16).unwrap();
        let b = birkhoff_forward(&s_rev_potential(&q), 96, 16).unwrap();
        assert!(s_rev_birkhoff(&a).sub(&b).norm_s(0.0) < 1e-10);
    }
}

#[test]
fn hamiltonians_agree_across_charts() {
    for q in potentials() {
        let z = birkhoff_forward(&q, 96, 48).unwrap();
        let acts = actions(&z).unwrap();
        assert!((hamiltonian_physical(&q).unwrap() - hamiltonian_in_actions(&acts)).abs() < 1e-10);
        assert!((moment_physical(&q).unwrap() - moment_in_actions(&acts)).abs() < 1e-10);
    }
}

#[test]
fn frequencies_match_their_closed_form() {
    let acts = [0.2, 0.05];
    let f = frequencies(&acts, 10);
    assert_eq!(f.omega(1), 1.0 - 2.0 * 0.25);
    for n in 3..=10i64 {
        assert!((f.big_omega(n) - big_omega_asymptotic(&acts, n)).abs() < 1e-14);
        assert_eq!(f.omega(-n), -f.omega(n));
    }
}

#[test]
fn gardner_bracket_is_canonical_for_small_data() {
    let v = FourierSeries::from_fn(6, |n| if n == 0 { C64::new(0.0, 0.0) } else { C64::new(0.01 / (n * n) as f64, 0.0) }).symmetrized();
    let jac = jacobian_forward(&v, 32, 3, 6, 1e-6, 1).unwrap();
    for n in 1..=3i64 {
        // {z_n, z_{-n}} = -i n under the bracket convention used here
        let b = jac.poisson_bracket(n, -n);
        assert!((b - C64::new(0.0, -(n as f64))).norm() < 1e-6 * n as f64, "n = {n}: {b}");
        assert!(jac.poisson_bracket(n, n).norm() < 1e-6);
    }
}

#[test]
fn action_angle_state_round_trips() {
    let q = &potentials()[1];
    let z = birkhoff_forward(q, 96, 6).unwrap();
    let s = ActionAngleState::from_birkhoff(&z, &[1, 2]).unwrap();
    assert!(s.to_birkhoff().sub(&z).norm_s(0.0) < 1e-14);
    let r = s.s_rev().to_birkhoff();
    assert!(r.sub(&s_rev_birkhoff(&z)).norm_s(0.0) < 1e-14);
    assert!(angle_distance(wrap_angle(7.0), 7.0 - std::f64::consts::TAU) < 1e-15);
}

#[test]
fn birkhoff_vectors_serialize() {
    let z = birkhoff_forward(&potentials()[0], 96, 4).unwrap();
    let back = BirkhoffVector::from_json(&z.to_json().unwrap()).unwrap();
    assert_eq!(back, z);
}
