use bo_nf::birkhoff::{birkhoff_forward, ActionAngleState};
use bo_nf::finite_gap::{build_potential, invert_psi_s, one_gap_gamma, seed_params, FiniteGapParams, InverterConfig};
use bo_nf::lax::LaxSpectrum;
use std::f64::consts::PI;

#[test]
fn one_gap_opens_a_single_gap() {
    let p = FiniteGapParams::one_gap(0.5, 0.7).unwrap();
    let q = build_potential(&p, 64).unwrap();
    let s = LaxSpectrum::compute(&q, 64).unwrap();
    assert!((s.gap(1) - one_gap_gamma(0.5)).abs() < 1e-12);
    for n in 2..=s.band {
        assert!(s.gap(n).abs() < 1e-10, "gap {n} = {}", s.gap(n));
    }
    let z = birkhoff_forward(&q, 64, 4).unwrap();
    let th = z.get(1).arg();
    assert!(bo_nf::birkhoff::angle_distance(th, 0.7 + PI) < 1e-10);
}

#[test]
fn two_gap_inversion_round_trip() {
    let truth = FiniteGapParams::new(vec![0.3, 0.25], vec![0.4, -1.1]).unwrap();
    let q = build_potential(&truth, 64).unwrap();
    let s = LaxSpectrum::compute(&q, 64).unwrap();
    assert!(s.gap(1) > 1e-3 && s.gap(2) > 1e-3);
    assert!(s.gap(3).abs() < 1e-10);
    let z = birkhoff_forward(&q, 64, 4).unwrap();
    let target = ActionAngleState::from_birkhoff(&z, &[1, 2]).unwrap();
    let seed = seed_params(&target).unwrap();
    let inv = invert_psi_s(&target, Some(&seed), &InverterConfig::default()).unwrap();
    let q2 = build_potential(&inv.params, 64).unwrap();
    assert!(q2.sub(&q).unwrap().norm() < 1e-7, "residual {}", q2.sub(&q).unwrap().norm());
}

#[test]
fn one_gap_inversion_is_immediate() {
    let p = FiniteGapParams::one_gap(0.4, 2.0).unwrap();
    let q = build_potential(&p, 64).unwrap();
    let z = birkhoff_forward(&q, 64, 2).unwrap();
    let target = ActionAngleState::from_birkhoff(&z, &[1]).unwrap();
    let inv = invert_psi_s(&target, None, &InverterConfig::default()).unwrap();
    assert!(inv.iterations <= 2);
    assert!((inv.params.r[0] - 0.4).abs() < 1e-9);
    assert!(bo_nf::birkhoff::angle_distance(inv.params.alpha[0], 2.0) < 1e-9);
}
