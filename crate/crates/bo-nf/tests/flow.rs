use bo_nf::finite_gap::{build_potential, FiniteGapParams};
use bo_nf::flow::{evolve, phase_verify, step_halving_defect, EvolutionConfig};

fn two_gap() -> bo_nf::spectral::FourierSeries {
    let p = FiniteGapParams::new(vec![0.3, 0.25], vec![0.4, -1.1]).unwrap();
    build_potential(&p, 64).unwrap()
}

#[test]
fn two_gap_phases_rotate() {
    let u0 = two_gap();
    let mut cfg = EvolutionConfig::new(1.0 / 2000.0, 1.0, 64);
    cfg.save_every = 200;
    let t0 = std::time::Instant::now();
    let tr = evolve(&u0, &cfg).unwrap();
    let rep = phase_verify(&tr, 128, &[1, 2], 8).unwrap();
    let half = step_halving_defect(&u0, &cfg).unwrap();
    eprintln!("{:?} phase {:.3e} gap {:.3e} mod {:.3e} H {:.3e} M {:.3e} half {:.3e}", t0.elapsed(), rep.max_phase_defect, rep.max_gap_drift, rep.max_modulus_drift, rep.h_bo_drift, rep.h_mo_drift, half);
    assert!(rep.max_phase_defect <= 1e-5);
    assert!(rep.max_gap_drift <= 1e-6);
    assert!(rep.h_bo_drift <= 1e-7);
}

#[test]
fn zero_data_stays_zero() {
    let u0 = bo_nf::spectral::FourierSeries::zeros(16);
    let tr = evolve(&u0, &EvolutionConfig::new(0.01, 0.2, 16)).unwrap();
    assert_eq!(tr.last().max_abs(), 0.0);
}

#[test]
fn invariants_are_conserved() {
    let u0 = two_gap();
    let mut cfg = EvolutionConfig::new(1e-3, 0.5, 64);
    cfg.save_every = 100;
    let tr = evolve(&u0, &cfg).unwrap();
    assert_eq!(tr.frames.len(), 6);
    let rep = phase_verify(&tr, 128, &[1, 2], 10).unwrap();
    assert!(rep.h_bo_drift <= 1e-7 && rep.h_mo_drift <= 1e-7, "{} {}", rep.h_bo_drift, rep.h_mo_drift);
    assert!(rep.max_gap_drift <= 1e-6);
    assert!(tr.frames.iter().all(|(_, u)| u.is_mean_zero() && u.is_real()));
}

#[test]
fn backward_run_undoes_forward_run() {
    let u0 = two_gap();
    let fwd = evolve(&u0, &EvolutionConfig::new(1e-3, 0.3, 64)).unwrap();
    let back = evolve(fwd.last(), &EvolutionConfig::new(-1e-3, -0.3, 64)).unwrap();
    assert!(back.last().sub(&u0).unwrap().max_abs() < 1e-10);
}

#[test]
fn reversal_symmetry() {
    // S_rev u(t) = (S_rev u)(-t)
    let u0 = two_gap();
    let fwd = evolve(&u0, &EvolutionConfig::new(1e-3, 0.3, 64)).unwrap();
    let rev = evolve(&bo_nf::birkhoff::s_rev_potential(&u0), &EvolutionConfig::new(-1e-3, -0.3, 64)).unwrap();
    let d = bo_nf::birkhoff::s_rev_potential(fwd.last()).sub(rev.last()).unwrap().max_abs();
    assert!(d < 1e-10, "{d}");
}

#[test]
fn fourth_order_convergence() {
    // large amplitude so that the time error dominates round-off
    let p = FiniteGapParams::new(vec![0.6, 0.5], vec![0.4, -1.1]).unwrap();
    let u0 = build_potential(&p, 64).unwrap();
    let run = |dt: f64| evolve(&u0, &EvolutionConfig::new(dt, 0.2, 64)).unwrap().last().clone();
    let reference = run(1.0 / 1600.0);
    let e1 = run(0.02).sub(&reference).unwrap().max_abs();
    let e2 = run(0.01).sub(&reference).unwrap().max_abs();
    let order = (e1 / e2).log2();
    assert!(order > 3.5, "order {order} ({e1:.3e}, {e2:.3e})");
}

#[test]
fn trajectory_serializes() {
    let u0 = two_gap();
    let tr = evolve(&u0, &EvolutionConfig::new(0.05, 0.1, 64)).unwrap();
    let v: serde_json::Value = serde_json::from_str(&tr.to_json().unwrap()).unwrap();
    assert_eq!(v.as_array().unwrap().len(), 2);
    assert_eq!(v[1]["M"], 64);
}
