use bo_nf::birkhoff::{default_step, jacobian_forward};
use bo_nf::finite_gap::{build_potential, FiniteGapParams};
use bo_nf::linearized::{expansion_coeffs, jacobian_inverse, remainder_decay, w_from_inverse, FiniteGapBase, WFamily};
use bo_nf::spectral::bilinear_pairing;
use bo_nf::C64;

fn one_gap_base(m_w: usize, k: usize) -> FiniteGapBase {
    let p = FiniteGapParams::one_gap(0.5, 0.3).unwrap();
    let q = build_potential(&p, k).unwrap();
    FiniteGapBase::new(&q, k, m_w, None).unwrap()
}

#[test]
fn closed_form_matches_jacobian_inverse() {
    let m = 40;
    let base = one_gap_base(m, 128);
    assert_eq!(base.s_plus, vec![1]);
    let jac = jacobian_forward(&base.q.resized(m), 128, m, m, default_step(&base.q), bo_nf::parallel::default_jobs()).unwrap();
    let inv = jacobian_inverse(&jac.matrix).unwrap();
    for n in 2..=8i64 {
        let a = base.w_analytic(n).unwrap();
        let b = w_from_inverse(&inv, n, m);
        let rel = a.sub(&b).unwrap().norm() / a.norm();
        assert!(rel < 1e-5, "n = {n}: rel {rel:.3e}");
    }
}

#[test]
fn leading_term_is_g_infinity() {
    let base = one_gap_base(48, 96);
    let t = expansion_coeffs(&base, 3).unwrap();
    assert!(t.w_plus[0].sub(&base.g_inf).unwrap().norm() < 1e-8);
}

#[test]
fn remainder_slopes() {
    let two = FiniteGapParams::new(vec![0.3, 0.25], vec![0.4, -1.1]).unwrap();
    for p in [FiniteGapParams::one_gap(0.5, 0.3).unwrap(), two] {
        let q = build_potential(&p, 128).unwrap();
        let base = FiniteGapBase::new(&q, 128, 48, None).unwrap();
        assert_eq!(base.n_s, p.n());
        let t = expansion_coeffs(&base, 3).unwrap();
        let ns: Vec<usize> = (16..=64).step_by(4).collect();
        for order in 0..=3 {
            let fit = remainder_decay(&base, &t, order, &ns).unwrap();
            let want = -(order as f64) - 1.0;
            assert!((fit.slope - want).abs() < 0.2, "N_S = {}, order {order}: slope {}", p.n(), fit.slope);
        }
    }
}

#[test]
fn transpose_is_adjoint_of_psi1() {
    let base = one_gap_base(32, 64);
    let fam = WFamily::new(base, 12, 24).unwrap();
    let mut z = bo_nf::birkhoff::BirkhoffVector::zeros(12);
    for n in 2..=12 {
        z.set(n, C64::new(0.01 / n as f64, -0.02 / (n * n) as f64));
    }
    let v = fam.psi1(&z);
    let qhat = bo_nf::spectral::FourierSeries::from_fn(32, |k| if k == 0 { C64::new(0.0, 0.0) } else { C64::new(0.3f64.powi(k.abs() as i32), 0.1 * k as f64 * 0.5f64.powi(k.abs() as i32)) }).symmetrized();
    let lhs = bilinear_pairing(&v, &qhat).unwrap();
    let t = fam.psi1_transpose(&qhat);
    let rhs: C64 = t.iter().map(|(&n, _)| z.get(n) * t[&-n]).sum();
    assert!((lhs - rhs).norm() < 1e-13, "{lhs} vs {rhs}");
}

#[test]
fn reversal_maps_w_n_to_its_conjugate() {
    let base = one_gap_base(32, 64);
    let rev = FiniteGapBase::new(&bo_nf::birkhoff::s_rev_potential(&base.q), 64, 32, None).unwrap();
    for n in [2i64, 3, 7] {
        let a = rev.w_analytic(n).unwrap();
        let b = base.w_analytic(n).unwrap().map_coeffs(|_, c| c.conj());
        let d = a.sub(&b).unwrap().max_abs();
        assert!(d < 1e-10, "n = {n}: {d:.3e}");
    }
}

#[test]
fn linear_map_is_tangent_to_birkhoff_coordinates() {
    use bo_nf::corrector::{chart_to_birkhoff, psi_l, random_perp, ChartPoint, CorrectorConfig};
    let cfg = CorrectorConfig::new(1, 10);
    let dir = random_perp(&cfg, 1.0, 1.0, 9);
    let err = |eps: f64| {
        let z = ChartPoint { p: vec![0.4, 0.3], y: dir.iter().map(|v| v * eps).collect() };
        let u = psi_l(&cfg, &z).unwrap();
        let got = bo_nf::birkhoff::birkhoff_forward(&u, 64, cfg.mz).unwrap();
        got.sub(&chart_to_birkhoff(&cfg, &z).unwrap()).norm_s(0.0)
    };
    let (a, b) = (err(0.02), err(0.01));
    assert!(a < 1e-3, "{a}");
    assert!((a / b).log2() > 1.8, "{a} {b}");
}

#[test]
fn transpose_vanishes_on_zero_and_leads_with_the_mode() {
    let base = one_gap_base(32, 64);
    let fam = WFamily::new(base, 12, 24).unwrap();
    let t = fam.psi1_transpose(&bo_nf::spectral::FourierSeries::zeros(32));
    assert!(t.values().all(|v| v.norm() == 0.0));
    let e = bo_nf::spectral::FourierSeries::mode(32, 11, C64::new(1.0, 0.0));
    let t = fam.psi1_transpose(&e);
    let w = fam.get(11).unwrap().coeff(11);
    assert!((t[&11] - w.conj()).norm() < 1e-14, "{} vs {w}", t[&11]);
    assert!(w.re < -0.5);
}
