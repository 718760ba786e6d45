use bo_nf::finite_gap::{build_potential, FiniteGapParams};
use bo_nf::pdo::{bony_remainder, hankel_sweep, mode_separation_slope, paraproduct, pdo_compose, project_mean_zero, remainder_1_0, CutoffProfile};
use bo_nf::spectral::{FourierSeries, Side, SobolevIndex};
use bo_nf::C64;

fn smooth(m: usize, r: f64) -> FourierSeries {
    FourierSeries::from_fn(m, |k| if k == 0 { C64::new(0.2, 0.0) } else { C64::from_polar(r.powi(k.abs() as i32), 0.7 * k as f64) })
}

fn binom(n: u32, k: u32) -> f64 {
    (0..k).fold(1.0, |acc, i| acc * (n - i) as f64 / (i + 1) as f64)
}

#[test]
fn paraproduct_trivial_cases() {
    let cut = CutoffProfile::default();
    let u = smooth(12, 0.5);
    let one = FourierSeries::mode(12, 0, C64::new(1.0, 0.0));
    assert!(paraproduct(&one, &u, &cut, 12).sub(&u).unwrap().norm() < 1e-15);
    let t = paraproduct(&u, &one, &cut, 12);
    assert!(t.sub(&FourierSeries::mode(12, 0, u.coeff(0))).unwrap().norm() < 1e-15);
}

#[test]
fn bony_identity_is_exact() {
    let cut = CutoffProfile::default();
    let a = smooth(20, 0.6);
    let b = smooth(24, 0.7).conj();
    let m = 44;
    let lhs = a.product(&b, m);
    let rhs = paraproduct(&a, &b, &cut, m).add(&paraproduct(&b, &a, &cut, m)).unwrap().add(&bony_remainder(&a, &b, &cut, m)).unwrap();
    assert!(lhs.sub(&rhs).unwrap().norm() < 1e-12);
}

#[test]
fn bony_high_high_zero_mode() {
    let cut = CutoffProfile::default();
    let k = 20;
    let a = FourierSeries::mode(k as usize, k, C64::new(1.0, 0.0));
    let b = FourierSeries::mode(k as usize, -k, C64::new(1.0, 0.0));
    let r = bony_remainder(&a, &b, &cut, 4);
    let want = 1.0 - cut.chi(k, -k) - cut.chi(-k, k);
    assert!((r.coeff(0).re - want).abs() < 1e-15);
    assert!((r.coeff(0).re - 1.0).abs() < 1e-15);
}

#[test]
fn one_zero_remainder_formula_is_exact() {
    let a = FourierSeries::from_fn(1, |k| if k == 0 { C64::new(0.0, 0.0) } else { C64::new(0.5, 0.0) });
    let m = 16;
    for n in 1..=5 {
        let e = pdo_compose(1, 0, n).unwrap();
        for h in [FourierSeries::mode(6, 5, C64::new(1.0, 0.0)), smooth(6, 0.4)] {
            let lhs = e.apply_exact(&a, &h, m);
            let rhs = e.apply_terms(&a, &h, m).add(&remainder_1_0(&a, &h, n, m).unwrap()).unwrap();
            assert!(lhs.sub(&project_mean_zero(&rhs)).unwrap().norm() < 1e-12, "N = {n}");
        }
    }
}

#[test]
fn constant_symbol_commutes() {
    let a = FourierSeries::mode(0, 0, C64::new(2.5, 0.0));
    let h = smooth(10, 0.5);
    for (k, l) in [(1, 0), (1, 1), (2, 0), (2, 1)] {
        let e = pdo_compose(k, l, k + l + 3).unwrap();
        assert!(e.remainder(&a, &h, 12).norm() < 1e-13);
    }
}

#[test]
fn general_constants_match_symbol_calculus() {
    for (k, l) in [(1, 1), (2, 0), (2, 1), (3, 2)] {
        let e = pdo_compose(k, l, k + l + 4).unwrap();
        assert_eq!(e.consts[0], 1.0);
        for (j, c) in e.consts.iter().enumerate() {
            let sign = if j % 2 == 0 { 1.0 } else { -1.0 };
            assert_eq!(*c, sign * binom(k + j as u32 - 1, j as u32), "(k, l, j) = ({k}, {l}, {j})");
        }
    }
}

#[test]
fn general_remainder_decays() {
    let a = smooth(4, 0.5);
    let ns: Vec<i64> = (40..=120).step_by(10).collect();
    for (k, l) in [(1, 0), (1, 1), (2, 0), (2, 1)] {
        for n in (k + l).max(1)..=k + l + 2 {
            let e = pdo_compose(k, l, n).unwrap();
            let (slope, _) = mode_separation_slope(&e, &a, &ns, 130).unwrap();
            assert!(slope <= -(n as f64 + 1.0) + 0.2, "(k, l, N) = ({k}, {l}, {n}): slope {slope}");
        }
    }
}

#[test]
fn hankel_smoothing_is_uniform() {
    let p = FiniteGapParams::new(vec![0.5, 0.3], vec![0.2, 1.0]).unwrap();
    let u = build_potential(&p, 96).unwrap();
    let ps: Vec<usize> = (1..=40).collect();
    for side in [Side::Plus, Side::Minus] {
        for n in 0..=4 {
            let rows = hankel_sweep(&u, side, SobolevIndex::new(1.0 + n as f64).unwrap(), &ps).unwrap();
            let first = rows[..20].iter().map(|r| r.measured_norm).fold(0.0, f64::max);
            let second = rows[20..].iter().map(|r| r.measured_norm).fold(0.0, f64::max);
            assert!(first.is_finite() && second <= first, "N = {n}");
        }
    }
}
