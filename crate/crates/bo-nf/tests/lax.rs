use bo_nf::finite_gap::{build_potential, one_gap_gamma, FiniteGapParams};
use bo_nf::lax::{trace_check, LaxSpectrum};
use bo_nf::spectral::FourierSeries;

#[test]
fn zero_potential_has_integer_spectrum() {
    let spec = LaxSpectrum::compute(&FourierSeries::zeros(64), 64).unwrap();
    for n in 0..=32 {
        assert!((spec.lambdas[n] - n as f64).abs() < 1e-12);
    }
    let (lo, hi) = spec.n_kappa_bounds();
    assert!((lo - 1.0).abs() < 1e-12 && (hi - 1.0).abs() < 1e-12);
}

#[test]
fn one_gap_spectrum_and_trace_formulas() {
    let p = FiniteGapParams::one_gap(0.5, 0.0).unwrap();
    let q = build_potential(&p, 96).unwrap();
    let spec = LaxSpectrum::compute(&q, 96).unwrap();
    assert!((spec.gap(1) - one_gap_gamma(0.5)).abs() < 1e-12);
    for n in 2..=48 {
        assert!(spec.gap(n).abs() < 1e-10, "γ_{n} = {}", spec.gap(n));
    }
    for n in 1..=48 {
        assert!((spec.lambdas[n] - n as f64).abs() < 1e-10);
    }
    let t = trace_check(&q, &spec);
    assert!(t.mean_residual.abs() < 1e-10 && t.l2_residual.abs() < 1e-10, "{t:?}");
    for n in 0..=10 {
        assert!(spec.residual(&q, n).unwrap() < 1e-12);
    }
}

#[test]
fn trusted_band_is_enforced() {
    let spec = LaxSpectrum::compute(&FourierSeries::zeros(16), 16).unwrap();
    assert_eq!(spec.band, 8);
    assert!(spec.kappa(9).is_err());
    assert!(bo_nf::birkhoff::zetas(&spec, 9).is_err());
}
