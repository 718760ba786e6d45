use bo_nf::finite_gap::{build_potential, FiniteGapParams};
use bo_nf::lax::LaxSpectrum;
use bo_nf::spectral::{grid_transform, FourierSeries};
use bo_nf::C64;
use proptest::prelude::*;

fn series(m: usize) -> impl Strategy<Value = FourierSeries> {
    prop::collection::vec((-1.0f64..1.0, -1.0f64..1.0), m).prop_map(move |c| {
        FourierSeries::from_fn(m, |n| match n {
            0 => C64::new(0.0, 0.0),
            n if n > 0 => C64::new(c[n as usize - 1].0, c[n as usize - 1].1) / (n * n) as f64,
            n => C64::new(c[(-n) as usize - 1].0, -c[(-n) as usize - 1].1) / (n * n) as f64,
        })
    })
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(32))]

    #[test]
    fn grid_round_trip_and_parseval(u in series(12)) {
        let g = u.to_grid(32).unwrap();
        let back = grid_transform(&g, 12).unwrap();
        prop_assert!(back.sub(&u).unwrap().max_abs() < 1e-14);
        let mean_sq = g.iter().map(|v| v.norm_sqr()).sum::<f64>() / 32.0;
        prop_assert!((mean_sq - u.norm().powi(2)).abs() < 1e-13);
    }

    #[test]
    fn products_of_real_series_are_real(a in series(8), b in series(8)) {
        let p = a.product(&b, 16);
        prop_assert!(p.is_real());
        prop_assert!(p.reality_defect() < 1e-15);
        let q = b.product(&a, 16);
        prop_assert!(p.sub(&q).unwrap().max_abs() < 1e-15);
    }

    #[test]
    fn gaps_are_non_negative(u in series(10)) {
        let spec = LaxSpectrum::compute(&u, 48).unwrap();
        prop_assert!(spec.gaps.iter().all(|g| *g >= -1e-10));
    }

    #[test]
    fn finite_gap_potentials_open_their_gaps(r1 in 0.05f64..0.4, r2 in 0.05f64..0.4, a1 in -3.0f64..3.0, a2 in -3.0f64..3.0) {
        prop_assume!((r1 - r2).abs() > 0.02 || (a1 - a2).abs() > 0.2);
        let p = FiniteGapParams::new(vec![r1, r2], vec![a1, a2]).unwrap();
        let q = build_potential(&p, 64).unwrap();
        prop_assert!(q.is_real() && q.is_mean_zero());
        let spec = LaxSpectrum::compute(&q, 64).unwrap();
        prop_assert!(spec.gaps[2..20].iter().all(|g| g.abs() < 1e-10));
        prop_assert_eq!(FiniteGapParams::from_vec(&p.to_vec()).unwrap(), p);
    }

    #[test]
    fn reversal_conjugates_zetas(u in series(8)) {
        let spec = LaxSpectrum::compute(&u, 32).unwrap();
        let rev = LaxSpectrum::compute(&bo_nf::birkhoff::s_rev_potential(&u), 32).unwrap();
        let a = bo_nf::birkhoff::zetas(&spec, 6).unwrap();
        let b = bo_nf::birkhoff::zetas(&rev, 6).unwrap();
        for (x, y) in a.iter().zip(&b) {
            prop_assert!((x.conj() - y).norm() < 1e-9);
        }
    }
}
