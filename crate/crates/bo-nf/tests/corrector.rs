use bo_nf::birkhoff::s_rev_potential;
use bo_nf::corrector::*;
use bo_nf::Error;
use nalgebra::DVector;

fn setup(mz: usize) -> (CorrectorConfig, ChartPoint) {
    let cfg = CorrectorConfig::new(1, mz);
    let y = random_perp(&cfg, 0.05, 1.0, 5);
    (cfg, ChartPoint { p: vec![0.4, 0.3], y })
}

fn max_diff(a: &ChartPoint, b: &ChartPoint) -> f64 {
    a.p.iter().zip(&b.p).chain(a.y.iter().zip(&b.y)).map(|(u, v)| (u - v).abs()).fold(0.0, f64::max)
}

#[test]
fn operator_vanishes_on_the_finite_gap_manifold() {
    let (cfg, z) = setup(10);
    let z0 = ChartPoint { p: z.p.clone(), y: vec![0.0; z.y.len()] };
    let op = assemble_correction(&cfg, &z0).unwrap();
    assert_eq!(op.full().amax(), 0.0);
    assert_eq!(psi_c(&cfg, &z0).unwrap(), z0);
}

#[test]
fn operator_is_skew_and_field_solves_its_equation() {
    let (cfg, z) = setup(10);
    for tau in [0.0, 0.5, 1.0] {
        let v = vector_field(&cfg, tau, &z).unwrap();
        assert!(v.op.skew_residual() <= 1e-8, "skew {}", v.op.skew_residual());
        assert!(v.residual <= 1e-10, "τ = {tau}: residual {}", v.residual);
    }
}

#[test]
fn field_at_time_zero_is_minus_j_energy() {
    let (cfg, z) = setup(10);
    let v = vector_field(&cfg, 0.0, &z).unwrap();
    assert_eq!(v.x_perp.amax(), 0.0);
    let e = v.op.energy_one_form();
    // J on the single S mode n = 1 maps (a, b) to (-b, a)
    let want = -DVector::from_vec(vec![-e[1], e[0]]);
    assert!((&v.x_s - want).amax() < 1e-18);
}

#[test]
fn energy_one_form_is_quadratic() {
    let (cfg, z) = setup(10);
    let scaled = |s: f64| ChartPoint { p: z.p.clone(), y: z.y.iter().map(|v| v * s).collect() };
    let a = assemble_correction(&cfg, &scaled(1.0)).unwrap().energy_one_form().norm();
    let b = assemble_correction(&cfg, &scaled(0.5)).unwrap().energy_one_form().norm();
    assert!((a / b - 4.0).abs() < 1e-3, "ratio {}", a / b);
}

#[test]
fn inverse_flow_round_trips() {
    let (cfg, z) = setup(12);
    let back = psi_c_inverse(&cfg, &psi_c(&cfg, &z).unwrap()).unwrap();
    assert!(max_diff(&back, &z) <= 1e-8);
}

#[test]
fn flow_commutes_with_reversal() {
    let (cfg, z) = setup(12);
    let a = psi_c(&cfg, &z.s_rev()).unwrap();
    let b = psi_c(&cfg, &z).unwrap().s_rev();
    assert!(max_diff(&a, &b) <= 1e-10);
    let u = psi(&cfg, &z.s_rev()).unwrap();
    let w = s_rev_potential(&psi(&cfg, &z).unwrap());
    assert!(u.sub(&w).unwrap().max_abs() <= 1e-10);
}

#[test]
fn step_doubling_agrees() {
    let (mut cfg, z) = setup(12);
    let a = psi_c(&cfg, &z).unwrap();
    cfg.steps *= 2;
    let b = psi_c(&cfg, &z).unwrap();
    assert!(max_diff(&a, &b) <= 1e-12);
}

#[test]
fn leaving_the_neighbourhood_is_reported() {
    let (mut cfg, z) = setup(8);
    cfg.radius = 0.01;
    assert!(matches!(psi_c(&cfg, &z), Err(Error::NeighbourhoodExit { .. })));
}

#[test]
fn radius_calibration_respects_the_cap() {
    let (cfg, z) = setup(8);
    let r = calibrate_radius(&cfg, &z.p, &z.y, 10.0, 0.2, 8).unwrap();
    assert!(r > 0.0 && r <= 0.2);
}

#[test]
fn corrected_map_is_symplectic() {
    let (cfg, z) = setup(8);
    let r = symplecticity_check(&cfg, &z, 50, 2, 1e-5).unwrap();
    assert!(r.max_defect <= 1e-6, "{r:?}");
    assert!(r.max_defect < r.max_defect_without, "{r:?}");
}

#[test]
fn hamiltonians_have_no_cubic_terms() {
    let (cfg, z) = setup(16);
    let dir = random_perp(&cfg, 1.0, 1.0, 3);
    let r = normal_form_check(&cfg, &z.p, &dir, &[0.04, 0.02, 0.01, 0.005]).unwrap();
    assert!(r.cubic_slope_bo >= 2.8, "{r:?}");
    assert!(r.cubic_slope_mo >= 2.8, "{r:?}");
    assert!(r.quad_relerr_bo() <= 1e-4 && r.quad_relerr_mo() <= 1e-4, "{r:?}");
}

#[test]
fn leading_symbol_dominates_high_modes() {
    let (cfg, z) = setup(16);
    let probe = leading_symbol_probe(&cfg, &z).unwrap();
    assert!(probe.shift_high > 0.0);
    assert!(probe.residual_high < 0.5 * probe.shift_high, "{probe:?}");
    assert!(probe.alpha_real_part < 1e-3);
}

#[test]
fn chart_round_trips_through_birkhoff_coordinates() {
    let (cfg, z) = setup(8);
    let b = chart_to_birkhoff(&cfg, &z).unwrap();
    let back = birkhoff_to_chart(&cfg, &b, &bo_nf::finite_gap::InverterConfig::default()).unwrap();
    assert!(max_diff(&back, &z) <= 1e-8);
}
