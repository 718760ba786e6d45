//! One function per subcommand; each returns its checks and written files.

use std::path::{Path, PathBuf};

use bo_nf::birkhoff::{actions, hamiltonian_in_actions, hamiltonian_physical, moment_in_actions, moment_physical, s_rev_potential, zetas, ActionAngleState};
use bo_nf::corrector::{
    assemble_correction, calibrate_radius, normal_form_check, psi_c, psi_c_inverse, random_perp, symplecticity_check, vector_field, ChartPoint, CorrectorConfig,
};
use bo_nf::finite_gap::{build_potential, invert_psi_s, seed_params, InverterConfig};
use bo_nf::flow::{evolve, phase_verify, step_halving_defect, EvolutionConfig};
use bo_nf::lax::{trace_check, LaxSpectrum};
use bo_nf::linearized::{expansion_coeffs, remainder_decay, FiniteGapBase, OPEN_GAP_TOL};
use bo_nf::pdo::{bony_remainder, hankel_sweep, mode_separation_slope, paraproduct, pdo_compose, project_mean_zero, remainder_1_0, CutoffProfile};
use bo_nf::spectral::{FourierSeries, Side, SobolevIndex};
use bo_nf::C64;

use crate::config::{JobConfig, PotentialSource};
use crate::error::CliError;
use crate::report::{header, write_csv, Check, Plot, Scale, Summary};

pub type JobResult = Result<(Vec<Check>, Vec<PathBuf>), CliError>;

fn one_gap_default() -> PotentialSource {
    PotentialSource::FiniteGap { r: vec![0.5], alpha: vec![0.3] }
}

fn two_gap_default() -> PotentialSource {
    PotentialSource::FiniteGap { r: vec![0.3, 0.25], alpha: vec![0.4, -1.1] }
}

fn open_gaps(spec: &LaxSpectrum) -> Vec<usize> {
    (1..=spec.band).filter(|&n| spec.gap(n) > OPEN_GAP_TOL).collect()
}

pub fn spectrum(cfg: &mut JobConfig, out: &Path) -> JobResult {
    let k = *cfg.k.get_or_insert(256);
    let m = *cfg.m.get_or_insert(k);
    let src = cfg.potential_or(PotentialSource::Zero);
    let q = src.build(m)?;
    let spec = LaxSpectrum::compute(&q, k)?;
    let rows: Vec<Vec<f64>> = spec.rows().into_iter().map(|(n, l, g, kap, one)| vec![n as f64, l, g, kap, one]).collect();
    let csv = write_csv(out, "spectrum.csv", &header(&["n", "lambda", "gamma", "kappa", "abs_one_f"]), &rows)?;
    let tr = trace_check(&q, &spec);
    let mut checks = vec![
        Check::at_most("trace_mean", tr.mean_residual.abs(), cfg.tol("trace_mean", 1e-6)),
        Check::at_most("trace_l2", tr.l2_residual.abs(), cfg.tol("trace_l2", 1e-6)),
    ];
    if let Some(p) = src.params() {
        let n = p?.n();
        let closed = (n + 1..=spec.band).map(|j| spec.gap(j).abs()).fold(0.0, f64::max);
        checks.push(Check::at_most("closed_gaps", closed, cfg.tol("closed_gaps", 1e-8)));
        let open = (1..=n).map(|j| spec.gap(j)).fold(f64::INFINITY, f64::min);
        checks.push(Check::at_least("min_open_gap", open, cfg.tol("min_open_gap", OPEN_GAP_TOL)));
    }
    if src == PotentialSource::Zero {
        let dl = (0..=spec.band).map(|n| (spec.lambdas[n] - n as f64).abs()).fold(0.0, f64::max);
        let (lo, hi) = spec.n_kappa_bounds();
        checks.push(Check::at_most("lambda_minus_n", dl, cfg.tol("lambda_minus_n", 1e-10)));
        checks.push(Check::at_most("n_kappa_minus_1", (lo - 1.0).abs().max((hi - 1.0).abs()), cfg.tol("n_kappa_minus_1", 1e-8)));
    }
    let gaps: Vec<(f64, f64)> = (1..=spec.band).map(|n| (n as f64, spec.gap(n))).collect();
    let svg = Plot { title: "Spectral gaps", x_label: "n", y_label: "|γ_n|", x_scale: Scale::Linear, y_scale: Scale::Log, series: vec![("γ_n".into(), gaps)] }.write(out, "gaps.svg")?;
    Ok((checks, vec![csv, svg]))
}

pub fn birkhoff(cfg: &mut JobConfig, out: &Path) -> JobResult {
    let k = *cfg.k.get_or_insert(128);
    let m = *cfg.m.get_or_insert(k);
    let q = cfg.potential_or(one_gap_default()).build(m)?;
    let spec = LaxSpectrum::compute(&q, k)?;
    let mz = *cfg.mz.get_or_insert(32.min(spec.band));
    let z = zetas(&spec, mz)?;
    let full = bo_nf::birkhoff::birkhoff_from_spectrum(&spec, spec.band)?;
    let acts = actions(&full)?;
    let rows: Vec<Vec<f64>> = z.iter().enumerate().map(|(i, c)| vec![(i + 1) as f64, c.re, c.im, acts[i], spec.gap(i + 1)]).collect();
    let csv = write_csv(out, "birkhoff.csv", &header(&["n", "re_zeta", "im_zeta", "action", "gamma"]), &rows)?;
    let dz = z.iter().enumerate().map(|(i, c)| (c.norm_sqr() - spec.gap(i + 1)).abs()).fold(0.0, f64::max);
    let rev = zetas(&LaxSpectrum::compute(&s_rev_potential(&q), k)?, mz)?;
    let drev = z.iter().zip(&rev).map(|(a, b)| (a.conj() - b).norm()).fold(0.0, f64::max);
    let checks = vec![
        Check::at_most("zeta_sq_minus_gamma", dz, cfg.tol("zeta_sq_minus_gamma", 1e-8)),
        Check::at_most("reversal", drev, cfg.tol("reversal", 1e-8)),
        Check::at_most("h_bo_cross_chart", (hamiltonian_physical(&q)? - hamiltonian_in_actions(&acts)).abs(), cfg.tol("h_bo_cross_chart", 1e-6)),
        Check::at_most("h_mo_cross_chart", (moment_physical(&q)? - moment_in_actions(&acts)).abs(), cfg.tol("h_mo_cross_chart", 1e-8)),
    ];
    let pts: Vec<(f64, f64)> = acts.iter().enumerate().take(mz).map(|(i, a)| ((i + 1) as f64, *a)).collect();
    let svg = Plot { title: "Actions", x_label: "n", y_label: "I_n", x_scale: Scale::Linear, y_scale: Scale::Log, series: vec![("I_n".into(), pts)] }.write(out, "actions.svg")?;
    Ok((checks, vec![csv, svg]))
}

pub fn finitegap_invert(cfg: &mut JobConfig, out: &Path) -> JobResult {
    let k = *cfg.k.get_or_insert(64);
    let m = *cfg.m.get_or_insert(k);
    let src = cfg.potential_or(two_gap_default());
    let q = src.build(m)?;
    let spec = LaxSpectrum::compute(&q, k)?;
    let s_plus = open_gaps(&spec);
    if s_plus.is_empty() || s_plus != (1..=s_plus.len()).collect::<Vec<_>>() {
        return Err(CliError::Config(format!("potential must open gaps 1..N, found {s_plus:?}")));
    }
    let z = bo_nf::birkhoff::birkhoff_from_spectrum(&spec, s_plus.len())?;
    let target = ActionAngleState::from_birkhoff(&z, &s_plus)?;
    let inv_cfg = InverterConfig { k, m, tol: cfg.tol("inverter_residual", 1e-9), ..InverterConfig::default() };
    let seed = seed_params(&target)?;
    let sol = invert_psi_s(&target, Some(&seed), &inv_cfg)?;
    let rebuilt = build_potential(&sol.params, m)?;
    let rows: Vec<Vec<f64>> = (0..sol.params.n()).map(|j| vec![(j + 1) as f64, sol.params.r[j], sol.params.alpha[j], seed.r[j], seed.alpha[j]]).collect();
    let csv = write_csv(out, "params.csv", &header(&["j", "r", "alpha", "seed_r", "seed_alpha"]), &rows)?;
    let json = out.join("params.json");
    std::fs::write(&json, serde_json::to_string_pretty(&sol.params)? + "\n")?;
    let checks = vec![
        Check::at_most("inverter_residual", sol.residual, inv_cfg.tol),
        Check::at_most("potential_mismatch", rebuilt.sub(&q)?.max_abs(), cfg.tol("potential_mismatch", 1e-8)),
    ];
    Ok((checks, vec![csv, json]))
}

pub fn wn_expansion(cfg: &mut JobConfig, out: &Path) -> JobResult {
    let k = *cfg.k.get_or_insert(128);
    let m_w = *cfg.m.get_or_insert(48);
    let order = *cfg.n.get_or_insert(2);
    let q = cfg.potential_or(one_gap_default()).build(k)?;
    let base = FiniteGapBase::new(&q, k, m_w, None)?;
    let table = expansion_coeffs(&base, order + 1)?;
    let ns: Vec<usize> = (16..=64).step_by(4).collect();
    let fits = (0..=order).map(|o| remainder_decay(&base, &table, o, &ns)).collect::<Result<Vec<_>, _>>()?;
    let rows: Vec<Vec<f64>> = ns.iter().enumerate().map(|(i, &n)| std::iter::once(n as f64).chain(fits.iter().map(|f| f.points[i].1)).collect()).collect();
    let names: Vec<String> = std::iter::once("n".to_string()).chain((0..=order).map(|o| format!("remainder_{o}"))).collect();
    let csv = write_csv(out, "remainders.csv", &names, &rows)?;
    let fit = &fits[order];
    let want = -(order as f64) - 1.0;
    let checks = vec![
        Check::at_most("slope_deviation", (fit.slope - want).abs(), cfg.tol("slope_deviation", 0.2)),
        Check::at_most("leading_term", table.w_plus[0].sub(&base.g_inf)?.norm(), cfg.tol("leading_term", 1e-8)),
    ];
    let series = fits.iter().map(|f| (format!("order {} (slope {:.3})", f.order, f.slope), f.points.iter().map(|&(n, v)| (n as f64, v)).collect())).collect();
    let svg = Plot { title: "W_n expansion remainders", x_label: "n", y_label: "‖remainder‖", x_scale: Scale::Log, y_scale: Scale::Log, series }.write(out, "remainders.svg")?;
    Ok((checks, vec![csv, svg]))
}

fn parse_case(case: &str) -> Option<(u32, u32)> {
    let rest = case.strip_prefix('k')?;
    let (k, l) = rest.split_once('l')?;
    Some((k.parse().ok()?, l.parse().ok()?))
}

pub fn pdo_check(cfg: &mut JobConfig, out: &Path) -> JobResult {
    let case = cfg.case.get_or_insert_with(|| "k1l0".into()).clone();
    let n = *cfg.n.get_or_insert(3) as u32;
    let src = cfg.potential_or(one_gap_default());
    match case.as_str() {
        "bony" => {
            let m = *cfg.m.get_or_insert(24);
            let a = src.build(m)?;
            let b = a.map_coeffs(|j, c| c * C64::from_polar(1.0, 0.3 * j as f64));
            let cut = CutoffProfile::default();
            let lhs = a.product(&b, 2 * m);
            let rhs = paraproduct(&a, &b, &cut, 2 * m).add(&paraproduct(&b, &a, &cut, 2 * m))?.add(&bony_remainder(&a, &b, &cut, 2 * m))?;
            let d = lhs.sub(&rhs)?.norm();
            Ok((vec![Check::at_most("bony_identity", d, cfg.tol("bony_identity", 1e-12))], vec![]))
        }
        "hankel" => {
            let m = *cfg.m.get_or_insert(96);
            let u = src.build(m)?;
            let ps: Vec<usize> = (1..=40).collect();
            let mut checks = Vec::new();
            let mut rows = Vec::new();
            let mut series = Vec::new();
            for j in 0..=n {
                let sweep = hankel_sweep(&u, Side::Plus, SobolevIndex::new(1.0 + j as f64)?, &ps)?;
                let first = sweep[..20].iter().map(|r| r.measured_norm).fold(0.0, f64::max);
                let second = sweep[20..].iter().map(|r| r.measured_norm).fold(0.0, f64::max);
                // tail sup over head sup; bounded in p when <= 1
                checks.push(Check::at_most(&format!("hankel_tail_ratio_s{}", 1 + j), second / first, 1.0));
                rows.extend(sweep.iter().map(|r| vec![r.s, r.p as f64, r.measured_norm]));
                series.push((format!("s = {}", 1 + j), sweep.iter().map(|r| (r.p as f64, r.measured_norm)).collect()));
            }
            let csv = write_csv(out, "hankel.csv", &header(&["s", "p", "norm"]), &rows)?;
            let svg = Plot { title: "Hankel smoothing", x_label: "p", y_label: "‖H_u^+ e^{-ipx}‖_s", x_scale: Scale::Linear, y_scale: Scale::Log, series }.write(out, "hankel.svg")?;
            Ok((checks, vec![csv, svg]))
        }
        other => {
            let (k, l) = parse_case(other).ok_or_else(|| CliError::Config(format!("unknown pdo case `{other}` (k<k>l<l>, bony, hankel)")))?;
            let e = pdo_compose(k, l, n).map_err(|e| CliError::Config(e.to_string()))?;
            let m = *cfg.m.get_or_insert(4);
            let a = src.build(m)?.axpy(C64::new(1.0, 0.0), &FourierSeries::mode(m, 0, C64::new(0.2, 0.0)));
            let mut checks = Vec::new();
            if (k, l) == (1, 0) {
                let mut worst = 0.0f64;
                for h in [FourierSeries::mode(8, 7, C64::new(1.0, 0.0)), a.resized(8)] {
                    let lhs = e.apply_exact(&a, &h, 24);
                    let rhs = e.apply_terms(&a, &h, 24).add(&remainder_1_0(&a, &h, n, 24)?)?;
                    worst = worst.max(lhs.sub(&project_mean_zero(&rhs))?.norm());
                }
                checks.push(Check::at_most("remainder_formula", worst, cfg.tol("remainder_formula", 1e-12)));
            }
            let ns: Vec<i64> = (40..=120).step_by(10).collect();
            let (slope, pts) = mode_separation_slope(&e, &a, &ns, 130)?;
            checks.push(Check::at_most("remainder_slope", slope, cfg.tol("remainder_slope", -(n as f64 + 1.0) + 0.2)));
            let rows: Vec<Vec<f64>> = pts.iter().map(|&(j, v)| vec![j as f64, v]).collect();
            let csv = write_csv(out, "pdo_remainder.csv", &header(&["n", "remainder"]), &rows)?;
            let series = vec![(format!("({k},{l}), N = {n}, slope {slope:.3}"), pts.iter().map(|&(j, v)| (j as f64, v)).collect())];
            let svg = Plot { title: "Pdo remainder", x_label: "n", y_label: "‖R_N e^{inx}‖", x_scale: Scale::Log, y_scale: Scale::Log, series }.write(out, "pdo_remainder.svg")?;
            Ok((checks, vec![csv, svg]))
        }
    }
}

fn corrector_setup(cfg: &mut JobConfig) -> Result<(CorrectorConfig, ChartPoint), CliError> {
    let src = cfg.potential_or(two_gap_default());
    let p = src.params().ok_or_else(|| CliError::Config("corrector jobs need a finite-gap potential".into()))??;
    let mz = *cfg.mz.get_or_insert(32);
    let mut c = CorrectorConfig::new(p.n(), mz);
    c.k = *cfg.k.get_or_insert(c.k);
    c.m_w = *cfg.m.get_or_insert(c.m_w);
    c.steps = *cfg.steps.get_or_insert(c.steps);
    c.jobs = cfg.jobs();
    c.validate().map_err(|e| CliError::Config(e.to_string()))?;
    let norm = *cfg.norm.get_or_insert(0.05);
    let seed = *cfg.seed.get_or_insert(7);
    let y = random_perp(&c, norm, 1.0, seed);
    Ok((c, ChartPoint { p: p.to_vec(), y }))
}

pub fn corrector_check(cfg: &mut JobConfig, out: &Path) -> JobResult {
    let (mut c, z) = corrector_setup(cfg)?;
    let trials = *cfg.trials.get_or_insert(60);
    c.radius = calibrate_radius(&c, &z.p, &z.y, 10.0, 0.2, 12)?;
    let (mut res, mut skew) = (0.0f64, 0.0f64);
    for tau in [0.0, 0.5, 1.0] {
        let v = vector_field(&c, tau, &z)?;
        res = res.max(v.residual);
        skew = skew.max(v.op.skew_residual());
    }
    let back = psi_c_inverse(&c, &psi_c(&c, &z)?)?;
    let rt = back.p.iter().zip(&z.p).chain(back.y.iter().zip(&z.y)).map(|(a, b)| (a - b).abs()).fold(0.0, f64::max);
    let z0 = ChartPoint { p: z.p.clone(), y: vec![0.0; z.y.len()] };
    let l0 = assemble_correction(&c, &z0)?.full().amax();
    let seed = cfg.seed.unwrap_or(7);
    let sym = symplecticity_check(&c, &z, trials, seed, c.fd_step)?;
    let checks = vec![
        Check::at_most("x_residual", res, cfg.tol("x_residual", 1e-10)),
        Check::at_most("skew_residual", skew, cfg.tol("skew_residual", 1e-8)),
        Check::at_most("round_trip", rt, cfg.tol("round_trip", 1e-8)),
        Check::at_most("operator_on_manifold", l0, cfg.tol("operator_on_manifold", 0.0)),
        Check::at_most("symplectic_defect", sym.max_defect, cfg.tol("symplectic_defect", 1e-4)),
        Check::below("defect_ratio_vs_uncorrected", sym.max_defect / sym.max_defect_without, 1.0),
    ];
    let rows = vec![vec![c.radius, c.steps as f64, z.perp_norm(), sym.max_defect, sym.max_defect_without, sym.max_entry, sym.max_entry_without, trials as f64]];
    let csv = write_csv(out, "corrector.csv", &header(&["radius", "steps", "perp_norm", "defect", "defect_without", "max_entry", "max_entry_without", "trials"]), &rows)?;
    Ok((checks, vec![csv]))
}

pub fn normalform_check(cfg: &mut JobConfig, out: &Path) -> JobResult {
    let (c, z) = corrector_setup(cfg)?;
    let eps = cfg.eps.get_or_insert_with(|| vec![0.04, 0.02, 0.01, 0.005]).clone();
    let dir = random_perp(&c, 1.0, 1.0, cfg.seed.unwrap_or(7) + 1);
    let r = normal_form_check(&c, &z.p, &dir, &eps)?;
    let rows: Vec<Vec<f64>> = r.rows.iter().map(|row| row.to_vec()).collect();
    let csv = write_csv(out, "normal_form.csv", &header(&["eps", "dH_bo", "R_bo", "dH_mo", "R_mo"]), &rows)?;
    let checks = vec![
        Check::at_least("cubic_slope_bo", r.cubic_slope_bo, cfg.tol("cubic_slope_bo", 2.8)),
        Check::at_least("cubic_slope_mo", r.cubic_slope_mo, cfg.tol("cubic_slope_mo", 2.8)),
        Check::at_most("quadratic_relerr_bo", r.quad_relerr_bo(), cfg.tol("quadratic_relerr_bo", 1e-4)),
        Check::at_most("quadratic_relerr_mo", r.quad_relerr_mo(), cfg.tol("quadratic_relerr_mo", 1e-4)),
    ];
    let series = vec![("R^bo".into(), r.rows.iter().map(|x| (x[0], x[2])).collect()), ("R^mo".into(), r.rows.iter().map(|x| (x[0], x[4])).collect())];
    let svg = Plot { title: "Cubic remainders", x_label: "ε", y_label: "|R(ε)|", x_scale: Scale::Log, y_scale: Scale::Log, series }.write(out, "normal_form.svg")?;
    Ok((checks, vec![csv, svg]))
}

pub fn evolve_job(cfg: &mut JobConfig, out: &Path) -> JobResult {
    let m = *cfg.m.get_or_insert(64);
    let k = *cfg.k.get_or_insert(128);
    let dt = *cfg.dt.get_or_insert(1e-3);
    let t_final = *cfg.t_final.get_or_insert(1.0);
    let q = cfg.potential_or(two_gap_default()).build(m)?;
    let mut ec = EvolutionConfig::new(dt, t_final, m);
    let steps = ec.steps().map_err(|e| CliError::Config(e.to_string()))?;
    ec.save_every = *cfg.steps.get_or_insert((steps / 10).max(1));
    let traj = evolve(&q, &ec)?;
    let halving = step_halving_defect(&q, &ec)?;
    let spec = LaxSpectrum::compute(&q.resized(m.max(k)), k)?;
    let s_plus = open_gaps(&spec);
    let n_gaps = *cfg.n.get_or_insert(16.min(spec.band));
    let rep = phase_verify(&traj, k, &s_plus, n_gaps)?;
    let json = out.join("trajectory.json");
    std::fs::create_dir_all(out)?;
    std::fs::write(&json, traj.to_json()?)?;
    let mut names = vec!["t".to_string(), "H_bo".into(), "H_mo".into()];
    names.extend((1..=n_gaps).map(|n| format!("gamma_{n}")));
    names.extend(s_plus.iter().map(|n| format!("phase_defect_{n}")));
    let rows: Vec<Vec<f64>> = rep.rows.iter().map(|r| [r.t, r.h_bo, r.h_mo].into_iter().chain(r.gaps.iter().copied()).chain(r.phase_defects.iter().copied()).collect()).collect();
    let csv = write_csv(out, "diagnostics.csv", &names, &rows)?;
    let series = s_plus.iter().enumerate().map(|(i, n)| (format!("n = {n}"), rep.rows.iter().map(|r| (r.t, r.phase_defects[i])).collect())).collect();
    let svg = Plot { title: "Phase defects", x_label: "t", y_label: "|ζ_n(t) - e^{iω_n t}ζ_n(0)|", x_scale: Scale::Linear, y_scale: Scale::Log, series }.write(out, "phase_defects.svg")?;
    let checks = vec![
        Check::at_most("phase_defect", rep.max_phase_defect, cfg.tol("phase_defect", 1e-5)),
        Check::at_most("gap_drift", rep.max_gap_drift, cfg.tol("gap_drift", 1e-6)),
        Check::at_most("h_bo_drift", rep.h_bo_drift, cfg.tol("h_bo_drift", 1e-7)),
        Check::at_most("h_mo_drift", rep.h_mo_drift, cfg.tol("h_mo_drift", 1e-8)),
        Check::at_most("step_halving", halving, cfg.tol("step_halving", 1e-8)),
    ];
    Ok((checks, vec![json, csv, svg]))
}

/// Collect every `*.summary.json` in `out` into `report.csv` and `report.json`.
pub fn report(_cfg: &mut JobConfig, out: &Path) -> JobResult {
    let mut summaries = Vec::new();
    let mut entries: Vec<PathBuf> = std::fs::read_dir(out)
        .map_err(|e| CliError::Config(format!("{}: {e}", out.display())))?
        .filter_map(|e| e.ok().map(|e| e.path()))
        .filter(|p| p.to_string_lossy().ends_with(".summary.json") && p != &Summary::path(out, "report"))
        .collect();
    entries.sort();
    for p in &entries {
        let text = std::fs::read_to_string(p)?;
        let s: Summary = serde_json::from_str(&text).map_err(|e| CliError::Config(format!("{}: {e}", p.display())))?;
        summaries.push(s);
    }
    if summaries.is_empty() {
        return Err(CliError::Config(format!("no job summaries in {}", out.display())));
    }
    let path = out.join("report.csv");
    let mut w = csv::Writer::from_path(&path)?;
    w.write_record(["job", "check", "value", "tol", "pass"])?;
    let mut checks = Vec::new();
    for s in &summaries {
        for c in &s.checks {
            w.write_record([s.job.clone(), c.name.clone(), format!("{:.17e}", c.value), format!("{:.17e}", c.tol), c.pass.to_string()])?;
        }
        let failed = s.checks.iter().filter(|c| !c.pass).count() as f64;
        checks.push(Check { name: format!("{}_exit_code", s.job), value: s.exit_code as f64, tol: 0.0, pass: s.exit_code == 0 && failed == 0.0 });
    }
    w.flush()?;
    let json = out.join("report.json");
    std::fs::write(&json, serde_json::to_string_pretty(&summaries)? + "\n")?;
    Ok((checks, vec![path, json]))
}
