//! The correction operator `𝓛(z)`, the energy one-form `𝓔_S(z)`, the
//! Moser vector field `X(τ, z)`, its flow `Ψ_X^{τ0,τ}` and the checks on
//! `Ψ = Ψ_L ∘ Ψ_C`.
//!
//! Everything runs in real coordinates: `z_S` is carried by the finite-gap
//! parameters `p = (r_1..r_N, α_1..α_N)` and `z_⊥` by
//! `y = (Re z_n, Im z_n)_{n = N+1..M_z}`. The open gaps are `S_+ = {1..N}`.

use nalgebra::{DMatrix, DVector};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::birkhoff::{birkhoff_from_spectrum, frequencies, hamiltonian_physical, moment_physical, BirkhoffVector, ActionAngleState};
use crate::error::{Error, Result};
use crate::finite_gap::{build_potential, invert_psi_s, FiniteGapParams, InverterConfig};
use crate::linearized::{fit_slope, FiniteGapBase};
use crate::parallel::par_map;
use crate::spectral::{deriv, FourierSeries, C64};

/// Discretization of the corrector.
#[derive(Clone, Debug)]
pub struct CorrectorConfig {
    /// Number of open gaps `N` (`S_+ = {1..N}`).
    pub n_gaps: usize,
    /// Largest Birkhoff index `M_z`.
    pub mz: usize,
    /// Lax truncation.
    pub k: usize,
    /// Truncation of `W_n` and of `Ψ_L`.
    pub m_w: usize,
    /// Step of the central differences over `p`.
    pub fd_step: f64,
    /// RK4 steps over `τ ∈ [0, 1]`.
    pub steps: usize,
    /// Neighbourhood radius in `‖z_⊥‖_0`.
    pub radius: f64,
    pub jobs: usize,
}

impl CorrectorConfig {
    pub fn new(n_gaps: usize, mz: usize) -> Self {
        Self { n_gaps, mz, k: 32, m_w: mz + 32, fd_step: 1e-5, steps: 8, radius: 0.2, jobs: 1 }
    }

    pub fn validate(&self) -> Result<()> {
        if self.n_gaps == 0 || self.mz <= self.n_gaps {
            return Err(Error::InvalidArgument(format!("need 0 < N < M_z, got N = {}, M_z = {}", self.n_gaps, self.mz)));
        }
        if self.k / 2 < self.n_gaps || self.m_w < self.mz || self.steps == 0 {
            return Err(Error::InvalidArgument("K/2 >= N, m_w >= M_z and steps > 0 required".into()));
        }
        Ok(())
    }

    pub fn dim_s(&self) -> usize {
        2 * self.n_gaps
    }

    pub fn dim_perp(&self) -> usize {
        2 * (self.mz - self.n_gaps)
    }

    /// Mode number of real coordinate `i` in the full layout `(S, ⊥)`.
    pub fn mode_of(&self, i: usize) -> usize {
        i / 2 + 1
    }
}

/// A point `(p, y)` of the chart.
#[derive(Clone, Debug, PartialEq)]
pub struct ChartPoint {
    pub p: Vec<f64>,
    pub y: Vec<f64>,
}

impl ChartPoint {
    /// `‖z_⊥‖_0` (both signs counted).
    pub fn perp_norm(&self) -> f64 {
        perp_norm(&self.y)
    }

    /// `𝒮_rev`: `α ↦ -α`, `z_⊥ ↦ conj z_⊥`.
    pub fn s_rev(&self) -> Self {
        let n = self.p.len() / 2;
        let mut p = self.p.clone();
        for a in &mut p[n..] {
            *a = -*a;
        }
        Self { p, y: conj_real(&self.y) }
    }
}

fn perp_norm(y: &[f64]) -> f64 {
    (2.0 * y.iter().map(|v| v * v).sum::<f64>()).sqrt()
}

fn conj_real(v: &[f64]) -> Vec<f64> {
    v.iter().enumerate().map(|(i, x)| if i % 2 == 1 { -x } else { *x }).collect()
}

/// Data of `Ψ_L` at one base point `p`.
#[derive(Clone, Debug)]
pub struct BaseData {
    pub q: FourierSeries,
    /// Real columns `W_n + conj W_n`, `i W_n - i conj W_n` for `n = N+1..M_z`.
    pub cols: Vec<FourierSeries>,
    /// `(Re z_n, Im z_n)_{n ∈ S_+}`.
    pub z_s: Vec<f64>,
    /// Gaps `γ_1..γ_N` (the actions on `S_+`).
    pub gaps: Vec<f64>,
}

pub fn base_data(cfg: &CorrectorConfig, p: &[f64]) -> Result<BaseData> {
    let params = FiniteGapParams::from_vec(p)?;
    let q = build_potential(&params, cfg.k.max(cfg.m_w))?;
    let s_plus: Vec<usize> = (1..=cfg.n_gaps).collect();
    let base = FiniteGapBase::new(&q, cfg.k, cfg.m_w, Some(s_plus))?;
    let mut cols = Vec::with_capacity(cfg.dim_perp());
    for n in cfg.n_gaps + 1..=cfg.mz {
        let (a, b) = base.w_real_columns(n)?;
        cols.push(a);
        cols.push(b);
    }
    let z_s = birkhoff_from_spectrum(&base.spectrum, cfg.n_gaps)?.to_real();
    let gaps = (1..=cfg.n_gaps).map(|n| base.spectrum.gap(n)).collect();
    Ok(BaseData { q: q.resized(cfg.m_w), cols, z_s, gaps })
}

impl BaseData {
    /// `Ψ_L(p, y) = q + Σ y_i col_i`, with the round-off zero mode removed.
    pub fn psi_l(&self, y: &[f64]) -> FourierSeries {
        let mut u = self.q.add(&self.perp_combination(y)).expect("same truncation");
        u.set(0, C64::new(0.0, 0.0));
        u.symmetrized()
    }

    /// `Ψ_1(z_S)[z_⊥] = Σ y_i col_i`.
    pub fn perp_combination(&self, y: &[f64]) -> FourierSeries {
        let mut acc = vec![C64::new(0.0, 0.0); 2 * self.q.m() + 1];
        for (c, v) in self.cols.iter().zip(y) {
            if *v != 0.0 {
                for (a, b) in acc.iter_mut().zip(c.coeffs()) {
                    *a += b * *v;
                }
            }
        }
        FourierSeries::from_coeffs(self.q.m(), acc).expect("length")
    }
}

/// `Λ_G[u, v] = ⟨u, ∂_x^{-1} v⟩` for real series.
pub fn lambda_g(u: &FourierSeries, v: &FourierSeries) -> f64 {
    let iv = deriv(v, -1);
    let m = u.m().min(iv.m()) as i64;
    (-m..=m).map(|k| u.coeff(k) * iv.coeff(-k)).sum::<C64>().re
}

/// Gram matrix `Λ_G[a_i, b_j]`.
pub fn lambda_g_matrix(a: &[FourierSeries], b: &[FourierSeries]) -> DMatrix<f64> {
    let ib: Vec<FourierSeries> = b.iter().map(|v| deriv(v, -1)).collect();
    DMatrix::from_fn(a.len(), b.len(), |i, j| {
        let m = a[i].m().min(ib[j].m()) as i64;
        (-m..=m).map(|k| a[i].coeff(k) * ib[j].coeff(-k)).sum::<C64>().re
    })
}

/// Standard form `Λ[ẑ, ŵ] = ⟨ẑ, J^{-1} ŵ⟩` in real coordinates: `[2i, 2i+1] = 2/n`.
pub fn omega0(modes: &[usize]) -> DMatrix<f64> {
    let d = 2 * modes.len();
    let mut o = DMatrix::zeros(d, d);
    for (i, &n) in modes.iter().enumerate() {
        o[(2 * i, 2 * i + 1)] = 2.0 / n as f64;
        o[(2 * i + 1, 2 * i)] = -2.0 / n as f64;
    }
    o
}

/// Poisson tensor `J` in real coordinates: `(a, b) ↦ (-n b, n a)`.
pub fn j_real(modes: &[usize]) -> DMatrix<f64> {
    let d = 2 * modes.len();
    let mut j = DMatrix::zeros(d, d);
    for (i, &n) in modes.iter().enumerate() {
        j[(2 * i, 2 * i + 1)] = -(n as f64);
        j[(2 * i + 1, 2 * i)] = n as f64;
    }
    j
}

fn s_modes(cfg: &CorrectorConfig) -> Vec<usize> {
    (1..=cfg.n_gaps).collect()
}

fn perp_modes(cfg: &CorrectorConfig) -> Vec<usize> {
    (cfg.n_gaps + 1..=cfg.mz).collect()
}

fn all_modes(cfg: &CorrectorConfig) -> Vec<usize> {
    (1..=cfg.mz).collect()
}

/// `𝓛(z)` in blocks, with the chart derivatives used to build it.
#[derive(Clone, Debug)]
pub struct CorrectionOperator {
    pub ss: DMatrix<f64>,
    pub s_perp: DMatrix<f64>,
    pub perp_s: DMatrix<f64>,
    /// `(∂ z_S / ∂ p)^{-1}`.
    pub zi: DMatrix<f64>,
    /// `d_S q` along the real `z_S` directions.
    pub dq: Vec<FourierSeries>,
    pub base: BaseData,
    pub y: Vec<f64>,
}

struct ChartDerivs {
    base: BaseData,
    zi: DMatrix<f64>,
    dq: Vec<FourierSeries>,
    dp: Vec<FourierSeries>,
}

fn chart_derivs(cfg: &CorrectorConfig, p: &[f64], y: &[f64]) -> Result<ChartDerivs> {
    let ds = cfg.dim_s();
    let h = cfg.fd_step;
    let bases = par_map(2 * ds + 1, cfg.jobs, |i| {
        let mut pp = p.to_vec();
        if i > 0 {
            let j = (i - 1) / 2;
            pp[j] += if i % 2 == 1 { h } else { -h };
        }
        base_data(cfg, &pp)
    });
    let mut it = bases.into_iter();
    let base = it.next().expect("base")?;
    let mut dq_p = Vec::with_capacity(ds);
    let mut dp_p = Vec::with_capacity(ds);
    let mut zp = DMatrix::zeros(ds, ds);
    let inv2h = C64::new(0.5 / h, 0.0);
    for j in 0..ds {
        let bp = it.next().expect("plus")?;
        let bm = it.next().expect("minus")?;
        dq_p.push(bp.q.sub(&bm.q)?.scale(inv2h));
        dp_p.push(bp.perp_combination(y).sub(&bm.perp_combination(y))?.scale(inv2h));
        for i in 0..ds {
            zp[(i, j)] = (bp.z_s[i] - bm.z_s[i]) * 0.5 / h;
        }
    }
    let zi = zp.try_inverse().ok_or_else(|| Error::Singular("∂z_S/∂p".into()))?;
    let combine = |v: &[FourierSeries]| -> Vec<FourierSeries> {
        (0..ds)
            .map(|i| {
                let mut acc = FourierSeries::zeros(cfg.m_w);
                for (j, f) in v.iter().enumerate() {
                    acc = acc.axpy(C64::new(zi[(j, i)], 0.0), f);
                }
                acc
            })
            .collect()
    };
    Ok(ChartDerivs { dq: combine(&dq_p), dp: combine(&dp_p), zi, base })
}

/// `𝓛 = ½ Λ_L` with `Λ_L = Ψ_L^* Λ_G - Λ`:
/// `𝓛_S^S = ½(Λ_G[P,P] + Λ_G[Q,P] + Λ_G[P,Q])`, `𝓛_S^⊥ = ½Λ_G[P,W]`,
/// `𝓛_⊥^S = ½Λ_G[W,P]`, `𝓛_⊥^⊥ = 0`, where `Q = d_S q` and
/// `P = d_S(Ψ_1(z_S)[z_⊥])`.
pub fn assemble_correction(cfg: &CorrectorConfig, point: &ChartPoint) -> Result<CorrectionOperator> {
    let d = chart_derivs(cfg, &point.p, &point.y)?;
    let pp = lambda_g_matrix(&d.dp, &d.dp);
    let qp = lambda_g_matrix(&d.dq, &d.dp);
    let pq = lambda_g_matrix(&d.dp, &d.dq);
    let ss = (pp + qp + pq) * 0.5;
    let s_perp = lambda_g_matrix(&d.dp, &d.base.cols) * 0.5;
    let perp_s = lambda_g_matrix(&d.base.cols, &d.dp) * 0.5;
    Ok(CorrectionOperator { ss, s_perp, perp_s, zi: d.zi, dq: d.dq, base: d.base, y: point.y.clone() })
}

impl CorrectionOperator {
    pub fn full(&self) -> DMatrix<f64> {
        let (ds, dp) = (self.ss.nrows(), self.perp_s.nrows());
        let mut l = DMatrix::zeros(ds + dp, ds + dp);
        l.view_mut((0, 0), (ds, ds)).copy_from(&self.ss);
        l.view_mut((0, ds), (ds, dp)).copy_from(&self.s_perp);
        l.view_mut((ds, 0), (dp, ds)).copy_from(&self.perp_s);
        l
    }

    /// `max |𝓛 + 𝓛^⊤|`.
    pub fn skew_residual(&self) -> f64 {
        let l = self.full();
        (&l + l.transpose()).amax()
    }

    /// `𝓔_S = ½ 𝓛_S^⊥ [z_⊥]`.
    pub fn energy_one_form(&self) -> DVector<f64> {
        &self.s_perp * DVector::from_column_slice(&self.y) * 0.5
    }

    /// `d_S q[v]` for a real `z_S` tangent `v`.
    pub fn dq_apply(&self, v: &DVector<f64>) -> FourierSeries {
        let mut acc = FourierSeries::zeros(self.dq[0].m());
        for (f, c) in self.dq.iter().zip(v.iter()) {
            acc = acc.axpy(C64::new(*c, 0.0), f);
        }
        acc
    }
}

/// `X(τ, z)` with diagnostics.
#[derive(Clone, Debug)]
pub struct VectorField {
    pub x_s: DVector<f64>,
    pub x_perp: DVector<f64>,
    /// `‖J𝓔 + (Id + τJ𝓛)X‖_∞`.
    pub residual: f64,
    /// 2-norm condition number of `C_11`.
    pub cond_c11: f64,
    pub op: CorrectionOperator,
}

/// `X_S = -C_11^{-1} J_S 𝓔_S`, `X_⊥ = -τ J_⊥ 𝓛_⊥^S X_S` with
/// `C_11 = Id + τJ_S𝓛_S^S - τ²J_S𝓛_S^⊥J_⊥𝓛_⊥^S`.
pub fn vector_field(cfg: &CorrectorConfig, tau: f64, point: &ChartPoint) -> Result<VectorField> {
    let op = assemble_correction(cfg, point)?;
    vector_field_from(cfg, tau, op)
}

fn vector_field_from(cfg: &CorrectorConfig, tau: f64, op: CorrectionOperator) -> Result<VectorField> {
    let js = j_real(&s_modes(cfg));
    let jp = j_real(&perp_modes(cfg));
    let ds = cfg.dim_s();
    let c11 = DMatrix::identity(ds, ds) + &js * &op.ss * tau - &js * &op.s_perp * &jp * &op.perp_s * (tau * tau);
    let sv = c11.clone().svd(false, false).singular_values;
    let smax = sv.iter().copied().fold(0.0, f64::max);
    let smin = sv.iter().copied().fold(f64::INFINITY, f64::min);
    let cond_c11 = smax / smin;
    if !(smin > 1e-12 * smax) {
        return Err(Error::Singular("C_11".into()));
    }
    let e_s = op.energy_one_form();
    let rhs = -(&js * &e_s);
    let x_s = c11.lu().solve(&rhs).ok_or_else(|| Error::Singular("C_11".into()))?;
    let x_perp = -(&jp * &op.perp_s * &x_s) * tau;
    let j_all = j_real(&all_modes(cfg));
    let mut x = DVector::zeros(ds + x_perp.len());
    x.rows_mut(0, ds).copy_from(&x_s);
    x.rows_mut(ds, x_perp.len()).copy_from(&x_perp);
    let mut e = DVector::zeros(x.len());
    e.rows_mut(0, ds).copy_from(&e_s);
    let res = &j_all * &e + &x + (&j_all * op.full() * &x) * tau;
    Ok(VectorField { x_s, x_perp, residual: res.amax(), cond_c11, op })
}

/// Endpoint of a flow and the integrated leading symbol.
#[derive(Clone, Debug)]
pub struct FlowResult {
    pub point: ChartPoint,
    /// `α^+ = ∫ a_0^+(t, Ψ^{τ0,t}(z); X) dt` with `a_0^+ = -iτ ∂_x^{-1}(d_S q[X_S])`.
    pub alpha_plus: Option<FourierSeries>,
}

struct Rate {
    dp: Vec<f64>,
    dy: Vec<f64>,
    a0: Option<FourierSeries>,
}

fn rate(cfg: &CorrectorConfig, tau: f64, point: &ChartPoint, track: bool) -> Result<Rate> {
    let norm = point.perp_norm();
    if norm > cfg.radius {
        return Err(Error::NeighbourhoodExit { tau, norm, radius: cfg.radius });
    }
    let v = vector_field(cfg, tau, point)?;
    let dp = (&v.op.zi * &v.x_s).iter().copied().collect();
    let a0 = track.then(|| deriv(&v.op.dq_apply(&v.x_s), -1).scale(C64::new(0.0, -tau)));
    Ok(Rate { dp, dy: v.x_perp.iter().copied().collect(), a0 })
}

fn advance(p: &ChartPoint, r: &Rate, h: f64) -> ChartPoint {
    ChartPoint {
        p: p.p.iter().zip(&r.dp).map(|(a, b)| a + h * b).collect(),
        y: p.y.iter().zip(&r.dy).map(|(a, b)| a + h * b).collect(),
    }
}

/// Classical RK4 for `∂_τ z = X(τ, z)` from `τ0` to `τ1`.
pub fn flow(cfg: &CorrectorConfig, tau0: f64, tau1: f64, z: &ChartPoint, steps: usize, track_a0: bool) -> Result<FlowResult> {
    let h = (tau1 - tau0) / steps as f64;
    let mut cur = z.clone();
    let mut alpha = track_a0.then(|| FourierSeries::zeros(cfg.m_w));
    for s in 0..steps {
        let t = tau0 + h * s as f64;
        let k1 = rate(cfg, t, &cur, track_a0)?;
        let k2 = rate(cfg, t + h / 2.0, &advance(&cur, &k1, h / 2.0), track_a0)?;
        let k3 = rate(cfg, t + h / 2.0, &advance(&cur, &k2, h / 2.0), track_a0)?;
        let k4 = rate(cfg, t + h, &advance(&cur, &k3, h), track_a0)?;
        let comb = |f: fn(&Rate) -> &Vec<f64>| -> Vec<f64> {
            (0..f(&k1).len()).map(|i| (f(&k1)[i] + 2.0 * f(&k2)[i] + 2.0 * f(&k3)[i] + f(&k4)[i]) / 6.0).collect()
        };
        let avg = Rate { dp: comb(|r| &r.dp), dy: comb(|r| &r.dy), a0: None };
        cur = advance(&cur, &avg, h);
        if let Some(a) = alpha.as_mut() {
            let (a1, a2, a3, a4) = (k1.a0.unwrap(), k2.a0.unwrap(), k3.a0.unwrap(), k4.a0.unwrap());
            let c = |w: f64| C64::new(w * h / 6.0, 0.0);
            *a = a.axpy(c(1.0), &a1).axpy(c(2.0), &a2).axpy(c(2.0), &a3).axpy(c(1.0), &a4);
        }
        let norm = cur.perp_norm();
        if norm > cfg.radius {
            return Err(Error::NeighbourhoodExit { tau: t + h, norm, radius: cfg.radius });
        }
    }
    Ok(FlowResult { point: cur, alpha_plus: alpha })
}

/// `Ψ_C = Ψ_X^{0,1}`.
pub fn psi_c(cfg: &CorrectorConfig, z: &ChartPoint) -> Result<ChartPoint> {
    Ok(flow(cfg, 0.0, 1.0, z, cfg.steps, false)?.point)
}

/// `Ψ_C^{-1} = Ψ_X^{1,0}`.
pub fn psi_c_inverse(cfg: &CorrectorConfig, z: &ChartPoint) -> Result<ChartPoint> {
    Ok(flow(cfg, 1.0, 0.0, z, cfg.steps, false)?.point)
}

/// `Ψ_L` at a chart point.
pub fn psi_l(cfg: &CorrectorConfig, z: &ChartPoint) -> Result<FourierSeries> {
    Ok(base_data(cfg, &z.p)?.psi_l(&z.y))
}

/// `Ψ = Ψ_L ∘ Ψ_C`.
pub fn psi(cfg: &CorrectorConfig, z: &ChartPoint) -> Result<FourierSeries> {
    psi_l(cfg, &psi_c(cfg, z)?)
}

/// Birkhoff vector `(z_S(p), z_⊥ = y)`.
pub fn chart_to_birkhoff(cfg: &CorrectorConfig, z: &ChartPoint) -> Result<BirkhoffVector> {
    let b = base_data(cfg, &z.p)?;
    let mut full = b.z_s.clone();
    full.extend(&z.y);
    Ok(BirkhoffVector::from_real(&full))
}

/// Chart point of a Birkhoff vector; `z_S` is inverted through the finite-gap parameters.
pub fn birkhoff_to_chart(cfg: &CorrectorConfig, z: &BirkhoffVector, inv: &InverterConfig) -> Result<ChartPoint> {
    if z.mz() != cfg.mz {
        return Err(Error::LengthMismatch { expected: cfg.mz, got: z.mz() });
    }
    let state = ActionAngleState::from_birkhoff(z, &s_modes(cfg))?;
    let inv_cfg = InverterConfig { k: cfg.k, m: cfg.k.max(cfg.m_w), ..inv.clone() };
    let sol = invert_psi_s(&state, None, &inv_cfg)?;
    let real = z.to_real();
    Ok(ChartPoint { p: sol.params.to_vec(), y: real[cfg.dim_s()..].to_vec() })
}

/// Largest `ρ <= rho_max` with `cond(C_11(τ = 1)) <= cond_max` along `dir`
/// (scaled to `‖z_⊥‖_0 = ρ`), found by bisection.
pub fn calibrate_radius(cfg: &CorrectorConfig, p: &[f64], dir: &[f64], cond_max: f64, rho_max: f64, iters: usize) -> Result<f64> {
    let n0 = perp_norm(dir);
    if !(n0 > 0.0) {
        return Err(Error::InvalidArgument("zero calibration direction".into()));
    }
    let ok = |rho: f64| -> bool {
        let point = ChartPoint { p: p.to_vec(), y: dir.iter().map(|v| v * rho / n0).collect() };
        matches!(vector_field(cfg, 1.0, &point), Ok(v) if v.cond_c11 <= cond_max)
    };
    if ok(rho_max) {
        return Ok(rho_max);
    }
    let (mut lo, mut hi) = (0.0, rho_max);
    for _ in 0..iters {
        let mid = 0.5 * (lo + hi);
        if ok(mid) {
            lo = mid;
        } else {
            hi = mid;
        }
    }
    if lo == 0.0 {
        return Err(Error::InvalidArgument("no admissible neighbourhood radius".into()));
    }
    Ok(lo)
}

/// Symplecticity defect of `Ψ` against `Λ`.
#[derive(Clone, Debug)]
pub struct SymplecticReport {
    /// `max |Λ_G[dΨ ẑ, dΨ ŵ] - Λ[ẑ, ŵ]|` over the random unit pairs.
    pub max_defect: f64,
    /// Same with `Ψ_C` skipped (`Ψ = Ψ_L`).
    pub max_defect_without: f64,
    /// `max |DᵀGD - Ω_0|` over coordinate pairs.
    pub max_entry: f64,
    pub max_entry_without: f64,
    pub trials: usize,
}

/// Finite-difference differential of `F` over the real `z` directions; `z_S`
/// directions enter through `p̂ = (∂z_S/∂p)^{-1} e_i`.
fn fd_differential<F>(cfg: &CorrectorConfig, z: &ChartPoint, zi: &DMatrix<f64>, h: f64, f: F) -> Result<Vec<FourierSeries>>
where
    F: Fn(&ChartPoint) -> Result<FourierSeries> + Sync,
{
    let (ds, dp) = (cfg.dim_s(), cfg.dim_perp());
    let dirs = ds + dp;
    let cols = par_map(2 * dirs, cfg.jobs, |c| {
        let (i, sign) = (c / 2, if c % 2 == 0 { 1.0 } else { -1.0 });
        let mut w = z.clone();
        if i < ds {
            for j in 0..ds {
                w.p[j] += sign * h * zi[(j, i)];
            }
        } else {
            w.y[i - ds] += sign * h;
        }
        f(&w)
    });
    let mut out = Vec::with_capacity(dirs);
    let mut it = cols.into_iter();
    for _ in 0..dirs {
        let a = it.next().expect("plus")?;
        let b = it.next().expect("minus")?;
        out.push(a.sub(&b)?.scale(C64::new(0.5 / h, 0.0)));
    }
    Ok(out)
}

/// Pullback defect of `Λ_G` through `Ψ_L ∘ Ψ_C` and through `Ψ_L` alone.
pub fn symplecticity_check(cfg: &CorrectorConfig, z: &ChartPoint, trials: usize, seed: u64, h: f64) -> Result<SymplecticReport> {
    let zi = chart_derivs(cfg, &z.p, &z.y)?.zi;
    let o = omega0(&all_modes(cfg));
    let with = fd_differential(cfg, z, &zi, h, |w| psi(cfg, w))?;
    let without = fd_differential(cfg, z, &zi, h, |w| psi_l(cfg, w))?;
    let m_with = lambda_g_matrix(&with, &with) - &o;
    let m_without = lambda_g_matrix(&without, &without) - &o;
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let d = o.nrows();
    let mut unit = || {
        let v = DVector::from_fn(d, |_, _| rng.random::<f64>() * 2.0 - 1.0);
        let n = v.norm();
        v / n
    };
    let (mut a, mut b) = (0.0f64, 0.0f64);
    for _ in 0..trials {
        let (u, v) = (unit(), unit());
        a = a.max((u.transpose() * &m_with * &v)[(0, 0)].abs());
        b = b.max((u.transpose() * &m_without * &v)[(0, 0)].abs());
    }
    Ok(SymplecticReport { max_defect: a, max_defect_without: b, max_entry: m_with.amax(), max_entry_without: m_without.amax(), trials })
}

/// Quadratic and cubic structure of `H ∘ Ψ` along `z_⊥ = ε·dir`.
#[derive(Clone, Debug)]
pub struct NormalFormReport {
    /// Rows `(ε, H^bo(Ψ) - H^bo(q), R^bo(ε), H^mo(Ψ) - H^mo(q), R^mo(ε))`.
    pub rows: Vec<[f64; 5]>,
    /// Fitted over remainders above the rounding floor; infinite when none is.
    pub cubic_slope_bo: f64,
    pub cubic_slope_mo: f64,
    pub quad_bo: f64,
    pub quad_bo_predicted: f64,
    pub quad_mo: f64,
    pub quad_mo_predicted: f64,
}

impl NormalFormReport {
    pub fn quad_relerr_bo(&self) -> f64 {
        ((self.quad_bo - self.quad_bo_predicted) / self.quad_bo_predicted).abs()
    }

    pub fn quad_relerr_mo(&self) -> f64 {
        ((self.quad_mo - self.quad_mo_predicted) / self.quad_mo_predicted).abs()
    }
}

/// Relative level below which a cubic remainder counts as round-off.
pub const ROUNDING_FLOOR: f64 = 1e4 * f64::EPSILON;

/// `½⟨Ω_⊥(I_S) z_⊥, z_⊥⟩ = Σ_{n>0} Ω_n |z_n|²` and `Σ_{n>0} |z_n|²` for `z_⊥ = y`.
pub fn quadratic_forms(cfg: &CorrectorConfig, gaps: &[f64], y: &[f64]) -> (f64, f64) {
    let f = frequencies(gaps, cfg.mz);
    let (mut bo, mut mo) = (0.0, 0.0);
    for (i, n) in perp_modes(cfg).into_iter().enumerate() {
        let a = y[2 * i].powi(2) + y[2 * i + 1].powi(2);
        bo += f.big_omega(n as i64) * a;
        mo += a;
    }
    (bo, mo)
}

/// `H(ε) = H(Ψ(z_S, ε dir))` for `ε ∈ ±eps`; the ε² coefficient comes from
/// symmetric differences with one Richardson step on the two smallest ε.
pub fn normal_form_check(cfg: &CorrectorConfig, p: &[f64], dir: &[f64], eps: &[f64]) -> Result<NormalFormReport> {
    let mut eps = eps.to_vec();
    eps.sort_by(|a, b| b.total_cmp(a));
    if eps.len() < 3 || eps.iter().any(|e| !(*e > 0.0)) {
        return Err(Error::InvalidArgument("need at least three positive ε".into()));
    }
    let b0 = base_data(cfg, p)?;
    let h0 = hamiltonian_physical(&b0.q)?;
    let m0 = moment_physical(&b0.q)?;
    let (qb, qm) = quadratic_forms(cfg, &b0.gaps, dir);
    let signed: Vec<f64> = eps.iter().flat_map(|e| [*e, -*e]).collect();
    let vals = par_map(signed.len(), cfg.jobs, |i| -> Result<(f64, f64)> {
        let point = ChartPoint { p: p.to_vec(), y: dir.iter().map(|v| v * signed[i]).collect() };
        let u = psi(cfg, &point)?;
        Ok((hamiltonian_physical(&u)? - h0, moment_physical(&u)? - m0))
    });
    let vals: Vec<(f64, f64)> = vals.into_iter().collect::<Result<_>>()?;
    let mut rows = Vec::new();
    let mut c2 = Vec::new();
    for (i, e) in eps.iter().enumerate() {
        let (hp, mp) = vals[2 * i];
        let (hm, mm) = vals[2 * i + 1];
        rows.push([*e, hp, hp - e * e * qb, mp, mp - e * e * qm]);
        c2.push(((hp + hm) / (2.0 * e * e), (mp + mm) / (2.0 * e * e)));
    }
    // remainders at the rounding level of H carry no scaling information
    let floors = [ROUNDING_FLOOR * h0.abs().max(rows[0][1].abs()), ROUNDING_FLOOR * m0.abs().max(rows[0][3].abs())];
    let slope = |col: usize| -> Result<f64> {
        let pts: Vec<(f64, f64)> = rows.iter().filter(|r| r[col].abs() > floors[col / 2 - 1]).map(|r| (r[0], r[col].abs())).collect();
        match pts.len() {
            0 => Ok(f64::INFINITY),
            1 => Err(Error::InvalidArgument("cubic remainder resolved at a single ε only".into())),
            _ => fit_slope(&pts),
        }
    };
    let n = c2.len();
    let ratio = (eps[n - 2] / eps[n - 1]).powi(2);
    let rich = |a: f64, b: f64| (ratio * b - a) / (ratio - 1.0);
    Ok(NormalFormReport {
        cubic_slope_bo: slope(2)?,
        cubic_slope_mo: slope(4)?,
        quad_bo: rich(c2[n - 2].0, c2[n - 1].0),
        quad_bo_predicted: qb,
        quad_mo: rich(c2[n - 2].1, c2[n - 1].1),
        quad_mo_predicted: qm,
        rows,
    })
}

/// Leading-symbol probe of `Ψ_C`: compares `Ψ_C(z)_⊥ - z_⊥` with
/// `F^+[a_0^+ (F^+)^{-1} z_⊥] + c.c.`, `a_0^+ = e^{α^+} - 1`.
#[derive(Clone, Debug)]
pub struct LeadingSymbolProbe {
    pub alpha_plus: FourierSeries,
    /// `max_x |Re α^+|`; `a_0^+` is purely imaginary to leading order.
    pub alpha_real_part: f64,
    /// `‖Ψ_C(z)_⊥ - z_⊥‖` over the upper half of the modes.
    pub shift_high: f64,
    /// `‖Ψ_C(z)_⊥ - z_⊥ - OP_0‖` over the same modes.
    pub residual_high: f64,
}

pub fn leading_symbol_probe(cfg: &CorrectorConfig, z: &ChartPoint) -> Result<LeadingSymbolProbe> {
    let fr = flow(cfg, 0.0, 1.0, z, cfg.steps, true)?;
    let alpha = fr.alpha_plus.expect("tracked");
    let real_part = alpha.coeffs().iter().map(|c| c.re.abs()).fold(0.0, f64::max);
    let p = crate::spectral::fft_len(4 * cfg.m_w + 1);
    let a_grid: Vec<C64> = alpha.to_grid(p)?.into_iter().map(|a| a.exp() - 1.0).collect();
    let ns = cfg.n_gaps as i64;
    let mut zplus = FourierSeries::zeros(cfg.mz);
    for (i, n) in perp_modes(cfg).into_iter().enumerate() {
        zplus.set(n as i64, C64::new(z.y[2 * i], z.y[2 * i + 1]));
    }
    let zg = zplus.to_grid(p)?;
    let prod: Vec<C64> = a_grid.iter().zip(&zg).map(|(a, b)| a * b).collect();
    let op = crate::spectral::grid_transform(&prod, cfg.mz)?;
    let half = (cfg.n_gaps + 1 + cfg.mz) / 2;
    let (mut s, mut r) = (0.0, 0.0);
    for (i, n) in perp_modes(cfg).into_iter().enumerate() {
        if n < half || (n as i64) <= ns {
            continue;
        }
        let d = C64::new(fr.point.y[2 * i] - z.y[2 * i], fr.point.y[2 * i + 1] - z.y[2 * i + 1]);
        s += d.norm_sqr();
        r += (d - op.coeff(n as i64)).norm_sqr();
    }
    Ok(LeadingSymbolProbe { alpha_plus: alpha, alpha_real_part: real_part, shift_high: s.sqrt(), residual_high: r.sqrt() })
}

/// Random `z_⊥` direction with `‖z_⊥‖_0 = norm` and `|z_n| ∝ n^{-decay}`.
pub fn random_perp(cfg: &CorrectorConfig, norm: f64, decay: f64, seed: u64) -> Vec<f64> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut y: Vec<f64> = perp_modes(cfg)
        .into_iter()
        .flat_map(|n| {
            let w = (n as f64).powf(-decay);
            [w * (rng.random::<f64>() * 2.0 - 1.0), w * (rng.random::<f64>() * 2.0 - 1.0)]
        })
        .collect();
    let s = norm / perp_norm(&y);
    for v in &mut y {
        *v *= s;
    }
    y
}

/// Summary written by the corrector-check job.
#[derive(Clone, Debug, serde::Serialize)]
pub struct CorrectorReport {
    pub radius: f64,
    pub steps: usize,
    pub max_symplectic_defect: f64,
    pub cubic_slope: f64,
    pub quad_coeff_relerr: f64,
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn standard_form_matches_poisson_tensor() {
        let m = [1, 2, 5];
        let prod = omega0(&m) * j_real(&m);
        assert!((prod - DMatrix::identity(6, 6) * 2.0).amax() < 1e-15);
    }

    #[test]
    fn lambda_g_is_antisymmetric() {
        let u = FourierSeries::from_fn(6, |k| C64::new(0.1 * k as f64, 0.05 * (k * k) as f64)).symmetrized();
        let v = FourierSeries::from_fn(6, |k| C64::new(0.3 / (1 + k.abs()) as f64, 0.02 * k as f64)).symmetrized();
        assert!((lambda_g(&u, &v) + lambda_g(&v, &u)).abs() < 1e-15);
        assert_eq!(lambda_g(&u, &u).abs() < 1e-15, true);
    }

    #[test]
    fn chart_reversal_is_an_involution() {
        let z = ChartPoint { p: vec![0.3, 0.2, 0.5, -1.0], y: vec![0.1, 0.2, -0.3, 0.4] };
        assert_eq!(z.s_rev().s_rev(), z);
        assert!((z.perp_norm() - (2.0f64 * 0.3).sqrt()).abs() < 1e-15);
    }
}
