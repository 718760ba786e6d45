//! Closed-form finite-gap potentials, `g_∞ = e^{i∂_x^{-1}q}`, and numerical
//! inversion of the Birkhoff map on the finite-gap manifold.

use std::f64::consts::PI;

use nalgebra::{DMatrix, DVector};
use serde::{Deserialize, Serialize};

use crate::birkhoff::{zetas, ActionAngleState};
use crate::error::{Error, Result};
use crate::lax::LaxSpectrum;
use crate::spectral::{apply_multiplier, deriv_symbol, pointwise, FourierSeries, C64};

/// Minimal distance of every `r_j` from 0 and 1.
pub const R_MARGIN: f64 = 1e-6;

/// Moduli `(r_j, α_j)`, `j = 1..N`, of
/// `u(x) = Σ_j [(1 - r_j²)/(1 - 2 r_j cos(x + α_j) + r_j²) - 1]`.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct FiniteGapParams {
    pub r: Vec<f64>,
    pub alpha: Vec<f64>,
}

impl FiniteGapParams {
    pub fn new(r: Vec<f64>, alpha: Vec<f64>) -> Result<Self> {
        let p = Self { r, alpha };
        p.validate()?;
        Ok(p)
    }

    pub fn one_gap(r: f64, alpha: f64) -> Result<Self> {
        Self::new(vec![r], vec![alpha])
    }

    pub fn n(&self) -> usize {
        self.r.len()
    }

    pub fn validate(&self) -> Result<()> {
        if self.r.len() != self.alpha.len() || self.r.is_empty() {
            return Err(Error::InvalidArgument("r and alpha must be nonempty and of equal length".into()));
        }
        for &r in &self.r {
            if !(r >= R_MARGIN && r <= 1.0 - R_MARGIN) {
                return Err(Error::InvalidArgument(format!("r = {r} outside (0, 1) with margin {R_MARGIN:e}")));
            }
        }
        Ok(())
    }

    /// Flat vector `(r_1..r_N, α_1..α_N)`.
    pub fn to_vec(&self) -> Vec<f64> {
        self.r.iter().chain(&self.alpha).copied().collect()
    }

    pub fn from_vec(v: &[f64]) -> Result<Self> {
        let n = v.len() / 2;
        Self::new(v[..n].to_vec(), v[n..].to_vec())
    }

    /// Parameters of `u(-x)`: `α ↦ -α`.
    pub fn reversed(&self) -> Self {
        Self { r: self.r.clone(), alpha: self.alpha.iter().map(|a| -a).collect() }
    }

    pub fn from_json(s: &str) -> Result<Self> {
        let p: Self = serde_json::from_str(s)?;
        p.validate()?;
        Ok(p)
    }
}

/// `û(m) = Σ_j r_j^{|m|} e^{imα_j}` for `m ≠ 0`, `û(0) = 0`.
pub fn build_potential(p: &FiniteGapParams, m: usize) -> Result<FourierSeries> {
    p.validate()?;
    Ok(build_unchecked(&p.r, &p.alpha, m))
}

fn build_unchecked(r: &[f64], alpha: &[f64], m: usize) -> FourierSeries {
    FourierSeries::from_fn(m, |k| {
        if k == 0 {
            return C64::new(0.0, 0.0);
        }
        r.iter().zip(alpha).map(|(&r, &a)| C64::from_polar(r.powi(k.abs() as i32), k as f64 * a)).sum()
    })
    .symmetrized()
}

/// Derivative of the coefficients with respect to the flat parameter `j`.
pub fn potential_derivative(p: &FiniteGapParams, j: usize, m: usize) -> FourierSeries {
    let n = p.n();
    let (idx, wrt_r) = if j < n { (j, true) } else { (j - n, false) };
    let (r, a) = (p.r[idx], p.alpha[idx]);
    FourierSeries::from_fn(m, |k| {
        if k == 0 {
            return C64::new(0.0, 0.0);
        }
        let ak = k.abs() as i32;
        let e = C64::from_polar(1.0, k as f64 * a);
        if wrt_r {
            e * (ak as f64) * r.powi(ak - 1)
        } else {
            e * C64::new(0.0, k as f64) * r.powi(ak)
        }
    })
    .symmetrized()
}

/// Closed-form point value of the potential.
pub fn potential_value(p: &FiniteGapParams, x: f64) -> f64 {
    p.r.iter()
        .zip(&p.alpha)
        .map(|(&r, &a)| (1.0 - r * r) / (1.0 - 2.0 * r * (x + a).cos() + r * r) - 1.0)
        .sum()
}

/// `g_∞ = e^{i ∂_x^{-1} q}` sampled on `2 m_out + 1` points, so that the
/// returned series reproduces unimodular grid values exactly.
pub fn g_infinity(q: &FourierSeries, m_out: usize) -> Result<FourierSeries> {
    q.require_real_mean_zero()?;
    let m_out = m_out.max(q.m());
    let phase = apply_multiplier(q, deriv_symbol(-1));
    pointwise(&phase, 2 * m_out + 1, m_out, |v| C64::from_polar(1.0, v.re))
}

/// One-gap closed form `g_∞ = (1 - r e^{-iy})/(1 - r e^{iy})`, `y = x + α`.
pub fn g_infinity_one_gap(r: f64, alpha: f64, x: f64) -> C64 {
    let e = C64::from_polar(1.0, x + alpha);
    (1.0 - r * e.conj()) / (1.0 - r * e)
}

/// `γ_1` of the one-gap potential with modulus `r`.
pub fn one_gap_gamma(r: f64) -> f64 {
    r * r / (1.0 - r * r)
}

/// Inverse of [`one_gap_gamma`].
pub fn one_gap_radius(gamma: f64) -> f64 {
    (gamma / (1.0 + gamma)).sqrt()
}

/// Settings of the Gauss–Newton inversion.
#[derive(Clone, Debug)]
pub struct InverterConfig {
    pub k: usize,
    pub m: usize,
    pub max_iter: usize,
    pub tol: f64,
    pub fd_step: f64,
}

impl Default for InverterConfig {
    fn default() -> Self {
        Self { k: 64, m: 64, max_iter: 60, tol: 1e-9, fd_step: 1e-6 }
    }
}

/// Result of [`invert_psi_s`].
#[derive(Clone, Debug)]
pub struct Inversion {
    pub params: FiniteGapParams,
    pub residual: f64,
    pub iterations: usize,
}

/// Seed from the small-amplitude relation `z_n ≈ -Σ_j ξ_j^n`,
/// `ξ_j = r_j e^{iα_j}`: the `ξ_j` are the roots of the polynomial whose
/// power sums are `-z_1..-z_N` (Newton identities). For `N = 1` the exact
/// one-gap relation `γ_1 = r²/(1 - r²)`, `θ_1 = α_1 + π` is used.
pub fn seed_params(target: &ActionAngleState) -> Result<FiniteGapParams> {
    let n = target.s_plus.len();
    if n == 0 {
        return Err(Error::InvalidArgument("empty S_+".into()));
    }
    if n == 1 {
        let r = one_gap_radius(target.actions[0]).clamp(2.0 * R_MARGIN, 1.0 - 2.0 * R_MARGIN);
        return FiniteGapParams::one_gap(r, target.theta[0] - PI);
    }
    let z = target.to_birkhoff();
    let p: Vec<C64> = (1..=n).map(|k| -z.get(k as i64)).collect();
    // elementary symmetric polynomials from power sums
    let mut e = vec![C64::new(1.0, 0.0)];
    for k in 1..=n {
        let mut s = C64::new(0.0, 0.0);
        for i in 1..=k {
            let sign = if i % 2 == 1 { 1.0 } else { -1.0 };
            s += sign * e[k - i] * p[i - 1];
        }
        e.push(s / k as f64);
    }
    // t^n - e1 t^{n-1} + e2 t^{n-2} - ...
    let coeffs: Vec<C64> = (0..=n).map(|k| if k % 2 == 0 { e[k] } else { -e[k] }).collect();
    let roots = durand_kerner(&coeffs);
    let r = roots.iter().map(|x| x.norm().clamp(1e-3, 0.95)).collect();
    let alpha = roots.iter().map(|x| x.arg()).collect();
    FiniteGapParams::new(r, alpha)
}

/// Roots of the monic polynomial `Σ c_k t^{n-k}` (`c_0 = 1`).
fn durand_kerner(c: &[C64]) -> Vec<C64> {
    let n = c.len() - 1;
    let eval = |t: C64| c.iter().fold(C64::new(0.0, 0.0), |acc, &a| acc * t + a);
    let seed = C64::new(0.4, 0.9);
    let mut x: Vec<C64> = (0..n).map(|k| 0.3 * seed.powi(k as i32)).collect();
    for _ in 0..500 {
        let mut delta = 0.0f64;
        for i in 0..n {
            let mut den = C64::new(1.0, 0.0);
            for j in 0..n {
                if i != j {
                    den *= x[i] - x[j];
                }
            }
            let step = eval(x[i]) / den;
            x[i] -= step;
            delta = delta.max(step.norm());
        }
        if delta < 1e-15 {
            break;
        }
    }
    x
}

/// Residual `[γ_n - I_n; wrap(arg ζ_n - θ_n)]` over `S_+`.
fn residual(r: &[f64], alpha: &[f64], target: &ActionAngleState, cfg: &InverterConfig) -> Result<Vec<f64>> {
    let u = build_unchecked(r, alpha, cfg.m);
    let spec = LaxSpectrum::compute(&u, cfg.k)?;
    let nmax = *target.s_plus.iter().max().unwrap_or(&1);
    let z = zetas(&spec, nmax)?;
    let mut out = Vec::with_capacity(2 * target.s_plus.len());
    for (i, &n) in target.s_plus.iter().enumerate() {
        out.push(spec.gap(n) - target.actions[i]);
    }
    for (i, &n) in target.s_plus.iter().enumerate() {
        let d = z[n - 1].arg() - target.theta[i];
        out.push((d + PI).rem_euclid(2.0 * PI) - PI);
    }
    Ok(out)
}

/// Gauss–Newton on the unknowns `(atanh r_j, α_j)`, targeting `z_⊥ = 0`.
pub fn invert_psi_s(target: &ActionAngleState, seed: Option<&FiniteGapParams>, cfg: &InverterConfig) -> Result<Inversion> {
    let n = target.s_plus.len();
    if target.actions.iter().any(|a| !(*a > 0.0)) {
        return Err(Error::InvalidArgument("target actions must be positive".into()));
    }
    let seed = match seed {
        Some(s) => s.clone(),
        None => seed_params(target)?,
    };
    if seed.n() != n {
        return Err(Error::InvalidArgument(format!("seed has N = {} but |S_+| = {n}", seed.n())));
    }
    let mut w: Vec<f64> = seed.r.iter().map(|r| r.atanh()).collect();
    let mut a = seed.alpha.clone();
    let eval = |w: &[f64], a: &[f64]| -> Result<Vec<f64>> {
        let r: Vec<f64> = w.iter().map(|v| v.tanh()).collect();
        residual(&r, a, target, cfg)
    };
    let norm = |v: &[f64]| v.iter().map(|x| x * x).sum::<f64>().sqrt();
    let mut res = eval(&w, &a)?;
    let mut best = norm(&res);
    let mut mu = 1e-8;
    for it in 0..cfg.max_iter {
        if best <= cfg.tol {
            return finish(&w, &a, best, it);
        }
        let mut jac = DMatrix::zeros(2 * n, 2 * n);
        for j in 0..2 * n {
            let (mut wp, mut ap) = (w.clone(), a.clone());
            let (mut wm, mut am) = (w.clone(), a.clone());
            if j < n {
                wp[j] += cfg.fd_step;
                wm[j] -= cfg.fd_step;
            } else {
                ap[j - n] += cfg.fd_step;
                am[j - n] -= cfg.fd_step;
            }
            let rp = eval(&wp, &ap)?;
            let rm = eval(&wm, &am)?;
            for i in 0..2 * n {
                jac[(i, j)] = (rp[i] - rm[i]) / (2.0 * cfg.fd_step);
            }
        }
        let sv = jac.clone().svd(false, false).singular_values;
        let smin = sv.iter().copied().fold(f64::INFINITY, f64::min);
        if smin < 1e-12 * sv.iter().copied().fold(0.0, f64::max).max(1.0) {
            return Err(Error::RankDeficient { sigma: smin });
        }
        let jt = jac.transpose();
        let rhs = -(&jt * DVector::from_vec(res.clone()));
        let mut accepted = false;
        for _ in 0..12 {
            let lhs = &jt * &jac + DMatrix::identity(2 * n, 2 * n) * mu;
            let Some(step) = lhs.lu().solve(&rhs) else {
                mu *= 10.0;
                continue;
            };
            let wn: Vec<f64> = (0..n).map(|i| w[i] + step[i]).collect();
            let an: Vec<f64> = (0..n).map(|i| a[i] + step[n + i]).collect();
            if let Ok(rn) = eval(&wn, &an) {
                let nn = norm(&rn);
                if nn < best {
                    w = wn;
                    a = an;
                    res = rn;
                    best = nn;
                    mu = (mu * 0.1).max(1e-14);
                    accepted = true;
                    break;
                }
            }
            mu *= 10.0;
        }
        if !accepted {
            if best <= cfg.tol {
                return finish(&w, &a, best, it);
            }
            return Err(Error::NonConvergence { iterations: it + 1, residual: best });
        }
    }
    if best <= cfg.tol {
        return finish(&w, &a, best, cfg.max_iter);
    }
    Err(Error::NonConvergence { iterations: cfg.max_iter, residual: best })
}

/// Map back to `r > 0`: a negative `tanh` value is the same potential with `α + π`.
fn finish(w: &[f64], a: &[f64], residual: f64, iterations: usize) -> Result<Inversion> {
    let mut r = Vec::new();
    let mut alpha = Vec::new();
    for (&wi, &ai) in w.iter().zip(a) {
        let t = wi.tanh();
        let (rr, aa) = if t < 0.0 { (-t, ai + PI) } else { (t, ai) };
        r.push(rr);
        alpha.push(aa.rem_euclid(2.0 * PI));
    }
    Ok(Inversion { params: FiniteGapParams::new(r, alpha)?, residual, iterations })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn coefficients_of_one_gap() {
        let p = FiniteGapParams::one_gap(0.5, 0.0).unwrap();
        let u = build_potential(&p, 30).unwrap();
        assert_eq!(u.coeff(0), C64::new(0.0, 0.0));
        for m in 1..=30i64 {
            assert!((u.coeff(m).re - 0.5f64.powi(m as i32)).abs() < 1e-15);
            assert!((u.coeff(-m).re - 0.5f64.powi(m as i32)).abs() < 1e-15);
        }
    }

    #[test]
    fn rejects_out_of_range() {
        assert!(FiniteGapParams::one_gap(1.0, 0.0).is_err());
        assert!(FiniteGapParams::one_gap(0.0, 0.0).is_err());
        assert!(FiniteGapParams::new(vec![0.2], vec![]).is_err());
    }

    #[test]
    fn g_infinity_of_zero_is_one() {
        let g = g_infinity(&FourierSeries::zeros(8), 8).unwrap();
        assert!((g.coeff(0) - C64::new(1.0, 0.0)).norm() < 1e-15);
        assert!(g.sub(&FourierSeries::mode(8, 0, C64::new(1.0, 0.0))).unwrap().norm() < 1e-15);
    }

    #[test]
    fn analytic_parameter_derivative() {
        let p = FiniteGapParams::new(vec![0.4, 0.2], vec![0.3, 1.1]).unwrap();
        let h = 1e-6;
        for j in 0..4 {
            let mut v = p.to_vec();
            v[j] += h;
            let up = build_potential(&FiniteGapParams::from_vec(&v).unwrap(), 20).unwrap();
            v[j] -= 2.0 * h;
            let um = build_potential(&FiniteGapParams::from_vec(&v).unwrap(), 20).unwrap();
            let fd = up.sub(&um).unwrap().scale(C64::new(0.5 / h, 0.0));
            assert!(fd.sub(&potential_derivative(&p, j, 20)).unwrap().norm() < 1e-8);
        }
    }
}
