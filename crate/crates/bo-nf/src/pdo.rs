//! Admissible cutoffs, paraproducts, the Bony remainder, expansions of
//! `∂_x^{-k} ∘ a ∂_x^{-ℓ}` and Hankel operators.

use std::collections::BTreeMap;

use crate::error::{Error, Result};
use crate::linearized::fit_slope;
use crate::spectral::{deriv, FourierSeries, HardyVector, Side, SobolevIndex, C64};

/// `ψ = 1` on `[0, ε1]`, `ψ = 0` on `[ε2, ∞)`, smooth in between;
/// `χ(k, n) = ψ(|k| / (1 + |n|))`.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct CutoffProfile {
    pub eps1: f64,
    pub eps2: f64,
}

impl Default for CutoffProfile {
    fn default() -> Self {
        Self { eps1: 0.25, eps2: 0.5 }
    }
}

fn bump_tail(t: f64) -> f64 {
    if t > 0.0 {
        (-1.0 / t).exp()
    } else {
        0.0
    }
}

impl CutoffProfile {
    pub fn new(eps1: f64, eps2: f64) -> Result<Self> {
        if !(0.0 < eps1 && eps1 < eps2 && eps2 < 1.0) {
            return Err(Error::InvalidArgument(format!("cutoff needs 0 < ε1 < ε2 < 1, got ({eps1}, {eps2})")));
        }
        Ok(Self { eps1, eps2 })
    }

    pub fn psi(&self, t: f64) -> f64 {
        let s = (t - self.eps1) / (self.eps2 - self.eps1);
        let (a, b) = (bump_tail(1.0 - s), bump_tail(s));
        a / (a + b)
    }

    pub fn chi(&self, k: i64, n: i64) -> f64 {
        self.psi(k.unsigned_abs() as f64 / (1.0 + n.unsigned_abs() as f64))
    }
}

/// Weighted double sum `Σ_{k,n} w(k, n) a_k u_n e^{i(k+n)x}` truncated at `m_out`.
fn weighted_product(a: &FourierSeries, u: &FourierSeries, m_out: usize, w: impl Fn(i64, i64) -> f64) -> FourierSeries {
    let mut out = FourierSeries::zeros(m_out);
    let (ma, mu, mo) = (a.m() as i64, u.m() as i64, m_out as i64);
    for k in -ma..=ma {
        let ak = a.coeff(k);
        if ak == C64::new(0.0, 0.0) {
            continue;
        }
        for n in (-mu).max(-mo - k)..=mu.min(mo - k) {
            let wk = w(k, n);
            if wk != 0.0 {
                let j = k + n;
                out.set(j, out.coeff(j) + ak * u.coeff(n) * wk);
            }
        }
    }
    out
}

/// `(T_a u)(x) = Σ χ(k, n) a_k u_n e^{i(k+n)x}`.
pub fn paraproduct(a: &FourierSeries, u: &FourierSeries, cut: &CutoffProfile, m_out: usize) -> FourierSeries {
    weighted_product(a, u, m_out, |k, n| cut.chi(k, n))
}

/// `R^{(B)}(a, b) = ab - T_a b - T_b a`, summed directly with weights `1 - χ(k, n) - χ(n, k)`.
pub fn bony_remainder(a: &FourierSeries, b: &FourierSeries, cut: &CutoffProfile, m_out: usize) -> FourierSeries {
    weighted_product(a, b, m_out, |k, n| 1.0 - cut.chi(k, n) - cut.chi(n, k))
}

/// Mean-zero projection `Π_0`.
pub fn project_mean_zero(u: &FourierSeries) -> FourierSeries {
    let mut v = u.clone();
    v.set(0, C64::new(0.0, 0.0));
    v
}

/// `Σ_{j <= N-k-ℓ} C_j(k, ℓ) (∂_x^j a) ∂_x^{-k-ℓ-j}` with the remainder of order `N + 1`.
#[derive(Clone, Debug, PartialEq)]
pub struct PdoExpansion {
    pub k: u32,
    pub l: u32,
    pub n: u32,
    /// `C_j(k, ℓ)`, `j = 0..=N-k-ℓ`.
    pub consts: Vec<f64>,
}

/// Constants of `∂_x^{-k} ∘ a ∂_x^{-ℓ}` obtained by applying the one-step
/// rule `∂_x^{-1}(b g) = Σ_i (-1)^i (∂_x^i b) ∂_x^{-1-i} g` (mean-zero `g`)
/// `k` times to the term `a ∂_x^{-ℓ}`.
pub fn pdo_compose(k: u32, l: u32, n: u32) -> Result<PdoExpansion> {
    if n < k + l {
        return Err(Error::InvalidArgument(format!("N = {n} must be >= k + ℓ = {}", k + l)));
    }
    let jmax = (n - k - l) as usize;
    // derivative order j on a -> coefficient; the power of ∂^{-1} is always k + ℓ + j
    let mut terms: BTreeMap<usize, f64> = BTreeMap::from([(0, 1.0)]);
    for _ in 0..k {
        let mut next = BTreeMap::new();
        for (&j, &c) in &terms {
            for i in 0..=(jmax - j) {
                let sign = if i % 2 == 0 { 1.0 } else { -1.0 };
                *next.entry(j + i).or_insert(0.0) += sign * c;
            }
        }
        terms = next;
    }
    let consts = (0..=jmax).map(|j| terms.get(&j).copied().unwrap_or(0.0)).collect();
    Ok(PdoExpansion { k, l, n, consts })
}

/// `∂_x^{-k}` with the zero mode removed.
fn inv_deriv(h: &FourierSeries, k: u32) -> FourierSeries {
    if k == 0 {
        h.clone()
    } else {
        deriv(h, -(k as i32))
    }
}

impl PdoExpansion {
    /// Truncated expansion applied to `h`, followed by `Π_0`; `m_out` bounds the products.
    pub fn apply_terms(&self, a: &FourierSeries, h: &FourierSeries, m_out: usize) -> FourierSeries {
        let mut acc = FourierSeries::zeros(m_out);
        for (j, c) in self.consts.iter().enumerate() {
            let t = deriv(a, j as i32).product(&inv_deriv(h, self.k + self.l + j as u32), m_out);
            acc = acc.axpy(C64::new(*c, 0.0), &t);
        }
        if self.k > 0 {
            project_mean_zero(&acc)
        } else {
            acc
        }
    }

    /// `∂_x^{-k}(a ∂_x^{-ℓ} h)` evaluated exactly on band-limited inputs.
    pub fn apply_exact(&self, a: &FourierSeries, h: &FourierSeries, m_out: usize) -> FourierSeries {
        inv_deriv(&a.product(&inv_deriv(h, self.l), m_out), self.k)
    }

    /// Remainder as the difference between the exact operator and the truncated expansion.
    pub fn remainder(&self, a: &FourierSeries, h: &FourierSeries, m_out: usize) -> FourierSeries {
        self.apply_exact(a, h, m_out).sub(&self.apply_terms(a, h, m_out)).expect("same truncation")
    }
}

/// Closed remainder of the `(k, ℓ) = (1, 0)` case:
/// `(-1)^N ∂_x^{-1}[(∂_x^N a) ∂_x^{-N} h] + (∂_x^{-1} a)⟨h|1⟩`.
pub fn remainder_1_0(a: &FourierSeries, h: &FourierSeries, n: u32, m_out: usize) -> Result<FourierSeries> {
    if n < 1 {
        return Err(Error::InvalidArgument("N must be >= 1".into()));
    }
    let sign = if n % 2 == 0 { 1.0 } else { -1.0 };
    let inner = deriv(a, n as i32).product(&inv_deriv(h, n), m_out);
    let first = inv_deriv(&inner, 1).scale(C64::new(sign, 0.0));
    let second = inv_deriv(a, 1).resized(m_out).scale(h.coeff(0));
    first.add(&second)
}

/// Slope of `‖remainder‖` against `n` for `h = e^{inx}` over `ns`.
pub fn mode_separation_slope(e: &PdoExpansion, a: &FourierSeries, ns: &[i64], m_out: usize) -> Result<(f64, Vec<(i64, f64)>)> {
    let pts: Vec<(i64, f64)> = ns
        .iter()
        .map(|&n| {
            let h = FourierSeries::mode(m_out, n, C64::new(1.0, 0.0));
            (n, e.remainder(a, &h, m_out).norm())
        })
        .collect();
    let slope = fit_slope(&pts.iter().map(|&(n, v)| (n as f64, v)).collect::<Vec<_>>())?;
    Ok((slope, pts))
}

/// `H_u^± f = Π^±(u f)` for `f` in the opposite Hardy space; `m_out` bounds the result.
pub fn hankel_apply(u: &FourierSeries, side: Side, f: &HardyVector, m_out: usize) -> Result<HardyVector> {
    if f.side == side {
        return Err(Error::InvalidArgument("Hankel operator needs f in the opposite Hardy space".into()));
    }
    let s = side.sign();
    let fm = f.m() as i64;
    let coeffs = (0..=m_out as i64)
        .map(|j| (0..=fm).map(|p| u.coeff(s * j + s * p) * f.coeff(p as usize)).sum())
        .collect();
    Ok(HardyVector::new(side, coeffs))
}

/// One row of a Hankel smoothing sweep.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct HankelRow {
    pub p: usize,
    pub s: f64,
    pub measured_norm: f64,
}

/// `‖H_u^± e^{∓ipx}‖_{s}` for `p` in `ps`.
pub fn hankel_sweep(u: &FourierSeries, side: Side, s: SobolevIndex, ps: &[usize]) -> Result<Vec<HankelRow>> {
    let other = if side == Side::Plus { Side::Minus } else { Side::Plus };
    ps.iter()
        .map(|&p| {
            let mut c = vec![C64::new(0.0, 0.0); p + 1];
            c[p] = C64::new(1.0, 0.0);
            let h = hankel_apply(u, side, &HardyVector::new(other, c), u.m())?;
            let norm = h.coeffs.iter().enumerate().map(|(j, c)| (s.weight(j as i64) * c.norm()).powi(2)).sum::<f64>().sqrt();
            Ok(HankelRow { p, s: s.s, measured_norm: norm })
        })
        .collect()
}
