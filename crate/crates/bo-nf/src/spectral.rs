//! Fourier-side foundation: truncated series on `|n| <= M`, grid transforms,
//! inner products with the `1/(2π)` normalization, multipliers, Szegő
//! projections and the partial Fourier transforms over `S^⊥`.
//!
//! Coefficients follow `q_n = (1/2π) ∫ q(x) e^{-inx} dx` and the grid is
//! `x_j = 2πj/P`.

use std::cell::RefCell;
use std::collections::BTreeMap;
use std::sync::Arc;

use num_complex::Complex64;
use rustfft::{Fft, FftPlanner};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

pub type C64 = Complex64;

/// Pairing defect below which a series counts as real.
pub const REALITY_TOL: f64 = 1e-12;

thread_local! {
    static PLANNER: RefCell<FftPlanner<f64>> = RefCell::new(FftPlanner::new());
}

fn plan(len: usize, inverse: bool) -> Arc<dyn Fft<f64>> {
    PLANNER.with(|p| {
        let mut p = p.borrow_mut();
        if inverse {
            p.plan_fft_inverse(len)
        } else {
            p.plan_fft_forward(len)
        }
    })
}

/// Sign selector for Hardy-space objects and one-sided transforms.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub enum Side {
    Plus,
    Minus,
}

impl Side {
    pub fn sign(self) -> i64 {
        match self {
            Side::Plus => 1,
            Side::Minus => -1,
        }
    }
}

/// Sobolev exponent with the weight `⟨n⟩ = max(1, |n|)`.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct SobolevIndex {
    pub s: f64,
}

impl SobolevIndex {
    pub fn new(s: f64) -> Result<Self> {
        if !(s >= 0.0) {
            return Err(Error::InvalidArgument(format!("Sobolev index must be >= 0, got {s}")));
        }
        Ok(Self { s })
    }

    pub fn weight(&self, n: i64) -> f64 {
        (n.unsigned_abs().max(1) as f64).powf(self.s)
    }
}

/// Truncated Fourier series `Σ_{|n|<=M} c_n e^{inx}`.
#[derive(Clone, Debug, PartialEq)]
pub struct FourierSeries {
    m: usize,
    coeffs: Vec<C64>,
    is_real: bool,
    is_mean_zero: bool,
}

#[derive(Serialize, Deserialize)]
struct SeriesJson {
    #[serde(rename = "M")]
    m: usize,
    re: Vec<f64>,
    im: Vec<f64>,
    is_real: bool,
}

impl FourierSeries {
    pub fn zeros(m: usize) -> Self {
        Self { m, coeffs: vec![C64::new(0.0, 0.0); 2 * m + 1], is_real: true, is_mean_zero: true }
    }

    /// Build from coefficients ordered `-M..=M`; flags are detected from the data.
    pub fn from_coeffs(m: usize, coeffs: Vec<C64>) -> Result<Self> {
        if coeffs.len() != 2 * m + 1 {
            return Err(Error::LengthMismatch { expected: 2 * m + 1, got: coeffs.len() });
        }
        let mut s = Self { m, coeffs, is_real: false, is_mean_zero: false };
        s.refresh_flags();
        Ok(s)
    }

    /// Single mode `c e^{inx}` at truncation `m`.
    pub fn mode(m: usize, n: i64, c: C64) -> Self {
        let mut s = Self::zeros(m);
        s.set(n, c);
        s
    }

    /// Build from a coefficient function evaluated at every `|n| <= m`.
    pub fn from_fn(m: usize, f: impl Fn(i64) -> C64) -> Self {
        let mi = m as i64;
        let coeffs = (-mi..=mi).map(f).collect();
        let mut s = Self { m, coeffs, is_real: false, is_mean_zero: false };
        s.refresh_flags();
        s
    }

    fn refresh_flags(&mut self) {
        self.is_mean_zero = self.coeffs[self.m] == C64::new(0.0, 0.0);
        self.is_real = self.reality_defect() <= REALITY_TOL * self.max_abs().max(1.0);
    }

    /// `max_n |c_{-n} - conj(c_n)|`.
    pub fn reality_defect(&self) -> f64 {
        let mi = self.m as i64;
        (0..=mi).map(|n| (self.coeff(-n) - self.coeff(n).conj()).norm()).fold(0.0, f64::max)
    }

    pub fn max_abs(&self) -> f64 {
        self.coeffs.iter().map(|c| c.norm()).fold(0.0, f64::max)
    }

    pub fn m(&self) -> usize {
        self.m
    }

    pub fn is_real(&self) -> bool {
        self.is_real
    }

    pub fn is_mean_zero(&self) -> bool {
        self.is_mean_zero
    }

    pub fn coeffs(&self) -> &[C64] {
        &self.coeffs
    }

    /// Coefficient `c_n`; zero outside the truncation.
    pub fn coeff(&self, n: i64) -> C64 {
        if n.unsigned_abs() as usize > self.m {
            C64::new(0.0, 0.0)
        } else {
            self.coeffs[(n + self.m as i64) as usize]
        }
    }

    /// Set `c_n`; indices outside the truncation are ignored.
    pub fn set(&mut self, n: i64, c: C64) {
        if n.unsigned_abs() as usize <= self.m {
            self.coeffs[(n + self.m as i64) as usize] = c;
            self.refresh_flags();
        }
    }

    pub fn map_coeffs(&self, f: impl Fn(i64, C64) -> C64) -> Self {
        let mi = self.m as i64;
        Self::from_fn(self.m, |n| f(n, self.coeffs[(n + mi) as usize]))
    }

    /// Pad with zeros or truncate to a new `M`.
    pub fn resized(&self, m: usize) -> Self {
        Self::from_fn(m, |n| self.coeff(n))
    }

    /// Force `c_{-n} = conj(c_n)` by averaging the two sides.
    pub fn symmetrized(&self) -> Self {
        let mut out = self.map_coeffs(|n, _| 0.5 * (self.coeff(n) + self.coeff(-n).conj()));
        out.coeffs[out.m].im = 0.0;
        out.refresh_flags();
        out
    }

    /// Pointwise complex conjugate: `c_n ↦ conj(c_{-n})`.
    pub fn conj(&self) -> Self {
        self.map_coeffs(|n, _| self.coeff(-n).conj())
    }

    /// Space reversal `u(x) ↦ u(-x)`: `c_n ↦ c_{-n}`.
    pub fn reflect(&self) -> Self {
        self.map_coeffs(|n, _| self.coeff(-n))
    }

    /// Multiply by `e^{ikx}` (shift of the coefficient index, truncated).
    pub fn shift(&self, k: i64) -> Self {
        self.map_coeffs(|n, _| self.coeff(n - k))
    }

    pub fn scale(&self, a: C64) -> Self {
        self.map_coeffs(|_, c| a * c)
    }

    pub fn add(&self, other: &Self) -> Result<Self> {
        check_same(self.m, other.m)?;
        Ok(self.map_coeffs(|n, c| c + other.coeff(n)))
    }

    pub fn sub(&self, other: &Self) -> Result<Self> {
        check_same(self.m, other.m)?;
        Ok(self.map_coeffs(|n, c| c - other.coeff(n)))
    }

    /// `self + a * other` with truncations allowed to differ (result keeps `self.m`).
    pub fn axpy(&self, a: C64, other: &Self) -> Self {
        self.map_coeffs(|n, c| c + a * other.coeff(n))
    }

    /// Plain L² norm `(Σ |c_n|²)^{1/2}` under the `1/(2π)` convention.
    pub fn norm(&self) -> f64 {
        self.coeffs.iter().map(|c| c.norm_sqr()).sum::<f64>().sqrt()
    }

    pub fn sobolev_norm(&self, s: SobolevIndex) -> f64 {
        let mi = self.m as i64;
        (-mi..=mi)
            .map(|n| s.weight(n).powi(2) * self.coeff(n).norm_sqr())
            .sum::<f64>()
            .sqrt()
    }

    /// Values on `p >= 2M+1` uniform points `x_j = 2πj/p`.
    pub fn to_grid(&self, p: usize) -> Result<Vec<C64>> {
        if p < 2 * self.m + 1 {
            return Err(Error::LengthMismatch { expected: 2 * self.m + 1, got: p });
        }
        let mut buf = vec![C64::new(0.0, 0.0); p];
        let mi = self.m as i64;
        for n in -mi..=mi {
            buf[n.rem_euclid(p as i64) as usize] += self.coeff(n);
        }
        plan(p, true).process(&mut buf);
        Ok(buf)
    }

    /// Real parts of the grid values (for real series).
    pub fn to_real_grid(&self, p: usize) -> Result<Vec<f64>> {
        Ok(self.to_grid(p)?.into_iter().map(|c| c.re).collect())
    }

    /// Evaluate at a single point.
    pub fn eval(&self, x: f64) -> C64 {
        let mi = self.m as i64;
        (-mi..=mi).map(|n| self.coeff(n) * C64::from_polar(1.0, n as f64 * x)).sum()
    }

    /// Exact product truncated to `m_out`; the grid is large enough that no
    /// aliasing reaches the retained band.
    pub fn product(&self, other: &Self, m_out: usize) -> Self {
        let p = fft_len((self.m + other.m + m_out + 1).max(2 * self.m.max(other.m).max(m_out) + 1));
        let a = self.to_grid(p).expect("grid size");
        let b = other.to_grid(p).expect("grid size");
        let prod: Vec<C64> = a.iter().zip(&b).map(|(x, y)| x * y).collect();
        grid_transform(&prod, m_out).expect("grid size")
    }

    pub fn to_json(&self) -> Result<String> {
        let js = SeriesJson {
            m: self.m,
            re: self.coeffs.iter().map(|c| c.re).collect(),
            im: self.coeffs.iter().map(|c| c.im).collect(),
            is_real: self.is_real,
        };
        Ok(serde_json::to_string(&js)?)
    }

    pub fn from_json(s: &str) -> Result<Self> {
        let js: SeriesJson = serde_json::from_str(s)?;
        if js.re.len() != js.im.len() {
            return Err(Error::LengthMismatch { expected: js.re.len(), got: js.im.len() });
        }
        let coeffs = js.re.iter().zip(&js.im).map(|(&r, &i)| C64::new(r, i)).collect();
        let out = Self::from_coeffs(js.m, coeffs)?;
        if js.is_real && !out.is_real {
            return Err(Error::NotReal { defect: out.reality_defect() });
        }
        Ok(out)
    }

    /// Fail unless the series is real and mean-zero.
    pub fn require_real_mean_zero(&self) -> Result<()> {
        if !self.is_real {
            return Err(Error::NotReal { defect: self.reality_defect() });
        }
        if !self.is_mean_zero {
            return Err(Error::NotMeanZero { value: self.coeff(0).norm() });
        }
        Ok(())
    }
}

fn check_same(a: usize, b: usize) -> Result<()> {
    if a != b {
        Err(Error::TruncationMismatch { left: a, right: b })
    } else {
        Ok(())
    }
}

/// Smallest FFT-friendly length `>= n` (products of 2, 3 and 5).
pub fn fft_len(n: usize) -> usize {
    let mut k = n.max(1);
    loop {
        let mut r = k;
        for f in [2, 3, 5] {
            while r % f == 0 {
                r /= f;
            }
        }
        if r == 1 {
            return k;
        }
        k += 1;
    }
}

/// Fourier coefficients `|n| <= m` of uniform samples on `[0, 2π)`.
pub fn grid_transform(samples: &[C64], m: usize) -> Result<FourierSeries> {
    let p = samples.len();
    if p < 2 * m + 1 {
        return Err(Error::LengthMismatch { expected: 2 * m + 1, got: p });
    }
    let mut buf = samples.to_vec();
    plan(p, false).process(&mut buf);
    let inv = 1.0 / p as f64;
    Ok(FourierSeries::from_fn(m, |n| buf[n.rem_euclid(p as i64) as usize] * inv))
}

/// Real-sample variant of [`grid_transform`]; the result is symmetrized so
/// the pairing holds exactly.
pub fn grid_transform_real(samples: &[f64], m: usize) -> Result<FourierSeries> {
    let c: Vec<C64> = samples.iter().map(|&v| C64::new(v, 0.0)).collect();
    Ok(grid_transform(&c, m)?.symmetrized())
}

/// Sample a function on `p` uniform points and transform.
pub fn sample<F: Fn(f64) -> C64>(f: F, p: usize, m: usize) -> Result<FourierSeries> {
    let v: Vec<C64> = (0..p).map(|j| f(std::f64::consts::TAU * j as f64 / p as f64)).collect();
    grid_transform(&v, m)
}

/// Apply a nonlinear pointwise map on a grid of `p` points and truncate to `m_out`.
pub fn pointwise(u: &FourierSeries, p: usize, m_out: usize, f: impl Fn(C64) -> C64) -> Result<FourierSeries> {
    let g: Vec<C64> = u.to_grid(p)?.into_iter().map(f).collect();
    grid_transform(&g, m_out)
}

/// Sesquilinear product `⟨f | g⟩ = (1/2π) ∫ f conj(g) = Σ f_n conj(g_n)`.
pub fn inner_product(f: &FourierSeries, g: &FourierSeries) -> Result<C64> {
    check_same(f.m, g.m)?;
    Ok(f.coeffs.iter().zip(&g.coeffs).map(|(a, b)| a * b.conj()).sum())
}

/// Bilinear pairing `⟨f, g⟩ = (1/2π) ∫ f g = Σ f_n g_{-n}`.
pub fn bilinear_pairing(f: &FourierSeries, g: &FourierSeries) -> Result<C64> {
    check_same(f.m, g.m)?;
    let mi = f.m as i64;
    Ok((-mi..=mi).map(|n| f.coeff(n) * g.coeff(-n)).sum())
}

/// Coefficientwise multiplier `c_n ↦ σ(n) c_n`.
pub fn apply_multiplier(u: &FourierSeries, symbol: impl Fn(i64) -> C64) -> FourierSeries {
    u.map_coeffs(|n, c| symbol(n) * c)
}

/// Symbol of `∂_x^k` for any integer `k`; for `k < 0` the zero mode maps to 0.
pub fn deriv_symbol(k: i32) -> impl Fn(i64) -> C64 {
    move |n| {
        if n == 0 {
            if k == 0 {
                C64::new(1.0, 0.0)
            } else {
                C64::new(0.0, 0.0)
            }
        } else {
            C64::new(0.0, n as f64).powi(k)
        }
    }
}

/// Symbol of `|∂_x|^s`; `|∂_x|^s[1] = 0` for `s ≠ 0`.
pub fn abs_deriv_symbol(s: f64) -> impl Fn(i64) -> C64 {
    move |n| {
        if n == 0 {
            C64::new(if s == 0.0 { 1.0 } else { 0.0 }, 0.0)
        } else {
            C64::new((n.unsigned_abs() as f64).powf(s), 0.0)
        }
    }
}

/// Symbol of `D^k = (-i∂_x)^k`; negative powers kill the zero mode.
pub fn d_symbol(k: i32) -> impl Fn(i64) -> C64 {
    move |n| {
        if n == 0 {
            C64::new(if k == 0 { 1.0 } else { 0.0 }, 0.0)
        } else {
            C64::new(n as f64, 0.0).powi(k)
        }
    }
}

pub fn deriv(u: &FourierSeries, k: i32) -> FourierSeries {
    apply_multiplier(u, deriv_symbol(k))
}

/// Element of a Hardy space: coefficients of the modes `side·n`, `0 <= n <= M`.
#[derive(Clone, Debug, PartialEq)]
pub struct HardyVector {
    pub side: Side,
    pub coeffs: Vec<C64>,
}

impl HardyVector {
    pub fn new(side: Side, coeffs: Vec<C64>) -> Self {
        Self { side, coeffs }
    }

    pub fn m(&self) -> usize {
        self.coeffs.len().saturating_sub(1)
    }

    /// Coefficient of `e^{i·side·k·x}`.
    pub fn coeff(&self, k: usize) -> C64 {
        self.coeffs.get(k).copied().unwrap_or_default()
    }

    pub fn norm(&self) -> f64 {
        self.coeffs.iter().map(|c| c.norm_sqr()).sum::<f64>().sqrt()
    }

    pub fn inner(&self, other: &Self) -> Result<C64> {
        check_same(self.m(), other.m())?;
        Ok(self.coeffs.iter().zip(&other.coeffs).map(|(a, b)| a * b.conj()).sum())
    }

    /// Embed as a full series of truncation `m`.
    pub fn to_series(&self, m: usize) -> FourierSeries {
        let s = self.side.sign();
        FourierSeries::from_fn(m, |n| {
            if n * s >= 0 {
                self.coeff((n * s) as usize)
            } else {
                C64::new(0.0, 0.0)
            }
        })
    }
}

/// Szegő projection onto nonnegative (`Plus`) or nonpositive (`Minus`) modes.
pub fn szego_project(u: &FourierSeries, side: Side) -> HardyVector {
    let s = side.sign();
    HardyVector::new(side, (0..=u.m as i64).map(|k| u.coeff(s * k)).collect())
}

/// Sparse coefficient vector indexed by mode.
pub type SparseModes = BTreeMap<i64, C64>;

/// `F^±_{N_S}`: keep `q_n` for `±n >= N_S + 1`.
pub fn partial_fourier(u: &FourierSeries, side: Side, n_s: usize) -> SparseModes {
    let s = side.sign();
    ((n_s as i64 + 1)..=u.m as i64).map(|k| (s * k, u.coeff(s * k))).collect()
}

/// `(F^±_{N_S})^{-1}`: rebuild `Σ z_n e^{inx}` over the stored indices.
pub fn partial_fourier_inverse(z: &SparseModes, m: usize) -> FourierSeries {
    let mut out = FourierSeries::zeros(m);
    for (&n, &c) in z {
        if n.unsigned_abs() as usize <= m {
            out.coeffs[(n + m as i64) as usize] = c;
        }
    }
    out.refresh_flags();
    out
}

/// Bilinear pairing of two sparse vectors, `Σ a_n b_{-n}`.
pub fn sparse_pairing(a: &SparseModes, b: &SparseModes) -> C64 {
    a.iter().map(|(n, x)| x * b.get(&-n).copied().unwrap_or_default()).sum()
}

#[cfg(test)]
mod tests {
    use super::*;

    fn c(re: f64, im: f64) -> C64 {
        C64::new(re, im)
    }

    #[test]
    fn cosine_has_two_half_modes() {
        let u = sample(|x| c(x.cos(), 0.0), 33, 16).unwrap();
        for n in -16..=16i64 {
            let want = if n.abs() == 1 { 0.5 } else { 0.0 };
            assert!((u.coeff(n) - c(want, 0.0)).norm() < 1e-14);
        }
        let one = sample(|_| c(1.0, 0.0), 17, 8).unwrap();
        assert!((one.coeff(0) - c(1.0, 0.0)).norm() < 1e-15);
    }

    #[test]
    fn grid_round_trip() {
        let u = FourierSeries::from_fn(20, |n| c((n as f64 * 0.7).sin(), (n as f64).cos() * 0.1));
        for p in [41, 64, 97] {
            let back = grid_transform(&u.to_grid(p).unwrap(), 20).unwrap();
            assert!(back.sub(&u).unwrap().norm() < 1e-12);
        }
        assert!(matches!(grid_transform(&[c(0.0, 0.0); 10], 5), Err(Error::LengthMismatch { .. })));
    }

    #[test]
    fn inner_products_basic() {
        let e1 = FourierSeries::mode(4, 1, c(1.0, 0.0));
        let one = FourierSeries::mode(4, 0, c(1.0, 0.0));
        assert!((inner_product(&e1, &e1).unwrap() - c(1.0, 0.0)).norm() < 1e-15);
        assert_eq!(inner_product(&one, &e1).unwrap(), c(0.0, 0.0));
        let em1 = FourierSeries::mode(4, -1, c(1.0, 0.0));
        assert_eq!(bilinear_pairing(&e1, &em1).unwrap(), c(1.0, 0.0));
        assert!(inner_product(&e1, &FourierSeries::zeros(3)).is_err());
    }

    #[test]
    fn multipliers() {
        let e3 = FourierSeries::mode(5, 3, c(1.0, 0.0));
        let a = apply_multiplier(&e3, abs_deriv_symbol(1.0));
        assert_eq!(a.coeff(3), c(3.0, 0.0));
        let one = FourierSeries::mode(5, 0, c(1.0, 0.0));
        assert_eq!(deriv(&one, -1).norm(), 0.0);
        for n in 1..=5 {
            let e = FourierSeries::mode(5, n, c(1.0, 0.0));
            let d = apply_multiplier(&e, d_symbol(-1));
            let h = apply_multiplier(&e, abs_deriv_symbol(-1.0));
            assert!((d.coeff(n) - c(1.0 / n as f64, 0.0)).norm() < 1e-15);
            assert_eq!(d, h);
        }
    }

    #[test]
    fn szego_examples() {
        let cs = sample(|x| c(x.cos(), 0.0), 16, 4).unwrap();
        let p = szego_project(&cs, Side::Plus);
        assert!((p.coeff(1) - c(0.5, 0.0)).norm() < 1e-15 && p.coeff(0).norm() < 1e-15);
        let one = FourierSeries::mode(3, 0, c(1.0, 0.0));
        assert_eq!(szego_project(&one, Side::Plus).coeff(0), c(1.0, 0.0));
        let e2 = FourierSeries::mode(3, 2, c(1.0, 0.0));
        assert_eq!(szego_project(&e2, Side::Minus).norm(), 0.0);
    }

    #[test]
    fn partial_fourier_examples() {
        let u = FourierSeries::mode(6, 3, c(1.0, 0.0)).add(&FourierSeries::mode(6, 1, c(1.0, 0.0))).unwrap();
        let z = partial_fourier(&u, Side::Plus, 2);
        assert_eq!(z.get(&3), Some(&c(1.0, 0.0)));
        assert!(z.iter().filter(|(k, _)| **k != 3).all(|(_, v)| v.norm() == 0.0));
        let back = partial_fourier_inverse(&z, 6);
        assert_eq!(back, FourierSeries::mode(6, 3, c(1.0, 0.0)));
    }

    #[test]
    fn json_round_trip() {
        let u = FourierSeries::from_fn(3, |n| c(n as f64, 0.0)).symmetrized();
        let back = FourierSeries::from_json(&u.to_json().unwrap()).unwrap();
        assert_eq!(back, u);
    }

    #[test]
    fn product_is_exact() {
        let a = FourierSeries::from_fn(6, |n| c(1.0 / (1 + n.abs()) as f64, 0.2 * n as f64));
        let b = FourierSeries::from_fn(5, |n| c(0.3 * n as f64, 1.0));
        let p = a.product(&b, 11);
        for k in -11..=11i64 {
            let want: C64 = (-6..=6).map(|j| a.coeff(j) * b.coeff(k - j)).sum();
            assert!((p.coeff(k) - want).norm() < 1e-13);
        }
    }
}
