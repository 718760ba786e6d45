//! The linearized map `Ψ_L(z) = Ψ^bo(z_S, 0) + Σ_{n∈S^⊥} z_n W_n`, the closed
//! form of `W_n` at finite-gap potentials, its `1/n` expansion and the
//! transpose `Ψ_1^⊤`.

use nalgebra::DMatrix;

use crate::birkhoff::{fourier_direction, BirkhoffJacobian, BirkhoffVector};
use crate::error::{Error, Result};
use crate::finite_gap::g_infinity;
use crate::lax::LaxSpectrum;
use crate::spectral::{apply_multiplier, d_symbol, deriv_symbol, fft_len, grid_transform, FourierSeries, SparseModes, C64};

/// Gaps larger than this count as open when `S_+` is detected.
pub const OPEN_GAP_TOL: f64 = 1e-8;

/// Spectral data of a finite-gap potential needed by `W_n` and its expansion.
#[derive(Clone, Debug)]
pub struct FiniteGapBase {
    pub q: FourierSeries,
    pub spectrum: LaxSpectrum,
    /// Open gaps `S_+`, increasing.
    pub s_plus: Vec<usize>,
    /// `N_S = max S_+` (0 for `q = 0`).
    pub n_s: usize,
    /// Truncation of all function-valued outputs.
    pub m_w: usize,
    /// `g_∞` at truncation `m_w`.
    pub g_inf: FourierSeries,
    /// `S_0 = {0} ∪ S_+`.
    pub s0: Vec<usize>,
    /// `A_ℓ = g_∞ conj(⟨1|f_ℓ⟩ f_ℓ)`, `ℓ ∈ S_0`.
    a_terms: Vec<FourierSeries>,
    /// `B_ℓ = q g_∞ conj(⟨1|f_ℓ⟩ f_ℓ) - g_∞ conj(⟨1|f_ℓ⟩ D f_ℓ)`, `ℓ ∈ S_0`.
    b_terms: Vec<FourierSeries>,
}

impl FiniteGapBase {
    /// `s_plus = None` detects the open gaps inside the trusted band.
    pub fn new(q: &FourierSeries, k: usize, m_w: usize, s_plus: Option<Vec<usize>>) -> Result<Self> {
        let spectrum = LaxSpectrum::compute(q, k)?;
        Self::from_spectrum(q, spectrum, m_w, s_plus)
    }

    pub fn from_spectrum(q: &FourierSeries, spectrum: LaxSpectrum, m_w: usize, s_plus: Option<Vec<usize>>) -> Result<Self> {
        let s_plus = match s_plus {
            Some(s) => s,
            None => (1..=spectrum.band).filter(|&n| spectrum.gap(n) > OPEN_GAP_TOL).collect(),
        };
        let n_s = s_plus.iter().copied().max().unwrap_or(0);
        if n_s > spectrum.band {
            return Err(Error::OutsideBand { index: n_s, band: spectrum.band });
        }
        let mut s0 = vec![0];
        s0.extend(&s_plus);
        let k = spectrum.k;
        let p = fft_len(2 * (m_w + k + q.m()) + 1);
        let phase = apply_multiplier(q, deriv_symbol(-1)).to_real_grid(p)?;
        let g: Vec<C64> = phase.iter().map(|v| C64::from_polar(1.0, *v)).collect();
        let qg = q.to_real_grid(p)?;
        let mut a_terms = Vec::new();
        let mut b_terms = Vec::new();
        for &l in &s0 {
            let f = spectrum.eigenfunctions[l].to_series(k);
            let df = apply_multiplier(&f, d_symbol(1));
            let one = spectrum.one_fn(l);
            let fg = f.scale(one).to_grid(p)?;
            let dfg = df.scale(one).to_grid(p)?;
            let a: Vec<C64> = (0..p).map(|j| g[j] * fg[j].conj()).collect();
            let b: Vec<C64> = (0..p).map(|j| qg[j] * a[j] - g[j] * dfg[j].conj()).collect();
            a_terms.push(grid_transform(&a, m_w)?);
            b_terms.push(grid_transform(&b, m_w)?);
        }
        let g_inf = g_infinity(q, m_w)?.resized(m_w);
        Ok(Self { q: q.resized(m_w.max(q.m())), spectrum, s_plus, n_s, m_w, g_inf, s0, a_terms, b_terms })
    }

    /// `n κ_n = (1 - λ_0/n)^{-1} Π_{j∈S_+} (1 + γ_j/(n - λ_j))` for `n > N_S`.
    pub fn n_kappa(&self, n: usize) -> f64 {
        let nf = n as f64;
        let lam = &self.spectrum.lambdas;
        let mut v = 1.0 / (1.0 - lam[0] / nf);
        for &j in &self.s_plus {
            v *= 1.0 + self.spectrum.gap(j) / (nf - lam[j]);
        }
        v
    }

    /// `-e^{-inx} W_n = (nκ_n)^{-1/2} Σ_{ℓ∈S_0} (A_ℓ + B_ℓ/n)/(1 - λ_ℓ/n)` for `n >= N_S + 1`.
    pub fn w_envelope(&self, n: usize) -> Result<FourierSeries> {
        if n <= self.n_s {
            return Err(Error::InvalidArgument(format!("W_n closed form needs n >= N_S + 1 = {}, got {n}", self.n_s + 1)));
        }
        let nf = n as f64;
        let mut acc = FourierSeries::zeros(self.m_w);
        for (i, &l) in self.s0.iter().enumerate() {
            let w = 1.0 / (1.0 - self.spectrum.lambdas[l] / nf);
            acc = acc.axpy(C64::new(w, 0.0), &self.a_terms[i]).axpy(C64::new(w / nf, 0.0), &self.b_terms[i]);
        }
        Ok(acc.scale(C64::new(1.0 / self.n_kappa(n).sqrt(), 0.0)))
    }

    /// Closed form of `W_n` truncated to `m_w`; negative `n` gives `W_{-|n|} = conj(W_{|n|})`.
    pub fn w_analytic(&self, n: i64) -> Result<FourierSeries> {
        let a = n.unsigned_abs() as usize;
        let wn = self.w_envelope(a)?.shift(a as i64).scale(C64::new(-1.0, 0.0));
        Ok(if n > 0 { wn } else { wn.conj() })
    }

    /// Real columns `(W_n + conj W_n, i W_n - i conj W_n)` for the coordinates
    /// `(Re z_n, Im z_n)`, built without intermediate series.
    pub fn w_real_columns(&self, n: usize) -> Result<(FourierSeries, FourierSeries)> {
        if n <= self.n_s {
            return Err(Error::InvalidArgument(format!("W_n closed form needs n >= N_S + 1 = {}, got {n}", self.n_s + 1)));
        }
        let nf = n as f64;
        let len = 2 * self.m_w + 1;
        let mut env = vec![C64::new(0.0, 0.0); len];
        for (i, &l) in self.s0.iter().enumerate() {
            let w = 1.0 / (1.0 - self.spectrum.lambdas[l] / nf);
            let wb = w / nf;
            for ((e, a), b) in env.iter_mut().zip(self.a_terms[i].coeffs()).zip(self.b_terms[i].coeffs()) {
                *e += a * w + b * wb;
            }
        }
        let pref = -1.0 / self.n_kappa(n).sqrt();
        let m = self.m_w as i64;
        let w_at = |k: i64| -> C64 {
            let j = k - n as i64;
            if j.abs() <= m {
                env[(j + m) as usize] * pref
            } else {
                C64::new(0.0, 0.0)
            }
        };
        let i = C64::new(0.0, 1.0);
        let mut c1 = Vec::with_capacity(len);
        let mut c2 = Vec::with_capacity(len);
        for k in -m..=m {
            let (a, b) = (w_at(k), w_at(-k).conj());
            c1.push(a + b);
            c2.push(i * (a - b));
        }
        Ok((FourierSeries::from_coeffs(self.m_w, c1)?, FourierSeries::from_coeffs(self.m_w, c2)?))
    }

    /// `Σ_{ℓ∈S_0} conj(⟨1|f_ℓ⟩ f_ℓ)`; equals 1 when `S_0` carries all of `⟨1|·⟩`.
    pub fn projected_one_conj(&self) -> FourierSeries {
        let k = self.spectrum.k;
        let mut acc = FourierSeries::zeros(k);
        for &l in &self.s0 {
            let f = self.spectrum.eigenfunctions[l].to_series(k);
            acc = acc.axpy(C64::new(1.0, 0.0), &f.scale(self.spectrum.one_fn(l)).conj());
        }
        acc
    }
}

/// `W_n = ∂q/∂z_n` (Wirtinger) from the inverse of a square Birkhoff
/// Jacobian; `m` is the truncation of the result.
pub fn w_from_jacobian(jac: &BirkhoffJacobian, n: i64, m: usize) -> Result<FourierSeries> {
    if jac.mz != jac.mj {
        return Err(Error::InvalidArgument("Jacobian must be square (mz = mj)".into()));
    }
    let inv = jacobian_inverse(&jac.matrix)?;
    Ok(w_from_inverse(&inv, n, m))
}

pub fn jacobian_inverse(matrix: &DMatrix<f64>) -> Result<DMatrix<f64>> {
    matrix.clone().try_inverse().ok_or_else(|| Error::Singular("Birkhoff Jacobian".into()))
}

/// Column combination `½(∂_{Re z_n} - i ∂_{Im z_n})` of an inverse Jacobian.
pub fn w_from_inverse(inv: &DMatrix<f64>, n: i64, m: usize) -> FourierSeries {
    let a = n.unsigned_abs() as usize;
    let mut acc = FourierSeries::zeros(m);
    for j in 0..inv.nrows() {
        let dir = fourier_direction(m, j);
        let c = C64::new(inv[(j, 2 * (a - 1))], -inv[(j, 2 * (a - 1) + 1)]) * 0.5;
        acc = acc.axpy(c, &dir);
    }
    if n > 0 {
        acc
    } else {
        acc.conj()
    }
}

/// Truncated power series `Σ_{k<=order} a_k t^k` over `f64`.
#[derive(Clone, Debug, PartialEq)]
pub struct TaylorSeries {
    pub coeffs: Vec<f64>,
}

impl TaylorSeries {
    pub fn constant(c: f64, order: usize) -> Self {
        let mut coeffs = vec![0.0; order + 1];
        coeffs[0] = c;
        Self { coeffs }
    }

    /// `a + b t`.
    pub fn linear(a: f64, b: f64, order: usize) -> Self {
        let mut s = Self::constant(a, order);
        if order >= 1 {
            s.coeffs[1] = b;
        }
        s
    }

    pub fn order(&self) -> usize {
        self.coeffs.len() - 1
    }

    pub fn mul(&self, o: &Self) -> Self {
        let n = self.order().min(o.order());
        let coeffs = (0..=n).map(|k| (0..=k).map(|j| self.coeffs[j] * o.coeffs[k - j]).sum()).collect();
        Self { coeffs }
    }

    /// `a^α` for `a_0 > 0` (J.C.P. Miller recurrence).
    pub fn powf(&self, alpha: f64) -> Result<Self> {
        let a = &self.coeffs;
        if !(a[0] > 0.0) {
            return Err(Error::InvalidArgument("power series needs a positive constant term".into()));
        }
        let mut b = vec![a[0].powf(alpha)];
        for k in 1..=self.order() {
            let s: f64 = (1..=k).map(|j| ((alpha + 1.0) * j as f64 - k as f64) * a[j] * b[k - j]).sum();
            b.push(s / (k as f64 * a[0]));
        }
        if b.iter().any(|v| !v.is_finite()) {
            return Err(Error::InvalidArgument("power series overflow".into()));
        }
        Ok(Self { coeffs: b })
    }

    pub fn eval(&self, t: f64) -> f64 {
        self.coeffs.iter().rev().fold(0.0, |acc, c| acc * t + c)
    }
}

/// Coefficients `c_{ℓ,k}` and `W_k^{ae,±}` of
/// `-e^{-inx} W_n = Σ_{k<=N} W_k^{ae,+} n^{-k} + O(n^{-N-1})`.
#[derive(Clone, Debug)]
pub struct ExpansionTable {
    pub n_max: usize,
    /// Indices `ℓ ∈ S_0` matching the rows of `c`.
    pub ells: Vec<usize>,
    /// `c[i][k + 1] = c_{ℓ_i, k}` for `k = -1..=n_max`.
    pub c: Vec<Vec<f64>>,
    /// `W_k^{ae,+}`, `k = 0..=n_max`.
    pub w_plus: Vec<FourierSeries>,
}

impl ExpansionTable {
    pub fn coeff(&self, i: usize, k: i64) -> f64 {
        self.c[i][(k + 1) as usize]
    }

    pub fn w_minus(&self, k: usize) -> FourierSeries {
        self.w_plus[k].conj()
    }

    /// `Σ_{k<=order} W_k^{ae,+} n^{-k}`.
    pub fn partial_sum(&self, n: usize, order: usize) -> FourierSeries {
        let mut acc = FourierSeries::zeros(self.w_plus[0].m());
        for k in 0..=order.min(self.n_max) {
            acc = acc.axpy(C64::new((n as f64).powi(-(k as i32)), 0.0), &self.w_plus[k]);
        }
        acc
    }
}

/// Series of `(nκ_n)^{-1/2}(1 - λ_ℓ/n)^{-1}` in `t = 1/n` up to `n_max`.
pub fn kappa_series(lambda0: f64, open: &[(f64, f64)], lambda_l: f64, n_max: usize) -> Result<TaylorSeries> {
    let ord = n_max + 2;
    let mut s = TaylorSeries::linear(1.0, -lambda0, ord).powf(0.5)?;
    for &(lam_j, gam_j) in open {
        let inner = TaylorSeries::linear(1.0, -lam_j, ord).powf(-1.0)?;
        let mut f = inner.mul(&TaylorSeries::linear(0.0, gam_j, ord));
        f.coeffs[0] += 1.0;
        s = s.mul(&f.powf(-0.5)?);
    }
    s = s.mul(&TaylorSeries::linear(1.0, -lambda_l, ord).powf(-1.0)?);
    s.coeffs.truncate(n_max + 1);
    Ok(s)
}

pub fn expansion_coeffs(base: &FiniteGapBase, n_max: usize) -> Result<ExpansionTable> {
    let lam = &base.spectrum.lambdas;
    let open: Vec<(f64, f64)> = base.s_plus.iter().map(|&j| (lam[j], base.spectrum.gap(j))).collect();
    let mut c = Vec::new();
    for &l in &base.s0 {
        let s = kappa_series(lam[0], &open, lam[l], n_max)?;
        let mut row = vec![0.0];
        row.extend(s.coeffs);
        c.push(row);
    }
    let mut w_plus = Vec::new();
    for k in 0..=n_max as i64 {
        let mut acc = FourierSeries::zeros(base.m_w);
        for i in 0..base.s0.len() {
            let ck = c[i][(k + 1) as usize];
            let ckm = c[i][k as usize];
            acc = acc.axpy(C64::new(ck, 0.0), &base.a_terms[i]).axpy(C64::new(ckm, 0.0), &base.b_terms[i]);
        }
        w_plus.push(acc);
    }
    Ok(ExpansionTable { n_max, ells: base.s0.clone(), c, w_plus })
}

/// Log-log fit of the remainder `‖-e^{-inx}W_n - Σ_{k<=N} W_k^{ae,+} n^{-k}‖`.
#[derive(Clone, Debug)]
pub struct RemainderFit {
    pub order: usize,
    pub slope: f64,
    /// `(n, remainder norm)`.
    pub points: Vec<(usize, f64)>,
}

pub fn remainder_decay(base: &FiniteGapBase, table: &ExpansionTable, order: usize, ns: &[usize]) -> Result<RemainderFit> {
    if order > table.n_max {
        return Err(Error::InvalidArgument(format!("order {order} exceeds table order {}", table.n_max)));
    }
    let mut points = Vec::new();
    for &n in ns {
        if n > base.spectrum.band || n <= base.n_s {
            return Err(Error::OutsideBand { index: n, band: base.spectrum.band });
        }
        let lead = base.w_envelope(n)?;
        let r = lead.sub(&table.partial_sum(n, order))?;
        points.push((n, r.norm()));
    }
    let slope = fit_slope(&points.iter().map(|&(n, v)| (n as f64, v)).collect::<Vec<_>>())?;
    Ok(RemainderFit { order, slope, points })
}

/// Least-squares slope of `log y` against `log x`; exact zeros make the fit degenerate.
pub fn fit_slope(pts: &[(f64, f64)]) -> Result<f64> {
    let pts: Vec<(f64, f64)> = pts.iter().filter(|(_, y)| *y > 0.0).map(|&(x, y)| (x.ln(), y.ln())).collect();
    if pts.len() < 3 {
        return Err(Error::FitDegenerate(format!("{} usable points", pts.len())));
    }
    let n = pts.len() as f64;
    let mx = pts.iter().map(|p| p.0).sum::<f64>() / n;
    let my = pts.iter().map(|p| p.1).sum::<f64>() / n;
    let sxx: f64 = pts.iter().map(|p| (p.0 - mx).powi(2)).sum();
    if sxx == 0.0 {
        return Err(Error::FitDegenerate("range too short".into()));
    }
    let sxy: f64 = pts.iter().map(|p| (p.0 - mx) * (p.1 - my)).sum();
    Ok(sxy / sxx)
}

/// `W_n` for every `n ∈ S^⊥`, `|n| <= M_z`, at one finite-gap base point.
#[derive(Clone, Debug)]
pub struct WFamily {
    pub base: FiniteGapBase,
    pub mz: usize,
    /// Positive indices of `S^⊥` up to `M_z`.
    pub perp: Vec<usize>,
    /// `W_n` for `n ∈ perp`, same order.
    pub w: Vec<FourierSeries>,
}

impl WFamily {
    /// Small indices of `S^⊥` (`n <= N_S`) use the Jacobian-inverse route
    /// with `jac_modes` probe modes; the rest use the closed form.
    pub fn new(base: FiniteGapBase, mz: usize, jac_modes: usize) -> Result<Self> {
        let perp: Vec<usize> = (1..=mz).filter(|n| !base.s_plus.contains(n)).collect();
        let small: Vec<usize> = perp.iter().copied().filter(|&n| n <= base.n_s).collect();
        let inv = if small.is_empty() {
            None
        } else {
            let h = crate::birkhoff::default_step(&base.q);
            let jm = jac_modes.max(base.n_s + 1);
            let jac = crate::birkhoff::jacobian_forward(&base.q, base.spectrum.k, jm, jm, h, 1)?;
            Some(jacobian_inverse(&jac.matrix)?)
        };
        let mut w = Vec::with_capacity(perp.len());
        for &n in &perp {
            if n <= base.n_s {
                w.push(w_from_inverse(inv.as_ref().expect("jacobian"), n as i64, base.m_w));
            } else {
                w.push(base.w_analytic(n as i64)?);
            }
        }
        Ok(Self { base, mz, perp, w })
    }

    pub fn get(&self, n: i64) -> Option<FourierSeries> {
        let a = n.unsigned_abs() as usize;
        let i = self.perp.iter().position(|&p| p == a)?;
        Some(if n > 0 { self.w[i].clone() } else { self.w[i].conj() })
    }

    /// `Ψ_1(z_S)[z_⊥] = Σ_{n∈S^⊥} z_n W_n`; entries of `z` on `S_+` are ignored.
    pub fn psi1(&self, z: &BirkhoffVector) -> FourierSeries {
        let mut acc = FourierSeries::zeros(self.base.m_w);
        for (i, &n) in self.perp.iter().enumerate() {
            let zn = z.get(n as i64);
            if zn != C64::new(0.0, 0.0) {
                acc = acc.axpy(zn, &self.w[i]).axpy(zn.conj(), &self.w[i].conj());
            }
        }
        acc.symmetrized()
    }

    /// `Ψ_L(z_S, z_⊥) = q + Ψ_1(z_S)[z_⊥]` with `q = Ψ^bo(z_S, 0)` the base potential.
    pub fn psi_l(&self, z: &BirkhoffVector) -> FourierSeries {
        self.base.q.resized(self.base.m_w).axpy(C64::new(1.0, 0.0), &self.psi1(z)).symmetrized()
    }

    /// `Ψ_1(z_S)^⊤ q̂ = (⟨W_{-n}, q̂⟩)_{n∈S^⊥}` (bilinear pairing).
    pub fn psi1_transpose(&self, qhat: &FourierSeries) -> SparseModes {
        let mut out = SparseModes::new();
        for (i, &n) in self.perp.iter().enumerate() {
            let w = &self.w[i];
            let wc = w.conj();
            let m = w.m() as i64;
            let pos: C64 = (-m..=m).map(|k| wc.coeff(k) * qhat.coeff(-k)).sum();
            let neg: C64 = (-m..=m).map(|k| w.coeff(k) * qhat.coeff(-k)).sum();
            out.insert(n as i64, pos);
            out.insert(-(n as i64), neg);
        }
        out
    }

    /// Real columns of `Ψ_1` for the coordinates `(Re z_n, Im z_n)`, `n ∈ perp`.
    pub fn real_columns(&self) -> Vec<FourierSeries> {
        let i = C64::new(0.0, 1.0);
        self.w
            .iter()
            .flat_map(|w| {
                let wc = w.conj();
                [w.add(&wc).expect("same m"), w.scale(i).sub(&wc.scale(i)).expect("same m")]
            })
            .collect()
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn taylor_powers() {
        let a = TaylorSeries::linear(1.0, 1.0, 5);
        let inv = a.powf(-1.0).unwrap();
        for (k, c) in inv.coeffs.iter().enumerate() {
            assert!((c - (-1f64).powi(k as i32)).abs() < 1e-15);
        }
        let r = a.powf(0.5).unwrap();
        let sq = r.mul(&r);
        assert!((sq.coeffs[0] - 1.0).abs() < 1e-15 && (sq.coeffs[1] - 1.0).abs() < 1e-15);
        assert!(sq.coeffs[2..].iter().all(|c| c.abs() < 1e-15));
    }

    #[test]
    fn zero_base_has_trivial_w() {
        let q = FourierSeries::zeros(32);
        let base = FiniteGapBase::new(&q, 32, 24, None).unwrap();
        assert_eq!(base.s_plus, Vec::<usize>::new());
        for n in 1..=8i64 {
            let w = base.w_analytic(n).unwrap();
            let want = FourierSeries::mode(24, n, C64::new(-1.0, 0.0));
            assert!(w.sub(&want).unwrap().norm() < 1e-13);
        }
        let t = expansion_coeffs(&base, 3).unwrap();
        assert_eq!(t.coeff(0, -1), 0.0);
        assert_eq!(t.coeff(0, 0), 1.0);
        assert!(t.coeff(0, 1).abs() < 1e-15);
    }

    #[test]
    fn slope_fit() {
        let pts: Vec<(f64, f64)> = (1..10).map(|n| (n as f64, 3.0 * (n as f64).powf(-2.5))).collect();
        assert!((fit_slope(&pts).unwrap() + 2.5).abs() < 1e-12);
        assert!(fit_slope(&[(1.0, 0.0), (2.0, 0.0)]).is_err());
    }
}
