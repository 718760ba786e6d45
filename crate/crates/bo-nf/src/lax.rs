//! Truncated Lax operator `L_u = D - T_u` on the Hardy space and its
//! normalized spectral data.

use nalgebra::DMatrix;

use crate::error::{Error, Result};
use crate::spectral::{FourierSeries, HardyVector, Side, C64};

/// Threshold on the inner products fixing the eigenfunction phases.
pub const PHASE_TOL: f64 = 1e-10;
/// Eigenvalues closer than this inside the trusted band are rejected.
pub const DEGENERACY_TOL: f64 = 1e-12;

/// Eigenvalues, gaps, normalized eigenfunctions and κ factors of `L_u`
/// truncated to modes `0..=K`.
#[derive(Clone, Debug)]
pub struct LaxSpectrum {
    /// Truncation `K`; the matrix has size `K + 1`.
    pub k: usize,
    /// Largest index trusted by downstream consumers (default `K/2`).
    pub band: usize,
    /// `λ_0 <= λ_1 <= ... <= λ_K`.
    pub lambdas: Vec<f64>,
    /// `gaps[n-1] = γ_n = λ_n - λ_{n-1} - 1`, `n = 1..=K`.
    pub gaps: Vec<f64>,
    /// `f_0..f_K`, unit norm.
    pub eigenfunctions: Vec<HardyVector>,
    /// `kappas[n-1] = κ_n` for `1 <= n <= band`.
    pub kappas: Vec<f64>,
    /// Sum of `|γ_p|` over `band < p <= K`, dropped from the κ products.
    pub kappa_tail: f64,
}

/// Matrix `L_{mn} = n δ_{mn} - û(m - n)`, `0 <= m, n <= K`; modes of `u`
/// beyond its truncation count as zero.
pub fn assemble_lax(u: &FourierSeries, k: usize) -> Result<DMatrix<C64>> {
    u.require_real_mean_zero()?;
    Ok(DMatrix::from_fn(k + 1, k + 1, |m, n| {
        let d = m as i64 - n as i64;
        if d == 0 {
            C64::new(n as f64, 0.0)
        } else {
            -u.coeff(d)
        }
    }))
}

/// Eigen-decomposition sorted by eigenvalue; eigenvectors are unit norm but
/// their phases are arbitrary until [`normalize_phases`].
pub fn diagonalize(l: &DMatrix<C64>, band: usize) -> Result<(Vec<f64>, Vec<HardyVector>)> {
    let n = l.nrows();
    if n == 0 || l.ncols() != n {
        return Err(Error::InvalidArgument("Lax matrix must be square and nonempty".into()));
    }
    let herm = (l - l.adjoint()).camax();
    if herm > 1e-12 * l.camax().max(1.0) {
        return Err(Error::InvalidArgument(format!("matrix is not Hermitian (defect {herm:.3e})")));
    }
    let eig = l.clone().symmetric_eigen();
    if eig.eigenvalues.iter().any(|v| !v.is_finite()) {
        return Err(Error::Eigensolver("non-finite eigenvalue".into()));
    }
    let mut order: Vec<usize> = (0..n).collect();
    order.sort_by(|&a, &b| eig.eigenvalues[a].total_cmp(&eig.eigenvalues[b]));
    let lambdas: Vec<f64> = order.iter().map(|&i| eig.eigenvalues[i]).collect();
    for i in 1..=band.min(n - 1) {
        let sep = lambdas[i] - lambdas[i - 1];
        if sep < DEGENERACY_TOL {
            return Err(Error::NearDegenerate { index: i, separation: sep });
        }
    }
    let vecs = order
        .iter()
        .map(|&i| HardyVector::new(Side::Plus, eig.eigenvectors.column(i).iter().copied().collect()))
        .collect();
    Ok((lambdas, vecs))
}

/// Rotate `f_0` so that `⟨1|f_0⟩ > 0`, then each `f_n` so that
/// `⟨f_n | e^{ix} f_{n-1}⟩ > 0`. Indices above `band` that cannot be
/// normalized keep their phase; inside the band this is an error.
pub fn normalize_phases(vecs: &mut [HardyVector], band: usize) -> Result<()> {
    let Some(f0) = vecs.first_mut() else { return Ok(()) };
    let a = f0.coeff(0);
    if a.norm() < PHASE_TOL {
        return Err(Error::IllConditionedPhase { index: 0, value: a.norm() });
    }
    rotate(f0, a.conj() / a.norm());
    for n in 1..vecs.len() {
        let (lo, hi) = vecs.split_at_mut(n);
        let prev = &lo[n - 1];
        let cur = &mut hi[0];
        let ip: C64 = (1..cur.coeffs.len()).map(|k| cur.coeffs[k] * prev.coeffs[k - 1].conj()).sum();
        if ip.norm() < PHASE_TOL {
            if n <= band {
                return Err(Error::IllConditionedPhase { index: n, value: ip.norm() });
            }
            continue;
        }
        rotate(cur, ip.conj() / ip.norm());
    }
    Ok(())
}

fn rotate(f: &mut HardyVector, phase: C64) {
    for c in &mut f.coeffs {
        *c *= phase;
    }
}

/// `κ_n = (λ_n - λ_0)^{-1} Π_{p≠n} (1 - γ_p/(λ_p - λ_n))` with the product
/// truncated at the band edge; returns the κ's and the dropped tail mass.
pub fn compute_kappas(lambdas: &[f64], gaps: &[f64], band: usize) -> Result<(Vec<f64>, f64)> {
    let band = band.min(gaps.len());
    let mut out = Vec::with_capacity(band);
    for n in 1..=band {
        let mut k = 1.0 / (lambdas[n] - lambdas[0]);
        for p in 1..=band {
            if p == n {
                continue;
            }
            let d = lambdas[p] - lambdas[n];
            if d.abs() < DEGENERACY_TOL {
                return Err(Error::NearDegenerate { index: p.max(n), separation: d.abs() });
            }
            k *= 1.0 - gaps[p - 1] / d;
        }
        out.push(k);
    }
    let tail = gaps[band..].iter().map(|g| g.abs()).sum();
    Ok((out, tail))
}

impl LaxSpectrum {
    /// Full pipeline with the default trusted band `K/2`.
    pub fn compute(u: &FourierSeries, k: usize) -> Result<Self> {
        Self::compute_with_band(u, k, k / 2)
    }

    pub fn compute_with_band(u: &FourierSeries, k: usize, band: usize) -> Result<Self> {
        let band = band.min(k);
        let l = assemble_lax(u, k)?;
        let (lambdas, mut vecs) = diagonalize(&l, band)?;
        normalize_phases(&mut vecs, band)?;
        let gaps: Vec<f64> = lambdas.windows(2).map(|w| w[1] - w[0] - 1.0).collect();
        let (kappas, kappa_tail) = compute_kappas(&lambdas, &gaps, band)?;
        Ok(Self { k, band, lambdas, gaps, eigenfunctions: vecs, kappas, kappa_tail })
    }

    /// `γ_n` for `n >= 1`.
    pub fn gap(&self, n: usize) -> f64 {
        self.gaps[n - 1]
    }

    /// `κ_n` for `1 <= n <= band`.
    pub fn kappa(&self, n: usize) -> Result<f64> {
        if n == 0 || n > self.band {
            return Err(Error::OutsideBand { index: n, band: self.band });
        }
        Ok(self.kappas[n - 1])
    }

    /// `⟨1 | f_n⟩ = conj(f_n[0])`.
    pub fn one_fn(&self, n: usize) -> C64 {
        self.eigenfunctions[n].coeff(0).conj()
    }

    /// `‖L f_n - λ_n f_n‖` for the stored eigenpair.
    pub fn residual(&self, u: &FourierSeries, n: usize) -> Result<f64> {
        let l = assemble_lax(u, self.k)?;
        let f = nalgebra::DVector::from_vec(self.eigenfunctions[n].coeffs.clone());
        Ok((&l * &f - &f * C64::new(self.lambdas[n], 0.0)).norm())
    }

    /// Rows `(n, λ_n, γ_n, κ_n, |⟨1|f_n⟩|)` over the trusted band; `γ_0` and
    /// `κ_0` are reported as NaN.
    pub fn rows(&self) -> Vec<(usize, f64, f64, f64, f64)> {
        (0..=self.band)
            .map(|n| {
                let (g, k) = if n == 0 { (f64::NAN, f64::NAN) } else { (self.gap(n), self.kappas[n - 1]) };
                (n, self.lambdas[n], g, k, self.one_fn(n).norm())
            })
            .collect()
    }

    /// `(min, max)` of `n κ_n` over the band.
    pub fn n_kappa_bounds(&self) -> (f64, f64) {
        self.kappas
            .iter()
            .enumerate()
            .map(|(i, k)| (i + 1) as f64 * k)
            .fold((f64::INFINITY, f64::NEG_INFINITY), |(lo, hi), v| (lo.min(v), hi.max(v)))
    }
}

/// Residuals of the two trace formulas over the trusted band.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct TraceReport {
    /// `⟨u|1⟩ - (-λ_0 - Σ γ_n)`.
    pub mean_residual: f64,
    /// `‖u - ⟨u|1⟩‖² - 2 Σ n γ_n`.
    pub l2_residual: f64,
}

pub fn trace_check(u: &FourierSeries, spec: &LaxSpectrum) -> TraceReport {
    let gsum: f64 = spec.gaps[..spec.band].iter().sum();
    let ngsum: f64 = spec.gaps[..spec.band].iter().enumerate().map(|(i, g)| (i + 1) as f64 * g).sum();
    let mean = u.coeff(0).re;
    let l2: f64 = u.coeffs().iter().map(|c| c.norm_sqr()).sum::<f64>() - u.coeff(0).norm_sqr();
    TraceReport { mean_residual: mean + spec.lambdas[0] + gsum, l2_residual: l2 - 2.0 * ngsum }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn zero_potential_is_diagonal() {
        let u = FourierSeries::zeros(16);
        let l = assemble_lax(&u, 8).unwrap();
        for i in 0..9 {
            for j in 0..9 {
                let want = if i == j { i as f64 } else { 0.0 };
                assert_eq!(l[(i, j)], C64::new(want, 0.0));
            }
        }
        let s = LaxSpectrum::compute(&u, 16).unwrap();
        for n in 0..=8 {
            assert!((s.lambdas[n] - n as f64).abs() < 1e-13);
            assert!((s.eigenfunctions[n].coeff(n) - C64::new(1.0, 0.0)).norm() < 1e-12);
        }
    }

    #[test]
    fn rejects_bad_input() {
        let u = FourierSeries::mode(4, 1, C64::new(1.0, 0.0));
        assert!(matches!(assemble_lax(&u, 4), Err(Error::NotReal { .. })));
        let u = FourierSeries::mode(4, 0, C64::new(1.0, 0.0));
        assert!(matches!(assemble_lax(&u, 4), Err(Error::NotMeanZero { .. })));
    }

    #[test]
    fn phase_normalization_is_idempotent() {
        let u = FourierSeries::from_fn(12, |n| if n == 0 { C64::new(0.0, 0.0) } else { C64::from_polar(0.4f64.powi(n.abs() as i32), 0.3 * n as f64) });
        let s = LaxSpectrum::compute(&u, 12).unwrap();
        let mut again = s.eigenfunctions.clone();
        normalize_phases(&mut again, s.band).unwrap();
        for (a, b) in again.iter().zip(&s.eigenfunctions) {
            for (x, y) in a.coeffs.iter().zip(&b.coeffs) {
                assert!((x - y).norm() < 1e-14);
            }
        }
    }
}
