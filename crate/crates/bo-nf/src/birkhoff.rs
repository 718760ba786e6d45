//! Birkhoff coordinates `z_n = √n ⟨1|f_n⟩/√κ_n`, actions, frequencies,
//! Hamiltonians in both charts, the Jacobian of the Birkhoff map and the
//! reversibility involutions.

use std::f64::consts::TAU;

use nalgebra::DMatrix;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::lax::LaxSpectrum;
use crate::parallel::par_map;
use crate::spectral::{bilinear_pairing, FourierSeries, C64};

/// Coordinates `z_n`, `1 <= n <= M_z`; the negative side is `z_{-n} = conj(z_n)`.
#[derive(Clone, Debug, PartialEq)]
pub struct BirkhoffVector {
    pos: Vec<C64>,
}

#[derive(Serialize, Deserialize)]
struct BirkhoffJson {
    #[serde(rename = "Mz")]
    mz: usize,
    pos_re: Vec<f64>,
    pos_im: Vec<f64>,
}

impl BirkhoffVector {
    pub fn zeros(mz: usize) -> Self {
        Self { pos: vec![C64::new(0.0, 0.0); mz] }
    }

    /// From `z_1..z_{M_z}`.
    pub fn from_positive(pos: Vec<C64>) -> Self {
        Self { pos }
    }

    pub fn mz(&self) -> usize {
        self.pos.len()
    }

    pub fn positive(&self) -> &[C64] {
        &self.pos
    }

    /// `z_n` for `0 < |n| <= M_z`, zero otherwise.
    pub fn get(&self, n: i64) -> C64 {
        let k = n.unsigned_abs() as usize;
        if n == 0 || k > self.pos.len() {
            return C64::new(0.0, 0.0);
        }
        if n > 0 {
            self.pos[k - 1]
        } else {
            self.pos[k - 1].conj()
        }
    }

    /// Set `z_n` (and implicitly `z_{-n}`), `n >= 1`.
    pub fn set(&mut self, n: usize, z: C64) {
        self.pos[n - 1] = z;
    }

    /// Real coordinates `(Re z_1, Im z_1, Re z_2, ...)`.
    pub fn to_real(&self) -> Vec<f64> {
        self.pos.iter().flat_map(|z| [z.re, z.im]).collect()
    }

    pub fn from_real(v: &[f64]) -> Self {
        Self { pos: v.chunks(2).map(|c| C64::new(c[0], c[1])).collect() }
    }

    /// Keep only the listed positive indices.
    pub fn restrict(&self, keep: &[usize]) -> Self {
        let mut out = Self::zeros(self.mz());
        for &n in keep {
            if n >= 1 && n <= self.mz() {
                out.pos[n - 1] = self.pos[n - 1];
            }
        }
        out
    }

    /// `‖z‖_s = (Σ_{n≠0} |n|^{2s} |z_n|²)^{1/2}` over both signs.
    pub fn norm_s(&self, s: f64) -> f64 {
        self.pos
            .iter()
            .enumerate()
            .map(|(i, z)| 2.0 * ((i + 1) as f64).powf(2.0 * s) * z.norm_sqr())
            .sum::<f64>()
            .sqrt()
    }

    pub fn sub(&self, other: &Self) -> Self {
        Self { pos: self.pos.iter().zip(&other.pos).map(|(a, b)| a - b).collect() }
    }

    pub fn to_json(&self) -> Result<String> {
        Ok(serde_json::to_string(&BirkhoffJson {
            mz: self.mz(),
            pos_re: self.pos.iter().map(|z| z.re).collect(),
            pos_im: self.pos.iter().map(|z| z.im).collect(),
        })?)
    }

    pub fn from_json(s: &str) -> Result<Self> {
        let js: BirkhoffJson = serde_json::from_str(s)?;
        if js.pos_re.len() != js.mz || js.pos_im.len() != js.mz {
            return Err(Error::LengthMismatch { expected: js.mz, got: js.pos_re.len().min(js.pos_im.len()) });
        }
        Ok(Self { pos: js.pos_re.iter().zip(&js.pos_im).map(|(&a, &b)| C64::new(a, b)).collect() })
    }
}

/// `ζ_n = ⟨1|f_n⟩/√κ_n` for `1 <= n <= mz`.
pub fn zetas(spec: &LaxSpectrum, mz: usize) -> Result<Vec<C64>> {
    if mz > spec.band {
        return Err(Error::OutsideBand { index: mz, band: spec.band });
    }
    (1..=mz).map(|n| Ok(spec.one_fn(n) / spec.kappa(n)?.sqrt())).collect()
}

/// `Φ^bo` from a computed spectrum.
pub fn birkhoff_from_spectrum(spec: &LaxSpectrum, mz: usize) -> Result<BirkhoffVector> {
    let z = zetas(spec, mz)?;
    Ok(BirkhoffVector::from_positive(z.into_iter().enumerate().map(|(i, c)| c * ((i + 1) as f64).sqrt()).collect()))
}

/// `Φ^bo(u)` at Lax truncation `k`.
pub fn birkhoff_forward(u: &FourierSeries, k: usize, mz: usize) -> Result<BirkhoffVector> {
    birkhoff_from_spectrum(&LaxSpectrum::compute(u, k)?, mz)
}

/// `I_n = z_n z_{-n}/n`, `n = 1..M_z`.
pub fn actions(z: &BirkhoffVector) -> Result<Vec<f64>> {
    (1..=z.mz())
        .map(|n| {
            let v = z.get(n as i64) * z.get(-(n as i64)) / n as f64;
            if v.im.abs() > 1e-12 * v.re.abs().max(1.0) || v.re < -1e-12 {
                return Err(Error::InvalidArgument(format!("invalid action I_{n} = {v}")));
            }
            Ok(v.re.max(0.0))
        })
        .collect()
}

/// `ω_n` for `n >= 1`; the negative side follows from `ω_{-n} = -ω_n`.
#[derive(Clone, Debug, PartialEq)]
pub struct FrequencyTable {
    pub omegas: Vec<f64>,
}

impl FrequencyTable {
    /// `ω_n` for any `n ≠ 0` within the table.
    pub fn omega(&self, n: i64) -> f64 {
        let w = self.omegas[n.unsigned_abs() as usize - 1];
        if n > 0 {
            w
        } else {
            -w
        }
    }

    /// `Ω_n = ω_n / n`, even in `n`.
    pub fn big_omega(&self, n: i64) -> f64 {
        self.omega(n) / n as f64
    }
}

/// `ω_n = n² - 2 Σ_k min(n, k) I_k` for `n = 1..nmax`; `actions[k-1] = I_k`.
pub fn frequencies(actions: &[f64], nmax: usize) -> FrequencyTable {
    let omegas = (1..=nmax)
        .map(|n| {
            let s: f64 = actions.iter().enumerate().map(|(i, a)| (i + 1).min(n) as f64 * a).sum();
            (n * n) as f64 - 2.0 * s
        })
        .collect();
    FrequencyTable { omegas }
}

/// Closed form `Ω_n = |n| - 2 Σ_k k I_k / |n|` valid for `|n|` beyond the support of `I`.
pub fn big_omega_asymptotic(actions: &[f64], n: i64) -> f64 {
    let m: f64 = actions.iter().enumerate().map(|(i, a)| (i + 1) as f64 * a).sum();
    let a = n.unsigned_abs() as f64;
    a - 2.0 * m / a
}

/// `H^bo(u) = (1/2π) ∫ (½(|∂_x|^{1/2} u)² - u³/3)` with an exact cubic term.
pub fn hamiltonian_physical(u: &FourierSeries) -> Result<f64> {
    u.require_real_mean_zero()?;
    let mi = u.m() as i64;
    let quad: f64 = (-mi..=mi).map(|n| 0.5 * n.abs() as f64 * u.coeff(n).norm_sqr()).sum();
    let u2 = u.product(u, u.m());
    let cubic = bilinear_pairing(&u2, u)?.re;
    Ok(quad - cubic / 3.0)
}

/// `H^mo(u) = (1/2π) ∫ ½ u²`.
pub fn moment_physical(u: &FourierSeries) -> Result<f64> {
    u.require_real_mean_zero()?;
    Ok(0.5 * u.norm().powi(2))
}

/// `𝓗^bo(I) = Σ n² I_n - Σ_n (Σ_{k>=n} I_k)²`.
pub fn hamiltonian_in_actions(actions: &[f64]) -> f64 {
    let mut tail = 0.0;
    let mut sq = 0.0;
    for a in actions.iter().rev() {
        tail += a;
        sq += tail * tail;
    }
    let lin: f64 = actions.iter().enumerate().map(|(i, a)| ((i + 1) * (i + 1)) as f64 * a).sum();
    lin - sq
}

/// `Σ n I_n`.
pub fn moment_in_actions(actions: &[f64]) -> f64 {
    actions.iter().enumerate().map(|(i, a)| (i + 1) as f64 * a).sum()
}

/// Real Jacobian of `Φ^bo` at `u`: rows `(Re z_n, Im z_n)`, `n = 1..mz`;
/// columns the real Fourier directions `e^{ikx} + e^{-ikx}` and
/// `i e^{ikx} - i e^{-ikx}`, `k = 1..mj`.
#[derive(Clone, Debug)]
pub struct BirkhoffJacobian {
    pub mz: usize,
    pub mj: usize,
    pub step: f64,
    pub matrix: DMatrix<f64>,
}

/// Default central-difference step `1e-5 · max(1, ‖u‖)`.
pub fn default_step(u: &FourierSeries) -> f64 {
    1e-5 * u.norm().max(1.0)
}

/// Real direction number `j` (`2(k-1)` for the cosine, `2(k-1)+1` for the sine part).
pub fn fourier_direction(m: usize, j: usize) -> FourierSeries {
    let k = (j / 2 + 1) as i64;
    let c = if j % 2 == 0 { C64::new(1.0, 0.0) } else { C64::new(0.0, 1.0) };
    let mut v = FourierSeries::zeros(m);
    v.set(k, c);
    v.set(-k, c.conj());
    v
}

pub fn jacobian_forward(u: &FourierSeries, k: usize, mz: usize, mj: usize, h: f64, jobs: usize) -> Result<BirkhoffJacobian> {
    if mj > u.m() {
        return Err(Error::InvalidArgument(format!("mj = {mj} exceeds M = {}", u.m())));
    }
    let cols = par_map(2 * mj, jobs, |j| -> Result<Vec<f64>> {
        let v = fourier_direction(u.m(), j);
        let zp = birkhoff_forward(&u.axpy(C64::new(h, 0.0), &v), k, mz).map_err(|e| probe_error(e, j))?;
        let zm = birkhoff_forward(&u.axpy(C64::new(-h, 0.0), &v), k, mz).map_err(|e| probe_error(e, j))?;
        Ok(zp.to_real().iter().zip(zm.to_real()).map(|(a, b)| (a - b) / (2.0 * h)).collect())
    });
    let mut matrix = DMatrix::zeros(2 * mz, 2 * mj);
    for (j, c) in cols.into_iter().enumerate() {
        let c = c?;
        for (i, v) in c.into_iter().enumerate() {
            matrix[(i, j)] = v;
        }
    }
    Ok(BirkhoffJacobian { mz, mj, step: h, matrix })
}

fn probe_error(e: Error, j: usize) -> Error {
    match e {
        Error::IllConditionedPhase { index, value } => Error::InvalidArgument(format!(
            "phase normalization ill-conditioned at index {index} ({value:.3e}) along probe direction {j}"
        )),
        other => other,
    }
}

impl BirkhoffJacobian {
    /// Complex derivative `∂ z_n / ∂ u_a` (Wirtinger, `a ≠ 0`, `n >= 1`).
    fn wirtinger(&self, n: usize, a: i64) -> C64 {
        let k = a.unsigned_abs() as usize;
        let col = |j: usize| C64::new(self.matrix[(2 * (n - 1), j)], self.matrix[(2 * (n - 1) + 1, j)]);
        let d_re = col(2 * (k - 1));
        let d_im = col(2 * (k - 1) + 1);
        let i = C64::new(0.0, 1.0);
        if a > 0 {
            0.5 * (d_re - i * d_im)
        } else {
            0.5 * (d_re + i * d_im)
        }
    }

    /// `∂ z_m / ∂ u_a` for signed `m`.
    fn dz(&self, m: i64, a: i64) -> C64 {
        if m > 0 {
            self.wirtinger(m as usize, a)
        } else {
            self.wirtinger((-m) as usize, -a).conj()
        }
    }

    /// Gardner bracket `{z_n, z_m} = Σ_a (-i a) ∂z_n/∂u_a ∂z_m/∂u_{-a}` over
    /// the probed modes.
    pub fn poisson_bracket(&self, n: i64, m: i64) -> C64 {
        let mj = self.mj as i64;
        (1..=mj)
            .flat_map(|a| [a, -a])
            .map(|a| C64::new(0.0, -(a as f64)) * self.dz(n, a) * self.dz(m, -a))
            .sum()
    }
}

/// `u(x) ↦ u(-x)`.
pub fn s_rev_potential(u: &FourierSeries) -> FourierSeries {
    u.reflect()
}

/// `(z_n) ↦ (z_{-n})`.
pub fn s_rev_birkhoff(z: &BirkhoffVector) -> BirkhoffVector {
    BirkhoffVector::from_positive(z.positive().iter().map(|c| c.conj()).collect())
}

/// Coordinates `(θ_S, I_S, z_⊥)` with `z_{±n} = √(n I_n) e^{±iθ_n}` on `S_+`.
#[derive(Clone, Debug, PartialEq)]
pub struct ActionAngleState {
    pub s_plus: Vec<usize>,
    /// Angles in `[0, 2π)`.
    pub theta: Vec<f64>,
    pub actions: Vec<f64>,
    /// Full-length vector whose `S_+` entries are ignored.
    pub z_perp: BirkhoffVector,
}

impl ActionAngleState {
    pub fn from_birkhoff(z: &BirkhoffVector, s_plus: &[usize]) -> Result<Self> {
        let mut theta = Vec::new();
        let mut acts = Vec::new();
        for &n in s_plus {
            let zn = z.get(n as i64);
            let i_n = zn.norm_sqr() / n as f64;
            if !(i_n > 0.0) {
                return Err(Error::InvalidArgument(format!("action I_{n} is not positive")));
            }
            theta.push(wrap_angle(zn.arg()));
            acts.push(i_n);
        }
        let perp: Vec<usize> = (1..=z.mz()).filter(|n| !s_plus.contains(n)).collect();
        Ok(Self { s_plus: s_plus.to_vec(), theta, actions: acts, z_perp: z.restrict(&perp) })
    }

    pub fn to_birkhoff(&self) -> BirkhoffVector {
        let mut z = self.z_perp.clone();
        for ((&n, th), i_n) in self.s_plus.iter().zip(&self.theta).zip(&self.actions) {
            z.set(n, C64::from_polar((n as f64 * i_n).sqrt(), *th));
        }
        z
    }

    /// `𝒮_rev`: `θ ↦ -θ`, `I ↦ I`, `z_⊥` index flip.
    pub fn s_rev(&self) -> Self {
        Self {
            s_plus: self.s_plus.clone(),
            theta: self.theta.iter().map(|t| wrap_angle(-t)).collect(),
            actions: self.actions.clone(),
            z_perp: s_rev_birkhoff(&self.z_perp),
        }
    }
}

/// Representative in `[0, 2π)`.
pub fn wrap_angle(t: f64) -> f64 {
    let r = t.rem_euclid(TAU);
    if r >= TAU {
        0.0
    } else {
        r
    }
}

/// Distance on the circle.
pub fn angle_distance(a: f64, b: f64) -> f64 {
    let d = wrap_angle(a - b);
    d.min(TAU - d)
}
