//! ETDRK4 integrator for `∂_t u = ∂_x(|∂_x| u - u²)` on the circle.

use serde::Serialize;

use crate::birkhoff::{birkhoff_from_spectrum, frequencies, hamiltonian_physical, moment_physical};
use crate::error::{Error, Result};
use crate::lax::LaxSpectrum;
use crate::spectral::{fft_len, grid_transform, FourierSeries, C64};

/// Points on the contour used for the φ-functions.
const CONTOUR_POINTS: usize = 64;
/// Blow-up threshold on `‖u(t)‖ / ‖u_0‖`.
pub const BLOWUP_RATIO: f64 = 10.0;

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct EvolutionConfig {
    /// Signed time step; its sign must match `t_final`.
    pub dt: f64,
    pub t_final: f64,
    /// Truncation `M`.
    pub m: usize,
    /// Evaluate `u²` on a grid of at least `3M + 1` points (2/3 rule).
    pub dealias: bool,
    /// Keep every `save_every`-th step in the trajectory (the endpoint is always kept).
    pub save_every: usize,
}

impl EvolutionConfig {
    pub fn new(dt: f64, t_final: f64, m: usize) -> Self {
        Self { dt, t_final, m, dealias: true, save_every: usize::MAX }
    }

    pub fn steps(&self) -> Result<usize> {
        if !(self.dt != 0.0 && self.dt.is_finite() && self.t_final.is_finite()) || self.dt * self.t_final < 0.0 {
            return Err(Error::InvalidArgument(format!("invalid dt = {} for T = {}", self.dt, self.t_final)));
        }
        Ok((self.t_final / self.dt).round().max(0.0) as usize)
    }
}

/// ETDRK4 coefficients for the diagonal symbol `L_n = i n|n|`.
struct EtdCoeffs {
    e: Vec<C64>,
    e2: Vec<C64>,
    q: Vec<C64>,
    f1: Vec<C64>,
    f2: Vec<C64>,
    f3: Vec<C64>,
}

/// Contour means of the φ-type functions around `L h` (radius 1), which
/// avoids the cancellation of the closed forms at small `|L h|`.
fn etd_coeffs(m: usize, h: f64) -> EtdCoeffs {
    let roots: Vec<C64> = (0..CONTOUR_POINTS)
        .map(|j| C64::from_polar(1.0, std::f64::consts::TAU * (j as f64 + 0.5) / CONTOUR_POINTS as f64))
        .collect();
    let mean = |lh: C64, f: &dyn Fn(C64) -> C64| -> C64 { roots.iter().map(|r| f(lh + r)).sum::<C64>() / CONTOUR_POINTS as f64 };
    let mi = m as i64;
    let mut c = EtdCoeffs { e: vec![], e2: vec![], q: vec![], f1: vec![], f2: vec![], f3: vec![] };
    for n in -mi..=mi {
        let lh = C64::new(0.0, (n * n.abs()) as f64 * h);
        c.e.push(lh.exp());
        c.e2.push((lh / 2.0).exp());
        c.q.push(mean(lh, &|z| ((z / 2.0).exp() - 1.0) / z) * h);
        c.f1.push(mean(lh, &|z| (-4.0 - z + z.exp() * (4.0 - 3.0 * z + z * z)) / (z * z * z)) * h);
        c.f2.push(mean(lh, &|z| (2.0 + z + z.exp() * (z - 2.0)) / (z * z * z)) * h);
        c.f3.push(mean(lh, &|z| (-4.0 - 3.0 * z - z * z + z.exp() * (4.0 - z)) / (z * z * z)) * h);
    }
    c
}

/// `-∂_x(u²)` with the product on `grid` points.
fn nonlinear(u: &[C64], m: usize, grid: usize) -> Result<Vec<C64>> {
    let s = FourierSeries::from_coeffs(m, u.to_vec())?;
    let g = s.to_grid(grid)?;
    let sq: Vec<C64> = g.iter().map(|v| v * v).collect();
    let p = grid_transform(&sq, m)?;
    let mi = m as i64;
    Ok((-mi..=mi).map(|n| C64::new(0.0, -(n as f64)) * p.coeff(n)).collect())
}

/// Snapshots `(t, u(t))`.
#[derive(Clone, Debug)]
pub struct Trajectory {
    pub frames: Vec<(f64, FourierSeries)>,
}

impl Trajectory {
    pub fn last(&self) -> &FourierSeries {
        &self.frames.last().expect("at least the initial frame").1
    }

    /// JSON frames `[{t, re, im, M}]`.
    pub fn to_json(&self) -> Result<String> {
        #[derive(Serialize)]
        struct Frame {
            t: f64,
            #[serde(rename = "M")]
            m: usize,
            re: Vec<f64>,
            im: Vec<f64>,
        }
        let frames: Vec<Frame> = self
            .frames
            .iter()
            .map(|(t, u)| Frame { t: *t, m: u.m(), re: u.coeffs().iter().map(|c| c.re).collect(), im: u.coeffs().iter().map(|c| c.im).collect() })
            .collect();
        Ok(serde_json::to_string(&frames)?)
    }
}

pub fn evolve(u0: &FourierSeries, cfg: &EvolutionConfig) -> Result<Trajectory> {
    u0.require_real_mean_zero()?;
    let steps = cfg.steps()?;
    let m = cfg.m;
    let h = if steps == 0 { 0.0 } else { cfg.t_final / steps as f64 };
    let grid = if cfg.dealias { fft_len(3 * m + 1) } else { 2 * m + 1 };
    let c = etd_coeffs(m, h);
    let mut u: Vec<C64> = u0.resized(m).coeffs().to_vec();
    let n0 = u0.norm().max(f64::MIN_POSITIVE);
    let mut frames = vec![(0.0, u0.resized(m))];
    for s in 0..steps {
        let nu = nonlinear(&u, m, grid)?;
        let a: Vec<C64> = (0..u.len()).map(|i| c.e2[i] * u[i] + c.q[i] * nu[i]).collect();
        let na = nonlinear(&a, m, grid)?;
        let b: Vec<C64> = (0..u.len()).map(|i| c.e2[i] * u[i] + c.q[i] * na[i]).collect();
        let nb = nonlinear(&b, m, grid)?;
        let cc: Vec<C64> = (0..u.len()).map(|i| c.e2[i] * a[i] + c.q[i] * (2.0 * nb[i] - nu[i])).collect();
        let nc = nonlinear(&cc, m, grid)?;
        for i in 0..u.len() {
            u[i] = c.e[i] * u[i] + c.f1[i] * nu[i] + 2.0 * c.f2[i] * (na[i] + nb[i]) + c.f3[i] * nc[i];
        }
        u[m] = C64::new(0.0, 0.0);
        let t = h * (s + 1) as f64;
        let cur = FourierSeries::from_coeffs(m, u.clone())?.symmetrized();
        let ratio = cur.norm() / n0;
        if !ratio.is_finite() || (u0.norm() > 0.0 && ratio > BLOWUP_RATIO) {
            return Err(Error::BlowUp { t, ratio });
        }
        u = cur.coeffs().to_vec();
        if (s + 1) % cfg.save_every.max(1) == 0 || s + 1 == steps {
            frames.push((t, cur));
        }
    }
    Ok(Trajectory { frames })
}

/// Spectral and phase diagnostics along a trajectory.
#[derive(Clone, Debug, Serialize)]
pub struct DiagnosticRow {
    pub t: f64,
    pub h_bo: f64,
    pub h_mo: f64,
    pub gaps: Vec<f64>,
    /// `|ζ_n(t) - e^{iω_n t} ζ_n(0)|`, `n ∈ S_+`.
    pub phase_defects: Vec<f64>,
}

#[derive(Clone, Debug, Serialize)]
pub struct PhaseReport {
    pub max_phase_defect: f64,
    pub max_gap_drift: f64,
    /// `max_n ||z_n(t)| - |z_n(0)||` over `S_+` and the other band modes.
    pub max_modulus_drift: f64,
    pub h_bo_drift: f64,
    pub h_mo_drift: f64,
    pub rows: Vec<DiagnosticRow>,
}

/// Compare `ζ_n(u(t))` with `e^{iω_n t} ζ_n(u_0)` for `n ∈ s_plus` at every
/// stored frame; `k` is the Lax truncation and `n_gaps` the reported gaps.
pub fn phase_verify(traj: &Trajectory, k: usize, s_plus: &[usize], n_gaps: usize) -> Result<PhaseReport> {
    let (_, u0) = &traj.frames[0];
    let spec0 = LaxSpectrum::compute(&u0.resized(u0.m().max(k)), k)?;
    let nz = n_gaps.max(s_plus.iter().copied().max().unwrap_or(0)).min(spec0.band);
    let z0 = birkhoff_from_spectrum(&spec0, nz)?;
    let acts: Vec<f64> = (1..=spec0.band).map(|n| spec0.gap(n)).collect();
    let freq = frequencies(&acts, nz);
    let h0 = hamiltonian_physical(u0)?;
    let m0 = moment_physical(u0)?;
    let mut rep = PhaseReport { max_phase_defect: 0.0, max_gap_drift: 0.0, max_modulus_drift: 0.0, h_bo_drift: 0.0, h_mo_drift: 0.0, rows: vec![] };
    for (t, u) in &traj.frames {
        let spec = LaxSpectrum::compute(&u.resized(u.m().max(k)), k)?;
        let z = birkhoff_from_spectrum(&spec, nz)?;
        let mut defects = Vec::new();
        for &n in s_plus {
            let zeta0 = z0.get(n as i64) / (n as f64).sqrt();
            let zeta = z.get(n as i64) / (n as f64).sqrt();
            let pred = zeta0 * C64::from_polar(1.0, freq.omega(n as i64) * t);
            defects.push((zeta - pred).norm());
        }
        for n in 1..=nz {
            let d = (z.get(n as i64).norm() - z0.get(n as i64).norm()).abs();
            rep.max_modulus_drift = rep.max_modulus_drift.max(d);
        }
        let gaps: Vec<f64> = (1..=n_gaps.min(spec.band)).map(|n| spec.gap(n)).collect();
        for (n, g) in gaps.iter().enumerate() {
            rep.max_gap_drift = rep.max_gap_drift.max((g - spec0.gap(n + 1)).abs());
        }
        let hb = hamiltonian_physical(u)?;
        let hm = moment_physical(u)?;
        rep.h_bo_drift = rep.h_bo_drift.max((hb - h0).abs());
        rep.h_mo_drift = rep.h_mo_drift.max((hm - m0).abs());
        rep.max_phase_defect = defects.iter().copied().fold(rep.max_phase_defect, f64::max);
        rep.rows.push(DiagnosticRow { t: *t, h_bo: hb, h_mo: hm, gaps, phase_defects: defects });
    }
    Ok(rep)
}

/// Largest coefficient difference between runs at `dt` and `dt/2`.
pub fn step_halving_defect(u0: &FourierSeries, cfg: &EvolutionConfig) -> Result<f64> {
    let a = evolve(u0, cfg)?;
    let half = EvolutionConfig { dt: cfg.dt / 2.0, ..cfg.clone() };
    let b = evolve(u0, &half)?;
    Ok(a.last().sub(b.last())?.max_abs())
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn zero_stays_zero() {
        let u0 = FourierSeries::zeros(8);
        let t = evolve(&u0, &EvolutionConfig::new(0.01, 0.1, 8)).unwrap();
        assert_eq!(t.last().max_abs(), 0.0);
    }

    #[test]
    fn linear_modes_rotate_exactly() {
        let u0 = FourierSeries::from_fn(4, |n| if n.abs() == 3 { C64::new(1e-9, 0.0) } else { C64::new(0.0, 0.0) });
        let cfg = EvolutionConfig::new(0.01, 0.5, 4);
        let u = evolve(&u0, &cfg).unwrap();
        let want = C64::new(1e-9, 0.0) * C64::from_polar(1.0, 9.0 * 0.5);
        assert!((u.last().coeff(3) - want).norm() < 1e-22);
    }

    #[test]
    fn rejects_bad_steps() {
        assert!(EvolutionConfig::new(-0.1, 1.0, 4).steps().is_err());
        assert!(EvolutionConfig::new(0.0, 1.0, 4).steps().is_err());
    }
}
