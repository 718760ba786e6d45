//! Job configuration: an optional JSON/TOML file overridden by flags.

use std::collections::BTreeMap;
use std::path::{Path, PathBuf};

use bo_nf::finite_gap::{build_potential, FiniteGapParams};
use bo_nf::spectral::FourierSeries;
use serde::{Deserialize, Serialize};

use crate::error::CliError;

/// Where the potential comes from.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "kebab-case")]
pub enum PotentialSource {
    Zero,
    FiniteGap { r: Vec<f64>, alpha: Vec<f64> },
    /// JSON file written by `FourierSeries::to_json`.
    Coefficients { path: PathBuf },
}

impl PotentialSource {
    /// `r=0.5` or `r=0.5,alpha=0.3`; several gaps as `r=0.3:0.25,alpha=0.4:-1.1`.
    pub fn parse_finite_gap(spec: &str, gaps: Option<usize>) -> Result<Self, CliError> {
        let mut r = None;
        let mut alpha = None;
        for part in spec.split(',').map(str::trim).filter(|s| !s.is_empty()) {
            let (key, value) = part.split_once('=').ok_or_else(|| CliError::Config(format!("expected key=value, got `{part}`")))?;
            let values = value
                .split(':')
                .map(|v| v.trim().parse::<f64>().map_err(|e| CliError::Config(format!("bad number `{v}`: {e}"))))
                .collect::<Result<Vec<_>, _>>()?;
            match key.trim() {
                "r" => r = Some(values),
                "alpha" => alpha = Some(values),
                other => return Err(CliError::Config(format!("unknown finite-gap key `{other}`"))),
            }
        }
        let r = r.ok_or_else(|| CliError::Config("finite-gap spec needs r=...".into()))?;
        let alpha = alpha.unwrap_or_else(|| vec![0.0; r.len()]);
        if let Some(g) = gaps {
            if g != r.len() {
                return Err(CliError::Config(format!("expected {g} gap(s), got {}", r.len())));
            }
        }
        Ok(Self::FiniteGap { r, alpha })
    }

    pub fn params(&self) -> Option<Result<FiniteGapParams, CliError>> {
        match self {
            Self::FiniteGap { r, alpha } => Some(FiniteGapParams::new(r.clone(), alpha.clone()).map_err(|e| CliError::Config(e.to_string()))),
            _ => None,
        }
    }

    /// Real mean-zero potential at truncation `m`.
    pub fn build(&self, m: usize) -> Result<FourierSeries, CliError> {
        let q = match self {
            Self::Zero => FourierSeries::zeros(m),
            Self::FiniteGap { .. } => {
                let p = self.params().expect("finite gap")?;
                build_potential(&p, m).map_err(|e| CliError::Config(e.to_string()))?
            }
            Self::Coefficients { path } => {
                let text = std::fs::read_to_string(path).map_err(|e| CliError::Config(format!("{}: {e}", path.display())))?;
                FourierSeries::from_json(&text).map_err(|e| CliError::Config(format!("{}: {e}", path.display())))?.resized(m)
            }
        };
        q.require_real_mean_zero().map_err(|e| CliError::Config(e.to_string()))?;
        Ok(q)
    }
}

/// Resolved settings of one job; every report embeds this.
#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct JobConfig {
    #[serde(default)]
    pub command: String,
    #[serde(rename = "K")]
    pub k: Option<usize>,
    #[serde(rename = "M")]
    pub m: Option<usize>,
    #[serde(rename = "Mz")]
    pub mz: Option<usize>,
    /// Expansion order, pdo order or gap count, per job.
    #[serde(rename = "N")]
    pub n: Option<usize>,
    pub potential: Option<PotentialSource>,
    #[serde(default)]
    pub tolerances: BTreeMap<String, f64>,
    pub out: Option<PathBuf>,
    pub seed: Option<u64>,
    pub jobs: Option<usize>,
    pub dt: Option<f64>,
    #[serde(rename = "T")]
    pub t_final: Option<f64>,
    pub case: Option<String>,
    pub trials: Option<usize>,
    pub eps: Option<Vec<f64>>,
    pub norm: Option<f64>,
    pub steps: Option<usize>,
}

impl JobConfig {
    pub fn load(path: &Path) -> Result<Self, CliError> {
        let text = std::fs::read_to_string(path).map_err(|e| CliError::Config(format!("{}: {e}", path.display())))?;
        let cfg: Self = match path.extension().and_then(|e| e.to_str()) {
            Some("toml") => toml::from_str(&text).map_err(|e| CliError::Config(format!("{}: {e}", path.display())))?,
            Some("json") => serde_json::from_str(&text).map_err(|e| CliError::Config(format!("{}: {e}", path.display())))?,
            _ => return Err(CliError::Config(format!("{}: config must be .json or .toml", path.display()))),
        };
        Ok(cfg)
    }

    /// Tolerance `name`, recording the default when unset.
    pub fn tol(&mut self, name: &str, default: f64) -> f64 {
        *self.tolerances.entry(name.to_string()).or_insert(default)
    }

    pub fn validate(&self) -> Result<(), CliError> {
        if let Some((name, t)) = self.tolerances.iter().find(|(_, t)| !(**t >= 0.0 && t.is_finite())) {
            return Err(CliError::Config(format!("tolerance `{name}` must be finite and non-negative, got {t}")));
        }
        if let Some(PotentialSource::Coefficients { path }) = &self.potential {
            if !path.exists() {
                return Err(CliError::Config(format!("{} does not exist", path.display())));
            }
        }
        if self.jobs == Some(0) {
            return Err(CliError::Config("--jobs must be positive".into()));
        }
        Ok(())
    }

    pub fn out_dir(&self) -> PathBuf {
        self.out.clone().unwrap_or_else(|| PathBuf::from("out"))
    }

    pub fn potential_or(&mut self, default: PotentialSource) -> PotentialSource {
        self.potential.get_or_insert(default).clone()
    }

    pub fn jobs(&mut self) -> usize {
        *self.jobs.get_or_insert_with(bo_nf::parallel::default_jobs)
    }
}

/// `name=value` tolerance override.
pub fn parse_tolerance(s: &str) -> Result<(String, f64), String> {
    let (k, v) = s.split_once('=').ok_or_else(|| format!("expected name=value, got `{s}`"))?;
    let v: f64 = v.parse().map_err(|e| format!("bad tolerance `{v}`: {e}"))?;
    Ok((k.trim().to_string(), v))
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn parses_finite_gap_specs() {
        let p = PotentialSource::parse_finite_gap("r=0.5", None).unwrap();
        assert_eq!(p, PotentialSource::FiniteGap { r: vec![0.5], alpha: vec![0.0] });
        let p = PotentialSource::parse_finite_gap("r=0.3:0.25, alpha=0.4:-1.1", Some(2)).unwrap();
        assert_eq!(p, PotentialSource::FiniteGap { r: vec![0.3, 0.25], alpha: vec![0.4, -1.1] });
        assert!(PotentialSource::parse_finite_gap("r=0.3:0.25", Some(1)).is_err());
        assert!(PotentialSource::parse_finite_gap("s=1", None).is_err());
    }

    #[test]
    fn reads_toml() {
        let cfg: JobConfig = toml::from_str("K = 64\n[potential]\nkind = \"finite-gap\"\nr = [0.5]\nalpha = [0.0]\n[tolerances]\nlambda = 1e-9\n").unwrap();
        assert_eq!(cfg.k, Some(64));
        assert_eq!(cfg.tolerances["lambda"], 1e-9);
        assert!(toml::from_str::<JobConfig>("bogus = 1").is_err());
    }
}
