//! Summary JSON, CSV tables and SVG plots.

use std::fs;
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use crate::config::JobConfig;
use crate::error::CliError;

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Check {
    pub name: String,
    #[serde(with = "extended_f64")]
    pub value: f64,
    #[serde(with = "extended_f64")]
    pub tol: f64,
    pub pass: bool,
}

/// JSON has no infinities; non-finite values travel as `"inf"`, `"-inf"`, `"nan"`.
mod extended_f64 {
    use serde::{Deserialize, Deserializer, Serializer};

    pub fn serialize<S: Serializer>(v: &f64, s: S) -> Result<S::Ok, S::Error> {
        if v.is_finite() {
            s.serialize_f64(*v)
        } else {
            s.serialize_str(&v.to_string().to_lowercase())
        }
    }

    #[derive(Deserialize)]
    #[serde(untagged)]
    enum Repr {
        Num(f64),
        Text(String),
    }

    pub fn deserialize<'de, D: Deserializer<'de>>(d: D) -> Result<f64, D::Error> {
        match Repr::deserialize(d)? {
            Repr::Num(v) => Ok(v),
            Repr::Text(t) => t.parse().map_err(serde::de::Error::custom),
        }
    }
}

impl Check {
    /// Passes when `value <= tol`.
    pub fn at_most(name: &str, value: f64, tol: f64) -> Self {
        Self { name: name.into(), value, tol, pass: value <= tol }
    }

    /// Passes when `value >= tol`.
    pub fn at_least(name: &str, value: f64, tol: f64) -> Self {
        Self { name: name.into(), value, tol, pass: value >= tol }
    }

    /// Passes when `value < tol`.
    pub fn below(name: &str, value: f64, tol: f64) -> Self {
        Self { name: name.into(), value, tol, pass: value < tol }
    }
}

#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct Summary {
    pub job: String,
    pub config_hash: String,
    pub config: JobConfig,
    pub checks: Vec<Check>,
    #[serde(default)]
    pub outputs: Vec<String>,
    #[serde(default)]
    pub error: Option<String>,
    pub exit_code: u8,
}

impl Summary {
    pub fn new(config: &JobConfig, checks: Vec<Check>, outputs: Vec<PathBuf>, error: Option<&CliError>) -> Self {
        let exit_code = match error {
            Some(e) => e.exit_code(),
            None if checks.iter().all(|c| c.pass) => 0,
            None => 1,
        };
        Self {
            job: config.command.clone(),
            config_hash: config_hash(config),
            config: config.clone(),
            checks,
            outputs: outputs.iter().map(|p| p.display().to_string()).collect(),
            error: error.map(|e| e.to_string()),
            exit_code,
        }
    }

    pub fn path(out: &Path, job: &str) -> PathBuf {
        out.join(format!("{job}.summary.json"))
    }

    pub fn write(&self, out: &Path) -> Result<PathBuf, CliError> {
        fs::create_dir_all(out)?;
        let path = Self::path(out, &self.job);
        fs::write(&path, serde_json::to_string_pretty(self)? + "\n")?;
        Ok(path)
    }
}

/// SHA-256 of the canonical JSON of the resolved config.
pub fn config_hash(config: &JobConfig) -> String {
    let json = serde_json::to_string(config).expect("config serializes");
    Sha256::digest(json.as_bytes()).iter().map(|b| format!("{b:02x}")).collect()
}

/// Write `rows` under `header` to `out/name`.
pub fn write_csv(out: &Path, name: &str, header: &[String], rows: &[Vec<f64>]) -> Result<PathBuf, CliError> {
    fs::create_dir_all(out)?;
    let path = out.join(name);
    let mut w = csv::Writer::from_path(&path)?;
    w.write_record(header)?;
    for r in rows {
        w.write_record(r.iter().map(|v| format!("{v:.17e}")))?;
    }
    w.flush()?;
    Ok(path)
}

pub fn header(names: &[&str]) -> Vec<String> {
    names.iter().map(|s| s.to_string()).collect()
}

/// Axis scaling of a plot.
#[derive(Clone, Copy, Debug, PartialEq)]
pub enum Scale {
    Linear,
    Log,
}

pub struct Plot<'a> {
    pub title: &'a str,
    pub x_label: &'a str,
    pub y_label: &'a str,
    pub x_scale: Scale,
    pub y_scale: Scale,
    pub series: Vec<(String, Vec<(f64, f64)>)>,
}

const COLORS: [&str; 6] = ["#1f77b4", "#d62728", "#2ca02c", "#9467bd", "#ff7f0e", "#17becf"];

impl Plot<'_> {
    /// Static SVG line plot; points that cannot be shown on a log axis are dropped.
    pub fn to_svg(&self) -> String {
        let (w, h, pad) = (640.0, 420.0, 60.0);
        let tx = |v: f64| if self.x_scale == Scale::Log { v.log10() } else { v };
        let ty = |v: f64| if self.y_scale == Scale::Log { v.abs().log10() } else { v };
        let ok = |&(x, y): &(f64, f64)| {
            let xv = tx(x);
            let yv = ty(y);
            xv.is_finite() && yv.is_finite() && !(self.y_scale == Scale::Log && y == 0.0)
        };
        let pts: Vec<Vec<(f64, f64)>> = self.series.iter().map(|(_, s)| s.iter().filter(|p| ok(p)).map(|&(x, y)| (tx(x), ty(y))).collect()).collect();
        let all: Vec<&(f64, f64)> = pts.iter().flatten().collect();
        let (mut x0, mut x1, mut y0, mut y1) = (f64::INFINITY, f64::NEG_INFINITY, f64::INFINITY, f64::NEG_INFINITY);
        for (x, y) in &all {
            x0 = x0.min(*x);
            x1 = x1.max(*x);
            y0 = y0.min(*y);
            y1 = y1.max(*y);
        }
        if all.is_empty() {
            (x0, x1, y0, y1) = (0.0, 1.0, 0.0, 1.0);
        }
        if x1 - x0 < 1e-300 {
            x1 = x0 + 1.0;
        }
        if y1 - y0 < 1e-300 {
            y1 = y0 + 1.0;
        }
        let sx = |x: f64| pad + (x - x0) / (x1 - x0) * (w - 2.0 * pad);
        let sy = |y: f64| h - pad - (y - y0) / (y1 - y0) * (h - 2.0 * pad);
        let axis = |scale: Scale, a: f64, b: f64| match scale {
            Scale::Log => (format!("1e{a:.1}"), format!("1e{b:.1}")),
            Scale::Linear => (format!("{a:.3e}"), format!("{b:.3e}")),
        };
        let (xa, xb) = axis(self.x_scale, x0, x1);
        let (ya, yb) = axis(self.y_scale, y0, y1);
        let mut s = format!("<svg xmlns=\"http://www.w3.org/2000/svg\" width=\"{w}\" height=\"{h}\" font-family=\"sans-serif\" font-size=\"12\">\n");
        s += &format!("<rect width=\"{w}\" height=\"{h}\" fill=\"white\"/>\n");
        s += &format!("<text x=\"{}\" y=\"24\" text-anchor=\"middle\" font-size=\"15\">{}</text>\n", w / 2.0, escape(self.title));
        s += &format!("<rect x=\"{pad}\" y=\"{pad}\" width=\"{}\" height=\"{}\" fill=\"none\" stroke=\"black\"/>\n", w - 2.0 * pad, h - 2.0 * pad);
        s += &format!("<text x=\"{pad}\" y=\"{}\">{xa}</text><text x=\"{}\" y=\"{}\" text-anchor=\"end\">{xb}</text>\n", h - pad + 16.0, w - pad, h - pad + 16.0);
        s += &format!("<text x=\"{}\" y=\"{}\" text-anchor=\"end\">{ya}</text><text x=\"{}\" y=\"{}\" text-anchor=\"end\">{yb}</text>\n", pad - 4.0, h - pad, pad - 4.0, pad + 10.0);
        s += &format!("<text x=\"{}\" y=\"{}\" text-anchor=\"middle\">{}</text>\n", w / 2.0, h - 14.0, escape(self.x_label));
        s += &format!("<text x=\"16\" y=\"{}\" transform=\"rotate(-90 16 {})\" text-anchor=\"middle\">{}</text>\n", h / 2.0, h / 2.0, escape(self.y_label));
        for (i, ((name, _), p)) in self.series.iter().zip(&pts).enumerate() {
            let c = COLORS[i % COLORS.len()];
            let path: Vec<String> = p.iter().map(|&(x, y)| format!("{:.2},{:.2}", sx(x), sy(y))).collect();
            s += &format!("<polyline fill=\"none\" stroke=\"{c}\" stroke-width=\"1.5\" points=\"{}\"/>\n", path.join(" "));
            for &(x, y) in p {
                s += &format!("<circle cx=\"{:.2}\" cy=\"{:.2}\" r=\"2\" fill=\"{c}\"/>\n", sx(x), sy(y));
            }
            s += &format!("<text x=\"{}\" y=\"{}\" fill=\"{c}\" text-anchor=\"end\">{}</text>\n", w - pad - 4.0, pad + 16.0 + 14.0 * i as f64, escape(name));
        }
        s + "</svg>\n"
    }

    pub fn write(&self, out: &Path, name: &str) -> Result<PathBuf, CliError> {
        fs::create_dir_all(out)?;
        let path = out.join(name);
        fs::write(&path, self.to_svg())?;
        Ok(path)
    }
}

fn escape(s: &str) -> String {
    s.replace('&', "&amp;").replace('<', "&lt;").replace('>', "&gt;")
}
