//! `bo-nf` command-line verification jobs.

mod config;
mod error;
mod jobs;
mod report;

use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};

use config::{parse_tolerance, JobConfig, PotentialSource};
use error::CliError;
use report::Summary;

#[derive(Parser, Debug)]
#[command(name = "bo-nf", version, about = "Verification jobs for periodic Benjamin-Ono normal forms")]
struct Cli {
    #[command(subcommand)]
    command: Command,
    #[command(flatten)]
    common: Common,
}

#[derive(Subcommand, Debug, Clone, Copy, PartialEq)]
enum Command {
    /// Lax spectrum, gaps and trace formulas
    Spectrum,
    /// Birkhoff coordinates, actions and cross-chart Hamiltonians
    Birkhoff,
    /// Recover finite-gap parameters from Birkhoff coordinates
    FinitegapInvert,
    /// Asymptotic expansion of W_n and its remainder slopes
    WnExpansion,
    /// Paraproduct, composition and Hankel checks
    PdoCheck,
    /// Corrector identities and symplecticity
    CorrectorCheck,
    /// Quadratic and cubic structure of H ∘ Ψ
    NormalformCheck,
    /// ETDRK4 evolution with phase diagnostics
    Evolve,
    /// Collect job summaries in the output directory
    Report,
}

impl Command {
    fn name(self) -> &'static str {
        match self {
            Self::Spectrum => "spectrum",
            Self::Birkhoff => "birkhoff",
            Self::FinitegapInvert => "finitegap-invert",
            Self::WnExpansion => "wn-expansion",
            Self::PdoCheck => "pdo-check",
            Self::CorrectorCheck => "corrector-check",
            Self::NormalformCheck => "normalform-check",
            Self::Evolve => "evolve",
            Self::Report => "report",
        }
    }
}

#[derive(Args, Debug, Default)]
struct Common {
    /// JSON or TOML job config; flags override its values
    #[arg(long, global = true)]
    config: Option<PathBuf>,
    /// Output directory (default `out`)
    #[arg(long, global = true)]
    out: Option<PathBuf>,
    /// Worker threads
    #[arg(long, global = true)]
    jobs: Option<usize>,
    /// Lax truncation
    #[arg(long = "K", global = true)]
    k: Option<usize>,
    /// Fourier truncation
    #[arg(long = "M", global = true)]
    m: Option<usize>,
    /// Birkhoff truncation
    #[arg(long = "Mz", global = true)]
    mz: Option<usize>,
    /// Expansion or pdo order
    #[arg(long = "N", global = true)]
    n: Option<usize>,
    /// Use the zero potential
    #[arg(long, global = true, conflicts_with_all = ["one_gap", "finite_gap", "coeffs"])]
    zero: bool,
    /// One-gap potential, e.g. `r=0.5` or `r=0.5,alpha=0.3`
    #[arg(long, global = true, conflicts_with_all = ["finite_gap", "coeffs"])]
    one_gap: Option<String>,
    /// Finite-gap potential, e.g. `r=0.3:0.25,alpha=0.4:-1.1`
    #[arg(long, global = true, conflicts_with = "coeffs")]
    finite_gap: Option<String>,
    /// Fourier coefficients JSON file
    #[arg(long, global = true)]
    coeffs: Option<PathBuf>,
    /// Tolerance override `name=value` (repeatable)
    #[arg(long = "tol", global = true, value_parser = parse_tolerance)]
    tol: Vec<(String, f64)>,
    #[arg(long, global = true)]
    seed: Option<u64>,
    /// Time step
    #[arg(long, global = true)]
    dt: Option<f64>,
    /// Final time
    #[arg(long = "T", global = true)]
    t_final: Option<f64>,
    /// Pdo case: k<k>l<l>, bony or hankel
    #[arg(long, global = true)]
    case: Option<String>,
    /// Random tangent pairs for the symplecticity check
    #[arg(long, global = true)]
    trials: Option<usize>,
    /// Comma-separated ε values
    #[arg(long, global = true, value_delimiter = ',')]
    eps: Option<Vec<f64>>,
    /// ‖z_⊥‖_0 of the test point
    #[arg(long, global = true)]
    norm: Option<f64>,
    /// RK4 steps of the corrector flow, or the trajectory save interval
    #[arg(long, global = true)]
    steps: Option<usize>,
}

fn resolve(cmd: Command, c: &Common) -> Result<JobConfig, CliError> {
    let mut cfg = match &c.config {
        Some(p) => JobConfig::load(p)?,
        None => JobConfig::default(),
    };
    cfg.command = cmd.name().to_string();
    macro_rules! set {
        ($($f:ident),*) => { $( if c.$f.is_some() { cfg.$f = c.$f.clone(); } )* };
    }
    set!(out, jobs, k, m, mz, n, seed, dt, t_final, case, trials, eps, norm, steps);
    if c.zero {
        cfg.potential = Some(PotentialSource::Zero);
    } else if let Some(s) = &c.one_gap {
        cfg.potential = Some(PotentialSource::parse_finite_gap(s, Some(1))?);
    } else if let Some(s) = &c.finite_gap {
        cfg.potential = Some(PotentialSource::parse_finite_gap(s, None)?);
    } else if let Some(p) = &c.coeffs {
        cfg.potential = Some(PotentialSource::Coefficients { path: p.clone() });
    }
    for (name, v) in &c.tol {
        cfg.tolerances.insert(name.clone(), *v);
    }
    cfg.validate()?;
    Ok(cfg)
}

fn dispatch(cmd: Command, cfg: &mut JobConfig, out: &Path) -> jobs::JobResult {
    match cmd {
        Command::Spectrum => jobs::spectrum(cfg, out),
        Command::Birkhoff => jobs::birkhoff(cfg, out),
        Command::FinitegapInvert => jobs::finitegap_invert(cfg, out),
        Command::WnExpansion => jobs::wn_expansion(cfg, out),
        Command::PdoCheck => jobs::pdo_check(cfg, out),
        Command::CorrectorCheck => jobs::corrector_check(cfg, out),
        Command::NormalformCheck => jobs::normalform_check(cfg, out),
        Command::Evolve => jobs::evolve_job(cfg, out),
        Command::Report => jobs::report(cfg, out),
    }
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let cmd = cli.command;
    let (mut cfg, result) = match resolve(cmd, &cli.common) {
        Ok(mut cfg) => {
            let out = cfg.out_dir();
            let r = std::fs::create_dir_all(&out).map_err(CliError::from).and_then(|_| dispatch(cmd, &mut cfg, &out));
            (cfg, r)
        }
        Err(e) => {
            let cfg = JobConfig { command: cmd.name().to_string(), out: cli.common.out.clone(), ..JobConfig::default() };
            (cfg, Err(e))
        }
    };
    let out = cfg.out_dir();
    cfg.out = Some(out.clone());
    let summary = match &result {
        Ok((checks, files)) => Summary::new(&cfg, checks.clone(), files.clone(), None),
        Err(e) => Summary::new(&cfg, vec![], vec![], Some(e)),
    };
    if let Err(e) = &result {
        eprintln!("{}: {e}", cmd.name());
    }
    for c in &summary.checks {
        println!("{:<32} {:>12.4e}  tol {:>10.3e}  {}", c.name, c.value, c.tol, if c.pass { "pass" } else { "FAIL" });
    }
    match summary.write(&out) {
        Ok(p) => println!("summary: {}", p.display()),
        Err(e) => {
            eprintln!("{}: cannot write summary: {e}", cmd.name());
            return ExitCode::from(2);
        }
    }
    ExitCode::from(summary.exit_code)
}
