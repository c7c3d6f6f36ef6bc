use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};
use halpern_catk::config::ExperimentConfig;
use halpern_catk::experiments::{self, error_exit_code, Outcome, Verdict};
use halpern_catk::Error;

#[derive(Parser)]
#[command(name = "catk", version, about = "Halpern iteration experiments on spheres M^n_κ")]
struct Cli {
    #[command(subcommand)]
    cmd: Cmd,
}

#[derive(Subcommand)]
enum Cmd {
    /// Empirical regularity indices against Φ̃ and Φ.
    Asreg(Common),
    /// Empirical metastability index against Σ.
    Meta(Common),
    /// Resolvent family metastability against K(ε, g, M).
    Browder(Common),
    /// Randomized inequality campaigns.
    Fuzz(FuzzArgs),
    /// Evaluate every rate functional for the configured grids.
    Rates(Common),
}

#[derive(Args)]
struct Common {
    #[arg(long)]
    config: PathBuf,
    #[arg(long)]
    seed: Option<u64>,
    #[arg(long)]
    out: Option<PathBuf>,
    /// Largest exact value, in decimal digits, before switching to estimates.
    #[arg(long)]
    digit_budget: Option<u64>,
    /// Track magnitudes only.
    #[arg(long)]
    log_estimate: bool,
}

#[derive(Args)]
struct FuzzArgs {
    #[command(flatten)]
    common: Common,
    /// Restrict to these oracles (repeatable); "all" selects every one.
    #[arg(long = "oracle")]
    oracles: Vec<String>,
    #[arg(long)]
    trials: Option<u64>,
}

fn load(c: &Common) -> Result<ExperimentConfig, Error> {
    let mut cfg = ExperimentConfig::from_path(&c.config)?;
    if let Some(s) = c.seed {
        cfg.seed = s;
    }
    if let Some(o) = &c.out {
        cfg.out = o.clone();
    }
    if let Some(d) = c.digit_budget {
        cfg.digit_budget = d;
    }
    cfg.log_estimate |= c.log_estimate;
    Ok(cfg)
}

fn finish<R>(o: Outcome<R>, lines: Vec<String>) -> ExitCode {
    for l in lines {
        println!("{l}");
    }
    for f in &o.files {
        println!("wrote {}", f.display());
    }
    let label = match o.verdict {
        Verdict::Pass => "pass",
        Verdict::Inconclusive => "inconclusive",
        Verdict::BoundViolated => "bound violated",
        Verdict::InequalityViolated => "inequality violated",
    };
    println!("verdict: {label}");
    ExitCode::from(o.verdict.exit_code() as u8)
}

fn run(cmd: Cmd) -> Result<ExitCode, Error> {
    Ok(match cmd {
        Cmd::Asreg(c) => {
            let o = experiments::run_asreg(&load(&c)?)?;
            let lines = o
                .report
                .rows
                .iter()
                .map(|r| {
                    let idx = |v: Option<u64>| v.map_or("-".into(), |v| v.to_string());
                    format!(
                        "ε={} Φ̃={} Φ={} step_index={} residual_index={} {}",
                        r.eps,
                        r.phi_tilde.render_short(),
                        r.phi.render_short(),
                        idx(r.step_index),
                        idx(r.residual_index),
                        r.verdict
                    )
                })
                .collect();
            finish(o, lines)
        }
        Cmd::Meta(c) => {
            let o = experiments::run_meta(&load(&c)?)?;
            let lines = o
                .report
                .rows
                .iter()
                .map(|r| {
                    let n = r.window.as_ref().map_or("-".into(), |w| w.n.to_string());
                    let kind = if r.sigma_is_estimate { "estimate" } else { "exact" };
                    format!("ε={} N_emp={n} Σ={} ({kind}) {}", r.eps, r.sigma.render_short(), r.verdict)
                })
                .collect();
            finish(o, lines)
        }
        Cmd::Browder(c) => {
            let o = experiments::run_browder(&load(&c)?)?;
            let mut lines: Vec<String> = o
                .report
                .rows
                .iter()
                .map(|r| {
                    let k = r.window.as_ref().map_or("-".into(), |w| w.k.to_string());
                    format!("ε={} K_emp={k} K={} {}", r.eps, r.k_bound.render_short(), r.verdict)
                })
                .collect();
            lines.push(format!("d(u, z_i) nondecreasing: {}", o.report.monotone));
            finish(o, lines)
        }
        Cmd::Fuzz(f) => {
            let mut cfg = load(&f.common)?;
            if !f.oracles.is_empty() {
                cfg.fuzz.oracles = f.oracles;
            }
            if let Some(t) = f.trials {
                cfg.fuzz.trials = t;
            }
            let o = experiments::run_fuzz(&cfg)?;
            let lines = o
                .report
                .reports
                .iter()
                .map(|r| {
                    format!(
                        "{} κ={} M√κ={} accepted={} skipped={} rejected={} violations={} max_residual={:e}",
                        r.oracle, r.kappa, r.scaled_m, r.accepted, r.skipped, r.rejected, r.violations, r.max_residual
                    )
                })
                .collect();
            finish(o, lines)
        }
        Cmd::Rates(c) => {
            let o = experiments::run_rates(&load(&c)?)?;
            let r = &o.report;
            let mut lines = Vec::new();
            for (name, vals) in [("Φ̃", &r.phi_tilde), ("Φ", &r.phi), ("Ψ", &r.psi), ("K", &r.browder_k)] {
                for v in vals {
                    lines.push(format!("{name}({}) = {}", v.eps, v.value.render_short()));
                }
            }
            for v in &r.limsup {
                lines.push(format!("limsup rate(ε={}, t={}) = {}", v.eps, v.t, v.value.render_short()));
            }
            for v in &r.recurrence {
                lines.push(format!("Θ = {}, Δ = {:e} (ε={}, L={})", v.bounds.theta.render_short(), v.delta, v.eps, v.l));
            }
            for t in &r.towers {
                let kind = if t.sigma_is_estimate { "estimate" } else { "exact" };
                lines.push(format!("Σ({}) = {} ({kind})", t.eps, t.sigma.render_short()));
            }
            finish(o, lines)
        }
    })
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match run(cli.cmd) {
        Ok(code) => code,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(error_exit_code(&e) as u8)
        }
    }
}
