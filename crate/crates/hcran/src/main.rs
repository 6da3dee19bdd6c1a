use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};
use hcran::io::{write_json, write_tables};
use hcran::{optimize_one, run_experiment, ExperimentSpec, HarnessError, Preset, Result};
use hcran_core::{RxMode, Scheme};

/// Uplink H-CRAN rate analysis and fronthaul/bandwidth optimization.
#[derive(Parser)]
#[command(name = "hcran", version)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Deterministic equivalents against Monte Carlo over a sweep of J.
    Validate(Common),
    /// Joint optimization of a single drop; prints or writes JSON.
    Optimize(Common),
    /// Run a preset or experiment file and write one CSV per panel.
    Sweep(Common),
}

#[derive(Args)]
struct Common {
    /// TOML experiment file.
    #[arg(long)]
    config: Option<PathBuf>,
    /// validate, joint_vs_baselines, wz_vs_p2p, uniform_vs_optimal or custom.
    #[arg(long, value_parser = parse_preset)]
    preset: Option<Preset>,
    /// Monte Carlo trials per point.
    #[arg(long)]
    trials: Option<usize>,
    /// Single scenario seed, replacing the seed list.
    #[arg(long)]
    seed: Option<u64>,
    /// Output directory (validate, sweep) or JSON file (optimize).
    #[arg(long)]
    out: Option<PathBuf>,
    #[arg(long, value_parser = parse_scheme)]
    scheme: Option<Scheme>,
    #[arg(long, value_parser = parse_mode)]
    mode: Option<RxMode>,
}

fn parse_preset(s: &str) -> Result<Preset, String> {
    s.parse().map_err(|e: HarnessError| e.to_string())
}

fn parse_scheme(s: &str) -> Result<Scheme, String> {
    Scheme::ALL
        .into_iter()
        .find(|x| x.as_str() == s)
        .ok_or_else(|| format!("expected p2p or wz, got `{s}`"))
}

fn parse_mode(s: &str) -> Result<RxMode, String> {
    RxMode::ALL
        .into_iter()
        .find(|x| x.as_str() == s)
        .ok_or_else(|| format!("expected sic or lin, got `{s}`"))
}

impl Common {
    fn spec(&self, fallback: Preset) -> Result<ExperimentSpec> {
        let mut spec = match &self.config {
            Some(p) => ExperimentSpec::load(p)?,
            None => ExperimentSpec::preset(self.preset.unwrap_or(fallback)),
        };
        if let Some(p) = self.preset {
            spec.preset = p;
        }
        if let Some(t) = self.trials {
            spec.trials = Some(t);
        }
        if let Some(s) = self.seed {
            spec.seeds = Some(vec![s]);
        }
        if let Some(o) = &self.out {
            spec.out = Some(o.clone());
        }
        if let Some(s) = self.scheme {
            spec.schemes = Some(vec![s]);
        }
        if let Some(m) = self.mode {
            spec.modes = Some(vec![m]);
        }
        Ok(spec)
    }
}

const VALIDATE_TOL: f64 = 0.03;

fn sweep(spec: &ExperimentSpec) -> Result<Vec<hcran::io::Table>> {
    let exp = spec.resolve()?;
    let tables = run_experiment(&exp)?;
    let dir = spec.out.clone().unwrap_or_else(|| PathBuf::from("out"));
    for p in write_tables(&dir, &exp, &tables)? {
        println!("wrote {}", p.display());
    }
    Ok(tables)
}

fn run(cli: Cli) -> Result<()> {
    match cli.command {
        Command::Validate(c) => {
            let spec = c.spec(Preset::Validate)?;
            if spec.preset != Preset::Validate {
                return Err(HarnessError::Spec(format!(
                    "validate cannot run preset {}",
                    spec.preset
                )));
            }
            let tables = sweep(&spec)?;
            let t = &tables[0];
            for q in hcran::experiments::VALIDATE_QUANTITIES {
                let worst = t
                    .select(&[("quantity", q)])
                    .map(|r| t.num(r, "rel_err"))
                    .fold(0.0, f64::max);
                let verdict = if worst <= VALIDATE_TOL { "ok" } else { "over tolerance" };
                println!("{q}: max |DE-MC|/MC = {:.3}% ({verdict})", 100.0 * worst);
            }
        }
        Command::Sweep(c) => {
            let spec = c.spec(Preset::Validate)?;
            if c.config.is_none() && c.preset.is_none() {
                return Err(HarnessError::Spec("sweep needs --config or --preset".into()));
            }
            sweep(&spec)?;
        }
        Command::Optimize(c) => {
            let spec = c.spec(Preset::JointVsBaselines)?;
            let exp = spec.resolve()?;
            let scheme = c.scheme.unwrap_or(exp.schemes[0]);
            let mode = c.mode.unwrap_or(exp.modes[0]);
            let report = optimize_one(&exp, exp.seeds[0], scheme, mode)?;
            match &spec.out {
                Some(p) => {
                    write_json(p, &report)?;
                    println!("wrote {}", p.display());
                }
                None => println!("{}", serde_json::to_string_pretty(&report)?),
            }
        }
    }
    Ok(())
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(c) => c,
        Err(e) => {
            let _ = e.print();
            return ExitCode::from(if e.use_stderr() { 1 } else { 0 });
        }
    };
    match run(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(e.exit_code() as u8)
        }
    }
}
