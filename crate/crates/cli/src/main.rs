mod config;
mod error;
mod stages;
mod store;
mod verify;

use clap::{Args, Parser, Subcommand};
use config::RunConfig;
use error::CliError;
use stages::{summary_lines, Pipeline};
use std::path::PathBuf;
use std::process::ExitCode;

/// Singular soliton, inner asymptotics and the two heat flows issuing from it.
#[derive(Parser)]
#[command(name = "expheat", version)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Args, Clone)]
struct Common {
    /// Flat `key = value` configuration file.
    #[arg(long, value_name = "PATH")]
    config: Option<PathBuf>,
    /// Output directory (overrides `out_dir`).
    #[arg(long, value_name = "DIR")]
    out: Option<PathBuf>,
    /// Recompute the requested stage even when its cached artifacts are current.
    #[arg(long)]
    force: bool,
}

#[derive(Subcommand)]
enum Command {
    /// Inner correction η: eta.csv, eta-diagnostics.json.
    Eta(Common),
    /// Critical mass and profile: phistar.csv, phistar-table.json, soliton-summary.json.
    Soliton {
        #[command(flatten)]
        common: Common,
        /// Classify the trajectory at this mass instead (classification.json).
        #[arg(long, value_name = "REAL")]
        m_override: Option<f64>,
    },
    /// Heat flows: slices/*.csv, u0-bounds.json, residuals.json, nonuniqueness.json, picard.json.
    Evolve {
        #[command(flatten)]
        common: Common,
        /// Emit u0 slices only.
        #[arg(long)]
        skip_picard: bool,
        /// Horizon T; must be below ε².
        #[arg(long, value_name = "REAL")]
        t_max: Option<f64>,
    },
    /// Runs the oracle suite on existing artifacts (verify.json).
    Verify {
        #[command(flatten)]
        common: Common,
        /// Run a single oracle.
        #[arg(long, value_name = "NAME")]
        only: Option<String>,
    },
    /// Runs every stage as needed and prints a summary.
    Report(Common),
    /// Prints the default configuration in file syntax.
    Defaults,
}

fn load(common: &Common) -> Result<RunConfig, CliError> {
    let mut cfg = match &common.config {
        Some(p) => {
            let text = std::fs::read_to_string(p).map_err(|e| CliError::Usage(format!("{}: {e}", p.display())))?;
            RunConfig::parse(&text)?
        }
        None => RunConfig::default(),
    };
    if let Some(out) = &common.out {
        cfg.out_dir = out.clone();
    }
    Ok(cfg)
}

fn run(cli: Cli) -> Result<(), CliError> {
    match cli.command {
        Command::Defaults => print!("{}", RunConfig::default().to_file_text()),
        Command::Eta(c) => {
            let mut p = Pipeline::new(load(&c)?)?;
            let sol = p.eta(c.force)?;
            println!(
                "eta: contraction factor {:.4}, weighted norm {:.6e}, {} iterations",
                sol.diagnostics.contraction_factor, sol.diagnostics.weighted_norm, sol.diagnostics.iterations
            );
        }
        Command::Soliton { common, m_override } => {
            let mut p = Pipeline::new(load(&common)?)?;
            match m_override {
                Some(m) => {
                    let c = p.classify(m, common.force)?;
                    println!("m = {m}: {:?}", c.outcome);
                }
                None => {
                    let prof = p.soliton(common.force)?;
                    println!("m* = {:.12}, bracket {:?}, R = {:.9}", prof.m, prof.bracket, prof.big_r);
                }
            }
        }
        Command::Evolve { common, skip_picard, t_max } => {
            let mut cfg = load(&common)?;
            if t_max.is_some() {
                cfg.heat.t_max = t_max;
                cfg.validate()?;
            }
            let mut p = Pipeline::new(cfg)?;
            p.evolve(skip_picard, common.force)?;
            for line in summary_lines(&p.manifest, None).into_iter().skip(1) {
                println!("{line}");
            }
        }
        Command::Verify { common, only } => {
            let cfg = load(&common)?;
            let store = store::Store::open(&cfg.out_dir)?;
            let rep = verify::run(&store, cfg, only.as_deref())?;
            store.write_json("verify.json", &rep)?;
            for r in &rep.results {
                let tag = match r.passed {
                    Some(true) => "PASS",
                    Some(false) => "FAIL",
                    None => "SKIP",
                };
                println!("{tag} {}", r.name);
            }
            if !rep.passed {
                let failed: Vec<&str> =
                    rep.results.iter().filter(|r| r.passed == Some(false)).map(|r| r.name.as_str()).collect();
                return Err(CliError::Verify(failed.join(", ")));
            }
        }
        Command::Report(c) => {
            let mut p = Pipeline::new(load(&c)?)?;
            p.evolve(false, c.force)?;
            let rep: Option<expheat_core::heat::NonuniquenessReport> =
                serde_json::from_slice(&p.store.read("nonuniqueness.json")?).ok();
            for line in summary_lines(&p.manifest, rep.as_ref().map(|r| r.slices.as_slice())) {
                println!("{line}");
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
            return ExitCode::from(if e.use_stderr() { 2 } else { 0 });
        }
    };
    match run(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(e.exit_code())
        }
    }
}
