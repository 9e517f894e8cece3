//! `swimlab`: run scenarios, Picard iterations, solver checks, experiments and
//! sweeps.
//!
//! Exit codes: 0 success, 2 wellposedness violation (details in
//! `violation.json`), 1 any other error.

use std::fs::{self, File};
use std::io::{BufWriter, Write};
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use anyhow::{bail, Context, Result};
use clap::{Parser, Subcommand, ValueEnum};
use serde_json::json;

use swimlab_core::analysis::{self, ExperimentReport};
use swimlab_core::config::{parse_config, ScenarioConfig};
use swimlab_core::coupling::output::{write_diagnostics, write_trajectory};
use swimlab_core::coupling::run::{run_picard, run_scenario};
use swimlab_core::coupling::{CouplingError, WellposednessViolation};
use swimlab_core::fluid::mms::{spatial_study, temporal_study, MmsCase};
use swimlab_core::fluid::SolverParams;
use swimlab_core::sweep;

#[derive(Parser)]
#[command(name = "swimlab", version, about = "Segmented swimmer in a bounded Stokes fluid")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Time-march a scenario and write trajectory and diagnostics CSVs.
    Run {
        config: PathBuf,
        /// Output directory (default: `output.dir` of the config).
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Solve the scenario window by Picard iteration.
    Picard {
        config: PathBuf,
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Manufactured-solution convergence check of the Stokes solver.
    ValidateMms {
        /// Coarse grid size; the fine grid doubles it.
        #[arg(long, default_value_t = 16)]
        cells: usize,
    },
    /// Print the horizon bounds for a scenario as JSON.
    EstimateTstar { config: PathBuf },
    /// Run one numerical experiment and write its JSON report.
    Experiment {
        name: ExperimentName,
        config: PathBuf,
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Run the parameter grid of the config's `sweep` section.
    Sweep {
        config: PathBuf,
        #[arg(long)]
        out: Option<PathBuf>,
    },
}

#[derive(Clone, Copy, ValueEnum)]
enum ExperimentName {
    Contraction,
    Lipschitz,
    ForceBound,
    Uniqueness,
}

impl ExperimentName {
    fn file_stem(self) -> &'static str {
        match self {
            ExperimentName::Contraction => "contraction",
            ExperimentName::Lipschitz => "lipschitz",
            ExperimentName::ForceBound => "force_bound",
            ExperimentName::Uniqueness => "uniqueness",
        }
    }
}

/// A failure that maps to exit code 2.
struct Violated;

fn out_dir(cfg: &ScenarioConfig, out: Option<PathBuf>) -> Result<PathBuf> {
    let dir = out.unwrap_or_else(|| PathBuf::from(&cfg.output.dir));
    fs::create_dir_all(&dir).with_context(|| format!("creating {}", dir.display()))?;
    Ok(dir)
}

fn create(path: &Path) -> Result<BufWriter<File>> {
    Ok(BufWriter::new(File::create(path).with_context(|| format!("creating {}", path.display()))?))
}

fn write_json(path: &Path, v: &serde_json::Value) -> Result<()> {
    let mut w = create(path)?;
    serde_json::to_writer_pretty(&mut w, v)?;
    writeln!(w)?;
    Ok(())
}

fn write_violation(dir: &Path, v: &WellposednessViolation) -> Result<()> {
    write_json(&dir.join("violation.json"), &serde_json::to_value(v)?)?;
    eprintln!("wellposedness violation: {v}");
    Ok(())
}

fn load(path: &Path) -> Result<ScenarioConfig> {
    Ok(parse_config(path)?)
}

fn cmd_run(config: &Path, out: Option<PathBuf>) -> Result<Option<Violated>> {
    let cfg = load(config)?;
    let dir = out_dir(&cfg, out)?;
    fs::write(dir.join("config.json"), cfg.to_json())?;
    let advisory = match analysis::resolve_tstar(&cfg) {
        Ok(t) => json!({
            "tstar_bound": t.estimate.tstar.value,
            "binding_clause": t.estimate.tstar.binding_clause,
            "t_end": cfg.t_end,
            "beyond_estimate": cfg.t_end > t.estimate.tstar.value,
        }),
        Err(e) => json!({"error": e}),
    };
    write_json(&dir.join("advisory.json"), &advisory)?;
    let run = run_scenario(&cfg, Some(&dir))?;
    write_trajectory(&mut create(&dir.join(&cfg.output.trajectory))?, &run.trajectory)?;
    write_diagnostics(&mut create(&dir.join(&cfg.output.diagnostics))?, &run.diagnostics)?;
    println!(
        "{} steps to t = {:e}; outputs in {}",
        run.trajectory.len() - 1,
        run.trajectory.last().map_or(0.0, |s| s.t),
        dir.display()
    );
    match run.violation {
        Some(v) => {
            write_violation(&dir, &v)?;
            Ok(Some(Violated))
        }
        None => Ok(None),
    }
}

fn cmd_picard(config: &Path, out: Option<PathBuf>) -> Result<Option<Violated>> {
    let cfg = load(config)?;
    let dir = out_dir(&cfg, out)?;
    match run_picard(&cfg) {
        Ok(p) => {
            write_trajectory(&mut create(&dir.join(&cfg.output.trajectory))?, &p.trajectory)?;
            write_json(
                &dir.join("picard.json"),
                &json!({
                    "window": cfg.picard_window(),
                    "dt": cfg.dt,
                    "converged": p.converged,
                    "iterations": p.iterations(),
                    "residuals": p.residuals,
                    "ratios": p.ratios(),
                }),
            )?;
            println!("converged after {} iterations; residuals {:?}", p.iterations(), p.residuals);
            Ok(None)
        }
        Err(CouplingError::Violation(v)) => {
            write_violation(&dir, &v)?;
            Ok(Some(Violated))
        }
        Err(CouplingError::NoConvergence { residuals }) => {
            write_json(&dir.join("picard.json"), &json!({"converged": false, "residuals": residuals}))?;
            bail!("Picard iteration did not converge in {} iterations", residuals.len())
        }
        Err(e) => Err(e.into()),
    }
}

fn cmd_validate_mms(cells: usize) -> Result<()> {
    if cells < 8 {
        bail!("--cells must be at least 8");
    }
    let params = SolverParams::default();
    let s = spatial_study(&MmsCase::spatial(), cells, params)?;
    println!("space {}^3 L2 error {:.6e}", cells, s.coarse.l2_error);
    println!("space {}^3 L2 error {:.6e}", 2 * cells, s.fine.l2_error);
    println!("space ratio {:.4}", s.ratio);
    let case = MmsCase::temporal();
    let t = temporal_study(&case, 2 * cells, params)?;
    println!("time dt={:e} L2 error {:.6e}", case.dt, t.coarse.l2_error);
    println!("time dt={:e} L2 error {:.6e}", case.dt / 2.0, t.fine.l2_error);
    println!("time ratio {:.4}", t.ratio);
    Ok(())
}

fn cmd_estimate_tstar(config: &Path) -> Result<()> {
    let cfg = load(config)?;
    let t = analysis::resolve_tstar(&cfg).map_err(anyhow::Error::msg)?;
    println!("{}", serde_json::to_string_pretty(&t)?);
    Ok(())
}

fn cmd_experiment(name: ExperimentName, config: &Path, out: Option<PathBuf>) -> Result<Option<Violated>> {
    let cfg = load(config)?;
    let dir = out_dir(&cfg, out)?;
    let result: Result<ExperimentReport, swimlab_core::Error> = match name {
        ExperimentName::Contraction => analysis::contraction_from_scenario(&cfg),
        ExperimentName::Lipschitz => analysis::lipschitz_from_scenario(&cfg),
        ExperimentName::ForceBound => analysis::force_bound_from_scenario(&cfg),
        ExperimentName::Uniqueness => analysis::uniqueness_from_scenario(&cfg),
    };
    match result {
        Ok(rep) => {
            write_json(&dir.join(format!("{}.json", name.file_stem())), &serde_json::to_value(&rep)?)?;
            println!("{}", serde_json::to_string_pretty(&rep)?);
            Ok(None)
        }
        Err(swimlab_core::Error::Coupling(CouplingError::Violation(v))) => {
            write_violation(&dir, &v)?;
            Ok(Some(Violated))
        }
        Err(e) => Err(e.into()),
    }
}

fn cmd_sweep(config: &Path, out: Option<PathBuf>) -> Result<()> {
    let text = fs::read_to_string(config).with_context(|| format!("reading {}", config.display()))?;
    let doc: serde_json::Value = serde_json::from_str(&text)?;
    let cfg = swimlab_core::config::parse_config_value(doc.clone())?;
    let settings = cfg.sweep.clone().context("config has no sweep section")?;
    let dir = out_dir(&cfg, out)?;
    let rows = sweep::run_sweep(&doc)?;
    let paths: Vec<String> = settings.parameters.iter().map(|p| p.path.clone()).collect();
    let path = dir.join(&settings.results);
    sweep::write_rows(&mut create(&path)?, &paths, &rows)?;
    let failed = rows.iter().filter(|r| r.status != "ok").count();
    println!("{} cells ({failed} not ok) written to {}", rows.len(), path.display());
    Ok(())
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let result = match cli.command {
        Command::Run { config, out } => cmd_run(&config, out),
        Command::Picard { config, out } => cmd_picard(&config, out),
        Command::ValidateMms { cells } => cmd_validate_mms(cells).map(|_| None),
        Command::EstimateTstar { config } => cmd_estimate_tstar(&config).map(|_| None),
        Command::Experiment { name, config, out } => cmd_experiment(name, &config, out),
        Command::Sweep { config, out } => cmd_sweep(&config, out).map(|_| None),
    };
    match result {
        Ok(None) => ExitCode::SUCCESS,
        Ok(Some(Violated)) => ExitCode::from(2),
        Err(e) => {
            eprintln!("error: {e:#}");
            ExitCode::from(1)
        }
    }
}
