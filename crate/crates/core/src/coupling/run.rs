//! Whole-scenario drivers used by the CLI and the sweep.

use std::fs::File;
use std::io::BufWriter;
use std::path::{Path, PathBuf};

use super::picard::{picard_solve, PicardOptions, PicardOutcome};
use super::{step_count, CouplingError, DiagnosticsRecord, SwimmerState, WellposednessViolation};
use crate::config::ScenarioConfig;
use crate::fluid::{vtk, FluidError, FluidState, ForceDensityField};

#[derive(Debug, Clone)]
pub struct RunOutput {
    /// Initial state plus one state per completed step.
    pub trajectory: Vec<SwimmerState>,
    /// One row per attempted step; a rejected step ends the list.
    pub diagnostics: Vec<DiagnosticsRecord>,
    pub violation: Option<WellposednessViolation>,
    pub final_fluid: FluidState,
    pub snapshots: Vec<PathBuf>,
}

fn snapshot(
    dir: &Path,
    step: usize,
    cfg: &ScenarioConfig,
    state: &FluidState,
    f: Option<&ForceDensityField>,
) -> Result<PathBuf, CouplingError> {
    let path = dir.join(format!("snapshot_{step:06}.vtk"));
    let io_err = |e: std::io::Error| {
        CouplingError::Fluid(FluidError::Io { path: path.display().to_string(), message: e.to_string() })
    };
    let mut w = BufWriter::new(File::create(&path).map_err(io_err)?);
    vtk::write_snapshot(&mut w, &cfg.grid(), state, f).map_err(io_err)?;
    Ok(path)
}

/// Time-marches the scenario to `t_end`, stopping at the first violation.
/// Snapshots go to `snapshot_dir` when given and `output.snapshot_every > 0`.
pub fn run_scenario(cfg: &ScenarioConfig, snapshot_dir: Option<&Path>) -> Result<RunOutput, CouplingError> {
    let coupler = cfg.coupler();
    let mut fluid = cfg.initial_fluid(&coupler.solver).map_err(CouplingError::Fluid)?;
    let mut swimmer = cfg.initial_swimmer();
    let steps = step_count(cfg.t_end, cfg.dt);
    let every = cfg.output.snapshot_every;
    let snap_dir = snapshot_dir.filter(|_| every > 0);

    let mut trajectory = vec![swimmer.clone()];
    let mut diagnostics = Vec::with_capacity(steps);
    let mut snapshots = Vec::new();
    let mut violation = None;
    if let Some(dir) = snap_dir {
        snapshots.push(snapshot(dir, 0, cfg, &fluid, None)?);
    }
    for k in 0..steps {
        let v = cfg.controls.at(swimmer.t);
        match coupler.coupled_step(&swimmer, &fluid, v, cfg.dt, k) {
            Ok(mut out) => {
                // Exact multiples of dt keep breakpoint lookups reproducible.
                let t = (k + 1) as f64 * cfg.dt;
                out.swimmer.t = t;
                out.fluid.t = t;
                diagnostics.push(out.record);
                if let Some(dir) = snap_dir {
                    if (k + 1) % every == 0 {
                        snapshots.push(snapshot(dir, k + 1, cfg, &out.fluid, Some(&out.forcing))?);
                    }
                }
                swimmer = out.swimmer;
                fluid = out.fluid;
                trajectory.push(swimmer.clone());
            }
            Err(CouplingError::Violation(v)) => {
                diagnostics.push(DiagnosticsRecord::rejected(k, swimmer.t, &coupler.measure(&swimmer.z)));
                violation = Some(v);
                break;
            }
            Err(e) => return Err(e),
        }
    }
    Ok(RunOutput { trajectory, diagnostics, violation, final_fluid: fluid, snapshots })
}

/// Picard iteration on the configured window from the configured initial state.
pub fn run_picard(cfg: &ScenarioConfig) -> Result<PicardOutcome, CouplingError> {
    let coupler = cfg.coupler();
    let fluid = cfg.initial_fluid(&coupler.solver).map_err(CouplingError::Fluid)?;
    let opts = PicardOptions {
        window: cfg.picard_window(),
        dt: cfg.dt,
        max_iters: cfg.picard.max_iters,
        tol: cfg.picard.tol,
    };
    picard_solve(&coupler, &cfg.centers, &fluid, &cfg.controls, &opts)
}
