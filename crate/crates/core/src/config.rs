//! Scenario documents (JSON).
//!
//! Units are whatever consistent system the user picks: lengths for
//! `domain`, `centers`, `rest_lengths`, `radius`; time for `dt`, `t_end`,
//! control breakpoints; `nu` in length²/time; `stiffness` in force per
//! length; controls in 1/time. Fields with constant defaults are filled in on
//! parse; fields whose defaults depend on other fields are left `null` and
//! resolved when used.

use std::path::Path;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::coupling::{ControlSchedule, Coupler, MonitorParams, SwimmerState};
use crate::fluid::{mms, FaceField, FluidError, FluidState, GridSpec, SolverParams, StokesSolver};
use crate::forces::{Guards, SwimmerConfig};
use crate::geometry::{validate_assumption_21, Assumption21Violation, Vec3};

#[derive(Debug, Clone, PartialEq, Error)]
#[error("invalid configuration:\n  {}", .errors.join("\n  "))]
pub struct ConfigError {
    pub errors: Vec<String>,
}

impl ConfigError {
    pub fn single(msg: impl Into<String>) -> Self {
        ConfigError { errors: vec![msg.into()] }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize, Default)]
#[serde(tag = "kind", rename_all = "snake_case", deny_unknown_fields)]
pub enum InitialVelocity {
    #[default]
    Rest,
    /// A smooth wall-bounded vortex of the given peak scale, projected once.
    Vortex { amplitude: f64 },
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize, Default)]
#[serde(default, deny_unknown_fields)]
pub struct MonitorSettings {
    /// Default `2r`.
    pub collision_threshold: Option<f64>,
    /// Default: the largest grid spacing.
    pub boundary_margin: Option<f64>,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct PicardSettings {
    /// Default `t_end`.
    pub window: Option<f64>,
    pub max_iters: usize,
    pub tol: f64,
}

impl Default for PicardSettings {
    fn default() -> Self {
        PicardSettings { window: None, max_iters: 50, tol: 1e-9 }
    }
}

/// Overrides for the horizon constants; `null` selects the built-in default.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct TStarSettings {
    /// Default: analytic sup of the shift ratio over the shapes.
    pub c: Option<f64>,
    /// Default: `r`.
    pub h0: Option<f64>,
    pub k_embed: f64,
    pub l_energy: f64,
    pub l_lip: f64,
    /// Default `2√L‖y₀‖`, or 1 for a fluid at rest.
    pub q: Option<f64>,
    /// Default `q`.
    pub u_norm_l2: Option<f64>,
    /// Default `K q`.
    pub u_norm_l2_linf: Option<f64>,
    /// Default: a-priori force bound on the trajectory ball.
    pub c_o: Option<f64>,
}

impl Default for TStarSettings {
    fn default() -> Self {
        TStarSettings {
            c: None,
            h0: None,
            k_embed: 1.0,
            l_energy: 1.0,
            l_lip: 1.0,
            q: None,
            u_norm_l2: None,
            u_norm_l2_linf: None,
            c_o: None,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ExperimentSettings {
    /// Trial pairs for the contraction experiment.
    pub trials: usize,
    /// Window for the contraction and perturbation experiments; default `t_end`.
    pub horizon: Option<f64>,
    pub lipschitz_radius: f64,
    pub lipschitz_trials: usize,
    pub force_bound_samples: usize,
    pub v_inf_levels: Vec<f64>,
    pub deltas: Vec<f64>,
}

impl Default for ExperimentSettings {
    fn default() -> Self {
        ExperimentSettings {
            trials: 100,
            horizon: None,
            lipschitz_radius: 1e-3,
            lipschitz_trials: 1000,
            force_bound_samples: 200,
            v_inf_levels: vec![0.0, 0.5, 1.0, 2.0],
            deltas: vec![1e-6, 1e-7],
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct OutputSettings {
    pub dir: String,
    pub trajectory: String,
    pub diagnostics: String,
    /// Write a VTK snapshot every this many steps (0 = never).
    pub snapshot_every: usize,
}

impl Default for OutputSettings {
    fn default() -> Self {
        OutputSettings {
            dir: "out".into(),
            trajectory: "trajectory.csv".into(),
            diagnostics: "diagnostics.csv".into(),
            snapshot_every: 0,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, Default)]
#[serde(rename_all = "snake_case")]
pub enum Mode {
    #[default]
    March,
    Picard,
    Contraction,
    Lipschitz,
    ForceBound,
    Uniqueness,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SweepParameter {
    /// JSON pointer into the scenario document, e.g. `/swimmer/stiffness/0`.
    pub path: String,
    pub values: Vec<serde_json::Value>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SweepSettings {
    pub parameters: Vec<SweepParameter>,
    #[serde(default = "default_results")]
    pub results: String,
}

fn default_results() -> String {
    "sweep.csv".into()
}

fn default_substeps() -> usize {
    1
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ScenarioConfig {
    /// Box extents `[Lx, Ly, Lz]`.
    pub domain: Vec3,
    pub cells: [usize; 3],
    pub nu: f64,
    pub dt: f64,
    pub t_end: f64,
    pub swimmer: SwimmerConfig,
    /// Initial body centres.
    pub centers: Vec<Vec3>,
    pub controls: ControlSchedule,
    #[serde(default)]
    pub initial_velocity: InitialVelocity,
    #[serde(default)]
    pub solver: SolverParams,
    #[serde(default)]
    pub monitor: MonitorSettings,
    #[serde(default = "default_substeps")]
    pub body_substeps: usize,
    /// Reject shapes of unequal measure (needed for exact force balance).
    #[serde(default)]
    pub require_equal_measures: bool,
    #[serde(default)]
    pub picard: PicardSettings,
    #[serde(default)]
    pub tstar: TStarSettings,
    #[serde(default)]
    pub experiments: ExperimentSettings,
    #[serde(default)]
    pub output: OutputSettings,
    #[serde(default)]
    pub seed: u64,
    #[serde(default)]
    pub mode: Mode,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub sweep: Option<SweepSettings>,
}

pub fn parse_config(path: &Path) -> Result<ScenarioConfig, ConfigError> {
    let text = std::fs::read_to_string(path)
        .map_err(|e| ConfigError::single(format!("cannot read {}: {e}", path.display())))?;
    parse_config_str(&text)
}

pub fn parse_config_str(text: &str) -> Result<ScenarioConfig, ConfigError> {
    let cfg: ScenarioConfig = serde_json::from_str(text).map_err(|e| ConfigError::single(format!("{e}")))?;
    let errors = cfg.validate();
    if errors.is_empty() {
        Ok(cfg)
    } else {
        Err(ConfigError { errors })
    }
}

/// Parses an already-decoded JSON document.
pub fn parse_config_value(value: serde_json::Value) -> Result<ScenarioConfig, ConfigError> {
    let cfg: ScenarioConfig = serde_json::from_value(value).map_err(|e| ConfigError::single(format!("{e}")))?;
    let errors = cfg.validate();
    if errors.is_empty() {
        Ok(cfg)
    } else {
        Err(ConfigError { errors })
    }
}

fn positive(errs: &mut Vec<String>, name: &str, v: f64) {
    if !(v.is_finite() && v > 0.0) {
        errs.push(format!("{name} must be positive, got {v}"));
    }
}

impl ScenarioConfig {
    /// Every validation failure, not just the first.
    pub fn validate(&self) -> Vec<String> {
        let mut errs = Vec::new();
        if let Err(e) = GridSpec::new(self.domain, self.cells) {
            errs.push(e);
        }
        positive(&mut errs, "nu", self.nu);
        positive(&mut errs, "dt", self.dt);
        positive(&mut errs, "t_end", self.t_end);
        positive(&mut errs, "solver.viscous_tol", self.solver.viscous_tol);
        positive(&mut errs, "solver.pressure_tol", self.solver.pressure_tol);
        if self.solver.max_iterations == 0 {
            errs.push("solver.max_iterations must be at least 1".into());
        }
        errs.extend(self.swimmer.validate());
        let n = self.swimmer.n();
        if self.centers.len() != n {
            errs.push(format!("expected {n} centers, got {}", self.centers.len()));
        } else if self.swimmer.rest_lengths.len() + 1 == n {
            let report = validate_assumption_21(
                &self.swimmer.shapes,
                &self.centers,
                &self.swimmer.rest_lengths,
                self.swimmer.radius,
                &crate::geometry::Domain::new(self.domain),
            );
            // Count, shape and rest-length clauses are already covered above.
            for v in report.violations {
                if matches!(v, Assumption21Violation::Containment { .. } | Assumption21Violation::Separation { .. }) {
                    errs.push(v.to_string());
                }
            }
        }
        errs.extend(self.controls.validate(n.saturating_sub(2)));
        if self.require_equal_measures && !self.swimmer.equal_measures() {
            errs.push("require_equal_measures is set but body measures differ".into());
        }
        if let Some(t) = self.monitor.collision_threshold {
            positive(&mut errs, "monitor.collision_threshold", t);
        }
        if let Some(m) = self.monitor.boundary_margin {
            if !(m.is_finite() && m >= 0.0) {
                errs.push(format!("monitor.boundary_margin must be non-negative, got {m}"));
            }
        }
        if self.body_substeps == 0 {
            errs.push("body_substeps must be at least 1".into());
        }
        if let InitialVelocity::Vortex { amplitude } = self.initial_velocity {
            if !amplitude.is_finite() {
                errs.push("initial_velocity.amplitude must be finite".into());
            }
        }
        if let Some(w) = self.picard.window {
            positive(&mut errs, "picard.window", w);
        }
        positive(&mut errs, "picard.tol", self.picard.tol);
        if self.picard.max_iters == 0 {
            errs.push("picard.max_iters must be at least 1".into());
        }
        let t = &self.tstar;
        for (name, v) in [("tstar.k_embed", t.k_embed), ("tstar.l_energy", t.l_energy), ("tstar.l_lip", t.l_lip)] {
            positive(&mut errs, name, v);
        }
        for (name, v) in [
            ("tstar.c", t.c),
            ("tstar.h0", t.h0),
            ("tstar.q", t.q),
            ("tstar.u_norm_l2", t.u_norm_l2),
            ("tstar.u_norm_l2_linf", t.u_norm_l2_linf),
            ("tstar.c_o", t.c_o),
        ] {
            if let Some(v) = v {
                positive(&mut errs, name, v);
            }
        }
        if let Some(h) = self.experiments.horizon {
            positive(&mut errs, "experiments.horizon", h);
        }
        if let Some(s) = &self.sweep {
            if s.parameters.is_empty() {
                errs.push("sweep.parameters must not be empty".into());
            }
            for p in &s.parameters {
                if !p.path.starts_with('/') {
                    errs.push(format!("sweep path {:?} must be a JSON pointer starting with '/'", p.path));
                }
                if p.values.is_empty() {
                    errs.push(format!("sweep path {:?} has no values", p.path));
                }
            }
        }
        errs
    }

    /// Pretty JSON with every field present, newline-terminated.
    pub fn to_json(&self) -> String {
        let mut s = serde_json::to_string_pretty(self).expect("config serialises");
        s.push('\n');
        s
    }

    pub fn grid(&self) -> GridSpec {
        GridSpec { extents: self.domain, cells: self.cells }
    }

    pub fn monitor_params(&self) -> MonitorParams {
        let g = Guards::for_domain(&self.grid().domain());
        MonitorParams {
            collision_threshold: self.monitor.collision_threshold.unwrap_or(2.0 * self.swimmer.radius),
            boundary_margin: self.monitor.boundary_margin.unwrap_or(self.grid().max_spacing()),
            eps_col: g.eps_col,
            eps_deg: g.eps_deg,
        }
    }

    pub fn coupler(&self) -> Coupler {
        let grid = self.grid();
        Coupler {
            swimmer: self.swimmer.clone(),
            solver: StokesSolver::new(grid, self.nu, self.solver),
            monitor: self.monitor_params(),
            guards: Guards::for_domain(&grid.domain()),
            substeps: self.body_substeps,
        }
    }

    pub fn initial_swimmer(&self) -> SwimmerState {
        SwimmerState { z: self.centers.clone(), t: 0.0 }
    }

    /// The configured initial velocity, projected onto discretely
    /// divergence-free fields.
    pub fn initial_fluid(&self, solver: &StokesSolver) -> Result<FluidState, FluidError> {
        let grid = solver.grid;
        let mut state = FluidState::rest(&grid);
        if let InitialVelocity::Vortex { amplitude } = self.initial_velocity {
            let ext = grid.extents;
            let raw = FaceField::from_fn(&grid, |x| {
                let s = Vec3::new(x.x / ext.x, x.y / ext.y, x.z / ext.z);
                mms::shape_field(&s).0 * amplitude
            });
            state.u = solver.project(&raw)?.0;
        }
        Ok(state)
    }

    pub fn picard_window(&self) -> f64 {
        self.picard.window.unwrap_or(self.t_end)
    }

    pub fn experiment_horizon(&self) -> f64 {
        self.experiments.horizon.unwrap_or(self.t_end)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    pub(crate) const MINIMAL: &str = r#"{
        "domain": [1, 1, 1],
        "cells": [16, 16, 16],
        "nu": 1.0,
        "dt": 0.01,
        "t_end": 0.05,
        "swimmer": {
            "shapes": [{"ball": {"radius": 0.1}}, {"ball": {"radius": 0.1}}, {"ball": {"radius": 0.1}}],
            "stiffness": [1, 1],
            "rest_lengths": [0.25, 0.25],
            "radius": 0.1
        },
        "centers": [[0.3, 0.5, 0.5], [0.55, 0.5, 0.5], [0.6, 0.75, 0.5]],
        "controls": {"breakpoints": [0], "values": [[1.0]]}
    }"#;

    #[test]
    fn minimal_config_round_trips() {
        let cfg = parse_config_str(MINIMAL).unwrap();
        assert_eq!(cfg.body_substeps, 1);
        assert_eq!(cfg.picard.max_iters, 50);
        let echo = cfg.to_json();
        let again = parse_config_str(&echo).unwrap();
        assert_eq!(again, cfg);
        assert_eq!(again.to_json(), echo);
    }

    fn with(edit: impl Fn(&mut serde_json::Value)) -> Result<ScenarioConfig, ConfigError> {
        let mut v: serde_json::Value = serde_json::from_str(MINIMAL).unwrap();
        edit(&mut v);
        parse_config_value(v)
    }

    #[test]
    fn rest_length_equal_to_2r_is_rejected() {
        let e = with(|v| v["swimmer"]["rest_lengths"][0] = 0.2.into()).unwrap_err();
        assert_eq!(e.errors.len(), 1, "{e}");
        assert!(e.errors[0].contains("l > 2r"), "{e}");
    }

    #[test]
    fn two_bodies_rejected() {
        let e = with(|v| {
            v["swimmer"]["shapes"].as_array_mut().unwrap().pop();
            v["swimmer"]["stiffness"].as_array_mut().unwrap().pop();
            v["swimmer"]["rest_lengths"].as_array_mut().unwrap().pop();
            v["centers"].as_array_mut().unwrap().pop();
            v["controls"]["values"] = serde_json::json!([[]]);
        })
        .unwrap_err();
        assert!(e.errors.iter().any(|m| m.contains("n > 2")), "{e}");
    }

    #[test]
    fn all_errors_are_collected() {
        let e = with(|v| {
            v["nu"] = (-1.0).into();
            v["dt"] = 0.0.into();
            v["cells"][0] = 4.into();
            v["swimmer"]["stiffness"][1] = 0.into();
        })
        .unwrap_err();
        assert_eq!(e.errors.len(), 4, "{e}");
    }

    #[test]
    fn unknown_fields_are_rejected() {
        assert!(with(|v| v["viscosity"] = 1.0.into()).is_err());
    }
}
