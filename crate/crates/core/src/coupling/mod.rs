//! Coupled fluid and body integration.
//!
//! One step at state `(z, y)` and time `t`:
//!
//! 1. the monitor checks `z`;
//! 2. `f = spread(F(z, v(t)))`;
//! 3. `y' = stokes_step(y, f, dt)`;
//! 4. `z_i' = z_i + dt · avg(y', S_i, z_i)`, optionally in sub-steps that
//!    re-sample the average at the moving centre.
//!
//! The Picard mode in [`picard`] iterates the decoupled maps with exactly the
//! same discretisation, so its fixed point is the time-marched solution.

pub mod monitor;
pub mod output;
pub mod picard;
pub mod run;
pub mod tstar;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::fluid::{average_velocity, ops, FaceField, FluidError, FluidState, ForceDensityField, StokesSolver};
use crate::forces::{assemble_body_forces, spread_to_grid, BodyForceSet, Guards, SwimmerConfig};
use crate::geometry::Vec3;

pub use monitor::{monitor_wellposedness, MonitorMeasures, MonitorParams, Violation};

/// Body centres at time `t`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SwimmerState {
    pub z: Vec<Vec3>,
    pub t: f64,
}

/// Piecewise-constant controls: `values[k]` holds on `[breakpoints[k],
/// breakpoints[k+1])`, the last interval extends indefinitely.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ControlSchedule {
    pub breakpoints: Vec<f64>,
    pub values: Vec<Vec<f64>>,
}

impl ControlSchedule {
    pub fn constant(v: Vec<f64>) -> Self {
        ControlSchedule { breakpoints: vec![0.0], values: vec![v] }
    }

    pub fn at(&self, t: f64) -> &[f64] {
        let slack = 1e-12 * t.abs().max(1.0);
        let k = self.breakpoints.partition_point(|&b| b <= t + slack);
        &self.values[k.saturating_sub(1)]
    }

    /// `max_k max_j |v_j|`
    pub fn v_inf(&self) -> f64 {
        self.values.iter().flatten().fold(0.0f64, |m, v| m.max(v.abs()))
    }

    pub fn scaled(&self, s: f64) -> Self {
        ControlSchedule {
            breakpoints: self.breakpoints.clone(),
            values: self.values.iter().map(|v| v.iter().map(|x| x * s).collect()).collect(),
        }
    }

    pub fn validate(&self, joints: usize) -> Vec<String> {
        let mut errs = Vec::new();
        if self.breakpoints.is_empty() || self.breakpoints[0] != 0.0 {
            errs.push("controls: breakpoints must start at 0".to_string());
        }
        if self.breakpoints.windows(2).any(|w| !(w[0] < w[1])) {
            errs.push("controls: breakpoints must be strictly increasing".to_string());
        }
        if self.values.len() != self.breakpoints.len() {
            errs.push(format!(
                "controls: {} breakpoints but {} value rows",
                self.breakpoints.len(),
                self.values.len()
            ));
        }
        for (k, row) in self.values.iter().enumerate() {
            if row.len() != joints {
                errs.push(format!("controls: row {k} has {} entries, expected n - 2 = {joints}", row.len()));
            }
            if row.iter().any(|v| !v.is_finite()) {
                errs.push(format!("controls: row {k} has non-finite entries"));
            }
        }
        errs
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct WellposednessViolation {
    pub step: usize,
    pub t: f64,
    pub violation: Violation,
}

impl std::fmt::Display for WellposednessViolation {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        write!(f, "step {} (t = {:e}): {}", self.step, self.t, self.violation)
    }
}

#[derive(Debug, Clone, PartialEq, Error)]
pub enum CouplingError {
    #[error("wellposedness violation at {0}")]
    Violation(WellposednessViolation),
    #[error(transparent)]
    Fluid(FluidError),
    #[error("Picard iteration did not converge; residuals {residuals:?}")]
    NoConvergence { residuals: Vec<f64> },
}

/// Per-step diagnostics. Monitor quantities describe the state at the start
/// of the step; energy terms describe the step itself.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct DiagnosticsRecord {
    pub step: usize,
    pub t: f64,
    /// `|Σ d_i mes(S_i)|`
    pub net_force: f64,
    /// `net_force / Σ |d_i| mes(S_i)`
    pub net_force_rel: f64,
    /// Net moment about the centroid of the centres.
    pub net_torque: f64,
    pub net_torque_rel: f64,
    /// `|∫ f dx|` of the spread field.
    pub grid_force: f64,
    /// Kinetic energy after the step.
    pub kinetic: f64,
    pub dissipation: f64,
    pub power_in: f64,
    /// Relative defect of the discrete energy identity.
    pub energy_defect: f64,
    /// Relative divergence after the step.
    pub divergence: f64,
    pub min_distance: f64,
    pub min_boundary_margin: f64,
    pub min_joint_sine: f64,
    pub min_link_length: f64,
    pub picard_residual: f64,
    pub monitor_ok: bool,
}

impl DiagnosticsRecord {
    /// A row for a state the monitor rejected: only monitor columns are set.
    pub fn rejected(step: usize, t: f64, m: &MonitorMeasures) -> Self {
        DiagnosticsRecord {
            step,
            t,
            net_force: f64::NAN,
            net_force_rel: f64::NAN,
            net_torque: f64::NAN,
            net_torque_rel: f64::NAN,
            grid_force: f64::NAN,
            kinetic: f64::NAN,
            dissipation: f64::NAN,
            power_in: f64::NAN,
            energy_defect: f64::NAN,
            divergence: f64::NAN,
            min_distance: m.min_distance,
            min_boundary_margin: m.min_clearance,
            min_joint_sine: m.min_joint_sine,
            min_link_length: m.min_link_length,
            picard_residual: f64::NAN,
            monitor_ok: false,
        }
    }
}

/// Everything a coupled step needs besides the state.
#[derive(Debug, Clone)]
pub struct Coupler {
    pub swimmer: SwimmerConfig,
    pub solver: StokesSolver,
    pub monitor: MonitorParams,
    pub guards: Guards,
    /// Body sub-steps per fluid step.
    pub substeps: usize,
}

#[derive(Debug, Clone)]
pub struct StepOutput {
    pub swimmer: SwimmerState,
    pub fluid: FluidState,
    pub forcing: ForceDensityField,
    pub record: DiagnosticsRecord,
}

impl Coupler {
    pub fn grid(&self) -> &crate::fluid::GridSpec {
        &self.solver.grid
    }

    fn violation(&self, step: usize, t: f64, v: Violation) -> CouplingError {
        CouplingError::Violation(WellposednessViolation { step, t, violation: v })
    }

    fn fluid_or_violation(&self, e: FluidError, step: usize, t: f64, z: &[Vec3]) -> CouplingError {
        match e {
            FluidError::BodyOutsideDomain { body } => self.violation(
                step,
                t,
                Violation::BoundaryContact {
                    body,
                    clearance: self.grid().domain().clearance(&self.swimmer.shapes[body], &z[body]),
                    margin: self.monitor.boundary_margin,
                },
            ),
            other => CouplingError::Fluid(other),
        }
    }

    pub fn measure(&self, z: &[Vec3]) -> MonitorMeasures {
        monitor::measure(z, &self.swimmer, &self.grid().domain())
    }

    /// Body forces and their spread field at `z`.
    pub fn forcing(
        &self,
        z: &[Vec3],
        v: &[f64],
        step: usize,
        t: f64,
    ) -> Result<(BodyForceSet, ForceDensityField), CouplingError> {
        let forces = assemble_body_forces(z, v, &self.swimmer, &self.guards)
            .map_err(|e| self.violation(step, t, Violation::from_force_error(e, &self.guards)))?;
        let field = spread_to_grid(&forces, z, &self.swimmer, self.grid())
            .map_err(|e| self.fluid_or_violation(e, step, t, z))?;
        Ok((forces, field))
    }

    /// Advances the centres through the frozen field `u` over `dt`.
    pub fn advect(&self, z: &[Vec3], u: &FaceField, dt: f64, step: usize, t: f64) -> Result<Vec<Vec3>, CouplingError> {
        let m = self.substeps.max(1);
        let h = dt / m as f64;
        let mut z = z.to_vec();
        for _ in 0..m {
            let mut next = z.clone();
            for (i, (zi, shape)) in z.iter().zip(&self.swimmer.shapes).enumerate() {
                let a = average_velocity(u, self.grid(), shape, zi, i)
                    .map_err(|e| self.fluid_or_violation(e, step, t, &z))?;
                next[i] = zi + a * h;
            }
            z = next;
        }
        Ok(z)
    }

    pub fn coupled_step(
        &self,
        state: &SwimmerState,
        fluid: &FluidState,
        v: &[f64],
        dt: f64,
        step: usize,
    ) -> Result<StepOutput, CouplingError> {
        let m = self.measure(&state.z);
        self.monitor.check(&m).map_err(|v| self.violation(step, state.t, v))?;
        let (forces, field) = self.forcing(&state.z, v, step, state.t)?;
        let (fluid_next, budget) = self.solver.stokes_step(fluid, &field, dt).map_err(CouplingError::Fluid)?;
        let z_next = self.advect(&state.z, &fluid_next.u, dt, step, state.t)?;

        let shapes = &self.swimmer.shapes;
        let pivot = state.z.iter().sum::<Vec3>() / state.z.len() as f64;
        let magnitude = forces.magnitude(shapes);
        let net_force = forces.net_force(shapes).norm();
        let net_torque = forces.net_torque(shapes, &state.z, &pivot).norm();
        let torque_scale: f64 = forces
            .densities
            .iter()
            .zip(shapes)
            .zip(&state.z)
            .map(|((d, s), zi)| (zi - pivot).norm() * d.norm() * crate::geometry::measure(s))
            .sum();
        let rel = |a: f64, s: f64| if s > 0.0 { a / s } else { 0.0 };
        let record = DiagnosticsRecord {
            step,
            t: state.t,
            net_force,
            net_force_rel: rel(net_force, magnitude),
            net_torque,
            net_torque_rel: rel(net_torque, torque_scale),
            grid_force: field.integral(self.grid()).norm(),
            kinetic: budget.kinetic_after,
            dissipation: budget.dissipation,
            power_in: budget.power_in,
            energy_defect: budget.relative_defect(),
            divergence: ops::relative_divergence(&fluid_next.u, self.grid()),
            min_distance: m.min_distance,
            min_boundary_margin: m.min_clearance,
            min_joint_sine: m.min_joint_sine,
            min_link_length: m.min_link_length,
            picard_residual: f64::NAN,
            monitor_ok: true,
        };
        Ok(StepOutput {
            swimmer: SwimmerState { z: z_next, t: fluid_next.t },
            fluid: fluid_next,
            forcing: field,
            record,
        })
    }
}

/// Number of `dt` steps that cover `[0, horizon]`, at least one.
pub fn step_count(horizon: f64, dt: f64) -> usize {
    let r = horizon / dt;
    let n = if (r - r.round()).abs() <= 1e-9 * r.max(1.0) { r.round() } else { r.ceil() };
    (n as usize).max(1)
}
