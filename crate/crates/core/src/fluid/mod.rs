//! Nonstationary Stokes flow on a box with no-slip walls.
//!
//! A step is backward Euler on the viscous term followed by a discrete
//! Leray projection:
//!
//! ```text
//! (I - dt ν Δ) u* = u^n + dt f
//! u^{n+1} = u* - grad φ,   -L φ = -div u*,   p^{n+1} = φ / dt
//! ```
//!
//! Both linear solves are conjugate-gradient iterations. The pressure solve
//! is preconditioned by the exact separable Neumann inverse, so it normally
//! finishes in one or two iterations.

pub mod grid;
pub mod linsolve;
pub mod mms;
pub mod ops;
pub mod vtk;

use ndarray::Array3;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::geometry::{measure, BodyShape, Vec3};

pub use grid::{FaceField, ForceDensityField, GridSpec};
use linsolve::{conjugate_gradient, NeumannEigenSolver};

#[derive(Debug, Clone, PartialEq, Error, Serialize, Deserialize)]
pub enum FluidError {
    #[error("{solver} solve did not converge: relative residual {residual:e} after {iterations} iterations")]
    SolverDiverged { solver: String, iterations: usize, residual: f64 },
    #[error("body {body} reaches the wall cell layer or leaves the grid")]
    BodyOutsideDomain { body: usize },
    #[error("cannot write {path}: {message}")]
    Io { path: String, message: String },
}

#[derive(Debug, Clone, PartialEq)]
pub struct FluidState {
    pub u: FaceField,
    pub p: Array3<f64>,
    pub t: f64,
}

impl FluidState {
    pub fn rest(grid: &GridSpec) -> Self {
        FluidState { u: FaceField::zeros(grid), p: Array3::zeros(grid.cell_shape()), t: 0.0 }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, Default)]
#[serde(rename_all = "snake_case")]
pub enum PressureSolver {
    /// CG preconditioned by the separable Neumann inverse.
    #[default]
    SpectralPcg,
    /// Unpreconditioned CG.
    Cg,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct SolverParams {
    /// Relative residual for the backward-Euler solve.
    pub viscous_tol: f64,
    /// Relative residual for the pressure Poisson solve.
    pub pressure_tol: f64,
    pub max_iterations: usize,
    pub pressure_solver: PressureSolver,
}

impl Default for SolverParams {
    fn default() -> Self {
        SolverParams {
            viscous_tol: 1e-12,
            pressure_tol: 1e-10,
            max_iterations: 5000,
            pressure_solver: PressureSolver::SpectralPcg,
        }
    }
}

/// Terms of the per-step discrete energy identity
///
/// `KE_{n+1} - KE_n = dt (f,u*) - dt ν ‖∇u*‖² - ½‖u* - u^n‖² - ½‖u* - u^{n+1}‖²`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct StepBudget {
    pub dt: f64,
    pub kinetic_before: f64,
    pub kinetic_after: f64,
    /// `(f, u*)`
    pub power_in: f64,
    /// `ν ‖∇u*‖²`
    pub dissipation: f64,
    /// `½‖u* - u^n‖²`, numerical damping of backward Euler.
    pub implicit_loss: f64,
    /// `½‖u* - u^{n+1}‖²`, energy removed by the projection.
    pub projection_loss: f64,
}

impl StepBudget {
    /// Signed defect of the identity.
    pub fn defect(&self) -> f64 {
        (self.kinetic_after - self.kinetic_before)
            - (self.dt * self.power_in
                - self.dt * self.dissipation
                - self.implicit_loss
                - self.projection_loss)
    }

    /// Defect relative to the largest term in the identity.
    pub fn relative_defect(&self) -> f64 {
        let scale = [
            self.kinetic_after,
            self.kinetic_before,
            (self.dt * self.power_in).abs(),
            self.dt * self.dissipation,
            self.implicit_loss,
            self.projection_loss,
        ]
        .into_iter()
        .fold(0.0f64, f64::max);
        if scale == 0.0 {
            0.0
        } else {
            self.defect().abs() / scale
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct EnergyReport {
    /// `½‖u‖²`
    pub kinetic: f64,
    /// `ν‖∇u‖²`
    pub dissipation: f64,
    /// `(f, u)`
    pub power_in: f64,
}

#[derive(Debug, Clone)]
pub struct StokesSolver {
    pub grid: GridSpec,
    pub nu: f64,
    pub params: SolverParams,
    eigen: Option<NeumannEigenSolver>,
}

impl StokesSolver {
    pub fn new(grid: GridSpec, nu: f64, params: SolverParams) -> Self {
        let eigen = match params.pressure_solver {
            PressureSolver::SpectralPcg => Some(NeumannEigenSolver::new(&grid)),
            PressureSolver::Cg => None,
        };
        StokesSolver { grid, nu, params, eigen }
    }

    /// Discrete Leray projection. Returns the divergence-free part and the
    /// potential `φ` with `u_df = u - grad φ` (zero mean).
    pub fn project(&self, u: &FaceField) -> Result<(FaceField, Array3<f64>), FluidError> {
        let g = &self.grid;
        let mut rhs = ops::divergence(u, g);
        rhs.mapv_inplace(|v| -v);
        let mut phi = Array3::zeros(g.cell_shape());
        let apply = |x: &[f64], y: &mut [f64]| ops::neg_neumann_laplacian(x, y, g);
        let pre_fn;
        let pre: Option<&dyn Fn(&[f64], &mut [f64])> = match &self.eigen {
            Some(e) => {
                pre_fn = move |r: &[f64], z: &mut [f64]| e.solve(r, z);
                Some(&pre_fn)
            }
            None => None,
        };
        conjugate_gradient(
            &apply,
            pre,
            rhs.as_slice().expect("standard layout"),
            phi.as_slice_mut().expect("standard layout"),
            self.params.pressure_tol,
            self.params.max_iterations,
            true,
        )
        .map_err(|s| FluidError::SolverDiverged {
            solver: "pressure".into(),
            iterations: s.iterations,
            residual: s.relative_residual,
        })?;
        let mut out = u.clone();
        out.axpy(-1.0, &ops::gradient(&phi, g));
        out.zero_walls(g);
        Ok((out, phi))
    }

    /// Solves `(I - dt ν Δ) u* = rhs` component-wise, warm-started from `guess`.
    fn viscous_solve(&self, rhs: &FaceField, guess: &FaceField, dt: f64) -> Result<FaceField, FluidError> {
        let g = &self.grid;
        let c = dt * self.nu;
        let mut out = guess.clone();
        for a in 0..3 {
            let apply = |x: &[f64], y: &mut [f64]| {
                ops::vector_laplacian_component(a, x, y, g);
                for (yi, xi) in y.iter_mut().zip(x) {
                    *yi = xi - c * *yi;
                }
            };
            conjugate_gradient(
                &apply,
                None,
                rhs.c[a].as_slice().expect("standard layout"),
                out.c[a].as_slice_mut().expect("standard layout"),
                self.params.viscous_tol,
                self.params.max_iterations,
                false,
            )
            .map_err(|s| FluidError::SolverDiverged {
                solver: "viscous".into(),
                iterations: s.iterations,
                residual: s.relative_residual,
            })?;
        }
        out.zero_walls(g);
        Ok(out)
    }

    /// One step with a cell-centred force density.
    pub fn stokes_step(
        &self,
        state: &FluidState,
        f: &ForceDensityField,
        dt: f64,
    ) -> Result<(FluidState, StepBudget), FluidError> {
        self.stokes_step_faces(state, &f.to_faces(&self.grid), dt)
    }

    /// One step with forcing already sampled on the faces.
    pub fn stokes_step_faces(
        &self,
        state: &FluidState,
        f: &FaceField,
        dt: f64,
    ) -> Result<(FluidState, StepBudget), FluidError> {
        assert!(dt > 0.0, "dt must be positive");
        let g = &self.grid;
        let mut rhs = state.u.clone();
        rhs.axpy(dt, f);
        rhs.zero_walls(g);
        let u_star = self.viscous_solve(&rhs, &state.u, dt)?;
        let (u_new, phi) = self.project(&u_star)?;
        if !u_new.is_finite() {
            return Err(FluidError::SolverDiverged {
                solver: "step".into(),
                iterations: 0,
                residual: f64::NAN,
            });
        }
        let budget = StepBudget {
            dt,
            kinetic_before: 0.5 * ops::inner(&state.u, &state.u, g),
            kinetic_after: 0.5 * ops::inner(&u_new, &u_new, g),
            power_in: ops::inner(f, &u_star, g),
            dissipation: self.nu * ops::gradient_energy(&u_star, g),
            implicit_loss: 0.5 * ops::inner(&u_star.sub(&state.u), &u_star.sub(&state.u), g),
            projection_loss: 0.5 * ops::inner(&u_star.sub(&u_new), &u_star.sub(&u_new), g),
        };
        let p = phi.mapv(|v| v / dt);
        Ok((FluidState { u: u_new, p, t: state.t + dt }, budget))
    }

    pub fn energy_report(&self, state: &FluidState, f: &ForceDensityField) -> EnergyReport {
        energy_report(state, f, self.nu, &self.grid)
    }
}

pub fn energy_report(state: &FluidState, f: &ForceDensityField, nu: f64, grid: &GridSpec) -> EnergyReport {
    EnergyReport {
        kinetic: 0.5 * ops::inner(&state.u, &state.u, grid),
        dissipation: nu * ops::gradient_energy(&state.u, grid),
        power_in: ops::inner(&f.to_faces(grid), &state.u, grid),
    }
}

/// Mean velocity over the cells whose centres lie in `shape` at `center`,
/// normalised by the analytic measure of the shape.
pub fn average_velocity(
    u: &FaceField,
    grid: &GridSpec,
    shape: &BodyShape,
    center: &Vec3,
    body: usize,
) -> Result<Vec3, FluidError> {
    let cells = grid.covered_cells(shape, center, body)?;
    let mut acc = Vec3::zeros();
    for idx in cells {
        acc += u.cell_value(idx);
    }
    Ok(acc * (grid.cell_volume() / measure(shape)))
}
