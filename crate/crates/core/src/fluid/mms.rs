//! Manufactured-solution verification of the Stokes stepper on the unit cube.
//!
//! The exact velocity is `u(x,t) = g(t) U(x)` with `U` a sum of curls of
//! products of sines, divergence-free and vanishing on every wall. The
//! pressure is `g(t) P cos(πx) cos(πy) cos(πz)`, which has zero normal
//! derivative on the walls. Forcing `∂t u − νΔu + ∇p` is sampled on the faces
//! at the end of each step.

use std::f64::consts::PI;

use serde::{Deserialize, Serialize};

use super::{ops, FaceField, FluidError, FluidState, GridSpec, SolverParams, StokesSolver};
use crate::geometry::Vec3;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum TimeProfile {
    /// `g(t) = 1 + t`; backward Euler integrates it without time error.
    Linear,
    /// `g(t) = 1 + sin(ω t)`
    Sine { omega: f64 },
}

impl TimeProfile {
    fn value(&self, t: f64) -> f64 {
        match *self {
            TimeProfile::Linear => 1.0 + t,
            TimeProfile::Sine { omega } => 1.0 + (omega * t).sin(),
        }
    }

    fn rate(&self, t: f64) -> f64 {
        match *self {
            TimeProfile::Linear => 1.0,
            TimeProfile::Sine { omega } => omega * (omega * t).cos(),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct MmsCase {
    pub nu: f64,
    pub profile: TimeProfile,
    pub pressure_amplitude: f64,
    pub dt: f64,
    pub steps: usize,
}

impl MmsCase {
    /// Spatial refinement study. The linear profile has no time error, but
    /// the projection splitting leaves an `O(dt)` wall layer driven by the
    /// pressure gradient, so `dt` is kept well below `h²`.
    pub fn spatial() -> Self {
        MmsCase { nu: 1.0, profile: TimeProfile::Linear, pressure_amplitude: 1.0, dt: 1e-4, steps: 10 }
    }

    /// Temporal refinement study at fixed resolution.
    pub fn temporal() -> Self {
        MmsCase {
            nu: 0.05,
            profile: TimeProfile::Sine { omega: 10.0 },
            pressure_amplitude: 1.0,
            dt: 0.02,
            steps: 10,
        }
    }
}

#[derive(Clone, Copy)]
enum Factor {
    /// `sin(πs)`
    S1,
    /// `sin(2πs)`
    S2,
    /// `sin²(πs)`
    Q,
}

impl Factor {
    fn eval(self, s: f64) -> (f64, f64) {
        match self {
            Factor::S1 => ((PI * s).sin(), -PI * PI * (PI * s).sin()),
            Factor::S2 => ((2.0 * PI * s).sin(), -4.0 * PI * PI * (2.0 * PI * s).sin()),
            Factor::Q => ((PI * s).sin().powi(2), 2.0 * PI * PI * (2.0 * PI * s).cos()),
        }
    }
}

use Factor::{Q, S1, S2};

/// Component terms `(coefficient, factors in x, y, z)`.
const TERMS: [&[(f64, [Factor; 3])]; 3] = [
    &[(1.0, [Q, S2, S1])],
    &[(-1.0, [S2, Q, S1]), (1.0, [S1, Q, S2])],
    &[(-1.0, [S1, S2, Q])],
];

/// Steady spatial shape `U` and its Laplacian.
pub fn shape_field(x: &Vec3) -> (Vec3, Vec3) {
    let mut u = Vec3::zeros();
    let mut lap = Vec3::zeros();
    for a in 0..3 {
        for (c, f) in TERMS[a] {
            let v: [(f64, f64); 3] = std::array::from_fn(|d| f[d].eval(x[d]));
            u[a] += PI * c * v[0].0 * v[1].0 * v[2].0;
            lap[a] += PI
                * c
                * (v[0].1 * v[1].0 * v[2].0 + v[0].0 * v[1].1 * v[2].0 + v[0].0 * v[1].0 * v[2].1);
        }
    }
    (u, lap)
}

fn pressure_gradient(x: &Vec3) -> Vec3 {
    let c = x.map(|s| (PI * s).cos());
    let s = x.map(|s| (PI * s).sin());
    Vec3::new(-PI * s.x * c.y * c.z, -PI * c.x * s.y * c.z, -PI * c.x * c.y * s.z)
}

pub fn exact_velocity(case: &MmsCase, x: &Vec3, t: f64) -> Vec3 {
    shape_field(x).0 * case.profile.value(t)
}

pub fn forcing(case: &MmsCase, x: &Vec3, t: f64) -> Vec3 {
    let (u, lap) = shape_field(x);
    let g = case.profile.value(t);
    u * case.profile.rate(t) - lap * (case.nu * g) + pressure_gradient(x) * (case.pressure_amplitude * g)
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct MmsResult {
    pub cells: usize,
    pub dt: f64,
    pub steps: usize,
    /// Discrete L² velocity error at the final time.
    pub l2_error: f64,
}

/// Runs the case on an `n³` grid and returns the final velocity error.
pub fn run_case(case: &MmsCase, n: usize, params: SolverParams) -> Result<MmsResult, FluidError> {
    let grid = GridSpec::cube(1.0, n).expect("valid MMS grid");
    let solver = StokesSolver::new(grid, case.nu, params);
    let (u0, _) = solver.project(&FaceField::from_fn(&grid, |x| exact_velocity(case, x, 0.0)))?;
    let mut state = FluidState { u: u0, p: ndarray::Array3::zeros(grid.cell_shape()), t: 0.0 };
    for n_step in 0..case.steps {
        let t1 = (n_step + 1) as f64 * case.dt;
        let f = FaceField::from_fn(&grid, |x| forcing(case, x, t1));
        state = solver.stokes_step_faces(&state, &f, case.dt)?.0;
        state.t = t1;
    }
    let exact = FaceField::from_fn(&grid, |x| exact_velocity(case, x, state.t));
    Ok(MmsResult { cells: n, dt: case.dt, steps: case.steps, l2_error: ops::l2_norm(&state.u.sub(&exact), &grid) })
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ConvergencePair {
    pub coarse: MmsResult,
    pub fine: MmsResult,
    pub ratio: f64,
}

/// Errors at `n` and `2n` cells with identical time stepping.
pub fn spatial_study(case: &MmsCase, n: usize, params: SolverParams) -> Result<ConvergencePair, FluidError> {
    let coarse = run_case(case, n, params)?;
    let fine = run_case(case, 2 * n, params)?;
    Ok(ConvergencePair { coarse, fine, ratio: coarse.l2_error / fine.l2_error })
}

/// Errors at `dt` and `dt/2` over the same final time on an `n³` grid.
pub fn temporal_study(case: &MmsCase, n: usize, params: SolverParams) -> Result<ConvergencePair, FluidError> {
    let coarse = run_case(case, n, params)?;
    let half = MmsCase { dt: case.dt / 2.0, steps: case.steps * 2, ..*case };
    let fine = run_case(&half, n, params)?;
    Ok(ConvergencePair { coarse, fine, ratio: coarse.l2_error / fine.l2_error })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn shape_field_is_divergence_free_and_vanishes_on_walls() {
        let eps = 1e-6;
        for x in [Vec3::new(0.2, 0.7, 0.4), Vec3::new(0.9, 0.1, 0.55)] {
            let mut div = 0.0;
            for d in 0..3 {
                let mut xp = x;
                let mut xm = x;
                xp[d] += eps;
                xm[d] -= eps;
                div += (shape_field(&xp).0[d] - shape_field(&xm).0[d]) / (2.0 * eps);
            }
            assert!(div.abs() < 1e-7, "{div}");
        }
        for w in [Vec3::new(0.0, 0.3, 0.6), Vec3::new(0.4, 1.0, 0.2), Vec3::new(0.7, 0.8, 1.0)] {
            assert!(shape_field(&w).0.norm() < 1e-14);
        }
    }

    #[test]
    fn laplacian_matches_finite_differences() {
        let x = Vec3::new(0.31, 0.62, 0.27);
        let e = 1e-4;
        let mut fd = Vec3::zeros();
        for d in 0..3 {
            let mut xp = x;
            let mut xm = x;
            xp[d] += e;
            xm[d] -= e;
            fd += (shape_field(&xp).0 - 2.0 * shape_field(&x).0 + shape_field(&xm).0) / (e * e);
        }
        assert!((fd - shape_field(&x).1).norm() < 1e-5 * fd.norm());
    }
}
