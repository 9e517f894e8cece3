//! Fixed-point form of the coupled system: `u ↦ B(F(A(u)))`.
//!
//! * `A` integrates the body ODE through a frozen velocity series,
//! * `F` evaluates and spreads the internal forces along a trajectory,
//! * `B` solves the Stokes problem driven by a force series.
//!
//! With `u = (u_1, …, u_N)` the velocities after each step, `A` uses
//! `w_{n+1} = w_n + dt · avg(u_{n+1}, w_n)`, `F` uses `f_n = F(w_n, v(t_n))`
//! and `B` steps from the initial fluid state with `f_n` on step `n`. A fixed
//! point therefore coincides with the time-marched solution.

use serde::{Deserialize, Serialize};

use super::{step_count, ControlSchedule, Coupler, CouplingError, SwimmerState, WellposednessViolation};
use crate::fluid::{ops, FaceField, FluidState, ForceDensityField};
use crate::geometry::Vec3;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct PicardOptions {
    pub window: f64,
    pub dt: f64,
    pub max_iters: usize,
    /// Stop when `sup_n ‖u^{k+1}_n − u^k_n‖ ≤ tol · sup_n ‖u^{k+1}_n‖`.
    pub tol: f64,
}

#[derive(Debug, Clone)]
pub struct PicardOutcome {
    /// `residuals[k]` compares iterate `k+1` with iterate `k`.
    pub residuals: Vec<f64>,
    pub converged: bool,
    pub trajectory: Vec<SwimmerState>,
    pub velocity: Vec<FaceField>,
}

impl PicardOutcome {
    pub fn iterations(&self) -> usize {
        self.residuals.len()
    }

    /// `r_k = residual_k / residual_{k-1}` for `k ≥ 1`.
    pub fn ratios(&self) -> Vec<f64> {
        self.residuals.windows(2).map(|w| w[1] / w[0]).collect()
    }
}

/// Body trajectories `w_0..w_N` driven by the frozen series `u_1..u_N`.
pub fn ode_map_a(c: &Coupler, u: &[FaceField], z0: &[Vec3], dt: f64) -> Result<Vec<SwimmerState>, CouplingError> {
    let mut out = vec![SwimmerState { z: z0.to_vec(), t: 0.0 }];
    for (n, un) in u.iter().enumerate() {
        let t = n as f64 * dt;
        let w = &out[n].z;
        c.monitor.check(&c.measure(w)).map_err(|v| {
            CouplingError::Violation(WellposednessViolation { step: n, t, violation: v })
        })?;
        let next = c.advect(w, un, dt, n, t)?;
        out.push(SwimmerState { z: next, t: (n + 1) as f64 * dt });
    }
    Ok(out)
}

/// Spread forces `f_0..f_{N-1}` along `w_0..w_{N-1}`.
pub fn force_map_f(
    c: &Coupler,
    w: &[SwimmerState],
    sched: &ControlSchedule,
) -> Result<Vec<ForceDensityField>, CouplingError> {
    w[..w.len() - 1]
        .iter()
        .enumerate()
        .map(|(n, s)| c.forcing(&s.z, sched.at(s.t), n, s.t).map(|(_, f)| f))
        .collect()
}

/// Velocities `u_1..u_N` of the Stokes problem forced by `f_0..f_{N-1}`.
pub fn stokes_map_b(
    c: &Coupler,
    fluid0: &FluidState,
    f: &[ForceDensityField],
    dt: f64,
) -> Result<Vec<FaceField>, CouplingError> {
    let mut state = fluid0.clone();
    let mut out = Vec::with_capacity(f.len());
    for fn_ in f {
        state = c.solver.stokes_step(&state, fn_, dt).map_err(CouplingError::Fluid)?.0;
        out.push(state.u.clone());
    }
    Ok(out)
}

/// Iterates `B∘F∘A` from `u⁰ ≡ 0` over the window.
pub fn picard_solve(
    c: &Coupler,
    z0: &[Vec3],
    fluid0: &FluidState,
    sched: &ControlSchedule,
    opts: &PicardOptions,
) -> Result<PicardOutcome, CouplingError> {
    let grid = c.grid();
    let steps = step_count(opts.window, opts.dt);
    let mut u = vec![FaceField::zeros(grid); steps];
    let mut residuals = Vec::new();
    let mut trajectory = ode_map_a(c, &u, z0, opts.dt)?;
    for _ in 0..opts.max_iters {
        let f = force_map_f(c, &trajectory, sched)?;
        let next = stokes_map_b(c, fluid0, &f, opts.dt)?;
        let mut res = 0.0f64;
        let mut scale = 0.0f64;
        for (a, b) in next.iter().zip(&u) {
            res = res.max(ops::l2_norm(&a.sub(b), grid));
            scale = scale.max(ops::l2_norm(a, grid));
        }
        residuals.push(res);
        u = next;
        trajectory = ode_map_a(c, &u, z0, opts.dt)?;
        if res <= opts.tol * scale {
            return Ok(PicardOutcome { residuals, converged: true, trajectory, velocity: u });
        }
    }
    Err(CouplingError::NoConvergence { residuals })
}
