//! Numerical experiments that shadow the a-priori estimates: contraction of
//! the body map, Lipschitz constants of the force map, the force-magnitude
//! bound and continuous dependence on the initial configuration.
//!
//! Continuum norms are replaced by discrete ones: `L²(Ω)` by the cell-centred
//! quadrature, `L∞(Ω)` by the maximum over cell centres, and time integrals by
//! left Riemann sums on the `dt` mesh. Every report names the norms it used.

use std::collections::BTreeMap;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};
use serde_json::{json, Value};

use crate::config::ScenarioConfig;
use crate::coupling::tstar::{estimate_t_star, trajectory_bound, TStarEstimate, TStarParams};
use crate::coupling::{run::run_scenario, CouplingError, MonitorParams, WellposednessViolation};
use crate::fluid::{average_velocity, ops, FaceField, FluidError, GridSpec};
use crate::forces::{assemble_body_forces, assemble_elastic, assemble_rotation, BodyForceSet, Guards, SwimmerConfig};
use crate::geometry::{measure, BodyShape, Domain, Vec3};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ExperimentReport {
    pub experiment: String,
    pub seed: u64,
    pub constants: BTreeMap<String, Value>,
    pub samples: usize,
    pub extremes: BTreeMap<String, Value>,
    /// Samples that were skipped, each with the reason.
    #[serde(default)]
    pub flagged: Vec<Value>,
}

impl ExperimentReport {
    fn new(experiment: &str, seed: u64) -> Self {
        ExperimentReport {
            experiment: experiment.into(),
            seed,
            constants: BTreeMap::new(),
            samples: 0,
            extremes: BTreeMap::new(),
            flagged: Vec::new(),
        }
    }

    fn constant(&mut self, k: &str, v: impl Into<Value>) {
        self.constants.insert(k.into(), v.into());
    }

    fn extreme(&mut self, k: &str, v: impl Into<Value>) {
        self.extremes.insert(k.into(), v.into());
    }

    /// Numeric extreme by name, `None` if absent or not a number.
    pub fn extreme_f64(&self, k: &str) -> Option<f64> {
        self.extremes.get(k).and_then(Value::as_f64)
    }

    pub fn constant_f64(&self, k: &str) -> Option<f64> {
        self.constants.get(k).and_then(Value::as_f64)
    }
}

/// Per-experiment seed derived from the scenario seed, so different
/// experiments never share a random stream.
pub fn experiment_seed(base: u64, name: &str) -> u64 {
    // FNV-1a
    let mut h: u64 = 0xcbf29ce484222325;
    for b in name.bytes() {
        h ^= b as u64;
        h = h.wrapping_mul(0x100000001b3);
    }
    base ^ h
}

/// Uniform sample in the ball of radius `r`.
pub fn sample_ball(rng: &mut impl Rng, r: f64) -> Vec3 {
    loop {
        let p = Vec3::new(
            rng.random_range(-1.0..1.0),
            rng.random_range(-1.0..1.0),
            rng.random_range(-1.0..1.0),
        );
        if p.norm_squared() <= 1.0 {
            return p * r;
        }
    }
}

fn stacked_diff(a: &[Vec3], b: &[Vec3]) -> f64 {
    a.iter().zip(b).map(|(x, y)| (x - y).norm_squared()).sum::<f64>().sqrt()
}

fn force_diff(a: &BodyForceSet, b: &BodyForceSet) -> f64 {
    stacked_diff(&a.densities, &b.densities)
}

/// `max |u|` over cell centres.
pub fn linf_norm(u: &FaceField, grid: &GridSpec) -> f64 {
    let [cx, cy, cz] = u.cell_centered(grid);
    let mut m = 0.0f64;
    for ((a, b), c) in cx.iter().zip(cy.iter()).zip(cz.iter()) {
        m = m.max((a * a + b * b + c * c).sqrt());
    }
    m
}

/// `(‖u‖_{L²(Q)}, ‖u‖_{L²(0,T;L∞)})` by left Riemann sums.
pub fn series_norms(u: &[FaceField], grid: &GridSpec, dt: f64) -> (f64, f64) {
    let mut l2 = 0.0;
    let mut linf = 0.0;
    for un in u {
        l2 += dt * ops::l2_norm(un, grid).powi(2);
        linf += dt * linf_norm(un, grid).powi(2);
    }
    (l2.sqrt(), linf.sqrt())
}

/// Analytic force-magnitude constant `C_o` for configurations in the ball of
/// radius `p` with pair distances above `2r`: every density satisfies
/// `|d_i| ≤ H + R·v` with `H = 2 k_max max(2p, l_max)` and
/// `R = 3(2p + 2p²/r)`, so `‖F_*‖ ≤ √(T n mes_max)(H + R v)`.
pub fn analytic_force_constant(cfg: &SwimmerConfig, p: f64, mes_omega: f64) -> f64 {
    let k_max = cfg.stiffness.iter().fold(0.0f64, |m, k| m.max(*k));
    let l_max = cfg.rest_lengths.iter().fold(0.0f64, |m, l| m.max(*l));
    let h = 2.0 * k_max * (2.0 * p).max(l_max);
    let r = 3.0 * (2.0 * p + 2.0 * p * p / cfg.radius);
    h.max(r) * (cfg.n() as f64 * cfg.max_measure() / mes_omega).sqrt()
}

/// Horizon constants resolved from a scenario, with the estimate itself.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ResolvedTStar {
    pub params: TStarParams,
    pub estimate: TStarEstimate,
    /// `P(T)` at the `T` bound, the radius used for the analytic `C_o`.
    pub trajectory_bound: f64,
    /// Where each defaulted constant came from.
    pub sources: BTreeMap<String, String>,
}

pub fn resolve_tstar(cfg: &ScenarioConfig) -> Result<ResolvedTStar, String> {
    let coupler = cfg.coupler();
    let grid = cfg.grid();
    let y0 = cfg.initial_fluid(&coupler.solver).map_err(|e| e.to_string())?;
    let y0_norm = ops::l2_norm(&y0.u, &grid);
    let s = &cfg.tstar;
    let mut sources = BTreeMap::new();
    let mut src = |k: &str, given: bool, default: &str| {
        sources.insert(k.to_string(), if given { "config".into() } else { default.to_string() });
    };
    let c = s.c.unwrap_or_else(|| cfg.swimmer.shapes.iter().map(|b| b.shift_lipschitz_sup()).fold(0.0, f64::max));
    src("c", s.c.is_some(), "analytic shift sup over shapes");
    let h0 = s.h0.unwrap_or(cfg.swimmer.radius);
    src("h0", s.h0.is_some(), "r");
    let q = s.q.unwrap_or_else(|| TStarParams::default_q(s.l_energy, y0_norm));
    src("q", s.q.is_some(), "2 sqrt(L) |y0|, or 1 at rest");
    let u_norm_l2 = s.u_norm_l2.unwrap_or(q);
    src("u_norm_l2", s.u_norm_l2.is_some(), "q");
    let u_norm_l2_linf = s.u_norm_l2_linf.unwrap_or(s.k_embed * q);
    src("u_norm_l2_linf", s.u_norm_l2_linf.is_some(), "K q");
    let mut params = TStarParams {
        c,
        h0,
        k_embed: s.k_embed,
        l_energy: s.l_energy,
        l_lip: s.l_lip,
        q,
        u_norm_l2,
        u_norm_l2_linf,
        y0_norm,
        v_inf: cfg.controls.v_inf(),
        mes_s0: cfg.swimmer.min_measure(),
        mes_omega: grid.domain().volume(),
        horizon: cfg.t_end,
        c_o: s.c_o.unwrap_or(1.0),
        n_bodies: cfg.swimmer.n(),
    };
    // T does not involve C_o, so one provisional pass fixes P(T).
    let first = estimate_t_star(&params).map_err(|e| e.join("; "))?;
    let max_z0 = cfg.centers.iter().map(|z| z.norm()).fold(0.0, f64::max);
    let p = trajectory_bound(max_z0, q, first.t.value, params.mes_s0);
    if s.c_o.is_none() {
        params.c_o = analytic_force_constant(&cfg.swimmer, p, params.mes_omega);
    }
    src("c_o", s.c_o.is_some(), "analytic force bound on the P(T) ball");
    let estimate = estimate_t_star(&params).map_err(|e| e.join("; "))?;
    Ok(ResolvedTStar { params, estimate, trajectory_bound: p, sources })
}

/// Inputs of the contraction experiment for one body.
#[derive(Debug, Clone, Copy)]
pub struct ContractionInput<'a> {
    pub grid: &'a GridSpec,
    /// `u(t_0), …, u(t_{N-1})`; the window is `T0 = N dt`.
    pub u: &'a [FaceField],
    pub dt: f64,
    pub shape: &'a BodyShape,
    pub z0: Vec3,
    pub h0: f64,
    pub c: f64,
    pub trials: usize,
    pub seed: u64,
}

/// `D(w)(t_m) = z0 + Σ_{n<m} dt · avg(u_n, w_n)` for `m = 0..N`.
pub fn d_map(inp: &ContractionInput, w: &[Vec3]) -> Result<Vec<Vec3>, FluidError> {
    let mut out = vec![inp.z0];
    let mut acc = inp.z0;
    for (un, wn) in inp.u.iter().zip(w) {
        acc += average_velocity(un, inp.grid, inp.shape, wn, 0)? * inp.dt;
        out.push(acc);
    }
    Ok(out)
}

/// Ratios `‖D(w¹) − D(w²)‖_sup / ‖w¹ − w²‖_sup` for random node-wise
/// trajectories in the `h0/2` ball around `z0`, against the bound
/// `C √T0 ‖u‖_{L²(0,T0;L∞)} / mes(S)`.
pub fn contraction_ratio_d(inp: &ContractionInput) -> Result<ExperimentReport, FluidError> {
    let mut rep = ExperimentReport::new("contraction", inp.seed);
    let mut rng = ChaCha8Rng::seed_from_u64(inp.seed);
    let n = inp.u.len();
    let t0 = n as f64 * inp.dt;
    let mes = measure(inp.shape);
    let (u_l2, u_linf) = series_norms(inp.u, inp.grid, inp.dt);
    let bound = inp.c * t0.sqrt() * u_linf / mes;
    let t0_bound = (mes * inp.h0 * inp.h0 / (4.0 * u_l2 * u_l2))
        .min(mes * mes * t0 / (inp.c * inp.c * u_linf * u_linf))
        .min(1.0);
    let mut max_ratio = 0.0f64;
    let mut min_ratio = f64::INFINITY;
    let mut accepted = 0;
    while accepted < inp.trials {
        let w1: Vec<Vec3> = (0..n).map(|_| inp.z0 + sample_ball(&mut rng, inp.h0 / 2.0)).collect();
        let w2: Vec<Vec3> = (0..n).map(|_| inp.z0 + sample_ball(&mut rng, inp.h0 / 2.0)).collect();
        let dw = w1.iter().zip(&w2).map(|(a, b)| (a - b).norm()).fold(0.0, f64::max);
        if dw == 0.0 {
            continue;
        }
        let d1 = d_map(inp, &w1)?;
        let d2 = d_map(inp, &w2)?;
        let dd = d1.iter().zip(&d2).map(|(a, b)| (a - b).norm()).fold(0.0, f64::max);
        let ratio = dd / dw;
        max_ratio = max_ratio.max(ratio);
        min_ratio = min_ratio.min(ratio);
        accepted += 1;
    }
    rep.samples = accepted;
    rep.constant("t0", t0);
    rep.constant("steps", n);
    rep.constant("dt", inp.dt);
    rep.constant("h0", inp.h0);
    rep.constant("c", inp.c);
    rep.constant("mes_s", mes);
    rep.constant("u_norm_l2", u_l2);
    rep.constant("u_norm_l2_linf", u_linf);
    rep.constant("t0_bound", t0_bound);
    rep.constant("t0_admissible", t0 < t0_bound);
    rep.constant(
        "norms",
        "L2(Q): cell-centred quadrature; L2(0,T;Linf): max over cell centres; time: left Riemann sum",
    );
    rep.extreme("max_ratio", max_ratio);
    rep.extreme("min_ratio", if accepted > 0 { min_ratio } else { 0.0 });
    rep.extreme("bound", bound);
    Ok(rep)
}

/// Runs the contraction experiment for every body on the velocity series of a
/// coupled march over the experiment horizon.
pub fn contraction_from_scenario(cfg: &ScenarioConfig) -> Result<ExperimentReport, crate::Error> {
    let seed = experiment_seed(cfg.seed, "contraction");
    let mut c = cfg.clone();
    c.t_end = cfg.experiment_horizon();
    c.output.snapshot_every = 0;
    let coupler = c.coupler();
    let mut fluid = c.initial_fluid(&coupler.solver).map_err(CouplingError::Fluid)?;
    let mut swimmer = c.initial_swimmer();
    let steps = crate::coupling::step_count(c.t_end, c.dt);
    let mut series = Vec::with_capacity(steps);
    for k in 0..steps {
        series.push(fluid.u.clone());
        let out = coupler.coupled_step(&swimmer, &fluid, c.controls.at(swimmer.t), c.dt, k)?;
        swimmer = out.swimmer;
        fluid = out.fluid;
    }
    let grid = c.grid();
    let h0 = c.tstar.h0.unwrap_or(c.swimmer.radius);
    let mut rep = ExperimentReport::new("contraction", seed);
    let mut bodies = Vec::new();
    let mut worst_margin = f64::INFINITY;
    for (i, (shape, z0)) in c.swimmer.shapes.iter().zip(&c.centers).enumerate() {
        let inp = ContractionInput {
            grid: &grid,
            u: &series,
            dt: c.dt,
            shape,
            z0: *z0,
            h0,
            c: c.tstar.c.unwrap_or_else(|| shape.shift_lipschitz_sup()),
            trials: c.experiments.trials,
            seed: seed.wrapping_add(i as u64),
        };
        let r = contraction_ratio_d(&inp)?;
        let (m, b) = (r.extreme_f64("max_ratio").unwrap(), r.extreme_f64("bound").unwrap());
        worst_margin = worst_margin.min(b - m);
        if i == 0 {
            rep.constants = r.constants.clone();
        }
        rep.samples += r.samples;
        bodies.push(json!({"body": i, "max_ratio": m, "bound": b, "c": inp.c}));
    }
    rep.extreme("bodies", Value::Array(bodies.clone()));
    let max_ratio = bodies.iter().filter_map(|b| b["max_ratio"].as_f64()).fold(0.0, f64::max);
    rep.extreme("max_ratio", max_ratio);
    rep.extreme("min_bound_margin", worst_margin);
    Ok(rep)
}

/// Inputs of the force-map Lipschitz experiment.
#[derive(Debug, Clone)]
pub struct LipschitzInput<'a> {
    pub swimmer: &'a SwimmerConfig,
    pub base_z: &'a [Vec3],
    pub radius: f64,
    pub v: &'a [f64],
    pub trials: usize,
    pub seed: u64,
    pub guards: Guards,
    pub monitor: MonitorParams,
    pub domain: Domain,
}

/// `max ‖F(z¹,v) − F(z²,v)‖ / ‖z¹ − z²‖` over random pairs, with the elastic
/// and rotation parts also measured on their own. Norms are stacked
/// Euclidean norms over bodies.
pub fn lipschitz_f_experiment(inp: &LipschitzInput) -> Result<ExperimentReport, WellposednessViolation> {
    let mut rep = ExperimentReport::new("lipschitz", inp.seed);
    let mut rng = ChaCha8Rng::seed_from_u64(inp.seed);
    let (mut total, mut elastic, mut rotation) = (0.0f64, 0.0f64, 0.0f64);
    let reject = |trial: usize, z: &[Vec3]| -> Result<(), WellposednessViolation> {
        let m = crate::coupling::monitor::measure(z, inp.swimmer, &inp.domain);
        inp.monitor.check(&m).map_err(|violation| WellposednessViolation { step: trial, t: 0.0, violation })
    };
    for trial in 0..inp.trials {
        let z1: Vec<Vec3> = inp.base_z.iter().map(|z| z + sample_ball(&mut rng, inp.radius)).collect();
        let z2: Vec<Vec3> = inp.base_z.iter().map(|z| z + sample_ball(&mut rng, inp.radius)).collect();
        reject(trial, &z1)?;
        reject(trial, &z2)?;
        let dz = stacked_diff(&z1, &z2);
        if dz == 0.0 {
            continue;
        }
        let as_violation = |e: crate::forces::ForceError| WellposednessViolation {
            step: trial,
            t: 0.0,
            violation: crate::coupling::monitor::Violation::from_force_error(e, &inp.guards),
        };
        let e1 = assemble_elastic(&z1, inp.swimmer, &inp.guards).map_err(as_violation)?;
        let e2 = assemble_elastic(&z2, inp.swimmer, &inp.guards).map_err(as_violation)?;
        let r1 = assemble_rotation(&z1, inp.v, inp.swimmer, &inp.guards).map_err(as_violation)?;
        let r2 = assemble_rotation(&z2, inp.v, inp.swimmer, &inp.guards).map_err(as_violation)?;
        let f1 = assemble_body_forces(&z1, inp.v, inp.swimmer, &inp.guards).map_err(as_violation)?;
        let f2 = assemble_body_forces(&z2, inp.v, inp.swimmer, &inp.guards).map_err(as_violation)?;
        elastic = elastic.max(force_diff(&e1, &e2) / dz);
        rotation = rotation.max(force_diff(&r1, &r2) / dz);
        total = total.max(force_diff(&f1, &f2) / dz);
        rep.samples += 1;
    }
    let v_inf = inp.v.iter().fold(0.0f64, |m, x| m.max(x.abs()));
    rep.constant("radius", inp.radius);
    rep.constant("v_inf", v_inf);
    rep.constant("norms", "stacked Euclidean norm over bodies for forces and configurations");
    rep.extreme("max_ratio", total);
    rep.extreme("max_ratio_elastic", elastic);
    rep.extreme("max_ratio_rotation", rotation);
    rep.extreme("rotation_per_unit_v", if v_inf > 0.0 { rotation / v_inf } else { 0.0 });
    Ok(rep)
}

/// Inputs of the force-bound check.
#[derive(Debug, Clone)]
pub struct ForceBoundInput<'a> {
    pub swimmer: &'a SwimmerConfig,
    /// Radius `P(T)` of the ball (about the origin) holding all centres.
    pub p: f64,
    pub v_levels: &'a [f64],
    pub horizon: f64,
    pub mes_omega: f64,
    pub c_o: f64,
    pub samples: usize,
    pub seed: u64,
    pub guards: Guards,
    /// Pair distances at or below this are rejected.
    pub collision_threshold: f64,
}

/// Samples admissible configurations with `|z_i| ≤ P`, evaluates
/// `‖F_*‖_{L²(Q_T)} = √(T Σ mes(S_i)|d_i|²)` for constant-in-time
/// configurations, maximised over the signs `±v` of every control, and
/// compares with `C_o √(T mes Ω)(1 + v)`.
pub fn force_bound_check(inp: &ForceBoundInput) -> ExperimentReport {
    let mut rep = ExperimentReport::new("force_bound", inp.seed);
    let mut rng = ChaCha8Rng::seed_from_u64(inp.seed);
    let n = inp.swimmer.n();
    let joints = n - 2;
    let mes: Vec<f64> = inp.swimmer.shapes.iter().map(measure).collect();
    let mut measured = vec![0.0f64; inp.v_levels.len()];
    let mut accepted = 0;
    let mut tries = 0usize;
    let max_tries = inp.samples.saturating_mul(10_000).max(1);
    while accepted < inp.samples && tries < max_tries {
        tries += 1;
        let z: Vec<Vec3> = (0..n).map(|_| sample_ball(&mut rng, inp.p)).collect();
        let separated =
            (0..n).all(|i| (i + 1..n).all(|j| (z[i] - z[j]).norm() > inp.collision_threshold));
        if !separated {
            continue;
        }
        let mut per_level = vec![0.0f64; inp.v_levels.len()];
        let mut ok = true;
        'levels: for (li, &level) in inp.v_levels.iter().enumerate() {
            for mask in 0..(1u64 << joints) {
                let v: Vec<f64> =
                    (0..joints).map(|j| if mask >> j & 1 == 1 { -level } else { level }).collect();
                match assemble_body_forces(&z, &v, inp.swimmer, &inp.guards) {
                    Ok(f) => {
                        let s: f64 = f.densities.iter().zip(&mes).map(|(d, m)| m * d.norm_squared()).sum();
                        per_level[li] = per_level[li].max((inp.horizon * s).sqrt());
                    }
                    Err(_) => {
                        ok = false;
                        break 'levels;
                    }
                }
            }
        }
        if !ok {
            continue;
        }
        for (m, p) in measured.iter_mut().zip(&per_level) {
            *m = m.max(*p);
        }
        accepted += 1;
    }
    rep.samples = accepted;
    let scale = (inp.horizon * inp.mes_omega).sqrt();
    let mut levels = Vec::new();
    let mut fitted = 0.0f64;
    let mut all_within = true;
    for (&v, &m) in inp.v_levels.iter().zip(&measured) {
        let bound = inp.c_o * scale * (1.0 + v);
        fitted = fitted.max(m / (scale * (1.0 + v)));
        all_within &= m <= bound;
        levels.push(json!({"v_inf": v, "bound": bound, "measured_max": m}));
    }
    rep.constant("p", inp.p);
    rep.constant("horizon", inp.horizon);
    rep.constant("mes_omega", inp.mes_omega);
    rep.constant("c_o", inp.c_o);
    rep.constant("collision_threshold", inp.collision_threshold);
    rep.constant("norms", "L2(Q_T) of the spread force for a configuration frozen over [0, T]");
    rep.extreme("levels", Value::Array(levels));
    rep.extreme("fitted_c_o", fitted);
    rep.extreme("within_bound", all_within);
    rep
}

/// Force-bound check on a scenario: `P(T)` and `C_o` from the horizon
/// constants, geometry from the swimmer.
pub fn force_bound_from_scenario(cfg: &ScenarioConfig) -> Result<ExperimentReport, crate::Error> {
    let t = resolve_tstar(cfg).map_err(crate::Error::Analysis)?;
    let horizon = t.estimate.t.value;
    let inp = ForceBoundInput {
        swimmer: &cfg.swimmer,
        p: t.trajectory_bound,
        v_levels: &cfg.experiments.v_inf_levels,
        horizon,
        mes_omega: t.params.mes_omega,
        c_o: t.params.c_o,
        samples: cfg.experiments.force_bound_samples,
        seed: experiment_seed(cfg.seed, "force_bound"),
        guards: Guards::for_domain(&cfg.grid().domain()),
        collision_threshold: cfg.monitor_params().collision_threshold,
    };
    Ok(force_bound_check(&inp))
}

pub fn lipschitz_from_scenario(cfg: &ScenarioConfig) -> Result<ExperimentReport, crate::Error> {
    let inp = LipschitzInput {
        swimmer: &cfg.swimmer,
        base_z: &cfg.centers,
        radius: cfg.experiments.lipschitz_radius,
        v: cfg.controls.at(0.0),
        trials: cfg.experiments.lipschitz_trials,
        seed: experiment_seed(cfg.seed, "lipschitz"),
        guards: Guards::for_domain(&cfg.grid().domain()),
        monitor: cfg.monitor_params(),
        domain: cfg.grid().domain(),
    };
    lipschitz_f_experiment(&inp).map_err(|v| crate::Error::Coupling(CouplingError::Violation(v)))
}

/// Paired runs with `z(0)` moved by `δ e` for a fixed random unit direction
/// `e` (stacked over bodies); `κ(δ) = sup_t ‖z^δ(t) − z(t)‖ / δ`.
pub fn uniqueness_perturbation_study(
    cfg: &ScenarioConfig,
    deltas: &[f64],
    horizon: f64,
    seed: u64,
) -> Result<ExperimentReport, CouplingError> {
    let mut rep = ExperimentReport::new("uniqueness", seed);
    let mut base_cfg = cfg.clone();
    base_cfg.t_end = horizon;
    base_cfg.output.snapshot_every = 0;
    let base = run_scenario(&base_cfg, None)?;
    if let Some(v) = &base.violation {
        rep.flagged.push(json!({"delta": 0.0, "run": "base", "violation": v}));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut e: Vec<Vec3> = (0..cfg.centers.len()).map(|_| sample_ball(&mut rng, 1.0)).collect();
    let norm = e.iter().map(|x| x.norm_squared()).sum::<f64>().sqrt();
    e.iter_mut().for_each(|x| *x /= norm);

    let mut rows = Vec::new();
    let mut kappas = Vec::new();
    for &delta in deltas {
        let mut c = base_cfg.clone();
        for (z, d) in c.centers.iter_mut().zip(&e) {
            *z += d * delta;
        }
        let run = run_scenario(&c, None)?;
        rep.samples += 1;
        if let Some(v) = &run.violation {
            rep.flagged.push(json!({"delta": delta, "run": "perturbed", "violation": v}));
            rows.push(json!({"delta": delta, "kappa": Value::Null, "flagged": true}));
            continue;
        }
        let diff = base
            .trajectory
            .iter()
            .zip(&run.trajectory)
            .map(|(a, b)| stacked_diff(&a.z, &b.z))
            .fold(0.0, f64::max);
        let identical = base.trajectory == run.trajectory;
        let kappa = if delta > 0.0 { Some(diff / delta) } else { None };
        if let Some(k) = kappa {
            kappas.push((delta, k));
        }
        rows.push(json!({"delta": delta, "kappa": kappa, "max_difference": diff, "identical": identical}));
    }
    let ratios: Vec<Value> = kappas
        .windows(2)
        .map(|w| json!({"deltas": [w[0].0, w[1].0], "ratio": w[0].1 / w[1].1}))
        .collect();
    rep.constant("horizon", horizon);
    rep.constant("steps", base.trajectory.len() - 1);
    rep.constant("norms", "stacked Euclidean norm over bodies, sup over time nodes");
    rep.extreme("runs", Value::Array(rows));
    rep.extreme("kappa_ratios", Value::Array(ratios));
    rep.extreme("kappa_max", kappas.iter().map(|k| k.1).fold(0.0, f64::max));
    Ok(rep)
}

pub fn uniqueness_from_scenario(cfg: &ScenarioConfig) -> Result<ExperimentReport, crate::Error> {
    let horizon = cfg.experiment_horizon();
    let mut rep = uniqueness_perturbation_study(
        cfg,
        &cfg.experiments.deltas,
        horizon,
        experiment_seed(cfg.seed, "uniqueness"),
    )?;
    if let Ok(t) = resolve_tstar(cfg) {
        rep.constant("uniqueness_window", t.estimate.uniqueness.value);
        rep.constant("within_window", horizon <= t.estimate.uniqueness.value);
    }
    Ok(rep)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn contraction_zero_field() {
        let grid = GridSpec::cube(1.0, 16).unwrap();
        let u = vec![FaceField::zeros(&grid); 3];
        let shape = BodyShape::ball(0.1).unwrap();
        let inp = ContractionInput {
            grid: &grid,
            u: &u,
            dt: 0.01,
            shape: &shape,
            z0: Vec3::repeat(0.5),
            h0: 0.1,
            c: shape.shift_lipschitz_sup(),
            trials: 10,
            seed: 1,
        };
        let r = contraction_ratio_d(&inp).unwrap();
        assert_eq!(r.extreme_f64("max_ratio"), Some(0.0));
        assert_eq!(r.samples, 10);
    }

    #[test]
    fn seeds_differ_per_experiment() {
        assert_ne!(experiment_seed(0, "lipschitz"), experiment_seed(0, "contraction"));
    }
}
