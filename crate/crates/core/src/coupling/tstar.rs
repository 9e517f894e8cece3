//! Explicit bounds on the existence and uniqueness horizon.
//!
//! Each bound is the minimum of a few clauses; the report names the clause
//! that binds. The formulas are evaluated literally with the supplied
//! constants, so the result is only as meaningful as those constants.

use serde::{Deserialize, Serialize};

/// Constants entering the horizon bounds. Norms are discrete surrogates of
/// the continuum norms: `u_norm_l2` stands for `‖u‖_{L²(Q_T)}`,
/// `u_norm_l2_linf` for `‖u‖_{L²(0,T;L∞)}`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct TStarParams {
    /// Shift-Lipschitz constant of the indicators.
    pub c: f64,
    /// Radius of admissible shifts.
    pub h0: f64,
    /// Embedding constant; not measurable on the grid, default 1.
    pub k_embed: f64,
    /// Energy-estimate constant of the Stokes problem.
    pub l_energy: f64,
    /// Lipschitz constant of the force map in the configuration.
    pub l_lip: f64,
    /// Radius of the velocity ball.
    pub q: f64,
    pub u_norm_l2: f64,
    pub u_norm_l2_linf: f64,
    pub y0_norm: f64,
    pub v_inf: f64,
    /// Smallest body measure.
    pub mes_s0: f64,
    pub mes_omega: f64,
    /// Horizon on which `u` is given.
    pub horizon: f64,
    /// Force-bound constant (per unit `√(T mes Ω)(1 + v_inf)`).
    pub c_o: f64,
    pub n_bodies: usize,
}

impl TStarParams {
    pub fn validate(&self) -> Vec<String> {
        let mut errs = Vec::new();
        let positive = [
            ("c", self.c),
            ("h0", self.h0),
            ("k_embed", self.k_embed),
            ("l_energy", self.l_energy),
            ("l_lip", self.l_lip),
            ("q", self.q),
            ("u_norm_l2", self.u_norm_l2),
            ("u_norm_l2_linf", self.u_norm_l2_linf),
            ("mes_s0", self.mes_s0),
            ("mes_omega", self.mes_omega),
            ("horizon", self.horizon),
            ("c_o", self.c_o),
        ];
        for (name, v) in positive {
            if !(v.is_finite() && v > 0.0) {
                errs.push(format!("{name} must be positive, got {v}"));
            }
        }
        for (name, v) in [("y0_norm", self.y0_norm), ("v_inf", self.v_inf)] {
            if !(v.is_finite() && v >= 0.0) {
                errs.push(format!("{name} must be non-negative, got {v}"));
            }
        }
        if self.n_bodies == 0 {
            errs.push("n_bodies must be positive".into());
        }
        errs
    }

    /// Default ball radius `2√L‖y₀‖`, or 1 when the initial velocity vanishes.
    pub fn default_q(l_energy: f64, y0_norm: f64) -> f64 {
        let q = 2.0 * l_energy.sqrt() * y0_norm;
        if q > 0.0 {
            q
        } else {
            1.0
        }
    }

    /// Radius of the ball holding every trajectory on `[0, t]`.
    pub fn trajectory_bound(&self, max_z0: f64, t: f64) -> f64 {
        trajectory_bound(max_z0, self.q, t, self.mes_s0)
    }

    /// `C_1` with `‖F_*‖ < C_1 √T`.
    pub fn c1(&self) -> f64 {
        self.c_o * self.mes_omega.sqrt() * (1.0 + self.v_inf)
    }
}

/// `P(T) = max_i |z_i0| + q √T / √mes(S_0)`
pub fn trajectory_bound(max_z0: f64, q: f64, t: f64, mes_s0: f64) -> f64 {
    max_z0 + q * t.sqrt() / mes_s0.sqrt()
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Bound {
    pub value: f64,
    pub binding_clause: String,
    /// Every clause with its value, in formula order.
    pub clauses: Vec<(String, f64)>,
}

fn min_of(clauses: Vec<(&str, f64)>) -> Bound {
    let mut best = 0;
    for (i, (_, v)) in clauses.iter().enumerate() {
        if *v < clauses[best].1 {
            best = i;
        }
    }
    Bound {
        value: clauses[best].1,
        binding_clause: clauses[best].0.to_string(),
        clauses: clauses.into_iter().map(|(n, v)| (n.to_string(), v)).collect(),
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TStarEstimate {
    /// Horizon of the body-ODE contraction.
    pub t0: Bound,
    /// Horizon on which the body map is Lipschitz in `u` with the ball radius `q`.
    pub t: Bound,
    /// Existence horizon of the coupled problem.
    pub tstar: Bound,
    /// Window on which the uniqueness argument closes.
    pub uniqueness: Bound,
    pub c1: f64,
}

pub fn estimate_t_star(p: &TStarParams) -> Result<TStarEstimate, Vec<String>> {
    let errs = p.validate();
    if !errs.is_empty() {
        return Err(errs);
    }
    let mes = p.mes_s0;
    let t0 = min_of(vec![
        ("confinement", mes * p.h0 * p.h0 / (4.0 * p.u_norm_l2 * p.u_norm_l2)),
        ("contraction", mes * mes * p.horizon / (p.c * p.c * p.u_norm_l2_linf * p.u_norm_l2_linf)),
        ("unit", 1.0),
    ]);
    let t = min_of(vec![
        ("embedding", (mes / (p.c * p.k_embed * p.q)).powi(2)),
        ("ode_contraction", t0.value),
    ]);
    let c1 = p.c1();
    let energy = (p.q * p.q - p.l_energy * p.y0_norm * p.y0_norm) / (p.l_energy * c1 * c1);
    let mut tstar = min_of(vec![("energy_ball", energy), ("lipschitz_window", t.value), ("unit", 1.0)]);
    tstar.value = tstar.value.max(0.0);
    let n = p.n_bodies as f64;
    let uniqueness = min_of(vec![
        ("force_lipschitz", mes / (4.0 * n * p.l_lip * (p.l_energy * mes * p.mes_omega).sqrt())),
        ("half_embedding", (mes / (2.0 * p.c * p.k_embed * p.q)).powi(2)),
        ("lipschitz_window", t.value),
    ]);
    Ok(TStarEstimate { t0, t, tstar, uniqueness, c1 })
}

#[cfg(test)]
mod tests {
    use super::*;

    pub(crate) fn ones() -> TStarParams {
        TStarParams {
            c: 1.0,
            h0: 1.0,
            k_embed: 1.0,
            l_energy: 1.0,
            l_lip: 1.0,
            q: 1.0,
            u_norm_l2: 1.0,
            u_norm_l2_linf: 1.0,
            y0_norm: 0.5,
            v_inf: 0.0,
            mes_s0: 1.0,
            mes_omega: 1.0,
            horizon: 1.0,
            c_o: 1.0,
            n_bodies: 3,
        }
    }

    #[test]
    fn hand_substitution() {
        let e = estimate_t_star(&ones()).unwrap();
        assert_eq!(e.t0.value, 0.25);
        assert_eq!(e.t0.binding_clause, "confinement");
        assert_eq!(e.t.value, 0.25);
        // (1 - 0.25) / 1 = 0.75, capped by t = 0.25
        assert_eq!(e.tstar.value, 0.25);
        assert_eq!(e.tstar.binding_clause, "lipschitz_window");
        assert_eq!(e.uniqueness.value, 1.0 / 12.0);
    }

    #[test]
    fn empty_existence_window() {
        let p = TStarParams { q: 0.5, y0_norm: 0.5, ..ones() };
        let e = estimate_t_star(&p).unwrap();
        assert_eq!(e.tstar.value, 0.0);
        assert_eq!(e.tstar.binding_clause, "energy_ball");
    }

    #[test]
    fn doubling_u_quarters_first_clause() {
        let a = estimate_t_star(&ones()).unwrap();
        let b = estimate_t_star(&TStarParams { u_norm_l2: 2.0, ..ones() }).unwrap();
        assert_eq!(b.t0.clauses[0].1 * 4.0, a.t0.clauses[0].1);
    }

    #[test]
    fn trajectory_bound_substitution() {
        assert_eq!(trajectory_bound(1.0, 1.0, 1.0, 1.0), 2.0);
    }

    #[test]
    fn nonpositive_constants_rejected() {
        let errs = estimate_t_star(&TStarParams { c: 0.0, h0: -1.0, ..ones() }).unwrap_err();
        assert_eq!(errs.len(), 2);
    }
}
