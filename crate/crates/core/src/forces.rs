//! Internal swimmer forces: Hooke links between consecutive body parts and
//! torque-free rotation triples at each interior joint, plus spreading of the
//! resulting per-body force densities onto the fluid grid.
//!
//! Every term acts as a constant force density over the body part it belongs
//! to. With equal-measure parts the volume integrals of all terms cancel in
//! sum and in moment.

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::fluid::{FluidError, ForceDensityField, GridSpec};
use crate::geometry::{measure, BodyShape, Domain, Vec3};

#[derive(Debug, Clone, Copy, PartialEq, Error, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum ForceError {
    #[error("link {link} has degenerate length {length:e}")]
    DegenerateConfiguration { link: usize, length: f64 },
    #[error("joint {joint} is collinear (sine {sine:e})")]
    CollinearJoint { joint: usize, sine: f64 },
}

/// Per-joint selection between closing and opening the joint angle.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, Default)]
#[serde(try_from = "i8", into = "i8")]
pub enum FoldSign {
    /// `+1`: positive coefficients close the joint angle.
    #[default]
    Fold,
    /// `-1`: positive coefficients open it.
    Unfold,
}

impl FoldSign {
    pub fn value(self) -> f64 {
        match self {
            FoldSign::Fold => 1.0,
            FoldSign::Unfold => -1.0,
        }
    }
}

impl TryFrom<i8> for FoldSign {
    type Error = String;
    fn try_from(v: i8) -> Result<Self, String> {
        match v {
            1 => Ok(FoldSign::Fold),
            -1 => Ok(FoldSign::Unfold),
            _ => Err(format!("fold sign must be +1 or -1, got {v}")),
        }
    }
}

impl From<FoldSign> for i8 {
    fn from(s: FoldSign) -> i8 {
        match s {
            FoldSign::Fold => 1,
            FoldSign::Unfold => -1,
        }
    }
}

/// How the in-plane arm directions are built.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, Default)]
#[serde(rename_all = "snake_case")]
pub enum DirectionRule {
    #[default]
    CrossProduct,
    GramSchmidt,
}

/// Numerical thresholds below which forces are undefined.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Guards {
    pub eps_deg: f64,
    pub eps_col: f64,
}

impl Guards {
    pub fn for_domain(domain: &Domain) -> Self {
        Guards { eps_deg: 1e-9 * domain.diagonal(), eps_col: 1e-9 }
    }
}

impl Default for Guards {
    fn default() -> Self {
        Guards { eps_deg: 1e-9, eps_col: 1e-9 }
    }
}

/// Static swimmer description.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SwimmerConfig {
    pub shapes: Vec<BodyShape>,
    /// Spring constants `k_i` of the `n-1` links.
    pub stiffness: Vec<f64>,
    /// Rest lengths `l_i` of the `n-1` links.
    pub rest_lengths: Vec<f64>,
    /// Radius of the ball every body part must fit in.
    pub radius: f64,
    /// One entry per interior joint; empty means all `Fold`.
    #[serde(default)]
    pub fold_signs: Vec<FoldSign>,
    #[serde(default)]
    pub direction_rule: DirectionRule,
}

impl SwimmerConfig {
    pub fn n(&self) -> usize {
        self.shapes.len()
    }

    pub fn fold_sign(&self, joint: usize) -> FoldSign {
        self.fold_signs.get(joint).copied().unwrap_or_default()
    }

    /// Every violated structural rule, as human-readable messages.
    pub fn validate(&self) -> Vec<String> {
        let mut errs = Vec::new();
        let n = self.n();
        if n <= 2 {
            errs.push(format!("swimmer needs n > 2 body parts, got n = {n}"));
        }
        if !(self.radius.is_finite() && self.radius > 0.0) {
            errs.push(format!("radius must be positive, got {}", self.radius));
        }
        for (i, s) in self.shapes.iter().enumerate() {
            if let Err(e) = s.validate(self.radius) {
                errs.push(format!("shape {i}: {e}"));
            }
        }
        let links = n.saturating_sub(1);
        if self.stiffness.len() != links {
            errs.push(format!("expected {links} stiffness values, got {}", self.stiffness.len()));
        }
        for (i, k) in self.stiffness.iter().enumerate() {
            if !(k.is_finite() && *k > 0.0) {
                errs.push(format!("stiffness k[{i}] must be positive, got {k}"));
            }
        }
        if self.rest_lengths.len() != links {
            errs.push(format!("expected {links} rest lengths, got {}", self.rest_lengths.len()));
        }
        for (i, l) in self.rest_lengths.iter().enumerate() {
            if !(l.is_finite() && *l > 2.0 * self.radius) {
                errs.push(format!("rest length l[{i}] = {l} must satisfy l > 2r = {}", 2.0 * self.radius));
            }
        }
        let joints = n.saturating_sub(2);
        if !self.fold_signs.is_empty() && self.fold_signs.len() != joints {
            errs.push(format!("expected {joints} fold signs, got {}", self.fold_signs.len()));
        }
        errs
    }

    /// True when all body parts have the same measure (to 1e-12 relative).
    pub fn equal_measures(&self) -> bool {
        let m: Vec<f64> = self.shapes.iter().map(measure).collect();
        let first = m.first().copied().unwrap_or(0.0);
        m.iter().all(|x| (x - first).abs() <= 1e-12 * first.abs())
    }

    pub fn min_measure(&self) -> f64 {
        self.shapes.iter().map(measure).fold(f64::INFINITY, f64::min)
    }

    pub fn max_measure(&self) -> f64 {
        self.shapes.iter().map(measure).fold(0.0, f64::max)
    }
}

/// Constant force density on each body part.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BodyForceSet {
    pub densities: Vec<Vec3>,
}

impl BodyForceSet {
    pub fn zeros(n: usize) -> Self {
        BodyForceSet { densities: vec![Vec3::zeros(); n] }
    }

    /// `Σ d_i mes(S_i)`
    pub fn net_force(&self, shapes: &[BodyShape]) -> Vec3 {
        self.densities.iter().zip(shapes).map(|(d, s)| d * measure(s)).sum()
    }

    /// `Σ (z_i - pivot) × d_i mes(S_i)`
    pub fn net_torque(&self, shapes: &[BodyShape], z: &[Vec3], pivot: &Vec3) -> Vec3 {
        self.densities
            .iter()
            .zip(shapes)
            .zip(z)
            .map(|((d, s), zi)| (zi - pivot).cross(&(d * measure(s))))
            .sum()
    }

    /// `Σ |d_i| mes(S_i)`, the scale for relative balance checks.
    pub fn magnitude(&self, shapes: &[BodyShape]) -> f64 {
        self.densities.iter().zip(shapes).map(|(d, s)| d.norm() * measure(s)).sum()
    }

    /// Euclidean norm of the stacked density vector.
    pub fn stacked_norm(&self) -> f64 {
        self.densities.iter().map(|d| d.norm_squared()).sum::<f64>().sqrt()
    }

    pub fn is_finite(&self) -> bool {
        self.densities.iter().all(|d| d.iter().all(|v| v.is_finite()))
    }

    fn add(&mut self, other: &BodyForceSet) {
        for (a, b) in self.densities.iter_mut().zip(&other.densities) {
            *a += b;
        }
    }
}

/// Hooke link force on the two endpoints.
pub fn hooke_pair(z_prev: &Vec3, z_cur: &Vec3, k: f64, l: f64, guards: &Guards) -> Result<(Vec3, Vec3), ForceError> {
    let e = z_cur - z_prev;
    let d = e.norm();
    if !(d >= guards.eps_deg) {
        return Err(ForceError::DegenerateConfiguration { link: 0, length: d });
    }
    let f_prev = e * (k * (d - l) / d);
    Ok((f_prev, -f_prev))
}

/// Sine of the joint angle, `|p × q| / (|p| |q|)`.
pub fn joint_sine(z_prev: &Vec3, z_cen: &Vec3, z_next: &Vec3) -> f64 {
    let p = z_prev - z_cen;
    let q = z_next - z_cen;
    let den = p.norm() * q.norm();
    if den == 0.0 {
        0.0
    } else {
        p.cross(&q).norm() / den
    }
}

fn check_joint(p: &Vec3, q: &Vec3, guards: &Guards) -> Result<(), ForceError> {
    let (np, nq) = (p.norm(), q.norm());
    if !(np >= guards.eps_deg) {
        return Err(ForceError::DegenerateConfiguration { link: 0, length: np });
    }
    if !(nq >= guards.eps_deg) {
        return Err(ForceError::DegenerateConfiguration { link: 1, length: nq });
    }
    let cross = p.cross(q).norm();
    if !(cross >= guards.eps_col * np * nq) {
        return Err(ForceError::CollinearJoint { joint: 0, sine: cross / (np * nq) });
    }
    Ok(())
}

/// In-plane directions `a ⟂ p`, `|a| = |p|` and `b ⟂ q`, `|b| = |q|` for the
/// arms `p = z_prev - z_cen`, `q = z_next - z_cen`. With `Fold`, `a` turns `p`
/// towards `q` and `-b` turns `q` towards `p`.
pub fn rotation_directions(
    z_prev: &Vec3,
    z_cen: &Vec3,
    z_next: &Vec3,
    sign: FoldSign,
    rule: DirectionRule,
    guards: &Guards,
) -> Result<(Vec3, Vec3), ForceError> {
    let p = z_prev - z_cen;
    let q = z_next - z_cen;
    check_joint(&p, &q, guards)?;
    let s = sign.value();
    let (np, nq) = (p.norm(), q.norm());
    match rule {
        DirectionRule::CrossProduct => {
            let n = p.cross(&q);
            // both point away from the other arm
            let v1 = p.cross(&n);
            let v2 = n.cross(&q);
            Ok((-v1.normalize() * (s * np), v2.normalize() * (s * nq)))
        }
        DirectionRule::GramSchmidt => {
            let pq = p.dot(&q);
            let a = (q - p * (pq / (np * np))).normalize();
            let b = (p - q * (pq / (nq * nq))).normalize();
            Ok((a * (s * np), -b * (s * nq)))
        }
    }
}

/// The three forces of one joint: `(f_prev, f_next, f_cen)`.
pub fn rotation_triple(
    z_prev: &Vec3,
    z_cen: &Vec3,
    z_next: &Vec3,
    v: f64,
    sign: FoldSign,
    rule: DirectionRule,
    guards: &Guards,
) -> Result<(Vec3, Vec3, Vec3), ForceError> {
    let (a, b) = rotation_directions(z_prev, z_cen, z_next, sign, rule, guards)?;
    let ratio = (z_prev - z_cen).norm_squared() / (z_next - z_cen).norm_squared();
    let f_prev = a * v;
    let f_next = -b * (v * ratio);
    let f_cen = -(f_prev + f_next);
    Ok((f_prev, f_next, f_cen))
}

fn check_shape(z: &[Vec3], v: &[f64], cfg: &SwimmerConfig) {
    assert_eq!(z.len(), cfg.n(), "one center per body part");
    assert_eq!(v.len(), cfg.n().saturating_sub(2), "one control per interior joint");
}

/// Hooke terms only.
pub fn assemble_elastic(z: &[Vec3], cfg: &SwimmerConfig, guards: &Guards) -> Result<BodyForceSet, ForceError> {
    let mut out = BodyForceSet::zeros(cfg.n());
    for i in 0..cfg.n() - 1 {
        let (fp, fc) = hooke_pair(&z[i], &z[i + 1], cfg.stiffness[i], cfg.rest_lengths[i], guards)
            .map_err(|e| relabel(e, i, i))?;
        out.densities[i] += fp;
        out.densities[i + 1] += fc;
    }
    Ok(out)
}

/// Rotation triples only; linear in `v`.
pub fn assemble_rotation(z: &[Vec3], v: &[f64], cfg: &SwimmerConfig, guards: &Guards) -> Result<BodyForceSet, ForceError> {
    let mut out = BodyForceSet::zeros(cfg.n());
    for j in 0..cfg.n().saturating_sub(2) {
        let (fp, fn_, fc) =
            rotation_triple(&z[j], &z[j + 1], &z[j + 2], v[j], cfg.fold_sign(j), cfg.direction_rule, guards)
                .map_err(|e| relabel(e, j, j))?;
        out.densities[j] += fp;
        out.densities[j + 1] += fc;
        out.densities[j + 2] += fn_;
    }
    Ok(out)
}

/// Shifts the local indices of a single-term error to swimmer indices.
fn relabel(e: ForceError, first_link: usize, joint: usize) -> ForceError {
    match e {
        ForceError::DegenerateConfiguration { link, length } => {
            ForceError::DegenerateConfiguration { link: first_link + link, length }
        }
        ForceError::CollinearJoint { sine, .. } => ForceError::CollinearJoint { joint, sine },
    }
}

/// Full force term at configuration `z` and controls `v`.
pub fn assemble_body_forces(
    z: &[Vec3],
    v: &[f64],
    cfg: &SwimmerConfig,
    guards: &Guards,
) -> Result<BodyForceSet, ForceError> {
    check_shape(z, v, cfg);
    let mut out = assemble_elastic(z, cfg, guards)?;
    out.add(&assemble_rotation(z, v, cfg, guards)?);
    Ok(out)
}

/// Samples each body's indicator at cell centres and deposits its density.
pub fn spread_to_grid(
    forces: &BodyForceSet,
    z: &[Vec3],
    cfg: &SwimmerConfig,
    grid: &GridSpec,
) -> Result<ForceDensityField, FluidError> {
    let mut field = ForceDensityField::zeros(grid);
    for (i, (shape, zi)) in cfg.shapes.iter().zip(z).enumerate() {
        let cells = grid.covered_cells(shape, zi, i)?;
        let d = forces.densities[i];
        if d == Vec3::zeros() {
            continue;
        }
        for idx in cells {
            field.add_at(idx, &d);
        }
    }
    Ok(field)
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;

    fn g() -> Guards {
        Guards::default()
    }

    fn cfg3(l: f64) -> SwimmerConfig {
        SwimmerConfig {
            shapes: vec![BodyShape::ball(0.1).unwrap(); 3],
            stiffness: vec![1.0, 1.0],
            rest_lengths: vec![l, l],
            radius: 0.1,
            fold_signs: vec![],
            direction_rule: DirectionRule::CrossProduct,
        }
    }

    #[test]
    fn hooke_examples() {
        let o = Vec3::zeros();
        let (a, b) = hooke_pair(&o, &Vec3::new(2.0, 0.0, 0.0), 1.0, 1.0, &g()).unwrap();
        assert_eq!(a, Vec3::new(1.0, 0.0, 0.0));
        assert_eq!(b, Vec3::new(-1.0, 0.0, 0.0));
        let (a, b) = hooke_pair(&o, &Vec3::new(0.5, 0.0, 0.0), 2.0, 1.0, &g()).unwrap();
        assert_eq!(a, Vec3::new(-1.0, 0.0, 0.0));
        assert_eq!(b, Vec3::new(1.0, 0.0, 0.0));
        let (a, b) = hooke_pair(&o, &Vec3::new(0.0, 0.6, 0.8), 3.0, 1.0, &g()).unwrap();
        assert_eq!(a, Vec3::zeros());
        assert_eq!(b, Vec3::zeros());
        assert!(matches!(hooke_pair(&o, &o, 1.0, 1.0, &g()), Err(ForceError::DegenerateConfiguration { .. })));
    }

    #[test]
    fn direction_examples() {
        let o = Vec3::zeros();
        let r = rotation_directions(
            &Vec3::new(-1.0, 0.0, 0.0),
            &o,
            &Vec3::new(1.0, 0.0, 0.0),
            FoldSign::Fold,
            DirectionRule::CrossProduct,
            &g(),
        );
        assert!(matches!(r, Err(ForceError::CollinearJoint { .. })));
        for rule in [DirectionRule::CrossProduct, DirectionRule::GramSchmidt] {
            let (a, b) =
                rotation_directions(&Vec3::new(-1.0, 0.0, 0.0), &o, &Vec3::new(0.0, 1.0, 0.0), FoldSign::Fold, rule, &g())
                    .unwrap();
            assert!((a - Vec3::new(0.0, 1.0, 0.0)).norm() < 1e-15);
            assert!((b - Vec3::new(1.0, 0.0, 0.0)).norm() < 1e-15);
        }
    }

    #[test]
    fn triple_examples() {
        let o = Vec3::zeros();
        let s = std::f64::consts::FRAC_1_SQRT_2;
        let zp = Vec3::new(-s, s, 0.0);
        let zn = Vec3::new(s, s, 0.0);
        let (fp, fnx, fc) = rotation_triple(&zp, &o, &zn, 1.0, FoldSign::Fold, DirectionRule::CrossProduct, &g()).unwrap();
        assert_relative_eq!(fp.norm(), fnx.norm(), epsilon = 1e-15);
        assert!((zp.cross(&fp) + zn.cross(&fnx)).norm() < 1e-14);
        assert!((fp + fnx + fc).norm() < 1e-15);

        let zp = Vec3::new(-2.0, 0.0, 0.0);
        let zn = Vec3::new(0.0, 1.0, 0.0);
        let (fp, fnx, _) = rotation_triple(&zp, &o, &zn, 1.0, FoldSign::Fold, DirectionRule::CrossProduct, &g()).unwrap();
        assert_relative_eq!(fp.norm(), 2.0, epsilon = 1e-15);
        assert_relative_eq!(fnx.norm(), 4.0, epsilon = 1e-15);
        assert_relative_eq!(zp.cross(&fp).norm(), 4.0, epsilon = 1e-14);
        assert_relative_eq!(zn.cross(&fnx).norm(), 4.0, epsilon = 1e-14);

        let (fp, fnx, fc) = rotation_triple(&zp, &o, &zn, 0.0, FoldSign::Unfold, DirectionRule::GramSchmidt, &g()).unwrap();
        assert_eq!(fp.norm() + fnx.norm() + fc.norm(), 0.0);
    }

    #[test]
    fn folding_closes_the_joint_angle() {
        let zp = Vec3::new(-1.0, 0.2, 0.0);
        let zc = Vec3::zeros();
        let zn = Vec3::new(0.3, 1.0, 0.1);
        let angle = |p: &Vec3, q: &Vec3| p.angle(q);
        for (sign, closes) in [(FoldSign::Fold, true), (FoldSign::Unfold, false)] {
            let (fp, fnx, fc) = rotation_triple(&zp, &zc, &zn, 1.0, sign, DirectionRule::CrossProduct, &g()).unwrap();
            let eps = 1e-4;
            let after = angle(&(zp + fp * eps - zc - fc * eps), &(zn + fnx * eps - zc - fc * eps));
            assert_eq!(after < angle(&(zp - zc), &(zn - zc)), closes);
        }
    }

    #[test]
    fn assembly_term_by_term() {
        let cfg = cfg3(0.5);
        let z = [Vec3::new(0.0, 0.0, 0.0), Vec3::new(0.7, 0.0, 0.0), Vec3::new(0.7, 0.5, 0.0)];
        let f = assemble_body_forces(&z, &[0.0], &cfg, &g()).unwrap();
        let (a, b) = hooke_pair(&z[0], &z[1], 1.0, 0.5, &g()).unwrap();
        assert_eq!(f.densities[0], a);
        assert_eq!(f.densities[1], b);
        assert_eq!(f.densities[2], Vec3::zeros());

        let rest = [Vec3::zeros(), Vec3::new(0.5, 0.0, 0.0), Vec3::new(0.5, 0.5, 0.0)];
        let f = assemble_body_forces(&rest, &[0.0], &cfg, &g()).unwrap();
        assert!(f.densities.iter().all(|d| *d == Vec3::zeros()));
    }

    #[test]
    fn errors_carry_indices() {
        let mut cfg = cfg3(0.5);
        cfg.shapes.push(BodyShape::ball(0.1).unwrap());
        cfg.stiffness.push(1.0);
        cfg.rest_lengths.push(0.5);
        let z = [Vec3::zeros(), Vec3::new(0.5, 0.0, 0.0), Vec3::new(0.5, 0.5, 0.0), Vec3::new(0.5, 1.0, 0.0)];
        let e = assemble_body_forces(&z, &[1.0, 1.0], &cfg, &g()).unwrap_err();
        assert!(matches!(e, ForceError::CollinearJoint { joint: 1, .. }), "{e:?}");
        let z = [Vec3::zeros(), Vec3::new(0.5, 0.0, 0.0), Vec3::new(0.5, 0.0, 0.0), Vec3::new(0.5, 1.0, 0.0)];
        let e = assemble_body_forces(&z, &[0.0, 0.0], &cfg, &g()).unwrap_err();
        assert!(matches!(e, ForceError::DegenerateConfiguration { link: 1, .. }), "{e:?}");
    }

    #[test]
    fn config_validation_lists_everything() {
        let mut cfg = cfg3(0.2);
        cfg.stiffness[1] = -1.0;
        cfg.shapes.truncate(2);
        let errs = cfg.validate();
        assert!(errs.iter().any(|e| e.contains("n > 2")));
        assert!(errs.iter().any(|e| e.contains("l > 2r")));
        assert!(errs.iter().any(|e| e.contains("k[1]")));
        assert!(cfg3(0.25).validate().is_empty());
    }

    #[test]
    fn fold_sign_serde() {
        let s: Vec<FoldSign> = serde_json::from_str("[1,-1]").unwrap();
        assert_eq!(s, vec![FoldSign::Fold, FoldSign::Unfold]);
        assert!(serde_json::from_str::<FoldSign>("0").is_err());
        assert_eq!(serde_json::to_string(&s).unwrap(), "[1,-1]");
    }

    #[test]
    fn spreading_integral_and_supports() {
        let grid = GridSpec::cube(1.0, 32).unwrap();
        let mut cfg = cfg3(0.25);
        cfg.shapes[0] = BodyShape::ball(0.1).unwrap();
        let z = [Vec3::new(0.3, 0.5, 0.5), Vec3::new(0.55, 0.5, 0.5), Vec3::new(0.8, 0.5, 0.5)];
        let mut f = BodyForceSet::zeros(3);
        assert!(spread_to_grid(&f, &z, &cfg, &grid).unwrap().is_zero());
        f.densities[0] = Vec3::new(1.0, 0.0, 0.0);
        f.densities[2] = Vec3::new(0.0, 1.0, 0.0);
        let field = spread_to_grid(&f, &z, &cfg, &grid).unwrap();
        let integral = field.integral(&grid);
        let m = measure(&cfg.shapes[0]);
        assert!((integral.x - m).abs() < 0.1 * m, "{integral:?} vs {m}");
        let overlap = field.c[0].iter().zip(field.c[1].iter()).filter(|(a, b)| **a != 0.0 && **b != 0.0).count();
        assert_eq!(overlap, 0);
    }
}
