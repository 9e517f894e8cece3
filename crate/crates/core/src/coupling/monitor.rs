//! Runtime admissibility checks: no collisions, bodies strictly inside the
//! box with a margin, no straightened joints, no collapsed links.

use serde::{Deserialize, Serialize};

use crate::forces::{joint_sine, ForceError, Guards, SwimmerConfig};
use crate::geometry::{Domain, Vec3};

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct MonitorParams {
    /// Pairwise centre distance at or below which bodies collide.
    pub collision_threshold: f64,
    /// Minimum clearance between a closed body and the walls.
    pub boundary_margin: f64,
    pub eps_col: f64,
    pub eps_deg: f64,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind")]
pub enum Violation {
    Collision { i: usize, j: usize, distance: f64, threshold: f64 },
    BoundaryContact { body: usize, clearance: f64, margin: f64 },
    CollinearJoint { joint: usize, sine: f64, threshold: f64 },
    Degenerate { link: usize, length: f64, threshold: f64 },
}

impl std::fmt::Display for Violation {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        match self {
            Violation::Collision { i, j, distance, threshold } => {
                write!(f, "Collision: bodies {i} and {j} at distance {distance:e} <= {threshold:e}")
            }
            Violation::BoundaryContact { body, clearance, margin } => {
                write!(f, "BoundaryContact: body {body} clearance {clearance:e} <= margin {margin:e}")
            }
            Violation::CollinearJoint { joint, sine, threshold } => {
                write!(f, "CollinearJoint: joint {joint} sine {sine:e} <= {threshold:e}")
            }
            Violation::Degenerate { link, length, threshold } => {
                write!(f, "Degenerate: link {link} length {length:e} < {threshold:e}")
            }
        }
    }
}

impl Violation {
    pub fn kind(&self) -> &'static str {
        match self {
            Violation::Collision { .. } => "Collision",
            Violation::BoundaryContact { .. } => "BoundaryContact",
            Violation::CollinearJoint { .. } => "CollinearJoint",
            Violation::Degenerate { .. } => "Degenerate",
        }
    }

    /// The monitor counterpart of a force-assembly guard failure.
    pub fn from_force_error(e: ForceError, guards: &Guards) -> Self {
        match e {
            ForceError::DegenerateConfiguration { link, length } => {
                Violation::Degenerate { link, length, threshold: guards.eps_deg }
            }
            ForceError::CollinearJoint { joint, sine } => {
                Violation::CollinearJoint { joint, sine, threshold: guards.eps_col }
            }
        }
    }
}

/// Extremes of every monitored quantity for one configuration.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct MonitorMeasures {
    pub min_distance: f64,
    pub closest_pair: (usize, usize),
    pub min_clearance: f64,
    pub tightest_body: usize,
    /// Smallest joint sine; `+inf` without interior joints.
    pub min_joint_sine: f64,
    pub straightest_joint: usize,
    pub min_link_length: f64,
    pub shortest_link: usize,
}

pub fn measure(z: &[Vec3], cfg: &SwimmerConfig, domain: &Domain) -> MonitorMeasures {
    let n = z.len();
    let mut m = MonitorMeasures {
        min_distance: f64::INFINITY,
        closest_pair: (0, 0),
        min_clearance: f64::INFINITY,
        tightest_body: 0,
        min_joint_sine: f64::INFINITY,
        straightest_joint: 0,
        min_link_length: f64::INFINITY,
        shortest_link: 0,
    };
    for i in 0..n {
        for j in i + 1..n {
            let d = (z[i] - z[j]).norm();
            if d < m.min_distance {
                m.min_distance = d;
                m.closest_pair = (i, j);
            }
        }
        let c = domain.clearance(&cfg.shapes[i], &z[i]);
        if c < m.min_clearance {
            m.min_clearance = c;
            m.tightest_body = i;
        }
    }
    for i in 0..n.saturating_sub(1) {
        let l = (z[i + 1] - z[i]).norm();
        if l < m.min_link_length {
            m.min_link_length = l;
            m.shortest_link = i;
        }
    }
    for j in 0..n.saturating_sub(2) {
        let s = joint_sine(&z[j], &z[j + 1], &z[j + 2]);
        if s < m.min_joint_sine {
            m.min_joint_sine = s;
            m.straightest_joint = j;
        }
    }
    m
}

impl MonitorParams {
    /// First failed check, in the order collision, boundary, joint, link.
    pub fn check(&self, m: &MonitorMeasures) -> Result<(), Violation> {
        if !(m.min_distance > self.collision_threshold) {
            return Err(Violation::Collision {
                i: m.closest_pair.0,
                j: m.closest_pair.1,
                distance: m.min_distance,
                threshold: self.collision_threshold,
            });
        }
        if !(m.min_clearance > self.boundary_margin) {
            return Err(Violation::BoundaryContact {
                body: m.tightest_body,
                clearance: m.min_clearance,
                margin: self.boundary_margin,
            });
        }
        if !(m.min_joint_sine > self.eps_col) {
            return Err(Violation::CollinearJoint {
                joint: m.straightest_joint,
                sine: m.min_joint_sine,
                threshold: self.eps_col,
            });
        }
        if !(m.min_link_length > self.eps_deg) {
            return Err(Violation::Degenerate {
                link: m.shortest_link,
                length: m.min_link_length,
                threshold: self.eps_deg,
            });
        }
        Ok(())
    }
}

/// Measures `z` and applies every check.
pub fn monitor_wellposedness(
    z: &[Vec3],
    cfg: &SwimmerConfig,
    domain: &Domain,
    params: &MonitorParams,
) -> Result<MonitorMeasures, Violation> {
    let m = measure(z, cfg, domain);
    params.check(&m).map(|_| m)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::forces::DirectionRule;
    use crate::geometry::BodyShape;

    fn setup() -> (SwimmerConfig, Domain, MonitorParams) {
        let cfg = SwimmerConfig {
            shapes: vec![BodyShape::ball(0.1).unwrap(); 3],
            stiffness: vec![1.0; 2],
            rest_lengths: vec![0.25; 2],
            radius: 0.1,
            fold_signs: vec![],
            direction_rule: DirectionRule::CrossProduct,
        };
        let p = MonitorParams { collision_threshold: 0.2, boundary_margin: 0.05, eps_col: 1e-9, eps_deg: 1e-9 };
        (cfg, Domain::new(Vec3::repeat(1.0)), p)
    }

    #[test]
    fn admissible_configuration_passes() {
        let (cfg, d, p) = setup();
        let z = [Vec3::new(0.3, 0.5, 0.5), Vec3::new(0.55, 0.5, 0.5), Vec3::new(0.6, 0.75, 0.5)];
        let m = monitor_wellposedness(&z, &cfg, &d, &p).unwrap();
        assert!((m.min_link_length - 0.25).abs() < 1e-15);
    }

    #[test]
    fn collision_just_inside_threshold() {
        let (cfg, d, p) = setup();
        let z = [
            Vec3::new(0.3, 0.5, 0.5),
            Vec3::new(0.5 - 1e-6, 0.5, 0.5),
            Vec3::new(0.5, 0.75, 0.5),
        ];
        match monitor_wellposedness(&z, &cfg, &d, &p) {
            Err(Violation::Collision { i: 0, j: 1, .. }) => {}
            other => panic!("{other:?}"),
        }
    }

    #[test]
    fn collinear_and_boundary() {
        let (cfg, d, p) = setup();
        let z = [Vec3::new(0.25, 0.5, 0.5), Vec3::new(0.5, 0.5, 0.5), Vec3::new(0.75, 0.5, 0.5)];
        assert!(matches!(monitor_wellposedness(&z, &cfg, &d, &p), Err(Violation::CollinearJoint { joint: 0, .. })));
        let z = [Vec3::new(0.12, 0.5, 0.5), Vec3::new(0.4, 0.5, 0.5), Vec3::new(0.4, 0.75, 0.5)];
        assert!(matches!(monitor_wellposedness(&z, &cfg, &d, &p), Err(Violation::BoundaryContact { body: 0, .. })));
    }
}
