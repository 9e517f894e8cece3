//! CSV output with fixed 17-significant-digit formatting, so identical runs
//! give identical bytes.

use std::io::{self, Write};

use super::{DiagnosticsRecord, SwimmerState};

pub fn fmt_f64(v: f64) -> String {
    format!("{v:.16e}")
}

pub fn write_trajectory<W: Write>(out: &mut W, states: &[SwimmerState]) -> io::Result<()> {
    let n = states.first().map_or(0, |s| s.z.len());
    let mut header = vec!["t".to_string()];
    for i in 1..=n {
        for c in ["x", "y", "z"] {
            header.push(format!("z{i}{c}"));
        }
    }
    writeln!(out, "{}", header.join(","))?;
    for s in states {
        let mut row = vec![fmt_f64(s.t)];
        for z in &s.z {
            row.extend(z.iter().map(|v| fmt_f64(*v)));
        }
        writeln!(out, "{}", row.join(","))?;
    }
    Ok(())
}

pub const DIAGNOSTICS_HEADER: &str = "step,t,net_force,net_force_rel,net_torque,net_torque_rel,grid_force,\
kinetic,dissipation,power_in,energy_defect,divergence,min_distance,min_boundary_margin,min_joint_sine,\
min_link_length,picard_residual,monitor_ok";

pub fn write_diagnostics<W: Write>(out: &mut W, rows: &[DiagnosticsRecord]) -> io::Result<()> {
    writeln!(out, "{DIAGNOSTICS_HEADER}")?;
    for r in rows {
        let vals = [
            r.t,
            r.net_force,
            r.net_force_rel,
            r.net_torque,
            r.net_torque_rel,
            r.grid_force,
            r.kinetic,
            r.dissipation,
            r.power_in,
            r.energy_defect,
            r.divergence,
            r.min_distance,
            r.min_boundary_margin,
            r.min_joint_sine,
            r.min_link_length,
            r.picard_residual,
        ];
        let body: Vec<String> = vals.iter().map(|v| fmt_f64(*v)).collect();
        writeln!(out, "{},{},{}", r.step, body.join(","), r.monitor_ok as u8)?;
    }
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::geometry::Vec3;

    #[test]
    fn trajectory_layout() {
        let s = vec![SwimmerState { z: vec![Vec3::new(0.1, 0.2, 0.3); 3], t: 0.0 }];
        let mut buf = Vec::new();
        write_trajectory(&mut buf, &s).unwrap();
        let text = String::from_utf8(buf).unwrap();
        let mut lines = text.lines();
        assert_eq!(lines.next().unwrap(), "t,z1x,z1y,z1z,z2x,z2y,z2z,z3x,z3y,z3z");
        let row: Vec<&str> = lines.next().unwrap().split(',').collect();
        assert_eq!(row.len(), 10);
        assert_eq!(row[1], "1.0000000000000001e-1");
        assert_eq!(row[1].parse::<f64>().unwrap(), 0.1);
    }
}
