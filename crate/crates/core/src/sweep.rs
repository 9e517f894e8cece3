//! Parameter sweeps: the cartesian product of value lists, each addressed by
//! a JSON pointer into the scenario document. Cells run on a rayon pool whose
//! size comes from `SWIMLAB_THREADS` (default: all cores); a failing or
//! panicking cell becomes a row with its status instead of aborting the sweep.

use std::io::{self, Write};
use std::panic::{catch_unwind, AssertUnwindSafe};

use rayon::prelude::*;
use serde::Serialize;
use serde_json::Value;

use crate::config::{parse_config_value, ConfigError, Mode, SweepSettings};
use crate::coupling::output::fmt_f64;
use crate::coupling::run::{run_picard, run_scenario};
use crate::geometry::Vec3;

pub const THREADS_ENV: &str = "SWIMLAB_THREADS";

pub fn thread_count() -> usize {
    std::env::var(THREADS_ENV)
        .ok()
        .and_then(|s| s.trim().parse::<usize>().ok())
        .filter(|&n| n > 0)
        .unwrap_or_else(|| std::thread::available_parallelism().map_or(1, |n| n.get()))
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct SweepRow {
    pub cell: usize,
    pub values: Vec<Value>,
    /// `ok`, `violation`, `error` or `panic`.
    pub status: String,
    pub steps: usize,
    pub t_final: f64,
    /// Distance moved by the centroid of the centres.
    pub centroid_displacement: f64,
    pub max_kinetic: f64,
    pub max_energy_defect: f64,
    pub max_divergence: f64,
    pub min_distance: f64,
    pub violation_kind: String,
    pub violation_step: Option<usize>,
    pub message: String,
}

impl SweepRow {
    fn failed(cell: usize, values: Vec<Value>, status: &str, message: String) -> Self {
        SweepRow {
            cell,
            values,
            status: status.into(),
            steps: 0,
            t_final: f64::NAN,
            centroid_displacement: f64::NAN,
            max_kinetic: f64::NAN,
            max_energy_defect: f64::NAN,
            max_divergence: f64::NAN,
            min_distance: f64::NAN,
            violation_kind: String::new(),
            violation_step: None,
            message,
        }
    }
}

/// All cells in row-major order (the first parameter varies slowest), each
/// as its assignment list and the edited document without the sweep section.
pub fn expand(doc: &Value, sweep: &SweepSettings) -> Result<Vec<(Vec<Value>, Value)>, ConfigError> {
    let mut errors = Vec::new();
    for p in &sweep.parameters {
        match doc.pointer(&p.path) {
            None => errors.push(format!("sweep path {} does not exist in the scenario", p.path)),
            Some(v) if v.is_array() || v.is_object() => {
                errors.push(format!("sweep path {} does not address a scalar", p.path))
            }
            Some(_) => {}
        }
        if p.values.iter().any(|v| v.is_array() || v.is_object()) {
            errors.push(format!("sweep path {} has non-scalar values", p.path));
        }
    }
    if !errors.is_empty() {
        return Err(ConfigError { errors });
    }
    let mut base = doc.clone();
    if let Some(obj) = base.as_object_mut() {
        obj.remove("sweep");
    }
    let mut cells = vec![(Vec::new(), base)];
    for p in &sweep.parameters {
        let mut next = Vec::with_capacity(cells.len() * p.values.len());
        for (assign, d) in &cells {
            for v in &p.values {
                let mut d = d.clone();
                *d.pointer_mut(&p.path).expect("path checked above") = v.clone();
                let mut a = assign.clone();
                a.push(v.clone());
                next.push((a, d));
            }
        }
        cells = next;
    }
    Ok(cells)
}

fn centroid(z: &[Vec3]) -> Vec3 {
    z.iter().sum::<Vec3>() / z.len() as f64
}

fn run_cell(cell: usize, values: Vec<Value>, doc: Value) -> SweepRow {
    let cfg = match parse_config_value(doc) {
        Ok(c) => c,
        Err(e) => return SweepRow::failed(cell, values, "error", e.errors.join("; ")),
    };
    match cfg.mode {
        Mode::March => match run_scenario(&cfg, None) {
            Ok(run) => {
                let d = &run.diagnostics;
                let fold = |f: &dyn Fn(&crate::coupling::DiagnosticsRecord) -> f64, min: bool| {
                    let vals = d.iter().filter(|r| r.monitor_ok).map(f);
                    if min {
                        vals.fold(f64::INFINITY, f64::min)
                    } else {
                        vals.fold(0.0, f64::max)
                    }
                };
                let first = &run.trajectory[0];
                let last = run.trajectory.last().expect("trajectory holds the initial state");
                let (status, kind, step, message) = match &run.violation {
                    Some(v) => ("violation", v.violation.kind().to_string(), Some(v.step), v.to_string()),
                    None => ("ok", String::new(), None, String::new()),
                };
                SweepRow {
                    cell,
                    values,
                    status: status.into(),
                    steps: run.trajectory.len() - 1,
                    t_final: last.t,
                    centroid_displacement: (centroid(&last.z) - centroid(&first.z)).norm(),
                    max_kinetic: fold(&|r| r.kinetic, false),
                    max_energy_defect: fold(&|r| r.energy_defect, false),
                    max_divergence: fold(&|r| r.divergence, false),
                    min_distance: d.iter().map(|r| r.min_distance).fold(f64::INFINITY, f64::min),
                    violation_kind: kind,
                    violation_step: step,
                    message,
                }
            }
            Err(e) => SweepRow::failed(cell, values, "error", e.to_string()),
        },
        Mode::Picard => match run_picard(&cfg) {
            Ok(out) => {
                let first = &out.trajectory[0];
                let last = out.trajectory.last().expect("trajectory holds the initial state");
                SweepRow {
                    steps: out.trajectory.len() - 1,
                    t_final: last.t,
                    centroid_displacement: (centroid(&last.z) - centroid(&first.z)).norm(),
                    message: format!("converged after {} iterations", out.iterations()),
                    ..SweepRow::failed(cell, values, "ok", String::new())
                }
            }
            Err(e) => SweepRow::failed(cell, values, "error", e.to_string()),
        },
        other => SweepRow::failed(cell, values, "error", format!("sweeps support march and picard, not {other:?}")),
    }
}

/// Runs every cell; rows come back in cell order whatever the scheduling.
pub fn run_sweep(doc: &Value) -> Result<Vec<SweepRow>, ConfigError> {
    let sweep: SweepSettings = match doc.get("sweep") {
        Some(s) => serde_json::from_value(s.clone()).map_err(|e| ConfigError::single(format!("sweep: {e}")))?,
        None => return Err(ConfigError::single("config has no sweep section")),
    };
    let cells = expand(doc, &sweep)?;
    let pool = rayon::ThreadPoolBuilder::new()
        .num_threads(thread_count())
        .build()
        .map_err(|e| ConfigError::single(format!("thread pool: {e}")))?;
    Ok(pool.install(|| {
        cells
            .into_par_iter()
            .enumerate()
            .map(|(i, (values, d))| {
                let v2 = values.clone();
                catch_unwind(AssertUnwindSafe(|| run_cell(i, values, d))).unwrap_or_else(|p| {
                    let msg = p
                        .downcast_ref::<&str>()
                        .map(|s| s.to_string())
                        .or_else(|| p.downcast_ref::<String>().cloned())
                        .unwrap_or_else(|| "panic".into());
                    SweepRow::failed(i, v2, "panic", msg)
                })
            })
            .collect()
    }))
}

fn csv_field(s: &str) -> String {
    if s.contains([',', '"', '\n']) {
        format!("\"{}\"", s.replace('"', "\"\""))
    } else {
        s.to_string()
    }
}

fn scalar(v: &Value) -> String {
    match v {
        Value::String(s) => s.clone(),
        Value::Number(n) => match n.as_f64() {
            Some(f) if !n.is_i64() && !n.is_u64() => fmt_f64(f),
            _ => n.to_string(),
        },
        other => other.to_string(),
    }
}

pub fn write_rows<W: Write>(out: &mut W, paths: &[String], rows: &[SweepRow]) -> io::Result<()> {
    let mut header = vec!["cell".to_string()];
    header.extend(paths.iter().map(|p| csv_field(p)));
    header.extend(
        [
            "status",
            "steps",
            "t_final",
            "centroid_displacement",
            "max_kinetic",
            "max_energy_defect",
            "max_divergence",
            "min_distance",
            "violation_kind",
            "violation_step",
            "message",
        ]
        .map(String::from),
    );
    writeln!(out, "{}", header.join(","))?;
    for r in rows {
        let mut f = vec![r.cell.to_string()];
        f.extend(r.values.iter().map(|v| csv_field(&scalar(v))));
        f.push(r.status.clone());
        f.push(r.steps.to_string());
        for v in [
            r.t_final,
            r.centroid_displacement,
            r.max_kinetic,
            r.max_energy_defect,
            r.max_divergence,
            r.min_distance,
        ] {
            f.push(fmt_f64(v));
        }
        f.push(r.violation_kind.clone());
        f.push(r.violation_step.map_or(String::new(), |s| s.to_string()));
        f.push(csv_field(&r.message));
        writeln!(out, "{}", f.join(","))?;
    }
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;
    use serde_json::json;

    #[test]
    fn expansion_is_row_major() {
        let doc = json!({"a": 1, "b": {"c": [0, 5]}});
        let s: SweepSettings = serde_json::from_value(json!({
            "parameters": [{"path": "/a", "values": [1, 2]}, {"path": "/b/c/1", "values": [7, 8, 9]}]
        }))
        .unwrap();
        let cells = expand(&doc, &s).unwrap();
        assert_eq!(cells.len(), 6);
        assert_eq!(cells[1].0, vec![json!(1), json!(8)]);
        assert_eq!(cells[3].1["a"], json!(2));
        assert_eq!(cells[5].1["b"]["c"], json!([0, 9]));
    }

    #[test]
    fn bad_paths_are_reported() {
        let doc = json!({"a": 1, "b": [1, 2]});
        let s: SweepSettings = serde_json::from_value(json!({
            "parameters": [{"path": "/x", "values": [1]}, {"path": "/b", "values": [1]}]
        }))
        .unwrap();
        assert_eq!(expand(&doc, &s).unwrap_err().errors.len(), 2);
    }

    #[test]
    fn csv_quoting() {
        assert_eq!(csv_field("a,b"), "\"a,b\"");
        assert_eq!(scalar(&json!(2)), "2");
        assert_eq!(scalar(&json!(0.5)), "5.0000000000000000e-1");
    }
}
