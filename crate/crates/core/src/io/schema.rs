//! Column layouts and encoders for every file a run writes.
//!
//! Numbers in CSV files carry 17 significant digits. JSON numbers use the shortest
//! representation that reads back to the same `f64`.

use serde::Serialize;

use crate::actuation::{PowerTrace, SURFACES, SURFACE_NAMES};
use crate::error::{Error, Result};
use crate::flightdyn::{ControlVector, Trajectory, CHANNELS, CHANNEL_NAMES};
use crate::ocp::{ControlSchedule, OptResult};
use crate::ocp::sqp::IterationRecord;
use crate::trim::EnvelopeTable;

/// Version stamped into summaries and the manifest.
pub const ARTIFACT_SCHEMA_VERSION: u32 = 1;

pub const STATE_COLUMNS: [&str; 13] = ["t", "x", "y", "z", "phi", "theta", "psi", "u", "v", "w", "p", "q", "r"];
pub const HISTORY_COLUMNS: [&str; 6] = ["iteration", "objective", "violation", "merit", "radius", "evaluations"];
pub const LOAD_COLUMNS: [&str; 6] = ["t", "panel_id", "fx", "fy", "fz", "gamma"];
pub const ENVELOPE_COLUMNS: [&str; 12] = [
    "variant",
    "speed",
    "trimmed",
    "w_ok",
    "q_ok",
    "residual_w",
    "residual_q_deg",
    "alpha",
    "elevator",
    "winglet",
    "thrust",
    "cost",
];
pub const SWEEP_COLUMNS: [&str; 4] = ["points", "objective", "feasible", "iterations"];

pub fn num(v: f64) -> String {
    format!("{v:.16e}")
}

/// t, rigid state, controls, hinge moments, power, cumulative work per surface, total work.
pub fn trajectory_columns() -> Vec<String> {
    let mut h: Vec<String> = STATE_COLUMNS.iter().map(|s| s.to_string()).collect();
    h.extend(CHANNEL_NAMES.iter().map(|c| format!("control_{c}")));
    h.extend(SURFACE_NAMES.iter().map(|s| format!("hinge_{s}")));
    h.extend(SURFACE_NAMES.iter().map(|s| format!("power_{s}")));
    h.extend(SURFACE_NAMES.iter().map(|s| format!("work_{s}")));
    h.push("work_total".into());
    h
}

pub fn schedule_columns() -> Vec<String> {
    std::iter::once("t".to_string()).chain(CHANNEL_NAMES.iter().map(|c| c.to_string())).collect()
}

fn csv_error(e: impl std::fmt::Display) -> Error {
    Error::Serialize(e.to_string())
}

fn table<S: AsRef<str>>(header: &[S], rows: impl IntoIterator<Item = Vec<String>>) -> Result<Vec<u8>> {
    let mut w = csv::Writer::from_writer(Vec::new());
    w.write_record(header.iter().map(|s| s.as_ref())).map_err(csv_error)?;
    for r in rows {
        w.write_record(&r).map_err(csv_error)?;
    }
    w.into_inner().map_err(csv_error)
}

pub fn trajectory_csv(traj: &Trajectory, power: &PowerTrace) -> Result<Vec<u8>> {
    if power.times.len() != traj.samples.len() {
        return Err(Error::InvalidArgument("power trace does not match the trajectory".into()));
    }
    let rows = traj.samples.iter().enumerate().map(|(k, s)| {
        let r = &s.rigid;
        let mut row = vec![s.t];
        row.extend(r.position.iter().chain(r.euler.iter()).chain(r.velocity.iter()).chain(r.omega.iter()));
        row.extend(s.controls.0);
        row.extend(s.hinge_moments);
        row.extend(power.power[k]);
        row.extend(power.work[k]);
        row.push(power.work[k].iter().sum());
        row.into_iter().map(num).collect()
    });
    table(&trajectory_columns(), rows)
}

/// Absolute controls at each schedule point.
pub fn schedule_csv(s: &ControlSchedule) -> Result<Vec<u8>> {
    let rows = (0..s.len()).map(|k| std::iter::once(s.time(k)).chain(s.point(k).0).map(num).collect());
    table(&schedule_columns(), rows)
}

/// Read a schedule file back as offsets from `reference`.
pub fn parse_schedule_csv(text: &str, reference: ControlVector) -> Result<ControlSchedule> {
    let mut r = csv::Reader::from_reader(text.as_bytes());
    let header: Vec<String> = r.headers().map_err(csv_error)?.iter().map(str::to_string).collect();
    if header != schedule_columns() {
        return Err(Error::Parse(format!("schedule header {header:?} does not match {:?}", schedule_columns())));
    }
    let mut times = Vec::new();
    let mut points = Vec::new();
    for rec in r.records() {
        let rec = rec.map_err(csv_error)?;
        let v: Vec<f64> = rec
            .iter()
            .map(|f| f.trim().parse::<f64>().map_err(|e| Error::Parse(format!("schedule value `{f}`: {e}"))))
            .collect::<Result<_>>()?;
        times.push(v[0]);
        points.push(std::array::from_fn::<f64, CHANNELS, _>(|i| v[i + 1] - reference.0[i]));
    }
    let horizon = *times.last().ok_or_else(|| Error::Parse("schedule has no rows".into()))?;
    let mut s = ControlSchedule::hold(reference, horizon, points.len())?;
    for (k, t) in times.iter().enumerate() {
        if (t - s.time(k)).abs() > 1e-9 * horizon.max(1.0) {
            return Err(Error::Parse(format!("schedule row {k} at t = {t} is off the uniform grid")));
        }
    }
    s.points = points;
    Ok(s)
}

pub fn history_csv(history: &[IterationRecord]) -> Result<Vec<u8>> {
    let rows = history.iter().map(|h| {
        vec![
            h.iteration.to_string(),
            num(h.objective),
            num(h.violation),
            num(h.merit),
            num(h.radius),
            h.evaluations.to_string(),
        ]
    });
    table(&HISTORY_COLUMNS, rows)
}

pub fn loads_csv(traj: &Trajectory) -> Result<Vec<u8>> {
    let rows = traj.load_dump.iter().flat_map(|f| {
        f.forces.iter().zip(&f.gamma).enumerate().map(move |(i, (force, g))| {
            vec![num(f.t), i.to_string(), num(force.x), num(force.y), num(force.z), num(*g)]
        })
    });
    table(&LOAD_COLUMNS, rows)
}

pub fn envelope_csv(tables: &[&EnvelopeTable]) -> Result<Vec<u8>> {
    let rows = tables.iter().flat_map(|t| {
        let variant = if t.morphing { "morphing" } else { "fixed" };
        t.entries.iter().map(move |e| {
            let s = e.solution;
            let f = |g: fn(&crate::trim::TrimSolution) -> f64| s.as_ref().map_or("NaN".to_string(), |s| num(g(s)));
            vec![
                variant.to_string(),
                num(e.speed),
                e.trimmed.to_string(),
                e.w_ok.to_string(),
                e.q_ok.to_string(),
                f(|s| s.residual_w),
                f(|s| s.residual_q_deg),
                f(|s| s.alpha),
                f(|s| s.elevator()),
                f(|s| s.morph()),
                f(|s| s.thrust()),
                f(|s| s.cost),
            ]
        })
    });
    table(&ENVELOPE_COLUMNS, rows)
}

pub fn sweep_csv(entries: &[crate::ocp::SweepEntry]) -> Result<Vec<u8>> {
    let rows = entries
        .iter()
        .map(|e| vec![e.points.to_string(), num(e.objective), e.feasible.to_string(), e.iterations.to_string()]);
    table(&SWEEP_COLUMNS, rows)
}

pub fn json(value: &impl Serialize) -> Result<Vec<u8>> {
    let mut v = serde_json::to_vec_pretty(value).map_err(|e| Error::Serialize(e.to_string()))?;
    v.push(b'\n');
    Ok(v)
}

#[derive(Debug, Clone, Serialize)]
pub struct CostBreakdown {
    pub per_surface_work: std::collections::BTreeMap<String, f64>,
    pub total_work: f64,
    /// ∫ uᵀu dt of the surface offsets from trim, rad² s.
    pub quadratic_reference: Option<f64>,
}

pub fn cost_breakdown(power: &PowerTrace, schedule: Option<&ControlSchedule>) -> Result<CostBreakdown> {
    let quadratic_reference = match schedule {
        Some(s) => Some(crate::actuation::quadratic_cost(s, &nalgebra::DMatrix::identity(SURFACES, SURFACES))?),
        None => None,
    };
    Ok(CostBreakdown {
        per_surface_work: SURFACE_NAMES.iter().zip(power.per_surface).map(|(n, w)| (n.to_string(), w)).collect(),
        total_work: power.total,
        quadratic_reference,
    })
}

#[derive(Debug, Clone, Serialize)]
pub struct OptSummary<'a> {
    pub schema_version: u32,
    pub scenario: &'a str,
    pub morphing: bool,
    pub objective: f64,
    pub terminal_cost: f64,
    pub work: f64,
    pub feasible: bool,
    pub status: crate::ocp::sqp::SqpStatus,
    pub iterations: usize,
    pub evaluations: usize,
    pub poisoned_gradient_entries: usize,
    pub residuals: &'a [crate::ocp::Residual],
    pub final_position: [f64; 3],
    pub final_euler: [f64; 3],
}

pub fn opt_summary(r: &OptResult) -> OptSummary<'_> {
    let last = r.trajectory.last().rigid;
    OptSummary {
        schema_version: ARTIFACT_SCHEMA_VERSION,
        scenario: r.kind.name(),
        morphing: r.morphing,
        objective: r.objective(),
        terminal_cost: r.evaluation.terminal_cost,
        work: r.work.total,
        feasible: r.feasible,
        status: r.status,
        iterations: r.iterations,
        evaluations: r.evaluations,
        poisoned_gradient_entries: r.poisoned,
        residuals: &r.residuals,
        final_position: last.position.into(),
        final_euler: last.euler.into(),
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn seventeen_digits_round_trip() {
        for v in [0.1, 1.0 / 3.0, -2.5e-300, 6.02214076e23, 0.0] {
            let s = num(v);
            assert_eq!(s.parse::<f64>().unwrap(), v);
            assert_eq!(s.split('e').next().unwrap().trim_start_matches('-').replace('.', "").len(), 17);
        }
    }

    #[test]
    fn schedule_file_round_trips() {
        let reference = ControlVector([0.01, 0.0, 0.0, 0.0, 0.2, 0.2, 4.0]);
        let mut s = ControlSchedule::hold(reference, 2.0, 5).unwrap();
        for (k, p) in s.points.iter_mut().enumerate() {
            p[0] = 0.003 * k as f64;
            p[4] = -0.01 * k as f64;
        }
        let bytes = schedule_csv(&s).unwrap();
        let back = parse_schedule_csv(std::str::from_utf8(&bytes).unwrap(), reference).unwrap();
        assert_eq!(back.len(), 5);
        for k in 0..5 {
            for i in 0..CHANNELS {
                assert!((back.point(k).0[i] - s.point(k).0[i]).abs() < 1e-15);
            }
        }
    }

    #[test]
    fn schedule_with_wrong_header_is_rejected() {
        assert!(parse_schedule_csv("t,elevator\n0,0\n", ControlVector::default()).is_err());
    }

    #[test]
    fn header_lengths() {
        assert_eq!(trajectory_columns().len(), 13 + CHANNELS + 3 * SURFACES + 1);
        assert_eq!(schedule_columns().len(), 1 + CHANNELS);
    }
}
