use serde::Serialize;

use super::problem::{make_scenario, OcpEvaluation, OcpNlp, OcpProblem, ScenarioKind, ScenarioParams, SolverSettings};
use super::schedule::ControlSchedule;
use super::sqp::{minimize_with, IterationRecord, SqpOptions, SqpStatus};
use crate::actuation::{control_work, PowerTrace};
use crate::error::{Error, Result};
use crate::flightdyn::{Simulator, Trajectory, TrimPoint};

/// One residual against its tolerance, for reporting.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Residual {
    pub name: String,
    pub value: f64,
    pub tolerance: f64,
    pub satisfied: bool,
}

#[derive(Debug, Clone)]
pub struct OptResult {
    pub kind: ScenarioKind,
    pub morphing: bool,
    pub schedule: ControlSchedule,
    pub trajectory: Trajectory,
    pub evaluation: OcpEvaluation,
    pub history: Vec<IterationRecord>,
    pub residuals: Vec<Residual>,
    /// Solver found a point inside the tolerances and the final trajectory confirms it.
    pub feasible: bool,
    pub status: SqpStatus,
    pub iterations: usize,
    pub evaluations: usize,
    /// Gradient entries lost to failed perturbed runs, summed over iterations.
    pub poisoned: usize,
    pub work: PowerTrace,
}

impl OptResult {
    pub fn objective(&self) -> f64 {
        self.evaluation.objective
    }
}

fn residuals(problem: &OcpProblem, e: &OcpEvaluation) -> Vec<Residual> {
    let mut out: Vec<Residual> = problem
        .terminal
        .iter()
        .zip(&e.terminal)
        .map(|(t, v)| Residual {
            name: t.quantity.name().to_string(),
            value: *v,
            tolerance: t.tolerance,
            satisfied: v.abs() <= t.tolerance,
        })
        .collect();
    if let (Some(g), Some(d)) = (problem.goal, e.goal_distance) {
        out.push(Residual { name: "goal_distance".into(), value: d, tolerance: g.radius, satisfied: d <= g.radius });
    }
    if let Some(p) = e.pass_x {
        out.push(Residual { name: "pass_x".into(), value: p, tolerance: 0.0, satisfied: p >= 0.0 });
    }
    if let Some(m) = e.min_margin() {
        out.push(Residual { name: "min_margin".into(), value: m, tolerance: 0.0, satisfied: m >= 0.0 });
    }
    out
}

fn sqp_options(settings: &SolverSettings) -> SqpOptions {
    SqpOptions {
        max_iterations: settings.max_iterations,
        max_evaluations: settings.max_evaluations,
        feasibility_tol: 1.0,
        step_tol: 1e-6,
        optimality_tol: 1e-7,
        initial_radius: settings.initial_radius_deg,
        min_radius: 1e-4,
        prefer_converged: false,
        merit_deadzone: 0.1,
        ..SqpOptions::default()
    }
}

/// SQP from `init`; non-convergence is reported through the status and feasible flag.
pub fn solve(problem: &OcpProblem, init: &ControlSchedule) -> Result<OptResult> {
    solve_with(problem, init, |_| {})
}

pub fn solve_with(
    problem: &OcpProblem,
    init: &ControlSchedule,
    observe: impl FnMut(&IterationRecord),
) -> Result<OptResult> {
    problem.validate()?;
    if init.len() != problem.points || (init.horizon - problem.horizon).abs() > 1e-12 {
        return Err(Error::InvalidArgument("initial schedule does not match the problem grid".into()));
    }
    let nlp = OcpNlp::new(problem);
    let x0 = problem.variables(init);
    let r = minimize_with(&nlp, &x0, &sqp_options(&problem.settings), observe)?;
    let schedule = problem.schedule(&r.x);
    let (evaluation, trajectory) = problem.evaluate(&schedule)?;
    let work = control_work(&trajectory, problem.config().aero.power_model)?;
    let feasible = r.feasible && problem.is_feasible(&evaluation);
    let poisoned = *nlp.poisoned.lock().expect("poison lock");
    Ok(OptResult {
        kind: problem.kind,
        morphing: problem.morphing(),
        residuals: residuals(problem, &evaluation),
        schedule,
        trajectory,
        evaluation,
        history: r.history,
        feasible,
        status: r.status,
        iterations: r.iterations,
        evaluations: r.evaluations,
        poisoned,
        work,
    })
}

/// Frozen-winglet optimum and the morphing optimum warm-started from it.
#[derive(Debug, Clone)]
pub struct Comparison {
    pub frozen: OptResult,
    pub morphing: OptResult,
}

impl Comparison {
    /// Morphing is feasible whenever frozen is, and no worse within `rel_tol`.
    pub fn dominates(&self, rel_tol: f64) -> bool {
        if !self.frozen.feasible {
            return true;
        }
        let (jf, jm) = (self.frozen.objective(), self.morphing.objective());
        self.morphing.feasible && jm <= jf + rel_tol * jf.abs() + 1e-12
    }

    /// Relative improvement of the morphing cost over the frozen one.
    pub fn improvement(&self) -> f64 {
        let (jf, jm) = (self.frozen.objective(), self.morphing.objective());
        (jf - jm) / jf.abs().max(1e-12)
    }
}

pub fn solve_pair(problem: &OcpProblem) -> Result<Comparison> {
    let frozen_problem = problem.frozen();
    let frozen = solve(&frozen_problem, &frozen_problem.hold())?;
    let morphing = if problem.morphing() { solve(problem, &frozen.schedule)? } else { frozen.clone() };
    Ok(Comparison { frozen, morphing })
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct ReachProbe {
    pub z_goal: f64,
    pub frozen_feasible: bool,
    pub morphing_feasible: bool,
    pub frozen_work: f64,
    pub morphing_work: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ReachabilityStudy {
    /// Best climb of each variant from the pull-up problem (m).
    pub frozen_ceiling: f64,
    pub morphing_ceiling: f64,
    pub probes: Vec<ReachProbe>,
    /// A climb target reachable only with morphing.
    pub separating_goal: Option<f64>,
}

fn probe(sim: &Simulator, trim: &TrimPoint, params: &ScenarioParams, settings: &SolverSettings, z: f64) -> Result<ReachProbe> {
    let p = ScenarioParams { z_goal: Some(z), morphing: true, ..params.clone() };
    let c = solve_pair(&make_scenario(ScenarioKind::Reachability, &p, sim, trim, settings)?)?;
    Ok(ReachProbe {
        z_goal: z,
        frozen_feasible: c.frozen.feasible,
        morphing_feasible: c.morphing.feasible,
        frozen_work: c.frozen.objective(),
        morphing_work: c.morphing.objective(),
    })
}

/// Bisect the climb target between the frozen and morphing pull-up ceilings for a goal only morphing reaches.
pub fn reachability_bisection(
    sim: &Simulator,
    trim: &TrimPoint,
    params: &ScenarioParams,
    settings: &SolverSettings,
    max_probes: usize,
) -> Result<ReachabilityStudy> {
    let pull = make_scenario(ScenarioKind::PullUp, &ScenarioParams { morphing: true, ..params.clone() }, sim, trim, settings)?;
    let ceilings = solve_pair(&pull)?;
    let climb = |r: &OptResult| if r.feasible { -r.evaluation.terminal_cost } else { f64::NEG_INFINITY };
    let (mut lo, mut hi) = (climb(&ceilings.frozen), climb(&ceilings.morphing));
    let mut study = ReachabilityStudy { frozen_ceiling: lo, morphing_ceiling: hi, probes: vec![], separating_goal: None };
    if !(hi > lo) || !lo.is_finite() {
        return Ok(study);
    }
    for _ in 0..max_probes {
        let z = 0.5 * (lo + hi);
        let pr = probe(sim, trim, params, settings, z)?;
        study.probes.push(pr);
        if pr.morphing_feasible && !pr.frozen_feasible {
            study.separating_goal = Some(z);
            break;
        }
        if pr.frozen_feasible {
            lo = z;
        } else {
            hi = z;
        }
    }
    Ok(study)
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct SweepEntry {
    pub points: usize,
    pub objective: f64,
    pub feasible: bool,
    pub iterations: usize,
}

/// Same scenario at several control-point counts.
pub fn control_point_sweep(
    sim: &Simulator,
    trim: &TrimPoint,
    kind: ScenarioKind,
    params: &ScenarioParams,
    settings: &SolverSettings,
    counts: &[usize],
) -> Result<Vec<SweepEntry>> {
    counts
        .iter()
        .map(|&n| {
            let p = make_scenario(kind, &ScenarioParams { points: n, ..params.clone() }, sim, trim, settings)?;
            let r = solve(&p, &p.hold())?;
            Ok(SweepEntry { points: n, objective: r.objective(), feasible: r.feasible, iterations: r.iterations })
        })
        .collect()
}

/// Relative change of the last entry against the first.
pub fn sweep_change(entries: &[SweepEntry]) -> Option<f64> {
    let (a, b) = (entries.first()?, entries.last()?);
    Some((b.objective - a.objective).abs() / a.objective.abs().max(1e-12))
}
