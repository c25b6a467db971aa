use std::sync::{Arc, Mutex, OnceLock};

use nalgebra::{DMatrix, DVector};
use serde::{Deserialize, Serialize};

use super::schedule::ControlSchedule;
use super::sqp::{Derivatives, Evaluation, NlpProblem};
use crate::actuation::control_work;
use crate::error::{Error, Result};
use crate::flightdyn::{
    Checkpoint, SimOptions, Simulator, Trajectory, TrimPoint, AILERON_LEFT, AILERON_RIGHT, CHANNELS, ELEVATOR,
    MORPH_LEFT, MORPH_RIGHT, RUDDER, THRUST,
};
use crate::vehicle::config::AircraftConfig;
use crate::Vec3;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ScenarioKind {
    #[serde(alias = "pullup", alias = "pull-up")]
    PullUp,
    Turn,
    Reachability,
    Obstacle,
}

impl ScenarioKind {
    pub fn name(self) -> &'static str {
        match self {
            ScenarioKind::PullUp => "pull_up",
            ScenarioKind::Turn => "turn",
            ScenarioKind::Reachability => "reachability",
            ScenarioKind::Obstacle => "obstacle",
        }
    }
}

impl std::str::FromStr for ScenarioKind {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.replace('-', "_").as_str() {
            "pull_up" | "pullup" => Ok(ScenarioKind::PullUp),
            "turn" => Ok(ScenarioKind::Turn),
            "reachability" => Ok(ScenarioKind::Reachability),
            "obstacle" => Ok(ScenarioKind::Obstacle),
            _ => Err(Error::UnknownScenario(s.to_string())),
        }
    }
}

/// Vertical cylinder the aircraft must stay out of, positions relative to the maneuver start.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Obstacle {
    pub center: [f64; 3],
    pub radius: f64,
    pub height: f64,
    /// Semi-span added to the radius.
    pub half_span: f64,
}

impl Obstacle {
    pub fn new(center: [f64; 3], radius: f64, height: f64, half_span: f64) -> Result<Self> {
        if !(radius > 0.0 && height > 0.0 && half_span > 0.0) {
            return Err(Error::InvalidArgument("obstacle radius, height and half span must be positive".into()));
        }
        Ok(Obstacle { center, radius, height, half_span })
    }

    pub fn effective_radius(&self) -> f64 {
        self.radius + self.half_span
    }
}

/// Signed clearance from the obstacle region, negative inside.
pub fn obstacle_margin(position: &Vec3, obstacle: &Obstacle) -> f64 {
    let c = obstacle.center;
    let horizontal = (position.x - c[0]).hypot(position.y - c[1]) - obstacle.effective_radius();
    let outside_band = (position.z - c[2]).abs() - 0.5 * obstacle.height;
    if outside_band <= 0.0 {
        horizontal
    } else if horizontal >= 0.0 {
        outside_band.hypot(horizontal)
    } else {
        outside_band
    }
}

/// Lower bound on min(values) that is smooth in every entry.
pub fn smooth_min(values: &[f64], sharpness: f64) -> f64 {
    let m = values.iter().copied().fold(f64::INFINITY, f64::min);
    if !m.is_finite() {
        return m;
    }
    let s: f64 = values.iter().map(|v| (-sharpness * (v - m)).exp()).sum();
    m - s.ln() / sharpness
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum TerminalCost {
    /// Φ = −h(T)
    MaximizeAltitude,
    /// Φ = −y(T)
    MaximizeLateral,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Quantity {
    /// Climb since the maneuver start (m).
    Altitude,
    /// Pitch angle (rad).
    Pitch,
    /// Bank angle (rad).
    Roll,
}

impl Quantity {
    pub fn name(self) -> &'static str {
        match self {
            Quantity::Altitude => "altitude",
            Quantity::Pitch => "pitch",
            Quantity::Roll => "roll",
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct TerminalTarget {
    pub quantity: Quantity,
    pub target: f64,
    pub tolerance: f64,
}

/// Terminal region in the y-z plane (z down, relative to the start).
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct GoalDisc {
    pub y: f64,
    pub z: f64,
    pub radius: f64,
}

/// Control channels moved together by one set of decision variables.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ChannelBlock {
    pub name: String,
    pub channels: Vec<usize>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct SolverSettings {
    pub max_iterations: usize,
    pub max_evaluations: usize,
    /// Forward-difference step in control units.
    pub fd_step: f64,
    /// Sharpness of the smooth minimum over obstacle margins (1/m).
    pub smooth_min_sharpness: f64,
    /// Clearance kept from inequality boundaries (m).
    pub backoff: f64,
    pub initial_radius_deg: f64,
    /// Trust-region unit of the winglet channels relative to the other surfaces.
    pub morph_scale: f64,
}

impl Default for SolverSettings {
    fn default() -> Self {
        SolverSettings {
            max_iterations: 40,
            max_evaluations: 160,
            fd_step: 1e-4,
            smooth_min_sharpness: 20.0,
            backoff: 0.01,
            initial_radius_deg: 2.0,
            morph_scale: 1.0,
        }
    }
}

/// Scenario inputs; missing entries take the scenario defaults.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ScenarioParams {
    pub horizon: Option<f64>,
    pub points: usize,
    pub morphing: bool,
    /// Climb target for reachability (m).
    pub z_goal: Option<f64>,
    pub obstacle_center: [f64; 3],
    pub obstacle_radius: f64,
    pub obstacle_height: f64,
    /// Terminal (y, z) for the obstacle run (m).
    pub goal: [f64; 2],
    pub goal_radius: f64,
    pub altitude_tolerance: f64,
    pub angle_tolerance_deg: f64,
}

impl Default for ScenarioParams {
    fn default() -> Self {
        ScenarioParams {
            horizon: None,
            points: 25,
            morphing: true,
            z_goal: None,
            obstacle_center: [60.0, 16.0, 0.0],
            obstacle_radius: 0.5,
            obstacle_height: 4.0,
            goal: [-1.0, 0.0],
            goal_radius: 0.15,
            altitude_tolerance: 0.01,
            angle_tolerance_deg: 0.1,
        }
    }
}

#[derive(Clone)]
pub struct OcpProblem {
    pub kind: ScenarioKind,
    pub sim: Simulator,
    pub trim: TrimPoint,
    pub horizon: f64,
    pub points: usize,
    pub terminal_cost: Option<TerminalCost>,
    /// Adds the actuation work to the cost.
    pub running_work: bool,
    pub terminal: Vec<TerminalTarget>,
    pub goal: Option<GoalDisc>,
    /// x(T) must reach this station (m).
    pub pass_x: Option<f64>,
    pub obstacles: Vec<Obstacle>,
    pub blocks: Vec<ChannelBlock>,
    pub settings: SolverSettings,
    start: Arc<OnceLock<Checkpoint>>,
}

impl std::fmt::Debug for OcpProblem {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.debug_struct("OcpProblem")
            .field("kind", &self.kind)
            .field("horizon", &self.horizon)
            .field("points", &self.points)
            .field("terminal_cost", &self.terminal_cost)
            .field("running_work", &self.running_work)
            .field("terminal", &self.terminal)
            .field("goal", &self.goal)
            .field("blocks", &self.blocks)
            .finish()
    }
}

fn block(name: &str, channels: &[usize]) -> ChannelBlock {
    ChannelBlock { name: name.to_string(), channels: channels.to_vec() }
}

/// Scenario problem at the given trim point.
pub fn make_scenario(
    kind: ScenarioKind,
    params: &ScenarioParams,
    sim: &Simulator,
    trim: &TrimPoint,
    settings: &SolverSettings,
) -> Result<OcpProblem> {
    let config = &sim.config;
    let longitudinal = matches!(kind, ScenarioKind::PullUp | ScenarioKind::Reachability);
    let mut blocks = vec![block("elevator", &[ELEVATOR])];
    if longitudinal {
        if params.morphing {
            blocks.push(block("morph", &[MORPH_LEFT, MORPH_RIGHT]));
        }
    } else {
        blocks.push(block("aileron_left", &[AILERON_LEFT]));
        blocks.push(block("aileron_right", &[AILERON_RIGHT]));
        blocks.push(block("rudder", &[RUDDER]));
        if params.morphing {
            blocks.push(block("morph_left", &[MORPH_LEFT]));
            blocks.push(block("morph_right", &[MORPH_RIGHT]));
        }
    }
    if config.thrust.active_in_maneuvers {
        blocks.push(block("thrust", &[THRUST]));
    }
    let theta_trim = trim.initial_state().euler.y;
    let angle_tol = params.angle_tolerance_deg.to_radians();
    let pitch = TerminalTarget { quantity: Quantity::Pitch, target: theta_trim, tolerance: angle_tol };
    let level = TerminalTarget { quantity: Quantity::Altitude, target: 0.0, tolerance: params.altitude_tolerance };
    let mut p = OcpProblem {
        kind,
        sim: sim.at_speed(trim.speed),
        trim: *trim,
        horizon: 2.0,
        points: params.points,
        terminal_cost: None,
        running_work: false,
        terminal: vec![],
        goal: None,
        pass_x: None,
        obstacles: vec![],
        blocks,
        settings: settings.clone(),
        start: Arc::new(OnceLock::new()),
    };
    match kind {
        ScenarioKind::PullUp => {
            p.terminal_cost = Some(TerminalCost::MaximizeAltitude);
            p.terminal = vec![pitch];
        }
        ScenarioKind::Turn => {
            p.terminal_cost = Some(TerminalCost::MaximizeLateral);
            p.terminal = vec![
                level,
                pitch,
                TerminalTarget { quantity: Quantity::Roll, target: 0.0, tolerance: angle_tol },
            ];
        }
        ScenarioKind::Reachability => {
            let z = params.z_goal.ok_or_else(|| Error::MissingParameter("z_goal".into()))?;
            p.running_work = true;
            p.terminal = vec![TerminalTarget { target: z, ..level }, pitch];
        }
        ScenarioKind::Obstacle => {
            p.horizon = 2.5;
            p.running_work = true;
            let obs = Obstacle::new(params.obstacle_center, params.obstacle_radius, params.obstacle_height, config.half_span())?;
            p.pass_x = Some(obs.center[0]);
            p.obstacles = vec![obs];
            p.goal = Some(GoalDisc { y: params.goal[0], z: params.goal[1], radius: params.goal_radius });
        }
    }
    if let Some(h) = params.horizon {
        p.horizon = h;
    }
    p.validate()?;
    Ok(p)
}

/// Outcome of one simulated schedule.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct OcpEvaluation {
    pub objective: f64,
    pub terminal_cost: f64,
    pub work: f64,
    /// Final value minus target for each terminal target.
    pub terminal: Vec<f64>,
    /// Distance from the goal disc center.
    pub goal_distance: Option<f64>,
    /// x(T) minus the station to pass.
    pub pass_x: Option<f64>,
    /// Minimum obstacle margin at each sample (m); empty without obstacles.
    pub margins: Vec<f64>,
}

impl OcpEvaluation {
    pub fn min_margin(&self) -> Option<f64> {
        self.margins.iter().copied().reduce(f64::min)
    }
}

impl OcpProblem {
    pub fn validate(&self) -> Result<()> {
        if self.terminal_cost.is_none() && !self.running_work {
            return Err(Error::InvalidArgument("a problem needs a terminal cost, a running cost, or both".into()));
        }
        if self.points < 2 {
            return Err(Error::InvalidArgument(format!("need at least 2 control points, got {}", self.points)));
        }
        if !(self.horizon > 0.0) {
            return Err(Error::InvalidArgument(format!("horizon must be positive, got {}", self.horizon)));
        }
        if !(self.settings.fd_step > 0.0) {
            return Err(Error::InvalidArgument("finite-difference step must be positive".into()));
        }
        Ok(())
    }

    pub fn config(&self) -> &AircraftConfig {
        &self.sim.config
    }

    pub fn morphing(&self) -> bool {
        self.blocks.iter().any(|b| b.channels.iter().any(|&c| c == MORPH_LEFT || c == MORPH_RIGHT))
    }

    /// Same problem with the winglets held at trim.
    pub fn frozen(&self) -> OcpProblem {
        let mut p = self.clone();
        p.blocks.retain(|b| !b.channels.iter().any(|&c| c == MORPH_LEFT || c == MORPH_RIGHT));
        p
    }

    /// Decision variables: every block at points 1..N; point 0 stays at trim.
    pub fn dim(&self) -> usize {
        self.blocks.len() * (self.points - 1)
    }

    fn index(&self, b: usize, k: usize) -> usize {
        b * (self.points - 1) + (k - 1)
    }

    pub fn hold(&self) -> ControlSchedule {
        ControlSchedule::hold(self.trim.controls, self.horizon, self.points).expect("validated problem")
    }

    pub fn schedule(&self, x: &DVector<f64>) -> ControlSchedule {
        let mut s = self.hold();
        for (b, blk) in self.blocks.iter().enumerate() {
            for k in 1..self.points {
                for &c in &blk.channels {
                    s.points[k][c] = x[self.index(b, k)];
                }
            }
        }
        s
    }

    /// Decision vector of a schedule; channels of one block are averaged.
    pub fn variables(&self, s: &ControlSchedule) -> DVector<f64> {
        let mut x = DVector::zeros(self.dim());
        for (b, blk) in self.blocks.iter().enumerate() {
            for k in 1..self.points {
                let sum: f64 = blk.channels.iter().map(|&c| s.points[k][c]).sum();
                x[self.index(b, k)] = sum / blk.channels.len() as f64;
            }
        }
        x
    }

    /// Absolute limits (lower, upper, rate) of a channel.
    fn channel_limits(&self, c: usize) -> (f64, f64, f64) {
        let a = &self.config().actuators;
        let sym = |l: &crate::vehicle::config::SurfaceLimit| {
            let d = l.deflection_deg.to_radians();
            (-d, d, l.rate_deg_s.to_radians())
        };
        match c {
            ELEVATOR => sym(&a.elevator),
            AILERON_LEFT | AILERON_RIGHT => sym(&a.aileron),
            RUDDER => sym(&a.rudder),
            MORPH_LEFT | MORPH_RIGHT => {
                let (lo, hi) = self.config().morph_bounds();
                (lo, hi, a.morphing.rate_deg_s.to_radians())
            }
            _ => (self.config().thrust.min, self.config().thrust.max, f64::INFINITY),
        }
    }

    /// Offset bounds and rate limit of each block.
    fn block_limits(&self, b: usize) -> (f64, f64, f64) {
        self.blocks[b].channels.iter().fold((f64::NEG_INFINITY, f64::INFINITY, f64::INFINITY), |acc, &c| {
            let (lo, hi, r) = self.channel_limits(c);
            let u = self.trim.controls.0[c];
            (acc.0.max(lo - u), acc.1.min(hi - u), acc.2.min(r))
        })
    }

    /// Adjacent-point differences as rows a·x ≥ b, including the step away from the fixed first point.
    pub fn rate_constraints(&self) -> Vec<(DVector<f64>, f64)> {
        let h = self.horizon / (self.points - 1) as f64;
        let mut rows = Vec::new();
        for b in 0..self.blocks.len() {
            let (_, _, rate) = self.block_limits(b);
            if !rate.is_finite() {
                continue;
            }
            for k in 1..self.points {
                for sign in [1.0, -1.0] {
                    let mut a = DVector::zeros(self.dim());
                    a[self.index(b, k)] = -sign;
                    if k > 1 {
                        a[self.index(b, k - 1)] = sign;
                    }
                    rows.push((a, -rate * h));
                }
            }
        }
        rows
    }

    fn start(&self) -> Result<&Checkpoint> {
        if let Some(cp) = self.start.get() {
            return Ok(cp);
        }
        let cp = self.sim.startup(&self.trim, self.horizon)?;
        Ok(self.start.get_or_init(|| cp))
    }

    /// Grid step index of the last sample that a change at control point `k` cannot affect.
    fn restart_step(&self, k: usize) -> usize {
        let (_, dt) = self.sim.grid(self.horizon);
        let t = self.horizon * (k - 1) as f64 / (self.points - 1) as f64;
        ((t / dt - 1e-9).ceil() as usize).saturating_sub(1)
    }

    fn restart_steps(&self) -> Vec<usize> {
        let mut v: Vec<usize> = (1..self.points).map(|k| self.restart_step(k)).collect();
        v.dedup();
        v
    }

    /// Simulate a schedule, optionally resuming from a checkpoint of a base run.
    pub fn simulate(
        &self,
        schedule: &ControlSchedule,
        resume: Option<(&Checkpoint, &Trajectory)>,
        checkpoints: bool,
    ) -> Result<(Trajectory, Vec<Checkpoint>)> {
        let opts = SimOptions {
            checkpoint_steps: if checkpoints { self.restart_steps() } else { vec![] },
            ..SimOptions::default()
        };
        match resume {
            Some((cp, base)) => self.sim.run_from(cp, Some(base), schedule, self.horizon, &opts),
            None => self.sim.run_from(self.start()?, None, schedule, self.horizon, &opts),
        }
    }

    /// Cost, terminal residuals and obstacle margins of a simulated trajectory.
    pub fn assess(&self, traj: &Trajectory) -> Result<OcpEvaluation> {
        let first = &traj.samples[0].rigid;
        let last = &traj.last().rigid;
        let rel = |p: &Vec3| p - first.position;
        let end = rel(&last.position);
        let terminal_cost = match self.terminal_cost {
            Some(TerminalCost::MaximizeAltitude) => end.z,
            Some(TerminalCost::MaximizeLateral) => -end.y,
            None => 0.0,
        };
        let work = if self.running_work { control_work(traj, self.config().aero.power_model)?.total } else { 0.0 };
        let terminal = self
            .terminal
            .iter()
            .map(|t| {
                let v = match t.quantity {
                    Quantity::Altitude => -end.z,
                    Quantity::Pitch => last.euler.y,
                    Quantity::Roll => last.euler.x,
                };
                v - t.target
            })
            .collect();
        let margins = if self.obstacles.is_empty() {
            vec![]
        } else {
            traj.samples
                .iter()
                .map(|s| {
                    let p = rel(&s.rigid.position);
                    self.obstacles.iter().map(|o| obstacle_margin(&p, o)).fold(f64::INFINITY, f64::min)
                })
                .collect()
        };
        Ok(OcpEvaluation {
            objective: terminal_cost + work,
            terminal_cost,
            work,
            terminal,
            goal_distance: self.goal.map(|g| (end.y - g.y).hypot(end.z - g.z)),
            pass_x: self.pass_x.map(|x| end.x - x),
            margins,
        })
    }

    pub fn evaluate(&self, schedule: &ControlSchedule) -> Result<(OcpEvaluation, Trajectory)> {
        let (traj, _) = self.simulate(schedule, None, false)?;
        Ok((self.assess(&traj)?, traj))
    }

    /// Every residual inside its stated tolerance.
    pub fn is_feasible(&self, e: &OcpEvaluation) -> bool {
        let terminal = self.terminal.iter().zip(&e.terminal).all(|(t, v)| v.abs() <= t.tolerance);
        let goal = match (self.goal, e.goal_distance) {
            (Some(g), Some(d)) => d <= g.radius,
            _ => true,
        };
        terminal && goal && e.pass_x.map_or(true, |p| p >= 0.0) && e.min_margin().map_or(true, |m| m >= 0.0)
    }

    /// Solver form: equalities in tolerance units, inequalities shifted by the backoff in half-backoff units.
    fn nlp_evaluation(&self, e: &OcpEvaluation) -> Evaluation {
        let c_eq = self.terminal.iter().zip(&e.terminal).map(|(t, v)| v / t.tolerance).collect();
        let b = self.settings.backoff;
        let ineq = |slack: f64| (slack - b) / (0.5 * b);
        let mut c_in = Vec::new();
        if let (Some(g), Some(d)) = (self.goal, e.goal_distance) {
            c_in.push(ineq(g.radius - d));
        }
        if let Some(p) = e.pass_x {
            c_in.push(ineq(p));
        }
        if !e.margins.is_empty() {
            c_in.push(ineq(smooth_min(&e.margins, self.settings.smooth_min_sharpness)));
        }
        Evaluation { f: e.objective, c_eq, c_in }
    }
}

/// Forward-difference sensitivities of every solver output.
#[derive(Debug, Clone)]
pub struct FdGradient {
    pub base: Evaluation,
    /// d f / d x
    pub gradient: DVector<f64>,
    pub jac_eq: DMatrix<f64>,
    pub jac_in: DMatrix<f64>,
    /// Entries whose perturbed simulation failed; their columns are zero.
    pub poisoned: Vec<usize>,
}

fn outputs(e: &Evaluation) -> Vec<f64> {
    std::iter::once(e.f).chain(e.c_eq.iter().copied()).chain(e.c_in.iter().copied()).collect()
}

/// One baseline and one perturbed run per decision variable, perturbed runs resumed from checkpoints in parallel.
pub fn fd_gradient(problem: &OcpProblem, x: &DVector<f64>, h: f64) -> Result<FdGradient> {
    if !(h > 0.0) {
        return Err(Error::InvalidArgument(format!("finite-difference step must be positive, got {h}")));
    }
    let (traj, cps) = problem.simulate(&problem.schedule(x), None, true)?;
    let base = problem.nlp_evaluation(&problem.assess(&traj)?);
    fd_from_base(problem, x, h, &traj, &cps, base)
}

fn fd_from_base(
    problem: &OcpProblem,
    x: &DVector<f64>,
    h: f64,
    traj: &Trajectory,
    cps: &[Checkpoint],
    base: Evaluation,
) -> Result<FdGradient> {
    use rayon::prelude::*;
    let n = problem.dim();
    let n_per = problem.points - 1;
    let y0 = outputs(&base);
    let start = problem.start()?;
    let columns: Vec<Option<Vec<f64>>> = (0..n)
        .into_par_iter()
        .map(|i| {
            let k = i % n_per + 1;
            let step = problem.restart_step(k);
            let mut xp = x.clone();
            xp[i] += h;
            let s = problem.schedule(&xp);
            let resume = if step == 0 { None } else { cps.iter().find(|c| c.step == step).map(|c| (c, traj)) };
            let run = match resume {
                Some(r) => problem.simulate(&s, Some(r), false),
                None => problem.sim.run_from(start, None, &s, problem.horizon, &SimOptions::default()),
            };
            let e = run.and_then(|(t, _)| problem.assess(&t)).ok()?;
            let y = outputs(&problem.nlp_evaluation(&e));
            y.iter().all(|v| v.is_finite()).then(|| y.iter().zip(&y0).map(|(a, b)| (a - b) / h).collect())
        })
        .collect();
    let ne = base.c_eq.len();
    let ni = base.c_in.len();
    let mut gradient = DVector::zeros(n);
    let mut jac_eq = DMatrix::zeros(ne, n);
    let mut jac_in = DMatrix::zeros(ni, n);
    let mut poisoned = Vec::new();
    for (i, col) in columns.into_iter().enumerate() {
        let Some(col) = col else {
            poisoned.push(i);
            continue;
        };
        gradient[i] = col[0];
        for r in 0..ne {
            jac_eq[(r, i)] = col[1 + r];
        }
        for r in 0..ni {
            jac_in[(r, i)] = col[1 + ne + r];
        }
    }
    Ok(FdGradient { base, gradient, jac_eq, jac_in, poisoned })
}

struct Cached {
    x: DVector<f64>,
    traj: Trajectory,
    checkpoints: Vec<Checkpoint>,
}

/// Solver adapter; keeps the last run so the gradient can resume from its checkpoints.
pub(crate) struct OcpNlp<'a> {
    pub problem: &'a OcpProblem,
    cache: Mutex<Option<Cached>>,
    pub poisoned: Mutex<usize>,
}

impl<'a> OcpNlp<'a> {
    pub fn new(problem: &'a OcpProblem) -> Self {
        OcpNlp { problem, cache: Mutex::new(None), poisoned: Mutex::new(0) }
    }
}

impl NlpProblem for OcpNlp<'_> {
    fn dim(&self) -> usize {
        self.problem.dim()
    }

    fn evaluate(&self, x: &DVector<f64>) -> Result<Evaluation> {
        let (traj, checkpoints) = self.problem.simulate(&self.problem.schedule(x), None, true)?;
        let e = self.problem.nlp_evaluation(&self.problem.assess(&traj)?);
        *self.cache.lock().expect("cache lock") = Some(Cached { x: x.clone(), traj, checkpoints });
        Ok(e)
    }

    fn derivatives(&self, x: &DVector<f64>, at: &Evaluation) -> Result<Derivatives> {
        let cached = self.cache.lock().expect("cache lock").take().filter(|c| &c.x == x);
        let g = match cached {
            Some(c) => fd_from_base(self.problem, x, self.problem.settings.fd_step, &c.traj, &c.checkpoints, at.clone())?,
            None => fd_gradient(self.problem, x, self.problem.settings.fd_step)?,
        };
        *self.poisoned.lock().expect("poison lock") += g.poisoned.len();
        Ok(Derivatives { grad: g.gradient, jac_eq: g.jac_eq, jac_in: g.jac_in })
    }

    fn bounds(&self) -> (DVector<f64>, DVector<f64>) {
        let p = self.problem;
        let n_per = p.points - 1;
        let lo = DVector::from_fn(p.dim(), |i, _| p.block_limits(i / n_per).0);
        let hi = DVector::from_fn(p.dim(), |i, _| p.block_limits(i / n_per).1);
        (lo, hi)
    }

    fn linear(&self) -> Vec<(DVector<f64>, f64)> {
        self.problem.rate_constraints()
    }

    fn scale(&self) -> DVector<f64> {
        let p = self.problem;
        let n_per = p.points - 1;
        DVector::from_fn(p.dim(), |i, _| {
            let ch = &p.blocks[i / n_per].channels;
            if ch.contains(&THRUST) {
                1.0
            } else if ch.contains(&MORPH_LEFT) || ch.contains(&MORPH_RIGHT) {
                p.settings.morph_scale.to_radians()
            } else {
                1f64.to_radians()
            }
        })
    }
}

/// Channels active in a problem, by index.
pub fn active_channels(problem: &OcpProblem) -> [bool; CHANNELS] {
    let mut a = [false; CHANNELS];
    for b in &problem.blocks {
        for &c in &b.channels {
            a[c] = true;
        }
    }
    a
}

#[cfg(test)]
mod tests {
    use super::*;

    fn cylinder() -> Obstacle {
        Obstacle::new([10.0, 2.0, 0.0], 0.5, 4.0, 1.5).unwrap()
    }

    #[test]
    fn margin_at_the_center_is_minus_the_effective_radius() {
        let o = cylinder();
        assert_eq!(obstacle_margin(&Vec3::new(10.0, 2.0, 0.0), &o), -2.0);
        assert!(o.effective_radius() > o.radius);
    }

    #[test]
    fn margin_is_zero_on_the_side_wall() {
        let o = cylinder();
        assert!(obstacle_margin(&Vec3::new(10.0, 4.0, 1.0), &o).abs() < 1e-15);
    }

    #[test]
    fn above_or_below_the_band_is_outside() {
        let o = cylinder();
        for z in [-2.0 - 1e-9, 2.5, -40.0] {
            for (x, y) in [(10.0, 2.0), (11.0, 2.5), (0.0, -8.0)] {
                assert!(obstacle_margin(&Vec3::new(x, y, z), &o) >= 0.0);
            }
        }
        // over the top: distance to the lid
        assert!((obstacle_margin(&Vec3::new(10.0, 2.0, -3.0), &o) - 1.0).abs() < 1e-15);
        // off the corner: distance to the rim
        assert!((obstacle_margin(&Vec3::new(10.0, 7.0, 6.0), &o) - 5.0).abs() < 1e-12);
    }

    #[test]
    fn smooth_min_is_a_tight_lower_bound() {
        let v = [3.0, 1.0, 2.0, 1.5];
        let s = smooth_min(&v, 50.0);
        assert!(s <= 1.0 && s > 1.0 - 4f64.ln() / 50.0);
        assert_eq!(smooth_min(&[0.7], 10.0), 0.7);
        assert!((smooth_min(&[1.0, 1.0], 10.0) - (1.0 - 2f64.ln() / 10.0)).abs() < 1e-15);
    }

    #[test]
    fn scenario_names_parse() {
        assert_eq!("pull-up".parse::<ScenarioKind>().unwrap(), ScenarioKind::PullUp);
        assert_eq!("obstacle".parse::<ScenarioKind>().unwrap(), ScenarioKind::Obstacle);
        assert!("loop".parse::<ScenarioKind>().is_err());
    }
}
