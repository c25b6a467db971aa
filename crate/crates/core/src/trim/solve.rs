use nalgebra::{DMatrix, DVector};
use rayon::prelude::*;

use super::cost::{trim_cost, TrimCostSpec};
use super::{classify, TrimSolution};
use crate::aero::{Kinematics, UvlmSolver};
use crate::error::{Error, Result};
use crate::flightdyn::{rigid_eom, ControlVector, Simulator, TrimPoint, Trajectory, ELEVATOR, MORPH_LEFT, MORPH_RIGHT, THRUST};
use crate::ocp::sqp::{minimize, Derivatives, Evaluation, NlpProblem, SqpOptions};

const ALGEBRAIC_TOL: f64 = 1e-8;

/// Largest vertical speed (m/s) and pitch rate (deg/s) over a trajectory, signed.
pub fn window_residuals(traj: &Trajectory) -> (f64, f64) {
    let mut w = 0.0f64;
    let mut q = 0.0f64;
    for s in &traj.samples {
        let zdot = (s.rigid.rotation() * s.rigid.velocity).z;
        if zdot.abs() > w.abs() {
            w = zdot;
        }
        let qd = s.rigid.omega.y.to_degrees();
        if qd.abs() > q.abs() {
            q = qd;
        }
    }
    (w, q)
}

/// Steady force and moment imbalance in level flight: Z/W, M/(W c), X/W.
pub fn equilibrium_residuals(solver: &mut UvlmSolver, point: &TrimPoint) -> Result<[f64; 3]> {
    let config = &solver.model.config.clone();
    let mut kin = Kinematics::freestream(point.speed, point.alpha, 0.0);
    kin.surfaces = point.controls.surfaces();
    kin.morph = point.controls.morph();
    let state = solver.steady_state(&kin)?;
    let loads = solver.loads(&state, &kin)?;
    let rigid = point.initial_state();
    let a = rigid_eom(&rigid, &loads.force, &loads.moment, point.controls.thrust(), config);
    let w = config.mass.mass * config.environment.gravity;
    let c = config.reference_chord();
    let iyy = config.mass.inertia[1][1];
    Ok([config.mass.mass * a.velocity.z / w, iyy * a.omega.y / (w * c), config.mass.mass * a.velocity.x / w])
}

fn maneuver_window(sim: &Simulator) -> f64 {
    (sim.config.trim.horizon - sim.config.trim.startup_time).max(0.0)
}

/// Forward-simulate a trim point over the check window.
fn assess(sim: &Simulator, point: &TrimPoint) -> (f64, f64, f64) {
    match sim.hold(point, maneuver_window(sim)) {
        Ok(traj) => {
            let (w, q) = window_residuals(&traj);
            let weights = TrimCostSpec::from_config(&sim.config);
            (w, q, trim_cost(&traj, &weights).unwrap_or(f64::NAN))
        }
        Err(_) => (f64::INFINITY, f64::INFINITY, f64::NAN),
    }
}

fn trim_controls(elevator: f64, morph: f64, thrust: f64) -> ControlVector {
    let mut u = ControlVector::default();
    u.0[ELEVATOR] = elevator;
    u.0[MORPH_LEFT] = morph;
    u.0[MORPH_RIGHT] = morph;
    u.0[THRUST] = thrust;
    u
}

/// Equilibrium by decoupled first-order updates: angle of attack on lift, elevator on pitch, thrust on drag.
pub fn static_trim(sim: &Simulator, speed: f64, morph: f64) -> Result<TrimSolution> {
    if !(speed > 0.0) {
        return Err(Error::InvalidArgument(format!("trim speed must be positive, got {speed}")));
    }
    let sim = sim.at_speed(speed);
    let cfg = &sim.config;
    let mut solver = UvlmSolver::new(sim.model.clone(), sim.nominal_dt);
    let weight = cfg.mass.mass * cfg.environment.gravity;
    let (a_lo, a_hi) = (cfg.trim.alpha_bounds_deg[0].to_radians(), cfg.trim.alpha_bounds_deg[1].to_radians());
    let e_max = cfg.actuators.elevator.deflection_deg.to_radians();
    let gain = cfg.trim.gain;
    let q_s = 0.5 * cfg.environment.air_density * speed * speed * cfg.reference_area();
    let ar = cfg.wing.span.powi(2) / cfg.reference_area();
    let cl_alpha = 2.0 * std::f64::consts::PI * ar / (ar + 2.0);
    let mut x = [(weight / q_s / cl_alpha).clamp(a_lo, a_hi), 0.0, 0.0];
    let point = |x: &[f64; 3]| TrimPoint { speed, alpha: x[0], controls: trim_controls(x[1], morph, x[2]) };
    let mut best: Option<([f64; 3], [f64; 3])> = None;
    let mut iterations = 0;
    let h = 1e-4;
    for _ in 0..cfg.trim.max_iterations {
        iterations += 1;
        let r = equilibrium_residuals(&mut solver, &point(&x))?;
        let norm = r.iter().fold(0.0f64, |m, v| m.max(v.abs()));
        if best.map_or(true, |(_, rb)| norm < rb.iter().fold(0.0f64, |m, v| m.max(v.abs()))) {
            best = Some((x, r));
        }
        if norm < ALGEBRAIC_TOL {
            break;
        }
        let ra = equilibrium_residuals(&mut solver, &point(&[x[0] + h, x[1], x[2]]))?;
        let re = equilibrium_residuals(&mut solver, &point(&[x[0], x[1] + h, x[2]]))?;
        let d = [(ra[0] - r[0]) / h, (re[1] - r[1]) / h, 1.0 / weight];
        for i in 0..3 {
            if d[i].abs() > 1e-12 {
                x[i] -= gain * r[i] / d[i];
            }
        }
        x[0] = x[0].clamp(a_lo, a_hi);
        x[1] = x[1].clamp(-e_max, e_max);
        x[2] = x[2].clamp(cfg.thrust.min, cfg.thrust.max);
    }
    let (x, r) = best.expect("at least one iteration");
    let algebraic = r.iter().all(|v| v.abs() < 1e-6);
    let p = point(&x);
    let (w, q, cost) = assess(&sim, &p);
    let cls = classify(w, q, cfg);
    Ok(TrimSolution {
        speed,
        alpha: x[0],
        controls: p.controls,
        residual_w: w,
        residual_q_deg: q,
        converged: algebraic && cls.trimmed,
        cost,
        equilibrium: r,
        iterations,
    })
}

struct DynamicTrim<'a> {
    sim: &'a Simulator,
    speed: f64,
    morphing: bool,
    weights: TrimCostSpec,
    fixed_morph: f64,
}

impl DynamicTrim<'_> {
    fn point(&self, x: &DVector<f64>) -> TrimPoint {
        let morph = if self.morphing { x[3] } else { self.fixed_morph };
        TrimPoint { speed: self.speed, alpha: x[0], controls: trim_controls(x[1], morph, x[2]) }
    }

    fn cost(&self, x: &DVector<f64>) -> Result<f64> {
        let traj = self.sim.hold(&self.point(x), maneuver_window(self.sim))?;
        trim_cost(&traj, &self.weights)
    }

    fn steps(&self) -> DVector<f64> {
        let mut h = DVector::from_element(self.dim(), 1e-5);
        h[2] = 1e-4;
        h
    }
}

impl NlpProblem for DynamicTrim<'_> {
    fn dim(&self) -> usize {
        if self.morphing {
            4
        } else {
            3
        }
    }

    fn evaluate(&self, x: &DVector<f64>) -> Result<Evaluation> {
        Ok(Evaluation { f: self.cost(x)?, c_eq: vec![], c_in: vec![] })
    }

    fn derivatives(&self, x: &DVector<f64>, _at: &Evaluation) -> Result<Derivatives> {
        let h = self.steps();
        let n = self.dim();
        let parts: Vec<Result<f64>> = (0..n)
            .into_par_iter()
            .map(|i| {
                let mut xp = x.clone();
                let mut xm = x.clone();
                xp[i] += h[i];
                xm[i] -= h[i];
                Ok((self.cost(&xp)? - self.cost(&xm)?) / (2.0 * h[i]))
            })
            .collect();
        let mut grad = DVector::zeros(n);
        for (i, p) in parts.into_iter().enumerate() {
            grad[i] = p?;
        }
        Ok(Derivatives { grad, jac_eq: DMatrix::zeros(0, n), jac_in: DMatrix::zeros(0, n) })
    }

    fn bounds(&self) -> (DVector<f64>, DVector<f64>) {
        let c = &self.sim.config;
        let e = c.actuators.elevator.deflection_deg.to_radians();
        let (mlo, mhi) = c.morph_bounds();
        let mut lo = vec![c.trim.alpha_bounds_deg[0].to_radians(), -e, c.thrust.min];
        let mut hi = vec![c.trim.alpha_bounds_deg[1].to_radians(), e, c.thrust.max];
        if self.morphing {
            lo.push(mlo);
            hi.push(mhi);
        }
        (DVector::from_vec(lo), DVector::from_vec(hi))
    }

    fn scale(&self) -> DVector<f64> {
        let mut s = DVector::from_element(self.dim(), 1f64.to_radians());
        s[2] = 1.0;
        s
    }
}

/// Refine a trim point by minimizing the steadiness cost of the simulated window.
///
/// The refined point replaces `init` only when its worst residual ratio is no larger.
pub fn dynamic_trim(sim: &Simulator, init: &TrimSolution, morphing: bool) -> Result<TrimSolution> {
    let sim = sim.at_speed(init.speed);
    let cfg = &sim.config;
    let morphing = morphing && cfg.morphing_enabled();
    let problem = DynamicTrim {
        sim: &sim,
        speed: init.speed,
        morphing,
        weights: TrimCostSpec::from_config(cfg),
        fixed_morph: init.morph(),
    };
    let mut x0 = vec![init.alpha, init.elevator(), init.thrust()];
    if morphing {
        x0.push(init.morph());
    }
    let x0 = DVector::from_vec(x0);
    let (w0, q0, j0) = assess(&sim, &init.point());
    let start = TrimSolution { residual_w: w0, residual_q_deg: q0, cost: j0, ..*init };
    if j0.is_finite() && j0 < 1e-12 {
        return Ok(TrimSolution { converged: classify(w0, q0, cfg).trimmed, ..start });
    }
    let opts = SqpOptions {
        max_iterations: cfg.trim.dynamic_max_iterations,
        max_evaluations: 4 * cfg.trim.dynamic_max_iterations + 4,
        step_tol: 1e-7,
        optimality_tol: 1e-10,
        initial_radius: 0.5,
        min_radius: 1e-6,
        ..SqpOptions::default()
    };
    let result = match minimize(&problem, &x0, &opts) {
        Ok(r) => r,
        Err(Error::NonFinite { .. }) | Err(Error::Attitude { .. }) => {
            return Ok(TrimSolution { converged: classify(w0, q0, cfg).trimmed, ..start });
        }
        Err(e) => return Err(e),
    };
    let p = problem.point(&result.x);
    let (w, q, j) = assess(&sim, &p);
    let mut solver = UvlmSolver::new(sim.model.clone(), sim.nominal_dt);
    let refined = TrimSolution {
        speed: init.speed,
        alpha: p.alpha,
        controls: p.controls,
        residual_w: w,
        residual_q_deg: q,
        converged: false,
        cost: j,
        equilibrium: equilibrium_residuals(&mut solver, &p)?,
        iterations: result.iterations,
    };
    let better = refined.residual_ratio(cfg) <= start.residual_ratio(cfg);
    let chosen = if better { refined } else { TrimSolution { iterations: result.iterations, ..start } };
    Ok(TrimSolution { converged: classify(chosen.residual_w, chosen.residual_q_deg, cfg).trimmed, ..chosen })
}
