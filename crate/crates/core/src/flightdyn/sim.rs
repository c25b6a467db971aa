use std::sync::Arc;

use serde::Serialize;

use super::{
    euler_rates, modal_eom, rigid_eom, Accelerations, ControlInput, ControlVector, FlexState, HoldControls,
    RigidState, TrimPoint, CHANNELS, MORPH_LEFT,
};
use crate::aero::{AeroLoads, AeroModel, AeroState, Kinematics, UvlmSolver};
use crate::error::{Error, Result};
use crate::vehicle::config::AircraftConfig;
use crate::vehicle::lattice::LatticeGeometry;
use crate::Vec3;

const ATTITUDE_LIMIT_DEG: f64 = 80.0;

#[derive(Debug, Clone, Default)]
pub struct SimOptions {
    /// Keep per-panel forces and circulation at every sample.
    pub dump_loads: bool,
    /// Maneuver step indices at which to keep a restart checkpoint.
    pub checkpoint_steps: Vec<usize>,
    /// Hold the airframe on its trim flight path; only the control surfaces move.
    pub captive: bool,
}

/// Per-panel loads at one sample.
#[derive(Debug, Clone, PartialEq)]
pub struct LoadFrame {
    pub t: f64,
    pub forces: Vec<Vec3>,
    pub gamma: Vec<f64>,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct TrajectorySample {
    pub t: f64,
    pub rigid: RigidState,
    pub flex: FlexState,
    pub controls: ControlVector,
    /// Right derivative of the commanded controls.
    pub rates: [f64; CHANNELS],
    /// Elevator, aileron left, aileron right, rudder, winglet left, winglet right (N m).
    pub hinge_moments: [f64; 6],
    /// Aerodynamic part of the winglet hinge moments.
    pub winglet_aero_hinge: [f64; 2],
    pub force: Vec3,
    pub moment: Vec3,
    pub circulatory_force: Vec3,
    pub induced_drag: f64,
}

/// Samples on a uniform grid over `[0, T]`, with `t = 0` at the end of the startup.
#[derive(Debug, Clone, PartialEq)]
pub struct Trajectory {
    pub dt: f64,
    pub horizon: f64,
    pub samples: Vec<TrajectorySample>,
    /// Schedule knots with the control rates right after each.
    pub knots: Vec<(f64, [f64; CHANNELS])>,
    pub load_dump: Vec<LoadFrame>,
}

impl Trajectory {
    pub fn times(&self) -> Vec<f64> {
        self.samples.iter().map(|s| s.t).collect()
    }

    pub fn last(&self) -> &TrajectorySample {
        self.samples.last().expect("trajectory has at least one sample")
    }

    pub fn altitude(&self) -> Vec<f64> {
        self.samples.iter().map(|s| s.rigid.altitude()).collect()
    }

    /// Largest |y|, |phi|, |psi|, |v|, |p|, |r| over the trajectory.
    pub fn max_lateral(&self) -> f64 {
        self.samples
            .iter()
            .map(|s| {
                let r = &s.rigid;
                [r.position.y, r.euler.x, r.euler.z, r.velocity.y, r.omega.x, r.omega.z]
                    .iter()
                    .fold(0.0f64, |m, v| m.max(v.abs()))
            })
            .fold(0.0, f64::max)
    }
}

/// Everything needed to resume a simulation at a sample.
#[derive(Debug, Clone)]
pub struct Checkpoint {
    pub step: usize,
    pub dt: f64,
    rigid: RigidState,
    flex: FlexState,
    aero: AeroState,
    loads: AeroLoads,
    accel: Accelerations,
    controls: ControlVector,
    /// Winglet angles one and two samples back.
    morph_hist: [[f64; 2]; 2],
}

impl Checkpoint {
    pub fn rigid(&self) -> &RigidState {
        &self.rigid
    }
}

struct Stepper<'a> {
    config: &'a AircraftConfig,
    solver: UvlmSolver,
    dt: f64,
    captive: bool,
}

struct StepOut {
    rigid: RigidState,
    flex: FlexState,
    aero: AeroState,
    loads: AeroLoads,
    accel: Accelerations,
}

impl Stepper<'_> {
    fn kinematics(rigid: &RigidState, flex: &FlexState, u: &ControlVector, rates: &[f64; CHANNELS]) -> Kinematics {
        Kinematics {
            velocity: rigid.velocity,
            omega: rigid.omega,
            morph: u.morph(),
            morph_rate: [rates[MORPH_LEFT], rates[MORPH_LEFT + 1]],
            surfaces: u.surfaces(),
            surface_rates: [rates[0], rates[1], rates[2], rates[3]],
            plunge_rate: flex.eta_rate,
        }
    }

    fn accelerations(&self, rigid: &RigidState, flex: &FlexState, loads: &AeroLoads, thrust: f64) -> Accelerations {
        if self.captive {
            return Accelerations { velocity: Vec3::zeros(), omega: Vec3::zeros(), modal: [0.0; 2] };
        }
        let mut a = rigid_eom(rigid, &loads.force, &loads.moment, thrust, self.config);
        a.modal = modal_eom(flex, loads.modal_force, self.config);
        a
    }

    fn advance(&self, r: &RigidState, f: &FlexState, a0: &Accelerations, a1: &Accelerations) -> (RigidState, FlexState) {
        let dt = self.dt;
        let velocity = r.velocity + (a0.velocity + a1.velocity) * (0.5 * dt);
        let omega = r.omega + (a0.omega + a1.omega) * (0.5 * dt);
        let e0 = euler_rates(&r.euler, &r.omega);
        let pred = r.euler + e0 * dt;
        let euler = r.euler + (e0 + euler_rates(&pred, &omega)) * (0.5 * dt);
        let mut next = RigidState { position: r.position, euler, velocity, omega };
        next.position = r.position + (r.rotation() * r.velocity + next.rotation() * velocity) * (0.5 * dt);
        let eta_rate: [f64; 2] = std::array::from_fn(|s| f.eta_rate[s] + 0.5 * dt * (a0.modal[s] + a1.modal[s]));
        let eta = std::array::from_fn(|s| f.eta[s] + 0.5 * dt * (f.eta_rate[s] + eta_rate[s]));
        (next, FlexState { eta, eta_rate })
    }

    fn step(
        &mut self,
        rigid: &RigidState,
        flex: &FlexState,
        aero: &AeroState,
        accel: &Accelerations,
        u: &ControlVector,
        rates: &[f64; CHANNELS],
    ) -> Result<StepOut> {
        let (mut r1, mut f1) = self.advance(rigid, flex, accel, accel);
        let kin = Self::kinematics(&r1, &f1, u, rates);
        let (mut a1, wash) = self.solver.step(aero, &kin)?;
        let mut loads = self.solver.loads(&a1, &kin)?;
        let iterations = self.config.aero.sub_iterations.max(1);
        for _ in 0..iterations {
            let acc_p = self.accelerations(&r1, &f1, &loads, u.thrust());
            let (r, f) = self.advance(rigid, flex, accel, &acc_p);
            r1 = r;
            f1 = f;
            let kin = Self::kinematics(&r1, &f1, u, rates);
            a1 = self.solver.resolve(&a1, &kin, &wash)?;
            loads = self.solver.loads(&a1, &kin)?;
        }
        let acc = self.accelerations(&r1, &f1, &loads, u.thrust());
        Ok(StepOut { rigid: r1, flex: f1, aero: a1, loads, accel: acc })
    }
}

fn check_state(t: f64, r: &RigidState, f: &FlexState) -> Result<()> {
    let finite = [r.position, r.euler, r.velocity, r.omega].iter().all(|v| v.iter().all(|x| x.is_finite()))
        && f.eta.iter().chain(f.eta_rate.iter()).all(|x| x.is_finite());
    if !finite {
        return Err(Error::NonFinite { t, what: "flight state".into() });
    }
    if r.euler.y.abs() >= ATTITUDE_LIMIT_DEG.to_radians() {
        return Err(Error::Attitude { t, theta_deg: r.euler.y.to_degrees() });
    }
    Ok(())
}

/// Fixed-step coupled simulator for one aircraft configuration.
#[derive(Clone)]
pub struct Simulator {
    pub config: AircraftConfig,
    pub model: Arc<AeroModel>,
    /// Step size tied to the wake shedding at the reference speed.
    pub nominal_dt: f64,
}

impl Simulator {
    pub fn new(config: &AircraftConfig, dt_scale: f64) -> Result<Self> {
        let model = Arc::new(AeroModel::new(config, dt_scale)?);
        Ok(Self::with_model(config, model))
    }

    /// Reuse a prebuilt aero model (tables are expensive).
    pub fn with_model(config: &AircraftConfig, model: Arc<AeroModel>) -> Self {
        let nominal_dt = config.time_step(config.aero.reference_speed, model.dt_scale);
        Simulator { config: config.clone(), model, nominal_dt }
    }

    /// Same model with the step matched to wake convection at `speed`.
    pub fn at_speed(&self, speed: f64) -> Simulator {
        Simulator { nominal_dt: self.config.time_step(speed, self.model.dt_scale), ..self.clone() }
    }

    /// Steps over `[0, horizon]` and the uniform step that lands exactly on `horizon`.
    pub fn grid(&self, horizon: f64) -> (usize, f64) {
        if horizon <= 0.0 {
            return (0, self.nominal_dt);
        }
        let n = (horizon / self.nominal_dt - 1e-9).ceil().max(1.0) as usize;
        (n, horizon / n as f64)
    }

    fn stepper(&self, dt: f64, captive: bool) -> Stepper<'_> {
        Stepper { config: &self.config, solver: UvlmSolver::new(self.model.clone(), dt), dt, captive }
    }

    fn sample(
        &self,
        lattice: &LatticeGeometry,
        t: f64,
        cp: &Checkpoint,
        rates: [f64; CHANNELS],
    ) -> TrajectorySample {
        let wh = self.winglet_hinge(lattice, cp);
        let l = &cp.loads;
        TrajectorySample {
            t,
            rigid: cp.rigid,
            flex: cp.flex,
            controls: cp.controls,
            rates,
            hinge_moments: [l.surface_hinge[0], l.surface_hinge[1], l.surface_hinge[2], l.surface_hinge[3], wh[0], wh[1]],
            winglet_aero_hinge: l.winglet_hinge,
            force: l.force,
            moment: l.moment,
            circulatory_force: l.circulatory_force,
            induced_drag: l.induced_drag,
        }
    }

    /// Aerodynamic plus inertial hinge moment of each winglet.
    fn winglet_hinge(&self, lattice: &LatticeGeometry, cp: &Checkpoint) -> [f64; 2] {
        let g = cp.rigid.gravity_body(self.config.environment.gravity);
        let r = &cp.rigid;
        let a0 = cp.accel.velocity + r.omega.cross(&r.velocity);
        let dt = cp.dt;
        std::array::from_fn(|s| {
            let wc = &self.config.winglets.iter().find(|w| w.side.index() == s).expect("both winglets");
            let range = lattice.group_range(s + 1);
            let panels = &lattice.panels[range];
            let area: f64 = panels.iter().map(|p| p.area).sum();
            let c = panels.iter().fold(Vec3::zeros(), |acc, p| acc + p.centroid * p.area) / area;
            let rc = c - self.config.cg();
            let acc = a0 + cp.accel.omega.cross(&rc) + r.omega.cross(&r.omega.cross(&rc));
            let hinge = &lattice.winglet_hinges[s];
            let inertial = hinge.moment(&c, &((g - acc) * wc.mass));
            let dd = (cp.controls.0[MORPH_LEFT + s] - 2.0 * cp.morph_hist[0][s] + cp.morph_hist[1][s]) / (dt * dt);
            cp.loads.winglet_hinge[s] + inertial - wc.hinge_inertia * dd
        })
    }

    /// State after the startup interval under constant trim inputs, ready for a maneuver of `horizon`.
    pub fn startup(&self, trim: &TrimPoint, horizon: f64) -> Result<Checkpoint> {
        let (_, dt) = self.grid(horizon);
        let mut st = self.stepper(dt, false);
        let rigid = trim.initial_state();
        let mut flex = FlexState::default();
        let u = trim.controls;
        let kin = Stepper::kinematics(&rigid, &flex, &u, &[0.0; CHANNELS]);
        let aero = st.solver.steady_state(&kin)?;
        let loads = st.solver.loads(&aero, &kin)?;
        if self.config.flexibility.enabled {
            // start from the static deflection
            flex.eta = loads.modal_force.map(|f| f / self.config.flexibility.modal_stiffness);
        }
        let accel = st.accelerations(&rigid, &flex, &loads, u.thrust());
        let mut cp = Checkpoint { step: 0, dt, rigid, flex, aero, loads, accel, controls: u, morph_hist: [u.morph(); 2] };
        let n = (self.config.trim.startup_time / dt).round() as usize;
        for k in 0..n {
            let out = st.step(&cp.rigid, &cp.flex, &cp.aero, &cp.accel, &u, &[0.0; CHANNELS])?;
            check_state((k as f64 + 1.0) * dt - self.config.trim.startup_time, &out.rigid, &out.flex)?;
            cp = Checkpoint {
                rigid: out.rigid,
                flex: out.flex,
                aero: out.aero,
                loads: out.loads,
                accel: out.accel,
                ..cp
            };
        }
        cp.aero.steps = 0;
        Ok(cp)
    }

    /// Run the maneuver from `start`; `prefix` supplies the samples before a mid-run checkpoint.
    pub fn run_from(
        &self,
        start: &Checkpoint,
        prefix: Option<&Trajectory>,
        input: &dyn ControlInput,
        horizon: f64,
        opts: &SimOptions,
    ) -> Result<(Trajectory, Vec<Checkpoint>)> {
        let (n, dt) = self.grid(horizon);
        if (dt - start.dt).abs() > 1e-15 * dt {
            return Err(Error::InvalidArgument(format!("checkpoint step {} does not match horizon step {dt}", start.dt)));
        }
        let mut st = self.stepper(dt, opts.captive);
        let mut samples = Vec::with_capacity(n + 1);
        let mut dump = Vec::new();
        let mut cp = start.clone();
        let t_at = |k: usize| if k == n { horizon } else { k as f64 * dt };
        let lattice_of = |st: &mut Stepper, cp: &Checkpoint| st.solver.system(cp.controls.morph()).map(|s| s.lattice.clone());
        match prefix {
            Some(p) if start.step > 0 => {
                samples.extend_from_slice(&p.samples[..=start.step]);
                if opts.dump_loads {
                    dump.extend_from_slice(&p.load_dump[..=start.step.min(p.load_dump.len().saturating_sub(1))]);
                }
            }
            _ => {
                if start.step != 0 {
                    return Err(Error::InvalidArgument("mid-run checkpoint needs its trajectory prefix".into()));
                }
                let lat = lattice_of(&mut st, &cp)?;
                samples.push(self.sample(&lat, 0.0, &cp, input.rates(0.0)));
                if opts.dump_loads {
                    dump.push(frame(0.0, &cp));
                }
            }
        }
        let mut checkpoints = Vec::new();
        if opts.checkpoint_steps.contains(&start.step) {
            checkpoints.push(cp.clone());
        }
        for k in start.step..n {
            let t1 = t_at(k + 1);
            let u = input.controls(t1);
            let rates: [f64; CHANNELS] = std::array::from_fn(|i| (u.0[i] - cp.controls.0[i]) / dt);
            let out = st.step(&cp.rigid, &cp.flex, &cp.aero, &cp.accel, &u, &rates)?;
            check_state(t1, &out.rigid, &out.flex)?;
            cp = Checkpoint {
                step: k + 1,
                dt,
                rigid: out.rigid,
                flex: out.flex,
                aero: out.aero,
                loads: out.loads,
                accel: out.accel,
                controls: u,
                morph_hist: [cp.controls.morph(), cp.morph_hist[0]],
            };
            let lat = lattice_of(&mut st, &cp)?;
            samples.push(self.sample(&lat, t1, &cp, input.rates(t1)));
            if opts.dump_loads {
                dump.push(frame(t1, &cp));
            }
            if opts.checkpoint_steps.contains(&(k + 1)) {
                checkpoints.push(cp.clone());
            }
        }
        let knots = input
            .knots()
            .into_iter()
            .filter(|t| *t >= 0.0 && *t <= horizon)
            .map(|t| (t, input.rates(t)))
            .collect();
        Ok((Trajectory { dt, horizon, samples, knots, load_dump: dump }, checkpoints))
    }

    pub fn simulate(&self, trim: &TrimPoint, input: &dyn ControlInput, horizon: f64) -> Result<Trajectory> {
        self.simulate_with(trim, input, horizon, &SimOptions::default())
    }

    pub fn simulate_with(&self, trim: &TrimPoint, input: &dyn ControlInput, horizon: f64, opts: &SimOptions) -> Result<Trajectory> {
        if !(horizon >= 0.0) || !horizon.is_finite() {
            return Err(Error::InvalidArgument(format!("horizon must be >= 0, got {horizon}")));
        }
        let start = self.startup(trim, horizon)?;
        Ok(self.run_from(&start, None, input, horizon, opts)?.0)
    }

    /// Trim inputs held for `horizon` after the startup.
    pub fn hold(&self, trim: &TrimPoint, horizon: f64) -> Result<Trajectory> {
        self.simulate(trim, &HoldControls(trim.controls), horizon)
    }
}

fn frame(t: f64, cp: &Checkpoint) -> LoadFrame {
    LoadFrame { t, forces: cp.loads.panel_forces.clone(), gamma: cp.aero.bound.iter().copied().collect() }
}

