use morphwing::flightdyn::{
    ControlInput, ControlVector, HoldControls, SimOptions, Simulator, TrimPoint, CHANNELS, ELEVATOR, THRUST,
};
use morphwing::vehicle::default_config;
use morphwing::Vec3;

fn trim_point() -> TrimPoint {
    let mut u = ControlVector::default();
    u.0[ELEVATOR] = -0.5987f64.to_radians();
    u.0[THRUST] = 4.085;
    TrimPoint { speed: 32.5, alpha: 4.8882f64.to_radians(), controls: u }
}

/// Elevator ramps up by `amp` over the first half second and holds.
struct ElevatorRamp {
    base: ControlVector,
    amp: f64,
}

impl ControlInput for ElevatorRamp {
    fn controls(&self, t: f64) -> ControlVector {
        let mut u = self.base;
        u.0[ELEVATOR] += self.amp * (t / 0.5).clamp(0.0, 1.0);
        u
    }

    fn rates(&self, t: f64) -> [f64; CHANNELS] {
        let mut r = [0.0; CHANNELS];
        if t < 0.5 {
            r[ELEVATOR] = self.amp / 0.5;
        }
        r
    }

    fn knots(&self) -> Vec<f64> {
        vec![0.0, 0.5]
    }
}

#[test]
fn vacuum_glide_is_a_projectile() {
    let mut c = default_config();
    c.environment.air_density = 0.0;
    let sim = Simulator::new(&c, 1.0).unwrap();
    let trim = TrimPoint { speed: 20.0, alpha: 0.1, controls: ControlVector::default() };
    let traj = sim.hold(&trim, 1.0).unwrap();
    let g = c.environment.gravity;
    let ts = c.trim.startup_time;
    let (_, dt) = sim.grid(1.0);
    let startup = (ts / dt).round() * dt;
    let v0 = trim.initial_state().rotation() * trim.initial_state().velocity;
    let e0 = 0.5 * v0.norm_squared();
    for s in &traj.samples {
        let tau = s.t + startup;
        let expect = v0 * tau + Vec3::new(0.0, 0.0, 0.5 * g * tau * tau);
        assert!((s.rigid.position - expect).norm() < 1e-6, "t {}: {} vs {}", s.t, s.rigid.position, expect);
        let v = s.rigid.rotation() * s.rigid.velocity;
        let e = 0.5 * v.norm_squared() - g * s.rigid.position.z;
        assert!((e - e0).abs() < 1e-3 * e0);
        assert!(s.rigid.omega.norm() == 0.0);
    }
}

#[test]
fn repeated_runs_are_bit_identical() {
    let sim = Simulator::new(&default_config(), 1.0).unwrap();
    let t = trim_point();
    let input = ElevatorRamp { base: t.controls, amp: 2f64.to_radians() };
    let a = sim.simulate(&t, &input, 1.0).unwrap();
    let b = sim.simulate(&t, &input, 1.0).unwrap();
    assert_eq!(a, b);
}

#[test]
fn symmetric_inputs_keep_lateral_states_at_zero() {
    let sim = Simulator::new(&default_config(), 1.0).unwrap();
    let t = trim_point();
    let traj = sim.simulate(&t, &ElevatorRamp { base: t.controls, amp: -3f64.to_radians() }, 2.0).unwrap();
    assert!(traj.max_lateral() < 1e-9, "{}", traj.max_lateral());
    assert!(traj.last().rigid.altitude() > 0.05);
}

#[test]
fn zero_horizon_returns_the_post_startup_state() {
    let sim = Simulator::new(&default_config(), 1.0).unwrap();
    let traj = sim.hold(&trim_point(), 0.0).unwrap();
    assert_eq!(traj.samples.len(), 1);
    assert_eq!(traj.samples[0].t, 0.0);
}

#[test]
fn grid_lands_on_the_horizon() {
    let sim = Simulator::new(&default_config(), 1.0).unwrap();
    let traj = sim.hold(&trim_point(), 1.234).unwrap();
    assert_eq!(traj.last().t, 1.234);
    let (n, dt) = sim.grid(1.234);
    assert_eq!(traj.samples.len(), n + 1);
    assert!(dt <= sim.nominal_dt);
}

#[test]
fn restart_from_checkpoint_matches_full_run() {
    let sim = Simulator::new(&default_config(), 1.0).unwrap();
    let t = trim_point();
    let input = ElevatorRamp { base: t.controls, amp: 1.5f64.to_radians() };
    let horizon = 1.0;
    let start = sim.startup(&t, horizon).unwrap();
    let opts = SimOptions { checkpoint_steps: vec![20, 40], ..SimOptions::default() };
    let (full, cps) = sim.run_from(&start, None, &input, horizon, &opts).unwrap();
    assert_eq!(cps.len(), 2);
    let (resumed, _) = sim.run_from(&cps[1], Some(&full), &input, horizon, &SimOptions::default()).unwrap();
    assert_eq!(full.samples, resumed.samples);
    assert!(sim.run_from(&cps[0], None, &input, horizon, &SimOptions::default()).is_err());
}

#[test]
fn load_dump_has_one_frame_per_sample() {
    let sim = Simulator::new(&default_config(), 1.0).unwrap();
    let opts = SimOptions { dump_loads: true, ..SimOptions::default() };
    let t = trim_point();
    let traj = sim.simulate_with(&t, &HoldControls(t.controls), 0.3, &opts).unwrap();
    assert_eq!(traj.load_dump.len(), traj.samples.len());
    let total: Vec3 = traj.load_dump[3].forces.iter().sum();
    assert!((total - traj.samples[3].force).norm() < 1e-9 * total.norm());
}

#[test]
fn negative_horizon_is_rejected() {
    let sim = Simulator::new(&default_config(), 1.0).unwrap();
    assert!(sim.hold(&trim_point(), -1.0).is_err());
}
