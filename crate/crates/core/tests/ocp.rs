use std::sync::OnceLock;

use morphwing::flightdyn::{Simulator, TrimPoint, ELEVATOR, MORPH_LEFT, MORPH_RIGHT};
use morphwing::ocp::{fd_gradient, make_scenario, solve, OcpProblem, ScenarioKind, ScenarioParams, SolverSettings};
use morphwing::trim::static_trim;
use morphwing::vehicle::default_config;
use nalgebra::DVector;

fn setup() -> &'static (Simulator, TrimPoint) {
    static S: OnceLock<(Simulator, TrimPoint)> = OnceLock::new();
    S.get_or_init(|| {
        let c = default_config();
        let sim = Simulator::new(&c, 1.0).unwrap();
        let trim = static_trim(&sim, c.trim.nominal_speed, 0.0).unwrap().point();
        (sim, trim)
    })
}

fn problem(kind: ScenarioKind, points: usize) -> OcpProblem {
    let (sim, trim) = setup();
    let params = ScenarioParams { points, z_goal: Some(0.5), ..ScenarioParams::default() };
    make_scenario(kind, &params, sim, trim, &SolverSettings::default()).unwrap()
}

/// A smooth interior point: elevator up a little, winglets tip up, within the rate limits.
fn interior(p: &OcpProblem) -> DVector<f64> {
    let s = p.hold();
    let mut x = p.variables(&s);
    let n = p.points - 1;
    for k in 0..n {
        let frac = (k + 1) as f64 / n as f64;
        x[k] = -0.02 * (std::f64::consts::PI * frac).sin();
        if p.dim() > n {
            x[n + k] = 0.05 * frac;
        }
    }
    x
}

#[test]
fn holding_trim_climbs_nothing_and_meets_the_pitch_target() {
    let p = problem(ScenarioKind::PullUp, 5);
    let (e, traj) = p.evaluate(&p.hold()).unwrap();
    assert!(e.objective.abs() < 1e-3, "{}", e.objective);
    assert!(p.is_feasible(&e), "{:?}", e.terminal);
    assert_eq!(traj.samples[0].t, 0.0);
}

#[test]
fn work_scenarios_cost_nothing_at_trim() {
    for kind in [ScenarioKind::Reachability, ScenarioKind::Obstacle] {
        let p = problem(kind, 5);
        let (e, _) = p.evaluate(&p.hold()).unwrap();
        assert_eq!(e.work, 0.0, "{kind:?}");
        assert_eq!(e.objective, 0.0, "{kind:?}");
    }
}

#[test]
fn obstacle_margins_cover_every_sample() {
    let p = problem(ScenarioKind::Obstacle, 5);
    let (e, traj) = p.evaluate(&p.hold()).unwrap();
    assert_eq!(e.margins.len(), traj.samples.len());
    // centre 16 m to the side, radius 0.5 m plus the 16 m half span: straight ahead clips it by 0.5 m
    let m = e.min_margin().unwrap();
    assert!((m + 0.5).abs() < 0.05, "{m}");
    assert!(!p.is_feasible(&e));
}

#[test]
fn forward_differences_agree_with_a_central_oracle() {
    let p = problem(ScenarioKind::PullUp, 5);
    let x = interior(&p);
    let h = p.settings.fd_step;
    let fd = fd_gradient(&p, &x, h).unwrap();
    assert!(fd.poisoned.is_empty());
    let hc = h / 10.0;
    let tol = p.terminal[0].tolerance;
    let mut g = DVector::zeros(p.dim());
    let mut jac = DVector::zeros(p.dim());
    for i in 0..p.dim() {
        let mut xp = x.clone();
        let mut xm = x.clone();
        xp[i] += hc;
        xm[i] -= hc;
        let (ep, _) = p.evaluate(&p.schedule(&xp)).unwrap();
        let (em, _) = p.evaluate(&p.schedule(&xm)).unwrap();
        g[i] = (ep.objective - em.objective) / (2.0 * hc);
        jac[i] = (ep.terminal[0] - em.terminal[0]) / (2.0 * hc * tol);
    }
    let rel = (&fd.gradient - &g).norm() / g.norm();
    assert!(rel < 1e-3, "objective gradient relative error {rel:.3e}\nfd {}\ncentral {}", fd.gradient, g);
    let relj = (fd.jac_eq.row(0).transpose() - &jac).norm() / jac.norm();
    assert!(relj < 1e-3, "pitch jacobian relative error {relj:.3e}");
}

#[test]
fn schedule_and_variables_are_inverse() {
    let p = problem(ScenarioKind::Turn, 4);
    let x = DVector::from_fn(p.dim(), |i, _| 1e-3 * (i as f64 + 1.0));
    let s = p.schedule(&x);
    assert_eq!(p.variables(&s), x);
    assert!(s.points[0].iter().all(|v| *v == 0.0));
}

#[test]
fn morph_block_drives_both_winglets_in_longitudinal_scenarios() {
    let p = problem(ScenarioKind::PullUp, 4);
    let x = DVector::from_fn(p.dim(), |i, _| if i >= 3 { 0.1 } else { 0.0 });
    let s = p.schedule(&x);
    assert_eq!(s.points[2][MORPH_LEFT], 0.1);
    assert_eq!(s.points[2][MORPH_RIGHT], 0.1);
    assert_eq!(s.points[2][ELEVATOR], 0.0);
    assert!(!p.frozen().morphing() && p.morphing());
    assert_eq!(p.frozen().dim(), 3);
}

#[test]
fn rate_rows_bound_every_segment() {
    let p = problem(ScenarioKind::PullUp, 5);
    let rows = p.rate_constraints();
    let h = p.horizon / (p.points - 1) as f64;
    let c = p.config();
    let cap = c.actuators.elevator.rate_deg_s.to_radians() * h;
    // a step at the rate limit is allowed, one slightly above is not
    let mut x = DVector::zeros(p.dim());
    x[0] = cap;
    assert!(rows.iter().all(|(a, b)| a.dot(&x) >= b - 1e-12));
    x[0] = cap * 1.01;
    assert!(rows.iter().any(|(a, b)| a.dot(&x) < *b));
    // one row in each direction per segment and block
    assert_eq!(rows.len(), 2 * p.dim());
}

#[test]
fn short_pull_up_improves_on_trim_with_a_monotone_best() {
    let mut p = problem(ScenarioKind::PullUp, 5).frozen();
    p.settings.max_iterations = 6;
    let r = solve(&p, &p.hold()).unwrap();
    assert!(r.feasible, "{:?}", r.residuals);
    assert!(r.objective() < -0.5, "climb {}", -r.objective());
    assert!(r.objective() <= r.history[0].objective);
    let bound = p.config().actuators.elevator.deflection_deg.to_radians();
    for k in 0..r.schedule.len() {
        assert!(r.schedule.point(k).0[ELEVATOR].abs() <= bound + 1e-12);
    }
    let rate = p.config().actuators.elevator.rate_deg_s.to_radians();
    for seg in r.schedule.segment_rates() {
        assert!(seg[ELEVATOR].abs() <= rate * (1.0 + 1e-9));
    }
}

#[test]
fn mismatched_initial_schedule_is_rejected() {
    let p = problem(ScenarioKind::PullUp, 5);
    let other = problem(ScenarioKind::PullUp, 6);
    assert!(solve(&p, &other.hold()).is_err());
}
