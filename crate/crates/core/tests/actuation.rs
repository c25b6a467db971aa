use std::sync::OnceLock;

use morphwing::actuation::{control_work, power_study, PowerStudy, StudySettings, SURFACES};
use morphwing::flightdyn::{ControlInput, Simulator, Trajectory, AILERON_LEFT, MORPH_LEFT};
use morphwing::ocp::ControlSchedule;
use morphwing::trim::static_trim;
use morphwing::vehicle::{default_config, PowerModel};

fn study() -> &'static PowerStudy {
    static S: OnceLock<PowerStudy> = OnceLock::new();
    S.get_or_init(|| {
        let c = default_config();
        let sim = Simulator::new(&c, 1.0).unwrap();
        let trim = static_trim(&sim, c.trim.nominal_speed, 0.0).unwrap().point();
        power_study(&sim, &trim, &StudySettings::default()).unwrap()
    })
}

/// Midpoint rule on ten sub-intervals per step, rates taken from the schedule itself.
fn fine_work(traj: &Trajectory, schedule: &ControlSchedule) -> f64 {
    let mut total = 0.0;
    for w in traj.samples.windows(2) {
        let (a, b) = (&w[0], &w[1]);
        let h = (b.t - a.t) / 10.0;
        for j in 0..10 {
            let t = a.t + (j as f64 + 0.5) * h;
            let f = (t - a.t) / (b.t - a.t);
            let rates = schedule.rates(t);
            for i in 0..SURFACES {
                let m = a.hinge_moments[i] + f * (b.hinge_moments[i] - a.hinge_moments[i]);
                total += h * (-m * rates[i]).max(0.0);
            }
        }
    }
    total
}

#[test]
fn rectified_power_is_never_negative() {
    for case in &study().cases {
        assert!(case.trace.power.iter().flatten().all(|p| *p >= 0.0), "{}", case.name);
        assert!(case.trace.work.windows(2).all(|w| (0..SURFACES).all(|i| w[1][i] >= w[0][i])));
    }
}

#[test]
fn trapezoid_work_matches_a_finer_quadrature() {
    for case in &study().cases {
        let oracle = fine_work(&case.trajectory, &case.schedule);
        let rel = (case.trace.total - oracle).abs() / oracle;
        assert!(rel < 0.02, "{}: {} vs {oracle}", case.name, case.trace.total);
    }
}

#[test]
fn out_stroke_costs_more_than_the_return() {
    let s = study();
    let a = s.case("aileron").unwrap();
    let m = s.case("winglet").unwrap();
    assert!(a.out_work[AILERON_LEFT] > a.return_work[AILERON_LEFT]);
    assert!(m.out_work[MORPH_LEFT] > m.return_work[MORPH_LEFT]);
}

#[test]
fn opposing_winglet_relieves_the_aileron() {
    let s = study();
    let alone = s.case("aileron").unwrap();
    let coupled = s.case("coupled").unwrap();
    let total = |c: &morphwing::actuation::StudyCase| c.out_work[AILERON_LEFT] + c.return_work[AILERON_LEFT];
    assert!(total(coupled) < total(alone), "{} vs {}", total(coupled), total(alone));
}

#[test]
fn signed_work_is_bounded_by_absolute_work() {
    let case = study().case("winglet").unwrap();
    let signed = control_work(&case.trajectory, PowerModel::Signed).unwrap().total;
    let rect = control_work(&case.trajectory, PowerModel::Rectified).unwrap().total;
    let abs = control_work(&case.trajectory, PowerModel::Absolute).unwrap().total;
    assert!(signed <= rect + 1e-12 && rect <= abs + 1e-12);
    assert!(((rect - signed) - (abs - rect)).abs() < 1e-9 * abs.max(1.0));
}
