//! Actuation power and work from hinge moments and deflection rates.

mod study;

pub use study::{power_study, PowerStudy, StudyCase, StudySettings};

use nalgebra::DMatrix;
use serde::Serialize;

use crate::error::{Error, Result};
use crate::flightdyn::Trajectory;
use crate::ocp::ControlSchedule;
use crate::vehicle::config::PowerModel;

/// Channels that carry a hinge moment, in trajectory order.
pub const SURFACES: usize = 6;
pub const SURFACE_NAMES: [&str; SURFACES] =
    ["elevator", "aileron_left", "aileron_right", "rudder", "winglet_left", "winglet_right"];

/// Power the actuator supplies to move at `rate` against `hinge_moment`.
pub fn instantaneous_power(hinge_moment: f64, rate: f64, model: PowerModel) -> f64 {
    let p = -hinge_moment * rate;
    match model {
        PowerModel::Rectified => p.max(0.0),
        PowerModel::Signed => p,
        PowerModel::Absolute => p.abs(),
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct PowerTrace {
    pub times: Vec<f64>,
    /// Power at each sample with the rate just after it (W).
    pub power: Vec<[f64; SURFACES]>,
    /// Cumulative work at each sample (J).
    pub work: Vec<[f64; SURFACES]>,
    pub per_surface: [f64; SURFACES],
    pub total: f64,
}

impl PowerTrace {
    /// Work done by each surface between two sample times.
    pub fn work_between(&self, t0: f64, t1: f64) -> [f64; SURFACES] {
        let at = |t: f64| {
            let k = self.times.iter().position(|&s| s >= t - 1e-12).unwrap_or(self.times.len() - 1);
            self.work[k]
        };
        let (a, b) = (at(t0), at(t1));
        std::array::from_fn(|i| b[i] - a[i])
    }
}

/// Work by trapezoid on the sample grid, split at schedule knots where the rates jump.
pub fn control_work(traj: &Trajectory, model: PowerModel) -> Result<PowerTrace> {
    let s = &traj.samples;
    if s.is_empty() {
        return Err(Error::EmptyWindow);
    }
    let power_at = |m: &[f64; SURFACES], r: &[f64]| -> [f64; SURFACES] {
        std::array::from_fn(|i| instantaneous_power(m[i], r[i], model))
    };
    let mut times = Vec::with_capacity(s.len());
    let mut power = Vec::with_capacity(s.len());
    let mut work = Vec::with_capacity(s.len());
    let mut acc = [0.0; SURFACES];
    for k in 0..s.len() {
        times.push(s[k].t);
        power.push(power_at(&s[k].hinge_moments, &s[k].rates));
        if k > 0 {
            let (a, b) = (&s[k - 1], &s[k]);
            let h = b.t - a.t;
            let moment = |t: f64| -> [f64; SURFACES] {
                let w = if h > 0.0 { (t - a.t) / h } else { 0.0 };
                std::array::from_fn(|i| a.hinge_moments[i] + w * (b.hinge_moments[i] - a.hinge_moments[i]))
            };
            let mut cuts: Vec<(f64, &[f64])> = vec![(a.t, &a.rates[..])];
            for (tk, rk) in &traj.knots {
                if *tk > a.t + 1e-12 * h.max(1.0) && *tk < b.t - 1e-12 * h.max(1.0) {
                    cuts.push((*tk, &rk[..]));
                }
            }
            for (j, &(t0, r)) in cuts.iter().enumerate() {
                let t1 = cuts.get(j + 1).map_or(b.t, |c| c.0);
                let p0 = power_at(&moment(t0), r);
                let p1 = power_at(&moment(t1), r);
                for i in 0..SURFACES {
                    acc[i] += 0.5 * (t1 - t0) * (p0[i] + p1[i]);
                }
            }
        }
        work.push(acc);
    }
    Ok(PowerTrace { times, power, work, per_surface: acc, total: acc.iter().sum() })
}

/// ∫ uᵀRu dt over the schedule offsets of the surface channels, trapezoid on the schedule grid.
pub fn quadratic_cost(schedule: &ControlSchedule, r: &DMatrix<f64>) -> Result<f64> {
    if r.nrows() != SURFACES || r.ncols() != SURFACES {
        return Err(Error::InvalidArgument(format!("weight matrix must be {SURFACES}x{SURFACES}")));
    }
    if r.clone().cholesky().is_none() || (r - r.transpose()).amax() > 1e-12 * r.amax() {
        return Err(Error::InvalidArgument("weight matrix must be symmetric positive definite".into()));
    }
    let value = |k: usize| {
        let u = nalgebra::DVector::from_fn(SURFACES, |i, _| schedule.points[k][i]);
        u.dot(&(r * &u))
    };
    let h = schedule.spacing();
    Ok((1..schedule.len()).map(|k| 0.5 * h * (value(k - 1) + value(k))).sum())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::flightdyn::{ControlVector, FlexState, RigidState, TrajectorySample, CHANNELS};
    use crate::Vec3;

    fn sample(t: f64, m: f64, r: f64) -> TrajectorySample {
        let rigid = RigidState { position: Vec3::zeros(), euler: Vec3::zeros(), velocity: Vec3::zeros(), omega: Vec3::zeros() };
        let mut rates = [0.0; CHANNELS];
        rates[1] = r;
        let mut hinge_moments = [0.0; SURFACES];
        hinge_moments[1] = m;
        TrajectorySample {
            t,
            rigid,
            flex: FlexState::default(),
            controls: ControlVector::default(),
            rates,
            hinge_moments,
            winglet_aero_hinge: [0.0; 2],
            force: Vec3::zeros(),
            moment: Vec3::zeros(),
            circulatory_force: Vec3::zeros(),
            induced_drag: 0.0,
        }
    }

    fn traj(samples: Vec<TrajectorySample>, knots: Vec<(f64, [f64; CHANNELS])>) -> Trajectory {
        let horizon = samples.last().unwrap().t;
        Trajectory { dt: samples[1].t - samples[0].t, horizon, samples, knots, load_dump: vec![] }
    }

    #[test]
    fn opposing_load_costs_power() {
        assert_eq!(instantaneous_power(-2.0, 0.5, PowerModel::Rectified), 1.0);
        assert_eq!(instantaneous_power(2.0, 0.5, PowerModel::Rectified), 0.0);
        assert_eq!(instantaneous_power(2.0, 0.5, PowerModel::Signed), -1.0);
        assert_eq!(instantaneous_power(2.0, 0.5, PowerModel::Absolute), 1.0);
        assert_eq!(instantaneous_power(-7.0, 0.0, PowerModel::Rectified), 0.0);
    }

    #[test]
    fn constant_power_integrates_to_a_rectangle() {
        let s: Vec<_> = (0..=20).map(|k| sample(k as f64 * 0.1, -1.0, 1.0)).collect();
        let w = control_work(&traj(s, vec![]), PowerModel::Rectified).unwrap();
        assert!((w.total - 2.0).abs() < 1e-12);
        assert_eq!(w.work[0], [0.0; SURFACES]);
        assert!(w.work.windows(2).all(|p| p[1][1] >= p[0][1]));
    }

    #[test]
    fn zero_rates_do_no_work() {
        let s: Vec<_> = (0..=20).map(|k| sample(k as f64 * 0.1, -5.0, 0.0)).collect();
        assert_eq!(control_work(&traj(s, vec![]), PowerModel::Rectified).unwrap().total, 0.0);
    }

    #[test]
    fn rate_jump_inside_a_step_is_resolved() {
        // rate 1 until t = 0.05, then 0; samples every 0.1 s
        let mut s: Vec<_> = (0..=10).map(|k| sample(k as f64 * 0.1, -1.0, 0.0)).collect();
        s[0].rates[1] = 1.0;
        let mut r = [0.0; CHANNELS];
        r[1] = 0.0;
        let mut r0 = [0.0; CHANNELS];
        r0[1] = 1.0;
        let w = control_work(&traj(s, vec![(0.0, r0), (0.05, r)]), PowerModel::Rectified).unwrap();
        assert!((w.total - 0.05).abs() < 1e-12, "{}", w.total);
    }

    #[test]
    fn quadratic_cost_of_unit_offset() {
        let mut s = ControlSchedule::hold(ControlVector::default(), 2.0, 5).unwrap();
        let r = DMatrix::identity(SURFACES, SURFACES);
        assert_eq!(quadratic_cost(&s, &r).unwrap(), 0.0);
        for p in &mut s.points {
            p[0] = 1.0;
        }
        assert!((quadratic_cost(&s, &r).unwrap() - 2.0).abs() < 1e-14);
        let base = quadratic_cost(&s, &r).unwrap();
        for p in &mut s.points {
            p[0] *= 3.0;
        }
        assert!((quadratic_cost(&s, &r).unwrap() - 9.0 * base).abs() < 1e-12);
        assert!(quadratic_cost(&s, &(-r)).is_err());
    }
}
