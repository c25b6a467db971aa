use nalgebra::DMatrix;
use serde::Serialize;

use super::{control_work, quadratic_cost, PowerTrace, SURFACES};
use crate::error::Result;
use crate::flightdyn::{SimOptions, Simulator, Trajectory, TrimPoint, AILERON_LEFT, MORPH_LEFT};
use crate::ocp::ControlSchedule;

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct StudySettings {
    /// Aileron excursion, positive trailing edge down.
    pub aileron_deg: f64,
    /// Winglet excursion when moved alone, positive tip up.
    pub winglet_deg: f64,
    /// Winglet excursion paired with the aileron in the coupled case.
    pub coupled_winglet_deg: f64,
    /// Duration of each stroke and of the hold between them (s).
    pub stroke_time: f64,
}

impl Default for StudySettings {
    fn default() -> Self {
        // lone winglet tip down, paired winglet tip up
        StudySettings { aileron_deg: 10.0, winglet_deg: -10.0, coupled_winglet_deg: 10.0, stroke_time: 1.0 }
    }
}

#[derive(Debug, Clone, Serialize)]
pub struct StudyCase {
    pub name: String,
    #[serde(skip)]
    pub schedule: ControlSchedule,
    #[serde(skip)]
    pub trajectory: Trajectory,
    #[serde(skip)]
    pub trace: PowerTrace,
    /// Work while deflecting away from trim, including the hold (J).
    pub out_work: [f64; SURFACES],
    /// Work while returning to trim (J).
    pub return_work: [f64; SURFACES],
    pub total_work: f64,
    /// ∫ uᵀu dt over the deflection offsets (rad² s).
    pub quadratic: f64,
}

#[derive(Debug, Clone, Serialize)]
pub struct PowerStudy {
    pub settings: StudySettings,
    pub cases: Vec<StudyCase>,
}

impl PowerStudy {
    pub fn case(&self, name: &str) -> Option<&StudyCase> {
        self.cases.iter().find(|c| c.name == name)
    }
}

/// Left aileron and left winglet driven out and back, alone and together, with the airframe held on its trim path.
pub fn power_study(sim: &Simulator, trim: &TrimPoint, settings: &StudySettings) -> Result<PowerStudy> {
    let sim = sim.at_speed(trim.speed);
    let a = settings.aileron_deg.to_radians();
    let m = settings.winglet_deg.to_radians();
    let mc = settings.coupled_winglet_deg.to_radians();
    let ts = settings.stroke_time;
    let horizon = 4.0 * ts;
    let profile = [0.0, 1.0, 1.0, 0.0, 0.0];
    let make = |channels: &[(usize, f64)]| -> Result<ControlSchedule> {
        let mut s = ControlSchedule::hold(trim.controls, horizon, profile.len())?;
        for (k, p) in s.points.iter_mut().enumerate() {
            for &(ch, amp) in channels {
                p[ch] = amp * profile[k];
            }
        }
        Ok(s)
    };
    let defs: [(&str, Vec<(usize, f64)>); 3] = [
        ("aileron", vec![(AILERON_LEFT, a)]),
        ("winglet", vec![(MORPH_LEFT, m)]),
        ("coupled", vec![(AILERON_LEFT, a), (MORPH_LEFT, mc)]),
    ];
    let opts = SimOptions { captive: true, ..SimOptions::default() };
    let identity = DMatrix::identity(SURFACES, SURFACES);
    let mut cases = Vec::new();
    for (name, channels) in defs {
        let schedule = make(&channels)?;
        let trajectory = sim.simulate_with(trim, &schedule, horizon, &opts)?;
        let trace = control_work(&trajectory, sim.config.aero.power_model)?;
        cases.push(StudyCase {
            name: name.to_string(),
            out_work: trace.work_between(0.0, 2.0 * ts),
            return_work: trace.work_between(2.0 * ts, horizon),
            total_work: trace.total,
            quadratic: quadratic_cost(&schedule, &identity)?,
            schedule,
            trajectory,
            trace,
        });
    }
    Ok(PowerStudy { settings: *settings, cases })
}
