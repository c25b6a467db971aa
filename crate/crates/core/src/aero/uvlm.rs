use std::sync::Arc;

use nalgebra::{DVector, Rotation3, Unit};

use super::loads::{compute_loads, AeroLoads};
use super::model::{AeroModel, StepSystem, SteadySystem};
use crate::error::{Error, Result};
use crate::vehicle::config::{ComponentTag, Side};
use crate::vehicle::lattice::{LatticeGeometry, Panel};
use crate::Vec3;

/// Body-frame kinematics seen by the lattice during one step.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Kinematics {
    /// Velocity of the body origin relative to still air, body axes.
    pub velocity: Vec3,
    pub omega: Vec3,
    /// Winglet angles (left, right), rad, positive tip up.
    pub morph: [f64; 2],
    pub morph_rate: [f64; 2],
    /// Flap deflections by control channel: elevator, aileron left, aileron right, rudder.
    pub surfaces: [f64; 4],
    pub surface_rates: [f64; 4],
    /// Modal plunge rates (left, right) of the flexible wing, positive down.
    pub plunge_rate: [f64; 2],
}

impl Kinematics {
    pub fn steady(velocity: Vec3) -> Self {
        Kinematics {
            velocity,
            omega: Vec3::zeros(),
            morph: [0.0; 2],
            morph_rate: [0.0; 2],
            surfaces: [0.0; 4],
            surface_rates: [0.0; 4],
            plunge_rate: [0.0; 2],
        }
    }

    /// Freestream at angle of attack `alpha` and sideslip `beta`.
    pub fn freestream(speed: f64, alpha: f64, beta: f64) -> Self {
        let v = Vec3::new(
            speed * alpha.cos() * beta.cos(),
            speed * beta.sin(),
            speed * alpha.sin() * beta.cos(),
        );
        Kinematics::steady(v)
    }
}

/// Circulation state: bound rings plus the shed wake.
#[derive(Debug, Clone, PartialEq)]
pub struct AeroState {
    pub bound: DVector<f64>,
    pub bound_prev: DVector<f64>,
    pub wake: DVector<f64>,
    /// Winglet angles of the geometry `bound` was solved on.
    pub morph: [f64; 2],
    pub steps: usize,
}

impl AeroState {
    pub fn at_rest(panels: usize, wake: usize) -> Self {
        AeroState {
            bound: DVector::zeros(panels),
            bound_prev: DVector::zeros(panels),
            wake: DVector::zeros(wake),
            morph: [0.0; 2],
            steps: 0,
        }
    }
}

/// Modal plunge shape of one wing side at spanwise station `y`.
pub fn plunge_shape(y: f64, half_span: f64) -> f64 {
    (y.abs() / half_span).min(1.0).powi(2)
}

fn plunge_side(panel: &Panel) -> Option<Side> {
    match panel.tag {
        ComponentTag::WingLeft | ComponentTag::WingletLeft => Some(Side::Left),
        ComponentTag::WingRight | ComponentTag::WingletRight => Some(Side::Right),
        _ => None,
    }
}

/// Velocity of a point on `panel` relative to still air, including all deformation rates.
pub fn surface_velocity(lattice: &LatticeGeometry, kin: &Kinematics, cg: &Vec3, half_span: f64, panel: &Panel, at: &Vec3) -> Vec3 {
    let mut v = kin.velocity + kin.omega.cross(&(at - cg));
    match panel.tag {
        ComponentTag::WingletLeft => v += lattice.winglet_hinges[0].point_velocity(at, kin.morph_rate[0]),
        ComponentTag::WingletRight => v += lattice.winglet_hinges[1].point_velocity(at, kin.morph_rate[1]),
        _ => {}
    }
    if let Some(id) = panel.surface {
        v += lattice.surface(id).line.point_velocity(at, kin.surface_rates[id.channel()]);
    }
    if let Some(side) = plunge_side(panel) {
        v.z += kin.plunge_rate[side.index()] * plunge_shape(at.y, half_span);
    }
    v
}

/// Panel normal after rotating flap panels about their hinge.
pub fn effective_normal(lattice: &LatticeGeometry, kin: &Kinematics, panel: &Panel) -> Vec3 {
    match panel.surface {
        Some(id) => {
            let d = kin.surfaces[id.channel()];
            if d == 0.0 {
                panel.normal
            } else {
                let axis = Unit::new_normalize(lattice.surface(id).line.axis);
                Rotation3::from_axis_angle(&axis, d) * panel.normal
            }
        }
        None => panel.normal,
    }
}

/// Time-marching vortex-lattice solver for one aircraft.
pub struct UvlmSolver {
    pub model: Arc<AeroModel>,
    pub dt: f64,
    /// Most recent systems first.
    cache: Vec<([u64; 2], Arc<StepSystem>)>,
    steady_cache: Option<([u64; 2], Arc<SteadySystem>)>,
}

impl UvlmSolver {
    pub fn new(model: Arc<AeroModel>, dt: f64) -> Self {
        UvlmSolver { model, dt, cache: Vec::new(), steady_cache: None }
    }

    /// Kinematics with winglet inputs replaced by what the model can realize.
    pub fn effective(&self, kin: &Kinematics) -> Kinematics {
        let mut k = *kin;
        if !self.model.is_tabulated() {
            k.morph = self.model.effective_morph(kin.morph);
            k.morph_rate = [0.0; 2];
        }
        k
    }

    pub fn system(&mut self, morph: [f64; 2]) -> Result<Arc<StepSystem>> {
        let morph = self.model.effective_morph(morph);
        let key = [morph[0].to_bits(), morph[1].to_bits()];
        if let Some(i) = self.cache.iter().position(|(k, _)| *k == key) {
            let hit = self.cache.remove(i);
            let s = hit.1.clone();
            self.cache.insert(0, hit);
            return Ok(s);
        }
        let s = Arc::new(self.model.system(morph)?);
        self.cache.insert(0, (key, s.clone()));
        self.cache.truncate(3);
        Ok(s)
    }

    fn rhs(&self, lattice: &LatticeGeometry, kin: &Kinematics, wash: &DVector<f64>) -> DVector<f64> {
        let cfg = &self.model.config;
        let cg = cfg.cg();
        let hs = cfg.half_span();
        DVector::from_iterator(
            lattice.panel_count(),
            lattice.panels.iter().enumerate().map(|(i, p)| {
                let v = surface_velocity(lattice, kin, &cg, hs, p, &p.collocation);
                v.dot(&effective_normal(lattice, kin, p)) - wash[i]
            }),
        )
    }

    /// Steady solution with a horseshoe wake; the wake is filled with the trailing-edge values.
    pub fn steady_state(&mut self, kin: &Kinematics) -> Result<AeroState> {
        let kin = self.effective(kin);
        let key = [kin.morph[0].to_bits(), kin.morph[1].to_bits()];
        let steady = match &self.steady_cache {
            Some((k, s)) if *k == key => s.clone(),
            _ => {
                let s = Arc::new(self.model.steady_system(kin.morph)?);
                self.steady_cache = Some((key, s.clone()));
                s
            }
        };
        let zero = DVector::zeros(steady.lattice.panel_count());
        let bound = steady.solve(&self.rhs(&steady.lattice, &kin, &zero))?;
        let layout = &self.model.layout;
        let mut wake = DVector::zeros(layout.total);
        let te = layout.te_panels(&steady.lattice);
        let mut strip = 0;
        for (ci, &cols) in layout.columns.iter().enumerate() {
            for j in 0..cols {
                let g = bound[te[strip + j]];
                for k in 0..layout.rows {
                    wake[layout.offsets[ci] + k * cols + j] = g;
                }
            }
            strip += cols;
        }
        Ok(AeroState { bound_prev: bound.clone(), bound, wake, morph: steady.lattice.morph, steps: 0 })
    }

    /// Convect the wake one row downstream and release the trailing-edge circulation.
    pub fn shed(&self, state: &AeroState) -> DVector<f64> {
        let layout = &self.model.layout;
        let lattice = &self.model.reference;
        let te = layout.te_panels(lattice);
        let mut wake = DVector::zeros(layout.total);
        let mut strip = 0;
        for (ci, &cols) in layout.columns.iter().enumerate() {
            let off = layout.offsets[ci];
            for k in (1..layout.rows).rev() {
                for j in 0..cols {
                    wake[off + k * cols + j] = state.wake[off + (k - 1) * cols + j];
                }
            }
            for j in 0..cols {
                wake[off + j] = state.bound[te[strip + j]];
            }
            strip += cols;
        }
        wake
    }

    pub fn wake_wash(&mut self, morph: [f64; 2], wake: &DVector<f64>) -> Result<DVector<f64>> {
        let sys = self.system(morph)?;
        Ok(self.model.wake_wash(&sys, wake))
    }

    /// Bound circulation for given kinematics and a precomputed wake wash.
    pub fn solve_bound(&mut self, kin: &Kinematics, wash: &DVector<f64>) -> Result<DVector<f64>> {
        let kin = self.effective(kin);
        let sys = self.system(kin.morph)?;
        let rhs = self.rhs(&sys.lattice, &kin, wash);
        self.model.solve(&sys, &rhs)
    }

    /// One time step: shed, then solve the bound circulation at the new kinematics.
    pub fn step(&mut self, state: &AeroState, kin: &Kinematics) -> Result<(AeroState, DVector<f64>)> {
        let kin = self.effective(kin);
        let wake = self.shed(state);
        let wash = self.wake_wash(kin.morph, &wake)?;
        let bound = self.solve_bound(&kin, &wash)?;
        if bound.iter().any(|g| !g.is_finite()) {
            return Err(Error::NonFinite { t: state.steps as f64 * self.dt, what: "bound circulation".into() });
        }
        let next = AeroState {
            bound_prev: state.bound.clone(),
            bound,
            wake,
            morph: kin.morph,
            steps: state.steps + 1,
        };
        Ok((next, wash))
    }

    /// Re-solve the bound circulation of `state` with updated kinematics, keeping its wake.
    pub fn resolve(&mut self, state: &AeroState, kin: &Kinematics, wash: &DVector<f64>) -> Result<AeroState> {
        let kin = self.effective(kin);
        let bound = self.solve_bound(&kin, wash)?;
        Ok(AeroState { bound, morph: kin.morph, ..state.clone() })
    }

    pub fn loads(&mut self, state: &AeroState, kin: &Kinematics) -> Result<AeroLoads> {
        let kin = self.effective(kin);
        let sys = self.system(state.morph)?;
        Ok(compute_loads(&sys.lattice, &self.model.config, state, &kin, self.dt))
    }

    /// Spanwise vorticity summed over bound and wake rings of each strip.
    ///
    /// Constant in time until the oldest shed row reaches the truncation.
    pub fn total_circulation(&self, state: &AeroState) -> Vec<f64> {
        let layout = &self.model.layout;
        let mut out = Vec::new();
        for (ci, &cols) in layout.columns.iter().enumerate() {
            for j in 0..cols {
                out.push(state.wake[layout.offsets[ci] + (layout.rows - 1) * cols + j]);
            }
        }
        out
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::vehicle::config::default_config;

    fn solver() -> UvlmSolver {
        let c = default_config();
        let dt = c.time_step(c.trim.nominal_speed, 1.0);
        UvlmSolver::new(Arc::new(AeroModel::fixed(&c, 0.0, 0.0, 1.0).unwrap()), dt)
    }

    #[test]
    fn steady_state_is_a_fixed_point() {
        let mut s = solver();
        let kin = Kinematics::freestream(32.5, 4f64.to_radians(), 0.0);
        let st = s.steady_state(&kin).unwrap();
        let (next, _) = s.step(&st, &kin).unwrap();
        let scale = st.bound.amax();
        assert!((&next.bound - &st.bound).amax() < 1e-10 * scale);
    }

    #[test]
    fn impulsive_start_conserves_circulation_until_truncation() {
        let mut s = solver();
        let n = s.model.panel_count();
        let kin = Kinematics::freestream(32.5, 5f64.to_radians(), 0.0);
        let mut st = AeroState::at_rest(n, s.model.layout.total);
        for _ in 0..s.model.layout.rows {
            st = s.step(&st, &kin).unwrap().0;
            assert!(s.total_circulation(&st).iter().all(|g| *g == 0.0));
        }
        st = s.step(&st, &kin).unwrap().0;
        assert!(s.total_circulation(&st).iter().any(|g| *g != 0.0));
    }

    #[test]
    fn circulation_is_linear_in_incidence() {
        let mut s = solver();
        let a = s.steady_state(&Kinematics::steady(Vec3::new(32.5, 0.0, 1.0))).unwrap();
        let b = s.steady_state(&Kinematics::steady(Vec3::new(32.5, 0.0, 2.0))).unwrap();
        let z = s.steady_state(&Kinematics::steady(Vec3::new(32.5, 0.0, 0.0))).unwrap();
        let lin = &z.bound + (&a.bound - &z.bound) * 2.0;
        assert!((&b.bound - lin).amax() < 1e-9 * b.bound.amax());
    }

    #[test]
    fn flap_normal_tilts_aft_for_positive_elevator() {
        let s = solver();
        let lat = &s.model.reference;
        let p = lat.panels.iter().find(|p| p.surface.is_some() && p.tag == ComponentTag::TailRight).unwrap();
        let mut kin = Kinematics::steady(Vec3::new(30.0, 0.0, 0.0));
        kin.surfaces[0] = 0.1;
        let n = effective_normal(lat, &kin, p);
        assert!(n.x < 0.0 && (n.norm() - 1.0).abs() < 1e-14);
    }
}
