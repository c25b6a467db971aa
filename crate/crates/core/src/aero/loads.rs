use nalgebra::DVector;

use super::uvlm::{plunge_shape, surface_velocity, AeroState, Kinematics};
use crate::vehicle::config::{AircraftConfig, ComponentTag};
use crate::vehicle::lattice::LatticeGeometry;
use crate::Vec3;

/// Aerodynamic loads of one time step, body axes, moments about the center of gravity.
#[derive(Debug, Clone, PartialEq)]
pub struct AeroLoads {
    pub force: Vec3,
    pub moment: Vec3,
    /// Joukowski force on the bound vortex segments.
    pub circulatory_force: Vec3,
    /// Force from the rate of change of bound circulation.
    pub added_mass_force: Vec3,
    /// Induced drag from the Trefftz plane, always along the air-relative flow.
    pub induced_drag: f64,
    /// Total force on each panel.
    pub panel_forces: Vec<Vec3>,
    /// Aerodynamic hinge moments of the winglets (left, right).
    pub winglet_hinge: [f64; 2],
    /// Hinge moments by control channel: elevator, aileron left, aileron right, rudder.
    pub surface_hinge: [f64; 4],
    /// Generalized forces on the plunge modes (left, right), positive down.
    pub modal_force: [f64; 2],
}

impl AeroLoads {
    /// Lift and drag for flight velocity `v` (body axes); lift is normal to `v` in the x-z plane.
    pub fn lift_drag(&self, v: &Vec3) -> (f64, f64) {
        lift_drag(&self.force, v)
    }

    pub fn circulatory_lift(&self, v: &Vec3) -> f64 {
        lift_drag(&self.circulatory_force, v).0
    }
}

pub fn lift_drag(force: &Vec3, v: &Vec3) -> (f64, f64) {
    let vh = v.normalize();
    let drag = -force.dot(&vh);
    let lift_dir = Vec3::new(vh.z, 0.0, -vh.x).normalize();
    (force.dot(&lift_dir), drag)
}

struct Accumulator<'a> {
    lattice: &'a LatticeGeometry,
    cg: Vec3,
    half_span: f64,
    loads: AeroLoads,
}

impl Accumulator<'_> {
    fn add(&mut self, panel: usize, at: &Vec3, f: &Vec3) {
        let p = &self.lattice.panels[panel];
        self.loads.panel_forces[panel] += f;
        self.loads.force += f;
        self.loads.moment += (at - self.cg).cross(f);
        match p.tag {
            ComponentTag::WingletLeft => self.loads.winglet_hinge[0] += self.lattice.winglet_hinges[0].moment(at, f),
            ComponentTag::WingletRight => self.loads.winglet_hinge[1] += self.lattice.winglet_hinges[1].moment(at, f),
            _ => {}
        }
        if let Some(id) = p.surface {
            self.loads.surface_hinge[id.channel()] += self.lattice.surface(id).line.moment(at, f);
        }
        let side = match p.tag {
            ComponentTag::WingLeft | ComponentTag::WingletLeft => Some(0),
            ComponentTag::WingRight | ComponentTag::WingletRight => Some(1),
            _ => None,
        };
        if let Some(s) = side {
            self.loads.modal_force[s] += f.z * plunge_shape(at.y, self.half_span);
        }
    }
}

/// Trefftz-plane induced drag of each wake strip, from the trailing-edge circulation.
pub fn trefftz_drag(lattice: &LatticeGeometry, bound: &DVector<f64>, rho: f64, direction: &Vec3) -> Vec<(usize, f64)> {
    let d = direction.normalize();
    let project = |p: &Vec3| p - d * d.dot(p);
    let mut strips = Vec::new();
    for c in &lattice.components {
        let te = c.trailing_edge();
        for j in 0..c.n {
            let panel = c.panel_index(c.m - 1, j);
            strips.push((panel, project(&te[j]), project(&te[j + 1]), bound[panel]));
        }
    }
    let mut out = Vec::with_capacity(strips.len());
    for &(panel, a, b, g) in &strips {
        let mid = 0.5 * (a + b);
        let mut v = Vec3::zeros();
        for &(_, a2, b2, g2) in &strips {
            // trailing legs: +g2 along d from b2, -g2 from a2
            for (q, k) in [(b2, g2), (a2, -g2)] {
                let r = mid - q;
                let r2 = r.norm_squared();
                if r2 > 1e-24 {
                    v += d.cross(&r) * (k / (2.0 * std::f64::consts::PI * r2));
                }
            }
        }
        let t = b - a;
        let len = t.norm();
        if len == 0.0 {
            out.push((panel, 0.0));
            continue;
        }
        let n = d.cross(&(t / len));
        out.push((panel, -0.5 * rho * g * v.dot(&n) * len));
    }
    out
}

/// Loads from a solved circulation state.
pub fn compute_loads(lattice: &LatticeGeometry, config: &AircraftConfig, state: &AeroState, kin: &Kinematics, dt: f64) -> AeroLoads {
    let rho = config.environment.air_density;
    let n = lattice.panel_count();
    let mut acc = Accumulator {
        lattice,
        cg: config.cg(),
        half_span: config.half_span(),
        loads: AeroLoads {
            force: Vec3::zeros(),
            moment: Vec3::zeros(),
            circulatory_force: Vec3::zeros(),
            added_mass_force: Vec3::zeros(),
            induced_drag: 0.0,
            panel_forces: vec![Vec3::zeros(); n],
            winglet_hinge: [0.0; 2],
            surface_hinge: [0.0; 4],
            modal_force: [0.0; 2],
        },
    };
    let g = &state.bound;
    let cg = config.cg();
    let hs = config.half_span();
    let rel = |idx: usize, at: &Vec3| -surface_velocity(lattice, kin, &cg, hs, &lattice.panels[idx], at);
    for c in &lattice.components {
        for i in 0..c.m {
            for j in 0..c.n {
                let idx = c.panel_index(i, j);
                let p = &lattice.panels[idx];
                let lead = if i == 0 { g[idx] } else { g[idx] - g[c.panel_index(i - 1, j)] };
                let at = p.lead_mid();
                let f = rel(idx, &at).cross(&p.lead_vector()) * (rho * lead);
                acc.loads.circulatory_force += f;
                acc.add(idx, &at, &f);
                // right edge B -> C, shared with the neighbour at j + 1
                let right = if j + 1 < c.n { g[idx] - g[c.panel_index(i, j + 1)] } else { g[idx] };
                let seg = p.ring[2] - p.ring[1];
                let at = 0.5 * (p.ring[1] + p.ring[2]);
                let f = rel(idx, &at).cross(&seg) * (rho * right);
                acc.loads.circulatory_force += f;
                if j + 1 < c.n {
                    acc.add(idx, &at, &(f * 0.5));
                    acc.add(c.panel_index(i, j + 1), &at, &(f * 0.5));
                } else {
                    acc.add(idx, &at, &f);
                }
                if j == 0 {
                    let seg = p.ring[0] - p.ring[3];
                    let at = 0.5 * (p.ring[3] + p.ring[0]);
                    let f = rel(idx, &at).cross(&seg) * (rho * g[idx]);
                    acc.loads.circulatory_force += f;
                    acc.add(idx, &at, &f);
                }
            }
        }
    }
    if dt > 0.0 {
        for (idx, p) in lattice.panels.iter().enumerate() {
            let f = p.normal * (rho * p.area * (g[idx] - state.bound_prev[idx]) / dt);
            acc.loads.added_mass_force += f;
            acc.add(idx, &p.centroid, &f);
        }
    }
    let speed = kin.velocity.norm();
    if speed > 0.0 {
        let flow = -kin.velocity / speed;
        for (idx, d) in trefftz_drag(lattice, g, rho, &-Vec3::x()) {
            let f = flow * d;
            acc.loads.induced_drag += d;
            acc.add(idx, &lattice.panels[idx].centroid, &f);
        }
    }
    acc.loads
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::aero::model::AeroModel;
    use crate::aero::uvlm::UvlmSolver;
    use crate::vehicle::config::default_config;
    use std::sync::Arc;

    fn solver() -> UvlmSolver {
        let c = default_config();
        let dt = c.time_step(c.trim.nominal_speed, 1.0);
        UvlmSolver::new(Arc::new(AeroModel::fixed(&c, 0.0, 0.0, 1.0).unwrap()), dt)
    }

    #[test]
    fn symmetric_flight_has_no_lateral_loads() {
        let mut s = solver();
        let kin = Kinematics::freestream(32.5, 3f64.to_radians(), 0.0);
        let st = s.steady_state(&kin).unwrap();
        let l = s.loads(&st, &kin).unwrap();
        let scale = l.force.norm();
        assert!(l.force.y.abs() < 1e-10 * scale);
        assert!(l.moment.x.abs() < 1e-9 * scale && l.moment.z.abs() < 1e-9 * scale);
        assert!((l.winglet_hinge[0] - l.winglet_hinge[1]).abs() < 1e-9 * l.winglet_hinge[1].abs().max(1e-9));
        assert!(l.force.z < 0.0 && l.induced_drag > 0.0);
    }

    #[test]
    fn loads_scale_with_dynamic_pressure() {
        let mut s = solver();
        let a = Kinematics::freestream(20.0, 4f64.to_radians(), 0.0);
        let b = Kinematics::freestream(40.0, 4f64.to_radians(), 0.0);
        let sa = s.steady_state(&a).unwrap();
        let sb = s.steady_state(&b).unwrap();
        let la = s.loads(&sa, &a).unwrap();
        let lb = s.loads(&sb, &b).unwrap();
        assert!((lb.force - la.force * 4.0).norm() < 1e-9 * lb.force.norm());
        assert!((lb.induced_drag / la.induced_drag - 4.0).abs() < 1e-9);
    }

    #[test]
    fn trefftz_drag_of_elliptic_loading() {
        let c = default_config();
        let lat = crate::vehicle::lattice::reference_lattice(&c);
        let mut g = DVector::zeros(lat.panel_count());
        let b = 2.0 * c.winglets[0].hinge_y.abs();
        let mut lift = 0.0;
        for tag in [ComponentTag::WingLeft, ComponentTag::WingRight] {
            let comp = lat.component(tag);
            let te = comp.trailing_edge();
            for j in 0..comp.n {
                let y = 0.5 * (te[j].y + te[j + 1].y);
                let val = 3.0 * (1.0 - (2.0 * y / b).powi(2)).max(0.0).sqrt();
                g[comp.panel_index(comp.m - 1, j)] = val;
                lift += val * (te[j + 1].y - te[j].y).abs();
            }
        }
        let d: f64 = trefftz_drag(&lat, &g, 1.0, &-Vec3::x()).iter().map(|x| x.1).sum();
        let ideal = lift * lift / (std::f64::consts::PI * 0.5 * b * b);
        assert!((d / ideal - 1.0).abs() < 0.05, "{d} vs {ideal}");
    }
}
