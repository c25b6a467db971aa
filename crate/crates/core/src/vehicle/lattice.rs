use nalgebra::{Rotation3, Unit};

use super::config::{AircraftConfig, ComponentTag, Side, SurfaceId};
use crate::error::{Error, Result};
use crate::Vec3;

/// A line about which a surface rotates; `axis` is oriented along positive deflection.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct HingeLine {
    pub point: Vec3,
    pub axis: Vec3,
}

impl HingeLine {
    /// Moment of `force` applied at `at` about this line.
    pub fn moment(&self, at: &Vec3, force: &Vec3) -> f64 {
        (at - self.point).cross(force).dot(&self.axis)
    }

    /// Velocity of a point rigidly attached to a surface rotating at `rate`.
    pub fn point_velocity(&self, at: &Vec3, rate: f64) -> Vec3 {
        self.axis.cross(&(at - self.point)) * rate
    }

    pub fn rotate(&self, p: &Vec3, angle: f64) -> Vec3 {
        let r = Rotation3::from_axis_angle(&Unit::new_unchecked(self.axis), angle);
        self.point + r * (p - self.point)
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Panel {
    pub component: usize,
    pub tag: ComponentTag,
    pub row: usize,
    pub col: usize,
    /// Vortex-ring corners A, B, C, D (leading left, leading right, trailing right, trailing left).
    pub ring: [Vec3; 4],
    /// Geometric panel corners in the same order.
    pub corners: [Vec3; 4],
    pub collocation: Vec3,
    pub normal: Vec3,
    pub area: f64,
    pub centroid: Vec3,
    pub surface: Option<SurfaceId>,
}

impl Panel {
    pub fn lead_mid(&self) -> Vec3 {
        0.5 * (self.ring[0] + self.ring[1])
    }

    pub fn lead_vector(&self) -> Vec3 {
        self.ring[1] - self.ring[0]
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct ComponentLattice {
    pub tag: ComponentTag,
    /// Chordwise panel count.
    pub m: usize,
    /// Spanwise panel count.
    pub n: usize,
    pub panel_offset: usize,
    /// (m+1) x (n+1) geometric nodes, row-major from the leading edge.
    pub nodes: Vec<Vec3>,
    /// (m+1) x (n+1) vortex-ring nodes (quarter-panel shifted).
    pub ring_nodes: Vec<Vec3>,
}

impl ComponentLattice {
    pub fn node(&self, i: usize, j: usize) -> Vec3 {
        self.nodes[i * (self.n + 1) + j]
    }

    pub fn ring_node(&self, i: usize, j: usize) -> Vec3 {
        self.ring_nodes[i * (self.n + 1) + j]
    }

    pub fn panel_index(&self, i: usize, j: usize) -> usize {
        self.panel_offset + i * self.n + j
    }

    pub fn panel_count(&self) -> usize {
        self.m * self.n
    }

    /// Ring nodes along the trailing edge, j = 0..=n.
    pub fn trailing_edge(&self) -> Vec<Vec3> {
        (0..=self.n).map(|j| self.ring_node(self.m, j)).collect()
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct SurfaceHinge {
    pub id: SurfaceId,
    pub line: HingeLine,
    pub panels: Vec<usize>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct LatticeGeometry {
    pub components: Vec<ComponentLattice>,
    pub panels: Vec<Panel>,
    /// Winglet hinges indexed by `Side::index`.
    pub winglet_hinges: [HingeLine; 2],
    pub surfaces: Vec<SurfaceHinge>,
    /// Winglet deflections this lattice was built for.
    pub morph: [f64; 2],
}

impl LatticeGeometry {
    pub fn panel_count(&self) -> usize {
        self.panels.len()
    }

    pub fn component(&self, tag: ComponentTag) -> &ComponentLattice {
        self.components.iter().find(|c| c.tag == tag).expect("all components present")
    }

    pub fn surface(&self, id: SurfaceId) -> &SurfaceHinge {
        self.surfaces.iter().find(|s| s.id == id).expect("all surfaces present")
    }

    /// Panel index range of an influence group (0 fixed, 1 left winglet, 2 right winglet).
    pub fn group_range(&self, group: usize) -> std::ops::Range<usize> {
        let mut start = usize::MAX;
        let mut end = 0;
        for c in self.components.iter().filter(|c| c.tag.group() == group) {
            start = start.min(c.panel_offset);
            end = end.max(c.panel_offset + c.panel_count());
        }
        if start == usize::MAX {
            0..0
        } else {
            start..end
        }
    }

    pub fn winglet_panels(&self, side: Side) -> std::ops::Range<usize> {
        self.group_range(1 + side.index())
    }

    /// Largest out-of-plane distance of a geometric panel corner, relative to the panel diagonal.
    pub fn max_nonplanarity(&self) -> f64 {
        self.panels
            .iter()
            .map(|p| {
                let [a, b, c, d] = p.corners;
                let n = (c - a).cross(&(b - d));
                let scale = (c - a).norm().max((b - d).norm());
                let n = n / n.norm();
                let mid = 0.25 * (a + b + c + d);
                [a, b, c, d]
                    .iter()
                    .map(|q| (q - mid).dot(&n).abs() / scale)
                    .fold(0.0, f64::max)
            })
            .fold(0.0, f64::max)
    }

    /// Projected (y-extent) span of the lattice.
    pub fn projected_span(&self) -> f64 {
        let (lo, hi) = self.panels.iter().flat_map(|p| p.corners.iter()).fold(
            (f64::INFINITY, f64::NEG_INFINITY),
            |(lo, hi), q| (lo.min(q.y), hi.max(q.y)),
        );
        hi - lo
    }

    /// Lattice reflected through the x-z plane, re-indexed as the mirror configuration.
    pub fn mirrored(&self) -> LatticeGeometry {
        let m = |v: &Vec3| Vec3::new(v.x, -v.y, v.z);
        let mut comps = Vec::with_capacity(self.components.len());
        for tag in ComponentTag::ALL {
            let src = self.component(tag.mirror());
            let dst_offset = self.component(tag).panel_offset;
            let mut nodes = Vec::with_capacity(src.nodes.len());
            let mut ring_nodes = Vec::with_capacity(src.nodes.len());
            for i in 0..=src.m {
                for j in 0..=src.n {
                    let jj = if tag == ComponentTag::Fin { j } else { src.n - j };
                    nodes.push(m(&src.node(i, jj)));
                    ring_nodes.push(m(&src.ring_node(i, jj)));
                }
            }
            comps.push(ComponentLattice {
                tag,
                m: src.m,
                n: src.n,
                panel_offset: dst_offset,
                nodes,
                ring_nodes,
            });
        }
        let axial = |h: &HingeLine| HingeLine { point: m(&h.point), axis: -m(&h.axis) };
        let hinges = [axial(&self.winglet_hinges[1]), axial(&self.winglet_hinges[0])];
        let surfaces = self.surfaces.clone();
        let mut out = finish_lattice(comps, hinges, surfaces, [self.morph[1], self.morph[0]]);
        // surface membership follows the mirrored panels
        for s in &mut out.surfaces {
            let src_id = match s.id {
                SurfaceId::AileronLeft => SurfaceId::AileronRight,
                SurfaceId::AileronRight => SurfaceId::AileronLeft,
                other => other,
            };
            let src = self.surface(src_id);
            s.line = HingeLine { point: m(&src.line.point), axis: m(&src.line.axis) };
            if s.id == SurfaceId::Rudder {
                s.line.axis = -s.line.axis;
            }
        }
        out
    }
}

fn rotate_about_y(p: Vec3, pivot: Vec3, angle: f64) -> Vec3 {
    if angle == 0.0 {
        return p;
    }
    let r = Rotation3::from_axis_angle(&Vec3::y_axis(), angle);
    pivot + r * (p - pivot)
}

/// Outboard wing edge along the winglet hinge line at chord fraction `f` (right side).
fn hinge_boundary(config: &AircraftConfig, hinge: &HingeLine, f: f64) -> Vec3 {
    let a = hinge.axis;
    let le = config.wing.leading_edge_x;
    let mut y = hinge.point.y;
    for _ in 0..50 {
        let x = le - f * config.chord_at(y);
        let next = hinge.point.y + (x - hinge.point.x) * a.y / a.x;
        if next == y {
            break;
        }
        y = next;
    }
    Vec3::new(le - f * config.chord_at(y), y, 0.0)
}

fn wing_incidence(config: &AircraftConfig, p: Vec3) -> Vec3 {
    let inc = config.wing.incidence_deg.to_radians();
    let qc = config.wing.leading_edge_x - 0.25 * config.chord_at(p.y);
    rotate_about_y(p, Vec3::new(qc, p.y, 0.0), inc)
}

/// Hinge line of the right winglet; the left is its axial mirror.
fn winglet_hinge(config: &AircraftConfig, side: Side) -> HingeLine {
    let w = config.winglet(side);
    let x = config.wing.leading_edge_x - 0.5 * config.chord_at(w.hinge_y);
    HingeLine {
        point: Vec3::new(x, w.hinge_y, 0.0),
        axis: Vec3::new(w.hinge_axis[0], w.hinge_axis[1], w.hinge_axis[2]),
    }
}

fn grid(m: usize, n: usize, f: impl Fn(usize, usize) -> Vec3) -> Vec<Vec3> {
    let mut out = Vec::with_capacity((m + 1) * (n + 1));
    for i in 0..=m {
        for j in 0..=n {
            out.push(f(i, j));
        }
    }
    out
}

fn right_nodes(config: &AircraftConfig, tag: ComponentTag) -> (usize, usize, Vec<Vec3>) {
    let (m, n) = config.component_resolution(tag);
    let hinge = winglet_hinge(config, Side::Right);
    let half = config.half_span();
    let nodes = match tag {
        ComponentTag::WingRight => grid(m, n, |i, j| {
            let f = i as f64 / m as f64;
            let s = j as f64 / n as f64;
            let edge = hinge_boundary(config, &hinge, f);
            let y = if j == n { edge.y } else { s * edge.y };
            wing_incidence(config, Vec3::new(config.wing.leading_edge_x - f * config.chord_at(y), y, 0.0))
        }),
        ComponentTag::WingletRight => grid(m, n, |i, j| {
            let f = i as f64 / m as f64;
            let s = j as f64 / n as f64;
            let edge = hinge_boundary(config, &hinge, f);
            let y = if j == n { half } else { edge.y + s * (half - edge.y) };
            wing_incidence(config, Vec3::new(config.wing.leading_edge_x - f * config.chord_at(y), y, 0.0))
        }),
        ComponentTag::TailRight => {
            let t = &config.tail;
            let pivot = Vec3::new(t.leading_edge_x - 0.25 * t.chord, 0.0, t.z);
            grid(m, n, |i, j| {
                let f = i as f64 / m as f64;
                let y = 0.5 * t.span * j as f64 / n as f64;
                let p = Vec3::new(t.leading_edge_x - f * t.chord, y, t.z);
                rotate_about_y(p, Vec3::new(pivot.x, y, pivot.z), t.incidence_deg.to_radians())
            })
        }
        ComponentTag::Fin => {
            let fin = &config.fin;
            grid(m, n, |i, j| {
                let f = i as f64 / m as f64;
                let s = j as f64 / n as f64;
                Vec3::new(fin.leading_edge_x - f * fin.chord, 0.0, fin.z_root - s * fin.height)
            })
        }
        _ => unreachable!("left components are mirrored"),
    };
    (m, n, nodes)
}

fn ring_nodes(m: usize, n: usize, nodes: &[Vec3]) -> Vec<Vec3> {
    let at = |i: usize, j: usize| nodes[i * (n + 1) + j];
    grid(m, n, |i, j| {
        if i < m {
            at(i, j) + 0.25 * (at(i + 1, j) - at(i, j))
        } else {
            at(m, j) + 0.25 * (at(m, j) - at(m - 1, j))
        }
    })
}

fn finish_lattice(
    comps: Vec<ComponentLattice>,
    winglet_hinges: [HingeLine; 2],
    surfaces: Vec<SurfaceHinge>,
    morph: [f64; 2],
) -> LatticeGeometry {
    let mut panels = Vec::new();
    for (ci, c) in comps.iter().enumerate() {
        for i in 0..c.m {
            for j in 0..c.n {
                let corners = [c.node(i, j), c.node(i, j + 1), c.node(i + 1, j + 1), c.node(i + 1, j)];
                let ring = [
                    c.ring_node(i, j),
                    c.ring_node(i, j + 1),
                    c.ring_node(i + 1, j + 1),
                    c.ring_node(i + 1, j),
                ];
                let [a, b, cc, d] = corners;
                let cross = (cc - a).cross(&(b - d));
                let area = 0.5 * cross.norm();
                let normal = cross / cross.norm();
                let left = a + 0.75 * (d - a);
                let right = b + 0.75 * (cc - b);
                let collocation = 0.5 * (left + right);
                let centroid = 0.25 * (a + b + cc + d);
                panels.push(Panel {
                    component: ci,
                    tag: c.tag,
                    row: i,
                    col: j,
                    ring,
                    corners,
                    collocation,
                    normal,
                    area,
                    centroid,
                    surface: None,
                });
            }
        }
    }
    for s in &surfaces {
        for &p in &s.panels {
            panels[p].surface = Some(s.id);
        }
    }
    LatticeGeometry { components: comps, panels, winglet_hinges, surfaces, morph }
}

/// Reference lattice with both winglets at zero deflection.
pub fn reference_lattice(config: &AircraftConfig) -> LatticeGeometry {
    build_lattice(config, 0.0, 0.0)
}

fn build_lattice(config: &AircraftConfig, delta_left: f64, delta_right: f64) -> LatticeGeometry {
    let mirror = |v: &Vec3| Vec3::new(v.x, -v.y, v.z);
    let hinges = [winglet_hinge(config, Side::Left), winglet_hinge(config, Side::Right)];
    let mut comps = Vec::new();
    let mut offset = 0;
    for tag in ComponentTag::ALL {
        let (m, n, mut nodes) = match tag {
            ComponentTag::WingLeft | ComponentTag::TailLeft | ComponentTag::WingletLeft => {
                let (m, n, right) = right_nodes(config, tag.mirror());
                let nodes = grid(m, n, |i, j| mirror(&right[i * (n + 1) + (n - j)]));
                (m, n, nodes)
            }
            _ => right_nodes(config, tag),
        };
        let delta = match tag {
            ComponentTag::WingletLeft => delta_left,
            ComponentTag::WingletRight => delta_right,
            _ => 0.0,
        };
        if delta != 0.0 {
            let h = hinges[tag.group() - 1];
            for p in nodes.iter_mut() {
                *p = h.rotate(p, delta);
            }
        }
        let rings = ring_nodes(m, n, &nodes);
        comps.push(ComponentLattice { tag, m, n, panel_offset: offset, nodes, ring_nodes: rings });
        offset += m * n;
    }
    let mut surfaces = Vec::new();
    for id in SurfaceId::ALL {
        let s = config.surface(id);
        let mut panel_ids = Vec::new();
        for p in &s.patches {
            let c = comps.iter().find(|c| c.tag == p.component).expect("component exists");
            for i in p.chord_rows[0]..p.chord_rows[1] {
                for j in p.span_panels[0]..p.span_panels[1] {
                    panel_ids.push(c.panel_index(i, j));
                }
            }
        }
        let first = &s.patches[0];
        let c = comps.iter().find(|c| c.tag == first.component).expect("component exists");
        let r0 = first.chord_rows[0];
        let a = c.node(r0, first.span_panels[0]);
        let b = c.node(r0, first.span_panels[1]);
        let mut axis = (b - a).normalize();
        let hint = Vec3::new(s.positive_axis[0], s.positive_axis[1], s.positive_axis[2]);
        if axis.dot(&hint) < 0.0 {
            axis = -axis;
        }
        surfaces.push(SurfaceHinge { id, line: HingeLine { point: a, axis }, panels: panel_ids });
    }
    finish_lattice(comps, hinges, surfaces, [delta_left, delta_right])
}

/// Flat untwisted rectangular wing with its quarter chord on the y axis, as two halves.
pub fn rectangular_wing(span: f64, chord: f64, chordwise: usize, spanwise_half: usize) -> LatticeGeometry {
    let (m, n) = (chordwise, spanwise_half);
    let right = grid(m, n, |i, j| Vec3::new(0.25 * chord - chord * i as f64 / m as f64, 0.5 * span * j as f64 / n as f64, 0.0));
    let left = grid(m, n, |i, j| {
        let p = right[i * (n + 1) + (n - j)];
        Vec3::new(p.x, -p.y, p.z)
    });
    let mut comps = Vec::new();
    for (k, (tag, nodes)) in [(ComponentTag::WingLeft, left), (ComponentTag::WingRight, right)].into_iter().enumerate() {
        let rings = ring_nodes(m, n, &nodes);
        comps.push(ComponentLattice { tag, m, n, panel_offset: k * m * n, nodes, ring_nodes: rings });
    }
    let tip = |y: f64| HingeLine { point: Vec3::new(0.0, y, 0.0), axis: Vec3::x() };
    finish_lattice(comps, [tip(-0.5 * span), tip(0.5 * span)], Vec::new(), [0.0; 2])
}

/// Lattice with the winglets rigidly rotated about their hinge lines.
///
/// A frozen config ignores the request and uses its locked angle.
pub fn morph_geometry(config: &AircraftConfig, delta_left: f64, delta_right: f64) -> Result<LatticeGeometry> {
    let (dl, dr) = match config.morph_lock {
        Some(lock) => (lock, lock),
        None => (delta_left, delta_right),
    };
    let (lo, hi) = config.morph_bounds();
    for d in [dl, dr] {
        if !(d >= lo - 1e-12 && d <= hi + 1e-12) {
            return Err(Error::MorphBound {
                angle_deg: d.to_degrees(),
                lower_deg: config.actuators.morphing.lower_deg,
                upper_deg: config.actuators.morphing.upper_deg,
            });
        }
    }
    Ok(build_lattice(config, dl, dr))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::vehicle::config::{default_config, freeze_morphing};
    use std::f64::consts::FRAC_PI_2;

    fn no_flare() -> AircraftConfig {
        let mut c = default_config();
        c.actuators.morphing.upper_deg = 90.0;
        for w in &mut c.winglets {
            w.hinge_axis = match w.side {
                Side::Left => [1.0, 0.0, 0.0],
                Side::Right => [-1.0, 0.0, 0.0],
            };
        }
        c.validate().unwrap();
        c
    }

    #[test]
    fn default_panel_counts() {
        let l = reference_lattice(&default_config());
        assert_eq!(l.panel_count(), 2 * 32 + 2 * 12 + 12 + 8);
        assert_eq!(l.group_range(0), 0..84);
        assert_eq!(l.winglet_panels(Side::Left), 84..96);
        assert_eq!(l.winglet_panels(Side::Right), 96..108);
    }

    #[test]
    fn zero_morph_is_bit_identical() {
        let c = default_config();
        assert_eq!(morph_geometry(&c, 0.0, 0.0).unwrap(), reference_lattice(&c));
    }

    #[test]
    fn normals_point_up_on_lifting_surfaces() {
        let l = reference_lattice(&default_config());
        for p in &l.panels {
            match p.tag {
                ComponentTag::Fin => assert!(p.normal.y < -0.99),
                _ => assert!(p.normal.z < -0.99, "{:?}", p.tag),
            }
        }
    }

    #[test]
    fn panels_are_planar() {
        let c = default_config();
        for (a, b) in [(0.0, 0.0), (0.7, -0.3), (-1.0, 1.0)] {
            let l = morph_geometry(&c, a, b).unwrap();
            assert!(l.max_nonplanarity() < 1e-9);
        }
    }

    #[test]
    fn quarter_turn_raises_tip_by_winglet_span() {
        let c = no_flare();
        let flat = reference_lattice(&c);
        let up = morph_geometry(&c, FRAC_PI_2, FRAC_PI_2).unwrap();
        let span_w = 0.2 * 16.0;
        for tag in [ComponentTag::WingletLeft, ComponentTag::WingletRight] {
            let tip_j = if tag == ComponentTag::WingletRight { up.component(tag).n } else { 0 };
            let tip = up.component(tag).node(0, tip_j);
            assert!((tip.z - (-span_w)).abs() < 1e-12, "{tip:?}");
        }
        assert!((flat.projected_span() - up.projected_span() - 2.0 * span_w).abs() < 1e-12);
    }

    #[test]
    fn tip_up_for_positive_deflection() {
        let c = default_config();
        let l = morph_geometry(&c, 0.3, 0.3).unwrap();
        let r = l.component(ComponentTag::WingletRight);
        let lw = l.component(ComponentTag::WingletLeft);
        assert!(r.node(1, r.n).z < -0.5);
        assert!(lw.node(1, 0).z < -0.5);
    }

    #[test]
    fn morph_preserves_edge_lengths() {
        let c = default_config();
        let a = reference_lattice(&c);
        let b = morph_geometry(&c, 0.9, -0.4).unwrap();
        for (pa, pb) in a.panels.iter().zip(&b.panels) {
            for k in 0..4 {
                let la = (pa.corners[(k + 1) % 4] - pa.corners[k]).norm();
                let lb = (pb.corners[(k + 1) % 4] - pb.corners[k]).norm();
                assert!((la - lb).abs() <= 1e-12 * la);
            }
        }
        for p in &a.panels[..84] {
            assert_eq!(p, &b.panels[p.component_index_in(&a)]);
        }
    }

    impl Panel {
        fn component_index_in(&self, l: &LatticeGeometry) -> usize {
            l.components[self.component].panel_index(self.row, self.col)
        }
    }

    #[test]
    fn mirrored_inputs_mirror_the_lattice() {
        let c = default_config();
        let d = 0.35;
        let a = morph_geometry(&c, d, -d).unwrap();
        let b = morph_geometry(&c, -d, d).unwrap();
        let m = a.mirrored();
        for (p, q) in m.panels.iter().zip(&b.panels) {
            for k in 0..4 {
                assert!((p.ring[k] - q.ring[k]).norm() < 1e-12);
            }
            assert!((p.collocation - q.collocation).norm() < 1e-12);
            assert!((p.normal - q.normal).norm() < 1e-12 || p.tag == ComponentTag::Fin);
        }
        assert!(a.mirrored().panels.iter().zip(&a.panels).any(|(p, q)| (p.collocation - q.collocation).norm() > 1e-3));
    }

    #[test]
    fn bound_violation_rejected() {
        let c = default_config();
        assert!(matches!(morph_geometry(&c, 1.2, 0.0), Err(Error::MorphBound { .. })));
    }

    #[test]
    fn frozen_config_ignores_request() {
        let c = freeze_morphing(&default_config(), 0.0);
        let l = morph_geometry(&c, 0.5, -0.5).unwrap();
        assert_eq!(l, reference_lattice(&c));
        assert_eq!(l.morph, [0.0, 0.0]);
    }

    #[test]
    fn rectangular_wing_is_flat_and_mirrored() {
        let l = rectangular_wing(20.0, 1.0, 4, 10);
        assert_eq!(l.panel_count(), 80);
        assert!(l.panels.iter().all(|p| (p.normal + Vec3::z()).norm() < 1e-15));
        let area: f64 = l.panels.iter().map(|p| p.area).sum();
        assert!((area - 20.0).abs() < 1e-12);
    }

    #[test]
    fn surfaces_cover_expected_panels() {
        let l = reference_lattice(&default_config());
        assert_eq!(l.surface(SurfaceId::Elevator).panels.len(), 6);
        assert_eq!(l.surface(SurfaceId::AileronLeft).panels.len(), 4);
        assert_eq!(l.surface(SurfaceId::Rudder).panels.len(), 4);
        let ar = l.surface(SurfaceId::AileronRight);
        assert!((ar.line.axis - Vec3::y()).norm() < 1e-12);
        assert!((l.surface(SurfaceId::Rudder).line.axis - Vec3::z()).norm() < 1e-12);
        for &p in &ar.panels {
            let y = l.panels[p].centroid.y;
            assert!(y > 9.6 && y < 12.8);
            assert_eq!(l.panels[p].row, 1);
        }
    }

    #[test]
    fn winglet_stays_attached_at_hinge() {
        let c = default_config();
        let l = morph_geometry(&c, -0.8, 0.6).unwrap();
        let w = l.component(ComponentTag::WingRight);
        let wl = l.component(ComponentTag::WingletRight);
        for i in 0..=w.m {
            assert!((w.node(i, w.n) - wl.node(i, 0)).norm() < 1e-12);
        }
    }
}
