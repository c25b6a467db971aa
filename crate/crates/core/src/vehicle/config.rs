use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::Vec3;

pub const SCHEMA_VERSION: u32 = 1;

/// The shipped HALE-like configuration (rigid wing).
pub const DEFAULT_CONFIG: &str = include_str!("../../configs/hale.toml");
/// Same aircraft with the modal bending surrogate switched on.
pub const ELASTIC_CONFIG: &str = include_str!("../../configs/hale_elastic.toml");

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Side {
    Left,
    Right,
}

impl Side {
    pub fn index(self) -> usize {
        match self {
            Side::Left => 0,
            Side::Right => 1,
        }
    }

    pub fn sign(self) -> f64 {
        match self {
            Side::Left => -1.0,
            Side::Right => 1.0,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ComponentTag {
    WingLeft,
    WingRight,
    TailLeft,
    TailRight,
    Fin,
    WingletLeft,
    WingletRight,
}

impl ComponentTag {
    pub const ALL: [ComponentTag; 7] = [
        ComponentTag::WingLeft,
        ComponentTag::WingRight,
        ComponentTag::TailLeft,
        ComponentTag::TailRight,
        ComponentTag::Fin,
        ComponentTag::WingletLeft,
        ComponentTag::WingletRight,
    ];

    /// Coarse tag: wing / winglet-L / winglet-R / tail / fin.
    pub fn kind(self) -> &'static str {
        match self {
            ComponentTag::WingLeft | ComponentTag::WingRight => "wing",
            ComponentTag::WingletLeft => "winglet-L",
            ComponentTag::WingletRight => "winglet-R",
            ComponentTag::TailLeft | ComponentTag::TailRight => "tail",
            ComponentTag::Fin => "fin",
        }
    }

    /// Influence group: 0 = fixed geometry, 1 = left winglet, 2 = right winglet.
    pub fn group(self) -> usize {
        match self {
            ComponentTag::WingletLeft => 1,
            ComponentTag::WingletRight => 2,
            _ => 0,
        }
    }

    pub fn side(self) -> Option<Side> {
        match self {
            ComponentTag::WingLeft | ComponentTag::TailLeft | ComponentTag::WingletLeft => {
                Some(Side::Left)
            }
            ComponentTag::WingRight | ComponentTag::TailRight | ComponentTag::WingletRight => {
                Some(Side::Right)
            }
            ComponentTag::Fin => None,
        }
    }

    pub fn mirror(self) -> ComponentTag {
        match self {
            ComponentTag::WingLeft => ComponentTag::WingRight,
            ComponentTag::WingRight => ComponentTag::WingLeft,
            ComponentTag::TailLeft => ComponentTag::TailRight,
            ComponentTag::TailRight => ComponentTag::TailLeft,
            ComponentTag::WingletLeft => ComponentTag::WingletRight,
            ComponentTag::WingletRight => ComponentTag::WingletLeft,
            ComponentTag::Fin => ComponentTag::Fin,
        }
    }
}

/// Conventional control surfaces; the winglets are driven by the morphing channels.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum SurfaceId {
    Elevator,
    AileronLeft,
    AileronRight,
    Rudder,
}

impl SurfaceId {
    pub const ALL: [SurfaceId; 4] = [
        SurfaceId::Elevator,
        SurfaceId::AileronLeft,
        SurfaceId::AileronRight,
        SurfaceId::Rudder,
    ];

    /// Index into the control vector.
    pub fn channel(self) -> usize {
        match self {
            SurfaceId::Elevator => 0,
            SurfaceId::AileronLeft => 1,
            SurfaceId::AileronRight => 2,
            SurfaceId::Rudder => 3,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Environment {
    pub air_density: f64,
    pub gravity: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct MassProperties {
    pub mass: f64,
    pub inertia: [[f64; 3]; 3],
    pub cg: [f64; 3],
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct WingConfig {
    pub span: f64,
    /// Piecewise-linear chord law as (|y|, chord) stations.
    pub chord: Vec<[f64; 2]>,
    pub leading_edge_x: f64,
    #[serde(default)]
    pub incidence_deg: f64,
    pub chordwise_panels: usize,
    /// Per half wing, inboard of the winglet hinge.
    pub spanwise_panels: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct WingletConfig {
    pub side: Side,
    pub span_fraction: f64,
    pub hinge_y: f64,
    /// Rotation axis for positive (tip-up) deflection, body frame.
    pub hinge_axis: [f64; 3],
    pub spanwise_panels: usize,
    pub chordwise_panels: usize,
    pub mass: f64,
    pub hinge_inertia: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct TailConfig {
    pub span: f64,
    pub chord: f64,
    pub leading_edge_x: f64,
    pub z: f64,
    #[serde(default)]
    pub incidence_deg: f64,
    pub chordwise_panels: usize,
    /// Across the full tail span; must be even.
    pub spanwise_panels: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct FinConfig {
    pub height: f64,
    pub chord: f64,
    pub leading_edge_x: f64,
    pub z_root: f64,
    pub chordwise_panels: usize,
    pub spanwise_panels: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct PatchConfig {
    pub component: ComponentTag,
    /// Half-open chordwise row range.
    pub chord_rows: [usize; 2],
    /// Half-open spanwise panel range.
    pub span_panels: [usize; 2],
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ControlSurfaceConfig {
    pub id: SurfaceId,
    /// Direction the hinge line is oriented along so that positive rotation is the
    /// positive deflection (trailing edge down, or trailing edge left for the rudder).
    pub positive_axis: [f64; 3],
    pub patches: Vec<PatchConfig>,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SurfaceLimit {
    pub deflection_deg: f64,
    pub rate_deg_s: f64,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct MorphLimit {
    pub lower_deg: f64,
    pub upper_deg: f64,
    pub rate_deg_s: f64,
    /// Tighter lower bound some trim studies use; informational unless selected.
    #[serde(default)]
    pub alternative_lower_deg: Option<f64>,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ActuatorLimits {
    pub elevator: SurfaceLimit,
    pub aileron: SurfaceLimit,
    pub rudder: SurfaceLimit,
    pub morphing: MorphLimit,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ThrustConfig {
    pub point: [f64; 3],
    pub min: f64,
    pub max: f64,
    /// Let the optimizer move thrust during maneuvers.
    #[serde(default)]
    pub active_in_maneuvers: bool,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct FlexibilityConfig {
    pub enabled: bool,
    /// First symmetric bending mode per half wing, normalized to unit tip deflection.
    pub modal_stiffness: f64,
    pub modal_mass: f64,
    #[serde(default)]
    pub damping_ratio: f64,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum PowerModel {
    Rectified,
    Signed,
    Absolute,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct AeroSettings {
    pub reference_speed: f64,
    pub wake_chords: f64,
    #[serde(default = "default_sub_iterations")]
    pub sub_iterations: usize,
    #[serde(default = "default_power_model")]
    pub power_model: PowerModel,
    /// Spacing of the morph influence tables.
    #[serde(default = "default_table_step")]
    pub table_step_deg: f64,
    #[serde(default = "default_cross_table_step")]
    pub cross_table_step_deg: f64,
}

fn default_sub_iterations() -> usize {
    1
}
fn default_power_model() -> PowerModel {
    PowerModel::Rectified
}
fn default_table_step() -> f64 {
    2.0
}
fn default_cross_table_step() -> f64 {
    6.0
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct TrimSettings {
    pub nominal_speed: f64,
    pub gain: f64,
    pub max_iterations: usize,
    pub alpha_bounds_deg: [f64; 2],
    pub tolerance_w: f64,
    pub tolerance_q_deg: f64,
    pub startup_time: f64,
    pub horizon: f64,
    pub weight_trend: f64,
    pub weight_oscillation: f64,
    pub epsilon: f64,
    #[serde(default = "default_dynamic_iterations")]
    pub dynamic_max_iterations: usize,
}

fn default_dynamic_iterations() -> usize {
    15
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct AircraftConfig {
    pub schema_version: u32,
    pub name: String,
    pub environment: Environment,
    pub mass: MassProperties,
    pub wing: WingConfig,
    pub winglets: Vec<WingletConfig>,
    pub tail: TailConfig,
    pub fin: FinConfig,
    pub control_surfaces: Vec<ControlSurfaceConfig>,
    pub actuators: ActuatorLimits,
    pub thrust: ThrustConfig,
    pub flexibility: FlexibilityConfig,
    pub aero: AeroSettings,
    pub trim: TrimSettings,
    /// Set by `freeze_morphing`: both winglets held at this angle (rad).
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub morph_lock: Option<f64>,
}

fn invalid(msg: impl Into<String>) -> Error {
    Error::Validation(msg.into())
}

fn v3(a: [f64; 3]) -> Vec3 {
    Vec3::new(a[0], a[1], a[2])
}

impl AircraftConfig {
    pub fn half_span(&self) -> f64 {
        0.5 * self.wing.span
    }

    /// Chord at spanwise station |y|.
    pub fn chord_at(&self, y: f64) -> f64 {
        let y = y.abs();
        let st = &self.wing.chord;
        if y <= st[0][0] {
            return st[0][1];
        }
        for w in st.windows(2) {
            if y <= w[1][0] {
                let f = (y - w[0][0]) / (w[1][0] - w[0][0]);
                return w[0][1] + f * (w[1][1] - w[0][1]);
            }
        }
        st[st.len() - 1][1]
    }

    pub fn reference_chord(&self) -> f64 {
        self.wing.chord[0][1]
    }

    pub fn reference_area(&self) -> f64 {
        let st = &self.wing.chord;
        let mut area = 0.0;
        for w in st.windows(2) {
            area += 0.5 * (w[0][1] + w[1][1]) * (w[1][0] - w[0][0]);
        }
        2.0 * area
    }

    pub fn inertia(&self) -> nalgebra::Matrix3<f64> {
        let i = self.mass.inertia;
        nalgebra::Matrix3::new(
            i[0][0], i[0][1], i[0][2], i[1][0], i[1][1], i[1][2], i[2][0], i[2][1], i[2][2],
        )
    }

    pub fn cg(&self) -> Vec3 {
        v3(self.mass.cg)
    }

    pub fn winglet(&self, side: Side) -> &WingletConfig {
        self.winglets
            .iter()
            .find(|w| w.side == side)
            .expect("validated config has both winglets")
    }

    pub fn surface(&self, id: SurfaceId) -> &ControlSurfaceConfig {
        self.control_surfaces
            .iter()
            .find(|s| s.id == id)
            .expect("validated config has every control surface")
    }

    /// Morph bounds in radians.
    pub fn morph_bounds(&self) -> (f64, f64) {
        (
            self.actuators.morphing.lower_deg.to_radians(),
            self.actuators.morphing.upper_deg.to_radians(),
        )
    }

    pub fn morphing_enabled(&self) -> bool {
        self.morph_lock.is_none()
    }

    /// Chordwise panel count that ties the time step to the shedding rate.
    pub fn shedding_panels(&self) -> usize {
        self.wing.chordwise_panels
    }

    /// dt = c / (m_chord U) scaled by `dt_scale`.
    pub fn time_step(&self, speed: f64, dt_scale: f64) -> f64 {
        dt_scale * self.reference_chord() / (self.shedding_panels() as f64 * speed)
    }

    pub fn validate(&self) -> Result<()> {
        if self.schema_version != SCHEMA_VERSION {
            return Err(invalid(format!(
                "schema_version {} unsupported (expected {SCHEMA_VERSION})",
                self.schema_version
            )));
        }
        let env = &self.environment;
        if !(env.air_density > 0.0) || !(env.gravity >= 0.0) {
            return Err(invalid("air_density must be > 0 and gravity >= 0"));
        }
        if !(self.wing.span > 0.0) {
            return Err(invalid("wing span b must be > 0"));
        }
        if !(self.mass.mass > 0.0) {
            return Err(invalid("mass must be > 0"));
        }
        let inertia = self.inertia();
        if (inertia - inertia.transpose()).abs().max() > 1e-9 * inertia.abs().max() {
            return Err(invalid("inertia tensor must be symmetric"));
        }
        if inertia.cholesky().is_none() {
            return Err(invalid("inertia tensor must be positive definite"));
        }
        if self.mass.cg[1] != 0.0 || inertia[(0, 1)] != 0.0 || inertia[(1, 2)] != 0.0 {
            return Err(invalid(
                "lateral symmetry requires cg_y = 0 and Ixy = Iyz = 0",
            ));
        }
        self.validate_wing()?;
        self.validate_winglets()?;
        self.validate_tail()?;
        self.validate_surfaces()?;
        self.validate_actuators()?;
        if !(self.thrust.max >= self.thrust.min) {
            return Err(invalid("thrust max must be >= min"));
        }
        if self.thrust.point[1] != 0.0 {
            return Err(invalid("lateral symmetry requires thrust point y = 0"));
        }
        let flex = &self.flexibility;
        if flex.enabled && !(flex.modal_stiffness > 0.0 && flex.modal_mass > 0.0) {
            return Err(invalid("flexibility requires modal stiffness and mass > 0"));
        }
        let aero = &self.aero;
        if !(aero.reference_speed > 0.0) || !(aero.wake_chords > 0.0) {
            return Err(invalid("aero reference speed and wake length must be > 0"));
        }
        if !(aero.table_step_deg > 0.0) || !(aero.cross_table_step_deg > 0.0) {
            return Err(invalid("morph table steps must be > 0"));
        }
        let t = &self.trim;
        if !(t.gain > 0.0) || t.max_iterations == 0 {
            return Err(invalid("trim gain must be > 0 and max_iterations >= 1"));
        }
        if !(t.alpha_bounds_deg[0] < t.alpha_bounds_deg[1]) {
            return Err(invalid("trim alpha bounds must be increasing"));
        }
        if !(t.horizon > t.startup_time) || t.startup_time < 0.0 {
            return Err(invalid("trim horizon must exceed the startup time"));
        }
        if !(t.epsilon > 0.0) || t.weight_trend < 0.0 || t.weight_oscillation < 0.0 {
            return Err(invalid("trim cost weights must be >= 0 and epsilon > 0"));
        }
        if let Some(lock) = self.morph_lock {
            let (lo, hi) = self.morph_bounds();
            if !(lock >= lo && lock <= hi) {
                return Err(invalid("morph lock outside the morphing bounds"));
            }
        }
        Ok(())
    }

    fn validate_wing(&self) -> Result<()> {
        let w = &self.wing;
        if w.chord.len() < 2 {
            return Err(invalid("wing chord law needs at least two stations"));
        }
        if w.chord[0][0] != 0.0 || (w.chord[w.chord.len() - 1][0] - 0.5 * w.span).abs() > 1e-9 {
            return Err(invalid("wing chord stations must run from 0 to b/2"));
        }
        for pair in w.chord.windows(2) {
            if !(pair[1][0] > pair[0][0]) {
                return Err(invalid("wing chord stations must increase"));
            }
        }
        if w.chord.iter().any(|s| !(s[1] > 0.0)) {
            return Err(invalid("wing chord must be > 0"));
        }
        if w.chordwise_panels == 0 || w.spanwise_panels == 0 {
            return Err(invalid("wing lattice resolution must be >= 1"));
        }
        Ok(())
    }

    fn validate_winglets(&self) -> Result<()> {
        let left: Vec<_> = self.winglets.iter().filter(|w| w.side == Side::Left).collect();
        let right: Vec<_> = self.winglets.iter().filter(|w| w.side == Side::Right).collect();
        if left.len() != 1 || right.len() != 1 || self.winglets.len() != 2 {
            return Err(invalid(format!(
                "lateral symmetry: expected exactly one left and one right winglet, found {} left and {} right",
                left.len(),
                right.len()
            )));
        }
        let (l, r) = (left[0], right[0]);
        for w in [l, r] {
            if !(w.span_fraction > 0.0 && w.span_fraction < 1.0) {
                return Err(invalid("winglet span fraction must lie in (0, 1)"));
            }
            let expected = w.side.sign() * 0.5 * self.wing.span * (1.0 - w.span_fraction);
            if (w.hinge_y - expected).abs() > 1e-9 * self.wing.span {
                return Err(invalid(format!(
                    "winglet hinge_y {} inconsistent with span fraction (expected {expected})",
                    w.hinge_y
                )));
            }
            let a = v3(w.hinge_axis);
            if (a.norm() - 1.0).abs() > 1e-9 {
                return Err(invalid("winglet hinge axis must be a unit vector"));
            }
            if a[0].abs() < 0.5 {
                return Err(invalid("winglet hinge axis must run predominantly along x"));
            }
            if w.spanwise_panels == 0 || w.chordwise_panels == 0 {
                return Err(invalid("winglet lattice resolution must be >= 1"));
            }
            if !(w.mass >= 0.0 && w.hinge_inertia >= 0.0) {
                return Err(invalid("winglet mass and hinge inertia must be >= 0"));
            }
        }
        // axial-vector mirror: a_L = -diag(1,-1,1) a_R
        let ar = r.hinge_axis;
        let mirrored = [-ar[0], ar[1], -ar[2]];
        let axis_err = (0..3).map(|i| (l.hinge_axis[i] - mirrored[i]).abs()).fold(0.0, f64::max);
        if axis_err > 1e-12
            || l.span_fraction != r.span_fraction
            || l.hinge_y != -r.hinge_y
            || l.spanwise_panels != r.spanwise_panels
            || l.chordwise_panels != r.chordwise_panels
            || l.mass != r.mass
            || l.hinge_inertia != r.hinge_inertia
        {
            return Err(invalid("lateral symmetry: left and right winglets are not mirror images"));
        }
        Ok(())
    }

    fn validate_tail(&self) -> Result<()> {
        let t = &self.tail;
        if !(t.span > 0.0 && t.chord > 0.0) || t.chordwise_panels == 0 {
            return Err(invalid("tail span/chord must be > 0 and resolution >= 1"));
        }
        if t.spanwise_panels == 0 || t.spanwise_panels % 2 != 0 {
            return Err(invalid("tail spanwise panel count must be even and >= 2"));
        }
        let f = &self.fin;
        if !(f.height > 0.0 && f.chord > 0.0) || f.chordwise_panels == 0 || f.spanwise_panels == 0 {
            return Err(invalid("fin height/chord must be > 0 and resolution >= 1"));
        }
        Ok(())
    }

    pub(crate) fn component_resolution(&self, tag: ComponentTag) -> (usize, usize) {
        match tag {
            ComponentTag::WingLeft | ComponentTag::WingRight => {
                (self.wing.chordwise_panels, self.wing.spanwise_panels)
            }
            ComponentTag::TailLeft | ComponentTag::TailRight => {
                (self.tail.chordwise_panels, self.tail.spanwise_panels / 2)
            }
            ComponentTag::Fin => (self.fin.chordwise_panels, self.fin.spanwise_panels),
            ComponentTag::WingletLeft => {
                let w = self.winglet(Side::Left);
                (w.chordwise_panels, w.spanwise_panels)
            }
            ComponentTag::WingletRight => {
                let w = self.winglet(Side::Right);
                (w.chordwise_panels, w.spanwise_panels)
            }
        }
    }

    fn validate_surfaces(&self) -> Result<()> {
        for id in SurfaceId::ALL {
            let n = self.control_surfaces.iter().filter(|s| s.id == id).count();
            if n != 1 {
                return Err(invalid(format!(
                    "control surface {id:?} must map to exactly one patch set (found {n})"
                )));
            }
        }
        let mut claimed = std::collections::HashSet::new();
        for s in &self.control_surfaces {
            if s.patches.is_empty() {
                return Err(invalid(format!("control surface {:?} has an empty patch", s.id)));
            }
            if (v3(s.positive_axis).norm() - 1.0).abs() > 1e-9 {
                return Err(invalid(format!("{:?} positive_axis must be a unit vector", s.id)));
            }
            for p in &s.patches {
                if p.component.group() != 0 {
                    return Err(invalid(format!(
                        "{:?}: conventional surfaces cannot sit on morphing winglets",
                        s.id
                    )));
                }
                let (m, n) = self.component_resolution(p.component);
                let [r0, r1] = p.chord_rows;
                let [c0, c1] = p.span_panels;
                if !(r0 < r1 && r1 <= m && c0 < c1 && c1 <= n) {
                    return Err(invalid(format!(
                        "{:?}: patch ranges {:?}/{:?} outside {:?} lattice {m}x{n}",
                        s.id, p.chord_rows, p.span_panels, p.component
                    )));
                }
                for i in r0..r1 {
                    for j in c0..c1 {
                        if !claimed.insert((p.component, i, j)) {
                            return Err(invalid(format!(
                                "{:?}: panel ({i},{j}) of {:?} already belongs to another surface",
                                s.id, p.component
                            )));
                        }
                    }
                }
            }
        }
        let al = self.surface(SurfaceId::AileronLeft);
        let ar = self.surface(SurfaceId::AileronRight);
        let mirrored = al.patches.len() == ar.patches.len()
            && al.patches.iter().all(|p| {
                ar.patches.iter().any(|q| {
                    q.component == p.component.mirror()
                        && q.chord_rows == p.chord_rows
                        && mirror_range(p.span_panels, self.component_resolution(p.component).1)
                            == q.span_panels
                })
            });
        if !mirrored {
            return Err(invalid("lateral symmetry: aileron patches are not mirror images"));
        }
        Ok(())
    }

    fn validate_actuators(&self) -> Result<()> {
        let a = &self.actuators;
        for (name, l) in [("elevator", a.elevator), ("aileron", a.aileron), ("rudder", a.rudder)] {
            if !(l.deflection_deg > 0.0 && l.rate_deg_s > 0.0) {
                return Err(invalid(format!("{name} limits must be > 0")));
            }
        }
        let m = a.morphing;
        if !(m.lower_deg < 0.0 && m.upper_deg > 0.0 && m.rate_deg_s > 0.0) {
            return Err(invalid("morphing limits must bracket 0 with a positive rate"));
        }
        if m.upper_deg > 90.0 || m.lower_deg < -90.0 {
            return Err(invalid("morphing limits must lie within +/-90 deg"));
        }
        Ok(())
    }
}

/// Spanwise panel range mirrored across the root: left components run tip-to-root along +y.
fn mirror_range(r: [usize; 2], n: usize) -> [usize; 2] {
    [n - r[1], n - r[0]]
}

/// Parse and validate a TOML configuration document.
pub fn load_config(text: &str) -> Result<AircraftConfig> {
    let cfg: AircraftConfig = toml::from_str(text).map_err(|e| Error::Parse(e.to_string()))?;
    cfg.validate()?;
    Ok(cfg)
}

pub fn load_config_file(path: impl AsRef<std::path::Path>) -> Result<AircraftConfig> {
    let path = path.as_ref();
    let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
    load_config(&text)
}

pub fn default_config() -> AircraftConfig {
    load_config(DEFAULT_CONFIG).expect("shipped config is valid")
}

pub fn elastic_config() -> AircraftConfig {
    load_config(ELASTIC_CONFIG).expect("shipped elastic config is valid")
}

pub fn serialize_config(config: &AircraftConfig) -> Result<String> {
    toml::to_string_pretty(config).map_err(|e| Error::Serialize(e.to_string()))
}

/// Lock both winglets at `delta_trim`; the lattice ignores any later morph request.
pub fn freeze_morphing(config: &AircraftConfig, delta_trim: f64) -> AircraftConfig {
    let mut out = config.clone();
    out.morph_lock = Some(delta_trim);
    out
}

/// Multiply the modal stiffness by `factor`.
pub fn stiffen_config(config: &AircraftConfig, factor: f64) -> Result<AircraftConfig> {
    if !(factor > 0.0) {
        return Err(Error::InvalidArgument(format!("stiffening factor {factor} must be > 0")));
    }
    if !config.flexibility.enabled {
        return Err(Error::FlexibilityDisabled);
    }
    let mut out = config.clone();
    out.flexibility.modal_stiffness *= factor;
    Ok(out)
}

/// Multiply every panel count, and the control-surface patches with them, by `factor`.
pub fn refine_lattice(config: &AircraftConfig, factor: f64) -> Result<AircraftConfig> {
    if !(factor > 0.0) || !factor.is_finite() {
        return Err(Error::InvalidArgument(format!("lattice scale {factor} must be > 0")));
    }
    let scale = |n: usize| -> Result<usize> {
        let v = n as f64 * factor;
        if (v - v.round()).abs() > 1e-9 {
            return Err(Error::InvalidArgument(format!("lattice scale {factor} turns {n} panels into {v}")));
        }
        Ok(v.round() as usize)
    };
    let mut out = config.clone();
    out.wing.chordwise_panels = scale(out.wing.chordwise_panels)?;
    out.wing.spanwise_panels = scale(out.wing.spanwise_panels)?;
    for w in &mut out.winglets {
        w.chordwise_panels = scale(w.chordwise_panels)?;
        w.spanwise_panels = scale(w.spanwise_panels)?;
    }
    out.tail.chordwise_panels = scale(out.tail.chordwise_panels)?;
    out.tail.spanwise_panels = scale(out.tail.spanwise_panels)?;
    out.fin.chordwise_panels = scale(out.fin.chordwise_panels)?;
    out.fin.spanwise_panels = scale(out.fin.spanwise_panels)?;
    for cs in &mut out.control_surfaces {
        for p in &mut cs.patches {
            p.chord_rows = [scale(p.chord_rows[0])?, scale(p.chord_rows[1])?];
            p.span_panels = [scale(p.span_panels[0])?, scale(p.span_panels[1])?];
        }
    }
    out.validate()?;
    Ok(out)
}
