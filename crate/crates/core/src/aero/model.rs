use std::ops::Range;

use nalgebra::{DMatrix, DVector, Dyn, LU};
use rayon::prelude::*;

use super::biot_savart::VortexSheet;
use crate::error::{Error, Result};
use crate::vehicle::config::{AircraftConfig, ComponentTag};
use crate::vehicle::lattice::{morph_geometry, ComponentLattice, LatticeGeometry};
use crate::Vec3;

/// Square bound-ring influence matrix: normal wash at collocation i from unit ring j.
#[derive(Debug, Clone)]
pub struct InfluenceMatrix {
    pub matrix: DMatrix<f64>,
}

/// Straight wake trailing each component's trailing edge along the body -x axis.
#[derive(Debug, Clone, PartialEq)]
pub struct WakeLayout {
    /// Ring rows per strip; the last row is semi-infinite.
    pub rows: usize,
    /// Row spacing, equal to the distance the freestream travels in one step.
    pub spacing: f64,
    pub direction: Vec3,
    /// Trailing-edge panel count per component.
    pub columns: Vec<usize>,
    /// Offset of each component's rings in the wake vector.
    pub offsets: Vec<usize>,
    pub total: usize,
}

impl WakeLayout {
    pub fn new(lattice: &LatticeGeometry, spacing: f64, rows: usize) -> Self {
        let mut columns = Vec::new();
        let mut offsets = Vec::new();
        let mut total = 0;
        for c in &lattice.components {
            columns.push(c.n);
            offsets.push(total);
            total += rows * c.n;
        }
        WakeLayout { rows, spacing, direction: -Vec3::x(), columns, offsets, total }
    }

    pub fn for_config(config: &AircraftConfig, lattice: &LatticeGeometry, dt_scale: f64) -> Self {
        let spacing = dt_scale * config.reference_chord() / config.shedding_panels() as f64;
        let rows = ((config.aero.wake_chords * config.reference_chord() / spacing).round() as usize).max(2);
        WakeLayout::new(lattice, spacing, rows)
    }

    pub fn sheet(&self, comp: &ComponentLattice) -> VortexSheet {
        let te = comp.trailing_edge();
        let mut nodes = Vec::with_capacity(self.rows * te.len());
        for k in 0..self.rows {
            let shift = self.direction * (k as f64 * self.spacing);
            nodes.extend(te.iter().map(|p| p + shift));
        }
        VortexSheet { nodes, rows: self.rows, cols: te.len(), trailing: Some(self.direction) }
    }

    /// Single semi-infinite row per strip: the steady (horseshoe) wake.
    pub fn steady_sheet(&self, comp: &ComponentLattice) -> VortexSheet {
        let te = comp.trailing_edge();
        VortexSheet { cols: te.len(), nodes: te, rows: 1, trailing: Some(self.direction) }
    }

    pub fn group_range(&self, lattice: &LatticeGeometry, group: usize) -> Range<usize> {
        let mut start = usize::MAX;
        let mut end = 0;
        for (ci, c) in lattice.components.iter().enumerate() {
            if c.tag.group() == group {
                start = start.min(self.offsets[ci]);
                end = end.max(self.offsets[ci] + self.rows * self.columns[ci]);
            }
        }
        if start == usize::MAX {
            0..0
        } else {
            start..end
        }
    }

    /// Trailing-edge panel of every strip, in strip order.
    pub fn te_panels(&self, lattice: &LatticeGeometry) -> Vec<usize> {
        lattice
            .components
            .iter()
            .flat_map(|c| (0..c.n).map(move |j| c.panel_index(c.m - 1, j)))
            .collect()
    }

    pub fn strip_count(&self) -> usize {
        self.columns.iter().sum()
    }
}

pub fn bound_sheet(comp: &ComponentLattice) -> VortexSheet {
    VortexSheet { nodes: comp.ring_nodes.clone(), rows: comp.m + 1, cols: comp.n + 1, trailing: None }
}

fn targets(lattice: &LatticeGeometry, range: Range<usize>) -> Vec<(Vec3, Vec3)> {
    lattice.panels[range].iter().map(|p| (p.collocation, p.normal)).collect()
}

/// Normal wash at each target from every unit ring of `sheets`, rings concatenated.
pub fn wash_matrix(targets: &[(Vec3, Vec3)], sheets: &[&VortexSheet]) -> DMatrix<f64> {
    let ncols: usize = sheets.iter().map(|s| s.ring_count()).sum();
    let mut m = DMatrix::zeros(targets.len(), ncols);
    let mut row = vec![0.0; ncols];
    let mut scratch = Vec::new();
    for (i, (p, n)) in targets.iter().enumerate() {
        let mut off = 0;
        for s in sheets {
            let k = s.ring_count();
            s.normal_wash(p, n, &mut row[off..off + k], &mut scratch);
            off += k;
        }
        for (j, v) in row.iter().enumerate() {
            m[(i, j)] = *v;
        }
    }
    m
}

fn group_sheets(lattice: &LatticeGeometry, group: usize, f: impl Fn(&ComponentLattice) -> VortexSheet) -> Vec<VortexSheet> {
    lattice.components.iter().filter(|c| c.tag.group() == group).map(f).collect()
}

fn refs(v: &[VortexSheet]) -> Vec<&VortexSheet> {
    v.iter().collect()
}

fn check_pivots(lu: &LU<f64, Dyn, Dyn>) -> Result<()> {
    let u = lu.u();
    let diag: Vec<f64> = (0..u.nrows()).map(|i| u[(i, i)].abs()).collect();
    let max = diag.iter().cloned().fold(0.0, f64::max);
    let bad: Vec<usize> = diag
        .iter()
        .enumerate()
        .filter(|(_, d)| !(**d > 1e-12 * max) || !d.is_finite())
        .map(|(i, _)| i)
        .collect();
    if max == 0.0 || !bad.is_empty() {
        let mut panels = bad;
        if panels.is_empty() {
            panels = (0..diag.len()).collect();
        }
        panels.truncate(8);
        return Err(Error::SingularInfluence { panels });
    }
    Ok(())
}

/// Bound-ring influence matrix of a lattice; errors on degenerate geometry.
pub fn assemble_influence(lattice: &LatticeGeometry) -> Result<InfluenceMatrix> {
    let sheets: Vec<VortexSheet> = lattice.components.iter().map(bound_sheet).collect();
    let matrix = wash_matrix(&targets(lattice, 0..lattice.panel_count()), &refs(&sheets));
    if matrix.iter().any(|v| !v.is_finite()) {
        return Err(Error::SingularInfluence { panels: vec![] });
    }
    check_pivots(&matrix.clone().lu())?;
    Ok(InfluenceMatrix { matrix })
}

/// Steady system: bound rings plus a semi-infinite horseshoe wake.
pub struct SteadySystem {
    pub lattice: LatticeGeometry,
    lu: LU<f64, Dyn, Dyn>,
}

impl SteadySystem {
    pub fn new(lattice: LatticeGeometry, layout: &WakeLayout) -> Result<Self> {
        let n = lattice.panel_count();
        let mut a = assemble_influence(&lattice)?.matrix;
        let steady: Vec<VortexSheet> = lattice.components.iter().map(|c| layout.steady_sheet(c)).collect();
        let h = wash_matrix(&targets(&lattice, 0..n), &refs(&steady));
        for (col, te) in layout.te_panels(&lattice).into_iter().enumerate() {
            for i in 0..n {
                a[(i, te)] += h[(i, col)];
            }
        }
        let lu = a.lu();
        check_pivots(&lu)?;
        Ok(SteadySystem { lattice, lu })
    }

    pub fn solve(&self, rhs: &DVector<f64>) -> Result<DVector<f64>> {
        self.lu.solve(rhs).ok_or_else(|| Error::LinearSolve("steady system".into()))
    }
}

struct SideTable {
    grid: Vec<f64>,
    rows_bound: Vec<DMatrix<f64>>,
    rows_wake: Vec<DMatrix<f64>>,
    cols_bound: Vec<DMatrix<f64>>,
    cols_wake: Vec<DMatrix<f64>>,
}

struct CrossTable {
    grid: Vec<f64>,
    lr_bound: Vec<DMatrix<f64>>,
    lr_wake: Vec<DMatrix<f64>>,
    rl_bound: Vec<DMatrix<f64>>,
    rl_wake: Vec<DMatrix<f64>>,
}

struct MorphTables {
    a00: DMatrix<f64>,
    w00: DMatrix<f64>,
    sides: [SideTable; 2],
    cross: CrossTable,
}

enum Mode {
    Fixed {
        lattice: LatticeGeometry,
        lu: LU<f64, Dyn, Dyn>,
        wake: DMatrix<f64>,
    },
    Tabulated(Box<MorphTables>),
}

/// Influence data for one aircraft: exact matrices for a fixed winglet state, or
/// tables in the winglet angles for morphing runs.
pub struct AeroModel {
    pub config: AircraftConfig,
    pub layout: WakeLayout,
    pub reference: LatticeGeometry,
    pub dt_scale: f64,
    mode: Mode,
}

/// Interpolation weights on a 1-D grid.
fn locate(grid: &[f64], x: f64) -> (usize, f64) {
    let k = grid.partition_point(|g| *g <= x).clamp(1, grid.len() - 1) - 1;
    let w = (x - grid[k]) / (grid[k + 1] - grid[k]);
    (k, w)
}

fn angle_grid(lo_deg: f64, hi_deg: f64, step_deg: f64) -> Vec<f64> {
    let mut out = Vec::new();
    let mut k = 0usize;
    loop {
        let d = lo_deg + k as f64 * step_deg;
        if d >= hi_deg - 1e-9 {
            break;
        }
        out.push(d.to_radians());
        k += 1;
    }
    out.push(hi_deg.to_radians());
    out
}

fn blend(a: &DMatrix<f64>, b: &DMatrix<f64>, w: f64) -> DMatrix<f64> {
    a.zip_map(b, |x, y| (1.0 - w) * x + w * y)
}

impl AeroModel {
    /// Model for `config`: fixed at the locked angle for frozen configs, tabulated otherwise.
    pub fn new(config: &AircraftConfig, dt_scale: f64) -> Result<Self> {
        match config.morph_lock {
            Some(lock) => Self::fixed(config, lock, lock, dt_scale),
            None => Self::tabulated(config, dt_scale),
        }
    }

    pub fn fixed(config: &AircraftConfig, delta_left: f64, delta_right: f64, dt_scale: f64) -> Result<Self> {
        if !(dt_scale > 0.0) {
            return Err(Error::InvalidArgument("dt scale must be > 0".into()));
        }
        let lattice = morph_geometry(config, delta_left, delta_right)?;
        let reference = morph_geometry(config, 0.0, 0.0)?;
        let layout = WakeLayout::for_config(config, &lattice, dt_scale);
        let a = assemble_influence(&lattice)?.matrix;
        let wakes: Vec<VortexSheet> = lattice.components.iter().map(|c| layout.sheet(c)).collect();
        let wake = wash_matrix(&targets(&lattice, 0..lattice.panel_count()), &refs(&wakes));
        let lu = a.lu();
        check_pivots(&lu)?;
        Ok(AeroModel {
            config: config.clone(),
            layout,
            reference,
            dt_scale,
            mode: Mode::Fixed { lattice, lu, wake },
        })
    }

    /// Fixed model for an arbitrary lattice; `config` supplies the air density and reference point.
    pub fn from_lattice(config: &AircraftConfig, lattice: LatticeGeometry, layout: WakeLayout) -> Result<Self> {
        let a = assemble_influence(&lattice)?.matrix;
        let wakes: Vec<VortexSheet> = lattice.components.iter().map(|c| layout.sheet(c)).collect();
        let wake = wash_matrix(&targets(&lattice, 0..lattice.panel_count()), &refs(&wakes));
        let lu = a.lu();
        check_pivots(&lu)?;
        let mut cfg = config.clone();
        cfg.morph_lock = Some(0.0);
        Ok(AeroModel {
            config: cfg,
            layout,
            reference: lattice.clone(),
            dt_scale: 1.0,
            mode: Mode::Fixed { lattice, lu, wake },
        })
    }

    pub fn tabulated(config: &AircraftConfig, dt_scale: f64) -> Result<Self> {
        if !(dt_scale > 0.0) {
            return Err(Error::InvalidArgument("dt scale must be > 0".into()));
        }
        let mut cfg = config.clone();
        cfg.morph_lock = None;
        let reference = morph_geometry(&cfg, 0.0, 0.0)?;
        assemble_influence(&reference)?;
        let layout = WakeLayout::for_config(&cfg, &reference, dt_scale);
        let g0 = reference.group_range(0);
        let g0_targets = targets(&reference, g0.clone());
        let g0_bound = group_sheets(&reference, 0, bound_sheet);
        let g0_wake = group_sheets(&reference, 0, |c| layout.sheet(c));
        let a00 = wash_matrix(&g0_targets, &refs(&g0_bound));
        let w00 = wash_matrix(&g0_targets, &refs(&g0_wake));
        let m = cfg.actuators.morphing;

        let side_table = |group: usize| -> Result<SideTable> {
            let grid = angle_grid(m.lower_deg, m.upper_deg, cfg.aero.table_step_deg);
            let entries: Vec<Result<[DMatrix<f64>; 4]>> = grid
                .par_iter()
                .map(|&d| {
                    let (dl, dr) = if group == 1 { (d, 0.0) } else { (0.0, d) };
                    let lat = morph_geometry(&cfg, dl, dr)?;
                    let pts = targets(&lat, lat.group_range(group));
                    let bs = group_sheets(&lat, group, bound_sheet);
                    let ws = group_sheets(&lat, group, |c| layout.sheet(c));
                    let mut rb = refs(&g0_bound);
                    rb.extend(refs(&bs));
                    let mut rw = refs(&g0_wake);
                    rw.extend(refs(&ws));
                    Ok([
                        wash_matrix(&pts, &rb),
                        wash_matrix(&pts, &rw),
                        wash_matrix(&g0_targets, &refs(&bs)),
                        wash_matrix(&g0_targets, &refs(&ws)),
                    ])
                })
                .collect();
            let mut t = SideTable { grid, rows_bound: vec![], rows_wake: vec![], cols_bound: vec![], cols_wake: vec![] };
            for e in entries {
                let [a, b, c, d] = e?;
                t.rows_bound.push(a);
                t.rows_wake.push(b);
                t.cols_bound.push(c);
                t.cols_wake.push(d);
            }
            Ok(t)
        };
        let left = side_table(1)?;
        let right = side_table(2)?;

        let grid = angle_grid(m.lower_deg, m.upper_deg, cfg.aero.cross_table_step_deg);
        let pairs: Vec<(f64, f64)> = grid.iter().flat_map(|&a| grid.iter().map(move |&b| (a, b))).collect();
        let entries: Vec<Result<[DMatrix<f64>; 4]>> = pairs
            .par_iter()
            .map(|&(dl, dr)| {
                let lat = morph_geometry(&cfg, dl, dr)?;
                let pl = targets(&lat, lat.group_range(1));
                let pr = targets(&lat, lat.group_range(2));
                let bl = group_sheets(&lat, 1, bound_sheet);
                let br = group_sheets(&lat, 2, bound_sheet);
                let wl = group_sheets(&lat, 1, |c| layout.sheet(c));
                let wr = group_sheets(&lat, 2, |c| layout.sheet(c));
                Ok([
                    wash_matrix(&pl, &refs(&br)),
                    wash_matrix(&pl, &refs(&wr)),
                    wash_matrix(&pr, &refs(&bl)),
                    wash_matrix(&pr, &refs(&wl)),
                ])
            })
            .collect();
        let mut cross = CrossTable { grid, lr_bound: vec![], lr_wake: vec![], rl_bound: vec![], rl_wake: vec![] };
        for e in entries {
            let [a, b, c, d] = e?;
            cross.lr_bound.push(a);
            cross.lr_wake.push(b);
            cross.rl_bound.push(c);
            cross.rl_wake.push(d);
        }
        Ok(AeroModel {
            config: cfg,
            layout,
            reference,
            dt_scale,
            mode: Mode::Tabulated(Box::new(MorphTables { a00, w00, sides: [left, right], cross })),
        })
    }

    pub fn is_tabulated(&self) -> bool {
        matches!(self.mode, Mode::Tabulated(_))
    }

    pub fn panel_count(&self) -> usize {
        self.reference.panel_count()
    }

    /// Winglet angles actually realized for a request (frozen models ignore it).
    pub fn effective_morph(&self, requested: [f64; 2]) -> [f64; 2] {
        match &self.mode {
            Mode::Fixed { lattice, .. } => lattice.morph,
            Mode::Tabulated(_) => requested,
        }
    }

    /// Assemble the per-step system for the given winglet angles.
    pub fn system(&self, morph: [f64; 2]) -> Result<StepSystem> {
        match &self.mode {
            Mode::Fixed { lattice, .. } => Ok(StepSystem {
                lattice: lattice.clone(),
                matrix: None,
                lu: None,
                weights: None,
            }),
            Mode::Tabulated(t) => {
                let lattice = morph_geometry(&self.config, morph[0], morph[1])?;
                let n = lattice.panel_count();
                let g0 = lattice.group_range(0);
                let gl = lattice.group_range(1);
                let gr = lattice.group_range(2);
                let (kl, wl) = locate(&t.sides[0].grid, morph[0]);
                let (kr, wr) = locate(&t.sides[1].grid, morph[1]);
                let (cl, cwl) = locate(&t.cross.grid, morph[0]);
                let (cr, cwr) = locate(&t.cross.grid, morph[1]);
                let weights = Weights { side: [(kl, wl), (kr, wr)], cross: (cl, cwl, cr, cwr), nc: t.cross.grid.len() };
                let mut a = DMatrix::zeros(n, n);
                a.view_mut((g0.start, g0.start), (g0.len(), g0.len())).copy_from(&t.a00);
                for (s, range) in [(0usize, &gl), (1usize, &gr)] {
                    let tab = &t.sides[s];
                    let (k, w) = weights.side[s];
                    let rows = blend(&tab.rows_bound[k], &tab.rows_bound[k + 1], w);
                    let cols = blend(&tab.cols_bound[k], &tab.cols_bound[k + 1], w);
                    a.view_mut((range.start, g0.start), (range.len(), g0.len()))
                        .copy_from(&rows.columns(0, g0.len()));
                    a.view_mut((range.start, range.start), (range.len(), range.len()))
                        .copy_from(&rows.columns(g0.len(), range.len()));
                    a.view_mut((g0.start, range.start), (g0.len(), range.len())).copy_from(&cols);
                }
                let lr = weights.bilinear(&t.cross.lr_bound);
                let rl = weights.bilinear(&t.cross.rl_bound);
                a.view_mut((gl.start, gr.start), (gl.len(), gr.len())).copy_from(&lr);
                a.view_mut((gr.start, gl.start), (gr.len(), gl.len())).copy_from(&rl);
                let lu = a.clone().lu();
                let u = lu.u();
                if (0..n).any(|i| !u[(i, i)].is_finite() || u[(i, i)] == 0.0) {
                    return Err(Error::SingularInfluence { panels: vec![] });
                }
                Ok(StepSystem { lattice, matrix: Some(a), lu: Some(lu), weights: Some(weights) })
            }
        }
    }

    /// Normal wash at every collocation point from the wake rings.
    pub fn wake_wash(&self, system: &StepSystem, wake: &DVector<f64>) -> DVector<f64> {
        match &self.mode {
            Mode::Fixed { wake: w, .. } => w * wake,
            Mode::Tabulated(t) => {
                let lat = &system.lattice;
                let weights = system.weights.as_ref().expect("tabulated system carries weights");
                let n = lat.panel_count();
                let g0 = lat.group_range(0);
                let wr0 = self.layout.group_range(lat, 0);
                let wrs = [self.layout.group_range(lat, 1), self.layout.group_range(lat, 2)];
                let gs = [lat.group_range(1), lat.group_range(2)];
                let w0 = wake.rows(wr0.start, wr0.len()).into_owned();
                let ws = [
                    wake.rows(wrs[0].start, wrs[0].len()).into_owned(),
                    wake.rows(wrs[1].start, wrs[1].len()).into_owned(),
                ];
                let mut out = DVector::zeros(n);
                let mut head = &t.w00 * &w0;
                for s in 0..2 {
                    let tab = &t.sides[s];
                    let (k, w) = weights.side[s];
                    let y0 = &tab.cols_wake[k] * &ws[s];
                    let y1 = &tab.cols_wake[k + 1] * &ws[s];
                    head += y0 * (1.0 - w) + y1 * w;
                    let mut full = DVector::zeros(w0.len() + ws[s].len());
                    full.rows_mut(0, w0.len()).copy_from(&w0);
                    full.rows_mut(w0.len(), ws[s].len()).copy_from(&ws[s]);
                    let r0 = &tab.rows_wake[k] * &full;
                    let r1 = &tab.rows_wake[k + 1] * &full;
                    let mut rows = r0 * (1.0 - w) + r1 * w;
                    let (other, tabs) = if s == 0 { (&ws[1], &t.cross.lr_wake) } else { (&ws[0], &t.cross.rl_wake) };
                    rows += weights.bilinear_apply(tabs, other);
                    out.rows_mut(gs[s].start, gs[s].len()).copy_from(&rows);
                }
                out.rows_mut(g0.start, g0.len()).copy_from(&head);
                out
            }
        }
    }

    pub fn solve(&self, system: &StepSystem, rhs: &DVector<f64>) -> Result<DVector<f64>> {
        let lu = match (&self.mode, &system.lu) {
            (Mode::Fixed { lu, .. }, _) => lu,
            (_, Some(lu)) => lu,
            _ => return Err(Error::LinearSolve("missing factorization".into())),
        };
        let x = lu.solve(rhs).ok_or_else(|| Error::LinearSolve("bound circulation".into()))?;
        if x.iter().any(|v| !v.is_finite()) {
            return Err(Error::LinearSolve("non-finite bound circulation".into()));
        }
        Ok(x)
    }

    /// Exact bound and wake influence matrices at a lattice (reference for table checks).
    pub fn exact_matrices(&self, lattice: &LatticeGeometry) -> (DMatrix<f64>, DMatrix<f64>) {
        let bound: Vec<VortexSheet> = lattice.components.iter().map(bound_sheet).collect();
        let wakes: Vec<VortexSheet> = lattice.components.iter().map(|c| self.layout.sheet(c)).collect();
        let t = targets(lattice, 0..lattice.panel_count());
        (wash_matrix(&t, &refs(&bound)), wash_matrix(&t, &refs(&wakes)))
    }

    /// Steady system consistent with [`AeroModel::system`], so the steady solution is a fixed point of the stepping.
    pub fn steady_system(&self, morph: [f64; 2]) -> Result<SteadySystem> {
        match &self.mode {
            Mode::Fixed { lattice, .. } => SteadySystem::new(lattice.clone(), &self.layout),
            Mode::Tabulated(_) => {
                let sys = self.system(morph)?;
                let mut a = sys.matrix.clone().expect("tabulated system carries its matrix");
                let layout = &self.layout;
                let te = layout.te_panels(&sys.lattice);
                let mut strip = 0;
                for (ci, &cols) in layout.columns.iter().enumerate() {
                    for j in 0..cols {
                        let mut w = DVector::zeros(layout.total);
                        for k in 0..layout.rows {
                            w[layout.offsets[ci] + k * cols + j] = 1.0;
                        }
                        let col = self.wake_wash(&sys, &w);
                        let mut target = a.column_mut(te[strip + j]);
                        target += col;
                    }
                    strip += cols;
                }
                let lu = a.lu();
                check_pivots(&lu)?;
                Ok(SteadySystem { lattice: sys.lattice, lu })
            }
        }
    }
}

struct Weights {
    side: [(usize, f64); 2],
    cross: (usize, f64, usize, f64),
    nc: usize,
}

impl Weights {
    fn corners(&self) -> [(usize, f64); 4] {
        let (kl, wl, kr, wr) = self.cross;
        let nc = self.nc;
        [
            (kl * nc + kr, (1.0 - wl) * (1.0 - wr)),
            (kl * nc + kr + 1, (1.0 - wl) * wr),
            ((kl + 1) * nc + kr, wl * (1.0 - wr)),
            ((kl + 1) * nc + kr + 1, wl * wr),
        ]
    }

    fn bilinear(&self, tab: &[DMatrix<f64>]) -> DMatrix<f64> {
        let c = self.corners();
        let mut out = &tab[c[0].0] * c[0].1;
        for &(idx, w) in &c[1..] {
            out += &tab[idx] * w;
        }
        out
    }

    fn bilinear_apply(&self, tab: &[DMatrix<f64>], x: &DVector<f64>) -> DVector<f64> {
        let c = self.corners();
        let mut out = (&tab[c[0].0] * x) * c[0].1;
        for &(idx, w) in &c[1..] {
            out += (&tab[idx] * x) * w;
        }
        out
    }
}

/// Geometry and factorized bound system for one winglet state.
pub struct StepSystem {
    pub lattice: LatticeGeometry,
    /// Interpolated bound matrix (tabulated models only).
    pub matrix: Option<DMatrix<f64>>,
    lu: Option<LU<f64, Dyn, Dyn>>,
    weights: Option<Weights>,
}

impl StepSystem {
    pub fn morph(&self) -> [f64; 2] {
        self.lattice.morph
    }
}

/// Strip index of each wake column's component, for diagnostics.
pub fn strip_components(lattice: &LatticeGeometry) -> Vec<ComponentTag> {
    lattice.components.iter().flat_map(|c| std::iter::repeat(c.tag).take(c.n)).collect()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::vehicle::config::default_config;
    use crate::vehicle::lattice::reference_lattice;

    #[test]
    fn duplicated_row_reports_singularity() {
        let c = default_config();
        let l = reference_lattice(&c);
        let mut a = assemble_influence(&l).unwrap().matrix;
        let row = a.row(3).into_owned();
        a.set_row(4, &row);
        assert!(check_pivots(&a.lu()).is_err());
    }

    #[test]
    fn self_influence_opposes_the_normal() {
        let l = reference_lattice(&default_config());
        let a = assemble_influence(&l).unwrap().matrix;
        for i in 0..l.panel_count() {
            assert!(a[(i, i)] < 0.0, "panel {i}");
        }
    }

    #[test]
    fn tables_reproduce_exact_matrices() {
        let c = default_config();
        let model = AeroModel::tabulated(&c, 1.0).unwrap();
        for morph in [[0.0, 0.0], [10f64.to_radians(), -20f64.to_radians()], [0.2, 0.55]] {
            let sys = model.system(morph).unwrap();
            let (a, w) = model.exact_matrices(&sys.lattice);
            let at = sys.matrix.as_ref().unwrap();
            let tol = if morph == [0.0, 0.0] { 1e-13 } else { 2e-3 };
            assert!((at - &a).abs().max() <= tol * a.abs().max(), "{morph:?}");
            let g = DVector::from_fn(model.layout.total, |i, _| ((i % 7) as f64 - 3.0) * 0.1);
            let ww = model.wake_wash(&sys, &g);
            let we = &w * &g;
            assert!((&ww - &we).abs().max() <= tol * we.abs().max(), "{morph:?}");
        }
    }

    #[test]
    fn tabulated_steady_state_is_a_fixed_point_between_nodes() {
        let c = default_config();
        let model = std::sync::Arc::new(AeroModel::tabulated(&c, 1.0).unwrap());
        let mut s = crate::aero::UvlmSolver::new(model, c.time_step(32.5, 1.0));
        let mut kin = crate::aero::Kinematics::freestream(32.5, 4f64.to_radians(), 0.0);
        kin.morph = [7f64.to_radians(), -11f64.to_radians()];
        let st = s.steady_state(&kin).unwrap();
        let (next, _) = s.step(&st, &kin).unwrap();
        assert!((&next.bound - &st.bound).amax() < 1e-10 * st.bound.amax());
    }

    #[test]
    fn fixed_and_tabulated_agree_at_zero() {
        let c = default_config();
        let fixed = AeroModel::fixed(&c, 0.0, 0.0, 1.0).unwrap();
        let (a, _) = fixed.exact_matrices(&fixed.reference);
        let rhs = DVector::from_fn(a.nrows(), |i, _| 1.0 + 0.01 * i as f64);
        let sys = fixed.system([0.0, 0.0]).unwrap();
        let x = fixed.solve(&sys, &rhs).unwrap();
        assert!((&a * &x - &rhs).abs().max() < 1e-10);
    }

    #[test]
    fn wake_rows_follow_freestream_spacing() {
        let c = default_config();
        let l = reference_lattice(&c);
        let layout = WakeLayout::for_config(&c, &l, 1.0);
        assert_eq!(layout.rows, 60);
        let dt = c.time_step(32.5, 1.0);
        assert!((layout.spacing - 32.5 * dt).abs() < 1e-12);
        let s = layout.sheet(&l.components[1]);
        let d = s.node(1, 0) - s.node(0, 0);
        assert!((d + Vec3::x() * layout.spacing).norm() < 1e-12);
        assert_eq!(layout.total, 60 * layout.strip_count());
    }
}
