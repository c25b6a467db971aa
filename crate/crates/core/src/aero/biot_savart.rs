use std::f64::consts::PI;

use crate::Vec3;

const INV_4PI: f64 = 0.25 / PI;
/// Points closer to a filament than this fraction of its length see no induced velocity.
const CORE_FRACTION: f64 = 1e-10;

/// Velocity at `p` induced by a unit-strength straight filament from `a` to `b`.
#[inline]
pub fn segment_velocity(p: &Vec3, a: &Vec3, b: &Vec3) -> Vec3 {
    let r1 = p - a;
    let r2 = p - b;
    let r0 = b - a;
    let c = r1.cross(&r2);
    let c2 = c.norm_squared();
    let l2 = r0.norm_squared();
    if c2 <= CORE_FRACTION * CORE_FRACTION * l2 * l2 {
        return Vec3::zeros();
    }
    let n1 = r1.norm();
    let n2 = r2.norm();
    let k = INV_4PI * (r0.dot(&r1) / n1 - r0.dot(&r2) / n2) / c2;
    c * k
}

/// Velocity at `p` induced by a unit-strength filament starting at `a` and running to
/// infinity along the unit vector `dir`.
#[inline]
pub fn semi_infinite_velocity(p: &Vec3, a: &Vec3, dir: &Vec3) -> Vec3 {
    let r = p - a;
    let c = dir.cross(&r);
    let c2 = c.norm_squared();
    let rn = r.norm();
    if c2 <= CORE_FRACTION * CORE_FRACTION * rn * rn {
        return Vec3::zeros();
    }
    c * (INV_4PI * (1.0 + dir.dot(&r) / rn) / c2)
}

/// Unit vortex ring A -> B -> C -> D -> A.
pub fn ring_velocity(p: &Vec3, ring: &[Vec3; 4]) -> Vec3 {
    segment_velocity(p, &ring[0], &ring[1])
        + segment_velocity(p, &ring[1], &ring[2])
        + segment_velocity(p, &ring[2], &ring[3])
        + segment_velocity(p, &ring[3], &ring[0])
}

/// Unit horseshoe-like ring whose trailing legs leave `a` and `b` to infinity along `dir`.
pub fn semi_infinite_ring_velocity(p: &Vec3, a: &Vec3, b: &Vec3, dir: &Vec3) -> Vec3 {
    segment_velocity(p, a, b) + semi_infinite_velocity(p, b, dir) - semi_infinite_velocity(p, a, dir)
}

/// A structured sheet of vortex rings: `rows x cols` nodes, optionally closed by a row of
/// semi-infinite rings that trail from the last node row.
#[derive(Debug, Clone, PartialEq)]
pub struct VortexSheet {
    pub nodes: Vec<Vec3>,
    pub rows: usize,
    pub cols: usize,
    pub trailing: Option<Vec3>,
}

impl VortexSheet {
    pub fn node(&self, k: usize, j: usize) -> &Vec3 {
        &self.nodes[k * self.cols + j]
    }

    pub fn ring_rows(&self) -> usize {
        self.rows - 1 + usize::from(self.trailing.is_some())
    }

    pub fn ring_count(&self) -> usize {
        self.ring_rows() * (self.cols - 1)
    }

    /// Normal wash at `p` along `n` from each unit ring, row-major, into `out`.
    ///
    /// Shared filaments are evaluated once.
    pub fn normal_wash(&self, p: &Vec3, n: &Vec3, out: &mut [f64], scratch: &mut Vec<f64>) {
        let (rows, cols) = (self.rows, self.cols);
        let spans = rows * (cols - 1);
        let streams = (rows - 1) * cols;
        scratch.clear();
        scratch.resize(spans + streams + cols, 0.0);
        let (span, rest) = scratch.split_at_mut(spans);
        let (stream, semi) = rest.split_at_mut(streams);
        for k in 0..rows {
            for j in 0..cols - 1 {
                span[k * (cols - 1) + j] = segment_velocity(p, self.node(k, j), self.node(k, j + 1)).dot(n);
            }
        }
        for k in 0..rows - 1 {
            for j in 0..cols {
                stream[k * cols + j] = segment_velocity(p, self.node(k, j), self.node(k + 1, j)).dot(n);
            }
        }
        if let Some(dir) = &self.trailing {
            for j in 0..cols {
                semi[j] = semi_infinite_velocity(p, self.node(rows - 1, j), dir).dot(n);
            }
        }
        let w = cols - 1;
        for k in 0..rows - 1 {
            for j in 0..w {
                out[k * w + j] = span[k * w + j] - span[(k + 1) * w + j] + stream[k * cols + j + 1]
                    - stream[k * cols + j];
            }
        }
        if self.trailing.is_some() {
            let k = rows - 1;
            for j in 0..w {
                out[k * w + j] = span[k * w + j] + semi[j + 1] - semi[j];
            }
        }
    }

    /// Full induced velocity at `p` for ring strengths `gamma` (row-major).
    pub fn velocity(&self, p: &Vec3, gamma: &[f64]) -> Vec3 {
        let w = self.cols - 1;
        let mut v = Vec3::zeros();
        for k in 0..self.ring_rows() {
            for j in 0..w {
                let g = gamma[k * w + j];
                if g == 0.0 {
                    continue;
                }
                let a = self.node(k, j);
                let b = self.node(k, j + 1);
                let ring = if k + 1 < self.rows {
                    ring_velocity(p, &[*a, *b, *self.node(k + 1, j + 1), *self.node(k + 1, j)])
                } else {
                    semi_infinite_ring_velocity(p, a, b, self.trailing.as_ref().expect("trailing row"))
                };
                v += ring * g;
            }
        }
        v
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    /// Adaptive Simpson quadrature of the Biot-Savart line integral.
    fn quad_segment(p: &Vec3, a: &Vec3, b: &Vec3) -> Vec3 {
        let dl = b - a;
        let f = |s: f64| {
            let r = p - (a + dl * s);
            dl.cross(&r) * (INV_4PI / r.norm().powi(3))
        };
        fn simpson(f: &dyn Fn(f64) -> Vec3, a: f64, b: f64, fa: Vec3, fm: Vec3, fb: Vec3, whole: Vec3, tol: f64, depth: u32) -> Vec3 {
            let m = 0.5 * (a + b);
            let lm = 0.5 * (a + m);
            let rm = 0.5 * (m + b);
            let flm = f(lm);
            let frm = f(rm);
            let left = (fa + 4.0 * flm + fm) * ((m - a) / 6.0);
            let right = (fm + 4.0 * frm + fb) * ((b - m) / 6.0);
            let diff = left + right - whole;
            if depth == 0 || diff.norm() <= 15.0 * tol {
                left + right + diff / 15.0
            } else {
                simpson(f, a, m, fa, flm, fm, left, tol / 2.0, depth - 1)
                    + simpson(f, m, b, fm, frm, fb, right, tol / 2.0, depth - 1)
            }
        }
        let (fa, fm, fb) = (f(0.0), f(0.5), f(1.0));
        let whole = (fa + 4.0 * fm + fb) / 6.0;
        simpson(&f, 0.0, 1.0, fa, fm, fb, whole, 1e-13, 40)
    }

    #[test]
    fn long_filament_tends_to_two_dimensional_vortex() {
        let d = 0.7;
        let p = Vec3::new(0.0, 0.0, d);
        let mut prev_err = f64::INFINITY;
        for half in [10.0, 100.0, 1000.0, 10000.0] {
            let v = segment_velocity(&p, &Vec3::new(-half, 0.0, 0.0), &Vec3::new(half, 0.0, 0.0));
            let err = (v.norm() - 1.0 / (2.0 * PI * d)).abs() / (1.0 / (2.0 * PI * d));
            assert!(err < prev_err);
            prev_err = err;
        }
        assert!(prev_err < 1e-8);
    }

    #[test]
    fn segment_matches_quadrature() {
        let cases = [
            (Vec3::new(0.3, 0.2, 0.5), Vec3::new(0.0, 0.0, 0.0), Vec3::new(1.0, 0.5, 0.0)),
            (Vec3::new(-1.0, 2.0, 0.1), Vec3::new(0.2, -0.3, 0.4), Vec3::new(0.1, 1.3, -0.2)),
            (Vec3::new(0.5, 0.5, 0.05), Vec3::new(0.0, 0.0, 0.0), Vec3::new(0.0, 1.0, 0.0)),
        ];
        for (p, a, b) in cases {
            let exact = segment_velocity(&p, &a, &b);
            let q = quad_segment(&p, &a, &b);
            assert!((exact - q).norm() <= 1e-9 * q.norm(), "{exact:?} vs {q:?}");
        }
    }

    #[test]
    fn ring_self_influence_matches_quadrature() {
        let ring = [
            Vec3::new(0.125, 0.0, 0.0),
            Vec3::new(0.125, 0.8, 0.0),
            Vec3::new(-0.375, 0.8, 0.0),
            Vec3::new(-0.375, 0.0, 0.0),
        ];
        let colloc = Vec3::new(-0.25, 0.4, 0.0);
        let exact = ring_velocity(&colloc, &ring);
        let mut q = Vec3::zeros();
        for k in 0..4 {
            q += quad_segment(&colloc, &ring[k], &ring[(k + 1) % 4]);
        }
        assert!((exact - q).norm() <= 1e-6 * q.norm());
        // loop A->B->C->D circulates so the induced flow inside points along +z
        assert!(exact.z > 0.0 && exact.x.abs() < 1e-14 && exact.y.abs() < 1e-14);
    }

    #[test]
    fn semi_infinite_is_limit_of_finite() {
        let p = Vec3::new(0.4, -0.3, 0.2);
        let a = Vec3::new(0.0, 0.1, 0.0);
        let dir = Vec3::new(-1.0, 0.0, 0.0);
        let far = segment_velocity(&p, &a, &(a + dir * 1e7));
        let semi = semi_infinite_velocity(&p, &a, &dir);
        assert!((far - semi).norm() < 1e-9 * semi.norm());
    }

    #[test]
    fn on_axis_points_are_silent() {
        let a = Vec3::new(0.0, 0.0, 0.0);
        let b = Vec3::new(1.0, 0.0, 0.0);
        assert_eq!(segment_velocity(&Vec3::new(2.0, 0.0, 0.0), &a, &b), Vec3::zeros());
        assert_eq!(segment_velocity(&Vec3::new(0.5, 0.0, 0.0), &a, &b), Vec3::zeros());
        assert_eq!(semi_infinite_velocity(&Vec3::new(-3.0, 0.0, 0.0), &a, &-Vec3::x()), Vec3::zeros());
    }

    #[test]
    fn sheet_wash_matches_ring_by_ring_evaluation() {
        let rows = 4;
        let cols = 5;
        let mut nodes = Vec::new();
        for k in 0..rows {
            for j in 0..cols {
                nodes.push(Vec3::new(-0.3 * k as f64, 0.5 * j as f64 + 0.01 * (k * k) as f64, 0.02 * j as f64));
            }
        }
        let dir = Vec3::new(-1.0, 0.0, 0.0);
        for trailing in [None, Some(dir)] {
            let sheet = VortexSheet { nodes: nodes.clone(), rows, cols, trailing };
            let p = Vec3::new(0.37, 0.81, -0.23);
            let n = Vec3::new(0.1, -0.2, 0.97).normalize();
            let mut out = vec![0.0; sheet.ring_count()];
            let mut scratch = Vec::new();
            sheet.normal_wash(&p, &n, &mut out, &mut scratch);
            for idx in 0..sheet.ring_count() {
                let mut g = vec![0.0; sheet.ring_count()];
                g[idx] = 1.0;
                let v = sheet.velocity(&p, &g).dot(&n);
                assert!((v - out[idx]).abs() < 1e-13, "{idx}: {v} vs {}", out[idx]);
            }
        }
    }
}
