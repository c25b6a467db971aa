//! Strictly convex quadratic programs by the Goldfarb-Idnani dual active-set method.
//!
//! minimize ½ xᵀGx + gᵀx subject to `A_eq x = b_eq` and `A_in x ≥ b_in`.

use nalgebra::{DMatrix, DVector};

use crate::error::{Error, Result};

#[derive(Debug, Clone)]
pub struct QpProblem {
    pub g_mat: DMatrix<f64>,
    pub g_vec: DVector<f64>,
    /// Equality rows with their right-hand sides.
    pub eq: Vec<(DVector<f64>, f64)>,
    /// Inequality rows `a·x ≥ b`.
    pub ineq: Vec<(DVector<f64>, f64)>,
}

#[derive(Debug, Clone)]
pub struct QpSolution {
    pub x: DVector<f64>,
    pub objective: f64,
    /// Multipliers of the equalities then the inequalities (zero when inactive).
    pub lambda_eq: Vec<f64>,
    pub lambda_in: Vec<f64>,
    pub iterations: usize,
}

struct Factors {
    n: usize,
    j: DMatrix<f64>,
    r: DMatrix<f64>,
    iq: usize,
    r_norm: f64,
}

fn hypot(a: f64, b: f64) -> f64 {
    a.hypot(b)
}

impl Factors {
    fn d(&self, np: &DVector<f64>) -> DVector<f64> {
        self.j.tr_mul(np)
    }

    fn z(&self, d: &DVector<f64>) -> DVector<f64> {
        let mut z = DVector::zeros(self.n);
        for c in self.iq..self.n {
            z.axpy(d[c], &self.j.column(c), 1.0);
        }
        z
    }

    fn r_solve(&self, d: &DVector<f64>) -> DVector<f64> {
        let mut r = DVector::zeros(self.iq);
        for i in (0..self.iq).rev() {
            let mut s = d[i];
            for k in i + 1..self.iq {
                s -= self.r[(i, k)] * r[k];
            }
            r[i] = s / self.r[(i, i)];
        }
        r
    }

    /// Returns false when the new normal is numerically dependent on the active ones.
    fn add(&mut self, d: &mut DVector<f64>) -> bool {
        let n = self.n;
        for jj in (self.iq + 1..n).rev() {
            let mut cc = d[jj - 1];
            let mut ss = d[jj];
            let h = hypot(cc, ss);
            if h == 0.0 {
                continue;
            }
            d[jj] = 0.0;
            ss /= h;
            cc /= h;
            if cc < 0.0 {
                cc = -cc;
                ss = -ss;
                d[jj - 1] = -h;
            } else {
                d[jj - 1] = h;
            }
            let xny = ss / (1.0 + cc);
            for k in 0..n {
                let t1 = self.j[(k, jj - 1)];
                let t2 = self.j[(k, jj)];
                self.j[(k, jj - 1)] = t1 * cc + t2 * ss;
                self.j[(k, jj)] = xny * (t1 + self.j[(k, jj - 1)]) - t2;
            }
        }
        self.iq += 1;
        for i in 0..self.iq {
            self.r[(i, self.iq - 1)] = d[i];
        }
        if d[self.iq - 1].abs() <= f64::EPSILON * self.r_norm {
            return false;
        }
        self.r_norm = self.r_norm.max(d[self.iq - 1].abs());
        true
    }

    fn drop(&mut self, active: &mut Vec<usize>, u: &mut Vec<f64>, qq: usize) {
        let n = self.n;
        active.remove(qq);
        u.remove(qq);
        for i in qq..self.iq - 1 {
            for row in 0..n {
                self.r[(row, i)] = self.r[(row, i + 1)];
            }
        }
        for row in 0..n {
            self.r[(row, self.iq - 1)] = 0.0;
        }
        self.iq -= 1;
        if self.iq == 0 {
            return;
        }
        for jj in qq..self.iq {
            let mut cc = self.r[(jj, jj)];
            let mut ss = self.r[(jj + 1, jj)];
            let h = hypot(cc, ss);
            if h == 0.0 {
                continue;
            }
            cc /= h;
            ss /= h;
            self.r[(jj + 1, jj)] = 0.0;
            if cc < 0.0 {
                self.r[(jj, jj)] = -h;
                cc = -cc;
                ss = -ss;
            } else {
                self.r[(jj, jj)] = h;
            }
            let xny = ss / (1.0 + cc);
            for k in jj + 1..self.iq {
                let t1 = self.r[(jj, k)];
                let t2 = self.r[(jj + 1, k)];
                self.r[(jj, k)] = t1 * cc + t2 * ss;
                self.r[(jj + 1, k)] = xny * (t1 + self.r[(jj, k)]) - t2;
            }
            for k in 0..n {
                let t1 = self.j[(k, jj)];
                let t2 = self.j[(k, jj + 1)];
                self.j[(k, jj)] = t1 * cc + t2 * ss;
                self.j[(k, jj + 1)] = xny * (self.j[(k, jj)] + t1) - t2;
            }
        }
    }
}

/// Solve a strictly convex QP; errors when infeasible or when G is not positive definite.
pub fn solve_qp(p: &QpProblem) -> Result<QpSolution> {
    let n = p.g_vec.len();
    if p.g_mat.nrows() != n || p.g_mat.ncols() != n {
        return Err(Error::Qp("dimension mismatch".into()));
    }
    let chol = p.g_mat.clone().cholesky().ok_or_else(|| Error::Qp("Hessian not positive definite".into()))?;
    let l = chol.l();
    let linv = l.solve_lower_triangular(&DMatrix::identity(n, n)).ok_or_else(|| Error::Qp("singular factor".into()))?;
    let mut f = Factors { n, j: linv.transpose(), r: DMatrix::zeros(n, n), iq: 0, r_norm: 1.0 };
    let mut x = -chol.solve(&p.g_vec);
    let neq = p.eq.len();
    let nin = p.ineq.len();
    // active constraint ids: 0..neq equalities, neq.. inequalities
    let mut active: Vec<usize> = Vec::new();
    let mut u: Vec<f64> = Vec::new();
    let normal = |id: usize| if id < neq { &p.eq[id].0 } else { &p.ineq[id - neq].0 };
    let rhs = |id: usize| if id < neq { p.eq[id].1 } else { p.ineq[id - neq].1 };
    let scale: f64 = 1.0
        + p.eq.iter().chain(p.ineq.iter()).map(|(a, b)| a.amax().max(b.abs())).fold(0.0, f64::max);
    let tol = 1e-12 * scale;

    for id in 0..neq {
        let np = normal(id);
        let mut d = f.d(np);
        let z = f.z(&d);
        let r = f.r_solve(&d);
        let zn = z.dot(np);
        let t2 = if zn.abs() > f64::EPSILON * scale { (rhs(id) - np.dot(&x)) / zn } else { 0.0 };
        x.axpy(t2, &z, 1.0);
        for k in 0..f.iq {
            u[k] -= t2 * r[k];
        }
        u.push(t2);
        active.push(id);
        if !f.add(&mut d) {
            if (np.dot(&x) - rhs(id)).abs() > 1e-9 * scale {
                return Err(Error::Qp("equality constraints are inconsistent".into()));
            }
            // redundant equality: undo the bookkeeping
            f.iq -= 1;
            active.pop();
            u.pop();
        }
    }

    let mut iterations = 0;
    let max_iter = 50 * (n + neq + nin) + 100;
    let mut excluded = vec![false; nin];
    loop {
        iterations += 1;
        if iterations > max_iter {
            return Err(Error::Qp("iteration limit".into()));
        }
        // most violated inequality
        let mut worst = None;
        let mut worst_s = -tol;
        for i in 0..nin {
            if excluded[i] || active.contains(&(neq + i)) {
                continue;
            }
            let (a, b) = &p.ineq[i];
            let s = (a.dot(&x) - b) / a.norm().max(1e-300);
            if s < worst_s {
                worst_s = s;
                worst = Some(i);
            }
        }
        let Some(ip) = worst else { break };
        let pid = neq + ip;
        let np = normal(pid).clone();
        let mut u_plus = 0.0;
        let x_save = x.clone();
        let active_save = active.clone();
        let u_save = u.clone();
        let f_save = (f.j.clone(), f.r.clone(), f.iq, f.r_norm);
        loop {
            iterations += 1;
            if iterations > max_iter {
                return Err(Error::Qp("iteration limit".into()));
            }
            let mut d = f.d(&np);
            let z = f.z(&d);
            let r = f.r_solve(&d);
            // partial step: first active inequality whose multiplier would hit zero
            let mut t1 = f64::INFINITY;
            let mut l = None;
            for k in 0..f.iq {
                if active[k] >= neq && r[k] > 0.0 {
                    let v = u[k] / r[k];
                    if v < t1 {
                        t1 = v;
                        l = Some(k);
                    }
                }
            }
            let zn = z.dot(&np);
            let sp = np.dot(&x) - rhs(pid);
            let t2 = if z.amax() > f64::EPSILON * scale && zn > 0.0 { -sp / zn } else { f64::INFINITY };
            let t = t1.min(t2);
            if !t.is_finite() {
                return Err(Error::Qp("infeasible constraints".into()));
            }
            if !t2.is_finite() {
                for k in 0..f.iq {
                    u[k] -= t * r[k];
                }
                u_plus += t;
                f.drop(&mut active, &mut u, l.expect("partial step has a blocking constraint"));
                continue;
            }
            x.axpy(t, &z, 1.0);
            for k in 0..f.iq {
                u[k] -= t * r[k];
            }
            u_plus += t;
            if t == t2 {
                u.push(u_plus);
                active.push(pid);
                if !f.add(&mut d) {
                    // numerically dependent: restore and skip this constraint
                    x = x_save;
                    active = active_save;
                    u = u_save;
                    f.j = f_save.0;
                    f.r = f_save.1;
                    f.iq = f_save.2;
                    f.r_norm = f_save.3;
                    excluded[ip] = true;
                }
                break;
            }
            f.drop(&mut active, &mut u, l.expect("partial step has a blocking constraint"));
        }
    }
    for i in 0..nin {
        if excluded[i] {
            let (a, b) = &p.ineq[i];
            if a.dot(&x) - b < -1e-7 * scale {
                return Err(Error::Qp("degenerate constraint left violated".into()));
            }
        }
    }
    let mut lambda_eq = vec![0.0; neq];
    let mut lambda_in = vec![0.0; nin];
    for (k, &id) in active.iter().enumerate() {
        if id < neq {
            lambda_eq[id] = u[k];
        } else {
            lambda_in[id - neq] = u[k];
        }
    }
    if let Some((xp, le, li)) = polish(p, &active, neq) {
        let ok = li.iter().all(|l| *l >= -1e-9 * (1.0 + l.abs()))
            && p.ineq.iter().all(|(a, b)| a.dot(&xp) - b >= -1e-9 * scale)
            && (&xp - &x).amax() <= 1e-6 * (1.0 + x.amax());
        if ok {
            x = xp;
            lambda_eq = le;
            lambda_in = li;
        }
    }
    let objective = 0.5 * x.dot(&(&p.g_mat * &x)) + p.g_vec.dot(&x);
    Ok(QpSolution { x, objective, lambda_eq, lambda_in, iterations })
}

/// Re-solve the KKT system of the final active set directly.
fn polish(p: &QpProblem, active: &[usize], neq: usize) -> Option<(DVector<f64>, Vec<f64>, Vec<f64>)> {
    let n = p.g_vec.len();
    let k = active.len();
    let mut kkt = DMatrix::zeros(n + k, n + k);
    let mut rhs = DVector::zeros(n + k);
    kkt.view_mut((0, 0), (n, n)).copy_from(&p.g_mat);
    rhs.rows_mut(0, n).copy_from(&-&p.g_vec);
    for (c, &id) in active.iter().enumerate() {
        let (a, b) = if id < neq { &p.eq[id] } else { &p.ineq[id - neq] };
        for i in 0..n {
            kkt[(i, n + c)] = -a[i];
            kkt[(n + c, i)] = a[i];
        }
        rhs[n + c] = *b;
    }
    let sol = kkt.full_piv_lu().solve(&rhs)?;
    if !sol.iter().all(|v| v.is_finite()) {
        return None;
    }
    let mut le = vec![0.0; neq];
    let mut li = vec![0.0; p.ineq.len()];
    for (c, &id) in active.iter().enumerate() {
        if id < neq {
            le[id] = sol[n + c];
        } else {
            li[id - neq] = sol[n + c];
        }
    }
    Some((sol.rows(0, n).into_owned(), le, li))
}

#[cfg(test)]
mod tests {
    use super::*;

    fn row(v: &[f64]) -> DVector<f64> {
        DVector::from_row_slice(v)
    }

    /// Enumerate active sets and keep the best KKT point (small problems only).
    fn brute_force(p: &QpProblem) -> Option<DVector<f64>> {
        let n = p.g_vec.len();
        let m = p.ineq.len();
        let mut best: Option<(f64, DVector<f64>)> = None;
        for mask in 0u32..(1 << m) {
            let mut rows: Vec<(DVector<f64>, f64)> = p.eq.clone();
            for i in 0..m {
                if mask & (1 << i) != 0 {
                    rows.push(p.ineq[i].clone());
                }
            }
            let k = rows.len();
            if k > n {
                continue;
            }
            let mut kkt = DMatrix::zeros(n + k, n + k);
            let mut rhs = DVector::zeros(n + k);
            kkt.view_mut((0, 0), (n, n)).copy_from(&p.g_mat);
            for (c, (a, b)) in rows.iter().enumerate() {
                for i in 0..n {
                    kkt[(i, n + c)] = -a[i];
                    kkt[(n + c, i)] = a[i];
                }
                rhs[n + c] = *b;
            }
            for i in 0..n {
                rhs[i] = -p.g_vec[i];
            }
            let Some(sol) = kkt.lu().solve(&rhs) else { continue };
            let x = sol.rows(0, n).into_owned();
            let feasible = p.ineq.iter().all(|(a, b)| a.dot(&x) >= b - 1e-9)
                && p.eq.iter().all(|(a, b)| (a.dot(&x) - b).abs() < 1e-9);
            if !feasible {
                continue;
            }
            let obj = 0.5 * x.dot(&(&p.g_mat * &x)) + p.g_vec.dot(&x);
            if best.as_ref().map_or(true, |(o, _)| obj < *o) {
                best = Some((obj, x));
            }
        }
        best.map(|b| b.1)
    }

    #[test]
    fn unconstrained_minimum() {
        let p = QpProblem {
            g_mat: DMatrix::from_row_slice(2, 2, &[2.0, 0.5, 0.5, 1.0]),
            g_vec: row(&[-1.0, 1.0]),
            eq: vec![],
            ineq: vec![],
        };
        let s = solve_qp(&p).unwrap();
        let grad = &p.g_mat * &s.x + &p.g_vec;
        assert!(grad.amax() < 1e-12);
    }

    #[test]
    fn active_upper_bound() {
        // min (u-2)^2 s.t. u <= 1
        let p = QpProblem {
            g_mat: DMatrix::from_element(1, 1, 2.0),
            g_vec: row(&[-4.0]),
            eq: vec![],
            ineq: vec![(row(&[-1.0]), -1.0)],
        };
        let s = solve_qp(&p).unwrap();
        assert!((s.x[0] - 1.0).abs() < 1e-14);
        assert!((s.lambda_in[0] - 2.0).abs() < 1e-12);
    }

    #[test]
    fn matches_active_set_enumeration() {
        let mut seed = 12345u64;
        let mut rnd = || {
            seed = seed.wrapping_mul(6364136223846793005).wrapping_add(1442695040888963407);
            ((seed >> 11) as f64 / (1u64 << 53) as f64) * 2.0 - 1.0
        };
        for _ in 0..60 {
            let n = 3;
            let m = DMatrix::from_fn(n, n, |_, _| rnd());
            let g_mat = &m * m.transpose() + DMatrix::identity(n, n) * 0.5;
            let g_vec = DVector::from_fn(n, |_, _| 3.0 * rnd());
            let ineq: Vec<_> = (0..5).map(|_| (DVector::from_fn(n, |_, _| rnd()), rnd() - 0.8)).collect();
            let eq = if rnd() > 0.3 { vec![(DVector::from_fn(n, |_, _| rnd()), 0.3 * rnd())] } else { vec![] };
            let p = QpProblem { g_mat, g_vec, eq, ineq };
            let oracle = brute_force(&p);
            match (solve_qp(&p), oracle) {
                (Ok(s), Some(x)) => assert!((s.x - x).amax() < 1e-8),
                (Err(_), None) => {}
                (a, b) => panic!("solver {:?} vs oracle {:?}", a.map(|s| s.x), b),
            }
        }
    }

    #[test]
    fn detects_infeasibility() {
        let p = QpProblem {
            g_mat: DMatrix::identity(1, 1),
            g_vec: row(&[0.0]),
            eq: vec![],
            ineq: vec![(row(&[1.0]), 1.0), (row(&[-1.0]), 0.0)],
        };
        assert!(solve_qp(&p).is_err());
    }

    #[test]
    fn redundant_constraints_are_tolerated() {
        // box plus a duplicated bound and a dependent combination
        let p = QpProblem {
            g_mat: DMatrix::identity(2, 2),
            g_vec: row(&[-5.0, -5.0]),
            eq: vec![],
            ineq: vec![
                (row(&[-1.0, 0.0]), -1.0),
                (row(&[-1.0, 0.0]), -1.0),
                (row(&[0.0, -1.0]), -1.0),
                (row(&[-1.0, -1.0]), -2.0),
            ],
        };
        let s = solve_qp(&p).unwrap();
        assert!((s.x - row(&[1.0, 1.0])).amax() < 1e-12);
    }
}
