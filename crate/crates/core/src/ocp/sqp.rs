//! Trust-region SQP with elastic constraints, an ℓ1 merit function and damped BFGS.

use nalgebra::{DMatrix, DVector};
use serde::Serialize;

use super::qp::{solve_qp, QpProblem};
use crate::error::{Error, Result};

/// Objective and nonlinear constraint values at a point. Inequalities are `c_in ≥ 0`.
#[derive(Debug, Clone)]
pub struct Evaluation {
    pub f: f64,
    pub c_eq: Vec<f64>,
    pub c_in: Vec<f64>,
}

#[derive(Debug, Clone)]
pub struct Derivatives {
    pub grad: DVector<f64>,
    /// One row per equality.
    pub jac_eq: DMatrix<f64>,
    pub jac_in: DMatrix<f64>,
}

pub trait NlpProblem {
    fn dim(&self) -> usize;

    fn evaluate(&self, x: &DVector<f64>) -> Result<Evaluation>;

    fn derivatives(&self, x: &DVector<f64>, at: &Evaluation) -> Result<Derivatives>;

    /// Simple bounds, enforced at every iterate.
    fn bounds(&self) -> (DVector<f64>, DVector<f64>) {
        let n = self.dim();
        (DVector::from_element(n, f64::NEG_INFINITY), DVector::from_element(n, f64::INFINITY))
    }

    /// Linear inequalities `a·x ≥ b`, enforced at every iterate.
    fn linear(&self) -> Vec<(DVector<f64>, f64)> {
        Vec::new()
    }

    /// Typical magnitude of each variable, used for the trust box.
    fn scale(&self) -> DVector<f64> {
        DVector::from_element(self.dim(), 1.0)
    }
}

#[derive(Debug, Clone)]
pub struct SqpOptions {
    pub max_iterations: usize,
    pub max_evaluations: usize,
    pub feasibility_tol: f64,
    pub step_tol: f64,
    pub optimality_tol: f64,
    pub initial_radius: f64,
    pub min_radius: f64,
    pub initial_penalty: f64,
    /// Curvature added to the elastic slacks.
    pub slack_curvature: f64,
    /// Return the final iterate of a converged run rather than the best feasible one seen.
    pub prefer_converged: bool,
    /// Constraint residuals below this size are free in the merit function.
    pub merit_deadzone: f64,
}

impl Default for SqpOptions {
    fn default() -> Self {
        SqpOptions {
            max_iterations: 200,
            max_evaluations: 2000,
            feasibility_tol: 1e-6,
            step_tol: 1e-9,
            optimality_tol: 1e-14,
            initial_radius: 0.5,
            min_radius: 1e-10,
            initial_penalty: 10.0,
            slack_curvature: 1e-6,
            prefer_converged: true,
            merit_deadzone: 0.0,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
pub enum SqpStatus {
    Converged,
    IterationLimit,
    EvaluationLimit,
    /// Trust region collapsed without reaching a KKT point.
    Stalled,
}

#[derive(Debug, Clone, Serialize)]
pub struct IterationRecord {
    pub iteration: usize,
    pub objective: f64,
    pub violation: f64,
    pub merit: f64,
    pub radius: f64,
    pub evaluations: usize,
}

#[derive(Debug, Clone)]
pub struct SqpResult {
    /// Best feasible iterate when one was found, otherwise the last accepted iterate.
    pub x: DVector<f64>,
    pub objective: f64,
    pub violation: f64,
    pub feasible: bool,
    pub status: SqpStatus,
    pub iterations: usize,
    pub evaluations: usize,
    pub history: Vec<IterationRecord>,
    pub lambda_eq: Vec<f64>,
    pub lambda_in: Vec<f64>,
}

pub fn violation(e: &Evaluation) -> f64 {
    e.c_eq.iter().map(|c| c.abs()).chain(e.c_in.iter().map(|c| (-c).max(0.0))).fold(0.0, f64::max)
}

fn l1_excess(eq: impl Iterator<Item = f64>, ineq: impl Iterator<Item = f64>, dz: f64) -> f64 {
    eq.map(|c| (c.abs() - dz).max(0.0)).sum::<f64>() + ineq.map(|c| (-c - dz).max(0.0)).sum::<f64>()
}

fn l1_violation(e: &Evaluation, dz: f64) -> f64 {
    l1_excess(e.c_eq.iter().copied(), e.c_in.iter().copied(), dz)
}

fn lagrangian_gradient(d: &Derivatives, le: &[f64], li: &[f64]) -> DVector<f64> {
    let mut g = d.grad.clone();
    for (k, l) in le.iter().enumerate() {
        g -= d.jac_eq.row(k).transpose() * *l;
    }
    for (k, l) in li.iter().enumerate() {
        g -= d.jac_in.row(k).transpose() * *l;
    }
    g
}

struct Subproblem {
    step: DVector<f64>,
    lambda_eq: Vec<f64>,
    lambda_in: Vec<f64>,
    predicted: f64,
    on_boundary: bool,
}

#[allow(clippy::too_many_arguments)]
fn subproblem(
    x: &DVector<f64>,
    e: &Evaluation,
    d: &Derivatives,
    b: &DMatrix<f64>,
    mu: f64,
    radius: f64,
    scale: &DVector<f64>,
    bounds: &(DVector<f64>, DVector<f64>),
    linear: &[(DVector<f64>, f64)],
    opts: &SqpOptions,
) -> Result<Subproblem> {
    let n = x.len();
    let ne = e.c_eq.len();
    let ni = e.c_in.len();
    let nv = n + 2 * ne + ni;
    let mut g_mat = DMatrix::zeros(nv, nv);
    g_mat.view_mut((0, 0), (n, n)).copy_from(b);
    let mut g_vec = DVector::zeros(nv);
    g_vec.rows_mut(0, n).copy_from(&d.grad);
    let eps = opts.slack_curvature * mu.max(1.0);
    for k in n..nv {
        g_mat[(k, k)] = eps;
        g_vec[k] = mu;
    }
    let unit = |k: usize, v: f64| {
        let mut a = DVector::zeros(nv);
        a[k] = v;
        a
    };
    let mut eq = Vec::with_capacity(ne);
    for k in 0..ne {
        let mut a = DVector::zeros(nv);
        a.rows_mut(0, n).copy_from(&d.jac_eq.row(k).transpose());
        a[n + 2 * k] = 1.0;
        a[n + 2 * k + 1] = -1.0;
        eq.push((a, -e.c_eq[k]));
    }
    let mut ineq = Vec::new();
    for k in 0..ni {
        let mut a = DVector::zeros(nv);
        a.rows_mut(0, n).copy_from(&d.jac_in.row(k).transpose());
        a[n + 2 * ne + k] = 1.0;
        ineq.push((a, -e.c_in[k]));
    }
    for k in n..nv {
        ineq.push((unit(k, 1.0), 0.0));
    }
    for i in 0..n {
        let r = radius * scale[i];
        let lo = (bounds.0[i] - x[i]).max(-r);
        let hi = (bounds.1[i] - x[i]).min(r);
        ineq.push((unit(i, 1.0), lo));
        ineq.push((unit(i, -1.0), -hi));
    }
    for (a, rhs) in linear {
        let mut row = DVector::zeros(nv);
        row.rows_mut(0, n).copy_from(a);
        ineq.push((row, rhs - a.dot(x)));
    }
    let sol = solve_qp(&QpProblem { g_mat, g_vec, eq, ineq })?;
    let step = sol.x.rows(0, n).into_owned();
    let lin = l1_excess(
        (0..ne).map(|k| e.c_eq[k] + d.jac_eq.row(k).dot(&step.transpose())),
        (0..ni).map(|k| e.c_in[k] + d.jac_in.row(k).dot(&step.transpose())),
        opts.merit_deadzone,
    );
    let model = d.grad.dot(&step) + 0.5 * step.dot(&(b * &step)) + mu * lin;
    let predicted = mu * l1_violation(e, opts.merit_deadzone) - model;
    let on_boundary = (0..n).any(|i| step[i].abs() >= 0.999 * radius * scale[i]);
    Ok(Subproblem {
        step,
        lambda_eq: sol.lambda_eq[..ne].to_vec(),
        lambda_in: sol.lambda_in[..ni].to_vec(),
        predicted,
        on_boundary,
    })
}

/// Minimize from `x0`. The start is clipped into the bounds.
pub fn minimize(problem: &dyn NlpProblem, x0: &DVector<f64>, opts: &SqpOptions) -> Result<SqpResult> {
    minimize_with(problem, x0, opts, |_| {})
}

/// As [`minimize`], calling `observe` after every accepted iteration.
pub fn minimize_with(
    problem: &dyn NlpProblem,
    x0: &DVector<f64>,
    opts: &SqpOptions,
    mut observe: impl FnMut(&IterationRecord),
) -> Result<SqpResult> {
    let n = problem.dim();
    if x0.len() != n {
        return Err(Error::InvalidArgument(format!("start has {} entries, problem has {n}", x0.len())));
    }
    let bounds = problem.bounds();
    let linear = problem.linear();
    let scale = problem.scale();
    let mut x = DVector::from_fn(n, |i, _| x0[i].clamp(bounds.0[i], bounds.1[i]));
    let mut e = problem.evaluate(&x)?;
    let mut d = problem.derivatives(&x, &e)?;
    let mut evaluations = 1;
    let mut b = DMatrix::<f64>::identity(n, n);
    let mut scaled_b = false;
    let mut mu = opts.initial_penalty;
    let mut radius = opts.initial_radius;
    let mut lambda_eq = vec![0.0; e.c_eq.len()];
    let mut lambda_in = vec![0.0; e.c_in.len()];
    let mut history = Vec::new();
    let mut best: Option<(DVector<f64>, f64, f64)> = None;
    let record_best = |x: &DVector<f64>, e: &Evaluation, best: &mut Option<(DVector<f64>, f64, f64)>| {
        let v = violation(e);
        if v <= opts.feasibility_tol && best.as_ref().map_or(true, |bst| e.f < bst.1) {
            *best = Some((x.clone(), e.f, v));
        }
    };
    record_best(&x, &e, &mut best);
    let first = IterationRecord {
        iteration: 0,
        objective: e.f,
        violation: violation(&e),
        merit: e.f + mu * l1_violation(&e, opts.merit_deadzone),
        radius,
        evaluations,
    };
    observe(&first);
    history.push(first);
    let mut status = SqpStatus::IterationLimit;
    let mut iterations = 0;
    while iterations < opts.max_iterations {
        iterations += 1;
        let mut sp = subproblem(&x, &e, &d, &b, mu, radius, &scale, &bounds, &linear, opts)?;
        let lmax = sp.lambda_eq.iter().chain(sp.lambda_in.iter()).fold(0.0f64, |a, l| a.max(l.abs()));
        if mu < 1.5 * lmax {
            mu = 2.0 * lmax;
            sp = subproblem(&x, &e, &d, &b, mu, radius, &scale, &bounds, &linear, opts)?;
        }
        let step_norm = (0..n).map(|i| sp.step[i].abs() / scale[i]).fold(0.0, f64::max);
        let viol = violation(&e);
        if viol <= opts.feasibility_tol
            && (step_norm <= opts.step_tol || sp.predicted <= opts.optimality_tol * (1.0 + e.f.abs()))
        {
            lambda_eq = sp.lambda_eq;
            lambda_in = sp.lambda_in;
            status = SqpStatus::Converged;
            break;
        }
        if radius < opts.min_radius {
            status = SqpStatus::Stalled;
            break;
        }
        if evaluations >= opts.max_evaluations {
            status = SqpStatus::EvaluationLimit;
            break;
        }
        let xt = &x + &sp.step;
        evaluations += 1;
        let trial = match problem.evaluate(&xt) {
            Ok(t) if t.f.is_finite() && t.c_eq.iter().chain(t.c_in.iter()).all(|c| c.is_finite()) => Some(t),
            Ok(_) | Err(Error::NonFinite { .. }) | Err(Error::Attitude { .. }) => None,
            Err(err) => return Err(err),
        };
        let Some(t) = trial else {
            radius *= 0.25;
            continue;
        };
        let merit = e.f + mu * l1_violation(&e, opts.merit_deadzone);
        let ratio_of = |t: &Evaluation| {
            let actual = merit - (t.f + mu * l1_violation(t, opts.merit_deadzone));
            if sp.predicted > 0.0 { actual / sp.predicted } else if actual >= 0.0 { 1.0 } else { -1.0 }
        };
        let mut ratio = ratio_of(&t);
        let (mut xt, mut t, mut step) = (xt, t, sp.step.clone());
        if ratio < 0.1 && evaluations < opts.max_evaluations {
            if let Some(corr) = second_order_correction(&d, &t, &(&x + &sp.step), &bounds, &linear) {
                let xc = &xt + &corr;
                evaluations += 1;
                if let Ok(tc) = problem.evaluate(&xc) {
                    if tc.f.is_finite() && ratio_of(&tc) >= 0.1 {
                        ratio = ratio_of(&tc);
                        step = &sp.step + corr;
                        xt = xc;
                        t = tc;
                    }
                }
            }
        }
        if ratio < 0.1 {
            radius = 0.25 * step_norm.max(opts.min_radius * 0.5).min(radius);
            continue;
        }
        if ratio > 0.75 && sp.on_boundary {
            radius *= 2.0;
        } else if ratio < 0.25 {
            radius *= 0.5;
        }
        let dt = problem.derivatives(&xt, &t)?;
        let g_old = lagrangian_gradient(&d, &sp.lambda_eq, &sp.lambda_in);
        let g_new = lagrangian_gradient(&dt, &sp.lambda_eq, &sp.lambda_in);
        update_bfgs(&mut b, &step, &(g_new - g_old), &mut scaled_b);
        x = xt;
        e = t;
        d = dt;
        lambda_eq = sp.lambda_eq;
        lambda_in = sp.lambda_in;
        record_best(&x, &e, &mut best);
        let rec = IterationRecord {
            iteration: iterations,
            objective: e.f,
            violation: violation(&e),
            merit: e.f + mu * l1_violation(&e, opts.merit_deadzone),
            radius,
            evaluations,
        };
        observe(&rec);
        history.push(rec);
    }
    let last_v = violation(&e);
    let (x_out, f_out, v_out, feasible) = match best {
        _ if status == SqpStatus::Converged && opts.prefer_converged => (x, e.f, last_v, last_v <= opts.feasibility_tol),
        Some((bx, bf, bv)) => (bx, bf, bv, true),
        None => (x, e.f, last_v, false),
    };
    Ok(SqpResult {
        x: x_out,
        objective: f_out,
        violation: v_out,
        feasible,
        status,
        iterations,
        evaluations,
        history,
        lambda_eq,
        lambda_in,
    })
}

/// Minimum-norm step that cancels the constraint residuals at the trial point to first order.
fn second_order_correction(
    d: &Derivatives,
    t: &Evaluation,
    xt: &DVector<f64>,
    bounds: &(DVector<f64>, DVector<f64>),
    linear: &[(DVector<f64>, f64)],
) -> Option<DVector<f64>> {
    let n = xt.len();
    let mut rows: Vec<(DVector<f64>, f64)> = Vec::new();
    for (k, c) in t.c_eq.iter().enumerate() {
        rows.push((d.jac_eq.row(k).transpose(), *c));
    }
    for (k, c) in t.c_in.iter().enumerate() {
        if *c < 0.0 {
            rows.push((d.jac_in.row(k).transpose(), *c));
        }
    }
    if rows.is_empty() {
        return None;
    }
    let j = DMatrix::from_fn(rows.len(), n, |r, c| rows[r].0[c]);
    let c = DVector::from_fn(rows.len(), |r, _| rows[r].1);
    let jjt = &j * j.transpose() + DMatrix::identity(rows.len(), rows.len()) * 1e-12;
    let y = jjt.cholesky()?.solve(&c);
    let corr = -(j.transpose() * y);
    let xc = xt + &corr;
    let inside = (0..n).all(|i| xc[i] >= bounds.0[i] && xc[i] <= bounds.1[i])
        && linear.iter().all(|(a, b)| a.dot(&xc) >= b - 1e-12);
    inside.then_some(corr)
}

/// Powell-damped BFGS update; the first update rescales the identity.
fn update_bfgs(b: &mut DMatrix<f64>, s: &DVector<f64>, y: &DVector<f64>, scaled: &mut bool) {
    let ss = s.dot(s);
    if ss == 0.0 {
        return;
    }
    if !*scaled {
        let sy = s.dot(y);
        let yy = y.dot(y);
        if sy > 0.0 && yy > 0.0 {
            *b *= yy / sy;
        }
        *scaled = true;
    }
    let bs = &*b * s;
    let sbs = s.dot(&bs);
    if sbs <= 0.0 {
        return;
    }
    let sy = s.dot(y);
    let theta = if sy >= 0.2 * sbs { 1.0 } else { 0.8 * sbs / (sbs - sy) };
    let r = y * theta + &bs * (1.0 - theta);
    let sr = s.dot(&r);
    if sr <= 1e-16 * sbs {
        return;
    }
    *b += &r * r.transpose() / sr - &bs * bs.transpose() / sbs;
    // keep symmetric against roundoff
    let bt = b.transpose();
    *b = (&*b + bt) * 0.5;
}

/// Central-difference derivatives for problems with cheap evaluations.
pub fn central_derivatives(f: impl Fn(&DVector<f64>) -> Result<Evaluation>, x: &DVector<f64>, at: &Evaluation, h: &DVector<f64>) -> Result<Derivatives> {
    let n = x.len();
    let ne = at.c_eq.len();
    let ni = at.c_in.len();
    let mut grad = DVector::zeros(n);
    let mut jac_eq = DMatrix::zeros(ne, n);
    let mut jac_in = DMatrix::zeros(ni, n);
    for i in 0..n {
        let mut xp = x.clone();
        let mut xm = x.clone();
        xp[i] += h[i];
        xm[i] -= h[i];
        let ep = f(&xp)?;
        let em = f(&xm)?;
        let w = 2.0 * h[i];
        grad[i] = (ep.f - em.f) / w;
        for k in 0..ne {
            jac_eq[(k, i)] = (ep.c_eq[k] - em.c_eq[k]) / w;
        }
        for k in 0..ni {
            jac_in[(k, i)] = (ep.c_in[k] - em.c_in[k]) / w;
        }
    }
    Ok(Derivatives { grad, jac_eq, jac_in })
}

#[cfg(test)]
mod tests {
    use super::*;

    struct BoxQuadratic;

    impl NlpProblem for BoxQuadratic {
        fn dim(&self) -> usize {
            2
        }

        fn evaluate(&self, x: &DVector<f64>) -> Result<Evaluation> {
            Ok(Evaluation { f: (x[0] - 3.0).powi(2) + 2.0 * (x[1] + 1.0).powi(2), c_eq: vec![], c_in: vec![] })
        }

        fn derivatives(&self, x: &DVector<f64>, _: &Evaluation) -> Result<Derivatives> {
            Ok(Derivatives {
                grad: DVector::from_row_slice(&[2.0 * (x[0] - 3.0), 4.0 * (x[1] + 1.0)]),
                jac_eq: DMatrix::zeros(0, 2),
                jac_in: DMatrix::zeros(0, 2),
            })
        }

        fn bounds(&self) -> (DVector<f64>, DVector<f64>) {
            (DVector::from_row_slice(&[-1.0, -0.5]), DVector::from_row_slice(&[1.0, 0.5]))
        }
    }

    struct Rosenbrock {
        constrained: bool,
    }

    impl NlpProblem for Rosenbrock {
        fn dim(&self) -> usize {
            2
        }

        fn evaluate(&self, x: &DVector<f64>) -> Result<Evaluation> {
            let f = 100.0 * (x[1] - x[0] * x[0]).powi(2) + (1.0 - x[0]).powi(2);
            let c_in = if self.constrained { vec![1.0 - x[0] * x[0] - x[1] * x[1]] } else { vec![] };
            Ok(Evaluation { f, c_eq: vec![], c_in })
        }

        fn derivatives(&self, x: &DVector<f64>, _: &Evaluation) -> Result<Derivatives> {
            let grad = DVector::from_row_slice(&[
                -400.0 * x[0] * (x[1] - x[0] * x[0]) - 2.0 * (1.0 - x[0]),
                200.0 * (x[1] - x[0] * x[0]),
            ]);
            let jac_in = if self.constrained {
                DMatrix::from_row_slice(1, 2, &[-2.0 * x[0], -2.0 * x[1]])
            } else {
                DMatrix::zeros(0, 2)
            };
            Ok(Derivatives { grad, jac_eq: DMatrix::zeros(0, 2), jac_in })
        }
    }

    struct Circle;

    impl NlpProblem for Circle {
        fn dim(&self) -> usize {
            2
        }

        fn evaluate(&self, x: &DVector<f64>) -> Result<Evaluation> {
            Ok(Evaluation { f: x[0] + x[1], c_eq: vec![x[0] * x[0] + x[1] * x[1] - 2.0], c_in: vec![] })
        }

        fn derivatives(&self, x: &DVector<f64>, _: &Evaluation) -> Result<Derivatives> {
            Ok(Derivatives {
                grad: DVector::from_row_slice(&[1.0, 1.0]),
                jac_eq: DMatrix::from_row_slice(1, 2, &[2.0 * x[0], 2.0 * x[1]]),
                jac_in: DMatrix::zeros(0, 2),
            })
        }
    }

    #[test]
    fn box_constrained_quadratic_lands_on_the_corner() {
        let r = minimize(&BoxQuadratic, &DVector::from_row_slice(&[0.0, 0.0]), &SqpOptions::default()).unwrap();
        assert_eq!(r.status, SqpStatus::Converged);
        assert!((r.x[0] - 1.0).abs() < 1e-10 && (r.x[1] + 0.5).abs() < 1e-10, "{}", r.x);
    }

    #[test]
    fn rosenbrock_unconstrained() {
        let r = minimize(&Rosenbrock { constrained: false }, &DVector::from_row_slice(&[-1.2, 1.0]), &SqpOptions::default())
            .unwrap();
        assert!((r.x[0] - 1.0).abs() < 1e-6 && (r.x[1] - 1.0).abs() < 1e-6, "{} {:?}", r.x, r.status);
    }

    #[test]
    fn rosenbrock_in_the_unit_disc() {
        let r = minimize(&Rosenbrock { constrained: true }, &DVector::from_row_slice(&[0.0, 0.0]), &SqpOptions::default())
            .unwrap();
        // known optimum on the boundary
        assert!((r.x[0] - 0.786_415_1).abs() < 1e-5 && (r.x[1] - 0.617_698_3).abs() < 1e-5, "{}", r.x);
        assert!(r.feasible);
    }

    #[test]
    fn equality_constrained_minimum_from_infeasible_start() {
        let r = minimize(&Circle, &DVector::from_row_slice(&[0.5, -0.2]), &SqpOptions::default()).unwrap();
        assert!((r.x[0] + 1.0).abs() < 1e-6 && (r.x[1] + 1.0).abs() < 1e-6, "{} {:?}", r.x, r.status);
        assert!(r.feasible && (r.lambda_eq[0] + 0.5).abs() < 1e-4, "{:?}", r.lambda_eq);
    }

    #[test]
    fn history_objective_of_accepted_steps_reduces_merit() {
        let r = minimize(&Rosenbrock { constrained: false }, &DVector::from_row_slice(&[-1.2, 1.0]), &SqpOptions::default())
            .unwrap();
        assert!(r.history.windows(2).all(|w| w[1].objective <= w[0].objective + 1e-12));
    }
}
