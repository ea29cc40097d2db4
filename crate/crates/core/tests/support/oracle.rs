//! First-order reference solver for conic problems: over-relaxed ADMM on
//! `min c'x  s.t.  A x + b in K`, with `K` a product of half-lines,
//! second-order cones and paraboloids `{(r, y) : ||y||^2 <= r}`.
//!
//! It shares nothing with the interior-point code beyond the problem
//! description: quadratic constraints are projected onto directly instead
//! of being lowered to rotated cones.

use faer::linalg::solvers::Solve;
use faer::{Mat, Side};
use rosar_core::conic::{ConicProblem, ConstraintKind};

const ALPHA: f64 = 1.6;
const SIGMA: f64 = 1e-6;
const MAX_ITER: usize = 400_000;
const TOL: f64 = 1e-10;

enum Cone {
    NonNeg,
    Soc,
    Paraboloid,
}

pub struct Reference {
    pub objective: f64,
    pub iterations: usize,
    pub converged: bool,
}

fn project(cone: &Cone, v: &mut [f64]) {
    match cone {
        Cone::NonNeg => v[0] = v[0].max(0.0),
        Cone::Soc => {
            let t = v[0];
            let n = v[1..].iter().map(|x| x * x).sum::<f64>().sqrt();
            if n <= t {
                return;
            }
            if n <= -t {
                v.iter_mut().for_each(|x| *x = 0.0);
                return;
            }
            let a = 0.5 * (t + n);
            v[0] = a;
            v[1..].iter_mut().for_each(|x| *x *= a / n);
        }
        Cone::Paraboloid => {
            let r0 = v[0];
            let y2 = v[1..].iter().map(|x| x * x).sum::<f64>();
            if y2 <= r0 {
                return;
            }
            // Stationarity gives y = y0 / (1 + 2 mu), r = r0 + mu with
            // ||y||^2 = r. The residual is convex and decreasing in mu, so
            // Newton from mu = 0 climbs monotonically to the root.
            let mut mu = 0.0f64;
            for _ in 0..200 {
                let q = 1.0 + 2.0 * mu;
                let f = y2 / (q * q) - r0 - mu;
                let df = -4.0 * y2 / (q * q * q) - 1.0;
                let step = f / df;
                mu -= step;
                if step.abs() <= 1e-16 * (1.0 + mu) {
                    break;
                }
            }
            v[0] = r0 + mu;
            let q = 1.0 + 2.0 * mu;
            v[1..].iter_mut().for_each(|x| *x /= q);
        }
    }
}

pub fn admm(problem: &ConicProblem) -> Reference {
    let n = problem.num_vars();
    let c = &problem.objective;
    let mut rows = Vec::new();
    let mut blocks = Vec::new();
    for con in &problem.constraints {
        let cone = match con.kind {
            ConstraintKind::Linear => Cone::NonNeg,
            ConstraintKind::SecondOrderCone => Cone::Soc,
            ConstraintKind::Quadratic => Cone::Paraboloid,
        };
        blocks.push((rows.len(), con.exprs.len(), cone));
        rows.extend(con.exprs.iter());
    }
    let m = rows.len();
    let mut a = Mat::<f64>::zeros(m, n);
    let mut b = vec![0.0; m];
    for (i, e) in rows.iter().enumerate() {
        for &(j, v) in &e.terms {
            a[(i, j)] += v;
        }
        b[i] = e.constant;
    }
    let ata = a.transpose() * &a;
    let factor = |rho: f64| {
        let k = Mat::<f64>::from_fn(n, n, |i, j| rho * ata[(i, j)] + if i == j { SIGMA } else { 0.0 });
        k.llt(Side::Lower).expect("rho A'A + sigma I is positive definite")
    };

    let mut rho = 1.0;
    let mut llt = factor(rho);
    let mut x = Mat::<f64>::zeros(n, 1);
    let mut v = b.clone();
    for &(start, len, ref cone) in &blocks {
        project(cone, &mut v[start..start + len]);
    }
    let mut u = vec![0.0; m];
    let mut ax = vec![0.0; m];
    let mut iterations = 0;
    let mut converged = false;
    while iterations < MAX_ITER {
        iterations += 1;
        let mut rhs = Mat::<f64>::from_fn(m, 1, |i, _| -rho * (b[i] - v[i] + u[i]));
        rhs = a.transpose() * &rhs;
        for j in 0..n {
            rhs[(j, 0)] += SIGMA * x[(j, 0)] - c[j];
        }
        let x_new = llt.solve(&rhs);
        let prod = &a * &x_new;
        for i in 0..m {
            ax[i] = prod[(i, 0)] + b[i];
        }
        let v_old = v.clone();
        for i in 0..m {
            let relaxed = ALPHA * ax[i] + (1.0 - ALPHA) * v_old[i];
            v[i] = relaxed + u[i];
        }
        for &(start, len, ref cone) in &blocks {
            project(cone, &mut v[start..start + len]);
        }
        for i in 0..m {
            let relaxed = ALPHA * ax[i] + (1.0 - ALPHA) * v_old[i];
            u[i] += relaxed - v[i];
        }
        let dx = (0..n).map(|j| (x_new[(j, 0)] - x[(j, 0)]).abs()).fold(0.0, f64::max);
        x = x_new;

        if iterations % 10 == 0 {
            let primal = (0..m).map(|i| (ax[i] - v[i]).abs()).fold(0.0, f64::max);
            let dv = Mat::<f64>::from_fn(m, 1, |i, _| v[i] - v_old[i]);
            let atdv = a.transpose() * &dv;
            let dual = (0..n).map(|j| (rho * atdv[(j, 0)]).abs()).fold(0.0, f64::max) + SIGMA * dx;
            let scale_p = ax.iter().chain(&v).fold(1.0f64, |s, x| s.max(x.abs()));
            let scale_d = c.iter().fold(1.0f64, |s, x| s.max(x.abs()));
            if primal <= TOL * scale_p && dual <= TOL * scale_d {
                converged = true;
                break;
            }
            if iterations % 50 == 0 {
                let ratio = (primal / scale_p) / (dual / scale_d).max(1e-300);
                if !(0.1..=10.0).contains(&ratio) {
                    let new_rho = (rho * ratio.sqrt()).clamp(1e-6, 1e6);
                    u.iter_mut().for_each(|x| *x *= rho / new_rho);
                    rho = new_rho;
                    llt = factor(rho);
                }
            }
        }
    }
    let objective = (0..n).map(|j| c[j] * x[(j, 0)]).sum();
    Reference {
        objective,
        iterations,
        converged,
    }
}
