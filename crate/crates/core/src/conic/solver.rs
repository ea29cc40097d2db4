//! Primal-dual interior-point method with Nesterov-Todd scaling and a
//! Mehrotra predictor-corrector.
//!
//! Newton systems are reduced to the normal equations `G' W^-2 G dx = r`.
//! The Gram matrix is assembled block by block: dense rows (many nonzeros)
//! are stacked and multiplied in one GEMM; sparse rows are scattered.
//! Variables that appear in a single cone and in no dense row (typically
//! epigraph variables) are removed by a diagonal Schur complement before the
//! Cholesky factorization.

use faer::linalg::solvers::Solve;
use faer::{Accum, Mat, Par, Side};

use super::cone::{self, Block, BlockScaling, Scaling};
use super::{ConicProblem, StandardForm};
use crate::error::Result;

/// Rows with more nonzeros than this go through the dense GEMM path.
const DENSE_ROW_NNZ: usize = 24;
const STEP_FRACTION: f64 = 0.99;
/// Residual level at which a stalled solve still reports a usable point.
const REDUCED_ACCURACY: f64 = 1e-6;
const REFINEMENT_STEPS: usize = 3;

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Tolerances {
    /// Bound on relative primal and dual residuals.
    pub feas: f64,
    /// Bound on the relative duality gap `s'z / max(1, |c'x|)`.
    pub gap: f64,
    pub max_iter: usize,
}

impl Default for Tolerances {
    fn default() -> Self {
        Self {
            feas: 1e-8,
            gap: 1e-8,
            max_iter: 100,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum SolveStatus {
    Optimal,
    /// Progress stalled numerically, but the best iterate meets reduced
    /// tolerances of `1e-6` on residuals and gap.
    Inaccurate,
    MaxIter,
    NumericalFailure,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct IterationLog {
    pub iteration: usize,
    pub primal_objective: f64,
    pub dual_objective: f64,
    pub gap: f64,
    pub primal_residual: f64,
    pub dual_residual: f64,
    pub step: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct ConicSolution {
    pub x: Vec<f64>,
    /// Dual variables, one per row of the lowered cone constraints.
    pub z: Vec<f64>,
    /// Cone slacks `s ~ h - G x`.
    pub s: Vec<f64>,
    pub objective: f64,
    pub status: SolveStatus,
    /// Relative duality gap `s'z / max(1, |c'x|)`.
    pub duality_gap: f64,
    /// Largest of the relative primal residual and the relative cone
    /// violation of `h - G x`.
    pub max_violation: f64,
    pub iterations: usize,
    pub history: Vec<IterationLog>,
    pub message: String,
}

fn norm2(v: &[f64]) -> f64 {
    v.iter().map(|x| x * x).sum::<f64>().sqrt()
}

fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

/// One cone component: a single orthant row or one second-order cone.
struct Unit {
    rows: std::ops::Range<usize>,
    /// Index into the scaling parts, and offset of `rows.start` in that part.
    part: usize,
    offset: usize,
    dense: Vec<usize>,
    sparse: Vec<usize>,
}

/// Structure of `G' W^-2 G` that does not change between iterations.
struct Structure {
    n: usize,
    units: Vec<Unit>,
    dense_cols: Vec<usize>,
    dense_pos: Vec<usize>,
    /// Reduced index per variable, `usize::MAX` if eliminated.
    reduced: Vec<usize>,
    kept: Vec<usize>,
    /// Eliminated variables and the kept variables they couple to.
    eliminated: Vec<(usize, Vec<usize>)>,
}

impl Structure {
    fn new(sf: &StandardForm) -> Self {
        let n = sf.n;
        let mut units = Vec::new();
        for (p, b) in sf.blocks.iter().enumerate() {
            match *b {
                Block::NonNeg { start, len } => {
                    for i in start..start + len {
                        units.push(Unit {
                            rows: i..i + 1,
                            part: p,
                            offset: i - start,
                            dense: Vec::new(),
                            sparse: Vec::new(),
                        });
                    }
                }
                Block::Soc { start, len } => units.push(Unit {
                    rows: start..start + len,
                    part: p,
                    offset: 0,
                    dense: Vec::new(),
                    sparse: Vec::new(),
                }),
            }
        }
        let mut in_dense = vec![false; n];
        let mut unit_count = vec![0usize; n];
        let mut last_unit = vec![usize::MAX; n];
        for (u, unit) in units.iter_mut().enumerate() {
            for i in unit.rows.clone() {
                let (cols, _) = sf.row(i);
                if cols.len() > DENSE_ROW_NNZ {
                    unit.dense.push(i);
                    cols.iter().for_each(|&j| in_dense[j] = true);
                } else {
                    unit.sparse.push(i);
                }
                for &j in cols {
                    if last_unit[j] != u {
                        last_unit[j] = u;
                        unit_count[j] += 1;
                    }
                }
            }
        }
        let dense_cols: Vec<usize> = (0..n).filter(|&j| in_dense[j]).collect();
        let mut dense_pos = vec![usize::MAX; n];
        for (k, &j) in dense_cols.iter().enumerate() {
            dense_pos[j] = k;
        }

        let mut unit_taken = vec![false; units.len()];
        let mut eliminated_flag = vec![false; n];
        for j in 0..n {
            if !in_dense[j] && unit_count[j] == 1 && !unit_taken[last_unit[j]] {
                unit_taken[last_unit[j]] = true;
                eliminated_flag[j] = true;
            }
        }
        let mut reduced = vec![usize::MAX; n];
        let mut kept = Vec::new();
        for j in 0..n {
            if !eliminated_flag[j] {
                reduced[j] = kept.len();
                kept.push(j);
            }
        }
        let mut eliminated = Vec::new();
        for j in 0..n {
            if eliminated_flag[j] {
                let unit = &units[last_unit[j]];
                let mut partners: Vec<usize> = unit
                    .rows
                    .clone()
                    .flat_map(|i| sf.row(i).0.iter().copied())
                    .filter(|&c| c != j)
                    .collect();
                partners.sort_unstable();
                partners.dedup();
                eliminated.push((j, partners));
            }
        }
        Self {
            n,
            units,
            dense_cols,
            dense_pos,
            reduced,
            kept,
            eliminated,
        }
    }
}

/// Factorized normal-equation matrix for one scaling.
struct Factor {
    hred: Mat<f64>,
    /// Factor of `D^-1 hred D^-1 + delta I` with `D = sqrt(diag(hred))`.
    llt: faer::linalg::solvers::Llt<f64>,
    inv_scale: Vec<f64>,
    elim: Vec<Eliminated>,
}

/// An eliminated variable: `(j, H_jj, [(kept var, H_jk)])`.
type Eliminated = (usize, f64, Vec<(usize, f64)>);

fn scatter_outer(h: &mut Mat<f64>, a: &[(usize, f64)], b: &[(usize, f64)], k: f64) {
    for &(i, x) in a {
        for &(j, y) in b {
            h[(i, j)] += k * x * y;
        }
    }
}

/// Sparse accumulator over `n` columns.
struct Accumulator {
    values: Vec<f64>,
    marked: Vec<bool>,
    touched: Vec<usize>,
}

impl Accumulator {
    fn new(n: usize) -> Self {
        Self {
            values: vec![0.0; n],
            marked: vec![false; n],
            touched: Vec::new(),
        }
    }
}

/// `sum_i coef(i) g_i` over the given rows, as sparse pairs.
fn combine_rows(sf: &StandardForm, rows: &[usize], coef: &dyn Fn(usize) -> f64, acc: &mut Accumulator) -> Vec<(usize, f64)> {
    for &i in rows {
        let ci = coef(i);
        let (cols, vals) = sf.row(i);
        for (&j, &a) in cols.iter().zip(vals) {
            if !acc.marked[j] {
                acc.marked[j] = true;
                acc.touched.push(j);
            }
            acc.values[j] += ci * a;
        }
    }
    let out = acc.touched.iter().map(|&j| (j, acc.values[j])).collect();
    for &j in &acc.touched {
        acc.values[j] = 0.0;
        acc.marked[j] = false;
    }
    acc.touched.clear();
    out
}

/// Cholesky of a small SPD matrix stored row-major; returns lower factor.
fn small_cholesky(q: &[f64], n: usize) -> Option<Vec<f64>> {
    let mut l = vec![0.0; n * n];
    for i in 0..n {
        for j in 0..=i {
            let mut sum = q[i * n + j];
            for k in 0..j {
                sum -= l[i * n + k] * l[j * n + k];
            }
            if i == j {
                if !(sum > 0.0) {
                    return None;
                }
                l[i * n + i] = sum.sqrt();
            } else {
                l[i * n + j] = sum / l[j * n + j];
            }
        }
    }
    Some(l)
}

impl Structure {
    fn factor(&self, sf: &StandardForm, w: &Scaling) -> Option<Factor> {
        let n = self.n;
        let ndc = self.dense_cols.len();
        let mut h = Mat::<f64>::zeros(n, n);
        let mut stack: Vec<f64> = Vec::new();
        let mut stack_rows = 0usize;
        let push_dense = |coefs: &[(usize, f64)], stack: &mut Vec<f64>| {
            let base = stack.len();
            stack.resize(base + ndc, 0.0);
            for &(i, c) in coefs {
                let (cols, vals) = sf.row(i);
                for (&j, &v) in cols.iter().zip(vals) {
                    stack[base + self.dense_pos[j]] += c * v;
                }
            }
        };
        let row_pairs = |i: usize| -> Vec<(usize, f64)> {
            let (c, v) = sf.row(i);
            c.iter().copied().zip(v.iter().copied()).collect()
        };
        let mut acc = Accumulator::new(n);
        for unit in &self.units {
            match &w.parts[unit.part] {
                BlockScaling::NonNeg(d) => {
                    let i = unit.rows.start;
                    let weight = 1.0 / (d[unit.offset] * d[unit.offset]);
                    if unit.dense.is_empty() {
                        let g = row_pairs(i);
                        scatter_outer(&mut h, &g, &g, weight);
                    } else {
                        push_dense(&[(i, weight.sqrt())], &mut stack);
                        stack_rows += 1;
                    }
                }
                BlockScaling::Soc { beta, w: wb } => {
                    let scale = 1.0 / (beta * beta);
                    let base = unit.rows.start;
                    // W^-2 = scale (2 u u' - J), u = J w
                    let u = |i: usize| if i == base { wb[0] } else { -wb[i - base] };
                    let jdiag = |i: usize| if i == base { 1.0 } else { -1.0 };
                    let nd = unit.dense.len();
                    if nd > 0 {
                        let mut q = vec![0.0; nd * nd];
                        for (a, &ia) in unit.dense.iter().enumerate() {
                            for (b, &ib) in unit.dense.iter().enumerate() {
                                q[a * nd + b] = scale * (2.0 * u(ia) * u(ib) - if a == b { jdiag(ia) } else { 0.0 });
                            }
                        }
                        let l = small_cholesky(&q, nd)?;
                        for k in 0..nd {
                            let coefs: Vec<(usize, f64)> =
                                unit.dense.iter().enumerate().map(|(d, &i)| (i, l[d * nd + k])).collect();
                            push_dense(&coefs, &mut stack);
                            stack_rows += 1;
                        }
                    }
                    // p = G_S' u_S, v = G_D' u_D
                    let p = combine_rows(sf, &unit.sparse, &u, &mut acc);
                    if nd > 0 {
                        let v = combine_rows(sf, &unit.dense, &u, &mut acc);
                        scatter_outer(&mut h, &v, &p, 2.0 * scale);
                        scatter_outer(&mut h, &p, &v, 2.0 * scale);
                    }
                    scatter_outer(&mut h, &p, &p, 2.0 * scale);
                    for &i in &unit.sparse {
                        let g = row_pairs(i);
                        scatter_outer(&mut h, &g, &g, -scale * jdiag(i));
                    }
                }
            }
        }
        if stack_rows > 0 {
            let d = Mat::<f64>::from_fn(stack_rows, ndc, |i, j| stack[i * ndc + j]);
            let mut gram = Mat::<f64>::zeros(ndc, ndc);
            faer::linalg::matmul::matmul(gram.as_mut(), Accum::Replace, d.transpose(), d.as_ref(), 1.0, Par::Seq);
            for (a, &ja) in self.dense_cols.iter().enumerate() {
                for (b, &jb) in self.dense_cols.iter().enumerate() {
                    h[(ja, jb)] += gram[(a, b)];
                }
            }
        }

        let nk = self.kept.len();
        let mut hred = Mat::<f64>::from_fn(nk, nk, |a, b| h[(self.kept[a], self.kept[b])]);
        let mut elim = Vec::with_capacity(self.eliminated.len());
        for (j, partners) in &self.eliminated {
            let hjj = h[(*j, *j)];
            if !(hjj > 0.0) {
                return None;
            }
            let coupling: Vec<(usize, f64)> = partners
                .iter()
                .filter(|&&k| self.reduced[k] != usize::MAX)
                .map(|&k| (self.reduced[k], h[(*j, k)]))
                .filter(|p| p.1 != 0.0)
                .collect();
            for &(a, x) in &coupling {
                for &(b, y) in &coupling {
                    hred[(a, b)] -= x * y / hjj;
                }
            }
            elim.push((*j, hjj, coupling));
        }

        // equilibrate to unit diagonal so the regularization is relative
        // per variable; diagonals here span many orders of magnitude
        let mut inv_scale = Vec::with_capacity(nk);
        for i in 0..nk {
            let d = hred[(i, i)];
            if !(d > 0.0) {
                return None;
            }
            inv_scale.push(1.0 / d.sqrt());
        }
        let scaled = Mat::<f64>::from_fn(nk, nk, |a, b| hred[(a, b)] * inv_scale[a] * inv_scale[b]);
        let mut delta = 1e-14;
        for _ in 0..8 {
            let mut reg = scaled.clone();
            for i in 0..nk {
                reg[(i, i)] += delta;
            }
            if let Ok(llt) = reg.llt(Side::Lower) {
                return Some(Factor {
                    hred,
                    llt,
                    inv_scale,
                    elim,
                });
            }
            delta *= 100.0;
        }
        None
    }
}

impl Factor {
    fn apply_inverse(&self, v: &mut Mat<f64>) {
        let d = &self.inv_scale;
        for i in 0..d.len() {
            v[(i, 0)] *= d[i];
        }
        self.llt.solve_in_place(v.as_mut());
        for i in 0..d.len() {
            v[(i, 0)] *= d[i];
        }
    }

    fn solve_reduced(&self, r: &[f64]) -> Vec<f64> {
        let nk = r.len();
        let mut x = Mat::<f64>::from_fn(nk, 1, |i, _| r[i]);
        self.apply_inverse(&mut x);
        // one step of iterative refinement against the unregularized matrix
        let mut res = Mat::<f64>::from_fn(nk, 1, |i, _| r[i]);
        faer::linalg::matmul::matmul(res.as_mut(), Accum::Add, self.hred.as_ref(), x.as_ref(), -1.0, Par::Seq);
        self.apply_inverse(&mut res);
        (0..nk).map(|i| x[(i, 0)] + res[(i, 0)]).collect()
    }

    fn solve(&self, st: &Structure, r: &[f64]) -> Vec<f64> {
        let mut rr: Vec<f64> = st.kept.iter().map(|&j| r[j]).collect();
        for (j, hjj, coupling) in &self.elim {
            let f = r[*j] / hjj;
            for &(a, x) in coupling {
                rr[a] -= x * f;
            }
        }
        let xr = self.solve_reduced(&rr);
        let mut x = vec![0.0; st.n];
        for (a, &j) in st.kept.iter().enumerate() {
            x[j] = xr[a];
        }
        for (j, hjj, coupling) in &self.elim {
            let s: f64 = coupling.iter().map(|&(a, v)| v * xr[a]).sum();
            x[*j] = (r[*j] - s) / hjj;
        }
        x
    }
}

struct Snapshot {
    x: Vec<f64>,
    z: Vec<f64>,
    s: Vec<f64>,
    pres: f64,
    dres: f64,
    rel_gap: f64,
}

impl Snapshot {
    fn score(&self) -> f64 {
        self.pres.max(self.dres).max(self.rel_gap)
    }
}

struct Direction {
    dx: Vec<f64>,
    dz: Vec<f64>,
    ds: Vec<f64>,
}

/// Solves the scaled Newton system
/// `G' dz = -rx`, `G dx + ds = -rz`, `W^-1 ds + W dz = q`.
fn newton(
    sf: &StandardForm,
    st: &Structure,
    f: &Factor,
    w: &Scaling,
    rx: &[f64],
    rz: &[f64],
    q: &[f64],
) -> Direction {
    let m = sf.m();
    let mut y = q.to_vec();
    w.apply(&mut y);
    for (yi, ri) in y.iter_mut().zip(rz) {
        *yi += ri;
    }
    let mut t = y.clone();
    w.apply_inverse(&mut t);
    w.apply_inverse(&mut t);
    let mut gt = vec![0.0; sf.n];
    sf.gt_mul(&t, &mut gt);
    let rhs: Vec<f64> = rx.iter().zip(&gt).map(|(a, b)| -a - b).collect();
    let mut dx = f.solve(st, &rhs);
    let mut gdx = vec![0.0; m];
    sf.g_mul(&dx, &mut gdx);
    let mut dz: Vec<f64> = gdx.iter().zip(&y).map(|(a, b)| a + b).collect();
    w.apply_inverse(&mut dz);
    w.apply_inverse(&mut dz);

    // Forming dz through W^-2 cancels badly once W is ill-conditioned, so
    // refine (dx, dz) jointly against the unreduced system
    //   G' dz = -rx,  G dx - W^2 dz = -y.
    let mut r1 = vec![0.0; sf.n];
    let mut r2 = vec![0.0; m];
    let mut best: Option<(f64, Vec<f64>, Vec<f64>)> = None;
    for step in 0..=REFINEMENT_STEPS {
        sf.gt_mul(&dz, &mut r1);
        r1.iter_mut().zip(rx).for_each(|(r, x)| *r += x);
        sf.g_mul(&dx, &mut gdx);
        let mut w2dz = dz.clone();
        w.apply(&mut w2dz);
        w.apply(&mut w2dz);
        for i in 0..m {
            r2[i] = gdx[i] + y[i] - w2dz[i];
        }
        let mut r2s = r2.clone();
        w.apply_inverse(&mut r2s);
        let err = norm2(&r1).max(norm2(&r2s));
        if best.as_ref().is_some_and(|b| err >= b.0) {
            break;
        }
        best = Some((err, dx.clone(), dz.clone()));
        if step == REFINEMENT_STEPS {
            break;
        }
        // t = W^-2 r2
        w.apply_inverse(&mut r2s);
        let mut gt = vec![0.0; sf.n];
        sf.gt_mul(&r2s, &mut gt);
        let rhs: Vec<f64> = r1.iter().zip(&gt).map(|(a, b)| -a - b).collect();
        let ddx = f.solve(st, &rhs);
        let mut gddx = vec![0.0; m];
        sf.g_mul(&ddx, &mut gddx);
        let mut ddz: Vec<f64> = gddx.iter().zip(&r2).map(|(a, b)| a + b).collect();
        w.apply_inverse(&mut ddz);
        w.apply_inverse(&mut ddz);
        dx.iter_mut().zip(&ddx).for_each(|(a, b)| *a += b);
        dz.iter_mut().zip(&ddz).for_each(|(a, b)| *a += b);
    }
    let (_, dx, dz) = best.expect("at least one pass");
    sf.g_mul(&dx, &mut gdx);
    let ds: Vec<f64> = rz.iter().zip(&gdx).map(|(r, g)| -r - g).collect();
    Direction { dx, dz, ds }
}

fn relative_cone_violation(blocks: &[Block], v: &[f64], scale: f64) -> f64 {
    (-cone::min_eigenvalue(blocks, v)).max(0.0) / scale
}

/// Solves `problem` to the given tolerances.
///
/// Malformed problems are rejected with an error; numerical trouble is
/// reported through [`SolveStatus`] together with the residual history.
pub fn solve(problem: &ConicProblem, tol: &Tolerances) -> Result<ConicSolution> {
    let (sf, _) = problem.standard_form()?;
    let (n, m) = (sf.n, sf.m());
    let blocks = sf.blocks.clone();
    let degree: usize = blocks.iter().map(|b| b.degree()).sum();
    let h_scale = norm2(&sf.h).max(1.0);
    let c_scale = norm2(&sf.c).max(1.0);
    let failure = |x: Vec<f64>, z: Vec<f64>, s: Vec<f64>, history: Vec<IterationLog>, msg: &str| {
        let objective = dot(&sf.c, &x);
        ConicSolution {
            x,
            z,
            s,
            objective,
            status: SolveStatus::NumericalFailure,
            duality_gap: f64::NAN,
            max_violation: f64::NAN,
            iterations: history.len(),
            history,
            message: msg.to_string(),
        }
    };
    if m == 0 {
        let msg = if sf.c.iter().all(|&c| c == 0.0) {
            "no constraints and zero objective"
        } else {
            "no constraints: objective unbounded"
        };
        return Ok(failure(vec![0.0; n], vec![], vec![], vec![], msg));
    }
    let st = Structure::new(&sf);

    // least-norm starting point, then shift into the cone interior
    let ident = Scaling::identity(&blocks);
    let Some(f0) = st.factor(&sf, &ident) else {
        return Ok(failure(vec![0.0; n], vec![0.0; m], vec![0.0; m], vec![], "G'G is singular"));
    };
    let mut gth = vec![0.0; n];
    sf.gt_mul(&sf.h, &mut gth);
    let mut x = f0.solve(&st, &gth);
    let mut gx = vec![0.0; m];
    sf.g_mul(&x, &mut gx);
    let mut s: Vec<f64> = sf.h.iter().zip(&gx).map(|(h, g)| h - g).collect();
    let neg_c: Vec<f64> = sf.c.iter().map(|c| -c).collect();
    let y = f0.solve(&st, &neg_c);
    let mut z = vec![0.0; m];
    sf.g_mul(&y, &mut z);
    for v in [&mut s, &mut z] {
        let shift = -cone::min_eigenvalue(&blocks, v);
        if shift >= -1e-8 * norm2(v).max(1.0) {
            cone::add_identity(&blocks, v, 1.0 + shift);
        }
    }

    let mut history = Vec::new();
    let mut rx = vec![0.0; n];
    let mut rz = vec![0.0; m];
    let mut lambda = vec![0.0; m];
    let mut tmp = vec![0.0; m];
    let mut q = vec![0.0; m];
    let mut best: Option<Snapshot> = None;
    let stalled = |best: Option<Snapshot>, x: Vec<f64>, z: Vec<f64>, s: Vec<f64>, history: Vec<IterationLog>, msg: &str| {
        match best {
            Some(b) if b.score() <= REDUCED_ACCURACY => {
                let mut gx = vec![0.0; m];
                sf.g_mul(&b.x, &mut gx);
                let true_slack: Vec<f64> = sf.h.iter().zip(&gx).map(|(h, g)| h - g).collect();
                let max_violation = b.pres.max(relative_cone_violation(&blocks, &true_slack, h_scale));
                ConicSolution {
                    objective: dot(&sf.c, &b.x),
                    x: b.x,
                    z: b.z,
                    s: b.s,
                    status: SolveStatus::Inaccurate,
                    duality_gap: b.rel_gap,
                    max_violation,
                    iterations: history.len(),
                    history,
                    message: format!("{msg}; returning best iterate"),
                }
            }
            _ => failure(x, z, s, history, msg),
        }
    };
    for iter in 0..=tol.max_iter {
        sf.gt_mul(&z, &mut rx);
        rx.iter_mut().zip(&sf.c).for_each(|(r, c)| *r += c);
        sf.g_mul(&x, &mut gx);
        for i in 0..m {
            rz[i] = gx[i] + s[i] - sf.h[i];
        }
        let gap = dot(&s, &z);
        let pcost = dot(&sf.c, &x);
        let dcost = -dot(&sf.h, &z);
        let pres = norm2(&rz) / h_scale;
        let dres = norm2(&rx) / c_scale;
        let rel_gap = gap / pcost.abs().max(1.0);
        if !(pres.is_finite() && dres.is_finite() && gap.is_finite()) {
            return Ok(failure(x, z, s, history, "non-finite iterate"));
        }
        let converged = pres <= tol.feas && dres <= tol.feas && rel_gap <= tol.gap;
        let score = pres.max(dres).max(rel_gap);
        if best.as_ref().is_none_or(|b| score < b.score()) {
            best = Some(Snapshot {
                x: x.clone(),
                z: z.clone(),
                s: s.clone(),
                pres,
                dres,
                rel_gap,
            });
        }
        if converged || iter == tol.max_iter {
            let true_slack: Vec<f64> = sf.h.iter().zip(&gx).map(|(h, g)| h - g).collect();
            let max_violation = pres.max(relative_cone_violation(&blocks, &true_slack, h_scale));
            return Ok(ConicSolution {
                x,
                z,
                s,
                objective: pcost,
                status: if converged { SolveStatus::Optimal } else { SolveStatus::MaxIter },
                duality_gap: rel_gap,
                max_violation,
                iterations: iter,
                history,
                message: if converged {
                    "optimal".into()
                } else {
                    format!("iteration limit {} reached", tol.max_iter)
                },
            });
        }

        let Some(w) = Scaling::nesterov_todd(&blocks, &s, &z) else {
            return Ok(stalled(best, x, z, s, history, "iterate left the cone interior"));
        };
        lambda.copy_from_slice(&z);
        w.apply(&mut lambda);
        let Some(f) = st.factor(&sf, &w) else {
            return Ok(stalled(best, x, z, s, history, "normal equations not positive definite"));
        };
        let mu = gap / degree as f64;

        // predictor: q = lambda \ (-lambda o lambda) = -lambda
        q.iter_mut().zip(&lambda).for_each(|(qi, l)| *qi = -l);
        let aff = newton(&sf, &st, &f, &w, &rx, &rz, &q);
        let alpha_aff = 1f64
            .min(cone::max_step(&blocks, &s, &aff.ds))
            .min(cone::max_step(&blocks, &z, &aff.dz));
        let sigma = (1.0 - alpha_aff).max(0.0).powi(3);

        // corrector: q = lambda \ (-lambda o lambda - ds~ o dz~ + sigma mu e)
        let mut dsa = aff.ds;
        w.apply_inverse(&mut dsa);
        let mut dza = aff.dz;
        w.apply(&mut dza);
        cone::jordan_product(&blocks, &dsa, &dza, &mut tmp);
        cone::jordan_product(&blocks, &lambda, &lambda, &mut q);
        for i in 0..m {
            q[i] = -q[i] - tmp[i];
        }
        cone::add_identity(&blocks, &mut q, sigma * mu);
        tmp.copy_from_slice(&q);
        cone::jordan_divide(&blocks, &lambda, &tmp, &mut q);
        let dir = newton(&sf, &st, &f, &w, &rx, &rz, &q);
        let alpha_max = cone::max_step(&blocks, &s, &dir.ds).min(cone::max_step(&blocks, &z, &dir.dz));
        let alpha = 1f64.min(STEP_FRACTION * alpha_max);
        history.push(IterationLog {
            iteration: iter,
            primal_objective: pcost,
            dual_objective: dcost,
            gap,
            primal_residual: pres,
            dual_residual: dres,
            step: alpha,
        });
        if !(alpha > 0.0) {
            return Ok(stalled(best, x, z, s, history, "zero step length"));
        }
        for (v, d) in x.iter_mut().zip(&dir.dx) {
            *v += alpha * d;
        }
        for (v, d) in s.iter_mut().zip(&dir.ds) {
            *v += alpha * d;
        }
        for (v, d) in z.iter_mut().zip(&dir.dz) {
            *v += alpha * d;
        }
    }
    unreachable!("loop returns on its last iteration")
}

/// Residuals of the optimality conditions at a solution.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct KktResiduals {
    /// `||G'z + c|| / max(1, ||c||)`.
    pub stationarity: f64,
    /// Cone violation of `h - G x`, relative to `max(1, ||h||)`.
    pub primal_feas: f64,
    /// Cone violation of `z`.
    pub dual_feas: f64,
    /// `|z'(h - G x)| / max(1, |c'x|)`.
    pub complementarity: f64,
}

impl KktResiduals {
    pub fn max(&self) -> f64 {
        self.stationarity
            .max(self.primal_feas)
            .max(self.dual_feas)
            .max(self.complementarity)
    }
}

/// KKT residuals of `solution` for `problem`.
pub fn kkt_residuals(problem: &ConicProblem, solution: &ConicSolution) -> Result<KktResiduals> {
    let (sf, _) = problem.standard_form()?;
    if solution.x.len() != sf.n || solution.z.len() != sf.m() {
        return Err(crate::error::Error::Dimension("solution does not match the problem".into()));
    }
    let mut rx = vec![0.0; sf.n];
    sf.gt_mul(&solution.z, &mut rx);
    rx.iter_mut().zip(&sf.c).for_each(|(r, c)| *r += c);
    let mut gx = vec![0.0; sf.m()];
    sf.g_mul(&solution.x, &mut gx);
    let slack: Vec<f64> = sf.h.iter().zip(&gx).map(|(h, g)| h - g).collect();
    let h_scale = norm2(&sf.h).max(1.0);
    Ok(KktResiduals {
        stationarity: norm2(&rx) / norm2(&sf.c).max(1.0),
        primal_feas: relative_cone_violation(&sf.blocks, &slack, h_scale),
        dual_feas: (-cone::min_eigenvalue(&sf.blocks, &solution.z)).max(0.0),
        complementarity: dot(&solution.z, &slack).abs() / dot(&sf.c, &solution.x).abs().max(1.0),
    })
}
