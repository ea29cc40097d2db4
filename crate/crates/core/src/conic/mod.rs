//! Second-order cone programs: a small modeling layer, an interior-point
//! solver and KKT certificates.
//!
//! Problems are stated as `min c'x` subject to a list of constraints built
//! from affine expressions. Every constraint lowers to one block of
//! `h - G x in K`, with `K` a product of nonnegative orthants and second-order
//! cones.

pub mod cone;
mod solver;

use std::fmt::Write as _;
use std::ops::Range;

pub use solver::{kkt_residuals, solve, ConicSolution, IterationLog, KktResiduals, SolveStatus, Tolerances};

use crate::error::{Error, Result};
use cone::Block;

/// `constant + sum coef * x[index]`.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct AffineExpr {
    pub terms: Vec<(usize, f64)>,
    pub constant: f64,
}

impl AffineExpr {
    pub fn constant(c: f64) -> Self {
        Self {
            terms: Vec::new(),
            constant: c,
        }
    }

    pub fn var(index: usize) -> Self {
        Self {
            terms: vec![(index, 1.0)],
            constant: 0.0,
        }
    }

    pub fn term(mut self, index: usize, coef: f64) -> Self {
        if coef != 0.0 {
            self.terms.push((index, coef));
        }
        self
    }

    pub fn plus(mut self, c: f64) -> Self {
        self.constant += c;
        self
    }

    pub fn scaled(mut self, k: f64) -> Self {
        self.terms.iter_mut().for_each(|t| t.1 *= k);
        self.constant *= k;
        self
    }

    pub fn eval(&self, x: &[f64]) -> f64 {
        self.constant + self.terms.iter().map(|&(i, c)| c * x[i]).sum::<f64>()
    }

    /// Merges duplicate indices and drops zeros; terms end up sorted.
    fn normalized(&self) -> Vec<(usize, f64)> {
        let mut t = self.terms.clone();
        t.sort_by_key(|p| p.0);
        let mut out: Vec<(usize, f64)> = Vec::with_capacity(t.len());
        for (i, c) in t {
            match out.last_mut() {
                Some(last) if last.0 == i => last.1 += c,
                _ => out.push((i, c)),
            }
        }
        out.retain(|p| p.1 != 0.0);
        out
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ConstraintKind {
    /// `exprs[0] >= 0`.
    Linear,
    /// `||exprs[1..]|| <= exprs[0]`.
    SecondOrderCone,
    /// `||exprs[1..]||^2 <= exprs[0]`, lowered to a rotated cone.
    Quadratic,
}

impl ConstraintKind {
    fn tag(self) -> &'static str {
        match self {
            ConstraintKind::Linear => "linear",
            ConstraintKind::SecondOrderCone => "soc",
            ConstraintKind::Quadratic => "quadratic",
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Constraint {
    pub kind: ConstraintKind,
    pub label: String,
    pub exprs: Vec<AffineExpr>,
}

impl Constraint {
    /// Value of the constraint function, `<= 0` when satisfied:
    /// `-e`, `||x|| - t` or `||x||^2 - r`.
    pub fn violation(&self, x: &[f64]) -> f64 {
        let head = self.exprs[0].eval(x);
        let tail = || self.exprs[1..].iter().map(|e| e.eval(x).powi(2)).sum::<f64>();
        match self.kind {
            ConstraintKind::Linear => -head,
            ConstraintKind::SecondOrderCone => tail().sqrt() - head,
            ConstraintKind::Quadratic => tail() - head,
        }
    }

    /// Rows of `h - G x` for this constraint, as affine expressions.
    fn cone_rows(&self) -> Vec<AffineExpr> {
        match self.kind {
            ConstraintKind::Linear | ConstraintKind::SecondOrderCone => self.exprs.clone(),
            ConstraintKind::Quadratic => {
                // ||x||^2 <= r  <=>  ||(2x, r - 1)|| <= r + 1
                let r = &self.exprs[0];
                let mut rows = Vec::with_capacity(self.exprs.len() + 1);
                rows.push(r.clone().plus(1.0));
                rows.extend(self.exprs[1..].iter().map(|e| e.clone().scaled(2.0)));
                rows.push(r.clone().plus(-1.0));
                rows
            }
        }
    }
}

/// A named run of consecutive variables.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct VarBlock {
    pub name: String,
    pub range: Range<usize>,
}

/// A second-order cone program `min c'x` over a constraint list.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct ConicProblem {
    pub objective: Vec<f64>,
    pub constraints: Vec<Constraint>,
    pub variables: Vec<VarBlock>,
}

/// `min c'x  s.t.  G x + s = h,  s in K`, with `G` in compressed rows.
#[derive(Debug, Clone)]
pub(crate) struct StandardForm {
    pub n: usize,
    pub c: Vec<f64>,
    pub row_ptr: Vec<usize>,
    pub cols: Vec<usize>,
    pub vals: Vec<f64>,
    pub h: Vec<f64>,
    pub blocks: Vec<Block>,
}

impl StandardForm {
    pub fn m(&self) -> usize {
        self.h.len()
    }

    #[inline]
    pub fn row(&self, i: usize) -> (&[usize], &[f64]) {
        let r = self.row_ptr[i]..self.row_ptr[i + 1];
        (&self.cols[r.clone()], &self.vals[r])
    }

    /// `out = G x`.
    pub fn g_mul(&self, x: &[f64], out: &mut [f64]) {
        for (i, o) in out.iter_mut().enumerate() {
            let (c, v) = self.row(i);
            *o = c.iter().zip(v).map(|(&j, a)| a * x[j]).sum();
        }
    }

    /// `out = G' y`.
    pub fn gt_mul(&self, y: &[f64], out: &mut [f64]) {
        out.iter_mut().for_each(|v| *v = 0.0);
        for (i, yi) in y.iter().enumerate() {
            if *yi == 0.0 {
                continue;
            }
            let (c, v) = self.row(i);
            for (&j, a) in c.iter().zip(v) {
                out[j] += a * yi;
            }
        }
    }
}

impl ConicProblem {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn num_vars(&self) -> usize {
        self.objective.len()
    }

    /// Appends `count` variables with zero cost under `name`.
    pub fn add_variables(&mut self, name: &str, count: usize) -> Range<usize> {
        let start = self.objective.len();
        self.objective.resize(start + count, 0.0);
        self.variables.push(VarBlock {
            name: name.to_string(),
            range: start..start + count,
        });
        start..start + count
    }

    pub fn set_cost(&mut self, index: usize, coef: f64) {
        self.objective[index] = coef;
    }

    pub fn add_nonneg(&mut self, label: impl Into<String>, expr: AffineExpr) {
        self.constraints.push(Constraint {
            kind: ConstraintKind::Linear,
            label: label.into(),
            exprs: vec![expr],
        });
    }

    /// `||xs|| <= t`.
    pub fn add_soc(&mut self, label: impl Into<String>, t: AffineExpr, xs: Vec<AffineExpr>) {
        let mut exprs = Vec::with_capacity(xs.len() + 1);
        exprs.push(t);
        exprs.extend(xs);
        self.constraints.push(Constraint {
            kind: ConstraintKind::SecondOrderCone,
            label: label.into(),
            exprs,
        });
    }

    /// `||xs||^2 <= rhs`.
    pub fn add_quadratic(&mut self, label: impl Into<String>, xs: Vec<AffineExpr>, rhs: AffineExpr) {
        let mut exprs = Vec::with_capacity(xs.len() + 1);
        exprs.push(rhs);
        exprs.extend(xs);
        self.constraints.push(Constraint {
            kind: ConstraintKind::Quadratic,
            label: label.into(),
            exprs,
        });
    }

    pub fn objective_value(&self, x: &[f64]) -> f64 {
        self.objective.iter().zip(x).map(|(c, v)| c * v).sum()
    }

    /// Largest constraint-function value at `x` (`<= 0` means feasible).
    pub fn max_violation(&self, x: &[f64]) -> f64 {
        self.constraints
            .iter()
            .map(|c| c.violation(x))
            .fold(f64::NEG_INFINITY, f64::max)
    }

    /// Checks dimensions, indices, finiteness and the variable bookkeeping.
    pub fn validate(&self) -> Result<()> {
        let n = self.num_vars();
        if n == 0 {
            return Err(Error::Dimension("problem has no variables".into()));
        }
        if self.objective.iter().any(|c| !c.is_finite()) {
            return Err(Error::Dimension("objective has non-finite coefficients".into()));
        }
        let mut covered = vec![false; n];
        for b in &self.variables {
            for i in b.range.clone() {
                if i >= n || covered[i] {
                    return Err(Error::Dimension(format!("variable block `{}` overlaps or overflows", b.name)));
                }
                covered[i] = true;
            }
        }
        if covered.iter().any(|c| !c) {
            return Err(Error::Dimension("variable bookkeeping does not cover every variable".into()));
        }
        for c in &self.constraints {
            let min_len = match c.kind {
                ConstraintKind::Linear => 1,
                _ => 2,
            };
            if c.exprs.len() < min_len || (c.kind == ConstraintKind::Linear && c.exprs.len() != 1) {
                return Err(Error::Dimension(format!("constraint `{}` has {} rows", c.label, c.exprs.len())));
            }
            for e in &c.exprs {
                if !e.constant.is_finite() || e.terms.iter().any(|&(i, v)| i >= n || !v.is_finite()) {
                    return Err(Error::Dimension(format!("constraint `{}` has a bad term", c.label)));
                }
            }
        }
        Ok(())
    }

    /// Lowers to `G x + s = h, s in K`, linear rows first. Returns the form and,
    /// per constraint, the range of its rows.
    pub(crate) fn standard_form(&self) -> Result<(StandardForm, Vec<Range<usize>>)> {
        self.validate()?;
        let mut rows: Vec<AffineExpr> = Vec::new();
        let mut ranges = vec![0..0; self.constraints.len()];
        let mut blocks = Vec::new();
        for (k, c) in self.constraints.iter().enumerate() {
            if c.kind == ConstraintKind::Linear {
                ranges[k] = rows.len()..rows.len() + 1;
                rows.push(c.exprs[0].clone());
            }
        }
        if !rows.is_empty() {
            blocks.push(Block::NonNeg {
                start: 0,
                len: rows.len(),
            });
        }
        for (k, c) in self.constraints.iter().enumerate() {
            if c.kind != ConstraintKind::Linear {
                let start = rows.len();
                rows.extend(c.cone_rows());
                ranges[k] = start..rows.len();
                blocks.push(Block::Soc {
                    start,
                    len: rows.len() - start,
                });
            }
        }
        let mut row_ptr = Vec::with_capacity(rows.len() + 1);
        let (mut cols, mut vals, mut h) = (Vec::new(), Vec::new(), Vec::with_capacity(rows.len()));
        row_ptr.push(0);
        for r in &rows {
            // s = constant + a'x  =>  G row = -a, h = constant
            for (j, a) in r.normalized() {
                cols.push(j);
                vals.push(-a);
            }
            row_ptr.push(cols.len());
            h.push(r.constant);
        }
        Ok((
            StandardForm {
                n: self.num_vars(),
                c: self.objective.clone(),
                row_ptr,
                cols,
                vals,
                h,
                blocks,
            },
            ranges,
        ))
    }

    /// Self-describing text dump, one constraint per line, for cross-checking
    /// with external solvers. Expressions print as `constant [coef*x<i>]...`.
    pub fn dump(&self) -> String {
        fn expr(e: &AffineExpr) -> String {
            let mut s = format!("{:e}", e.constant);
            for (i, c) in e.normalized() {
                let _ = write!(s, " {:+e}*x{}", c, i);
            }
            s
        }
        let mut out = String::new();
        let _ = writeln!(out, "# conic problem: minimize c'x; linear: e >= 0; soc: ||rows[1..]|| <= rows[0]; quadratic: ||rows[1..]||^2 <= rows[0]");
        let _ = writeln!(out, "vars {}", self.num_vars());
        for b in &self.variables {
            let _ = writeln!(out, "block {} {}..{}", b.name, b.range.start, b.range.end);
        }
        let obj: Vec<String> = self
            .objective
            .iter()
            .enumerate()
            .filter(|p| *p.1 != 0.0)
            .map(|(i, c)| format!("{:+e}*x{}", c, i))
            .collect();
        let _ = writeln!(out, "minimize {}", obj.join(" "));
        for c in &self.constraints {
            let rows: Vec<String> = c.exprs.iter().map(expr).collect();
            let _ = writeln!(out, "{} {} : {}", c.kind.tag(), c.label, rows.join(" ; "));
        }
        out
    }
}
