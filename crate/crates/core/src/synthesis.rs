//! Robust sparse azimuth-filter synthesis.
//!
//! For every range bin a complex weight vector over the visibility window is
//! found by successive convex approximation of a slacked, nonconvex program:
//! minimize `||w||_1 + lambda_b (b + b1 + b2)` subject to a worst-case main-lobe
//! floor (C1), worst-case sidelobe ceilings on a grid (C2), `||w|| = 1`
//! written as two inequalities (C3, C4) and `U' >= sqrt(U_min)` (C5). The
//! three concave terms are replaced by first-order upper bounds at the
//! current iterate, giving a second-order cone program per iteration.

use std::collections::BTreeMap;
use std::f64::consts::FRAC_PI_2;
use std::ops::Range;

use num_complex::Complex64;
use rayon::prelude::*;
use sha2::{Digest, Sha256};

use crate::config::{JitterModel, RadarConfig, SynthesisParams};
use crate::conic::{self, AffineExpr, ConicProblem, SolveStatus, Tolerances};
use crate::error::{Error, Result};
use crate::geometry::{steering_vector, window_for_range, ApertureWindow, SteeringVector};
use crate::signal::sample_phase_errors;

/// Calibration never uses fewer Monte-Carlo draws than this.
pub const MIN_CALIBRATION_DRAWS: usize = 10_000;

/// `w^H a`.
#[inline]
pub fn inner(w: &[Complex64], a: &[Complex64]) -> Complex64 {
    w.iter().zip(a).map(|(w, a)| w.conj() * a).sum()
}

fn norm_sqr(w: &[Complex64]) -> f64 {
    w.iter().map(|v| v.norm_sqr()).sum()
}

/// Worst-case main-lobe lower bound and sidelobe upper bound of
/// `|w^H (a + e)|^2` over errors with `||e|| <= delta`, for `||w|| <= 1`.
pub fn worst_case_bounds(w: &[Complex64], a: &SteeringVector, delta: f64) -> (f64, f64) {
    let g = inner(w, &a.entries).norm();
    let lb = (g - delta).max(0.0);
    (lb * lb, (g + delta) * (g + delta))
}

/// Sidelobe directions: from the main-lobe edges `pi/2 -+ phi_MW` outwards
/// in steps of `grid_step`, clipped to the window's angular extent.
pub fn sidelobe_grid(cfg: &RadarConfig, window: &ApertureWindow, params: &SynthesisParams) -> Result<Vec<f64>> {
    let step = cfg.angular_step();
    let (lo, hi) = (window.n_min as f64 * step, window.n_max as f64 * step);
    let eps = 1e-12;
    let mut left = Vec::new();
    let mut right = Vec::new();
    for i in 0.. {
        let phi = FRAC_PI_2 - params.mainlobe_half_width - i as f64 * params.grid_step;
        if phi < lo - eps {
            break;
        }
        left.push(phi);
    }
    for i in 0.. {
        let phi = FRAC_PI_2 + params.mainlobe_half_width + i as f64 * params.grid_step;
        if phi > hi + eps {
            break;
        }
        right.push(phi);
    }
    left.reverse();
    left.extend(right);
    if left.is_empty() {
        return Err(Error::EmptySidelobeGrid);
    }
    Ok(left)
}

#[derive(Debug, Clone, Copy, Default, PartialEq)]
pub struct Slacks {
    pub b: f64,
    pub b1: f64,
    pub b2: f64,
}

impl Slacks {
    pub fn sum(&self) -> f64 {
        self.b + self.b1 + self.b2
    }
}

/// An SCA iterate `(w_(i), U'_(i))` with its objective and slacks.
#[derive(Debug, Clone, PartialEq)]
pub struct SubproblemState {
    pub w: Vec<Complex64>,
    pub u_prime: f64,
    pub objective: f64,
    pub slacks: Slacks,
}

impl SubproblemState {
    /// `w_(0) = 1 / sqrt(W)`, `U'_(0) = |w_(0)^H a|^2`.
    pub fn initial(a_main: &SteeringVector) -> Self {
        let len = a_main.len();
        let w = vec![Complex64::new(1.0 / (len as f64).sqrt(), 0.0); len];
        let u_prime = inner(&w, &a_main.entries).norm_sqr();
        Self {
            w,
            u_prime,
            objective: f64::INFINITY,
            slacks: Slacks::default(),
        }
    }
}

/// A candidate point of the slacked program.
#[derive(Debug, Clone, PartialEq)]
pub struct SurrogatePoint {
    pub w: Vec<Complex64>,
    pub u_prime: f64,
    pub slacks: Slacks,
}

/// Constraint-function values (`<= 0` when satisfied).
#[derive(Debug, Clone, PartialEq)]
pub struct ConstraintValues {
    pub c1: f64,
    pub c2: Vec<f64>,
    pub c3: f64,
    pub c4: f64,
    pub c5: f64,
}

/// Ingredients shared by the nonconvex program and its convex surrogates.
#[derive(Debug, Clone)]
pub struct SynthesisGeometry {
    pub window: ApertureWindow,
    pub main: SteeringVector,
    pub sidelobes: Vec<SteeringVector>,
    pub delta: f64,
}

impl SynthesisGeometry {
    pub fn new(cfg: &RadarConfig, params: &SynthesisParams, range: f64, delta: f64) -> Result<Self> {
        let window = window_for_range(cfg, range)?;
        let main = steering_vector(cfg, FRAC_PI_2, range, &window)?;
        if !(delta >= 0.0 && delta <= main.norm()) {
            return Err(Error::InvalidConfig(format!(
                "Delta_R = {delta} must lie in [0, ||a||] = [0, {}]",
                main.norm()
            )));
        }
        let sidelobes = sidelobe_grid(cfg, &window, params)?
            .into_iter()
            .map(|phi| steering_vector(cfg, phi, range, &window))
            .collect::<Result<Vec<_>>>()?;
        Ok(Self {
            window,
            main,
            sidelobes,
            delta,
        })
    }

    /// Constraint values of the slacked nonconvex program.
    pub fn nonconvex_values(&self, p: &SurrogatePoint, params: &SynthesisParams) -> ConstraintValues {
        let d = self.delta;
        let se = params.eta.sqrt();
        let wn = norm_sqr(&p.w);
        ConstraintValues {
            c1: (p.u_prime + d).powi(2) - inner(&p.w, &self.main.entries).norm_sqr() - p.slacks.b1,
            c2: self
                .sidelobes
                .iter()
                .map(|a| inner(&p.w, &a.entries).norm_sqr() - (se * p.u_prime - d).powi(2) - p.slacks.b2)
                .collect(),
            c3: wn - 1.0 - p.slacks.b,
            c4: 1.0 - p.slacks.b - wn,
            c5: params.u_prime_min() - p.u_prime,
        }
    }

    /// Constraint values of the convex surrogate anchored at `anchor`.
    pub fn linearized_values(
        &self,
        p: &SurrogatePoint,
        anchor: &SubproblemState,
        params: &SynthesisParams,
    ) -> ConstraintValues {
        let d = self.delta;
        let eta = params.eta;
        let ui = anchor.u_prime;
        let ci = inner(&anchor.w, &self.main.entries);
        let v = inner(&p.w, &self.main.entries).conj();
        let wn = norm_sqr(&p.w);
        let wiw = inner(&anchor.w, &p.w);
        ConstraintValues {
            c1: (p.u_prime + d).powi(2) + ci.norm_sqr() - 2.0 * (ci * v).re - p.slacks.b1,
            c2: self
                .sidelobes
                .iter()
                .map(|a| {
                    inner(&p.w, &a.entries).norm_sqr() + 2.0 * (eta.sqrt() * d - eta * ui) * p.u_prime + eta * ui * ui
                        - d * d
                        - p.slacks.b2
                })
                .collect(),
            c3: wn - 1.0 - p.slacks.b,
            c4: 1.0 - p.slacks.b + norm_sqr(&anchor.w) - 2.0 * wiw.re,
            c5: params.u_prime_min() - p.u_prime,
        }
    }
}

/// Indices of the real-embedded subproblem variables.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct SubproblemLayout {
    pub w_re: Range<usize>,
    pub w_im: Range<usize>,
    /// Epigraph variables `t_n >= |w_n|`.
    pub modulus: Range<usize>,
    pub u_prime: usize,
    pub b: usize,
    pub b1: usize,
    pub b2: usize,
}

impl SubproblemLayout {
    pub fn weights(&self, x: &[f64]) -> Vec<Complex64> {
        self.w_re
            .clone()
            .zip(self.w_im.clone())
            .map(|(r, i)| Complex64::new(x[r], x[i]))
            .collect()
    }

    pub fn slacks(&self, x: &[f64]) -> Slacks {
        Slacks {
            b: x[self.b],
            b1: x[self.b1],
            b2: x[self.b2],
        }
    }

    /// Packs a point into a primal vector, with `t_n = |w_n|`.
    pub fn pack(&self, p: &SurrogatePoint) -> Vec<f64> {
        let mut x = vec![0.0; self.b2 + 1];
        for (k, w) in p.w.iter().enumerate() {
            x[self.w_re.start + k] = w.re;
            x[self.w_im.start + k] = w.im;
            x[self.modulus.start + k] = w.norm();
        }
        x[self.u_prime] = p.u_prime;
        x[self.b] = p.slacks.b;
        x[self.b1] = p.slacks.b1;
        x[self.b2] = p.slacks.b2;
        x
    }
}

/// `Re(a^H w)` and `Im(a^H w)` as affine expressions in the real embedding.
fn projection(a: &[Complex64], layout: &SubproblemLayout, scale: Complex64) -> (AffineExpr, AffineExpr) {
    // scale * a^H w with a^H w = sum (ar - j ai)(wr + j wi)
    let mut re = AffineExpr::default();
    let mut im = AffineExpr::default();
    for (k, an) in a.iter().enumerate() {
        let c = scale * an.conj();
        let (r, i) = (layout.w_re.start + k, layout.w_im.start + k);
        re = re.term(r, c.re).term(i, -c.im);
        im = im.term(r, c.im).term(i, c.re);
    }
    (re, im)
}

/// The convex subproblem anchored at `state`.
pub fn build_subproblem(
    state: &SubproblemState,
    geom: &SynthesisGeometry,
    params: &SynthesisParams,
) -> Result<(ConicProblem, SubproblemLayout)> {
    let len = geom.main.len();
    if geom.sidelobes.is_empty() {
        return Err(Error::EmptySidelobeGrid);
    }
    if state.w.len() != len || geom.sidelobes.iter().any(|a| a.len() != len) {
        return Err(Error::Dimension("weight and steering lengths differ".into()));
    }
    let mut p = ConicProblem::new();
    let layout = SubproblemLayout {
        w_re: p.add_variables("w_re", len),
        w_im: p.add_variables("w_im", len),
        modulus: p.add_variables("t", len),
        u_prime: p.add_variables("u_prime", 1).start,
        b: p.add_variables("b", 1).start,
        b1: p.add_variables("b1", 1).start,
        b2: p.add_variables("b2", 1).start,
    };
    for k in layout.modulus.clone() {
        p.set_cost(k, 1.0);
    }
    for k in [layout.b, layout.b1, layout.b2] {
        p.set_cost(k, params.lambda_b);
    }
    let d = geom.delta;
    let eta = params.eta;
    let ui = state.u_prime;

    // C1: (U' + d)^2 <= b1 - |c|^2 + 2 Re{c a^H w},  c = w_i^H a
    let ci = inner(&state.w, &geom.main.entries);
    let (re, _) = projection(&geom.main.entries, &layout, ci * 2.0);
    let rhs1 = re.term(layout.b1, 1.0).plus(-ci.norm_sqr());
    p.add_quadratic("C1", vec![AffineExpr::var(layout.u_prime).plus(d)], rhs1);

    // C2: |a_s^H w|^2 <= b2 - 2 (sqrt(eta) d - eta U'_i) U' - eta U'_i^2 + d^2
    let rhs2 = AffineExpr::var(layout.b2)
        .term(layout.u_prime, -2.0 * (eta.sqrt() * d - eta * ui))
        .plus(d * d - eta * ui * ui);
    for (s, a) in geom.sidelobes.iter().enumerate() {
        let (re, im) = projection(&a.entries, &layout, Complex64::new(1.0, 0.0));
        p.add_quadratic(format!("C2[{s}]"), vec![re, im], rhs2.clone());
    }

    // C3: ||w||^2 <= 1 + b
    let ws: Vec<AffineExpr> = layout.w_re.clone().chain(layout.w_im.clone()).map(AffineExpr::var).collect();
    p.add_quadratic("C3", ws, AffineExpr::var(layout.b).plus(1.0));

    // C4: b - 1 - ||w_i||^2 + 2 Re{w_i^H w} >= 0
    let mut c4 = AffineExpr::var(layout.b).plus(-1.0 - norm_sqr(&state.w));
    for (k, wi) in state.w.iter().enumerate() {
        c4 = c4
            .term(layout.w_re.start + k, 2.0 * wi.re)
            .term(layout.w_im.start + k, 2.0 * wi.im);
    }
    p.add_nonneg("C4", c4);

    // C5: U' >= sqrt(U_min)
    p.add_nonneg("C5", AffineExpr::var(layout.u_prime).plus(-params.u_prime_min()));
    p.add_nonneg("b>=0", AffineExpr::var(layout.b));
    p.add_nonneg("b1>=0", AffineExpr::var(layout.b1));
    p.add_nonneg("b2>=0", AffineExpr::var(layout.b2));

    for k in 0..len {
        p.add_soc(
            format!("abs[{k}]"),
            AffineExpr::var(layout.modulus.start + k),
            vec![
                AffineExpr::var(layout.w_re.start + k),
                AffineExpr::var(layout.w_im.start + k),
            ],
        );
    }
    Ok((p, layout))
}

/// A feasible point of the subproblem anchored at `state`: the anchor itself
/// (with `U'` raised to its floor if needed) and slacks equal to the exact
/// constraint violations.
pub fn restoration_point(state: &SubproblemState, geom: &SynthesisGeometry, params: &SynthesisParams) -> SurrogatePoint {
    let mut p = SurrogatePoint {
        w: state.w.clone(),
        u_prime: state.u_prime.max(params.u_prime_min()),
        slacks: Slacks::default(),
    };
    let v = geom.linearized_values(&p, state, params);
    let c2 = v.c2.iter().copied().fold(0.0, f64::max);
    p.slacks = Slacks {
        b: v.c3.max(v.c4).max(0.0),
        b1: v.c1.max(0.0),
        b2: c2,
    };
    p
}

/// Objective `J = ||w||_1 + lambda_b (b + b1 + b2)`.
pub fn objective(w: &[Complex64], slacks: &Slacks, params: &SynthesisParams) -> f64 {
    w.iter().map(|v| v.norm()).sum::<f64>() + params.lambda_b * slacks.sum()
}

/// One SCA iteration as recorded in the trace.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ScaIterate {
    pub iteration: usize,
    pub objective: f64,
    pub u_prime: f64,
    pub slacks: Slacks,
    pub solver_iterations: usize,
}

/// Synthesized weights for one range bin.
#[derive(Debug, Clone, PartialEq)]
pub struct WeightEntry {
    pub bin: usize,
    pub range: f64,
    pub delta: f64,
    pub u_prime: f64,
    pub slack_sum: f64,
    /// `slack_sum < b_min`.
    pub verified: bool,
    pub window: ApertureWindow,
    /// Thresholded weights over the whole window (zeros included).
    pub weights: Vec<Complex64>,
    /// `||w||` before thresholding.
    pub pre_threshold_norm: f64,
    pub iterations: usize,
}

impl WeightEntry {
    pub fn nnz(&self) -> usize {
        self.weights.iter().filter(|w| w.norm_sqr() > 0.0).count()
    }

    /// Nonzero weights with their window-relative indices.
    pub fn nonzeros(&self) -> Vec<(usize, Complex64)> {
        self.weights
            .iter()
            .enumerate()
            .filter(|(_, w)| w.norm_sqr() > 0.0)
            .map(|(k, w)| (k, *w))
            .collect()
    }

    /// An entry holding externally supplied weights (for example a dense
    /// matched filter); marked verified.
    pub fn from_weights(cfg: &RadarConfig, bin: usize, weights: Vec<Complex64>) -> Result<Self> {
        let range = cfg.bin_range(bin);
        let window = window_for_range(cfg, range)?;
        if weights.len() != window.len() {
            return Err(Error::Dimension(format!(
                "{} weights for a window of {}",
                weights.len(),
                window.len()
            )));
        }
        let main = steering_vector(cfg, FRAC_PI_2, range, &window)?;
        Ok(Self {
            bin,
            range,
            delta: 0.0,
            u_prime: inner(&weights, &main.entries).norm(),
            slack_sum: 0.0,
            verified: true,
            pre_threshold_norm: norm_sqr(&weights).sqrt(),
            window,
            weights,
            iterations: 0,
        })
    }
}

/// Zeroes entries below `threshold * max |w_n|`.
pub fn threshold_weights(w: &[Complex64], threshold: f64) -> Vec<Complex64> {
    let peak = w.iter().map(|v| v.norm()).fold(0.0, f64::max);
    w.iter()
        .map(|v| if v.norm() < threshold * peak { Complex64::new(0.0, 0.0) } else { *v })
        .collect()
}

fn accept(sol: &conic::ConicSolution) -> bool {
    match sol.status {
        SolveStatus::Optimal => true,
        SolveStatus::Inaccurate | SolveStatus::MaxIter => sol.max_violation <= 1e-6 && sol.duality_gap <= 1e-6,
        SolveStatus::NumericalFailure => false,
    }
}

/// Runs the SCA loop for one range bin with a given `Delta_R`.
///
/// Stops after `max_iter` subproblems or earlier once the objective changes
/// by less than `stop_tol` relative to the previous iterate.
pub fn sca_solve(
    cfg: &RadarConfig,
    params: &SynthesisParams,
    bin: usize,
    delta: f64,
) -> Result<(WeightEntry, Vec<ScaIterate>)> {
    params.validate()?;
    let range = cfg.bin_range(bin);
    let r_max = cfg.unambiguous_range();
    if range >= r_max {
        return Err(Error::BeyondUnambiguousRange { range, max: r_max });
    }
    let geom = SynthesisGeometry::new(cfg, params, range, delta)?;
    let mut state = SubproblemState::initial(&geom.main);
    let mut trace = Vec::with_capacity(params.max_iter);
    let tol = Tolerances::default();
    for iteration in 1..=params.max_iter {
        let (problem, layout) = build_subproblem(&state, &geom, params)?;
        let sol = conic::solve(&problem, &tol)?;
        if !accept(&sol) {
            return Err(Error::Solver {
                iteration,
                reason: format!(
                    "{:?} after {} interior-point steps: {}",
                    sol.status, sol.iterations, sol.message
                ),
            });
        }
        let w = layout.weights(&sol.x);
        let slacks = layout.slacks(&sol.x);
        let j = objective(&w, &slacks, params);
        let previous = state.objective;
        state = SubproblemState {
            w,
            u_prime: sol.x[layout.u_prime],
            objective: j,
            slacks,
        };
        trace.push(ScaIterate {
            iteration,
            objective: j,
            u_prime: state.u_prime,
            slacks,
            solver_iterations: sol.iterations,
        });
        if previous.is_finite() && (j - previous).abs() < params.stop_tol * previous.abs() {
            break;
        }
    }
    let slack_sum = state.slacks.sum();
    let entry = WeightEntry {
        bin,
        range,
        delta,
        u_prime: state.u_prime,
        slack_sum,
        verified: slack_sum < params.b_min,
        window: geom.window,
        pre_threshold_norm: norm_sqr(&state.w).sqrt(),
        weights: threshold_weights(&state.w, params.zero_threshold),
        iterations: trace.len(),
    };
    Ok((entry, trace))
}

/// Empirical `percentile` quantile of the steering-error norm at `range`
/// (nearest-rank), over at least [`MIN_CALIBRATION_DRAWS`] draws.
pub fn calibrate_delta(cfg: &RadarConfig, jitter: &JitterModel, range: f64, percentile: f64, draws: usize) -> Result<f64> {
    if !(percentile > 0.0 && percentile < 1.0) {
        return Err(Error::InvalidConfig("percentile must lie in (0, 1)".into()));
    }
    let mut e = sample_phase_errors(cfg, jitter, range, draws.max(MIN_CALIBRATION_DRAWS))?;
    e.sort_by(f64::total_cmp);
    let rank = ((percentile * e.len() as f64).ceil() as usize).clamp(1, e.len());
    Ok(e[rank - 1])
}

/// Weight vectors for a set of range bins, together with the settings that
/// produced them.
#[derive(Debug, Clone, PartialEq)]
pub struct WeightTable {
    pub cfg: RadarConfig,
    pub params: SynthesisParams,
    pub entries: BTreeMap<usize, WeightEntry>,
}

impl WeightTable {
    pub fn new(cfg: RadarConfig, params: SynthesisParams) -> Self {
        Self {
            cfg,
            params,
            entries: BTreeMap::new(),
        }
    }

    pub fn insert(&mut self, entry: WeightEntry) {
        self.entries.insert(entry.bin, entry);
    }

    pub fn get(&self, bin: usize) -> Result<&WeightEntry> {
        self.entries.get(&bin).ok_or(Error::MissingBin(bin))
    }

    /// Entry for `bin`, refusing unverified ones.
    pub fn get_verified(&self, bin: usize) -> Result<&WeightEntry> {
        let e = self.get(bin)?;
        if !e.verified {
            return Err(Error::UnverifiedBin(bin));
        }
        Ok(e)
    }

    /// SHA-256 over the bins and nonzero weights, hex encoded.
    pub fn digest(&self) -> String {
        let mut h = Sha256::new();
        for e in self.entries.values() {
            h.update((e.bin as u64).to_le_bytes());
            h.update((e.window.n_min).to_le_bytes());
            h.update((e.window.n_max).to_le_bytes());
            for (k, w) in e.nonzeros() {
                h.update((k as u64).to_le_bytes());
                h.update(w.re.to_le_bytes());
                h.update(w.im.to_le_bytes());
            }
        }
        h.finalize().iter().map(|b| format!("{b:02x}")).collect()
    }
}

/// Result of a batch synthesis; failed bins are listed rather than aborting.
#[derive(Debug)]
pub struct BatchResult {
    pub table: WeightTable,
    pub traces: BTreeMap<usize, Vec<ScaIterate>>,
    pub failures: Vec<(usize, Error)>,
}

/// Synthesizes every bin in `bins` independently (in parallel), with
/// `delta(bin)` supplying `Delta_R`.
pub fn synthesize_all(
    cfg: &RadarConfig,
    params: &SynthesisParams,
    bins: &[usize],
    delta: &(dyn Fn(usize) -> f64 + Sync),
) -> Result<BatchResult> {
    cfg.validate()?;
    params.validate()?;
    let results: Vec<_> = bins
        .par_iter()
        .map(|&bin| (bin, sca_solve(cfg, params, bin, delta(bin))))
        .collect();
    let mut out = BatchResult {
        table: WeightTable::new(*cfg, params.clone()),
        traces: BTreeMap::new(),
        failures: Vec::new(),
    };
    for (bin, r) in results {
        match r {
            Ok((entry, trace)) => {
                out.table.insert(entry);
                out.traces.insert(bin, trace);
            }
            Err(e) => out.failures.push((bin, e)),
        }
    }
    Ok(out)
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    fn small_cfg() -> RadarConfig {
        RadarConfig {
            pulses: 48,
            ..RadarConfig::default()
        }
    }

    fn small_params() -> SynthesisParams {
        SynthesisParams {
            grid_step: 4f64.to_radians(),
            mainlobe_half_width: 8f64.to_radians(),
            ..SynthesisParams::default()
        }
    }

    fn random_point(rng: &mut ChaCha8Rng, len: usize) -> SurrogatePoint {
        SurrogatePoint {
            w: (0..len)
                .map(|_| Complex64::new(rng.random_range(-1.0..1.0), rng.random_range(-1.0..1.0)) * 0.3)
                .collect(),
            u_prime: rng.random_range(0.0..10.0),
            slacks: Slacks {
                b: rng.random_range(0.0..1.0),
                b1: rng.random_range(0.0..1.0),
                b2: rng.random_range(0.0..1.0),
            },
        }
    }

    #[test]
    fn sidelobe_count_at_two_meters() {
        let cfg = RadarConfig::default();
        let w = window_for_range(&cfg, 2.0).unwrap();
        let g = sidelobe_grid(&cfg, &w, &SynthesisParams::default()).unwrap();
        assert_eq!(g.len(), 340);
        assert!(g.windows(2).all(|p| p[0] < p[1]));
        assert!(g.iter().all(|p| (p - FRAC_PI_2).abs() >= 1f64.to_radians() - 1e-12));
    }

    #[test]
    fn bounds_collapse_without_error() {
        let cfg = RadarConfig::default();
        let w = window_for_range(&cfg, 2.0).unwrap();
        let a = steering_vector(&cfg, FRAC_PI_2, 2.0, &w).unwrap();
        let wv: Vec<Complex64> = a.entries.iter().map(|v| v / a.norm()).collect();
        let (lb, ub) = worst_case_bounds(&wv, &a, 0.0);
        assert!((lb - ub).abs() < 1e-9);
        let (lb, _) = worst_case_bounds(&wv, &a, a.norm());
        assert!(lb.abs() < 1e-9);
    }

    #[test]
    fn anchor_exactness_and_majorization() {
        let cfg = small_cfg();
        let params = small_params();
        let geom = SynthesisGeometry::new(&cfg, &params, 1.0, 0.3).unwrap();
        let mut rng = ChaCha8Rng::seed_from_u64(12);
        let len = geom.main.len();
        for _ in 0..200 {
            let a = random_point(&mut rng, len);
            let anchor = SubproblemState {
                w: a.w.clone(),
                u_prime: a.u_prime,
                objective: 0.0,
                slacks: a.slacks,
            };
            let orig = geom.nonconvex_values(&a, &params);
            let lin = geom.linearized_values(&a, &anchor, &params);
            assert!((orig.c1 - lin.c1).abs() < 1e-9 * (1.0 + orig.c1.abs()));
            assert!((orig.c4 - lin.c4).abs() < 1e-9);
            for (x, y) in orig.c2.iter().zip(&lin.c2) {
                assert!((x - y).abs() < 1e-9 * (1.0 + x.abs()));
            }
            let probe = random_point(&mut rng, len);
            let orig = geom.nonconvex_values(&probe, &params);
            let lin = geom.linearized_values(&probe, &anchor, &params);
            assert!(lin.c1 >= orig.c1 - 1e-9 && lin.c4 >= orig.c4 - 1e-9);
            assert!(lin.c2.iter().zip(&orig.c2).all(|(l, o)| *l >= o - 1e-9));
        }
    }

    #[test]
    fn conic_model_matches_linearized_constraints() {
        let cfg = small_cfg();
        let params = small_params();
        let geom = SynthesisGeometry::new(&cfg, &params, 1.0, 0.2).unwrap();
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        let len = geom.main.len();
        let a = random_point(&mut rng, len);
        let anchor = SubproblemState {
            w: a.w.clone(),
            u_prime: a.u_prime,
            objective: 0.0,
            slacks: a.slacks,
        };
        let (problem, layout) = build_subproblem(&anchor, &geom, &params).unwrap();
        let labels = |p: &str| problem.constraints.iter().filter(|c| c.label.starts_with(p)).count();
        assert_eq!(labels("C1"), 1);
        assert_eq!(labels("C2["), geom.sidelobes.len());
        assert_eq!(labels("C3") + labels("C4") + labels("C5"), 3);
        assert_eq!(labels("abs["), len);
        let probe = random_point(&mut rng, len);
        let x = layout.pack(&probe);
        let lin = geom.linearized_values(&probe, &anchor, &params);
        let by_label = |l: &str| problem.constraints.iter().find(|c| c.label == l).unwrap().violation(&x);
        assert!((by_label("C1") - lin.c1).abs() < 1e-9);
        assert!((by_label("C2[0]") - lin.c2[0]).abs() < 1e-9);
        assert!((by_label("C3") - lin.c3).abs() < 1e-9);
        assert!((by_label("C4") - lin.c4).abs() < 1e-9);
    }

    #[test]
    fn restoration_point_is_feasible_and_bounds_the_optimum() {
        let cfg = small_cfg();
        let params = small_params();
        let geom = SynthesisGeometry::new(&cfg, &params, 1.5, 0.1).unwrap();
        let state = SubproblemState::initial(&geom.main);
        let (problem, layout) = build_subproblem(&state, &geom, &params).unwrap();
        let p = restoration_point(&state, &geom, &params);
        let x = layout.pack(&p);
        assert!(problem.max_violation(&x) <= 1e-9);
        let sol = conic::solve(&problem, &Tolerances::default()).unwrap();
        assert_eq!(sol.status, SolveStatus::Optimal);
        assert!(sol.objective <= problem.objective_value(&x) + 1e-7);
        // modulus epigraphs are tight at the optimum
        let w = layout.weights(&sol.x);
        let t: f64 = layout.modulus.clone().map(|k| sol.x[k]).sum();
        let l1: f64 = w.iter().map(|v| v.norm()).sum();
        assert!(t >= l1 - 1e-9 && t - l1 < 1e-6);
    }

    #[test]
    fn thresholding_is_relative() {
        let w = vec![Complex64::new(1.0, 0.0), Complex64::new(0.0009, 0.0), Complex64::new(0.002, 0.0)];
        let t = threshold_weights(&w, 1e-3);
        assert_eq!(t[1], Complex64::new(0.0, 0.0));
        assert_eq!(t[2], w[2]);
    }

    #[test]
    fn calibration_without_jitter_is_zero() {
        let cfg = RadarConfig::default();
        let d = calibrate_delta(&cfg, &JitterModel::none(), 2.0, 0.99, 10).unwrap();
        assert_eq!(d, 0.0);
        assert!(calibrate_delta(&cfg, &JitterModel::none(), 2.0, 1.0, 10).is_err());
    }
}
