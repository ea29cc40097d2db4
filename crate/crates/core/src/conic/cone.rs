//! Symmetric-cone algebra for the nonnegative orthant and the second-order
//! cone: Nesterov-Todd scaling, Jordan products and step lengths.

/// A contiguous block of the stacked slack vector.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Block {
    NonNeg { start: usize, len: usize },
    /// `{(t, x) : ||x|| <= t}` of dimension `len >= 2`.
    Soc { start: usize, len: usize },
}

impl Block {
    #[inline]
    pub fn range(&self) -> std::ops::Range<usize> {
        match *self {
            Block::NonNeg { start, len } | Block::Soc { start, len } => start..start + len,
        }
    }

    /// Contribution to the barrier degree.
    #[inline]
    pub fn degree(&self) -> usize {
        match *self {
            Block::NonNeg { len, .. } => len,
            Block::Soc { .. } => 1,
        }
    }
}

#[inline]
fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

#[inline]
fn norm(a: &[f64]) -> f64 {
    dot(a, a).sqrt()
}

/// `sqrt(x0^2 - ||x1||^2)` in the factored form that avoids cancellation.
/// Returns `None` outside the interior.
#[inline]
fn soc_det_sqrt(x: &[f64]) -> Option<f64> {
    let n1 = norm(&x[1..]);
    let lo = x[0] - n1;
    if lo <= 0.0 {
        return None;
    }
    Some((lo * (x[0] + n1)).sqrt())
}

/// Smallest "eigenvalue" of each block (`min x_i`, or `x0 - ||x1||`).
pub fn min_eigenvalue(blocks: &[Block], x: &[f64]) -> f64 {
    blocks
        .iter()
        .map(|b| {
            let v = &x[b.range()];
            match b {
                Block::NonNeg { .. } => v.iter().copied().fold(f64::INFINITY, f64::min),
                Block::Soc { .. } => v[0] - norm(&v[1..]),
            }
        })
        .fold(f64::INFINITY, f64::min)
}

/// Adds `alpha * e` to `x`, where `e` is the cone identity.
pub fn add_identity(blocks: &[Block], x: &mut [f64], alpha: f64) {
    for b in blocks {
        let r = b.range();
        match b {
            Block::NonNeg { .. } => x[r].iter_mut().for_each(|v| *v += alpha),
            Block::Soc { start, .. } => x[*start] += alpha,
        }
    }
}

/// Largest `alpha` (possibly infinite) with `x + alpha d` in the cone,
/// for `x` in the interior.
pub fn max_step(blocks: &[Block], x: &[f64], d: &[f64]) -> f64 {
    let mut alpha = f64::INFINITY;
    for b in blocks {
        let r = b.range();
        let (xb, db) = (&x[r.clone()], &d[r]);
        match b {
            Block::NonNeg { .. } => {
                for (xi, di) in xb.iter().zip(db) {
                    if *di < 0.0 {
                        alpha = alpha.min(-xi / di);
                    }
                }
            }
            Block::Soc { .. } => alpha = alpha.min(soc_max_step(xb, db)),
        }
    }
    alpha
}

fn soc_max_step(x: &[f64], d: &[f64]) -> f64 {
    // (x0 + a d0)^2 - ||x1 + a d1||^2 = qa a^2 + 2 qb a + qc, with qc > 0
    let qa = d[0] * d[0] - dot(&d[1..], &d[1..]);
    let qb = x[0] * d[0] - dot(&x[1..], &d[1..]);
    let nx = norm(&x[1..]);
    let qc = (x[0] - nx) * (x[0] + nx);
    let scale = qa.abs().max(qb.abs()).max(qc.abs());
    if qa.abs() <= 1e-300 || qa.abs() <= 1e-15 * scale {
        return if qb < 0.0 { -qc / (2.0 * qb) } else { f64::INFINITY };
    }
    let disc = qb * qb - qa * qc;
    if disc < 0.0 {
        return f64::INFINITY;
    }
    let q = -(qb + qb.signum() * disc.sqrt());
    let (r1, r2) = if q == 0.0 { (0.0, 0.0) } else { (q / qa, qc / q) };
    let (lo, hi) = if r1 < r2 { (r1, r2) } else { (r2, r1) };
    if qa > 0.0 {
        if lo > 0.0 {
            lo
        } else {
            f64::INFINITY
        }
    } else {
        hi.max(0.0)
    }
}

/// Nesterov-Todd scaling of one block.
#[derive(Debug, Clone)]
pub enum BlockScaling {
    /// `W = diag(d)`, `d = sqrt(s / z)`.
    NonNeg(Vec<f64>),
    /// `W = beta * [w0, w1'; w1, I + w1 w1' / (1 + w0)]` with `w' J w = 1`.
    Soc { beta: f64, w: Vec<f64> },
}

/// Scaling `W` with `W^{-1} s = W z = lambda` for all blocks.
#[derive(Debug, Clone)]
pub struct Scaling {
    pub blocks: Vec<Block>,
    pub parts: Vec<BlockScaling>,
}

impl Scaling {
    /// The identity scaling (`s = z = e`).
    pub fn identity(blocks: &[Block]) -> Self {
        let parts = blocks
            .iter()
            .map(|b| match *b {
                Block::NonNeg { len, .. } => BlockScaling::NonNeg(vec![1.0; len]),
                Block::Soc { len, .. } => {
                    let mut w = vec![0.0; len];
                    w[0] = 1.0;
                    BlockScaling::Soc { beta: 1.0, w }
                }
            })
            .collect();
        Self {
            blocks: blocks.to_vec(),
            parts,
        }
    }

    /// NT scaling at strictly interior `(s, z)`; `None` if either leaves the interior.
    pub fn nesterov_todd(blocks: &[Block], s: &[f64], z: &[f64]) -> Option<Self> {
        let mut parts = Vec::with_capacity(blocks.len());
        for b in blocks {
            let r = b.range();
            let (sb, zb) = (&s[r.clone()], &z[r]);
            match b {
                Block::NonNeg { .. } => {
                    if sb.iter().chain(zb).any(|v| !(*v > 0.0)) {
                        return None;
                    }
                    parts.push(BlockScaling::NonNeg(sb.iter().zip(zb).map(|(s, z)| (s / z).sqrt()).collect()));
                }
                Block::Soc { .. } => {
                    let sn = soc_det_sqrt(sb)?;
                    let zn = soc_det_sqrt(zb)?;
                    let sbar: Vec<f64> = sb.iter().map(|v| v / sn).collect();
                    let zbar: Vec<f64> = zb.iter().map(|v| v / zn).collect();
                    let gamma = ((1.0 + dot(&sbar, &zbar)) / 2.0).sqrt();
                    let mut w: Vec<f64> = sbar
                        .iter()
                        .zip(&zbar)
                        .enumerate()
                        .map(|(i, (a, c))| if i == 0 { (a + c) / (2.0 * gamma) } else { (a - c) / (2.0 * gamma) })
                        .collect();
                    // re-impose w' J w = 1 against rounding
                    let wn = soc_det_sqrt(&w)?;
                    w.iter_mut().for_each(|v| *v /= wn);
                    parts.push(BlockScaling::Soc {
                        beta: (sn / zn).sqrt(),
                        w,
                    });
                }
            }
        }
        Some(Self {
            blocks: blocks.to_vec(),
            parts,
        })
    }

    /// `v <- W v`.
    pub fn apply(&self, v: &mut [f64]) {
        for (b, p) in self.blocks.iter().zip(&self.parts) {
            let vb = &mut v[b.range()];
            match p {
                BlockScaling::NonNeg(d) => vb.iter_mut().zip(d).for_each(|(x, di)| *x *= di),
                BlockScaling::Soc { beta, w } => {
                    let w1v1 = dot(&w[1..], &vb[1..]);
                    let v0 = vb[0];
                    let coef = v0 + w1v1 / (1.0 + w[0]);
                    vb[0] = beta * (w[0] * v0 + w1v1);
                    for (x, wi) in vb[1..].iter_mut().zip(&w[1..]) {
                        *x = beta * (*x + coef * wi);
                    }
                }
            }
        }
    }

    /// `v <- W^{-1} v`.
    pub fn apply_inverse(&self, v: &mut [f64]) {
        for (b, p) in self.blocks.iter().zip(&self.parts) {
            let vb = &mut v[b.range()];
            match p {
                BlockScaling::NonNeg(d) => vb.iter_mut().zip(d).for_each(|(x, di)| *x /= di),
                BlockScaling::Soc { beta, w } => {
                    let w1v1 = dot(&w[1..], &vb[1..]);
                    let v0 = vb[0];
                    let coef = v0 - w1v1 / (1.0 + w[0]);
                    vb[0] = (w[0] * v0 - w1v1) / beta;
                    for (x, wi) in vb[1..].iter_mut().zip(&w[1..]) {
                        *x = (*x - coef * wi) / beta;
                    }
                }
            }
        }
    }
}

/// Jordan product `u o v`.
pub fn jordan_product(blocks: &[Block], u: &[f64], v: &[f64], out: &mut [f64]) {
    for b in blocks {
        let r = b.range();
        let (ub, vb) = (&u[r.clone()], &v[r.clone()]);
        let ob = &mut out[r];
        match b {
            Block::NonNeg { .. } => {
                for ((o, a), c) in ob.iter_mut().zip(ub).zip(vb) {
                    *o = a * c;
                }
            }
            Block::Soc { .. } => {
                ob[0] = dot(ub, vb);
                for i in 1..ub.len() {
                    ob[i] = ub[0] * vb[i] + vb[0] * ub[i];
                }
            }
        }
    }
}

/// Solves `lambda o x = r` for `x` (`lambda` interior).
pub fn jordan_divide(blocks: &[Block], lambda: &[f64], r: &[f64], out: &mut [f64]) {
    for b in blocks {
        let rg = b.range();
        let (lb, rb) = (&lambda[rg.clone()], &r[rg.clone()]);
        let ob = &mut out[rg];
        match b {
            Block::NonNeg { .. } => {
                for ((o, l), v) in ob.iter_mut().zip(lb).zip(rb) {
                    *o = v / l;
                }
            }
            Block::Soc { .. } => {
                let n1 = norm(&lb[1..]);
                let det = (lb[0] - n1) * (lb[0] + n1);
                let x0 = (lb[0] * rb[0] - dot(&lb[1..], &rb[1..])) / det;
                ob[0] = x0;
                for i in 1..lb.len() {
                    ob[i] = (rb[i] - x0 * lb[i]) / lb[0];
                }
            }
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    fn interior(rng: &mut ChaCha8Rng, blocks: &[Block], m: usize) -> Vec<f64> {
        let mut x: Vec<f64> = (0..m).map(|_| rng.random_range(-1.0..1.0)).collect();
        let shift = (1.0 - min_eigenvalue(blocks, &x)).max(0.0) + rng.random_range(0.0..0.5);
        add_identity(blocks, &mut x, shift);
        x
    }

    fn blocks() -> (Vec<Block>, usize) {
        (
            vec![
                Block::NonNeg { start: 0, len: 3 },
                Block::Soc { start: 3, len: 4 },
                Block::Soc { start: 7, len: 2 },
            ],
            9,
        )
    }

    #[test]
    fn nt_scaling_maps_s_and_z_to_the_same_point() {
        let (blocks, m) = blocks();
        let mut rng = ChaCha8Rng::seed_from_u64(4);
        for _ in 0..50 {
            let s = interior(&mut rng, &blocks, m);
            let z = interior(&mut rng, &blocks, m);
            let w = Scaling::nesterov_todd(&blocks, &s, &z).unwrap();
            let mut a = s.clone();
            w.apply_inverse(&mut a);
            let mut b = z.clone();
            w.apply(&mut b);
            for (x, y) in a.iter().zip(&b) {
                assert!((x - y).abs() < 1e-10 * (1.0 + x.abs()));
            }
            let mut c = s.clone();
            w.apply(&mut c);
            w.apply_inverse(&mut c);
            for (x, y) in c.iter().zip(&s) {
                assert!((x - y).abs() < 1e-10 * (1.0 + x.abs()));
            }
        }
    }

    #[test]
    fn jordan_divide_inverts_product() {
        let (blocks, m) = blocks();
        let mut rng = ChaCha8Rng::seed_from_u64(5);
        let l = interior(&mut rng, &blocks, m);
        let x: Vec<f64> = (0..m).map(|_| rng.random_range(-1.0..1.0)).collect();
        let mut r = vec![0.0; m];
        jordan_product(&blocks, &l, &x, &mut r);
        let mut back = vec![0.0; m];
        jordan_divide(&blocks, &l, &r, &mut back);
        for (a, b) in back.iter().zip(&x) {
            assert!((a - b).abs() < 1e-10);
        }
    }

    #[test]
    fn max_step_lands_on_the_boundary() {
        let (blocks, m) = blocks();
        let mut rng = ChaCha8Rng::seed_from_u64(6);
        for _ in 0..200 {
            let x = interior(&mut rng, &blocks, m);
            let d: Vec<f64> = (0..m).map(|_| rng.random_range(-3.0..3.0)).collect();
            let a = max_step(&blocks, &x, &d);
            if a.is_finite() {
                let at: Vec<f64> = x.iter().zip(&d).map(|(x, d)| x + a * d).collect();
                assert!(min_eigenvalue(&blocks, &at).abs() < 1e-8);
                let inside: Vec<f64> = x.iter().zip(&d).map(|(x, d)| x + 0.99 * a * d).collect();
                assert!(min_eigenvalue(&blocks, &inside) > 0.0);
            } else {
                let far: Vec<f64> = x.iter().zip(&d).map(|(x, d)| x + 1e6 * d).collect();
                assert!(min_eigenvalue(&blocks, &far) >= -1e-6);
            }
        }
    }
}
