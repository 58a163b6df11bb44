//! Dense complex polynomials, root extraction and polynomial determinants.

use std::ops::{Add, Mul, Neg, Sub};

use num_complex::Complex64;
use serde::{Deserialize, Deserializer, Serialize, Serializer};

use crate::error::{Error, Result};

pub type C64 = Complex64;

/// Default distance below which numerically recovered roots are merged.
pub const DEFAULT_CLUSTER_TOL: f64 = 1e-7;

/// Relative backward-error level at which a candidate cluster is accepted as
/// a single multiple root.
const MULTIPLE_ROOT_ETA: f64 = 1e-10;

/// A polynomial over the complex numbers stored as a dense coefficient
/// vector, constant term first.
///
/// Trailing exact zeros are stripped on construction, so the last stored
/// coefficient is nonzero unless the polynomial is identically zero (in
/// which case the vector is empty).
#[derive(Debug, Clone, PartialEq, Default)]
pub struct ComplexPolynomial {
    coeffs: Vec<C64>,
}

impl ComplexPolynomial {
    pub fn new(mut coeffs: Vec<C64>) -> Self {
        while coeffs.last().is_some_and(|c| *c == C64::new(0.0, 0.0)) {
            coeffs.pop();
        }
        Self { coeffs }
    }

    pub fn zero() -> Self {
        Self { coeffs: Vec::new() }
    }

    pub fn constant(c: C64) -> Self {
        Self::new(vec![c])
    }

    /// `c * z^k`
    pub fn monomial(c: C64, k: usize) -> Self {
        let mut coeffs = vec![C64::new(0.0, 0.0); k + 1];
        coeffs[k] = c;
        Self::new(coeffs)
    }

    pub fn from_real(coeffs: &[f64]) -> Self {
        Self::new(coeffs.iter().map(|&c| C64::new(c, 0.0)).collect())
    }

    /// Builds `leading * prod (z - root)^multiplicity`.
    pub fn from_roots(leading: C64, roots: &[Root]) -> Self {
        let mut p = Self::constant(leading);
        for r in roots {
            let factor = Self::new(vec![-r.location, C64::new(1.0, 0.0)]);
            for _ in 0..r.multiplicity {
                p = &p * &factor;
            }
        }
        p
    }

    pub fn coeffs(&self) -> &[C64] {
        &self.coeffs
    }

    /// Degree, or `None` for the zero polynomial.
    pub fn degree(&self) -> Option<usize> {
        self.coeffs.len().checked_sub(1)
    }

    /// Degree with the zero polynomial counted as degree 0.
    pub fn degree_or_zero(&self) -> usize {
        self.degree().unwrap_or(0)
    }

    pub fn is_zero(&self) -> bool {
        self.coeffs.is_empty()
    }

    pub fn is_constant(&self) -> bool {
        self.coeffs.len() <= 1
    }

    pub fn leading(&self) -> C64 {
        self.coeffs.last().copied().unwrap_or_default()
    }

    pub fn coeff(&self, k: usize) -> C64 {
        self.coeffs.get(k).copied().unwrap_or_default()
    }

    pub fn max_coeff_modulus(&self) -> f64 {
        self.coeffs.iter().map(|c| c.norm()).fold(0.0, f64::max)
    }

    /// True when every coefficient has modulus below `tol`.
    pub fn is_negligible(&self, tol: f64) -> bool {
        self.coeffs.iter().all(|c| c.norm() < tol)
    }

    /// Horner evaluation.
    pub fn eval(&self, z: C64) -> C64 {
        self.coeffs
            .iter()
            .rev()
            .fold(C64::new(0.0, 0.0), |acc, &c| acc * z + c)
    }

    /// Evaluates `sum |c_k| |z|^k`, the natural rounding-error scale of `eval`.
    pub fn eval_abs(&self, z: C64) -> f64 {
        let r = z.norm();
        self.coeffs
            .iter()
            .rev()
            .fold(0.0, |acc, c| acc * r + c.norm())
    }

    /// Divided differences `p[z1]`, `p[z1, z2]`, `p[z1, z2, z3]` through
    /// complete homogeneous sums, so no cancellation occurs as the points
    /// merge; coincident points give the Taylor values `p`, `p'`, `p''/2`.
    pub fn divided_differences(&self, z: [C64; 3]) -> [C64; 3] {
        let zero = C64::new(0.0, 0.0);
        let one = C64::new(1.0, 0.0);
        let (mut pow, mut pow_prev) = (one, zero);
        // h2 = h_{k-1}(z1, z2) and h3 = h_{k-2}(z1, z2, z3) after the updates
        let (mut h2, mut h3) = (zero, zero);
        let mut out = [zero; 3];
        for (k, &c) in self.coeffs.iter().enumerate() {
            if k >= 2 {
                h3 = if k == 2 { one } else { z[2] * h3 + h2 };
            }
            if k >= 1 {
                h2 = if k == 1 { one } else { z[1] * h2 + pow_prev };
                out[1] += c * h2;
            }
            if k >= 2 {
                out[2] += c * h3;
            }
            out[0] += c * pow;
            pow_prev = pow;
            pow *= z[0];
        }
        out
    }

    pub fn derivative(&self) -> Self {
        if self.coeffs.len() <= 1 {
            return Self::zero();
        }
        Self::new(
            self.coeffs
                .iter()
                .enumerate()
                .skip(1)
                .map(|(k, &c)| c * k as f64)
                .collect(),
        )
    }

    pub fn nth_derivative(&self, n: usize) -> Self {
        (0..n).fold(self.clone(), |p, _| p.derivative())
    }

    pub fn scale(&self, s: C64) -> Self {
        Self::new(self.coeffs.iter().map(|&c| c * s).collect())
    }

    /// Taylor shift: the coefficients of `p(z + h)`, by repeated synthetic
    /// division.
    pub fn shift(&self, h: C64) -> Self {
        let mut a = self.coeffs.clone();
        let n = a.len();
        for i in 0..n {
            for j in (i..n.saturating_sub(1)).rev() {
                let next = a[j + 1];
                a[j] += h * next;
            }
        }
        Self::new(a)
    }

    /// Replaces coefficients whose modulus is below `tol` by exact zeros.
    pub fn chop(&self, tol: f64) -> Self {
        Self::new(
            self.coeffs
                .iter()
                .map(|&c| {
                    if c.norm() < tol {
                        C64::new(0.0, 0.0)
                    } else {
                        c
                    }
                })
                .collect(),
        )
    }

    /// Distinct roots with multiplicities, sorted by modulus (ties broken by
    /// ascending principal argument).
    pub fn roots(&self, cluster_tol: f64) -> Result<RootSet> {
        roots(self, cluster_tol)
    }
}

impl Add for &ComplexPolynomial {
    type Output = ComplexPolynomial;
    fn add(self, rhs: Self) -> ComplexPolynomial {
        let n = self.coeffs.len().max(rhs.coeffs.len());
        ComplexPolynomial::new((0..n).map(|k| self.coeff(k) + rhs.coeff(k)).collect())
    }
}

impl Sub for &ComplexPolynomial {
    type Output = ComplexPolynomial;
    fn sub(self, rhs: Self) -> ComplexPolynomial {
        let n = self.coeffs.len().max(rhs.coeffs.len());
        ComplexPolynomial::new((0..n).map(|k| self.coeff(k) - rhs.coeff(k)).collect())
    }
}

impl Mul for &ComplexPolynomial {
    type Output = ComplexPolynomial;
    fn mul(self, rhs: Self) -> ComplexPolynomial {
        if self.is_zero() || rhs.is_zero() {
            return ComplexPolynomial::zero();
        }
        let mut out = vec![C64::new(0.0, 0.0); self.coeffs.len() + rhs.coeffs.len() - 1];
        for (i, &a) in self.coeffs.iter().enumerate() {
            for (j, &b) in rhs.coeffs.iter().enumerate() {
                out[i + j] += a * b;
            }
        }
        ComplexPolynomial::new(out)
    }
}

impl Neg for &ComplexPolynomial {
    type Output = ComplexPolynomial;
    fn neg(self) -> ComplexPolynomial {
        self.scale(C64::new(-1.0, 0.0))
    }
}

impl Serialize for ComplexPolynomial {
    fn serialize<S: Serializer>(&self, s: S) -> std::result::Result<S::Ok, S::Error> {
        let pairs: Vec<[f64; 2]> = self.coeffs.iter().map(|c| [c.re, c.im]).collect();
        pairs.serialize(s)
    }
}

impl<'de> Deserialize<'de> for ComplexPolynomial {
    fn deserialize<D: Deserializer<'de>>(d: D) -> std::result::Result<Self, D::Error> {
        let pairs = Vec::<[f64; 2]>::deserialize(d)?;
        if pairs.iter().flatten().any(|v| !v.is_finite()) {
            return Err(serde::de::Error::custom("non-finite coefficient"));
        }
        Ok(Self::new(
            pairs.into_iter().map(|[re, im]| C64::new(re, im)).collect(),
        ))
    }
}

/// A distinct root together with its multiplicity.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Root {
    pub location: C64,
    pub multiplicity: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RootSet {
    pub roots: Vec<Root>,
    /// Max |p| over the returned roots.
    pub residual: f64,
    /// Leading coefficient of the source polynomial.
    pub leading: C64,
}

impl RootSet {
    pub fn total_multiplicity(&self) -> usize {
        self.roots.iter().map(|r| r.multiplicity).sum()
    }

    pub fn reconstruct(&self) -> ComplexPolynomial {
        ComplexPolynomial::from_roots(self.leading, &self.roots)
    }
}

fn roots(p: &ComplexPolynomial, cluster_tol: f64) -> Result<RootSet> {
    let n = match p.degree() {
        None | Some(0) => return Err(Error::DegreeZero),
        Some(n) => n,
    };
    // Exact zeros at the origin are peeled off before iterating.
    let zeros_at_origin = p.coeffs.iter().take_while(|c| c.norm() == 0.0).count();
    let reduced = ComplexPolynomial::new(p.coeffs[zeros_at_origin..].to_vec());

    let mut found: Vec<(C64, usize)> = Vec::new();
    if zeros_at_origin > 0 {
        found.push((C64::new(0.0, 0.0), zeros_at_origin));
    }
    if n > zeros_at_origin {
        let approx = aberth(&reduced)?;
        let polished: Vec<C64> = approx
            .into_iter()
            .map(|z| newton_polish(&reduced, z, 3))
            .collect();
        found.extend(cluster_roots(&reduced, polished, cluster_tol));
    }
    merge_close(&mut found, cluster_tol);

    let residual = found
        .iter()
        .map(|(z, _)| p.eval(*z).norm())
        .fold(0.0, f64::max);
    let mut roots: Vec<Root> = found
        .into_iter()
        .map(|(location, multiplicity)| Root {
            location,
            multiplicity,
        })
        .collect();
    sort_by_modulus(&mut roots);
    debug_assert_eq!(roots.iter().map(|r| r.multiplicity).sum::<usize>(), n);
    Ok(RootSet {
        roots,
        residual,
        leading: p.leading(),
    })
}

/// Sorts by modulus; runs of equal modulus (relative 1e-9) are ordered by
/// ascending principal argument.
fn sort_by_modulus(roots: &mut [Root]) {
    roots.sort_by(|a, b| a.location.norm().total_cmp(&b.location.norm()));
    let mut start = 0;
    while start < roots.len() {
        let m0 = roots[start].location.norm();
        let mut end = start + 1;
        while end < roots.len() && roots[end].location.norm() - m0 <= 1e-9 * m0.max(1e-300) {
            end += 1;
        }
        roots[start..end].sort_by(|a, b| a.location.arg().total_cmp(&b.location.arg()));
        start = end;
    }
}

/// Aberth–Ehrlich simultaneous iteration. `p` must have a nonzero constant
/// term and degree at least one.
fn aberth(p: &ComplexPolynomial) -> Result<Vec<C64>> {
    let n = p.degree_or_zero();
    let lead = p.leading();
    if n == 1 {
        return Ok(vec![-p.coeff(0) / lead]);
    }
    let dp = p.derivative();
    let r0 = (p.coeff(0) / lead).norm().powf(1.0 / n as f64);
    let mut z: Vec<C64> = (0..n)
        .map(|k| C64::from_polar(r0, std::f64::consts::TAU * k as f64 / n as f64 + 0.4))
        .collect();
    let mut done = vec![false; n];

    const MAX_ITER: usize = 2000;
    for _ in 0..MAX_ITER {
        for k in 0..n {
            if done[k] {
                continue;
            }
            let pz = p.eval(z[k]);
            if pz.norm() == 0.0 {
                done[k] = true;
                continue;
            }
            let ratio = pz / dp.eval(z[k]);
            let sum: C64 = (0..n)
                .filter(|&j| j != k)
                .map(|j| (z[k] - z[j]).inv())
                .sum();
            let w = ratio / (C64::new(1.0, 0.0) - ratio * sum);
            if !w.is_finite() {
                // nudge off a coincident or critical point
                let bump = C64::new(1e-8, 1e-8) * (1.0 + z[k].norm());
                z[k] += bump;
                continue;
            }
            z[k] -= w;
            if w.norm() <= 4.0 * f64::EPSILON * z[k].norm().max(f64::MIN_POSITIVE) {
                done[k] = true;
            }
        }
        if done.iter().all(|&d| d) {
            break;
        }
    }
    // Multiple roots stall at ~eps^(1/m) without meeting the step criterion;
    // accept them when the backward error is at rounding level.
    let residual = z
        .iter()
        .map(|&zk| p.eval(zk).norm() / p.eval_abs(zk).max(f64::MIN_POSITIVE))
        .fold(0.0, f64::max);
    if !residual.is_finite() || residual > 1e-8 {
        return Err(Error::NonConvergence { residual });
    }
    Ok(z)
}

fn newton_polish(p: &ComplexPolynomial, mut z: C64, steps: usize) -> C64 {
    let dp = p.derivative();
    let mut fz = p.eval(z).norm();
    for _ in 0..steps {
        let d = dp.eval(z);
        if d.norm() == 0.0 {
            break;
        }
        let cand = z - p.eval(z) / d;
        let fc = p.eval(cand).norm();
        if fc.is_finite() && fc < fz {
            z = cand;
            fz = fc;
        } else {
            break;
        }
    }
    z
}

/// Single-linkage grouping of points at distance threshold `t`.
fn linkage(points: &[C64], t: f64) -> Vec<Vec<C64>> {
    let n = points.len();
    let mut label: Vec<usize> = (0..n).collect();
    fn find(label: &mut [usize], i: usize) -> usize {
        let mut r = i;
        while label[r] != r {
            r = label[r];
        }
        label[i] = r;
        r
    }
    for i in 0..n {
        for j in i + 1..n {
            if (points[i] - points[j]).norm() <= t {
                let (a, b) = (find(&mut label, i), find(&mut label, j));
                if a != b {
                    label[a.max(b)] = a.min(b);
                }
            }
        }
    }
    let mut groups: Vec<(usize, Vec<C64>)> = Vec::new();
    for (i, &pt) in points.iter().enumerate() {
        let r = find(&mut label, i);
        match groups.iter_mut().find(|(root, _)| *root == r) {
            Some((_, g)) => g.push(pt),
            None => groups.push((r, vec![pt])),
        }
    }
    groups.into_iter().map(|(_, g)| g).collect()
}

/// Whether `c` behaves as an `m`-fold root of `p` up to rounding.
fn is_multiple_root(p: &ComplexPolynomial, c: C64, m: usize) -> bool {
    let mut d = p.clone();
    for _ in 0..m {
        if d.eval(c).norm() > MULTIPLE_ROOT_ETA * d.eval_abs(c).max(f64::MIN_POSITIVE) {
            return false;
        }
        d = d.derivative();
    }
    true
}

fn cluster_roots(p: &ComplexPolynomial, approx: Vec<C64>, cluster_tol: f64) -> Vec<(C64, usize)> {
    let scale = approx.iter().map(|z| z.norm()).fold(1.0, f64::max);
    let t0 = (1e-2 * scale).max(cluster_tol);
    let mut out = Vec::new();
    for g in linkage(&approx, t0) {
        resolve_group(p, g, t0, cluster_tol, &mut out);
    }
    out
}

fn resolve_group(
    p: &ComplexPolynomial,
    group: Vec<C64>,
    t: f64,
    cluster_tol: f64,
    out: &mut Vec<(C64, usize)>,
) {
    let m = group.len();
    let centroid = group.iter().sum::<C64>() / m as f64;
    if m == 1 {
        out.push((group[0], 1));
        return;
    }
    // A genuine m-fold root is a simple root of the (m-1)-th derivative.
    let candidate = newton_polish(&p.nth_derivative(m - 1), centroid, 16);
    if (candidate - centroid).norm() <= t && is_multiple_root(p, candidate, m) {
        out.push((candidate, m));
        return;
    }
    if t <= cluster_tol {
        out.push((centroid, m));
        return;
    }
    let next = (t / 10.0).max(cluster_tol);
    for sub in linkage(&group, next) {
        resolve_group(p, sub, next, cluster_tol, out);
    }
}

/// Final pass so that returned roots are pairwise farther apart than
/// `cluster_tol`.
fn merge_close(found: &mut Vec<(C64, usize)>, cluster_tol: f64) {
    loop {
        let mut pair = None;
        'outer: for i in 0..found.len() {
            for j in i + 1..found.len() {
                if (found[i].0 - found[j].0).norm() <= cluster_tol {
                    pair = Some((i, j));
                    break 'outer;
                }
            }
        }
        let Some((i, j)) = pair else { break };
        let (zj, mj) = found.remove(j);
        let (zi, mi) = found[i];
        let total = mi + mj;
        found[i] = ((zi * mi as f64 + zj * mj as f64) / total as f64, total);
    }
}

/// Determinant of a 2x2 matrix of polynomials.
pub fn det2(m: &[[ComplexPolynomial; 2]; 2]) -> ComplexPolynomial {
    &(&m[0][0] * &m[1][1]) - &(&m[0][1] * &m[1][0])
}

/// Determinant of a 3x3 matrix of polynomials by cofactor expansion along the
/// first row.
pub fn det3(m: &[[ComplexPolynomial; 3]; 3]) -> ComplexPolynomial {
    let minor = |c0: usize, c1: usize| {
        det2(&[
            [m[1][c0].clone(), m[1][c1].clone()],
            [m[2][c0].clone(), m[2][c1].clone()],
        ])
    };
    let t0 = &m[0][0] * &minor(1, 2);
    let t1 = &m[0][1] * &minor(0, 2);
    let t2 = &m[0][2] * &minor(0, 1);
    &(&t0 - &t1) + &t2
}
