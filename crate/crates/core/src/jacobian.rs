//! The three-fold sum map `(z1, z2, z3) -> Gamma(z1) + Gamma(z2) + Gamma(z3)`,
//! its complex Jacobian, and the nested line-integral form of that Jacobian
//! in terms of the torsion triple.

use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::curve::{CurveGamma, TorsionTriple, Vec3};
use crate::error::{Error, Result};
use crate::geometry::{segment_distance, ConvexPolygon};
use crate::poly::{ComplexPolynomial, C64, DEFAULT_CLUSTER_TOL};
use crate::quadrature::GaussLegendre;

/// Zeros of L1 or L2 closer than this to the integration triangle are refused.
pub const SINGULARITY_MARGIN: f64 = 1e-6;

/// Relative change on node doubling above which the integral is rejected.
pub const CONVERGENCE_TOL: f64 = 1e-6;

/// Doubling stops early once the relative change falls below this.
const TARGET_TOL: f64 = 1e-13;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Triple {
    pub z1: C64,
    pub z2: C64,
    pub z3: C64,
}

impl Triple {
    pub fn new(z1: C64, z2: C64, z3: C64) -> Self {
        Self { z1, z2, z3 }
    }

    pub fn points(&self) -> [C64; 3] {
        [self.z1, self.z2, self.z3]
    }

    /// Smallest pairwise distance.
    pub fn min_separation(&self) -> f64 {
        (self.z1 - self.z2)
            .norm()
            .min((self.z2 - self.z3).norm())
            .min((self.z1 - self.z3).norm())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, Default)]
pub enum QuadratureScheme {
    #[default]
    GaussLegendre,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct QuadratureSpec {
    pub nodes_per_segment: usize,
    pub scheme: QuadratureScheme,
    /// Node count at which doubling gives up.
    pub max_nodes: usize,
}

impl Default for QuadratureSpec {
    fn default() -> Self {
        Self {
            nodes_per_segment: 16,
            scheme: QuadratureScheme::GaussLegendre,
            max_nodes: 1024,
        }
    }
}

impl QuadratureSpec {
    pub fn new(nodes_per_segment: usize) -> Result<Self> {
        if nodes_per_segment < 4 {
            return Err(Error::InvalidInput(format!(
                "nodes_per_segment must be at least 4, got {nodes_per_segment}"
            )));
        }
        Ok(Self {
            nodes_per_segment,
            ..Self::default()
        })
    }
}

pub fn phi_sum(curve: &CurveGamma, t: &Triple) -> Vec3 {
    let (a, b, c) = (curve.eval(t.z1), curve.eval(t.z2), curve.eval(t.z3));
    std::array::from_fn(|i| a[i] + b[i] + c[i])
}

/// `-Gamma(z1) + Gamma(z2) - Gamma(z3)`
pub fn phi_alt(curve: &CurveGamma, t: &Triple) -> Vec3 {
    let (a, b, c) = (curve.eval(t.z1), curve.eval(t.z2), curve.eval(t.z3));
    std::array::from_fn(|i| -a[i] + b[i] - c[i])
}

/// `det(Gamma'(z1), Gamma'(z2), Gamma'(z3))`, the points as columns.
pub fn jacobian_direct(curve: &CurveGamma, t: &Triple) -> C64 {
    let d = curve.derivative();
    let col = |z: C64| -> Vec3 { std::array::from_fn(|i| d[i].eval(z)) };
    det_columns(col(t.z1), col(t.z2), col(t.z3))
}

fn det_columns(a: Vec3, b: Vec3, c: Vec3) -> C64 {
    a[0] * (b[1] * c[2] - b[2] * c[1]) - b[0] * (a[1] * c[2] - a[2] * c[1])
        + c[0] * (a[1] * b[2] - a[2] * b[1])
}

/// Evaluates the line-integral form of the Jacobian for one curve. Roots of
/// L1 and L2 are found once and reused across triples.
#[derive(Debug, Clone)]
pub struct JacobianEngine {
    torsion: TorsionTriple,
    l1_zeros: ZeroSet,
    l2_zeros: ZeroSet,
}

#[derive(Debug, Clone)]
enum ZeroSet {
    Finite(Vec<C64>),
    Everywhere,
}

impl ZeroSet {
    fn of(p: &ComplexPolynomial) -> Result<Self> {
        if p.is_zero() {
            return Ok(Self::Everywhere);
        }
        if p.is_constant() {
            return Ok(Self::Finite(Vec::new()));
        }
        Ok(Self::Finite(
            p.roots(DEFAULT_CLUSTER_TOL)?
                .roots
                .iter()
                .map(|r| r.location)
                .collect(),
        ))
    }

    fn distance_to_triangle(&self, t: &Triple) -> f64 {
        match self {
            Self::Everywhere => 0.0,
            Self::Finite(z) => z
                .iter()
                .map(|&p| triangle_distance(p, t.z1, t.z2, t.z3))
                .fold(f64::INFINITY, f64::min),
        }
    }
}

impl JacobianEngine {
    pub fn new(curve: &CurveGamma) -> Result<Self> {
        let torsion = curve.torsion_triple();
        Ok(Self {
            l1_zeros: ZeroSet::of(&torsion.l1)?,
            l2_zeros: ZeroSet::of(&torsion.l2)?,
            torsion,
        })
    }

    pub fn torsion(&self) -> &TorsionTriple {
        &self.torsion
    }

    /// Fails when a zero of L1 or L2 lies within the margin of the closed
    /// triangle spanned by the triple. Every segment `[w1, w2]` with `w1` on
    /// `[z1, z2]` and `w2` on `[z2, z3]` lies in that triangle.
    pub fn precheck(&self, t: &Triple) -> Result<()> {
        for (name, zs) in [("L1", &self.l1_zeros), ("L2", &self.l2_zeros)] {
            let d = zs.distance_to_triangle(t);
            if d <= SINGULARITY_MARGIN {
                return Err(Error::SegmentHitsSingularity {
                    poly: name,
                    distance: d,
                });
            }
        }
        Ok(())
    }

    /// Evaluates the triple integral via an antiderivative of the innermost
    /// integrand: with `G' = L1 L3 / L2^2` and `h = L2 / L1^2`,
    /// `int int h(w1) h(w2) (G(w2) - G(w1)) = H1 K2 - K1 H2`
    /// where `H` integrates `h` and `K` integrates `h G` over the two outer
    /// segments. `G` is taken along straight rays from the triangle's
    /// centroid, which is path independent because the triangle is pole free.
    pub fn integral(&self, t: &Triple, q: &QuadratureSpec) -> Result<C64> {
        self.precheck(t)?;
        let prefactor = self.prefactor(t);
        let center = (t.z1 + t.z2 + t.z3) / 3.0;
        converge(q, |n| {
            let gl = GaussLegendre::new(n);
            let g = |y: C64| self.inner_integrand(y);
            let anti = |w: C64| gl.segment(center, w, g);
            let h = |w: C64| self.outer_integrand(w);
            let (h1, k1) = pair_segment(&gl, t.z1, t.z2, h, anti);
            let (h2, k2) = pair_segment(&gl, t.z2, t.z3, h, anti);
            let a = h1 * k2;
            let b = k1 * h2;
            (
                prefactor * (a - b),
                prefactor.norm() * (a.norm() + b.norm()),
            )
        })
    }

    /// The literal tensor-product evaluation: for every pair of outer nodes
    /// the innermost segment `[w1, w2]` is integrated afresh.
    pub fn integral_nested(&self, t: &Triple, q: &QuadratureSpec) -> Result<C64> {
        self.precheck(t)?;
        let prefactor = self.prefactor(t);
        converge(q, |n| {
            let gl = GaussLegendre::new(n);
            let g = |y: C64| self.inner_integrand(y);
            let h = |w: C64| self.outer_integrand(w);
            let mut total = C64::new(0.0, 0.0);
            let mut magnitude = 0.0;
            let (d1, d2) = (t.z2 - t.z1, t.z3 - t.z2);
            for (&s1, &v1) in gl.nodes.iter().zip(&gl.weights) {
                let w1 = t.z1 + d1 * s1;
                let h1 = h(w1) * d1 * v1;
                for (&s2, &v2) in gl.nodes.iter().zip(&gl.weights) {
                    let w2 = t.z2 + d2 * s2;
                    let term = h1 * h(w2) * d2 * v2 * gl.segment(w1, w2, g);
                    magnitude += term.norm();
                    total += term;
                }
            }
            (prefactor * total, prefactor.norm() * magnitude)
        })
    }

    fn prefactor(&self, t: &Triple) -> C64 {
        let l1 = &self.torsion.l1;
        l1.eval(t.z1) * l1.eval(t.z2) * l1.eval(t.z3)
    }

    fn outer_integrand(&self, w: C64) -> C64 {
        let a = self.torsion.l1.eval(w);
        self.torsion.l2.eval(w) / (a * a)
    }

    fn inner_integrand(&self, y: C64) -> C64 {
        let b = self.torsion.l2.eval(y);
        self.torsion.l1.eval(y) * self.torsion.l3.eval(y) / (b * b)
    }
}

/// `(int h, int h * anti)` over the segment `[a, b]`.
fn pair_segment(
    gl: &GaussLegendre,
    a: C64,
    b: C64,
    h: impl Fn(C64) -> C64,
    anti: impl Fn(C64) -> C64,
) -> (C64, C64) {
    let d = b - a;
    if d.norm() == 0.0 {
        return (C64::new(0.0, 0.0), C64::new(0.0, 0.0));
    }
    let mut sh = C64::new(0.0, 0.0);
    let mut sk = C64::new(0.0, 0.0);
    for (&s, &w) in gl.nodes.iter().zip(&gl.weights) {
        let z = a + d * s;
        let hz = h(z) * w;
        sh += hz;
        sk += hz * anti(z);
    }
    (sh * d, sk * d)
}

/// Doubles the node count until successive values agree. `eval` returns the
/// value and a magnitude against which the change is measured.
fn converge(q: &QuadratureSpec, mut eval: impl FnMut(usize) -> (C64, f64)) -> Result<C64> {
    let mut n = q.nodes_per_segment.max(4);
    let (mut prev, _) = eval(n);
    loop {
        n *= 2;
        let (next, mag) = eval(n);
        let change = (next - prev).norm();
        let rel = if mag > 0.0 { change / mag } else { change };
        if rel <= TARGET_TOL {
            return Ok(next);
        }
        if n * 2 > q.max_nodes {
            return if rel <= CONVERGENCE_TOL {
                Ok(next)
            } else {
                Err(Error::QuadratureNonConvergence { rel_change: rel })
            };
        }
        prev = next;
    }
}

pub fn jacobian_integral(curve: &CurveGamma, t: &Triple, q: &QuadratureSpec) -> Result<C64> {
    JacobianEngine::new(curve)?.integral(t, q)
}

pub fn jacobian_integral_nested(curve: &CurveGamma, t: &Triple, q: &QuadratureSpec) -> Result<C64> {
    JacobianEngine::new(curve)?.integral_nested(t, q)
}

/// Distance from `p` to the closed triangle `abc` (possibly degenerate).
pub fn triangle_distance(p: C64, a: C64, b: C64, c: C64) -> f64 {
    let cr = |u: C64, v: C64| u.re * v.im - u.im * v.re;
    let area = cr(b - a, c - a);
    if area.abs() > 1e-300 {
        let s = area.signum();
        let inside = cr(b - a, p - a) * s >= 0.0
            && cr(c - b, p - b) * s >= 0.0
            && cr(a - c, p - c) * s >= 0.0;
        if inside {
            return 0.0;
        }
    }
    segment_distance(p, a, b)
        .min(segment_distance(p, b, c))
        .min(segment_distance(p, c, a))
}

/// Outcome of an angular-containment test.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SectorReport {
    pub contained: bool,
    pub measured_aperture: f64,
    pub witness: Option<C64>,
    pub zeros_skipped: usize,
}

/// Length of the shortest circular arc containing all the angles, and the
/// indices of its two endpoints (start, end) in counter-clockwise order.
pub fn arc_cover(angles: &[f64]) -> Option<(f64, usize, usize)> {
    if angles.is_empty() {
        return None;
    }
    let tau = std::f64::consts::TAU;
    let mut idx: Vec<usize> = (0..angles.len()).collect();
    let norm = |a: f64| a.rem_euclid(tau);
    idx.sort_by(|&i, &j| norm(angles[i]).total_cmp(&norm(angles[j])));
    let n = idx.len();
    // The largest empty gap between angularly consecutive samples.
    let mut best = (norm(angles[idx[0]]) + tau - norm(angles[idx[n - 1]]), n - 1);
    for k in 0..n - 1 {
        let gap = norm(angles[idx[k + 1]]) - norm(angles[idx[k]]);
        if gap > best.0 {
            best = (gap, k);
        }
    }
    let (gap, k) = best;
    let start = idx[(k + 1) % n];
    let end = idx[k];
    Some(((tau - gap).max(0.0), start, end))
}

/// Measures the angular spread of `f` over `points`.
pub fn sector_contained(
    f: impl Fn(C64) -> C64,
    points: &[C64],
    aperture_budget: f64,
) -> Result<SectorReport> {
    let mut args = Vec::with_capacity(points.len());
    let mut kept = Vec::with_capacity(points.len());
    let mut skipped = 0;
    for &z in points {
        let v = f(z);
        if v.norm() == 0.0 || !v.norm().is_finite() {
            skipped += 1;
            continue;
        }
        args.push(v.arg());
        kept.push(z);
    }
    let (aperture, _, end) = arc_cover(&args).ok_or(Error::AllSamplesZero)?;
    let contained = aperture <= aperture_budget;
    // The far end of the covering arc, measured counter-clockwise.
    let witness = (!contained).then(|| kept[end]);
    Ok(SectorReport {
        contained,
        measured_aperture: aperture,
        witness,
        zeros_skipped: skipped,
    })
}

/// `sector_contained` on the polygon's vertices, boundary points and
/// `n_samples` uniform interior points.
pub fn sector_contained_in<R: Rng + ?Sized>(
    f: impl Fn(C64) -> C64,
    polygon: &ConvexPolygon,
    aperture_budget: f64,
    n_samples: usize,
    rng: &mut R,
) -> Result<SectorReport> {
    let mut pts = polygon.boundary_points(8);
    for _ in 0..n_samples {
        match polygon.sample(rng, 10_000) {
            Some(z) => pts.push(z),
            None => break,
        }
    }
    sector_contained(f, &pts, aperture_budget)
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    fn c(re: f64, im: f64) -> C64 {
        C64::new(re, im)
    }

    fn t(a: C64, b: C64, cc: C64) -> Triple {
        Triple::new(a, b, cc)
    }

    #[test]
    fn phi_examples() {
        let m = CurveGamma::moment();
        let z = c(0.0, 0.0);
        assert_eq!(phi_sum(&m, &t(z, z, z)), [z; 3]);
        assert_eq!(
            phi_sum(&m, &t(c(1.0, 0.0), c(-1.0, 0.0), z)),
            [z, c(2.0, 0.0), z]
        );
        assert_eq!(phi_alt(&m, &t(z, c(1.0, 0.0), z)), [c(1.0, 0.0); 3]);
        let p = c(0.3, -1.2);
        let q = c(2.0, 0.5);
        let g = m.eval(q);
        assert_eq!(phi_alt(&m, &t(p, p, q)), [-g[0], -g[1], -g[2]]);
    }

    #[test]
    fn direct_moment_is_vandermonde() {
        let m = CurveGamma::moment();
        let v = jacobian_direct(&m, &t(c(0.0, 0.0), c(1.0, 0.0), c(2.0, 0.0)));
        assert!((v - c(12.0, 0.0)).norm() < 1e-14);
        let (a, b, d) = (c(0.2, 1.0), c(-1.0, 0.4), c(0.7, -0.3));
        let v = jacobian_direct(&m, &t(a, b, d));
        assert!((v - (b - a) * (d - a) * (d - b) * 6.0).norm() < 1e-12);
    }

    #[test]
    fn direct_normalized_moment() {
        let n = CurveGamma::from_real(&[0.0, 1.0], &[0.0, 0.0, 0.5], &[0.0, 0.0, 0.0, 1.0 / 6.0]);
        let v = jacobian_direct(&n, &t(c(0.0, 0.0), c(1.0, 0.0), c(2.0, 0.0)));
        // det [[1,1,1],[0,1,2],[0,1/2,2]] = 2 - 1 = 1
        assert!((v - c(1.0, 0.0)).norm() < 1e-14, "{v}");
    }

    #[test]
    fn integral_moment_matches_direct() {
        let m = CurveGamma::moment();
        let tr = t(c(0.0, 0.0), c(1.0, 0.0), c(2.0, 0.0));
        let q = QuadratureSpec::new(16).unwrap();
        let a = jacobian_integral(&m, &tr, &q).unwrap();
        let b = jacobian_integral_nested(&m, &tr, &q).unwrap();
        assert!((a - c(12.0, 0.0)).norm() < 1e-10 * 12.0, "{a}");
        assert!((b - c(12.0, 0.0)).norm() < 1e-10 * 12.0, "{b}");
    }

    #[test]
    fn integral_collapses_when_points_meet() {
        let m = CurveGamma::moment();
        let q = QuadratureSpec::default();
        let z2 = c(1.0, 0.5);
        let v = jacobian_integral(&m, &t(c(0.0, 0.0), z2, z2), &q).unwrap();
        assert_eq!(v, c(0.0, 0.0));
    }

    #[test]
    fn integral_random_quartic() {
        // L1 = 1 + 0.6 z^2 and L2 have their zeros away from the triangle.
        let curve = CurveGamma::from_real(
            &[0.0, 1.0, 0.0, 0.2],
            &[0.0, 0.3, 0.5, 0.1, 0.05],
            &[0.0, 0.0, 0.2, 0.4, -0.3],
        );
        let tr = t(c(0.1, 0.0), c(1.0, 0.2), c(2.0, -0.1));
        let engine = JacobianEngine::new(&curve).unwrap();
        engine.precheck(&tr).unwrap();
        let q = QuadratureSpec::default();
        let d = jacobian_direct(&curve, &tr);
        let a = engine.integral(&tr, &q).unwrap();
        let b = engine.integral_nested(&tr, &q).unwrap();
        let scale = d.norm().max(1.0);
        assert!((a - d).norm() < 1e-6 * scale, "{a} vs {d}");
        assert!((b - d).norm() < 1e-6 * scale, "{b} vs {d}");
    }

    #[test]
    fn precheck_refuses_zero_on_segment() {
        // L1 = 3z^2 vanishes at 0, a vertex of the triangle.
        let curve = CurveGamma::from_real(&[0.0, 0.0, 0.0, 1.0], &[0.0, 1.0], &[0.0, 0.0, 1.0]);
        let err = jacobian_integral(
            &curve,
            &t(c(0.0, 0.0), c(1.0, 0.0), c(0.0, 1.0)),
            &QuadratureSpec::default(),
        )
        .unwrap_err();
        assert!(matches!(
            err,
            Error::SegmentHitsSingularity { poly: "L1", .. }
        ));
    }

    #[test]
    fn spec_rejects_few_nodes() {
        assert!(QuadratureSpec::new(3).is_err());
        assert!(QuadratureSpec::new(4).is_ok());
    }

    #[test]
    fn triangle_distance_cases() {
        let (a, b, cc) = (c(0.0, 0.0), c(2.0, 0.0), c(0.0, 2.0));
        assert_eq!(triangle_distance(c(0.5, 0.5), a, b, cc), 0.0);
        assert!((triangle_distance(c(-1.0, 0.5), a, b, cc) - 1.0).abs() < 1e-15);
        assert!((triangle_distance(c(2.0, 2.0), a, b, cc) - 2f64.sqrt()).abs() < 1e-15);
        // collinear
        assert!((triangle_distance(c(1.0, 1.0), a, b, c(1.0, 0.0)) - 1.0).abs() < 1e-15);
    }

    #[test]
    fn arc_cover_wraps() {
        let (ap, _, _) = arc_cover(&[3.0, -3.0]).unwrap();
        assert!((ap - (std::f64::consts::TAU - 6.0)).abs() < 1e-12);
        let (ap, s, e) = arc_cover(&[0.1, 0.5, 0.3]).unwrap();
        assert!((ap - 0.4).abs() < 1e-12);
        assert_eq!((s, e), (0, 1));
        assert_eq!(arc_cover(&[]), None);
    }

    #[test]
    fn sector_examples() {
        let mut rng = ChaCha8Rng::seed_from_u64(1);
        let sq = ConvexPolygon::square(c(3.0, 3.0), 1.0);
        let r = sector_contained_in(|_| c(1.0, 0.0), &sq, 0.0, 100, &mut rng).unwrap();
        assert!(r.contained);
        assert_eq!(r.measured_aperture, 0.0);

        let a = std::f64::consts::PI / 16.0;
        let wedge = ConvexPolygon::new(vec![
            c(0.0, 0.0),
            C64::from_polar(1.0, 0.0),
            C64::from_polar(1.0, a),
        ]);
        let r =
            sector_contained_in(|z| z, &wedge, std::f64::consts::PI / 8.0, 500, &mut rng).unwrap();
        assert!(r.contained);
        assert!(
            (r.measured_aperture - a).abs() < 1e-9,
            "{}",
            r.measured_aperture
        );
        assert_eq!(r.zeros_skipped, 1);

        let r = sector_contained(|z| z, &[c(1.0, 0.0), c(-1.0, 0.1)], 1.0).unwrap();
        assert!(!r.contained);
        assert!(r.witness.is_some());
        assert_eq!(
            sector_contained(|_| c(0.0, 0.0), &[c(1.0, 0.0)], 1.0),
            Err(Error::AllSamplesZero)
        );
    }
}
