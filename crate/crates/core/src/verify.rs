//! Sampling checks of the geometric lower bound
//! `|J(z1, z2, z3)| >= C prod |L3(z_i)|^(1/3) prod |z_j - z_i|`
//! and of the two comparability statements it rests on.

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::curve::CurveGamma;
use crate::decomposition::ClassifiedRegion;
use crate::error::{Error, Result};
use crate::jacobian::{JacobianEngine, QuadratureSpec, Triple};
use crate::poly::{ComplexPolynomial, C64};
use crate::quadrature::GaussLegendre;

/// Consecutive rejections after which a region counts as empty.
pub const MAX_REJECTIONS: usize = 100_000;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct RatioSample {
    pub triple: Triple,
    pub jacobian_mod: f64,
    pub bound_value: f64,
    pub ratio: f64,
}

/// Evaluates `geometric_ratio` for one curve without re-deriving it.
#[derive(Debug, Clone)]
pub struct RatioEvaluator {
    derivative: [ComplexPolynomial; 3],
    torsion: ComplexPolynomial,
}

impl RatioEvaluator {
    pub fn new(curve: &CurveGamma) -> Self {
        Self {
            derivative: curve.derivative(),
            torsion: curve.torsion_triple().l3,
        }
    }

    pub fn ratio(&self, t: &Triple) -> Result<RatioSample> {
        if t.min_separation() == 0.0 {
            return Err(Error::DegenerateTriple);
        }
        let pts = t.points();
        // J = prod(z_j - z_i) * det of the divided differences of Gamma';
        // the Vandermonde factor cancels exactly against the bound
        let cols: [[C64; 3]; 3] = {
            let d: [[C64; 3]; 3] =
                std::array::from_fn(|i| self.derivative[i].divided_differences(pts));
            std::array::from_fn(|s| std::array::from_fn(|i| d[i][s]))
        };
        let [a, b, c] = cols;
        let det = a[0] * (b[1] * c[2] - b[2] * c[1]) - b[0] * (a[1] * c[2] - a[2] * c[1])
            + c[0] * (a[1] * b[2] - a[2] * b[1]);
        let weights: f64 = pts
            .iter()
            .map(|&z| self.torsion.eval(z).norm().cbrt())
            .product();
        if weights == 0.0 {
            return Err(Error::InvalidInput(
                "torsion vanishes at a point of the triple".into(),
            ));
        }
        let gaps = (t.z2 - t.z1).norm() * (t.z3 - t.z1).norm() * (t.z3 - t.z2).norm();
        Ok(RatioSample {
            triple: *t,
            jacobian_mod: det.norm() * gaps,
            bound_value: weights * gaps,
            ratio: det.norm() / weights,
        })
    }
}

/// `|J| / (prod |L3(z_i)|^(1/3) prod |z_j - z_i|)`.
pub fn geometric_ratio(curve: &CurveGamma, t: &Triple) -> Result<RatioSample> {
    RatioEvaluator::new(curve).ratio(t)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct VerificationReport {
    pub region_id: usize,
    pub n_samples: usize,
    pub min_ratio: f64,
    pub median_ratio: f64,
    pub max_ratio: f64,
    pub worst_witness: RatioSample,
    /// Triples dropped because a point hit a zero of L3 or two coincided.
    pub excluded_count: usize,
    /// Set when the region was sampled although it is not admissible.
    pub exploratory: bool,
}

/// Samples `n` triples uniformly from the region's polygon and aggregates
/// the geometric ratio. Inadmissible regions are refused.
pub fn verify_region(
    curve: &CurveGamma,
    region: &ClassifiedRegion,
    n: usize,
    seed: u64,
) -> Result<VerificationReport> {
    if !region.admissible {
        let s = region.sigma.sigma;
        return Err(Error::Inadmissible {
            sigma: [s[0] as f64, s[1] as f64, s[2] as f64],
        });
    }
    sample_region(&RatioEvaluator::new(curve), region, n, seed, false)
}

/// Like `verify_region` but accepts inadmissible regions and marks the
/// report exploratory. Nothing is asserted about the outcome.
pub fn explore_region(
    curve: &CurveGamma,
    region: &ClassifiedRegion,
    n: usize,
    seed: u64,
) -> Result<VerificationReport> {
    sample_region(
        &RatioEvaluator::new(curve),
        region,
        n,
        seed,
        !region.admissible,
    )
}

/// Seed for one region, derived from the run seed and the region id.
pub fn region_seed(seed: u64, region_id: usize) -> u64 {
    seed ^ (region_id as u64 + 1).wrapping_mul(0x9E37_79B9_7F4A_7C15)
}

/// Samples every region of a report in parallel, in region order.
/// Admissible regions are verified, the rest explored.
pub fn verify_report(
    curve: &CurveGamma,
    regions: &[ClassifiedRegion],
    n: usize,
    seed: u64,
) -> Result<Vec<VerificationReport>> {
    let eval = RatioEvaluator::new(curve);
    crate::par_map(regions, |r| {
        sample_region(&eval, r, n, region_seed(seed, r.id), !r.admissible)
    })
    .into_iter()
    .collect()
}

/// Shared driver; `eval` lets callers reuse one evaluator across regions.
pub fn sample_region(
    eval: &RatioEvaluator,
    region: &ClassifiedRegion,
    n: usize,
    seed: u64,
    exploratory: bool,
) -> Result<VerificationReport> {
    if n == 0 {
        return Err(Error::InvalidInput(
            "at least one sample is required".into(),
        ));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let poly = &region.region.polygon;
    let mut draw = || {
        poly.sample(&mut rng, MAX_REJECTIONS)
            .ok_or(Error::EmptyRegion {
                attempts: MAX_REJECTIONS,
            })
    };
    let mut samples = Vec::with_capacity(n);
    let mut excluded = 0;
    for _ in 0..n {
        let t = Triple::new(draw()?, draw()?, draw()?);
        match eval.ratio(&t) {
            Ok(s) => samples.push(s),
            Err(_) => excluded += 1,
        }
    }
    if samples.is_empty() {
        return Err(Error::AllSamplesZero);
    }
    let worst = *samples
        .iter()
        .min_by(|a, b| a.ratio.total_cmp(&b.ratio))
        .expect("nonempty");
    let mut ratios: Vec<f64> = samples.iter().map(|s| s.ratio).collect();
    ratios.sort_by(f64::total_cmp);
    Ok(VerificationReport {
        region_id: region.id,
        n_samples: samples.len(),
        min_ratio: ratios[0],
        median_ratio: ratios[ratios.len() / 2],
        max_ratio: ratios[ratios.len() - 1],
        worst_witness: worst,
        excluded_count: excluded,
        exploratory,
    })
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct BoundCheck {
    pub lhs: f64,
    pub rhs: f64,
    pub ratio: f64,
}

/// `|int_{z1}^{z2} |int_{z2}^{z3} |w2 - w1| dw2| dw1|` against
/// `|z3 - z1| |z3 - z2| |z2 - z1|`.
pub fn triple_integral_bound_check(t: &Triple, q: &QuadratureSpec) -> BoundCheck {
    let gl = GaussLegendre::new(q.nodes_per_segment);
    let (d1, d2) = (t.z2 - t.z1, t.z3 - t.z2);
    let mut acc = 0.0;
    for (&s1, &v1) in gl.nodes.iter().zip(&gl.weights) {
        let w1 = t.z1 + d1 * s1;
        for (&s2, &v2) in gl.nodes.iter().zip(&gl.weights) {
            acc += v1 * v2 * (t.z2 + d2 * s2 - w1).norm();
        }
    }
    let lhs = d1.norm() * d2.norm() * acc;
    let rhs = (t.z3 - t.z1).norm() * d2.norm() * d1.norm();
    BoundCheck {
        lhs,
        rhs,
        ratio: if rhs > 0.0 { lhs / rhs } else { f64::NAN },
    }
}

/// `|J|` against the nested integral with every integrand replaced by its
/// modulus. Both sides are returned for ratio reporting.
pub fn modulus_comparability_check(
    curve: &CurveGamma,
    t: &Triple,
    q: &QuadratureSpec,
) -> Result<BoundCheck> {
    let engine = JacobianEngine::new(curve)?;
    engine.precheck(t)?;
    let tt = engine.torsion();
    let lhs = crate::jacobian::jacobian_direct(curve, t).norm();
    let gl = GaussLegendre::new(q.nodes_per_segment);
    let h = |w: C64| tt.l2.eval(w).norm() / tt.l1.eval(w).norm_sqr();
    let g = |y: C64| tt.l1.eval(y).norm() * tt.l3.eval(y).norm() / tt.l2.eval(y).norm_sqr();
    let (d1, d2) = (t.z2 - t.z1, t.z3 - t.z2);
    let mut acc = 0.0;
    for (&s1, &v1) in gl.nodes.iter().zip(&gl.weights) {
        let w1 = t.z1 + d1 * s1;
        let h1 = h(w1);
        for (&s2, &v2) in gl.nodes.iter().zip(&gl.weights) {
            let w2 = t.z2 + d2 * s2;
            let dw = w2 - w1;
            let inner: f64 = gl
                .nodes
                .iter()
                .zip(&gl.weights)
                .map(|(&s, &v)| v * g(w1 + dw * s))
                .sum();
            acc += v1 * v2 * h1 * h(w2) * dw.norm() * inner;
        }
    }
    let pre: f64 = t.points().iter().map(|&z| tt.l1.eval(z).norm()).product();
    let rhs = pre * d1.norm() * d2.norm() * acc;
    Ok(BoundCheck {
        lhs,
        rhs,
        ratio: if rhs > 0.0 { lhs / rhs } else { f64::NAN },
    })
}
