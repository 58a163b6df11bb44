//! Numerical estimates for the convolution operator `T f(z) = int_D f(z - Gamma(w)) lambda(w) dw`,
//! its restricted weak-type pairing, the small-ball measure identity, and
//! the extension operator `E f(z) = int e^{i z.Gamma(w)} f(w) lambda(w) dw`.
//!
//! Throughout, `z . Gamma(w)` is the real pairing of C^3 viewed as R^6:
//! `sum_j Re z_j Re Gamma_j(w) + Im z_j Im Gamma_j(w)`.

use std::f64::consts::PI;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;
use serde::{Deserialize, Serialize};

use crate::curve::{CurveGamma, TorsionTriple, Vec3};
use crate::error::{Error, Result};
use crate::par_map;
use crate::poly::C64;
use crate::quadrature::GaussLegendre;

/// Monte Carlo samples per batch. Each batch draws from its own ChaCha
/// stream, so results do not depend on the thread count.
pub const MC_BATCH: usize = 4096;

/// Relative change (against the `L1(lambda)` norm) accepted by the
/// extension quadrature's doubling test. Zeros of the torsion inside the
/// support make the weight a cube-root cusp, so convergence there is only
/// algebraic.
pub const EXTENSION_TOL: f64 = 1e-6;

/// Number of doublings tried before giving up.
pub const EXTENSION_MAX_DOUBLINGS: usize = 5;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum SetKind {
    Ball,
    Box,
}

/// A ball or axis-aligned box in C^3 = R^6.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MeasurableSet {
    pub kind: SetKind,
    pub center: Vec3,
    /// Radius for a ball, half-width for a box.
    pub size: f64,
    pub volume: f64,
}

impl MeasurableSet {
    pub fn new(kind: SetKind, center: Vec3, size: f64) -> Self {
        let size = size.max(0.0);
        let volume = match kind {
            SetKind::Ball => PI.powi(3) * size.powi(6) / 6.0,
            SetKind::Box => (2.0 * size).powi(6),
        };
        Self {
            kind,
            center,
            size,
            volume,
        }
    }

    pub fn ball(center: Vec3, radius: f64) -> Self {
        Self::new(SetKind::Ball, center, radius)
    }

    pub fn cube(center: Vec3, half_width: f64) -> Self {
        Self::new(SetKind::Box, center, half_width)
    }

    pub fn translate(&self, v: Vec3) -> Self {
        let c = [
            self.center[0] + v[0],
            self.center[1] + v[1],
            self.center[2] + v[2],
        ];
        Self::new(self.kind, c, self.size)
    }

    pub fn contains(&self, z: &Vec3) -> bool {
        let d = [
            z[0] - self.center[0],
            z[1] - self.center[1],
            z[2] - self.center[2],
        ];
        match self.kind {
            SetKind::Ball => d.iter().map(|c| c.norm_sqr()).sum::<f64>() < self.size * self.size,
            SetKind::Box => d
                .iter()
                .all(|c| c.re.abs() < self.size && c.im.abs() < self.size),
        }
    }

    /// Uniform point of the set.
    pub fn sample<R: Rng>(&self, rng: &mut R) -> Vec3 {
        let mut x = [0.0f64; 6];
        match self.kind {
            SetKind::Ball => {
                let mut norm = 0.0;
                while norm == 0.0 {
                    for v in x.iter_mut() {
                        *v = rng.sample(StandardNormal);
                    }
                    norm = x.iter().map(|v| v * v).sum::<f64>().sqrt();
                }
                let r = self.size * rng.gen::<f64>().powf(1.0 / 6.0) / norm;
                x.iter_mut().for_each(|v| *v *= r);
            }
            SetKind::Box => {
                for v in x.iter_mut() {
                    *v = self.size * (2.0 * rng.gen::<f64>() - 1.0);
                }
            }
        }
        [
            self.center[0] + C64::new(x[0], x[1]),
            self.center[1] + C64::new(x[2], x[3]),
            self.center[2] + C64::new(x[4], x[5]),
        ]
    }
}

/// Uniform point of the disk `|w| < radius`.
fn sample_disk<R: Rng>(rng: &mut R, radius: f64) -> C64 {
    let r = radius * rng.gen::<f64>().sqrt();
    C64::from_polar(r, 2.0 * PI * rng.gen::<f64>())
}

fn batch_rng(seed: u64, batch: usize) -> ChaCha8Rng {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(batch as u64);
    rng
}

/// Batch sizes summing to `n`.
fn batches(n: usize) -> Vec<(usize, usize)> {
    (0..n.div_ceil(MC_BATCH))
        .map(|b| (b, MC_BATCH.min(n - b * MC_BATCH)))
        .collect()
}

#[derive(Debug, Clone, Copy, Default)]
struct Moments {
    n: usize,
    sum: C64,
    sum_sq: f64,
}

impl Moments {
    fn push(&mut self, x: C64) {
        self.n += 1;
        self.sum += x;
        self.sum_sq += x.norm_sqr();
    }

    fn merge(self, o: Moments) -> Moments {
        Moments {
            n: self.n + o.n,
            sum: self.sum + o.sum,
            sum_sq: self.sum_sq + o.sum_sq,
        }
    }

    /// Mean and standard error of the mean.
    fn mean_stderr(&self) -> (C64, f64) {
        let n = self.n as f64;
        let mean = self.sum / n;
        if self.n < 2 {
            return (mean, 0.0);
        }
        let var = ((self.sum_sq - n * mean.norm_sqr()) / (n - 1.0)).max(0.0);
        (mean, (var / n).sqrt())
    }
}

fn sub(a: &Vec3, b: &Vec3) -> Vec3 {
    [a[0] - b[0], a[1] - b[1], a[2] - b[2]]
}

/// Monte Carlo estimate of `T f(z)` over the disk of radius `disk_radius`.
/// Returns the value and its standard error.
pub fn convolve<F>(
    curve: &CurveGamma,
    f: F,
    z: &Vec3,
    disk_radius: f64,
    n_mc: usize,
    seed: u64,
) -> (C64, f64)
where
    F: Fn(&Vec3) -> C64 + Sync + Send,
{
    let tt = curve.torsion_triple();
    let area = PI * disk_radius * disk_radius;
    if n_mc == 0 {
        return (C64::new(0.0, 0.0), 0.0);
    }
    let parts = par_map(&batches(n_mc), |&(b, len)| {
        let mut rng = batch_rng(seed, b);
        let mut m = Moments::default();
        for _ in 0..len {
            let w = sample_disk(&mut rng, disk_radius);
            let lam = tt.lambda(w);
            let v = if lam == 0.0 {
                C64::new(0.0, 0.0)
            } else {
                f(&sub(z, &curve.eval(w))) * lam
            };
            m.push(v);
        }
        m
    });
    let total = parts.into_iter().fold(Moments::default(), Moments::merge);
    let (mean, se) = total.mean_stderr();
    (mean * area, se * area)
}

/// Restricted weak-type quantities for a pair of sets.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct WeakTypeReport {
    /// `<T chi_E, chi_F>`
    pub pairing: f64,
    /// `pairing / |F|`
    pub alpha: f64,
    /// `pairing / |E|`
    pub beta: f64,
    /// `pairing / (|E|^(1/2) |F|^(2/3))`
    pub rwt_ratio: f64,
    /// `alpha^4 beta^2 / |E|`
    pub alpha4_beta2_over_e: f64,
    pub e_volume: f64,
    pub f_volume: f64,
    pub mc_samples: usize,
    pub mc_stderr: f64,
}

/// Estimates `int_F T chi_E(z) dz` by sampling `z` in `F` and `w` in the
/// disk jointly.
pub fn pairing(
    curve: &CurveGamma,
    e: &MeasurableSet,
    f: &MeasurableSet,
    disk_radius: f64,
    n_mc: usize,
    seed: u64,
) -> Result<WeakTypeReport> {
    if e.volume <= 0.0 || f.volume <= 0.0 {
        return Err(Error::ZeroVolume);
    }
    if n_mc == 0 || !(disk_radius > 0.0) {
        return Err(Error::InvalidInput(
            "pairing needs samples and a positive disk radius".into(),
        ));
    }
    let tt = curve.torsion_triple();
    let scale = f.volume * PI * disk_radius * disk_radius;
    let parts = par_map(&batches(n_mc), |&(b, len)| {
        let mut rng = batch_rng(seed, b);
        let mut m = Moments::default();
        for _ in 0..len {
            let z = f.sample(&mut rng);
            let w = sample_disk(&mut rng, disk_radius);
            let hit = e.contains(&sub(&z, &curve.eval(w)));
            m.push(C64::new(if hit { tt.lambda(w) } else { 0.0 }, 0.0));
        }
        m
    });
    let total = parts.into_iter().fold(Moments::default(), Moments::merge);
    let (mean, se) = total.mean_stderr();
    let p = mean.re * scale;
    let alpha = p / f.volume;
    let beta = p / e.volume;
    Ok(WeakTypeReport {
        pairing: p,
        alpha,
        beta,
        rwt_ratio: p / (e.volume.sqrt() * f.volume.powf(2.0 / 3.0)),
        alpha4_beta2_over_e: alpha.powi(4) * beta.powi(2) / e.volume,
        e_volume: e.volume,
        f_volume: f.volume,
        mc_samples: n_mc,
        mc_stderr: se * scale,
    })
}

/// The ball `|z| < (16 pi nu)^(-nu) x^nu` with `nu = 3 / (k' + 6)`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BallSpec {
    pub x: f64,
    pub k_prime: u32,
    pub nu: f64,
    pub radius: f64,
}

impl BallSpec {
    pub fn new(x: f64, k_prime: u32) -> Result<Self> {
        if !(x > 0.0) || !x.is_finite() {
            return Err(Error::InvalidInput(format!("x must be positive, got {x}")));
        }
        let nu = 3.0 / (k_prime as f64 + 6.0);
        let radius = (16.0 * PI * nu).powf(-nu) * x.powf(nu);
        Ok(Self {
            x,
            k_prime,
            nu,
            radius,
        })
    }
}

/// `int_{|z|<R} |z|^(k'/3) dz` by exact radial integration, paired with
/// the target `x / 8`.
pub fn ball_measure_check(spec: &BallSpec) -> (f64, f64) {
    let a = spec.k_prime as f64 / 3.0 + 2.0;
    let sigma = 2.0 * PI * spec.radius.powf(a) / a;
    (sigma, spec.x / 8.0)
}

/// Compactly supported test functions on C, all supported in `|w| <= 1`
/// before dilation.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "lowercase")]
pub enum Profile {
    Indicator,
    /// `(1 - |w|^2)^2`
    Bump,
    /// Bump times `e^{i k Re w}`.
    Modulated {
        frequency: f64,
    },
}

/// `w -> profile(s w)`, supported in `|w| <= 1/s`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TestFunction {
    pub profile: Profile,
    pub dilation: f64,
}

impl TestFunction {
    pub fn new(profile: Profile, dilation: f64) -> Self {
        Self { profile, dilation }
    }

    pub fn support_radius(&self) -> f64 {
        1.0 / self.dilation
    }

    pub fn eval(&self, w: C64) -> C64 {
        let u = w * self.dilation;
        let r2 = u.norm_sqr();
        if r2 > 1.0 {
            return C64::new(0.0, 0.0);
        }
        match self.profile {
            Profile::Indicator => C64::new(1.0, 0.0),
            Profile::Bump => C64::new((1.0 - r2).powi(2), 0.0),
            Profile::Modulated { frequency } => {
                C64::from_polar((1.0 - r2).powi(2), frequency * u.re)
            }
        }
    }

    pub fn label(&self) -> String {
        match self.profile {
            Profile::Indicator => "indicator".into(),
            Profile::Bump => "bump".into(),
            Profile::Modulated { frequency } => format!("modulated({frequency})"),
        }
    }
}

/// Real pairing of C^3 as R^6.
pub fn real_dot(z: &Vec3, g: &Vec3) -> f64 {
    (0..3).map(|j| z[j].re * g[j].re + z[j].im * g[j].im).sum()
}

/// Polar product rule on the support disk: Gauss–Legendre in the radius,
/// trapezoid in the angle. Caches `Gamma(w)` and `f(w) lambda(w) dA`.
#[derive(Debug, Clone)]
pub struct ExtensionRule {
    points: Vec<Vec3>,
    weights: Vec<C64>,
    abs_weights: Vec<f64>,
    pub n_radial: usize,
    pub n_angular: usize,
}

impl ExtensionRule {
    pub fn new<F: Fn(C64) -> C64>(
        tt: &TorsionTriple,
        curve: &CurveGamma,
        f: F,
        support_radius: f64,
        n_radial: usize,
    ) -> Self {
        let n_angular = 2 * n_radial.max(2);
        let gl = GaussLegendre::new(n_radial.max(1));
        let dth = 2.0 * PI / n_angular as f64;
        let mut points = Vec::with_capacity(gl.len() * n_angular);
        let mut weights = Vec::with_capacity(points.capacity());
        let mut abs_weights = Vec::with_capacity(points.capacity());
        for (&t, &wt) in gl.nodes.iter().zip(&gl.weights) {
            let r = support_radius * t;
            let dr = support_radius * wt * r * dth;
            for j in 0..n_angular {
                let w = C64::from_polar(r, j as f64 * dth);
                let v = f(w) * tt.lambda(w) * dr;
                if v == C64::new(0.0, 0.0) {
                    continue;
                }
                points.push(curve.eval(w));
                abs_weights.push(v.norm());
                weights.push(v);
            }
        }
        Self {
            points,
            weights,
            abs_weights,
            n_radial,
            n_angular,
        }
    }

    pub fn eval(&self, z: &Vec3) -> C64 {
        self.points
            .iter()
            .zip(&self.weights)
            .map(|(g, &v)| v * C64::from_polar(1.0, real_dot(z, g)))
            .sum()
    }

    /// `int |f| lambda` under the same rule.
    pub fn l1_norm(&self) -> f64 {
        self.abs_weights.iter().sum()
    }
}

/// Value of the extension operator with the `L1(lambda)` norm of `f`
/// computed by the same rule.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ExtensionValue {
    pub value: C64,
    pub l1_norm: f64,
    pub n_radial: usize,
}

/// Builds a rule for `f` that has converged at every probe point.
pub fn converged_rule<F: Fn(C64) -> C64 + Copy>(
    curve: &CurveGamma,
    f: F,
    support_radius: f64,
    probes: &[Vec3],
    n_quad: usize,
) -> Result<ExtensionRule> {
    if !(support_radius > 0.0) || n_quad == 0 {
        return Err(Error::InvalidInput(
            "extension needs a positive support radius and nodes".into(),
        ));
    }
    let tt = curve.torsion_triple();
    // enough nodes to resolve the largest phase z.Gamma(w) on the support
    let reach = (0..64)
        .map(|j| {
            let g = curve.eval(C64::from_polar(support_radius, j as f64 * PI / 32.0));
            g.iter().map(|c| c.norm_sqr()).sum::<f64>().sqrt()
        })
        .fold(0.0, f64::max);
    let zmax = probes
        .iter()
        .map(|z| z.iter().map(|c| c.norm_sqr()).sum::<f64>().sqrt())
        .fold(0.0, f64::max);
    let mut n = n_quad.max((0.5 * reach * zmax).ceil() as usize);
    let mut rule = ExtensionRule::new(&tt, curve, f, support_radius, n);
    let mut change = f64::INFINITY;
    for _ in 0..EXTENSION_MAX_DOUBLINGS {
        n *= 2;
        let finer = ExtensionRule::new(&tt, curve, f, support_radius, n);
        let scale = finer.l1_norm().max(f64::MIN_POSITIVE);
        change = probes
            .iter()
            .map(|z| (finer.eval(z) - rule.eval(z)).norm() / scale)
            .fold(0.0, f64::max);
        rule = finer;
        if change <= EXTENSION_TOL {
            return Ok(rule);
        }
    }
    Err(Error::NonConvergence { residual: change })
}

/// `E f(z)` for `f` supported in `|w| <= support_radius`.
pub fn extension<F: Fn(C64) -> C64 + Copy>(
    curve: &CurveGamma,
    f: F,
    support_radius: f64,
    z: &Vec3,
    n_quad: usize,
) -> Result<ExtensionValue> {
    let rule = converged_rule(curve, f, support_radius, std::slice::from_ref(z), n_quad)?;
    Ok(ExtensionValue {
        value: rule.eval(z),
        l1_norm: rule.l1_norm(),
        n_radial: rule.n_radial,
    })
}

mod inf_as_string {
    use serde::{Deserialize, Deserializer, Serializer};

    pub fn serialize<S: Serializer>(v: &f64, s: S) -> Result<S::Ok, S::Error> {
        if v.is_infinite() {
            s.serialize_str("inf")
        } else {
            s.serialize_f64(*v)
        }
    }

    #[derive(Deserialize)]
    #[serde(untagged)]
    enum NumOrStr {
        Num(f64),
        Str(String),
    }

    pub fn deserialize<'de, D: Deserializer<'de>>(d: D) -> Result<f64, D::Error> {
        match NumOrStr::deserialize(d)? {
            NumOrStr::Num(v) => Ok(v),
            NumOrStr::Str(s) if s == "inf" => Ok(f64::INFINITY),
            NumOrStr::Str(s) => Err(serde::de::Error::custom(format!("bad exponent {s:?}"))),
        }
    }
}

/// Exponent pair. `q = inf` serializes as the string `"inf"`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct PQPair {
    pub p: f64,
    #[serde(with = "inf_as_string")]
    pub q: f64,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub theta: Option<f64>,
}

impl PQPair {
    pub fn new(p: f64, q: f64) -> Result<Self> {
        if !(p >= 1.0) || !(q >= 1.0) || p.is_nan() || q.is_nan() {
            return Err(Error::InvalidInput(format!(
                "exponents must be >= 1, got ({p}, {q})"
            )));
        }
        Ok(Self { p, q, theta: None })
    }

    /// `(6 / (3 + theta), 6 / (2 + theta))` for `theta` in `(0, 1)`.
    pub fn from_theta(theta: f64) -> Result<Self> {
        if !(theta > 0.0 && theta < 1.0) {
            return Err(Error::InvalidInput(format!(
                "theta must lie in (0, 1), got {theta}"
            )));
        }
        Ok(Self {
            p: 6.0 / (3.0 + theta),
            q: 6.0 / (2.0 + theta),
            theta: Some(theta),
        })
    }

    /// Pair for the extension estimate with `p' = q / 6`, i.e.
    /// `p = q / (q - 6)`; requires `q > 7`.
    pub fn extension_dual(q: f64) -> Result<Self> {
        if !(q > 7.0) {
            return Err(Error::InvalidInput(format!(
                "the extension pair needs q > 7, got {q}"
            )));
        }
        if q.is_infinite() {
            return Self::new(1.0, q);
        }
        Self::new(q / (q - 6.0), q)
    }

    /// `L1 -> L_inf`.
    pub fn endpoint() -> Self {
        Self {
            p: 1.0,
            q: f64::INFINITY,
            theta: None,
        }
    }
}

/// Midpoint tensor grid over the cube `[-half_width, half_width]^6`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct GridSpec {
    pub half_width: f64,
    pub points_per_axis: usize,
}

impl GridSpec {
    pub fn cell_volume(&self) -> f64 {
        (2.0 * self.half_width / self.points_per_axis as f64).powi(6)
    }

    pub fn points(&self) -> Vec<Vec3> {
        let m = self.points_per_axis;
        let h = 2.0 * self.half_width / m as f64;
        let coord = |i: usize| -self.half_width + (i as f64 + 0.5) * h;
        let total = m.pow(6);
        (0..total)
            .map(|mut idx| {
                let mut x = [0.0; 6];
                for v in x.iter_mut() {
                    *v = coord(idx % m);
                    idx /= m;
                }
                [
                    C64::new(x[0], x[1]),
                    C64::new(x[2], x[3]),
                    C64::new(x[4], x[5]),
                ]
            })
            .collect()
    }

    /// Grid points of largest modulus, where the integrand oscillates most.
    fn probes(&self) -> Vec<Vec3> {
        let m = self.points_per_axis;
        let c = self.half_width - self.half_width / m as f64;
        vec![
            [C64::new(c, c), C64::new(c, c), C64::new(c, c)],
            [C64::new(c, -c), C64::new(-c, c), C64::new(c, c)],
        ]
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ScanRow {
    #[serde(flatten)]
    pub pq: PQPair,
    pub function: String,
    pub dilation: f64,
    /// Discretized `||E f||_{L^q(grid)}`.
    pub extension_norm: f64,
    /// `||f||_{L^p(lambda)}`.
    pub input_norm: f64,
    pub ratio: f64,
}

/// Spread of the ratio over the dilates of one profile at one pair.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DilateTrend {
    #[serde(flatten)]
    pub pq: PQPair,
    pub function: String,
    pub min_ratio: f64,
    pub max_ratio: f64,
    /// `max_ratio / min_ratio`
    pub flatness: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ScanTable {
    pub grid: GridSpec,
    pub rows: Vec<ScanRow>,
    pub trends: Vec<DilateTrend>,
}

/// `||E f||_{L^q(grid)} / ||f||_{L^p(lambda)}` for every pair and function.
/// Reports numbers only; nothing is asserted about boundedness.
pub fn norm_ratio_scan(
    curve: &CurveGamma,
    pqs: &[PQPair],
    family: &[TestFunction],
    grid: &GridSpec,
    n_quad: usize,
) -> Result<ScanTable> {
    if grid.points_per_axis == 0 || !(grid.half_width > 0.0) {
        return Err(Error::InvalidInput(
            "grid needs points and a positive half-width".into(),
        ));
    }
    let tt = curve.torsion_triple();
    let pts = grid.points();
    let cell = grid.cell_volume();
    let mut rows = Vec::new();
    for tf in family {
        let func = |w: C64| tf.eval(w);
        let rule = converged_rule(curve, func, tf.support_radius(), &grid.probes(), n_quad)?;
        let abs_vals: Vec<f64> = par_map(&pts, |z| rule.eval(z).norm());
        // |f|^p lambda under the same radial/angular nodes
        let p_rule = |p: f64| {
            let g = move |w: C64| C64::new(tf.eval(w).norm().powf(p), 0.0);
            ExtensionRule::new(&tt, curve, g, tf.support_radius(), rule.n_radial)
                .l1_norm()
                .powf(1.0 / p)
        };
        for pq in pqs {
            let num = if pq.q.is_infinite() {
                abs_vals.iter().copied().fold(0.0, f64::max)
            } else {
                (abs_vals.iter().map(|v| v.powf(pq.q)).sum::<f64>() * cell).powf(1.0 / pq.q)
            };
            let den = p_rule(pq.p);
            rows.push(ScanRow {
                pq: *pq,
                function: tf.label(),
                dilation: tf.dilation,
                extension_norm: num,
                input_norm: den,
                ratio: if den > 0.0 { num / den } else { f64::NAN },
            });
        }
    }
    let trends = dilate_trends(&rows);
    Ok(ScanTable {
        grid: *grid,
        rows,
        trends,
    })
}

fn dilate_trends(rows: &[ScanRow]) -> Vec<DilateTrend> {
    let mut out: Vec<DilateTrend> = Vec::new();
    for r in rows {
        match out
            .iter_mut()
            .find(|t| t.pq == r.pq && t.function == r.function)
        {
            Some(t) => {
                t.min_ratio = t.min_ratio.min(r.ratio);
                t.max_ratio = t.max_ratio.max(r.ratio);
            }
            None => out.push(DilateTrend {
                pq: r.pq,
                function: r.function.clone(),
                min_ratio: r.ratio,
                max_ratio: r.ratio,
                flatness: 1.0,
            }),
        }
    }
    for t in &mut out {
        t.flatness = t.max_ratio / t.min_ratio;
    }
    out
}
