//! Splitting the plane into convex cells on which each of L1, L2, L3 behaves
//! like `c |z - b|^k`, and the T00/T01/T10/T11 classification built on top.
//!
//! Two elementary decompositions are chained:
//!
//! * `d1_decompose`: Voronoi cells of the roots, cut into angular sectors of
//!   aperture `eps` about each root, then into annular layers at half the
//!   distances to the other roots.
//! * `d2_decompose`: annuli about a fixed center, either dyadic (around a
//!   cluster of root moduli) or gaps between clusters, where the polynomial is
//!   comparable to a monomial in `|z - b|`.

use std::f64::consts::{PI, TAU};

use serde::{Deserialize, Serialize};

use crate::curve::{AffineMap3, CurveGamma, Mat3, TorsionTriple};
use crate::error::{Error, Result};
use crate::geometry::{voronoi_cell, ConvexPolygon};
use crate::jacobian::arc_cover;
use crate::poly::{ComplexPolynomial, Root, C64, DEFAULT_CLUSTER_TOL};

/// Radial thickening applied when annular sectors are replaced by polygons.
pub const THICKENING_B: f64 = 1.1;

/// Widest sector the tangent-chord convexification accepts.
pub const MAX_APERTURE: f64 = PI / 8.0;

/// Schema version of serialized reports.
pub const REPORT_SCHEMA_VERSION: u32 = 1;

/// Sides of the polygon standing in for the working disk.
const DISK_SIDES: usize = 64;

/// Boundary samples per edge when measuring apertures during refinement.
const APERTURE_SAMPLES_PER_EDGE: usize = 32;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Region {
    pub center_b: C64,
    pub theta_range: (f64, f64),
    /// `(r_lo, r_hi)`; `None` stands for an unbounded outer radius.
    pub radial_range: (f64, Option<f64>),
    pub polygon: ConvexPolygon,
    pub parent_voronoi: usize,
    /// Set when an unbounded cell was cut at the working radius.
    pub truncated_at: Option<f64>,
}

impl Region {
    /// The disk `|z| <= radius` as a single undivided region about 0.
    pub fn whole_plane(radius: f64) -> Self {
        let zero = C64::new(0.0, 0.0);
        Self {
            center_b: zero,
            theta_range: (0.0, TAU),
            radial_range: (0.0, None),
            polygon: ConvexPolygon::circumscribed(zero, radius, DISK_SIDES),
            parent_voronoi: 0,
            truncated_at: Some(radius),
        }
    }

    pub fn aperture(&self) -> f64 {
        self.theta_range.1 - self.theta_range.0
    }

    fn is_full_turn(&self) -> bool {
        self.aperture() > PI
    }

    fn with_polygon(&self, polygon: ConvexPolygon) -> Self {
        Self {
            polygon,
            ..self.clone()
        }
    }
}

/// Polygon replacing the annular sector `r_lo <= |z - b| <= r_hi`,
/// `t0 <= arg(z - b) <= t1`: the inner arc becomes the chord between its
/// endpoints and the outer arc the tangent at the mid angle.
fn sector_polygon(b: C64, t0: f64, t1: f64, r_lo: f64, r_hi: f64) -> ConvexPolygon {
    let half = 0.5 * (t1 - t0);
    let outer = r_hi / half.cos();
    let (e0, e1) = (C64::from_polar(1.0, t0), C64::from_polar(1.0, t1));
    let mut v = Vec::with_capacity(4);
    if r_lo > 0.0 {
        v.push(b + e0 * r_lo);
    } else {
        v.push(b);
    }
    v.push(b + e0 * outer);
    v.push(b + e1 * outer);
    if r_lo > 0.0 {
        v.push(b + e1 * r_lo);
    }
    ConvexPolygon::new(v)
}

/// Convex polygon containing the annular sector and contained in its
/// `B`-thickening. An unbounded sector keeps its radial range symbolic and
/// gets an empty polygon.
pub fn convexify(
    center: C64,
    theta_range: (f64, f64),
    radial_range: (f64, Option<f64>),
) -> Result<Region> {
    let aperture = theta_range.1 - theta_range.0;
    if !(aperture > 0.0) || aperture > MAX_APERTURE * (1.0 + 1e-12) {
        return Err(Error::ApertureTooWide { aperture });
    }
    let (r_lo, r_hi) = radial_range;
    if r_lo < 0.0 || r_hi.is_some_and(|r| !(r > r_lo)) {
        return Err(Error::InvalidInput(format!(
            "bad radial range ({r_lo}, {r_hi:?})"
        )));
    }
    let polygon = match r_hi {
        Some(r) => sector_polygon(center, theta_range.0, theta_range.1, r_lo, r),
        None => ConvexPolygon::default(),
    };
    Ok(Region {
        center_b: center,
        theta_range,
        radial_range,
        polygon,
        parent_voronoi: 0,
        truncated_at: None,
    })
}

/// Roots, leading modulus and degree of one polynomial, computed once.
#[derive(Debug, Clone)]
pub struct PolyInfo {
    pub poly: ComplexPolynomial,
    pub roots: Vec<Root>,
    pub lead_abs: f64,
    pub degree: usize,
}

impl PolyInfo {
    pub fn new(poly: &ComplexPolynomial) -> Result<Self> {
        let degree = poly.degree_or_zero();
        let roots = if degree == 0 {
            Vec::new()
        } else {
            poly.roots(DEFAULT_CLUSTER_TOL)?.roots
        };
        Ok(Self {
            poly: poly.clone(),
            roots,
            lead_abs: poly.leading().norm(),
            degree,
        })
    }

    pub fn is_constant(&self) -> bool {
        self.degree == 0
    }

    fn max_root_modulus(&self) -> f64 {
        self.roots
            .iter()
            .map(|r| r.location.norm())
            .fold(0.0, f64::max)
    }
}

fn sector_count(eps: f64) -> Result<usize> {
    let n = TAU / eps;
    let r = n.round();
    if !(eps > 0.0) || r < 1.0 || (n - r).abs() > 1e-9 * r {
        return Err(Error::EpsNotDivisor { eps });
    }
    Ok(r as usize)
}

/// Default sector aperture: `2 pi / ceil(28 (d + 1))` with `d` the largest
/// degree among L1, L2, L3.
pub fn default_epsilon(tt: &TorsionTriple) -> f64 {
    let d = (0..3)
        .map(|i| tt.get(i).degree_or_zero())
        .max()
        .unwrap_or(0);
    TAU / (28 * (d + 1)) as f64
}

/// Ten times the largest root modulus of L1, L2, L3, and at least 10.
pub fn default_working_radius(tt: &TorsionTriple) -> Result<f64> {
    let mut m: f64 = 1.0;
    for i in 0..3 {
        m = m.max(PolyInfo::new(tt.get(i))?.max_root_modulus());
    }
    Ok(10.0 * m)
}

/// Sector indices about `center` that can meet `poly`.
fn sector_indices(poly: &ConvexPolygon, center: C64, eps: f64, n: usize) -> Vec<usize> {
    let scale = poly.diameter().max(1e-300);
    if poly.distance_to(center) <= 1e-12 * scale {
        return (0..n).collect();
    }
    let dir = poly.centroid() - center;
    let base = dir.arg();
    let (mut lo, mut hi) = (0.0f64, 0.0f64);
    for v in poly.vertices() {
        let a = ((v - center) / dir).arg();
        lo = lo.min(a);
        hi = hi.max(a);
    }
    let first = ((base + lo) / eps).floor() as i64;
    let last = ((base + hi) / eps).floor() as i64;
    (first..=last)
        .map(|k| k.rem_euclid(n as i64) as usize)
        .collect()
}

fn is_negligible(poly: &ConvexPolygon, scale: f64) -> bool {
    poly.is_empty() || poly.area() <= 1e-14 * scale * scale
}

/// One cell of D1 with its center, exponent and constant.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct D1Piece {
    pub region: Region,
    pub center: C64,
    pub exponent: usize,
    pub constant: f64,
}

/// D1 on `domain`: Voronoi cells of the roots of `q`, sectors of aperture
/// `eps` about each root, then layers by distance to the other roots. A
/// constant `q` leaves the domain whole.
pub fn d1_decompose(q: &ComplexPolynomial, domain: &Region, eps: f64) -> Result<Vec<D1Piece>> {
    if q.is_zero() {
        return Err(Error::DegreeZero);
    }
    d1_with(&PolyInfo::new(q)?, domain, eps)
}

fn d1_with(info: &PolyInfo, domain: &Region, eps: f64) -> Result<Vec<D1Piece>> {
    let n = sector_count(eps)?;
    if info.is_constant() {
        return Ok(vec![D1Piece {
            region: domain.clone(),
            center: domain.center_b,
            exponent: 0,
            constant: info.lead_abs,
        }]);
    }
    let sites: Vec<C64> = info.roots.iter().map(|r| r.location).collect();
    let scale = domain.polygon.diameter();
    let mut out = Vec::new();
    for (j, &eta) in sites.iter().enumerate() {
        let cell = voronoi_cell(&sites, j, &domain.polygon);
        if is_negligible(&cell, scale) {
            continue;
        }
        let layers = d1_layers(info, j);
        let d_min = cell.distance_to(eta);
        let d_max = cell.max_distance_to(eta);
        for s in sector_indices(&cell, eta, eps, n) {
            let (t0, t1) = (s as f64 * eps, (s + 1) as f64 * eps);
            for layer in &layers {
                if layer.r_lo >= d_max || layer.r_hi.is_some_and(|r| r * 1.1 < d_min) {
                    continue;
                }
                let outer = layer
                    .r_hi
                    .map_or(d_max * 1.01 + 1e-12, |r| r.min(d_max * 1.01 + 1e-12));
                if outer <= layer.r_lo {
                    continue;
                }
                let poly = sector_polygon(eta, t0, t1, layer.r_lo, outer).intersect(&cell);
                if is_negligible(&poly, scale) {
                    continue;
                }
                let truncated = layer.r_hi.is_none() || layer.r_hi.is_some_and(|r| r > outer);
                out.push(D1Piece {
                    region: Region {
                        center_b: eta,
                        theta_range: (t0, t1),
                        radial_range: (layer.r_lo, layer.r_hi),
                        polygon: poly,
                        parent_voronoi: j,
                        truncated_at: if truncated { domain.truncated_at } else { None },
                    },
                    center: eta,
                    exponent: layer.exponent,
                    constant: layer.constant,
                });
            }
        }
    }
    Ok(out)
}

struct Layer {
    r_lo: f64,
    r_hi: Option<f64>,
    exponent: usize,
    constant: f64,
}

/// Layers about root `j`: the other roots sorted by distance `d_i`, with
/// boundaries at `d_i / 2`. Layer `i` absorbs the multiplicities of the
/// nearest `i` roots; the rest contribute `d^alpha` to the constant.
fn d1_layers(info: &PolyInfo, j: usize) -> Vec<Layer> {
    let eta = info.roots[j].location;
    let mut others: Vec<(f64, usize)> = info
        .roots
        .iter()
        .enumerate()
        .filter(|&(i, _)| i != j)
        .map(|(_, r)| ((r.location - eta).norm(), r.multiplicity))
        .collect();
    others.sort_by(|a, b| a.0.total_cmp(&b.0));
    let far_product = |from: usize| -> f64 {
        others[from..]
            .iter()
            .map(|&(d, m)| d.powi(m as i32))
            .product::<f64>()
    };
    let mut layers = Vec::new();
    let mut r_lo = 0.0;
    let mut k = info.roots[j].multiplicity;
    for i in 0..=others.len() {
        let r_hi = others.get(i).map(|&(d, _)| 0.5 * d);
        if r_hi.is_none_or(|r| r > r_lo) {
            layers.push(Layer {
                r_lo,
                r_hi,
                exponent: k,
                constant: info.lead_abs * far_product(i),
            });
        }
        if let Some(&(d, m)) = others.get(i) {
            r_lo = 0.5 * d;
            k += m;
        }
    }
    layers
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum CellKind {
    Dyadic,
    Gap,
}

/// One cell of D2.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct D2Piece {
    pub region: Region,
    pub kind: CellKind,
    /// For gaps, `|Q(z)| ~ constant * |z - b|^exponent`. For dyadic cells,
    /// the number of roots (with multiplicity) inside the outer radius.
    pub exponent: usize,
    /// For gaps the comparability constant; for dyadic cells the geometric
    /// mean of the cell's radii.
    pub constant: f64,
}

#[derive(Debug, Clone, Copy, PartialEq)]
struct RadialCell {
    kind: CellKind,
    r_lo: f64,
    r_hi: Option<f64>,
    exponent: usize,
    constant: f64,
}

/// Ratio separating consecutive clusters of root moduli. With `A^2 > 2^d`
/// every gap between clusters carries a nonzero Taylor coefficient.
pub fn dyadic_factor(degree: usize) -> f64 {
    2f64.powf(degree as f64 / 2.0 + 1.0)
}

/// Radial structure of D2 about `b`. Root moduli `|z_l - b|` within a ratio
/// `A^2` of each other are merged into one dyadic annulus
/// `[min / A, A max]`; the annuli between them are gaps.
fn radial_cells(info: &PolyInfo, b: C64) -> Vec<RadialCell> {
    if info.is_constant() {
        return vec![RadialCell {
            kind: CellKind::Gap,
            r_lo: 0.0,
            r_hi: None,
            exponent: 0,
            constant: info.lead_abs,
        }];
    }
    let a = dyadic_factor(info.degree);
    let scale = 1.0 + b.norm() + info.max_root_modulus();
    let mut moduli: Vec<(f64, usize)> = info
        .roots
        .iter()
        .map(|r| ((r.location - b).norm(), r.multiplicity))
        .collect();
    moduli.sort_by(|x, y| x.0.total_cmp(&y.0));
    let at_center: usize = moduli
        .iter()
        .filter(|m| m.0 <= 1e-9 * scale)
        .map(|m| m.1)
        .sum();
    let rest: Vec<(f64, usize)> = moduli.into_iter().filter(|m| m.0 > 1e-9 * scale).collect();

    let mut clusters: Vec<(f64, f64, usize)> = Vec::new();
    for &(m, mult) in &rest {
        match clusters.last_mut() {
            Some(c) if m < a * a * c.1 => {
                c.1 = m;
                c.2 += mult;
            }
            _ => clusters.push((m, m, mult)),
        }
    }

    let shifted = info.poly.shift(b);
    let coeff_floor = 1e-12 * shifted.max_coeff_modulus();
    let outer_constant = |inside: usize| -> f64 {
        let mut seen = 0;
        let mut c = info.lead_abs;
        for &(m, mult) in &rest {
            seen += mult;
            if seen > inside - at_center {
                c *= m.powi(mult as i32);
            }
        }
        c
    };
    let mut cells = Vec::new();
    let mut inside = at_center;
    let mut r_lo = 0.0;
    for &(mn, mx, mult) in &clusters {
        let gap_hi = mn / a;
        if gap_hi > r_lo {
            cells.push(RadialCell {
                kind: CellKind::Gap,
                r_lo,
                r_hi: Some(gap_hi),
                exponent: inside,
                constant: outer_constant(inside),
            });
        }
        let lo = gap_hi.max(r_lo);
        let hi = a * mx;
        cells.push(RadialCell {
            kind: CellKind::Dyadic,
            r_lo: lo,
            r_hi: Some(hi),
            exponent: inside + mult,
            constant: (mn * mx).sqrt(),
        });
        inside += mult;
        r_lo = hi;
    }
    cells.push(RadialCell {
        kind: CellKind::Gap,
        r_lo,
        r_hi: None,
        exponent: inside,
        constant: info.lead_abs,
    });
    // A vanishing Taylor coefficient cannot carry a gap; fold any such cell
    // into the dyadic family instead of dropping it.
    for c in &mut cells {
        if c.kind == CellKind::Gap && shifted.coeff(c.exponent).norm() <= coeff_floor {
            c.kind = CellKind::Dyadic;
        }
    }
    cells
}

/// D2 on `domain` with respect to `q` and center `b`. A domain spanning the
/// full turn is first cut into sectors of aperture pi/8.
pub fn d2_decompose(q: &ComplexPolynomial, b: C64, domain: &Region) -> Result<Vec<D2Piece>> {
    if q.is_zero() {
        return Err(Error::DegreeZero);
    }
    d2_with(&PolyInfo::new(q)?, b, domain, MAX_APERTURE)
}

fn d2_with(info: &PolyInfo, b: C64, domain: &Region, eps: f64) -> Result<Vec<D2Piece>> {
    let cells = radial_cells(info, b);
    let sectors: Vec<(f64, f64)> = if domain.is_full_turn() || domain.center_b != b {
        let n = sector_count(eps)?;
        sector_indices(&domain.polygon, b, eps, n)
            .into_iter()
            .map(|s| (s as f64 * eps, (s + 1) as f64 * eps))
            .collect()
    } else {
        vec![domain.theta_range]
    };
    let scale = domain.polygon.diameter();
    let d_min = domain.polygon.distance_to(b);
    let d_max = domain.polygon.max_distance_to(b);
    let mut out = Vec::new();
    for &(t0, t1) in &sectors {
        for cell in &cells {
            if cell.r_lo >= d_max || cell.r_hi.is_some_and(|r| r * 1.1 < d_min) {
                continue;
            }
            let outer = cell
                .r_hi
                .map_or(d_max * 1.01 + 1e-12, |r| r.min(d_max * 1.01 + 1e-12));
            if outer <= cell.r_lo {
                continue;
            }
            let poly = sector_polygon(b, t0, t1, cell.r_lo, outer).intersect(&domain.polygon);
            if is_negligible(&poly, scale) {
                continue;
            }
            let same_center = domain.center_b == b && !domain.is_full_turn();
            let radial = if same_center {
                let lo = cell.r_lo.max(domain.radial_range.0);
                let hi = match (cell.r_hi, domain.radial_range.1) {
                    (Some(x), Some(y)) => Some(x.min(y)),
                    (x, y) => x.or(y),
                };
                (lo, hi)
            } else {
                (cell.r_lo, cell.r_hi)
            };
            out.push(D2Piece {
                region: Region {
                    center_b: b,
                    theta_range: (t0, t1),
                    radial_range: radial,
                    polygon: poly,
                    parent_voronoi: domain.parent_voronoi,
                    truncated_at: if radial.1.is_none() {
                        domain.truncated_at
                    } else {
                        None
                    },
                },
                kind: cell.kind,
                exponent: cell.exponent,
                constant: cell.constant,
            });
        }
    }
    Ok(out)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum RegionType {
    T00,
    T01,
    T10,
    T11,
}

/// Exponents of a classified region and the derived triple governing
/// `L1`, `L2 / L1^2` and `L1 L3 / L2^2`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct SigmaExponents {
    pub region_type: RegionType,
    pub k: usize,
    pub k_sub: usize,
    pub k_mid: usize,
    pub sigma: [i64; 3],
}

impl SigmaExponents {
    pub fn new(region_type: RegionType, k: usize, k_sub: usize, k_mid: usize) -> Self {
        Self {
            region_type,
            k,
            k_sub,
            k_mid,
            sigma: table_sigma(region_type, k, k_sub, k_mid),
        }
    }

    /// The stored triple agrees with the table.
    pub fn is_consistent(&self) -> bool {
        self.sigma == table_sigma(self.region_type, self.k, self.k_sub, self.k_mid)
    }

    /// `sigma_2 + sigma_3 / 2`
    pub fn band_value(&self) -> f64 {
        self.sigma[1] as f64 + 0.5 * self.sigma[2] as f64
    }
}

pub fn table_sigma(region_type: RegionType, k: usize, k_sub: usize, k_mid: usize) -> [i64; 3] {
    let (k, ks, km) = (k as i64, k_sub as i64, k_mid as i64);
    match region_type {
        RegionType::T00 => [ks, km - 2 * ks, k + ks - 2 * km],
        RegionType::T01 => [0, km, -2 * km],
        RegionType::T10 => [ks, km - 2 * ks, ks - 2 * km],
        RegionType::T11 => [0, km, -2 * km],
    }
}

/// `sigma_3 != -1` and `sigma_2 + sigma_3 / 2` outside `[-2, 0)`.
pub fn admissible(sig: &SigmaExponents) -> bool {
    let band = sig.band_value();
    sig.sigma[2] != -1 && !(-2.0..0.0).contains(&band)
}

/// `|L(z)| ~ constant * |z - center|^exponent` on a region, with `c_star`
/// bounding the ratio from both sides over the region's polygon.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Comparability {
    pub center: C64,
    pub exponent: usize,
    pub constant: f64,
    pub c_star: f64,
}

impl Comparability {
    pub fn ratio(&self, value_abs: f64, z: C64) -> f64 {
        value_abs / (self.constant * (z - self.center).norm().powi(self.exponent as i32))
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ClassifiedRegion {
    pub id: usize,
    pub region: Region,
    pub sigma: SigmaExponents,
    /// For L1, L2, L3 in that order.
    pub comparability: [Comparability; 3],
    pub admissible: bool,
    /// Angular spread of L1, L2, L3 over the polygon boundary.
    pub apertures: [f64; 3],
    pub aperture_ok: bool,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RetryRecord {
    pub attempt: usize,
    pub map: AffineMap3,
    pub inadmissible_regions: usize,
    pub accepted: bool,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DecompositionReport {
    pub schema_version: u32,
    pub epsilon_used: f64,
    pub thickening_b: f64,
    pub working_radius: f64,
    pub refine_depth: usize,
    pub region_budget: usize,
    pub regions: Vec<ClassifiedRegion>,
    /// Ids of regions whose aperture check failed at the refinement cap.
    pub flagged_regions: Vec<usize>,
    pub excluded_exponents_log: Vec<RetryRecord>,
}

impl DecompositionReport {
    pub fn inadmissible_count(&self) -> usize {
        self.regions.iter().filter(|r| !r.admissible).count()
    }

    /// Number of `points` lying in no region polygon (with slack `tol`).
    pub fn uncovered(&self, points: &[C64], tol: f64) -> usize {
        points
            .iter()
            .filter(|&&z| {
                !self
                    .regions
                    .iter()
                    .any(|r| r.region.polygon.contains(z, tol))
            })
            .count()
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct DecompositionConfig {
    /// Sector aperture; `None` picks `default_epsilon`.
    pub eps: Option<f64>,
    /// Radius of the disk covered; `None` picks `default_working_radius`.
    pub working_radius: Option<f64>,
    /// Bisection depth allowed when forcing sector containment.
    pub refine_depth: usize,
    /// Refinement stops once every aperture is below this fraction of its
    /// budget `(deg + 1) eps`.
    pub aperture_margin: f64,
    pub region_budget: usize,
}

impl Default for DecompositionConfig {
    fn default() -> Self {
        Self {
            eps: None,
            working_radius: None,
            refine_depth: 12,
            aperture_margin: 0.9,
            region_budget: 200_000,
        }
    }
}

/// Runs the full classification with default settings.
pub fn classify_regions(tt: &TorsionTriple, eps: Option<f64>) -> Result<DecompositionReport> {
    classify_with(
        tt,
        &DecompositionConfig {
            eps,
            ..Default::default()
        },
    )
}

/// A region before refinement: its exponents and the three comparability
/// records (without `c_star`).
struct Draft {
    region: Region,
    sigma: SigmaExponents,
    records: [(C64, usize, f64); 3],
}

pub fn classify_with(tt: &TorsionTriple, cfg: &DecompositionConfig) -> Result<DecompositionReport> {
    let scale = (0..3)
        .map(|i| tt.get(i).max_coeff_modulus())
        .fold(0.0, f64::max);
    if tt.l3.is_zero() || tt.is_degenerate(scale) {
        return Err(Error::DegenerateTorsion);
    }
    let eps = cfg.eps.unwrap_or_else(|| default_epsilon(tt));
    sector_count(eps)?;
    if eps > MAX_APERTURE * (1.0 + 1e-12) {
        return Err(Error::ApertureTooWide { aperture: eps });
    }
    let infos = [
        PolyInfo::new(&tt.l1)?,
        PolyInfo::new(&tt.l2)?,
        PolyInfo::new(&tt.l3)?,
    ];
    let radius = match cfg.working_radius {
        Some(r) => r,
        None => default_working_radius(tt)?,
    };
    let top = Region::whole_plane(radius);
    let l3_pieces = d1_with(&infos[2], &top, eps)?;

    let drafts: Vec<Result<Vec<Draft>>> =
        crate::par_map(&l3_pieces, |p| classify_piece(&infos, p, eps));
    let mut all = Vec::new();
    for d in drafts {
        all.extend(d?);
    }
    let refined: Vec<Vec<ClassifiedRegion>> =
        crate::par_map(&all, |d| refine(&infos, d, eps, cfg, cfg.refine_depth));
    let mut regions: Vec<ClassifiedRegion> = refined.into_iter().flatten().collect();
    for (i, r) in regions.iter_mut().enumerate() {
        r.id = i;
    }
    let flagged = regions
        .iter()
        .filter(|r| !r.aperture_ok)
        .map(|r| r.id)
        .collect();
    Ok(DecompositionReport {
        schema_version: REPORT_SCHEMA_VERSION,
        epsilon_used: eps,
        thickening_b: THICKENING_B,
        working_radius: radius,
        refine_depth: cfg.refine_depth,
        region_budget: cfg.region_budget,
        regions,
        flagged_regions: flagged,
        excluded_exponents_log: Vec::new(),
    })
}

/// D2 cells of `info` about `b`; a constant polynomial counts as dyadic
/// when every exponent carried so far is zero, and as a gap with exponent 0
/// otherwise.
fn d2_stage(
    info: &PolyInfo,
    b: C64,
    domain: &Region,
    eps: f64,
    running_zero: bool,
) -> Result<Vec<D2Piece>> {
    if info.is_constant() {
        return Ok(vec![D2Piece {
            region: domain.clone(),
            kind: if running_zero {
                CellKind::Dyadic
            } else {
                CellKind::Gap
            },
            exponent: 0,
            constant: info.lead_abs,
        }]);
    }
    d2_with(info, b, domain, eps)
}

fn classify_piece(infos: &[PolyInfo; 3], p3: &D1Piece, eps: f64) -> Result<Vec<Draft>> {
    let [l1, l2, _] = infos;
    let rec3 = (p3.center, p3.exponent, p3.constant);
    let k = p3.exponent;
    let b = p3.center;
    let mut out = Vec::new();
    for c1 in d2_stage(l1, b, &p3.region, eps, k == 0)? {
        match c1.kind {
            CellKind::Gap => {
                let k0 = c1.exponent;
                let rec1 = (b, k0, c1.constant);
                for c2 in d2_stage(l2, b, &c1.region, eps, k == 0 && k0 == 0)? {
                    match c2.kind {
                        CellKind::Gap => out.push(Draft {
                            region: c2.region,
                            sigma: SigmaExponents::new(RegionType::T00, k, k0, c2.exponent),
                            records: [rec1, (b, c2.exponent, c2.constant), rec3],
                        }),
                        CellKind::Dyadic => {
                            for p in d1_with(l2, &c2.region, eps)? {
                                out.push(Draft {
                                    region: p.region,
                                    sigma: SigmaExponents::new(RegionType::T01, k, k0, p.exponent),
                                    records: [rec1, (p.center, p.exponent, p.constant), rec3],
                                });
                            }
                        }
                    }
                }
            }
            CellKind::Dyadic => {
                for p1 in d1_with(l1, &c1.region, eps)? {
                    let k1 = p1.exponent;
                    let rec1 = (p1.center, k1, p1.constant);
                    for c2 in d2_stage(l2, p1.center, &p1.region, eps, k1 == 0)? {
                        match c2.kind {
                            CellKind::Gap => out.push(Draft {
                                region: c2.region,
                                sigma: SigmaExponents::new(RegionType::T10, k, k1, c2.exponent),
                                records: [rec1, (p1.center, c2.exponent, c2.constant), rec3],
                            }),
                            CellKind::Dyadic => {
                                for p in d1_with(l2, &c2.region, eps)? {
                                    out.push(Draft {
                                        region: p.region,
                                        sigma: SigmaExponents::new(
                                            RegionType::T11,
                                            k,
                                            k1,
                                            p.exponent,
                                        ),
                                        records: [rec1, (p.center, p.exponent, p.constant), rec3],
                                    });
                                }
                            }
                        }
                    }
                }
            }
        }
    }
    Ok(out)
}

/// Angular spread of `L` over `points`. Points where `L` is zero up to
/// rounding carry no usable argument and are skipped.
pub fn aperture_of(poly: &ComplexPolynomial, points: &[C64]) -> f64 {
    if poly.degree_or_zero() == 0 {
        return 0.0;
    }
    let args: Vec<f64> = points
        .iter()
        .filter_map(|&z| {
            let v = poly.eval(z);
            (v.norm() > 1e-12 * poly.eval_abs(z)).then(|| v.arg())
        })
        .collect();
    arc_cover(&args).map_or(0.0, |a| a.0)
}

fn boundary_aperture(info: &PolyInfo, poly: &ConvexPolygon) -> f64 {
    aperture_of(&info.poly, &poly.boundary_points(APERTURE_SAMPLES_PER_EDGE))
}

fn refine(
    infos: &[PolyInfo; 3],
    d: &Draft,
    eps: f64,
    cfg: &DecompositionConfig,
    depth: usize,
) -> Vec<ClassifiedRegion> {
    let poly = &d.region.polygon;
    let apertures: [f64; 3] = std::array::from_fn(|i| boundary_aperture(&infos[i], poly));
    let budgets: [f64; 3] = std::array::from_fn(|i| (infos[i].degree + 1) as f64 * eps);
    let tight = (0..3).all(|i| apertures[i] <= cfg.aperture_margin * budgets[i]);
    if !tight && depth > 0 {
        let (a, b) = poly.bisect();
        let scale = poly.diameter();
        let mut out = Vec::new();
        for half in [a, b] {
            if is_negligible(&half, scale) {
                continue;
            }
            let sub = Draft {
                region: d.region.with_polygon(half),
                sigma: d.sigma,
                records: d.records,
            };
            out.extend(refine(infos, &sub, eps, cfg, depth - 1));
        }
        return out;
    }
    let comparability: [Comparability; 3] = std::array::from_fn(|i| {
        let (center, exponent, constant) = d.records[i];
        let c_star = c_star(&infos[i], center, exponent, constant, poly);
        Comparability {
            center,
            exponent,
            constant,
            c_star,
        }
    });
    vec![ClassifiedRegion {
        id: 0,
        region: d.region.clone(),
        sigma: d.sigma,
        comparability,
        admissible: admissible(&d.sigma),
        apertures,
        aperture_ok: (0..3).all(|i| apertures[i] <= budgets[i]),
    }]
}

/// Bound `C` with `1/C <= |L(z)| / (c |z - b|^k) <= C` on the polygon,
/// from distances of the polygon to `b` and to each root. The `k` roots
/// nearest to `b` are compared against `|z - b|`; the others enter through
/// `|z - r|` directly, since `c` already carries their distance to `b`.
pub fn c_star(info: &PolyInfo, b: C64, k: usize, c: f64, poly: &ConvexPolygon) -> f64 {
    let mut lo = (info.lead_abs / c).ln();
    let mut hi = lo;
    if info.is_constant() {
        return lo.abs().exp();
    }
    let mut roots: Vec<(f64, &Root)> = info
        .roots
        .iter()
        .map(|r| ((r.location - b).norm(), r))
        .collect();
    roots.sort_by(|x, y| x.0.total_cmp(&y.0));
    let scale = 1.0 + b.norm();
    let (db_min, db_max) = (poly.distance_to(b), poly.max_distance_to(b));
    let mut inner_left = k;
    for (delta, r) in roots {
        let m = r.multiplicity as f64;
        let (dz_min, dz_max) = (
            poly.distance_to(r.location),
            poly.max_distance_to(r.location),
        );
        let (f_lo, f_hi) = if inner_left >= r.multiplicity {
            inner_left -= r.multiplicity;
            if delta <= 1e-12 * scale {
                (1.0, 1.0)
            } else if db_min > 0.0 {
                let up = (1.0 + delta / db_min).min(dz_max / db_min);
                let down = (dz_min / db_max).max(1.0 - delta / db_min);
                (down.max(0.0), up)
            } else {
                (0.0, f64::INFINITY)
            }
        } else {
            if inner_left != 0 {
                return f64::INFINITY;
            }
            (dz_min, dz_max)
        };
        lo += m * f_lo.ln();
        hi += m * f_hi.ln();
    }
    if inner_left != 0 {
        return f64::INFINITY;
    }
    hi.max(-lo).exp()
}

/// Affine maps tried by `affine_retry`, in order: coordinate permutations,
/// then each permutation followed by a shear `I + delta E_ab`.
pub fn retry_family() -> Vec<Mat3> {
    let one = C64::new(1.0, 0.0);
    let zero = C64::new(0.0, 0.0);
    let perms = [
        [0, 1, 2],
        [0, 2, 1],
        [1, 0, 2],
        [1, 2, 0],
        [2, 0, 1],
        [2, 1, 0],
    ];
    let perm_matrix = |p: [usize; 3]| -> Mat3 {
        std::array::from_fn(|i| std::array::from_fn(|j| if p[i] == j { one } else { zero }))
    };
    let mut out: Vec<Mat3> = perms[1..].iter().map(|&p| perm_matrix(p)).collect();
    for delta in [1e-2, 1e-1, 1.0] {
        for p in perms {
            for a in 0..3 {
                for bb in 0..3 {
                    if a == bb {
                        continue;
                    }
                    let mut shear = perm_matrix([0, 1, 2]);
                    shear[a][bb] = C64::new(delta, 0.0);
                    out.push(crate::curve::mat3_mul(&shear, &perm_matrix(p)));
                }
            }
        }
    }
    out
}

/// Re-classifies `curve` under successive maps from `retry_family` until
/// every region is admissible. Returns the transformed curve, the map and the
/// new report with the attempts logged.
pub fn affine_retry(
    curve: &CurveGamma,
    report: &DecompositionReport,
) -> Result<(CurveGamma, AffineMap3, DecompositionReport)> {
    if report.inadmissible_count() == 0 {
        return Ok((curve.clone(), AffineMap3::identity(), report.clone()));
    }
    let mut log = report.excluded_exponents_log.clone();
    let family = retry_family();
    for (i, m) in family.iter().enumerate() {
        let map = AffineMap3::linear(*m);
        let moved = curve.affine_apply(&map);
        let tt = moved.torsion_triple();
        let cfg = DecompositionConfig {
            working_radius: Some(report.working_radius),
            refine_depth: report.refine_depth,
            region_budget: report.region_budget,
            ..Default::default()
        };
        let next = match classify_with(&tt, &cfg) {
            Ok(r) => r,
            Err(Error::DegenerateTorsion) => continue,
            Err(e) => return Err(e),
        };
        let bad = next.inadmissible_count();
        log.push(RetryRecord {
            attempt: i + 1,
            map: map.clone(),
            inadmissible_regions: bad,
            accepted: bad == 0,
        });
        if bad == 0 {
            let mut next = next;
            next.excluded_exponents_log = log;
            return Ok((moved, map, next));
        }
    }
    Err(Error::RetriesExhausted {
        attempts: family.len(),
    })
}
