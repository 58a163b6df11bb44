//! Convex polygons in the complex plane: clipping, splitting, membership and
//! sampling.

use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::poly::C64;

/// A convex polygon with counter-clockwise vertices.
#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
#[serde(transparent)]
pub struct ConvexPolygon {
    #[serde(with = "complex_pairs")]
    vertices: Vec<C64>,
}

pub(crate) mod complex_pairs {
    use super::C64;
    use serde::{Deserialize, Deserializer, Serialize, Serializer};

    pub fn serialize<S: Serializer>(v: &[C64], s: S) -> Result<S::Ok, S::Error> {
        v.iter()
            .map(|z| [z.re, z.im])
            .collect::<Vec<_>>()
            .serialize(s)
    }

    pub fn deserialize<'de, D: Deserializer<'de>>(d: D) -> Result<Vec<C64>, D::Error> {
        Ok(Vec::<[f64; 2]>::deserialize(d)?
            .into_iter()
            .map(|[re, im]| C64::new(re, im))
            .collect())
    }
}

fn cross(a: C64, b: C64) -> f64 {
    a.re * b.im - a.im * b.re
}

fn dot(a: C64, b: C64) -> f64 {
    a.re * b.re + a.im * b.im
}

impl ConvexPolygon {
    /// Takes vertices in either orientation; stores them counter-clockwise.
    pub fn new(mut vertices: Vec<C64>) -> Self {
        dedup_ring(&mut vertices);
        if signed_area(&vertices) < 0.0 {
            vertices.reverse();
        }
        Self { vertices }
    }

    /// Regular `sides`-gon circumscribing the disk `|z - center| <= radius`.
    pub fn circumscribed(center: C64, radius: f64, sides: usize) -> Self {
        let r = radius / (std::f64::consts::PI / sides as f64).cos();
        Self::new(
            (0..sides)
                .map(|k| {
                    center + C64::from_polar(r, std::f64::consts::TAU * k as f64 / sides as f64)
                })
                .collect(),
        )
    }

    /// Axis-aligned square `[c - h, c + h]^2`.
    pub fn square(center: C64, half: f64) -> Self {
        Self::new(vec![
            center + C64::new(-half, -half),
            center + C64::new(half, -half),
            center + C64::new(half, half),
            center + C64::new(-half, half),
        ])
    }

    pub fn vertices(&self) -> &[C64] {
        &self.vertices
    }

    pub fn is_empty(&self) -> bool {
        self.vertices.len() < 3 || self.area() <= 0.0
    }

    pub fn area(&self) -> f64 {
        signed_area(&self.vertices).abs()
    }

    pub fn centroid(&self) -> C64 {
        let n = self.vertices.len();
        let a = signed_area(&self.vertices);
        if n < 3 || a == 0.0 {
            return self.vertices.iter().sum::<C64>() / n.max(1) as f64;
        }
        let mut acc = C64::new(0.0, 0.0);
        for i in 0..n {
            let (p, q) = (self.vertices[i], self.vertices[(i + 1) % n]);
            acc += (p + q) * cross(p, q);
        }
        acc / (6.0 * a)
    }

    pub fn bbox(&self) -> (C64, C64) {
        let mut lo = C64::new(f64::INFINITY, f64::INFINITY);
        let mut hi = C64::new(f64::NEG_INFINITY, f64::NEG_INFINITY);
        for v in &self.vertices {
            lo.re = lo.re.min(v.re);
            lo.im = lo.im.min(v.im);
            hi.re = hi.re.max(v.re);
            hi.im = hi.im.max(v.im);
        }
        (lo, hi)
    }

    /// All consecutive edge turns share one sign.
    pub fn is_convex(&self) -> bool {
        let n = self.vertices.len();
        if n < 3 {
            return false;
        }
        let scale = self.diameter().max(f64::MIN_POSITIVE);
        (0..n).all(|i| {
            let a = self.vertices[i];
            let b = self.vertices[(i + 1) % n];
            let c = self.vertices[(i + 2) % n];
            cross(b - a, c - b) >= -1e-12 * scale * scale
        })
    }

    pub fn diameter(&self) -> f64 {
        let mut d: f64 = 0.0;
        for (i, a) in self.vertices.iter().enumerate() {
            for b in &self.vertices[i + 1..] {
                d = d.max((a - b).norm());
            }
        }
        d
    }

    /// Membership with absolute slack `tol` on every edge.
    pub fn contains(&self, z: C64, tol: f64) -> bool {
        let n = self.vertices.len();
        if n < 3 {
            return false;
        }
        (0..n).all(|i| {
            let a = self.vertices[i];
            let b = self.vertices[(i + 1) % n];
            let e = b - a;
            cross(e, z - a) >= -tol * e.norm()
        })
    }

    /// Keeps the part where `dot(z - point, normal) <= 0`.
    pub fn clip_halfplane(&self, point: C64, normal: C64) -> Self {
        let n = self.vertices.len();
        let mut out = Vec::with_capacity(n + 1);
        for i in 0..n {
            let p = self.vertices[i];
            let q = self.vertices[(i + 1) % n];
            let sp = dot(p - point, normal);
            let sq = dot(q - point, normal);
            if sp <= 0.0 {
                out.push(p);
            }
            if (sp < 0.0 && sq > 0.0) || (sp > 0.0 && sq < 0.0) {
                let t = sp / (sp - sq);
                out.push(p + (q - p) * t);
            }
        }
        let mut poly = Self { vertices: out };
        dedup_ring(&mut poly.vertices);
        poly
    }

    /// Intersection with another convex polygon.
    pub fn intersect(&self, other: &ConvexPolygon) -> Self {
        let n = other.vertices.len();
        let mut poly = self.clone();
        for i in 0..n {
            if poly.vertices.len() < 3 {
                return Self::default();
            }
            let a = other.vertices[i];
            let b = other.vertices[(i + 1) % n];
            let e = b - a;
            // outward normal of a CCW edge
            poly = poly.clip_halfplane(a, C64::new(e.im, -e.re));
        }
        poly
    }

    pub fn bbox_overlaps(&self, other: &ConvexPolygon) -> bool {
        let (alo, ahi) = self.bbox();
        let (blo, bhi) = other.bbox();
        alo.re <= bhi.re && blo.re <= ahi.re && alo.im <= bhi.im && blo.im <= ahi.im
    }

    /// Splits along the line through `point` perpendicular to `normal`.
    pub fn split(&self, point: C64, normal: C64) -> (Self, Self) {
        (
            self.clip_halfplane(point, normal),
            self.clip_halfplane(point, -normal),
        )
    }

    /// Halves the polygon across its longest vertex-to-vertex extent.
    pub fn bisect(&self) -> (Self, Self) {
        let mut best = (0, 0, -1.0);
        for (i, a) in self.vertices.iter().enumerate() {
            for (j, b) in self.vertices.iter().enumerate().skip(i + 1) {
                let d = (a - b).norm();
                if d > best.2 {
                    best = (i, j, d);
                }
            }
        }
        let dir = self.vertices[best.1] - self.vertices[best.0];
        let mid = (self.vertices[best.1] + self.vertices[best.0]) * 0.5;
        self.split(mid, dir)
    }

    /// Euclidean distance from `z` to the polygon (zero inside).
    pub fn distance_to(&self, z: C64) -> f64 {
        if self.contains(z, 0.0) {
            return 0.0;
        }
        let n = self.vertices.len();
        (0..n)
            .map(|i| segment_distance(z, self.vertices[i], self.vertices[(i + 1) % n]))
            .fold(f64::INFINITY, f64::min)
    }

    /// Largest distance from `z` to a point of the polygon.
    pub fn max_distance_to(&self, z: C64) -> f64 {
        self.vertices
            .iter()
            .map(|v| (v - z).norm())
            .fold(0.0, f64::max)
    }

    /// Uniform point by rejection from the rectangle aligned with the
    /// polygon's diameter (at least half of it lies in the polygon); `None`
    /// after `max_attempts` consecutive rejections.
    pub fn sample<R: Rng + ?Sized>(&self, rng: &mut R, max_attempts: usize) -> Option<C64> {
        let frame = self.sampling_frame()?;
        for _ in 0..max_attempts {
            let z = frame.origin
                + frame.axis
                    * C64::new(
                        frame.len * rng.gen::<f64>(),
                        frame.lo + (frame.hi - frame.lo) * rng.gen::<f64>(),
                    );
            if self.contains(z, 0.0) {
                return Some(z);
            }
        }
        None
    }

    fn sampling_frame(&self) -> Option<Frame> {
        if self.vertices.len() < 3 {
            return None;
        }
        let mut best = (0, 0, -1.0);
        for (i, a) in self.vertices.iter().enumerate() {
            for (j, b) in self.vertices.iter().enumerate().skip(i + 1) {
                let d = (a - b).norm();
                if d > best.2 {
                    best = (i, j, d);
                }
            }
        }
        let origin = self.vertices[best.0];
        let len = best.2;
        if len <= 0.0 {
            return None;
        }
        let axis = (self.vertices[best.1] - origin) / len;
        let (mut lo, mut hi) = (0.0f64, 0.0f64);
        for v in &self.vertices {
            let h = ((v - origin) / axis).im;
            lo = lo.min(h);
            hi = hi.max(h);
        }
        Some(Frame {
            origin,
            axis,
            len,
            lo,
            hi,
        })
    }

    /// `per_edge` evenly spaced points on every edge (vertices included).
    pub fn boundary_points(&self, per_edge: usize) -> Vec<C64> {
        let n = self.vertices.len();
        let mut out = Vec::with_capacity(n * per_edge);
        for i in 0..n {
            let a = self.vertices[i];
            let b = self.vertices[(i + 1) % n];
            for k in 0..per_edge {
                out.push(a + (b - a) * (k as f64 / per_edge as f64));
            }
        }
        out
    }
}

/// Rectangle `origin + axis * (s + i t)`, `s` in `[0, len]`, `t` in `[lo, hi]`.
struct Frame {
    origin: C64,
    axis: C64,
    len: f64,
    lo: f64,
    hi: f64,
}

fn signed_area(v: &[C64]) -> f64 {
    let n = v.len();
    if n < 3 {
        return 0.0;
    }
    0.5 * (0..n).map(|i| cross(v[i], v[(i + 1) % n])).sum::<f64>()
}

fn dedup_ring(v: &mut Vec<C64>) {
    let scale = v.iter().map(|z| z.norm()).fold(1.0, f64::max);
    let tol = 1e-13 * scale;
    v.dedup_by(|a, b| (*a - *b).norm() <= tol);
    while v.len() > 1 && (v[0] - v[v.len() - 1]).norm() <= tol {
        v.pop();
    }
}

/// Distance from `z` to the closed segment `[a, b]`.
pub fn segment_distance(z: C64, a: C64, b: C64) -> f64 {
    let e = b - a;
    let len2 = e.norm_sqr();
    if len2 == 0.0 {
        return (z - a).norm();
    }
    let t = (dot(z - a, e) / len2).clamp(0.0, 1.0);
    (z - (a + e * t)).norm()
}

/// The Voronoi cell of `sites[index]` intersected with `bounds`.
pub fn voronoi_cell(sites: &[C64], index: usize, bounds: &ConvexPolygon) -> ConvexPolygon {
    let s = sites[index];
    let mut cell = bounds.clone();
    for (j, &t) in sites.iter().enumerate() {
        if j == index || cell.vertices.len() < 3 {
            continue;
        }
        cell = cell.clip_halfplane((s + t) * 0.5, t - s);
    }
    cell
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    fn c(re: f64, im: f64) -> C64 {
        C64::new(re, im)
    }

    #[test]
    fn square_basics() {
        let sq = ConvexPolygon::square(c(0.0, 0.0), 1.0);
        assert!((sq.area() - 4.0).abs() < 1e-15);
        assert!(sq.is_convex());
        assert!(sq.contains(c(0.5, -0.9), 0.0));
        assert!(!sq.contains(c(1.5, 0.0), 0.0));
        assert!((sq.distance_to(c(3.0, 0.0)) - 2.0).abs() < 1e-15);
        assert!(sq.centroid().norm() < 1e-15);
    }

    #[test]
    fn clipping_and_bisection_preserve_area() {
        let poly = ConvexPolygon::circumscribed(c(1.0, 2.0), 3.0, 12);
        let (a, b) = poly.bisect();
        assert!(a.is_convex() && b.is_convex());
        assert!((a.area() + b.area() - poly.area()).abs() < 1e-10);
        let other = ConvexPolygon::square(c(1.0, 2.0), 1.0);
        let inter = poly.intersect(&other);
        assert!((inter.area() - 4.0).abs() < 1e-12);
    }

    #[test]
    fn voronoi_cells_partition_the_box() {
        let sites = [c(0.0, 0.0), c(1.0, 0.0), c(0.0, 2.0)];
        let bounds = ConvexPolygon::square(c(0.0, 0.0), 5.0);
        let total: f64 = (0..3)
            .map(|i| voronoi_cell(&sites, i, &bounds).area())
            .sum();
        assert!((total - 100.0).abs() < 1e-9);
    }

    #[test]
    fn samples_fall_inside() {
        let tri = ConvexPolygon::new(vec![c(0.0, 0.0), c(1.0, 0.0), c(0.0, 1.0)]);
        let mut rng = ChaCha8Rng::seed_from_u64(7);
        for _ in 0..200 {
            let z = tri.sample(&mut rng, 1000).unwrap();
            assert!(tri.contains(z, 0.0));
        }
    }
}
