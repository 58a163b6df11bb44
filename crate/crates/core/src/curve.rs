//! Curves `z -> (P1(z), P2(z), P3(z))`, their torsion triple and the affine
//! and averaging transformations acting on them.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::poly::{det2, det3, ComplexPolynomial, C64};

/// Relative level below which L3 is treated as identically zero.
pub const DEGENERATE_REL_TOL: f64 = 1e-10;

/// `|L3(0)|` below this raises `SingularAtOrigin`.
pub const SINGULAR_ORIGIN_TOL: f64 = 1e-12;

pub type Vec3 = [C64; 3];
pub type Mat3 = [[C64; 3]; 3];

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "CurveFile", into = "CurveFile")]
pub struct CurveGamma {
    components: [ComplexPolynomial; 3],
    degree_bound: usize,
    degenerate: bool,
}

#[derive(Serialize, Deserialize)]
struct CurveFile {
    #[serde(rename = "N")]
    n: usize,
    components: [ComplexPolynomial; 3],
}

impl TryFrom<CurveFile> for CurveGamma {
    type Error = Error;
    fn try_from(f: CurveFile) -> Result<Self> {
        CurveGamma::new(f.components, f.n)
    }
}

impl From<CurveGamma> for CurveFile {
    fn from(c: CurveGamma) -> Self {
        CurveFile {
            n: c.degree_bound,
            components: c.components,
        }
    }
}

impl CurveGamma {
    /// Fails when a component exceeds the degree bound. Degenerate curves
    /// (L3 identically zero) are accepted and tagged.
    pub fn new(components: [ComplexPolynomial; 3], degree_bound: usize) -> Result<Self> {
        if degree_bound == 0 {
            return Err(Error::InvalidInput(
                "degree bound N must be positive".into(),
            ));
        }
        if let Some(d) = components.iter().filter_map(|p| p.degree()).max() {
            if d > degree_bound {
                return Err(Error::InvalidInput(format!(
                    "component degree {d} exceeds bound N = {degree_bound}"
                )));
            }
        }
        let mut curve = Self {
            components,
            degree_bound,
            degenerate: false,
        };
        curve.degenerate = curve
            .torsion_triple()
            .is_degenerate(curve.coefficient_scale());
        Ok(curve)
    }

    /// Builds a curve with `N` equal to the largest component degree (at least 1).
    pub fn from_components(components: [ComplexPolynomial; 3]) -> Self {
        let n = components
            .iter()
            .map(|p| p.degree_or_zero())
            .max()
            .unwrap_or(0)
            .max(1);
        Self::new(components, n).expect("degree bound taken from components")
    }

    /// Curve with real monomial-style coefficient lists.
    pub fn from_real(p1: &[f64], p2: &[f64], p3: &[f64]) -> Self {
        Self::from_components([
            ComplexPolynomial::from_real(p1),
            ComplexPolynomial::from_real(p2),
            ComplexPolynomial::from_real(p3),
        ])
    }

    /// `(z, z^2, z^3)`
    pub fn moment() -> Self {
        Self::from_real(&[0.0, 1.0], &[0.0, 0.0, 1.0], &[0.0, 0.0, 0.0, 1.0])
    }

    pub fn components(&self) -> &[ComplexPolynomial; 3] {
        &self.components
    }

    pub fn degree_bound(&self) -> usize {
        self.degree_bound
    }

    pub fn is_degenerate(&self) -> bool {
        self.degenerate
    }

    pub fn coefficient_scale(&self) -> f64 {
        self.components
            .iter()
            .map(|p| p.max_coeff_modulus())
            .fold(0.0, f64::max)
    }

    pub fn eval(&self, z: C64) -> Vec3 {
        [
            self.components[0].eval(z),
            self.components[1].eval(z),
            self.components[2].eval(z),
        ]
    }

    /// `Gamma^(order)(z)`
    pub fn eval_derivative(&self, z: C64, order: usize) -> Vec3 {
        let d = |p: &ComplexPolynomial| p.nth_derivative(order).eval(z);
        [
            d(&self.components[0]),
            d(&self.components[1]),
            d(&self.components[2]),
        ]
    }

    pub fn derivative(&self) -> [ComplexPolynomial; 3] {
        [
            self.components[0].derivative(),
            self.components[1].derivative(),
            self.components[2].derivative(),
        ]
    }

    pub fn torsion_triple(&self) -> TorsionTriple {
        let d: Vec<[ComplexPolynomial; 3]> = self
            .components
            .iter()
            .map(|p| {
                let p1 = p.derivative();
                let p2 = p1.derivative();
                let p3 = p2.derivative();
                [p1, p2, p3]
            })
            .collect();
        let l1 = d[0][0].clone();
        let l2 = det2(&[
            [d[0][0].clone(), d[0][1].clone()],
            [d[1][0].clone(), d[1][1].clone()],
        ]);
        let l3 = det3(&[d[0].clone(), d[1].clone(), d[2].clone()]);
        TorsionTriple { l1, l2, l3 }
    }

    /// `A Gamma + offset`, componentwise.
    pub fn affine_apply(&self, map: &AffineMap3) -> Self {
        let comps: [ComplexPolynomial; 3] = std::array::from_fn(|i| {
            let mut acc = ComplexPolynomial::constant(map.offset[i]);
            for j in 0..3 {
                acc = &acc + &self.components[j].scale(map.matrix[i][j]);
            }
            acc
        });
        Self::new(comps, self.degree_bound).expect("affine image keeps the degree bound")
    }

    /// Returns the curve `A (Gamma - Gamma(0))` whose first three derivatives
    /// at the origin are the standard basis vectors, and the map used.
    pub fn normalize_at_origin(&self) -> Result<(Self, AffineMap3)> {
        let l3_0 = self.torsion_triple().l3.eval(C64::new(0.0, 0.0)).norm();
        if l3_0 < SINGULAR_ORIGIN_TOL {
            return Err(Error::SingularAtOrigin { l3_at_origin: l3_0 });
        }
        let zero = C64::new(0.0, 0.0);
        let cols: [Vec3; 3] = std::array::from_fn(|k| self.eval_derivative(zero, k + 1));
        let m: Mat3 = std::array::from_fn(|i| std::array::from_fn(|k| cols[k][i]));
        let inv = mat3_inverse(&m).ok_or(Error::SingularAtOrigin { l3_at_origin: l3_0 })?;
        let g0 = self.eval(zero);
        let ag0 = mat3_vec(&inv, &g0);
        let map = AffineMap3::new(inv, [-ag0[0], -ag0[1], -ag0[2]]);
        let out = self.affine_apply(&map);

        let e = |i: usize, k: usize| if i == k { 1.0 } else { 0.0 };
        let base = out.eval(zero);
        let mut worst = base.iter().map(|v| v.norm()).fold(0.0, f64::max);
        for k in 0..3 {
            let dk = out.eval_derivative(zero, k + 1);
            for (i, d) in dk.iter().enumerate() {
                worst = worst.max((d - e(i, k)).norm());
            }
        }
        if worst > 1e-9 {
            return Err(Error::InvalidInput(format!(
                "normalization postcondition violated by {worst:e}"
            )));
        }
        Ok((out, map))
    }

    /// `(1/K) sum_j Gamma(z + h_j)`.
    pub fn offspring(&self, shifts: &[C64]) -> Result<Self> {
        if shifts.is_empty() {
            return Err(Error::InvalidInput("offspring needs K >= 1 shifts".into()));
        }
        let k = shifts.len() as f64;
        let comps: [ComplexPolynomial; 3] = std::array::from_fn(|i| {
            let sum = shifts.iter().fold(ComplexPolynomial::zero(), |acc, &h| {
                &acc + &self.components[i].shift(h)
            });
            sum.scale(C64::new(1.0 / k, 0.0))
        });
        Self::new(comps, self.degree_bound)
    }
}

/// The minors `L1 = P1'`, `L2 = det[[P1', P1''], [P2', P2'']]` and the
/// torsion `L3 = det(Gamma', Gamma'', Gamma''')`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TorsionTriple {
    pub l1: ComplexPolynomial,
    pub l2: ComplexPolynomial,
    pub l3: ComplexPolynomial,
}

impl TorsionTriple {
    pub fn get(&self, i: usize) -> &ComplexPolynomial {
        match i {
            0 => &self.l1,
            1 => &self.l2,
            _ => &self.l3,
        }
    }

    /// L3 is identically zero relative to the curve's coefficient scale.
    pub fn is_degenerate(&self, scale: f64) -> bool {
        self.l3
            .is_negligible(DEGENERATE_REL_TOL * scale.max(f64::MIN_POSITIVE))
    }

    /// Affine arclength weight `|L3(z)|^(1/3)`.
    pub fn lambda(&self, z: C64) -> f64 {
        self.l3.eval(z).norm().cbrt()
    }
}

/// An affine map of C^3 with its determinant cached.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AffineMap3 {
    pub matrix: Mat3,
    pub offset: Vec3,
    pub determinant: C64,
}

impl AffineMap3 {
    pub fn new(matrix: Mat3, offset: Vec3) -> Self {
        let determinant = mat3_det(&matrix);
        Self {
            matrix,
            offset,
            determinant,
        }
    }

    pub fn identity() -> Self {
        Self::linear(mat3_identity())
    }

    pub fn linear(matrix: Mat3) -> Self {
        Self::new(matrix, [C64::new(0.0, 0.0); 3])
    }

    pub fn diagonal(d: [f64; 3]) -> Self {
        let mut m = [[C64::new(0.0, 0.0); 3]; 3];
        for i in 0..3 {
            m[i][i] = C64::new(d[i], 0.0);
        }
        Self::linear(m)
    }

    /// `self ∘ other`
    pub fn compose(&self, other: &AffineMap3) -> AffineMap3 {
        let m = mat3_mul(&self.matrix, &other.matrix);
        let t = mat3_vec(&self.matrix, &other.offset);
        AffineMap3::new(m, std::array::from_fn(|i| t[i] + self.offset[i]))
    }

    pub fn apply(&self, v: &Vec3) -> Vec3 {
        let mv = mat3_vec(&self.matrix, v);
        std::array::from_fn(|i| mv[i] + self.offset[i])
    }
}

pub fn mat3_identity() -> Mat3 {
    std::array::from_fn(|i| std::array::from_fn(|j| C64::new(if i == j { 1.0 } else { 0.0 }, 0.0)))
}

pub fn mat3_det(m: &Mat3) -> C64 {
    m[0][0] * (m[1][1] * m[2][2] - m[1][2] * m[2][1])
        - m[0][1] * (m[1][0] * m[2][2] - m[1][2] * m[2][0])
        + m[0][2] * (m[1][0] * m[2][1] - m[1][1] * m[2][0])
}

pub fn mat3_mul(a: &Mat3, b: &Mat3) -> Mat3 {
    std::array::from_fn(|i| std::array::from_fn(|j| (0..3).map(|k| a[i][k] * b[k][j]).sum()))
}

pub fn mat3_vec(a: &Mat3, v: &Vec3) -> Vec3 {
    std::array::from_fn(|i| (0..3).map(|k| a[i][k] * v[k]).sum())
}

/// Adjugate inverse; `None` when the determinant is exactly zero.
pub fn mat3_inverse(m: &Mat3) -> Option<Mat3> {
    let det = mat3_det(m);
    if det.norm() == 0.0 {
        return None;
    }
    let cof =
        |r0: usize, r1: usize, c0: usize, c1: usize| m[r0][c0] * m[r1][c1] - m[r0][c1] * m[r1][c0];
    let adj: Mat3 = [
        [cof(1, 2, 1, 2), -cof(0, 2, 1, 2), cof(0, 1, 1, 2)],
        [-cof(1, 2, 0, 2), cof(0, 2, 0, 2), -cof(0, 1, 0, 2)],
        [cof(1, 2, 0, 1), -cof(0, 2, 0, 1), cof(0, 1, 0, 1)],
    ];
    Some(std::array::from_fn(|i| {
        std::array::from_fn(|j| adj[i][j] / det)
    }))
}
