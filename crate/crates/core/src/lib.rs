//! Torsion, plane decomposition, Jacobian identities and operator estimates
//! for complex polynomial curves `C -> C^3`.

pub mod curve;
pub mod decomposition;
pub mod error;
pub mod geometry;
pub mod jacobian;
pub mod operator;
pub mod poly;
pub mod quadrature;
pub mod svg;
pub mod verify;

pub use curve::{AffineMap3, CurveGamma, TorsionTriple};
pub use error::{Error, Result};
pub use poly::{ComplexPolynomial, Root, RootSet, C64};

/// Order-preserving map, parallel when the `parallel` feature is on.
#[cfg(feature = "parallel")]
pub(crate) fn par_map<T: Sync, U: Send>(items: &[T], f: impl Fn(&T) -> U + Sync + Send) -> Vec<U> {
    use rayon::prelude::*;
    items.par_iter().map(f).collect()
}

#[cfg(not(feature = "parallel"))]
pub(crate) fn par_map<T, U>(items: &[T], f: impl Fn(&T) -> U) -> Vec<U> {
    items.iter().map(f).collect()
}
