use thiserror::Error;

/// Errors raised across the library.
#[derive(Debug, Clone, PartialEq, Error)]
pub enum Error {
    #[error("root iteration did not converge (residual {residual:e})")]
    NonConvergence { residual: f64 },
    #[error("polynomial has degree zero")]
    DegreeZero,
    #[error("curve is singular at the origin: |L3(0)| = {l3_at_origin:e}")]
    SingularAtOrigin { l3_at_origin: f64 },
    #[error("2*pi/eps is not an integer (eps = {eps})")]
    EpsNotDivisor { eps: f64 },
    #[error("sector aperture {aperture} exceeds pi/8")]
    ApertureTooWide { aperture: f64 },
    #[error("torsion L3 vanishes identically")]
    DegenerateTorsion,
    #[error("root finding failed: {0}")]
    RootFindingFailed(String),
    #[error("a zero of {poly} lies within {distance:e} of the integration domain")]
    SegmentHitsSingularity { poly: &'static str, distance: f64 },
    #[error("quadrature did not converge: relative change {rel_change:e} on node doubling")]
    QuadratureNonConvergence { rel_change: f64 },
    #[error("all sampled values are zero")]
    AllSamplesZero,
    #[error("triple has coincident points")]
    DegenerateTriple,
    #[error("rejection sampling failed {attempts} consecutive times")]
    EmptyRegion { attempts: usize },
    #[error("set has zero volume")]
    ZeroVolume,
    #[error("affine retries exhausted after {attempts} attempts")]
    RetriesExhausted { attempts: usize },
    #[error("region is not admissible: sigma = {sigma:?}")]
    Inadmissible { sigma: [f64; 3] },
    #[error("invalid input: {0}")]
    InvalidInput(String),
}

pub type Result<T> = std::result::Result<T, Error>;
