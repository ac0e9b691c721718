//! Curvature and measure-theoretic quantities of level hypersurfaces.
//!
//! Given a twice-differentiable scalar field `f` on a box in R^d (d = n+1,
//! d >= 3), this crate evaluates exact second-order jets (value, gradient,
//! Hessian), computes the mean and Gaussian curvature of the level sets of
//! `f` from those jets, estimates region and level-set integrals by
//! stratified Monte Carlo, extracts triangle meshes of level sets in 3D,
//! locates and classifies nondegenerate critical points, and verifies a
//! family of integral identities relating all of the above; each identity
//! checked with two estimators that share no code path for the quantity
//! itself.
//!
//! Everything is deterministic: a fixed seed produces bit-identical results
//! regardless of thread count (sampling is chunked into independent RNG
//! streams combined in a fixed order). The `parallel` feature (default)
//! runs the data-parallel inner loops on rayon; without it the same chunks
//! run sequentially with identical output.

pub mod curvature;
mod exec;
pub mod field;
pub mod identities;
pub mod meshing;
pub mod morse;
pub mod quadrature;

pub use field::{
    builtin_field, field_from_spec, parse_field, BoundingBox, FieldError, Interval, Jet2, Point,
    ScalarField,
};
pub use identities::{IdentityId, IdentityReport, SuiteConfig, Verdict};
pub use quadrature::{IntegralEstimate, LevelProfile, QuadratureConfig};
