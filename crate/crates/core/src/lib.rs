//! Weighted Vandermonde determinants, Fekete configurations and the convex
//! analysis and optimal transport around them, for toric line bundles over
//! polytopes of dimension one or two.

// `!(x <= tol)` is used on purpose so that NaN fails the check.
#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod convexity;
pub mod error;
pub mod fekete;
pub mod grid;
pub mod legendre;
pub mod lfunctional;
pub mod linalg;
pub mod measure;
pub mod optimize;
pub mod polytope;
pub mod quadrature;
pub mod transport;
pub mod vandermonde;
pub mod weight;

pub use error::{Error, Result};
pub use grid::{Grid, GridFunction};
pub use measure::DiscreteMeasure;
pub use polytope::{LatticeBasis, LatticePolytope, PolytopeSpec, Rational};
pub use vandermonde::{BundleSpec, Configuration};
pub use weight::{ToricWeight, WeightSpec};
