//! Numerics for G_{n,k}-invariant Kähler potentials on complex projective
//! space: group action, complex Hessians, the extremal envelope ψ and its
//! reduction chain, and the exp(−αψ) integrals.

pub mod envelope;
pub mod error;
pub mod ext;
pub mod geometry;
pub mod grid;
pub mod hermitian;
pub mod integrals;
pub mod projective;
pub mod quadrature;
pub mod testfuncs;

pub use error::{Error, Result};
pub use ext::ExtReal;
pub use geometry::MetricSpec;
pub use grid::GridSpec;
pub use hermitian::{HermitianForm, HessianOptions, ScalarField};
pub use integrals::IntegralEstimate;
pub use projective::{ChartPoint, Generator, MPoint, ProjectivePoint, TupleShape};
pub use testfuncs::{TestFamily, TestFunctionSpec};
