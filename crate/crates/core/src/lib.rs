//! Gradient-driven dimension reduction of scalar functions on `[-1,1]^n`.
//!
//! The Active Manifold of `f` is the curve followed by the normalized
//! gradient flow from a minimum to a maximum. Sampling `f` along it gives a
//! 1-D surrogate; a query point is mapped onto the curve by walking along
//! its level set. The Active Subspace baseline projects onto the dominant
//! eigenvector of the averaged gradient outer product instead.
//!
//! All numerical types are generic over [`Scalar`] (`f32` or `f64`); the
//! `*64` aliases below fix the common double precision case.

#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod error;
pub mod geometry;
pub mod harness;
pub mod io;
pub mod levelset;
pub mod linalg;
pub mod manifold;
pub mod objective;
pub mod scalar;
pub mod subspace;
pub mod surrogate;

pub use error::{AmError, Result};
pub use geometry::{
    build_gradient_field, build_grid, nearest_grid_point, GradientField, GradientSample, Lattice,
    Point,
};
pub use harness::{
    monte_carlo, run_experiment, ErrorReport, Experiment, ExperimentSpec, Method, MonteCarloReport,
    QueryStatus,
};
pub use levelset::{
    estimate_at, nearest_manifold_point, orthogonal_project, segment_parameter,
    traverse_to_manifold, ProjectionResult, TraversalConfig, TraversalFailure,
};
pub use linalg::{symmetric_eigen, Matrix, SymmetricEigen};
pub use manifold::{
    build_active_manifold, manifold_to_pairs, trace_path, ActiveManifold, Direction, TraceOptions,
};
pub use objective::{Builtin, FiniteDifference, Objective};
pub use scalar::Scalar;
pub use subspace::{
    as_estimate, build_as_model, build_as_model_from_field, compute_c_matrix, ActiveSubspaceModel,
};
pub use surrogate::{fit_polynomial, Evaluation, PolynomialSurrogate};

pub type Point64 = Point<f64>;
pub type GradientField64 = GradientField<f64>;
pub type ActiveManifold64 = ActiveManifold<f64>;
pub type PolynomialSurrogate64 = PolynomialSurrogate<f64>;
pub type ActiveSubspaceModel64 = ActiveSubspaceModel<f64>;
pub type TraversalConfig64 = TraversalConfig<f64>;
pub type ProjectionResult64 = ProjectionResult<f64>;
pub type ErrorReport64 = ErrorReport<f64>;
pub type MonteCarloReport64 = MonteCarloReport<f64>;
pub type Matrix64 = Matrix<f64>;

pub type Point32 = Point<f32>;
pub type GradientField32 = GradientField<f32>;
pub type ActiveManifold32 = ActiveManifold<f32>;
pub type PolynomialSurrogate32 = PolynomialSurrogate<f32>;
