//! Piecewise-linear finite elements for the Poisson equation with square-integrable
//! Dirichlet data on polygonal domains with one reentrant corner.
//!
//! The discrete solution of the transposed (very weak) formulation converges in
//! `L2` at order 1/2 once the part of the solution carried by the dual singular
//! function `r^{-lambda} sin(lambda theta)` is resolved separately.  The crate
//! builds everything needed to run that correction end to end:
//!
//! - [`domain`]: the family of computational domains `(-1,1)^2` cut to an opening
//!   angle `omega` at the origin, with the polar branch and the singular terms;
//! - [`mesh`]: fan triangulation plus newest-vertex-bisection refinement;
//! - [`quadrature`]: triangle Gauss rules, geometrically layered rules for
//!   corner-singular integrands, and the graded boundary rule;
//! - [`fem`]: CSR matrices, P1 assembly, boundary lifting, and a conjugate
//!   gradient solver;
//! - [`boundary`]: the `L2(Gamma)` projection of the Dirichlet datum;
//! - [`singular`]: the discrete dual singular function and the corrected
//!   solution coefficients;
//! - [`experiments`]: convergence studies and their CSV output.

pub mod boundary;
pub mod domain;
pub mod experiments;
pub mod fem;
pub mod mesh;
pub mod quadrature;
pub mod singular;

pub use boundary::{boundary_mass, l2_project_boundary, BoundaryDatum, BoundaryTrace};
pub use domain::{PolygonalDomain, SingularKind, SingularTerm};
pub use experiments::{
    emit_csv, eoc, l2_error, corner_case, parse_csv, run_convergence, smooth_case, zero_case, Case,
    ConvergenceRow, Method, RunConfig, RunOutcome, ScalarField,
};
pub use fem::{
    assemble_load, assemble_mass, assemble_stiffness, cg_solve, lift_boundary, solve_dirichlet,
    FeFunction, SparseMatrix,
};
pub use mesh::{BoundaryEdge, TriMesh};
pub use quadrature::{
    graded_boundary_rule, integrate_corner_triangle, integrate_triangle, GradedBoundaryRule,
    TriRule,
};
pub use singular::{
    compute_alpha, compute_beta, compute_dual_singular, compute_gamma, compute_phi,
    corrected_solution, AugmentedFunction, CorrectionCoefficients, SingularContext,
};

/// Errors shared across the crate.
#[derive(Debug, thiserror::Error)]
pub enum Error {
    #[error("opening angle must lie in (0, 2*pi), got {0}")]
    InvalidAngle(f64),
    #[error("target mesh size must lie in (0, sqrt(2)], got {0}")]
    InvalidMeshSize(f64),
    #[error("mesh refinement failed to reach the target size")]
    RefinementStalled,
    #[error("no triangle rule of order {0}; supported orders are 1, 2, 3, 5, 7")]
    UnsupportedOrder(u32),
    #[error("corner rule needs a singularity exponent > -2, got {0}")]
    NonIntegrable(f64),
    #[error("corner rule needs exactly one vertex at the origin")]
    NotACornerTriangle,
    #[error("non-finite integrand sample at ({0}, {1})")]
    NonFiniteSample(f64, f64),
    #[error("grading exponent must lie in (0, 1], got {0}")]
    InvalidGrading(f64),
    #[error("grading radius must lie in (0, sqrt(2)], got {0}")]
    InvalidGradingRadius(f64),
    #[error("element {0} is degenerate (area {1:.3e})")]
    DegenerateElement(usize, f64),
    #[error("solver stalled after {iterations} iterations (relative residual {residual:.3e})")]
    SolverDiverged { iterations: usize, residual: f64 },
    #[error("dual singular function requires a reentrant corner (lambda = {0} >= 1)")]
    ConvexCorner(f64),
    #[error("computed norm of the dual singular function is not positive ({0:.3e})")]
    DegenerateSingularNorm(f64),
    #[error("quadrature unstable under depth doubling (relative change {0:.3e})")]
    QuadratureUnstable(f64),
    #[error("functions live on different meshes")]
    MeshMismatch,
    #[error("mesh file malformed: {0}")]
    MeshFormat(String),
    #[error("csv malformed: {0}")]
    CsvFormat(String),
    #[error("convergence study configuration invalid: {0}")]
    InvalidConfig(String),
    #[error(transparent)]
    Io(#[from] std::io::Error),
}

pub type Result<T> = std::result::Result<T, Error>;
