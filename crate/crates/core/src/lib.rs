//! Numerical toolkit for capacitary-measure elliptic problems.
//!
//! Solves `−Δu + u + μu = f` on uniform grids, computes torsion functions and
//! torsional rigidity, estimates spectral quantities, diagnoses compactness
//! of the embedding `H¹_μ ↪ L²` / `L¹` from finite-box evidence, handles the
//! p-Laplacian analogue and optimizes Dirichlet eigenvalues over unions of
//! balls.

pub mod diagnostics;
pub mod eigen;
pub mod elliptic;
pub mod error;
pub mod expr;
pub mod gallery;
pub mod geometry;
pub mod measure;
pub mod operator;
pub mod ptorsion;
pub mod real;
pub mod shapeopt;
pub mod spectral;
pub mod torsion;

pub use diagnostics::{cross_check, diagnose_l1, diagnose_l2, CrossCheck, Decision, DiagnoseConfig, Embedding, Verdict};
pub use eigen::EigenOptions;
pub use elliptic::{
    gamma_distance_estimate, resolvent, solve, EllipticProblem, SolveResult, SolverOptions,
};
pub use error::{Error, Result};
pub use expr::Expr;
pub use geometry::{apply_neg_laplacian, build_grid, Field, Grid, Region, SlitSequence, SlitStrip};
pub use measure::{rasterize, MeasureSpec, RasterMeasure};
pub use operator::PreconditionerKind;
pub use ptorsion::{p_diagnose, p_diagnose_l1, p_resolvent, p_torsion, POptions, PProblem};
pub use shapeopt::{optimize, BallConfig, GaSettings, ObjectiveMode, ShapeObjective};
pub use spectral::{dirichlet_eigenvalues, local_probe, spectral_abscissa, tail_abscissa_profile, SpectralResult};
pub use torsion::{torsion_function, torsional_rigidity, Equation, RigidityResult, TorsionResult};
