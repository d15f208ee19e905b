//! Boundary-integral solver for the surface Green function of the Neumann
//! Laplacian and the interior −1 source potential on closed C² boundaries.
//!
//! The fundamental solution E(x, y) = −1/(4π|x−y|) generates a single layer
//! S and a double layer N with kernel (1/2π) ν_y·(y−x)/|y−x|³, normalized so
//! that ∫ N(x, ·) dA = 1 on the boundary. Interior/exterior limits of layer
//! potentials obey the jump relations
//!   ∂_ν^int (E-layer of σ) = −σ/2 + (N*σ)/2,
//! with N* the adjoint in the area-weighted inner product (the matrix
//! transpose after Nyström discretization).
//!
//! Discretization is Nyström on an icosahedral node set with curved-cell
//! weights: raw kernels at separated pairs, quadrature on geodesic polar
//! patches near the diagonal, and a bordered linear system that pins the
//! Neumann rank defect by a zero-weighted-mean constraint. The Green
//! function's diagonal behavior
//!   G(x, y) = 1/(2π d) − (H/4π) log d_h + II-term + R(x, y)
//! is resolved by a regularized solve for the remainder, and R(x*, x*) — the
//! quantity the escape-time expansion needs — is read off as the intercept
//! of a Hölder fit over a fixed node ring.

mod green;
mod layers;
mod mesh;
mod potential;

pub use green::{
    singular_part, solve_boundary_green, BemDiagnostics, GreenDecomposition, HolderFit, RSample,
};
pub use layers::{
    assemble_layers, kernel_e, polar_patch, BorderedSystem, LayerKind, LayerOperator, LayerSet,
    PolarPatch,
};
pub use mesh::BoundaryMesh;
pub use potential::{solve_f, FSolution};

use crate::error::Error;

/// Error helper tagging boundary-integral failures.
pub(crate) fn bem_err(msg: impl Into<String>) -> Error {
    Error::Linear(msg.into())
}
