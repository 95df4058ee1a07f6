//! Numerical spectral geometry on flat lattice models: Dirac-type operators,
//! heat kernel families, localized equivariant traces and fixed-point index
//! verdicts.
//!
//! The crate builds finite lattice samplings of flat boxes and tori, assembles
//! self-adjoint graded Dirac-type operators commuting with a lattice isometry,
//! and evaluates both sides of a localized equivariant index equality:
//! the analytic side as the small-`t` limit of averaged supertrace densities
//! `tr(γ Φ κ_t(φ⁻¹m, m))` over an exhaustion, the geometric side as averaged
//! fixed-point-set integrals. Supporting machinery covers penumbra-regular
//! exhaustions, accumulation-point functionals, kernel decay envelopes, the
//! V/W/X/Y commutator decomposition and the graded heat idempotent pairing.
//!
//! Everything is `f64`/`Complex64` dense linear algebra sized for desk-scale
//! experiments; the single spectral oracle is a full Hermitian
//! eigendecomposition.

pub mod asymptotic;
pub mod clifford;
pub mod dirac;
pub mod error;
pub mod exhaustion;
pub mod geometry;
pub mod heat;
pub mod index;
pub mod isometry;
pub mod linalg;
pub mod trace;

pub use error::{Error, Result};
pub use geometry::{LatticeKind, LatticeModel, ProductRegion, Region};
pub use isometry::{IsometryPair, LiftSpec};

/// Comparison snap for lattice set builders: strict/non-strict inequalities
/// on ball and penumbra membership are evaluated with this absolute slack so
/// that exact lattice coincidences (distance equal to the radius) land on the
/// side the displayed formula says. Scaled by (1 + |r|) at use sites.
pub const SNAP: f64 = 1e-9;
