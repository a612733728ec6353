//! Einstein metrics on torus bundles and 3-sphere bundles over a Fano
//! Kähler-Einstein base.
//!
//! The metrics live on the solid-torus bundle `T(P_q)` (non-positive Einstein
//! constant) or the 3-sphere bundle `S(P_q)` (positive Einstein constant)
//! associated with a principal 2-torus bundle `P_q` classified by a pair of
//! integers `(q1, q2)`. Every metric is determined by a handful of constants
//! (κ, c₁, c₂, w₁, w₂, ψ) through closed-form profile functions of a radial
//! coordinate `s`:
//!
//! ```text
//! g = α(s)⁻¹ ds² + Σ bᵢⱼ(s) θⁱ⊗θʲ + β(s) π*h,      β = κs
//! ```
//!
//! The crate is organized as a pipeline:
//!
//! * [`profiles`] — exact evaluation of α, β, Δ, U₁, U₂ and the fiber matrix
//!   `B = (bᵢⱼ)` together with their analytic `s`-derivatives;
//! * [`builders`] — construction of complete families: the κ-quantization for
//!   non-positive metrics and the (x, y) continuation solver for positive ones;
//! * [`verifier`] — certification of the Einstein equations, fiber positivity,
//!   and the smooth-collapse boundary conditions;
//! * [`diagnostics`] — conformal compactification data, geodesic defining
//!   function, asymptotic volumes, dimension-4 Q-curvature, Ricci-flat decay;
//! * [`topology`] — exact-arithmetic characteristic classes, Kreck-Stolz
//!   invariants, and the homeomorphism/diffeomorphism classifier for the
//!   7-manifolds over CP²;
//! * [`harness`] — configuration, family (de)serialization, and the report
//!   types behind the `einbundle` command-line tool.

pub mod builders;
pub mod diagnostics;
pub mod harness;
pub mod jet;
pub mod power;
pub mod profiles;
pub mod quad;
pub mod roots;
pub mod topology;
pub mod verifier;

pub mod cli;

use thiserror::Error;

/// Crate-wide error type.
#[derive(Debug, Error)]
pub enum Error {
    /// Input outside the mathematical domain of an operation (s ≤ 0, α ≤ 0, ...).
    #[error("domain error: {0}")]
    Domain(String),
    /// Coefficient set violates a structural identity (e.g. GenericPsi with ψ = 0).
    #[error("inconsistent coefficients: {0}")]
    InconsistentCoefficients(String),
    /// The fiber metric degenerates (Δ ≤ 0 or B not positive-definite).
    #[error("degenerate fiber: {0}")]
    DegenerateFiber(String),
    /// A build specification violates its preconditions.
    #[error("invalid spec: {0}")]
    InvalidSpec(String),
    /// A root-finder or continuation failed to converge.
    #[error("solver failure: {0}")]
    Solver(String),
    /// Operation not defined for these parameters (wrong sign of ε, n ≠ 1, ...).
    #[error("unsupported: {0}")]
    Unsupported(String),
    /// Serialized family declares an unknown schema version.
    #[error("schema version mismatch: expected {expected}, found {found}")]
    SchemaVersion { expected: u32, found: u32 },
    /// Malformed configuration file or value.
    #[error("config error: {0}")]
    Config(String),
    #[error(transparent)]
    Io(#[from] std::io::Error),
    #[error(transparent)]
    Json(#[from] serde_json::Error),
}

pub type Result<T> = std::result::Result<T, Error>;
