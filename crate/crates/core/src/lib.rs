//! Numerical geometry of the Cartan–Hartogs domain
//!
//! ```text
//! Y_II(r, p; K) = { (Z, w) : Z ∈ R_II(p), w ∈ C^r, |w|² < det(I − Z Z̄)^{1/K} }
//! ```
//!
//! The crate evaluates the explicit complete Kähler–Einstein metric that exists
//! at `K = p/2 + 1/(p+1)`, its holomorphic sectional curvature, the Bergman
//! kernel and metric, and the automorphisms that move any point onto the slice
//! `Z = 0`. Every closed form is paired with an independent finite-difference
//! route in [`oracle`] so the identities can be checked numerically.
//!
//! Coordinates follow the √2 convention: a symmetric `p×p` matrix `Z` is stored
//! as the `p(p+1)/2` vector `(z11, z12, …, z1p, z22, …, zpp)` with
//! `Z[k][l] = z_kl / √2` off the diagonal, so `|z|² = tr(Z Z̄)`.

pub mod autgroup;
pub mod bergman;
pub mod curvature;
pub mod domain;
mod error;
pub mod kemetric;
pub mod linalg;
pub mod oracle;

pub use error::{Error, Result};

/// Complex scalar used throughout.
pub type C64 = num_complex::Complex64;

pub use autgroup::{jacobian_at_base, jacobian_det_sq, normalizing_map, Automorphism, JacobianBlocks};
pub use bergman::{BergmanCoeffs, EquivalenceBounds, RatioTriple};
pub use curvature::{CurvatureBlocks, Tangent};
pub use domain::{special_k, AuxXY, DomainParams, Point};
pub use kemetric::{MetricBlocks, MetricMatrix};
pub use linalg::{CoordVector, SymMatrix};
pub use oracle::FdConfig;
