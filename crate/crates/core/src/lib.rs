//! Numerical workbench for the horseshoe construction near a Silnikov saddle
//! of the singularly perturbed, even, 2π-periodic NLS equation
//!
//! ```text
//! i q_t = q_ζζ + 2(|q|² − ω²) q + iε (q_ζζ − α q + β)
//! ```
//!
//! The crate is organised bottom-up:
//!
//! - [`params`]: the saddle, its eigenvalue ladder, the Silnikov ordering and
//!   a finite Siegel-type nonresonance check.
//! - [`spectral`]: cosine-mode pseudo-spectral integrator, the linearised
//!   operator, the half-period shift and the tangency diagnostic.
//! - [`normal_form`]: the linear flow in eigen-coordinates, the sections
//!   Σ₀/Σ₁ and the closed-form local map.
//! - [`global_map`]: the affine excursion map, its estimation from a flow and
//!   the composed return map.
//! - [`horseshoe`]: the fixed-point family, slabs, slices, Conley–Moser checks
//!   and the finite-depth shift conjugacy.
//! - [`cli`]: the `snls` command line front end.

pub mod canonical;
pub mod cli;
pub mod error;
pub mod global_map;
pub mod horseshoe;
pub mod normal_form;
pub mod numeric;
pub mod params;
pub mod spectral;

pub use error::{Result, SnlsError};
