//! Numerical laboratory for `-Δu = λ|u|^(β-1)u - |u|^(α-1)u` on a ball with
//! `0 < α < β < 1`: fibering spectral points, Nehari-manifold minimizers,
//! Pohozaev-based detection of compactly supported solutions, the threshold
//! `λ*`, scaled compacton families and the regular sub/super-solution branch.

pub mod cli;
pub mod constructions;
mod descent;
pub mod error;
pub mod fiber;
pub mod functionals;
pub mod grid;
pub mod nehari;
pub mod params;
pub mod pohozaev;
pub mod random;
pub mod shooting;

pub use error::{LabError, Result};
pub use grid::{Field, RadialGrid};
pub use params::ParamSet;
