//! Pseudospectral laboratory for the quadratic fourth-order Schrödinger
//! equation `i u_t - Δ²u + α u² + β ū² = 0` in one to five dimensions.

pub mod diagnostics;
pub mod dyadic;
pub mod field;
pub mod fit;
pub mod grid;
pub mod io;
pub mod linear;
pub mod norms;
pub mod pseudoproduct;
pub mod quad;
pub mod resonance;
pub mod rho;
pub mod solver;
pub mod study;
pub mod symbols;

pub use field::{FieldError, Space, SpectralField};
pub use grid::{Grid, GridError};
