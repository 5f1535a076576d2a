//! Numerical laboratory for warped cones of isometric group actions.
//!
//! A warped cone over a compact space `M` with an isometric action of a
//! finitely generated group is studied level by level: at level `t` the space
//! carries the scaled metric `t·d_M`, the scaled measure `t^m·μ`, and the
//! warped distance in which every generator jump costs one unit.  This crate
//! discretizes those level sets by ε-nets and builds the coarse, local and
//! group Laplacians on them, together with the spectral experiments around
//! them (bottom spectra and gaps across levels, Weyl counting, eigenvalue
//! accumulation, heat-kernel comparisons, and the invariant-kernel sector).
//!
//! Module map:
//!
//! | module | contents |
//! |---|---|
//! | [`spaces`] | model spaces, points, Haar sampling, ε-nets, ball masses |
//! | [`actions`] | generating sets, the action catalog (a named registry) |
//! | [`warped`] | warped graphs, warped distance, controlled sets, box spaces |
//! | [`operators`] | sparse symmetric operators and Laplacian assembly |
//! | [`spectra`] | eigensolvers and the spectral experiments |
//! | [`invariant`] | invariant kernels, the section map and joint spectra |
//! | [`io`] | JSON / text export formats |

pub mod actions;
pub mod error;
pub mod invariant;
pub mod io;
pub mod operators;
pub mod spaces;
pub mod spectra;
pub mod warped;

pub use error::{Result, WarpError};

/// Version string stamped into every report.
pub const VERSION: &str = env!("CARGO_PKG_VERSION");
