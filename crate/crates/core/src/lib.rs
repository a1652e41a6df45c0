//! Heat-kernel solutions of `u_t = Δu` for measure-valued initial data
//! growing at most like `e^{ε|x|²}`.
//!
//! The crate evaluates `u(x, t) = (4πt)^{-N/2} ∫ e^{-|x-y|²/4t} dμ(y)`,
//! decides pointwise blowup at the maximal time `T = 1/(4ε₀)`, builds data
//! with prescribed regular sets or oscillating traces, and solves for
//! solutions with a prescribed real-analytic trace at the origin.

pub mod blowup;
pub mod error;
pub mod kernel;
pub mod longtime;
pub mod measures;
pub mod quad;
pub mod special;
pub mod trace;
mod yspace;

pub use error::{HgError, Result};
pub use quad::QuadratureConfig;

pub const VERSION: &str = env!("CARGO_PKG_VERSION");
