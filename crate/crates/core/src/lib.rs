//! Discrete quantum stop times on a truncated, time-sliced Boson Fock space.
//!
//! The crate realizes finite quantum stop times as finitely supported
//! projection-valued measures on a grid of time slots, together with the
//! objects they stop: the conditional-vacuum projection `E_S`, the shift
//! `Γ_S`, the CCR flow `σ_S` and `p`-adapted isometric cocycles `V_S`.
//! Every operator identity is exact on the grid up to floating-point rounding.

pub mod cocycle;
pub mod error;
pub mod fock;
pub mod linalg;
pub mod random;
pub mod secondquant;
pub mod stoptime;
pub mod stopped;

pub use cocycle::{Adaptedness, Cocycle, StoppedCocycle};
pub use error::{Error, Result};
pub use fock::{exponential_vector, FockOperator, FockVector, SliceConfig, StepFunction, Tail};
pub use linalg::{CMatrix, CVector, Deviation, C64};
pub use secondquant::{ccr_flow, conditional_vacuum, p_tail_projection, shift, DomainOperator, OneParticleProjection};
pub use stoptime::{Atom, DiscreteStopTime};
pub use stopped::{Factorization, StoppedBundle};

/// Tolerance for projection, isometry and operator-identity assertions.
pub const TOL: f64 = 1e-9;

/// Tolerance for algebraically exact operations (reshapes, partition refinement).
pub const EXACT_TOL: f64 = 1e-12;
