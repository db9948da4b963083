//! Open, driven Jaynes–Cummings system tuned to its two-photon resonance:
//! full master equation, the effective four-level reduction, conditioned
//! states, Wigner functions and stochastic trajectories.

pub mod conditioning;
pub mod error;
pub mod four_level;
pub mod lindblad;
pub mod ode;
pub mod phase_space;
pub mod quantum;
pub mod series;
pub mod trajectories;

pub use conditioning::{apply_jump, ConditionedState, EmissionChannel};
pub use error::{Error, Result};
pub use four_level::{EffectiveParams, FourLevelState, TransientInit};
pub use lindblad::{DetuningMode, SystemParams};
pub use phase_space::{FockCoefficients, GridSpec, WignerGrid};
pub use quantum::{Atom, CavityDensityMatrix, DensityMatrix, HilbertSpec, Operator, C64};
