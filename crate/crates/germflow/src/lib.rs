//! germflow: a numerical laboratory for watching classical behaviour emerge
//! from finite quantum systems — overlap decay of coherent-state families,
//! quantization residuals on the sphere, and mean-field dynamical fidelities.

pub mod cli;
pub mod error;
pub mod germs;
pub mod meanfield;
pub mod numerics;
pub mod projective;
pub mod tpspace;

pub use error::{Error, Result};
pub use germs::{
    GermDescriptor, GermFamily, GermModification, PhasePoint, QuadratureRule,
    SemiclassicalSchedule,
};
pub use meanfield::{CollectiveAlgebra, OccupationBasis, PolynomialSpec, SymmetricState, Trajectory};
pub use numerics::{CMatrix, CVector, HermitianMatrix};
pub use projective::{HbarValue, PureState};
pub use tpspace::{PureStateCombination, SpectralForm};
