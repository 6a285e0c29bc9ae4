//! Long-time asymptotic expansions of decaying solutions of
//! `y' = -Ay + G(y) + f(t)`, with numerical verification of the remainder
//! decay orders.

pub mod engine;
pub mod error;
pub mod exponents;
pub mod genpoly;
pub mod io;
pub mod linalg;
pub mod nonlinear;
pub mod numeric;
pub mod scalar;
pub mod spectral;

pub use engine::{
    expand_double_indexed, Base, ConstantSource, DoubleForcing, DoubleIndexedExpansion, DoubleIndexedSpec, Engine,
    Expansion, ExpansionTerm, ForcingTerm, ProblemSpec, Residual, ResidualTerm, ResonanceConstants, ResonanceNote,
};
pub use error::{Error, Result};
pub use exponents::{ExponentLattice, Regime};
pub use genpoly::{GenPoly, Monomial};
pub use linalg::Matrix;
pub use nonlinear::{HomogeneousTerm, MultiForm, QuadraticBound};
pub use numeric::Trajectory;
pub use scalar::{Rational, Scalar};
pub use spectral::SpectralDecomposition;
