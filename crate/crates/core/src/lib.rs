//! Density functional toolkit for one particle in one dimension.
//!
//! The crate is organised bottom-up:
//!
//! - [`grid`]: uniform mesh, trapezoidal quadrature and finite-difference stencils
//! - [`density`]: normalized densities, wavefunctions and log-derivatives
//! - [`functional`]: kinetic/total energy functionals, effective potential, Euler residual
//! - [`eigen`]: tridiagonal finite-difference Schrödinger eigensolver
//! - [`scf`]: nonlinear self-consistent solver and projected gradient-flow minimizer
//! - [`riccati`]: log-slope (Riccati) form of the Euler equation
//! - [`family`]: potentials `V_n` whose ground states are `∝ ρ₀ⁿ`, with energies `2n·E₀`
//! - [`analytic`]: closed forms for the box, harmonic oscillator and attractive delta well
//! - [`trial`]: seeded random trial densities for variational checks

pub mod analytic;
pub mod density;
pub mod eigen;
mod error;
pub mod family;
pub mod functional;
pub mod grid;
pub mod riccati;
pub mod scf;
pub mod trial;

pub use analytic::{AnalyticSystem, SystemKind};
pub use density::{Density, LogSlopeField, Wavefunction, DENSITY_FLOOR};
pub use eigen::DiscreteHamiltonian;
pub use error::{Error, Result};
pub use family::{CuspTerm, FamilyIndex, VerificationReport};
pub use functional::{DeltaTerm, PhysicalConstants, Potential};
pub use grid::{Boundary, Grid1D, MaskedField, RealField};
pub use scf::{ScfParams, Solution, SolveReport};
