//! Numerical toolkit for the damped Euler-Fourier system on periodic boxes:
//! spectral substrate, Littlewood-Paley norms, linear symbol analysis, a
//! pseudo-spectral nonlinear solver and decay/energy diagnostics.

pub mod decay;
pub mod error;
pub mod expm;
pub mod linear;
pub mod littlewood_paley;
pub mod lyapunov;
pub mod random_fields;
pub mod rates;
pub mod solver;
pub mod spectral;
pub mod validator;

pub use error::{Error, Result};
