//! Zeta-regularized determinants of Laplace-type operators on flat separable
//! geometries, together with the machinery needed to check the Mayer-Vietoris
//! gluing formula `Det(A) = c * Det(A_B) * Det(R)`:
//!
//! * [`spectral_models`]: circle, interval and cut-torus spectra with Weyl-law
//!   descriptors.
//! * [`zeta_engine`]: spectral zeta functions, their continuation to `s = 0`,
//!   log-determinants for real and complex spectra, heat traces.
//! * [`dtn`]: Poisson and Dirichlet-to-Neumann operators mode by mode,
//!   including the triangular `d x d` system and its conjugating matrix.
//! * [`symbol_calculus`]: exact resolvent-parametrix recursion for scalar
//!   symbols and the contour-collapsed integrals that produce `pi_0`.
//! * [`asymptotic_fit`]: large-parameter expansions of log-determinant families.
//! * [`gluing`]: end-to-end gluing reports and the derivative identities.
//!
//! Inner loops (eigenvalue sums, mode sums, grid sampling) run on rayon when the
//! `parallel` feature is enabled and fall back to plain iterators otherwise.
//! Results do not depend on the execution mode.

pub mod asymptotic_fit;
pub mod dtn;
pub mod error;
pub mod gluing;
pub mod lsq;
pub mod par;
pub mod quadrature;
pub mod special;
pub mod spectral_models;
pub mod symbol_calculus;
pub mod weyl;
pub mod zeta_engine;

pub use error::{Error, Result};
pub use num_complex::Complex64;
pub use num_rational::Rational64;
