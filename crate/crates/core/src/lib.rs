//! Numerical laboratory for extensive chaos in 1-D parabolic PDEs.
//!
//! The crate is organized around the pipeline
//! scales → simulate → verify → entropy:
//!
//! * [`model`] — PDE instance descriptions and derived physical scales.
//! * [`kernels`] — semigroup convolution kernels by quadrature and the
//!   numerical verification of their envelope bounds.
//! * [`pde`] — pseudo-spectral simulator for the complex Ginzburg-Landau
//!   equation on a periodic 1-D grid, with twin-trajectory support.
//! * [`sampling`] — discrete sup-norms, cardinal-series reconstruction of
//!   band-limited functions and the twin-trajectory sampling experiments.
//! * [`entropy`] — correlation-sum estimator with fast pair counting, plus
//!   exact separated-set and covering counters.
//! * [`config`] / [`snapshot`] — run configuration and the binary snapshot
//!   format shared with the command-line driver.

pub mod config;
pub mod entropy;
pub mod error;
pub mod kernels;
pub mod linalg;
pub mod model;
pub mod pde;
pub(crate) mod quadrature;
pub mod sampling;
pub mod snapshot;
pub mod spectral;
pub mod surrogate;

pub use error::{Error, Result};
pub use model::{compute_d_star, compute_m_star, compute_nu_star, derive_scales};
pub use model::{ModelSpec, Nonlinearity, ScaleSet};
