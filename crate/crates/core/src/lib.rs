//! Stochastic flows generated by SDEs with normal reflection at the boundary.
//!
//! The crate simulates the flow `x ↦ φ_t(x)` of
//!
//! ```text
//! dφ_t(x) = a_0(φ_t(x)) dt + Σ_k a_k(φ_t(x)) dw_k(t) + n̄(φ_t(x)) ξ(dt, x)
//! ```
//!
//! on the half-space `R^{d-1} × [0, ∞)` or on the closed unit disk, where the
//! local time `ξ(·, x)` only grows while the particle sits on the boundary.
//! Every particle of an ensemble is driven by the *same* noise realization, so
//! the result is a sample of the flow map itself rather than of independent
//! paths.
//!
//! Modules, bottom-up:
//!
//! * [`domain`], [`coeffs`], [`grid`], [`noise`]: geometry, coefficient
//!   fields, the uniform time grid and reproducible Wiener increments.
//! * [`skorokhod`]: the exact one-dimensional Skorokhod map and per-step
//!   projection reflections with local-time accounting.
//! * [`flow`]: the coupled ensemble, hitting times, coalescence and the
//!   interior/boundary classification of image points.
//! * [`derivative`]: the Jacobian flow with projection kills at boundary
//!   visits, the jump-free linear flow, excursions and rank checks.
//! * [`transport`]: pushforward of weighted particle measures, the
//!   absolutely continuous / singular split, histograms and box counting.
//!
//! The crate is `no_std` and only needs `alloc`.

#![no_std]

extern crate alloc;

pub mod coeffs;
pub mod derivative;
pub mod domain;
pub mod error;
pub mod flow;
pub mod grid;
pub mod linalg;
pub mod noise;
pub mod points;
pub mod skorokhod;
pub mod sum;
pub mod transport;

pub use coeffs::{CoefficientField, Monomial, Polynomial, PolynomialField};
pub use derivative::{DerivativeTrack, ExcursionDecomposition};
pub use domain::DomainSpec;
pub use error::{Error, Result};
pub use flow::{FlowResult, HittingTime, Recording};
pub use grid::TimeGrid;
pub use linalg::Matrix;
pub use noise::NoiseRealization;
pub use points::PointSet;
pub use skorokhod::ReflectedStep;
pub use transport::{ParticleMeasure, TransportDecomposition};
