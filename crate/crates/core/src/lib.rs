//! Distinguishability tests for photons in linear multimode interferometers.
//!
//! Two hypotheses are compared throughout: photons entering an interferometer
//! are either fully indistinguishable (output statistics `Q`, governed by
//! permanents of complex submatrices) or fully distinguishable (`P`, classical
//! routing). The crate provides
//!
//! * interferometer constructors ([`matrices`]): Sylvester, Fourier, notable
//!   small designs, embeddings, Haar-random unitaries and the layered
//!   log-depth ("fast") architecture,
//! * exact output statistics ([`interference`]) and the total variation
//!   distance between them ([`distance`]),
//! * searches for high-distance interferometers ([`search`]),
//! * Bayesian and likelihood-ratio validation of event data ([`bayes`]),
//! * reconstruction of fast-architecture devices from synthetic single-photon
//!   and two-photon data ([`tomography`]),
//! * scattershot event simulation and analysis ([`scattershot`]).
//!
//! The crate is `no_std` with `alloc`. All transcendental functions go
//! through `libm`, so numeric output does not depend on the `std` feature.
//! The `parallel` feature fans out Monte Carlo trials and ensemble samples
//! with rayon; every reduction happens in index order, so results are
//! bitwise identical for any thread count.

#![cfg_attr(not(any(feature = "std", test)), no_std)]

extern crate alloc;

pub mod bayes;
pub mod distance;
mod error;
pub mod interference;
pub mod math;
pub mod matrices;
pub mod matrix;
pub mod optimize;
mod par;
pub mod permanent;
pub mod rng;
pub mod scattershot;
pub mod search;
pub mod tomography;

pub use error::{Error, Result};
pub use interference::{CollisionPolicy, Distribution, ModeConfig, OutcomeLabel};
pub use matrix::{ComplexMatrix, RealMatrix, UnitaryMatrix};
pub use num_complex::Complex64;
