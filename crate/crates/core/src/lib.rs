//! # diffusion-entropy
//!
//! Measures when class information is created during generative diffusion of
//! one-dimensional Gaussian mixtures.
//!
//! | Module | Contents |
//! |--------|----------|
//! | [`model`] | mixtures, noise schedules, binary partitions, time grids |
//! | [`mixture`] | closed-form diffused densities, posteriors and scores |
//! | [`entropy`] | quadrature `H(z|x_t)`, JS divergence, entropy rate, information transfer |
//! | [`tracker`] | ancestral sampling with online posterior tracking for any score model |
//! | [`bifurcation`] | fixed points of the reverse drift and their bifurcations |
//! | [`cli`] | experiment configuration and CSV/SVG output |
//!
//! Entropies are in bits. Step `t` runs from 1 (least noise) to `T`; the
//! normalized time `s = t/T` is 1 at the fully noised end.

pub mod bifurcation;
pub mod cli;
pub mod entropy;
pub mod error;
pub mod math;
pub mod mixture;
pub mod model;
pub mod tracker;

pub use error::{Error, Result};
pub use mixture::Label;
pub use model::{linear_schedule, make_partition, MixtureModel, NoiseSchedule, Partition, TimeGrid};
