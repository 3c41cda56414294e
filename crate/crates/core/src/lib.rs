//! Sampling in quaternion reproducing-kernel Hilbert spaces.
//!
//! Quaternion arithmetic, left-linear algebra over the quaternions, the
//! band-limited kernels, Nystrom discretization of the band-limiting
//! operator and the resulting prolate spheroidal quaternion wave signals
//! (PSQWS), and sampling/reconstruction on top of them.

#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod error;
pub mod io;
pub mod kernels;
pub mod nystrom;
pub mod qlinalg;
pub mod quaternion;
pub mod sampling;

pub use error::{Error, Result};
pub use qlinalg::{EigenOptions, QMatrix, QVector, SpectralDecomposition};
pub use quaternion::Quaternion;
