//! Building blocks of a location-specific TV white space database.
//!
//! Crowd-sensed detector reports ([`sensing`]) are aggregated into a
//! partially observed received-power matrix, completed by nuclear-norm
//! minimization ([`completion`]), thresholded and fed to a kernel SVM
//! that learns the coverage boundary ([`boundary`]). The boundary then
//! drives the per-grid maximum permitted emission power ([`reuse`]).
//! [`scenario`] provides the simulated ground truth and a brute-force
//! reference for the last step.

pub mod boundary;
pub mod completion;
pub mod error;
pub mod grid;
pub mod matrix;
pub mod radio;
pub mod reuse;
pub mod scenario;
pub mod sensing;

pub use error::{Error, Result};
