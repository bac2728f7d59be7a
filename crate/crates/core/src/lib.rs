//! Allocation-free building blocks for complex geometrical optics (CGO)
//! numerics: real 3-vectors and orthonormal frames, the smooth cutoff
//! profile behind every dyadic projection, the conjugated-Laplacian symbol
//! and its characteristic circle, the complex-frequency schedule used by
//! the reconstruction driver, Haar sampling on O(3), and small statistics
//! helpers for Monte-Carlo estimators.
//!
//! Everything here is `no_std`; grid fields, FFTs and file formats live in
//! the `cgokit` crate.
#![no_std]
#![deny(unsafe_code)]

extern crate alloc;

pub mod cutoff;
pub mod error;
pub mod haar;
pub mod projection;
pub mod schedule;
pub mod stats;
pub mod vec3;
pub mod zeta;

pub use cutoff::CutoffProfile;
pub use error::CoreError;
pub use num_complex::Complex64;
pub use projection::{is_dyadic, Projection};
pub use schedule::{ScheduleVariant, ZetaSchedule};
pub use vec3::{Frame, Vec3};
pub use zeta::{CharSetGeometry, ZetaParams};
