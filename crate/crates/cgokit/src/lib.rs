//! Spectral numerics for complex geometrical optics (CGO) solutions of the
//! magnetic Schrödinger operator on a periodic 3-D grid.

pub mod amplitude;
pub mod averaging;
pub mod cgosolve;
pub mod cli;
pub mod config;
pub mod conjlap;
pub mod dbar;
pub mod fft;
pub mod field;
pub mod io;
pub mod multipliers;
pub mod potentials;
pub mod recon;
