//! Multistatic OFDM passive radar: resource grids, bistatic scenes, a
//! frequency-domain channel, delay-Doppler processing, CFAR detection and
//! ellipse-based localization, plus the scenario runner behind the `cpcl`
//! command-line tool.

#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod channel;
pub mod detection;
pub mod dft;
pub mod geometry;
pub mod grid;
pub mod localization;
pub mod mapfile;
pub mod matrix;
pub mod receiver;
pub mod scenario;

pub use num_complex::Complex64;

/// Speed of light in vacuum, m/s.
pub const SPEED_OF_LIGHT: f64 = 299_792_458.0;
