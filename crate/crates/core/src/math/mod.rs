//! Complex grids, unitary FFTs and small dense linear algebra.

pub mod fft;
pub mod grid;
pub mod linalg;
pub mod trig;

pub use fft::{fft2, fft2_with, ifft2, ifft2_with, FftPath};
pub use grid::ComplexGrid;
pub use linalg::{spectral_norm_power, svd_small, SmallMatrix, Svd};
