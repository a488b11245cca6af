use num_complex::Complex64;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Dense row-major grid of complex samples. Holds images as well as k-space.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ComplexGrid {
    height: usize,
    width: usize,
    data: Vec<Complex64>,
}

impl ComplexGrid {
    pub fn new(height: usize, width: usize, data: Vec<Complex64>) -> Result<Self> {
        if height == 0 || width == 0 {
            return Err(Error::BadDims(format!("{height}x{width}")));
        }
        if data.len() != height * width {
            return Err(Error::ShapeMismatch(format!(
                "{} samples for a {height}x{width} grid",
                data.len()
            )));
        }
        if data.iter().any(|z| !z.re.is_finite() || !z.im.is_finite()) {
            return Err(Error::NonFinite("grid data"));
        }
        Ok(Self { height, width, data })
    }

    pub fn zeros(height: usize, width: usize) -> Self {
        assert!(height > 0 && width > 0, "empty grid");
        Self {
            height,
            width,
            data: vec![Complex64::new(0.0, 0.0); height * width],
        }
    }

    pub fn from_fn(height: usize, width: usize, mut f: impl FnMut(usize, usize) -> Complex64) -> Self {
        let mut grid = Self::zeros(height, width);
        for r in 0..height {
            for c in 0..width {
                grid.data[r * width + c] = f(r, c);
            }
        }
        grid
    }

    /// Builds from real values, imaginary part zero.
    pub fn from_real(height: usize, width: usize, values: &[f64]) -> Result<Self> {
        Self::new(
            height,
            width,
            values.iter().map(|&re| Complex64::new(re, 0.0)).collect(),
        )
    }

    pub(crate) fn from_raw(height: usize, width: usize, data: Vec<Complex64>) -> Self {
        debug_assert_eq!(data.len(), height * width);
        Self { height, width, data }
    }

    pub fn height(&self) -> usize {
        self.height
    }

    pub fn width(&self) -> usize {
        self.width
    }

    pub fn len(&self) -> usize {
        self.data.len()
    }

    pub fn is_empty(&self) -> bool {
        self.data.is_empty()
    }

    pub fn shape(&self) -> (usize, usize) {
        (self.height, self.width)
    }

    pub fn data(&self) -> &[Complex64] {
        &self.data
    }

    pub fn data_mut(&mut self) -> &mut [Complex64] {
        &mut self.data
    }

    pub fn into_data(self) -> Vec<Complex64> {
        self.data
    }

    pub fn get(&self, row: usize, col: usize) -> Complex64 {
        self.data[row * self.width + col]
    }

    pub fn set(&mut self, row: usize, col: usize, value: Complex64) {
        self.data[row * self.width + col] = value;
    }

    pub fn is_finite(&self) -> bool {
        self.data.iter().all(|z| z.re.is_finite() && z.im.is_finite())
    }

    pub fn norm(&self) -> f64 {
        norm(&self.data)
    }

    /// `<self, other> = sum conj(self_i) * other_i`.
    pub fn inner(&self, other: &ComplexGrid) -> Complex64 {
        inner(&self.data, &other.data)
    }

    pub fn scale(&self, factor: f64) -> ComplexGrid {
        Self::from_raw(
            self.height,
            self.width,
            self.data.iter().map(|z| z * factor).collect(),
        )
    }

    pub fn sub(&self, other: &ComplexGrid) -> ComplexGrid {
        assert_eq!(self.shape(), other.shape());
        Self::from_raw(
            self.height,
            self.width,
            self.data.iter().zip(&other.data).map(|(a, b)| a - b).collect(),
        )
    }

    pub fn magnitudes(&self) -> Vec<f64> {
        self.data.iter().map(|z| z.norm()).collect()
    }

    pub fn max_magnitude(&self) -> f64 {
        self.data.iter().map(|z| z.norm()).fold(0.0, f64::max)
    }
}

pub fn norm(values: &[Complex64]) -> f64 {
    values.iter().map(|z| z.norm_sqr()).sum::<f64>().sqrt()
}

pub fn inner(a: &[Complex64], b: &[Complex64]) -> Complex64 {
    assert_eq!(a.len(), b.len());
    a.iter().zip(b).map(|(x, y)| x.conj() * y).sum()
}
