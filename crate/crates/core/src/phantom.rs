//! Synthetic test images.

use std::f64::consts::PI;

use num_complex::Complex64;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::math::ComplexGrid;

#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "SCREAMING_SNAKE_CASE")]
pub enum PhantomKind {
    #[default]
    SheppLogan,
    EllipseSuite,
    CheckerSmooth,
}

#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "SCREAMING_SNAKE_CASE")]
pub enum PhaseMode {
    #[default]
    Zero,
    SmoothRandom,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct PhantomSpec {
    pub kind: PhantomKind,
    pub height: usize,
    pub width: usize,
    pub phase_mode: PhaseMode,
    pub seed: u64,
}

impl Default for PhantomSpec {
    fn default() -> Self {
        Self {
            kind: PhantomKind::SheppLogan,
            height: 64,
            width: 64,
            phase_mode: PhaseMode::Zero,
            seed: 0,
        }
    }
}

/// `(intensity, semi-axis a, semi-axis b, x0, y0, angle in degrees)`.
pub type Ellipse = (f64, f64, f64, f64, f64, f64);

/// Modified Shepp-Logan head (Toft's higher-contrast intensities).
pub const SHEPP_LOGAN: [Ellipse; 10] = [
    (1.0, 0.69, 0.92, 0.0, 0.0, 0.0),
    (-0.8, 0.6624, 0.874, 0.0, -0.0184, 0.0),
    (-0.2, 0.11, 0.31, 0.22, 0.0, -18.0),
    (-0.2, 0.16, 0.41, -0.22, 0.0, 18.0),
    (0.1, 0.21, 0.25, 0.0, 0.35, 0.0),
    (0.1, 0.046, 0.046, 0.0, 0.1, 0.0),
    (0.1, 0.046, 0.046, 0.0, -0.1, 0.0),
    (0.1, 0.046, 0.023, -0.08, -0.605, 0.0),
    (0.1, 0.023, 0.023, 0.0, -0.606, 0.0),
    (0.1, 0.023, 0.046, 0.06, -0.605, 0.0),
];

/// Center of pixel `(row, col)` on `[-1, 1]^2`, `y` pointing up.
pub fn pixel_center(row: usize, col: usize, height: usize, width: usize) -> (f64, f64) {
    let x = (col as f64 + 0.5) / width as f64 * 2.0 - 1.0;
    let y = 1.0 - (row as f64 + 0.5) / height as f64 * 2.0;
    (x, y)
}

pub fn ellipse_sum(ellipses: &[Ellipse], x: f64, y: f64) -> f64 {
    ellipses
        .iter()
        .map(|&(rho, a, b, x0, y0, deg)| {
            let (s, c) = deg.to_radians().sin_cos();
            let (dx, dy) = (x - x0, y - y0);
            let u = dx * c + dy * s;
            let v = -dx * s + dy * c;
            if (u / a).powi(2) + (v / b).powi(2) <= 1.0 {
                rho
            } else {
                0.0
            }
        })
        .sum()
}

fn random_ellipses(rng: &mut ChaCha8Rng) -> Vec<Ellipse> {
    let mut out = vec![(0.6, 0.8, 0.85, 0.0, 0.0, 0.0)];
    for _ in 0..8 {
        let a = rng.random_range(0.05..0.3);
        let b = rng.random_range(0.05..0.3);
        let x0 = rng.random_range(-0.45..0.45);
        let y0 = rng.random_range(-0.45..0.45);
        out.push((rng.random_range(0.05..0.4), a, b, x0, y0, rng.random_range(0.0..180.0)));
    }
    out
}

fn magnitude(spec: &PhantomSpec) -> Vec<f64> {
    let (h, w) = (spec.height, spec.width);
    let mut rng = ChaCha8Rng::seed_from_u64(spec.seed);
    let ellipses = match spec.kind {
        PhantomKind::SheppLogan => SHEPP_LOGAN.to_vec(),
        PhantomKind::EllipseSuite => random_ellipses(&mut rng),
        PhantomKind::CheckerSmooth => Vec::new(),
    };
    let mut values = Vec::with_capacity(h * w);
    for r in 0..h {
        for c in 0..w {
            let (x, y) = pixel_center(r, c, h, w);
            let value = match spec.kind {
                PhantomKind::CheckerSmooth => {
                    // Four cells per axis with tanh-softened edges.
                    let s = (2.0 * PI * x).sin() * (2.0 * PI * y).sin();
                    0.5 + 0.5 * (4.0 * s).tanh() / 4f64.tanh()
                }
                _ => ellipse_sum(&ellipses, x, y),
            };
            values.push(value.max(0.0));
        }
    }
    let peak = values.iter().cloned().fold(0.0, f64::max);
    if peak > 0.0 {
        values.iter_mut().for_each(|v| *v /= peak);
    }
    values
}

/// Second-order polynomial phase with random coefficients.
fn smooth_phase(spec: &PhantomSpec) -> Vec<f64> {
    let mut rng = ChaCha8Rng::seed_from_u64(spec.seed ^ 0x9E37_79B9_7F4A_7C15);
    let coef: Vec<f64> = (0..6).map(|_| rng.random_range(-PI / 2.0..PI / 2.0)).collect();
    let mut out = Vec::with_capacity(spec.height * spec.width);
    for r in 0..spec.height {
        for c in 0..spec.width {
            let (x, y) = pixel_center(r, c, spec.height, spec.width);
            let terms = [1.0, x, y, x * x, x * y, y * y];
            out.push(terms.iter().zip(&coef).map(|(t, k)| t * k).sum());
        }
    }
    out
}

pub fn gen_phantom(spec: &PhantomSpec) -> Result<ComplexGrid> {
    if spec.height == 0 || spec.width == 0 {
        return Err(Error::BadDims(format!("{}x{}", spec.height, spec.width)));
    }
    let mag = magnitude(spec);
    let data: Vec<Complex64> = match spec.phase_mode {
        PhaseMode::Zero => mag.iter().map(|&m| Complex64::new(m, 0.0)).collect(),
        PhaseMode::SmoothRandom => mag
            .iter()
            .zip(smooth_phase(spec))
            .map(|(&m, phi)| Complex64::from_polar(m, phi))
            .collect(),
    };
    ComplexGrid::new(spec.height, spec.width, data)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn checker_zero_phase_is_real() {
        let spec = PhantomSpec {
            kind: PhantomKind::CheckerSmooth,
            height: 8,
            width: 8,
            ..Default::default()
        };
        let img = gen_phantom(&spec).unwrap();
        assert!(img.data().iter().all(|z| z.im == 0.0));
    }

    #[test]
    fn shepp_logan_range() {
        let img = gen_phantom(&PhantomSpec::default()).unwrap();
        let mags = img.magnitudes();
        assert_eq!(mags.iter().cloned().fold(0.0, f64::max), 1.0);
        assert!(mags.iter().all(|&m| m >= 0.0));
    }

    #[test]
    fn smooth_phase_keeps_magnitude() {
        let base = PhantomSpec::default();
        let zero = gen_phantom(&base).unwrap();
        let phased = gen_phantom(&PhantomSpec {
            phase_mode: PhaseMode::SmoothRandom,
            ..base
        })
        .unwrap();
        for (a, b) in zero.data().iter().zip(phased.data()) {
            assert!((a.norm() - b.norm()).abs() < 1e-14);
        }
        assert!(phased.data().iter().any(|z| z.im.abs() > 1e-3));
    }

    #[test]
    fn suite_is_seeded() {
        let spec = PhantomSpec {
            kind: PhantomKind::EllipseSuite,
            seed: 4,
            ..Default::default()
        };
        assert_eq!(gen_phantom(&spec).unwrap(), gen_phantom(&spec).unwrap());
        let other = PhantomSpec { seed: 5, ..spec.clone() };
        assert_ne!(gen_phantom(&spec).unwrap(), gen_phantom(&other).unwrap());
        assert!(gen_phantom(&PhantomSpec { height: 0, ..spec }).is_err());
    }
}
