//! Region-of-interest error metrics on complex images.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::math::ComplexGrid;

/// Reported PSNR for an exact reconstruction.
pub const PSNR_CAP_DB: f64 = 300.0;

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct RoiMask {
    height: usize,
    width: usize,
    inside: Vec<bool>,
    count: usize,
}

impl RoiMask {
    pub fn new(height: usize, width: usize, inside: Vec<bool>) -> Result<Self> {
        if inside.len() != height * width {
            return Err(Error::LengthMismatch {
                left: inside.len(),
                right: height * width,
            });
        }
        let count = inside.iter().filter(|&&b| b).count();
        if count == 0 {
            return Err(Error::BadInputs("ROI is empty".into()));
        }
        Ok(Self {
            height,
            width,
            inside,
            count,
        })
    }

    pub fn full(height: usize, width: usize) -> Self {
        Self {
            height,
            width,
            inside: vec![true; height * width],
            count: height * width,
        }
    }

    /// Pixels with `|x| > fraction * max |x|`.
    pub fn from_threshold(x: &ComplexGrid, fraction: f64) -> Result<Self> {
        let peak = x.max_magnitude();
        let inside = x.data().iter().map(|z| z.norm() > fraction * peak).collect();
        Self::new(x.height(), x.width(), inside)
    }

    pub fn shape(&self) -> (usize, usize) {
        (self.height, self.width)
    }

    pub fn count(&self) -> usize {
        self.count
    }

    pub fn inside(&self) -> &[bool] {
        &self.inside
    }
}

fn check(x: &ComplexGrid, xhat: &ComplexGrid, roi: &RoiMask) -> Result<()> {
    if x.shape() != xhat.shape() || x.shape() != roi.shape() {
        return Err(Error::ShapeMismatch(format!(
            "reference {:?}, estimate {:?}, roi {:?}",
            x.shape(),
            xhat.shape(),
            roi.shape()
        )));
    }
    Ok(())
}

/// Sum over the ROI of `|x - xhat|^2` and `|x|^2`, plus the peak `|x|`.
fn roi_sums(x: &ComplexGrid, xhat: &ComplexGrid, roi: &RoiMask) -> (f64, f64, f64) {
    let mut err = 0.0;
    let mut energy = 0.0;
    let mut peak: f64 = 0.0;
    for ((a, b), &inside) in x.data().iter().zip(xhat.data()).zip(&roi.inside) {
        if inside {
            err += (a - b).norm_sqr();
            energy += a.norm_sqr();
            peak = peak.max(a.norm());
        }
    }
    (err, energy, peak)
}

/// `||(x - xhat)|roi|| / ||x|roi||`.
pub fn rlne_roi(x: &ComplexGrid, xhat: &ComplexGrid, roi: &RoiMask) -> Result<f64> {
    check(x, xhat, roi)?;
    let (err, energy, _) = roi_sums(x, xhat, roi);
    if energy == 0.0 {
        return Err(Error::ZeroReference);
    }
    Ok((err / energy).sqrt())
}

/// `20 log10(max|x|roi| / rmse_roi)`, capped at [`PSNR_CAP_DB`].
pub fn psnr_roi(x: &ComplexGrid, xhat: &ComplexGrid, roi: &RoiMask) -> Result<f64> {
    check(x, xhat, roi)?;
    let (err, energy, peak) = roi_sums(x, xhat, roi);
    if energy == 0.0 {
        return Err(Error::ZeroReference);
    }
    let rmse = (err / roi.count as f64).sqrt();
    if rmse == 0.0 {
        return Ok(PSNR_CAP_DB);
    }
    Ok((20.0 * (peak / rmse).log10()).min(PSNR_CAP_DB))
}

#[cfg(test)]
mod tests {
    use super::*;
    use num_complex::Complex64;

    fn pair(a: [f64; 2], b: [f64; 2]) -> (ComplexGrid, ComplexGrid) {
        (ComplexGrid::from_real(1, 2, &a).unwrap(), ComplexGrid::from_real(1, 2, &b).unwrap())
    }

    #[test]
    fn two_pixel_examples() {
        let roi = RoiMask::full(1, 2);
        let (x, xhat) = pair([1.0, 1.0], [1.0, 0.0]);
        assert!((rlne_roi(&x, &xhat, &roi).unwrap() - 0.5f64.sqrt()).abs() < 1e-15);
        assert!((psnr_roi(&x, &xhat, &roi).unwrap() - 20.0 * 2f64.sqrt().log10()).abs() < 1e-12);
        assert_eq!(rlne_roi(&x, &x, &roi).unwrap(), 0.0);
        assert_eq!(psnr_roi(&x, &x, &roi).unwrap(), PSNR_CAP_DB);
        let zero = ComplexGrid::zeros(1, 2);
        assert_eq!(rlne_roi(&x, &zero, &roi).unwrap(), 1.0);
    }

    #[test]
    fn forty_db() {
        let x = ComplexGrid::from_fn(10, 10, |_, _| Complex64::new(1.0, 0.0));
        let xhat = ComplexGrid::from_fn(10, 10, |_, _| Complex64::new(1.0, 0.01));
        let psnr = psnr_roi(&x, &xhat, &RoiMask::full(10, 10)).unwrap();
        assert!((psnr - 40.0).abs() < 1e-9);
    }

    #[test]
    fn roi_restricts_and_errors() {
        let (x, xhat) = pair([1.0, 0.0], [0.5, 7.0]);
        let roi = RoiMask::new(1, 2, vec![true, false]).unwrap();
        assert!((rlne_roi(&x, &xhat, &roi).unwrap() - 0.5).abs() < 1e-15);
        let roi = RoiMask::new(1, 2, vec![false, true]).unwrap();
        assert!(matches!(rlne_roi(&x, &xhat, &roi), Err(Error::ZeroReference)));
        assert!(RoiMask::new(1, 2, vec![false, false]).is_err());
        assert!(rlne_roi(&x, &xhat, &RoiMask::full(2, 1)).is_err());
    }

    #[test]
    fn threshold_roi() {
        let x = ComplexGrid::from_real(1, 4, &[1.0, 0.04, 0.06, 0.0]).unwrap();
        let roi = RoiMask::from_threshold(&x, 0.05).unwrap();
        assert_eq!(roi.inside(), &[true, false, true, false]);
    }
}
