//! Undersampled Cartesian acquisition: variable-density masks, the measurement
//! operator `A = M F` and its adjoint, complex AWGN, and k-space radial
//! distances.
//!
//! Mask positions live in the *centered* k-space layout: position `(r, c)`
//! holds frequency `(r - H/2, c - W/2)` (integer division), so DC sits at
//! `(H/2, W/2)` and "distance from the center" is literal on the stored grid.
//! Measurements are ordered row-major over selected positions; that index is
//! shared by measurements, weights and radial distances.

use num_complex::Complex64;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Normal};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::math::{fft2, ifft2, ComplexGrid};

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub enum MaskPattern {
    #[serde(rename = "VD2D")]
    Vd2d,
    #[serde(rename = "VD1D_PE")]
    Vd1dPe,
    #[serde(rename = "FULL")]
    Full,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SamplingMask {
    pub height: usize,
    pub width: usize,
    pub selected: Vec<bool>,
    pub pattern: MaskPattern,
    pub acceleration_factor: f64,
    pub center_fraction: f64,
    pub seed: u64,
}

impl SamplingMask {
    pub fn full(height: usize, width: usize) -> Self {
        Self {
            height,
            width,
            selected: vec![true; height * width],
            pattern: MaskPattern::Full,
            acceleration_factor: 1.0,
            center_fraction: 1.0,
            seed: 0,
        }
    }

    /// Wraps an explicit selection. Pattern is inferred: all-true is FULL,
    /// column-complete selections are VD1D_PE, anything else VD2D.
    pub fn from_selection(height: usize, width: usize, selected: Vec<bool>) -> Result<Self> {
        if height == 0 || width == 0 {
            return Err(Error::BadDims(format!("{height}x{width}")));
        }
        if selected.len() != height * width {
            return Err(Error::ShapeMismatch(format!(
                "{} flags for {height}x{width}",
                selected.len()
            )));
        }
        let count = selected.iter().filter(|&&s| s).count();
        if count == 0 {
            return Err(Error::BudgetInfeasible("mask selects nothing".into()));
        }
        let pattern = if count == selected.len() {
            MaskPattern::Full
        } else if (0..width).all(|c| {
            let first = selected[c];
            (0..height).all(|r| selected[r * width + c] == first)
        }) {
            MaskPattern::Vd1dPe
        } else {
            MaskPattern::Vd2d
        };
        Ok(Self {
            height,
            width,
            acceleration_factor: selected.len() as f64 / count as f64,
            selected,
            pattern,
            center_fraction: 0.0,
            seed: 0,
        })
    }

    pub fn shape(&self) -> (usize, usize) {
        (self.height, self.width)
    }

    pub fn count(&self) -> usize {
        self.selected.iter().filter(|&&s| s).count()
    }

    pub fn achieved_af(&self) -> f64 {
        self.selected.len() as f64 / self.count() as f64
    }

    pub fn is_selected(&self, row: usize, col: usize) -> bool {
        self.selected[row * self.width + col]
    }

    /// Row-major `(row, col)` of every acquired sample.
    pub fn positions(&self) -> Vec<(usize, usize)> {
        self.selected
            .iter()
            .enumerate()
            .filter(|(_, &s)| s)
            .map(|(i, _)| (i / self.width, i % self.width))
            .collect()
    }

    pub fn center(&self) -> (usize, usize) {
        (self.height / 2, self.width / 2)
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct MeasurementSet {
    pub mask: SamplingMask,
    pub values: Vec<Complex64>,
    pub noise_sigma: f64,
}

impl MeasurementSet {
    pub fn new(mask: SamplingMask, values: Vec<Complex64>) -> Result<Self> {
        if values.len() != mask.count() {
            return Err(Error::ShapeMismatch(format!(
                "{} values for {} acquired samples",
                values.len(),
                mask.count()
            )));
        }
        if values.iter().any(|z| !z.re.is_finite() || !z.im.is_finite()) {
            return Err(Error::NonFinite("measurements"));
        }
        Ok(Self {
            mask,
            values,
            noise_sigma: 0.0,
        })
    }

    pub fn len(&self) -> usize {
        self.values.len()
    }

    pub fn is_empty(&self) -> bool {
        self.values.is_empty()
    }

    pub fn norm(&self) -> f64 {
        crate::math::grid::norm(&self.values)
    }

    pub fn max_abs(&self) -> f64 {
        self.values.iter().map(|z| z.norm()).fold(0.0, f64::max)
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct RadialDistanceMap {
    pub distances: Vec<f64>,
    pub max_distance: f64,
}

/// `A = M F` with the bin lookup precomputed; used by the fitting loop to
/// avoid rebuilding index tables every iteration.
#[derive(Clone, Debug)]
pub struct MeasurementOperator {
    height: usize,
    width: usize,
    bins: Vec<usize>,
}

impl MeasurementOperator {
    pub fn new(mask: &SamplingMask) -> Self {
        let (h, w) = mask.shape();
        let (cr, cc) = mask.center();
        let bins = mask
            .positions()
            .into_iter()
            .map(|(r, c)| ((r + h - cr) % h) * w + (c + w - cc) % w)
            .collect();
        Self {
            height: h,
            width: w,
            bins,
        }
    }

    pub fn shape(&self) -> (usize, usize) {
        (self.height, self.width)
    }

    pub fn len(&self) -> usize {
        self.bins.len()
    }

    pub fn is_empty(&self) -> bool {
        self.bins.is_empty()
    }

    /// Index into the (unshifted) `fft2` output for each measurement.
    pub fn bins(&self) -> &[usize] {
        &self.bins
    }

    pub fn forward(&self, x: &ComplexGrid) -> Result<Vec<Complex64>> {
        self.check(x.shape())?;
        let k = fft2(x)?;
        Ok(self.bins.iter().map(|&b| k.data()[b]).collect())
    }

    pub fn adjoint(&self, values: &[Complex64]) -> Result<ComplexGrid> {
        if values.len() != self.bins.len() {
            return Err(Error::ShapeMismatch(format!(
                "{} values for {} acquired samples",
                values.len(),
                self.bins.len()
            )));
        }
        let mut k = ComplexGrid::zeros(self.height, self.width);
        for (&b, &v) in self.bins.iter().zip(values) {
            k.data_mut()[b] = v;
        }
        ifft2(&k)
    }

    fn check(&self, shape: (usize, usize)) -> Result<()> {
        if shape != (self.height, self.width) {
            return Err(Error::ShapeMismatch(format!(
                "image {:?} vs mask {:?}",
                shape,
                (self.height, self.width)
            )));
        }
        Ok(())
    }
}

pub fn apply_forward(mask: &SamplingMask, x: &ComplexGrid) -> Result<MeasurementSet> {
    let values = MeasurementOperator::new(mask).forward(x)?;
    MeasurementSet::new(mask.clone(), values)
}

pub fn apply_adjoint(mask: &SamplingMask, y: &MeasurementSet) -> Result<ComplexGrid> {
    if y.mask.selected != mask.selected || y.mask.shape() != mask.shape() {
        return Err(Error::ShapeMismatch("measurements belong to a different mask".into()));
    }
    MeasurementOperator::new(mask).adjoint(&y.values)
}

/// Adds independent N(0, sigma^2) noise to the real and imaginary part of
/// every measurement.
pub fn add_awgn(y: &MeasurementSet, sigma: f64, seed: u64) -> MeasurementSet {
    assert!(sigma >= 0.0 && sigma.is_finite(), "sigma must be >= 0");
    let mut out = y.clone();
    out.noise_sigma = sigma;
    if sigma == 0.0 {
        return out;
    }
    let normal = Normal::new(0.0, sigma).expect("valid sigma");
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    for z in &mut out.values {
        let re = normal.sample(&mut rng);
        let im = normal.sample(&mut rng);
        *z += Complex64::new(re, im);
    }
    out
}

pub fn radial_distances(mask: &SamplingMask) -> RadialDistanceMap {
    let (cr, cc) = mask.center();
    let distances: Vec<f64> = mask
        .positions()
        .into_iter()
        .map(|(r, c)| {
            let dr = r as f64 - cr as f64;
            let dc = c as f64 - cc as f64;
            (dr * dr + dc * dc).sqrt()
        })
        .collect();
    let max_distance = distances.iter().copied().fold(0.0, f64::max);
    RadialDistanceMap {
        distances,
        max_distance,
    }
}

pub fn gen_vd_mask(
    height: usize,
    width: usize,
    pattern: MaskPattern,
    acceleration_factor: f64,
    center_fraction: f64,
    seed: u64,
) -> Result<SamplingMask> {
    if height == 0 || width == 0 {
        return Err(Error::BadDims(format!("{height}x{width}")));
    }
    if !(acceleration_factor >= 1.0) || !acceleration_factor.is_finite() {
        return Err(Error::BudgetInfeasible(format!(
            "acceleration factor {acceleration_factor} < 1"
        )));
    }
    if !(0.0..=1.0).contains(&center_fraction) {
        return Err(Error::BudgetInfeasible(format!(
            "center fraction {center_fraction} outside [0, 1]"
        )));
    }
    let n = height * width;
    let mut mask = SamplingMask {
        height,
        width,
        selected: vec![true; n],
        pattern,
        acceleration_factor,
        center_fraction,
        seed,
    };
    if pattern == MaskPattern::Full || acceleration_factor == 1.0 {
        return Ok(mask);
    }
    if center_fraction > 1.0 / acceleration_factor {
        return Err(Error::BudgetInfeasible(format!(
            "center fraction {center_fraction} exceeds 1/AF = {}",
            1.0 / acceleration_factor
        )));
    }
    let (cr, cc) = mask.center();
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    match pattern {
        MaskPattern::Vd2d => {
            let budget = ((n as f64 / acceleration_factor).round() as usize).max(1);
            let center_radius = (center_fraction * n as f64 / std::f64::consts::PI).sqrt();
            let dist: Vec<f64> = (0..n)
                .map(|i| {
                    let dr = (i / width) as f64 - cr as f64;
                    let dc = (i % width) as f64 - cc as f64;
                    (dr * dr + dc * dc).sqrt()
                })
                .collect();
            let forced: Vec<bool> = dist
                .iter()
                .map(|&d| center_fraction > 0.0 && d <= center_radius)
                .collect();
            let picked = fill_budget(&dist, &forced, budget, &mut rng)?;
            mask.selected = picked;
        }
        MaskPattern::Vd1dPe => {
            let budget = ((width as f64 / acceleration_factor).round() as usize).max(1);
            let offsets: Vec<f64> = (0..width).map(|c| (c as f64 - cc as f64).abs()).collect();
            let n_center = (center_fraction * width as f64).ceil() as usize;
            let mut by_offset: Vec<usize> = (0..width).collect();
            by_offset.sort_by(|&a, &b| offsets[a].total_cmp(&offsets[b]).then(a.cmp(&b)));
            let mut forced = vec![false; width];
            for &c in by_offset.iter().take(n_center) {
                forced[c] = true;
            }
            let columns = fill_budget(&offsets, &forced, budget, &mut rng)?;
            for r in 0..height {
                for c in 0..width {
                    mask.selected[r * width + c] = columns[c];
                }
            }
        }
        MaskPattern::Full => unreachable!(),
    }
    Ok(mask)
}

/// Selects exactly `budget` items: every forced one, the rest drawn without
/// replacement with Gaussian weights `exp(-d^2 / 2 s^2)`. The width `s` is
/// bisected so the weights sum to the number of free slots, i.e. the same
/// density a Bernoulli draw at the budgeted rate would have.
fn fill_budget(
    dist: &[f64],
    forced: &[bool],
    budget: usize,
    rng: &mut ChaCha8Rng,
) -> Result<Vec<bool>> {
    let n_forced = forced.iter().filter(|&&f| f).count();
    if n_forced > budget {
        return Err(Error::BudgetInfeasible(format!(
            "fully sampled center needs {n_forced} samples, budget is {budget}"
        )));
    }
    let free: Vec<usize> = (0..dist.len()).filter(|&i| !forced[i]).collect();
    let wanted = budget - n_forced;
    let mut out = forced.to_vec();
    if wanted == 0 {
        return Ok(out);
    }
    if wanted >= free.len() {
        for &i in &free {
            out[i] = true;
        }
        return Ok(out);
    }

    let mass = |s: f64| -> f64 {
        free.iter()
            .map(|&i| (-dist[i] * dist[i] / (2.0 * s * s)).exp())
            .sum()
    };
    let (mut lo, mut hi) = (1e-3f64.ln(), 1e7f64.ln());
    for _ in 0..200 {
        let mid = 0.5 * (lo + hi);
        if mass(mid.exp()) < wanted as f64 {
            lo = mid;
        } else {
            hi = mid;
        }
    }
    let s = (0.5 * (lo + hi)).exp();

    // Efraimidis-Spirakis: the `wanted` largest ln(u)/w form a weighted sample
    // without replacement.
    let mut keyed: Vec<(f64, usize)> = free
        .iter()
        .map(|&i| {
            let w = (-dist[i] * dist[i] / (2.0 * s * s)).exp().max(1e-300);
            let u: f64 = rng.random_range(f64::MIN_POSITIVE..1.0);
            (u.ln() / w, i)
        })
        .collect();
    keyed.sort_by(|a, b| b.0.total_cmp(&a.0).then(a.1.cmp(&b.1)));
    for &(_, i) in keyed.iter().take(wanted) {
        out[i] = true;
    }
    Ok(out)
}
