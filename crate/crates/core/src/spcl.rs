//! Dual-mode sample weighting for k-space measurements.
//!
//! Student mode thresholds the per-sample normalized residual against `lambda`
//! ("what the model already explains"); teacher mode thresholds the k-space
//! radius against `r` ("what it should attempt next"). Each admits with weight
//! `w` and down-weights with `1 - w`; the sample weight is the product. Ties
//! fall on the hard / peripheral side.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::forward::{MeasurementSet, RadialDistanceMap};

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct WeightVector {
    pub s: Vec<f64>,
    pub t: Vec<f64>,
    pub v: Vec<f64>,
}

impl WeightVector {
    pub fn uniform(len: usize) -> Self {
        Self {
            s: vec![1.0; len],
            t: vec![1.0; len],
            v: vec![1.0; len],
        }
    }

    pub fn len(&self) -> usize {
        self.v.len()
    }

    pub fn is_empty(&self) -> bool {
        self.v.is_empty()
    }

    /// Number of samples at each distinct weight, ascending by weight.
    pub fn level_counts(&self) -> Vec<(f64, usize)> {
        let mut levels: Vec<(f64, usize)> = Vec::new();
        for &v in &self.v {
            match levels.iter_mut().find(|(w, _)| *w == v) {
                Some((_, n)) => *n += 1,
                None => levels.push((v, 1)),
            }
        }
        levels.sort_by(|a, b| a.0.total_cmp(&b.0));
        levels
    }
}

fn check_w(w: f64) -> Result<()> {
    if w > 0.5 && w <= 1.0 {
        Ok(())
    } else {
        Err(Error::BadW(w))
    }
}

/// `|pred_i - y_i| / max(|y_i|, 1e-8 * max_j |y_j|)`.
pub fn normalized_residuals(pred: &MeasurementSet, y: &MeasurementSet) -> Result<Vec<f64>> {
    if pred.mask.selected != y.mask.selected {
        return Err(Error::ShapeMismatch("predictions and measurements use different masks".into()));
    }
    normalized_residual_values(&pred.values, &y.values)
}

pub(crate) fn normalized_residual_values(
    pred: &[num_complex::Complex64],
    y: &[num_complex::Complex64],
) -> Result<Vec<f64>> {
    if pred.len() != y.len() {
        return Err(Error::LengthMismatch {
            left: pred.len(),
            right: y.len(),
        });
    }
    let max = y.iter().map(|z| z.norm()).fold(0.0, f64::max);
    if max == 0.0 {
        return Err(Error::AllZeroMeasurements);
    }
    let floor = 1e-8 * max;
    Ok(pred
        .iter()
        .zip(y)
        .map(|(p, yi)| (p - yi).norm() / yi.norm().max(floor))
        .collect())
}

pub fn student_weights(residuals: &[f64], lambda: f64, w1: f64) -> Result<Vec<f64>> {
    check_w(w1)?;
    if !(lambda > 0.0) {
        return Err(Error::BadInputs(format!("lambda must be > 0, got {lambda}")));
    }
    Ok(residuals
        .iter()
        .map(|&l| if l < lambda { w1 } else { 1.0 - w1 })
        .collect())
}

pub fn teacher_weights(distances: &RadialDistanceMap, r: f64, w2: f64) -> Result<Vec<f64>> {
    check_w(w2)?;
    if !(r > 0.0) {
        return Err(Error::BadInputs(format!("r must be > 0, got {r}")));
    }
    Ok(distances
        .distances
        .iter()
        .map(|&e| if e < r { w2 } else { 1.0 - w2 })
        .collect())
}

pub fn combine_weights(s: &[f64], t: &[f64]) -> Result<WeightVector> {
    if s.len() != t.len() {
        return Err(Error::LengthMismatch {
            left: s.len(),
            right: t.len(),
        });
    }
    Ok(WeightVector {
        s: s.to_vec(),
        t: t.to_vec(),
        v: s.iter().zip(t).map(|(a, b)| a * b).collect(),
    })
}

/// How a threshold moves between stages.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "mode", content = "by", rename_all = "SCREAMING_SNAKE_CASE")]
pub enum Step {
    /// `x <- x + delta`
    Additive(f64),
    /// `x <- x * growth`
    Geometric(f64),
}

impl Step {
    fn apply(self, x: f64) -> f64 {
        match self {
            Step::Additive(d) => x + d,
            Step::Geometric(g) => x * g,
        }
    }

    fn validate(self) -> Result<()> {
        match self {
            Step::Additive(d) if d > 0.0 && d.is_finite() => Ok(()),
            Step::Geometric(g) if g > 1.0 && g.is_finite() => Ok(()),
            other => Err(Error::BadInputs(format!("threshold step {other:?} does not increase"))),
        }
    }
}

#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "SCREAMING_SNAKE_CASE")]
pub enum StepMode {
    Additive,
    #[default]
    Geometric,
}

/// Stage bookkeeping for the outer loop. Stages are numbered from 1.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct CurriculumState {
    pub stage: usize,
    pub k1: usize,
    pub k2: Vec<usize>,
    pub lambda: f64,
    pub r: f64,
    pub w1: f64,
    pub w2: f64,
    pub lambda_step: Step,
    pub r_step: Step,
    /// Largest radial distance among acquired samples; the last stage keeps
    /// `r` strictly above it so every sample is admitted by the teacher.
    pub max_distance: f64,
}

impl CurriculumState {
    #[allow(clippy::too_many_arguments)]
    pub fn new(
        k2: Vec<usize>,
        lambda: f64,
        r: f64,
        w1: f64,
        w2: f64,
        lambda_step: Step,
        r_step: Step,
        max_distance: f64,
    ) -> Result<Self> {
        check_w(w1)?;
        check_w(w2)?;
        if k2.is_empty() || k2.iter().any(|&k| k == 0) {
            return Err(Error::BadInputs("every stage needs at least one iteration".into()));
        }
        if !(lambda > 0.0) || !(r > 0.0) {
            return Err(Error::BadInputs("lambda and r must be > 0".into()));
        }
        lambda_step.validate()?;
        r_step.validate()?;
        let mut state = Self {
            stage: 1,
            k1: k2.len(),
            k2,
            lambda,
            r,
            w1,
            w2,
            lambda_step,
            r_step,
            max_distance,
        };
        state.clamp_final();
        Ok(state)
    }

    pub fn is_final(&self) -> bool {
        self.stage == self.k1
    }

    pub fn inner_iterations(&self) -> usize {
        self.k2[self.stage - 1]
    }

    fn clamp_final(&mut self) {
        if self.is_final() && self.r <= self.max_distance {
            self.r = self.max_distance.next_up();
        }
    }
}

pub fn advance_stage(state: &CurriculumState) -> Result<CurriculumState> {
    if state.stage >= state.k1 {
        return Err(Error::FinalStage(state.k1));
    }
    let mut next = state.clone();
    next.stage += 1;
    next.lambda = state.lambda_step.apply(state.lambda);
    next.r = state.r_step.apply(state.r);
    next.clamp_final();
    Ok(next)
}

/// Value at quantile `q` (nearest-rank on the sorted copy).
pub fn percentile(values: &[f64], q: f64) -> f64 {
    assert!(!values.is_empty());
    let mut sorted = values.to_vec();
    sorted.sort_by(f64::total_cmp);
    let idx = ((q * (sorted.len() - 1) as f64).round() as usize).min(sorted.len() - 1);
    sorted[idx]
}

/// Step that moves `start` to `end` over `stages - 1` transitions.
pub fn solve_step(mode: StepMode, start: f64, end: f64, stages: usize) -> Step {
    let transitions = stages.saturating_sub(1).max(1) as f64;
    match mode {
        StepMode::Additive => Step::Additive(((end - start) / transitions).max(f64::MIN_POSITIVE)),
        StepMode::Geometric => {
            let g = (end / start).powf(1.0 / transitions);
            Step::Geometric(if g > 1.0 { g } else { 1.0f64.next_up() })
        }
    }
}
