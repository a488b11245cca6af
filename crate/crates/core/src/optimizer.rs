//! The curriculum driver: an outer loop over stages that refreshes the
//! sample weights, and an inner loop of plain parameter updates on the
//! weighted normalized data term.

use std::time::Instant;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::forward::{radial_distances, MeasurementOperator, MeasurementSet, SamplingMask};
use crate::generator::{init_inr, CoordinateGrid, GeneratorParams, InrConfig, InrEvaluator, WeightedDataTerm};
use crate::math::ComplexGrid;
use crate::metrics::{psnr_roi, rlne_roi, RoiMask};
use crate::spcl::{
    combine_weights, normalized_residual_values, percentile, solve_step, student_weights, teacher_weights,
    CurriculumState, Step, StepMode, WeightVector,
};

/// Abort once the loss exceeds this multiple of the first logged loss.
const DIVERGENCE_FACTOR: f64 = 1e3;
/// Default ROI threshold relative to the peak ground-truth magnitude.
pub const ROI_FRACTION: f64 = 0.05;

#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "SCREAMING_SNAKE_CASE")]
pub enum OptimizerKind {
    #[default]
    Adam,
    Gd,
}

/// Which of the two weighting modes are active.
#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "SCREAMING_SNAKE_CASE")]
pub enum WeightingMode {
    Uniform,
    TeacherOnly,
    StudentOnly,
    #[default]
    Dual,
}

impl WeightingMode {
    fn uses_student(self) -> bool {
        matches!(self, Self::StudentOnly | Self::Dual)
    }

    fn uses_teacher(self) -> bool {
        matches!(self, Self::TeacherOnly | Self::Dual)
    }
}

/// Curriculum settings. Unset thresholds and steps are derived from the
/// data: `lambda0` is the 20th percentile of the initial normalized
/// residuals, `r0` is 15% of the largest k-space radius, and the steps carry
/// them to twice the largest initial residual and 1.05x the largest radius
/// at the last stage.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct CurriculumConfig {
    pub k2: Vec<usize>,
    pub w1: f64,
    pub w2: f64,
    pub lambda0: Option<f64>,
    pub r0: Option<f64>,
    pub delta_lambda_mode: StepMode,
    /// Increment (additive) or growth factor (geometric).
    pub delta_lambda: Option<f64>,
    pub delta_r_mode: StepMode,
    pub delta_r: Option<f64>,
    pub weighting: WeightingMode,
}

impl Default for CurriculumConfig {
    fn default() -> Self {
        Self {
            k2: split_budget(4000, 5),
            w1: 0.9,
            w2: 0.9,
            lambda0: None,
            r0: None,
            delta_lambda_mode: StepMode::Geometric,
            delta_lambda: None,
            delta_r_mode: StepMode::Geometric,
            delta_r: None,
            weighting: WeightingMode::Dual,
        }
    }
}

impl CurriculumConfig {
    pub fn total_iterations(&self) -> usize {
        self.k2.iter().sum()
    }

    /// Resolves the data-dependent defaults into a stage-1 state.
    pub fn initial_state(&self, initial_residuals: &[f64], max_distance: f64) -> Result<CurriculumState> {
        let stages = self.k2.len();
        let max_res = initial_residuals.iter().cloned().fold(0.0, f64::max);
        let lambda0 = match self.lambda0 {
            Some(l) => l,
            None => percentile(initial_residuals, 0.2).max(f64::MIN_POSITIVE),
        };
        let r0 = self.r0.unwrap_or(0.15 * max_distance).max(f64::MIN_POSITIVE);
        let lambda_step = match self.delta_lambda {
            Some(d) => make_step(self.delta_lambda_mode, d),
            None => solve_step(self.delta_lambda_mode, lambda0, 2.0 * max_res, stages),
        };
        let r_step = match self.delta_r {
            Some(d) => make_step(self.delta_r_mode, d),
            None => solve_step(self.delta_r_mode, r0, 1.05 * max_distance, stages),
        };
        CurriculumState::new(self.k2.clone(), lambda0, r0, self.w1, self.w2, lambda_step, r_step, max_distance)
    }
}

fn make_step(mode: StepMode, by: f64) -> Step {
    match mode {
        StepMode::Additive => Step::Additive(by),
        StepMode::Geometric => Step::Geometric(by),
    }
}

/// Splits `total` iterations over `stages`: the last stage gets 5/8, the
/// rest share 3/8 with relative weights 1, 1, 2, 2, 3, 3, ... Any rounding
/// remainder goes to the last stage. `split_budget(16000, 5)` is
/// `[1000, 1000, 2000, 2000, 10000]`.
pub fn split_budget(total: usize, stages: usize) -> Vec<usize> {
    assert!(stages >= 1 && total >= stages);
    if stages == 1 {
        return vec![total];
    }
    let early_total = total * 3 / 8;
    let weights: Vec<usize> = (1..stages).map(|k| k.div_ceil(2)).collect();
    let weight_sum: usize = weights.iter().sum();
    let mut k2: Vec<usize> = weights.iter().map(|w| (early_total * w / weight_sum).max(1)).collect();
    let used: usize = k2.iter().sum();
    k2.push(total - used);
    k2
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct OptimizerConfig {
    pub optimizer_kind: OptimizerKind,
    pub learning_rate: f64,
    pub adam_betas: (f64, f64),
    pub adam_eps: f64,
    pub log_every: usize,
    /// Uniform weights, one stage of `sum(k2)` iterations.
    pub vanilla_mode: bool,
}

impl Default for OptimizerConfig {
    fn default() -> Self {
        Self {
            optimizer_kind: OptimizerKind::Adam,
            learning_rate: 1e-4,
            adam_betas: (0.9, 0.999),
            adam_eps: 1e-8,
            log_every: 50,
            vanilla_mode: false,
        }
    }
}

#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
pub struct RunConfig {
    pub curriculum: CurriculumConfig,
    pub inr: InrConfig,
    pub optimizer: OptimizerConfig,
    pub seed: u64,
}

impl RunConfig {
    pub fn validate(&self) -> Result<()> {
        self.inr.validate()?;
        let o = &self.optimizer;
        if !(o.learning_rate > 0.0) || !o.learning_rate.is_finite() {
            return Err(Error::BadConfig("learning_rate must be > 0".into()));
        }
        if o.log_every == 0 {
            return Err(Error::BadConfig("log_every must be >= 1".into()));
        }
        let (b1, b2) = o.adam_betas;
        if !(0.0..1.0).contains(&b1) || !(0.0..1.0).contains(&b2) || !(o.adam_eps > 0.0) {
            return Err(Error::BadConfig("adam betas must lie in [0, 1) and eps > 0".into()));
        }
        if self.curriculum.k2.is_empty() || self.curriculum.k2.contains(&0) {
            return Err(Error::BadConfig("every stage needs at least one iteration".into()));
        }
        Ok(())
    }
}

/// Moment estimates for Adam; unused by plain gradient descent.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct OptimizerState {
    pub beta1: f64,
    pub beta2: f64,
    pub eps: f64,
    pub step: u64,
    pub m: Vec<f64>,
    pub v: Vec<f64>,
}

impl OptimizerState {
    pub fn new(len: usize, betas: (f64, f64), eps: f64) -> Self {
        Self {
            beta1: betas.0,
            beta2: betas.1,
            eps,
            step: 0,
            m: vec![0.0; len],
            v: vec![0.0; len],
        }
    }
}

/// One update. GD: `theta -= lr * g`. Adam: bias-corrected moments.
pub fn optimizer_step(
    params: &mut [f64],
    grad: &[f64],
    state: &mut OptimizerState,
    kind: OptimizerKind,
    lr: f64,
) -> Result<()> {
    if params.len() != grad.len() || state.m.len() != grad.len() {
        return Err(Error::LengthMismatch {
            left: params.len(),
            right: grad.len(),
        });
    }
    if grad.iter().any(|g| !g.is_finite()) {
        return Err(Error::NonFinite("gradient"));
    }
    state.step += 1;
    match kind {
        OptimizerKind::Gd => {
            for (p, g) in params.iter_mut().zip(grad) {
                *p -= lr * g;
            }
        }
        OptimizerKind::Adam => {
            let (b1, b2) = (state.beta1, state.beta2);
            let c1 = 1.0 - b1.powi(state.step as i32);
            let c2 = 1.0 - b2.powi(state.step as i32);
            for i in 0..params.len() {
                let g = grad[i];
                state.m[i] = b1 * state.m[i] + (1.0 - b1) * g;
                state.v[i] = b2 * state.v[i] + (1.0 - b2) * g * g;
                let m_hat = state.m[i] / c1;
                let v_hat = state.v[i] / c2;
                params[i] -= lr * m_hat / (v_hat.sqrt() + state.eps);
            }
        }
    }
    Ok(())
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct CurvePoint {
    pub iteration: usize,
    pub stage: usize,
    pub loss: f64,
    pub rlne_roi: Option<f64>,
    pub psnr_db: Option<f64>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct StageRecord {
    pub stage: usize,
    pub iterations: usize,
    pub lambda: f64,
    pub r: f64,
    pub wall_time_s: f64,
}

#[derive(Clone, Debug)]
pub struct ReconResult {
    pub image: ComplexGrid,
    pub curve: Vec<CurvePoint>,
    pub params: GeneratorParams,
    pub weights_per_stage: Vec<WeightVector>,
    pub stages: Vec<StageRecord>,
    pub iterations: usize,
}

impl ReconResult {
    pub fn final_point(&self) -> &CurvePoint {
        self.curve.last().expect("curve always holds the final point")
    }

    /// Lowest logged RLNE and the iteration it was logged at.
    pub fn best_rlne(&self) -> Option<(f64, usize)> {
        self.curve
            .iter()
            .filter_map(|p| p.rlne_roi.map(|r| (r, p.iteration)))
            .min_by(|a, b| a.0.total_cmp(&b.0))
    }

    /// First logged iteration with RLNE at or below `target`.
    pub fn iterations_to_reach(&self, target: f64) -> Option<usize> {
        self.curve
            .iter()
            .find(|p| p.rlne_roi.is_some_and(|r| r <= target))
            .map(|p| p.iteration)
    }
}

struct Tracker<'a> {
    ground_truth: Option<(&'a ComplexGrid, RoiMask)>,
    log_every: usize,
    curve: Vec<CurvePoint>,
    first_loss: Option<f64>,
}

impl Tracker<'_> {
    fn record(&mut self, iteration: usize, stage: usize, loss: f64, image: &ComplexGrid, force: bool) -> Result<()> {
        let first = *self.first_loss.get_or_insert(loss);
        let diverged = !loss.is_finite() || loss > DIVERGENCE_FACTOR * first;
        if !(force || diverged || iteration % self.log_every == 0) {
            return Ok(());
        }
        let (rlne, psnr) = match &self.ground_truth {
            Some((gt, roi)) => (Some(rlne_roi(gt, image, roi)?), Some(psnr_roi(gt, image, roi)?)),
            None => (None, None),
        };
        self.curve.push(CurvePoint {
            iteration,
            stage,
            loss,
            rlne_roi: rlne,
            psnr_db: psnr,
        });
        if diverged {
            return Err(Error::NonFiniteLoss {
                iteration,
                loss,
                curve: std::mem::take(&mut self.curve),
            });
        }
        Ok(())
    }
}

fn stage_weights(
    mode: WeightingMode,
    state: &CurriculumState,
    residuals: &[f64],
    distances: &crate::forward::RadialDistanceMap,
) -> Result<WeightVector> {
    let n = residuals.len();
    let s = if mode.uses_student() {
        student_weights(residuals, state.lambda, state.w1)?
    } else {
        vec![1.0; n]
    };
    let t = if mode.uses_teacher() {
        teacher_weights(distances, state.r, state.w2)?
    } else {
        vec![1.0; n]
    };
    combine_weights(&s, &t)
}

/// Runs the curriculum (or, in vanilla mode, plain uniform fitting) and
/// returns the final image with its logged curve.
pub fn reconstruct(
    config: &RunConfig,
    mask: &SamplingMask,
    y: &MeasurementSet,
    ground_truth: Option<&ComplexGrid>,
    roi: Option<&RoiMask>,
) -> Result<ReconResult> {
    config.validate()?;
    if y.mask.selected != mask.selected {
        return Err(Error::ShapeMismatch("measurements belong to a different mask".into()));
    }
    if !(y.norm() > 0.0) {
        return Err(Error::DegenerateDenominator);
    }
    let (h, w) = mask.shape();
    let ground_truth = match ground_truth {
        Some(gt) => {
            if gt.shape() != (h, w) {
                return Err(Error::ShapeMismatch(format!("ground truth {:?} vs mask {:?}", gt.shape(), (h, w))));
            }
            let roi = match roi {
                Some(r) => r.clone(),
                None => RoiMask::from_threshold(gt, ROI_FRACTION)?,
            };
            Some((gt, roi))
        }
        None => None,
    };

    let op = MeasurementOperator::new(mask);
    let grid = CoordinateGrid::new(h, w);
    let mut params = init_inr(&config.inr, config.seed)?;
    let mut eval = InrEvaluator::new(&params, &grid);
    let opt = &config.optimizer;
    let mut opt_state = OptimizerState::new(params.values.len(), opt.adam_betas, opt.adam_eps);
    let mut grad = vec![0.0; params.values.len()];
    let mut tracker = Tracker {
        ground_truth,
        log_every: opt.log_every,
        curve: Vec::new(),
        first_loss: None,
    };

    let distances = radial_distances(mask);
    let curriculum = &config.curriculum;
    let mut state = if opt.vanilla_mode {
        None
    } else {
        let image = eval.forward(&params)?;
        let residuals = normalized_residual_values(&op.forward(&image)?, &y.values)?;
        Some(curriculum.initial_state(&residuals, distances.max_distance)?)
    };
    let plan: Vec<usize> = match &state {
        Some(s) => s.k2.clone(),
        None => vec![curriculum.total_iterations()],
    };

    let mut weights_per_stage = Vec::with_capacity(plan.len());
    let mut stages = Vec::with_capacity(plan.len());
    let mut iteration = 0;
    for (index, &inner) in plan.iter().enumerate() {
        let started = Instant::now();
        let stage = index + 1;
        let weights = match &state {
            None => WeightVector::uniform(y.len()),
            Some(_) if curriculum.weighting == WeightingMode::Uniform => WeightVector::uniform(y.len()),
            Some(s) => {
                let image = eval.forward(&params)?;
                let residuals = normalized_residual_values(&op.forward(&image)?, &y.values)?;
                stage_weights(curriculum.weighting, s, &residuals, &distances)?
            }
        };
        let term = WeightedDataTerm::new(op.clone(), &y.values, &weights.v)?;
        for _ in 0..inner {
            let image = eval.forward(&params)?;
            let (loss, d_image) = term.loss_and_image_gradient(&image)?;
            tracker.record(iteration, stage, loss, &image, false)?;
            eval.backward(&params, &d_image, &mut grad);
            optimizer_step(&mut params.values, &grad, &mut opt_state, opt.optimizer_kind, opt.learning_rate)?;
            iteration += 1;
        }
        stages.push(StageRecord {
            stage,
            iterations: inner,
            lambda: state.as_ref().map_or(f64::INFINITY, |s| s.lambda),
            r: state.as_ref().map_or(f64::INFINITY, |s| s.r),
            wall_time_s: started.elapsed().as_secs_f64(),
        });
        weights_per_stage.push(weights);
        if let Some(s) = &state {
            if !s.is_final() {
                state = Some(crate::spcl::advance_stage(s)?);
            }
        }
        if index + 1 == plan.len() {
            let image = eval.forward(&params)?;
            let loss = term.loss(&image)?;
            tracker.record(iteration, stage, loss, &image, true)?;
            return Ok(ReconResult {
                image,
                curve: tracker.curve,
                params,
                weights_per_stage,
                stages,
                iterations: iteration,
            });
        }
    }
    unreachable!("plan has at least one stage")
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "SCREAMING_SNAKE_CASE")]
pub enum AblationSuite {
    BackboneGain,
    CurriculumSize,
    ModeWeighting,
}

/// K1 values swept by the curriculum-size suite.
pub const CURRICULUM_SIZES: [usize; 7] = [1, 2, 3, 4, 5, 6, 8];

/// One experiment's inputs: measurements plus the reference for scoring.
#[derive(Clone, Debug)]
pub struct ProblemData {
    pub mask: SamplingMask,
    pub y: MeasurementSet,
    pub ground_truth: ComplexGrid,
    pub roi: Option<RoiMask>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct AblationRow {
    pub arm: String,
    pub seed: u64,
    pub final_rlne: f64,
    pub final_psnr_db: f64,
    pub best_rlne: f64,
    pub best_iteration: usize,
    pub final_loss: f64,
}

#[derive(Clone, Debug)]
pub struct AblationArm {
    pub row: AblationRow,
    pub result: ReconResult,
}

/// The configurations a suite compares, labelled.
pub fn ablation_arms(suite: AblationSuite, base: &RunConfig) -> Vec<(String, RunConfig)> {
    let total = base.curriculum.total_iterations();
    let with = |f: &dyn Fn(&mut RunConfig)| {
        let mut c = base.clone();
        f(&mut c);
        c
    };
    match suite {
        AblationSuite::BackboneGain => vec![
            ("vanilla".into(), with(&|c| c.optimizer.vanilla_mode = true)),
            (
                "coggen".into(),
                with(&|c| {
                    c.optimizer.vanilla_mode = false;
                    c.curriculum.weighting = WeightingMode::Dual;
                }),
            ),
        ],
        AblationSuite::CurriculumSize => CURRICULUM_SIZES
            .iter()
            .filter(|&&k1| k1 <= total)
            .map(|&k1| {
                let cfg = with(&|c| {
                    c.optimizer.vanilla_mode = false;
                    c.curriculum.k2 = split_budget(total, k1);
                });
                (format!("k1={k1}"), cfg)
            })
            .collect(),
        AblationSuite::ModeWeighting => [
            ("uniform", WeightingMode::Uniform),
            ("teacher-only", WeightingMode::TeacherOnly),
            ("student-only", WeightingMode::StudentOnly),
            ("dual", WeightingMode::Dual),
        ]
        .into_iter()
        .map(|(name, mode)| {
            let cfg = with(&|c| {
                c.optimizer.vanilla_mode = false;
                c.curriculum.weighting = mode;
            });
            (name.to_string(), cfg)
        })
        .collect(),
    }
}

pub fn run_arm(label: &str, config: &RunConfig, data: &ProblemData) -> Result<AblationArm> {
    let result = reconstruct(config, &data.mask, &data.y, Some(&data.ground_truth), data.roi.as_ref())?;
    let last = result.final_point();
    let (best_rlne, best_iteration) = result.best_rlne().expect("ground truth supplied");
    let row = AblationRow {
        arm: label.to_string(),
        seed: config.seed,
        final_rlne: last.rlne_roi.expect("ground truth supplied"),
        final_psnr_db: last.psnr_db.expect("ground truth supplied"),
        best_rlne,
        best_iteration,
        final_loss: last.loss,
    };
    Ok(AblationArm { row, result })
}

/// Runs every arm of `suite` on one data set, sequentially.
pub fn run_ablation(suite: AblationSuite, base: &RunConfig, data: &ProblemData) -> Result<Vec<AblationArm>> {
    ablation_arms(suite, base)
        .iter()
        .map(|(label, cfg)| run_arm(label, cfg, data))
        .collect()
}
