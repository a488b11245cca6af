//! The single JSON document describing one experiment.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::forward::{add_awgn, apply_forward, gen_vd_mask, MaskPattern, SamplingMask};
use crate::generator::InrConfig;
use crate::optimizer::{CurriculumConfig, OptimizerConfig, ProblemData, RunConfig};
use crate::phantom::{gen_phantom, PhantomSpec};

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct MaskSpec {
    pub pattern: MaskPattern,
    pub acceleration_factor: f64,
    pub center_fraction: f64,
}

impl Default for MaskSpec {
    fn default() -> Self {
        Self {
            pattern: MaskPattern::Vd2d,
            acceleration_factor: 8.0,
            center_fraction: 0.04,
        }
    }
}

/// Complex noise on the measurements. `noise_sigma` is the per-component
/// standard deviation; when absent it is `relative_level * max|y| / sqrt(2)`,
/// i.e. the complex noise magnitude has RMS `relative_level * max|y|`.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct NoiseSpec {
    pub noise_sigma: Option<f64>,
    pub relative_level: f64,
}

impl Default for NoiseSpec {
    fn default() -> Self {
        Self {
            noise_sigma: None,
            relative_level: 0.05,
        }
    }
}

#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct OutputSpec {
    /// Also write 8-bit magnitude PGM previews.
    pub write_pgm: bool,
}

#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct ExperimentConfig {
    /// Master seed: drives the mask, the noise and the network init.
    pub seed: u64,
    pub phantom: PhantomSpec,
    pub mask: MaskSpec,
    pub noise: NoiseSpec,
    pub inr: InrConfig,
    pub curriculum: CurriculumConfig,
    pub optimizer: OptimizerConfig,
    pub output: OutputSpec,
}

/// Stream separation for the seeds derived from the master seed.
const NOISE_STREAM: u64 = 0x6A09_E667_F3BC_C909;

impl ExperimentConfig {
    pub fn from_json(text: &str) -> Result<Self> {
        let cfg: Self = serde_json::from_str(text)?;
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn validate(&self) -> Result<()> {
        self.run_config().validate()?;
        if !(self.noise.relative_level >= 0.0) || self.noise.noise_sigma.is_some_and(|s| !(s >= 0.0)) {
            return Err(Error::BadConfig("noise levels must be >= 0".into()));
        }
        if !(self.mask.acceleration_factor >= 1.0) {
            return Err(Error::BadConfig("acceleration_factor must be >= 1".into()));
        }
        Ok(())
    }

    pub fn with_seed(&self, seed: u64) -> Self {
        Self { seed, ..self.clone() }
    }

    pub fn run_config(&self) -> RunConfig {
        RunConfig {
            curriculum: self.curriculum.clone(),
            inr: self.inr.clone(),
            optimizer: self.optimizer.clone(),
            seed: self.seed,
        }
    }

    pub fn build_mask(&self) -> Result<SamplingMask> {
        let (h, w) = (self.phantom.height, self.phantom.width);
        match self.mask.pattern {
            MaskPattern::Full => Ok(SamplingMask::full(h, w)),
            pattern => gen_vd_mask(
                h,
                w,
                pattern,
                self.mask.acceleration_factor,
                self.mask.center_fraction,
                self.seed,
            ),
        }
    }

    /// Phantom, mask and noisy measurements for the configured seed.
    pub fn build_problem(&self) -> Result<ProblemData> {
        let ground_truth = gen_phantom(&self.phantom)?;
        let mask = self.build_mask()?;
        let clean = apply_forward(&mask, &ground_truth)?;
        let sigma = self
            .noise
            .noise_sigma
            .unwrap_or(self.noise.relative_level * clean.max_abs() / std::f64::consts::SQRT_2);
        let y = add_awgn(&clean, sigma, self.seed ^ NOISE_STREAM);
        Ok(ProblemData {
            mask,
            y,
            ground_truth,
            roi: None,
        })
    }
}
