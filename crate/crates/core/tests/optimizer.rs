use coggen::config::{ExperimentConfig, MaskSpec, NoiseSpec};
use coggen::forward::MaskPattern;
use coggen::generator::InrConfig;
use coggen::optimizer::{
    ablation_arms, reconstruct, run_ablation, AblationSuite, ReconResult, RunConfig, WeightingMode,
};
use coggen::phantom::PhantomSpec;
use coggen::spcl::StepMode;

fn small_experiment(seed: u64) -> ExperimentConfig {
    let mut cfg = ExperimentConfig {
        seed,
        phantom: PhantomSpec {
            height: 16,
            width: 16,
            ..Default::default()
        },
        mask: MaskSpec {
            acceleration_factor: 3.0,
            center_fraction: 0.1,
            ..Default::default()
        },
        inr: InrConfig {
            hidden_layers: 2,
            hidden_width: 16,
            fourier_features: 8,
            fourier_scale: 1.0,
            omega0: 10.0,
            ..Default::default()
        },
        ..Default::default()
    };
    cfg.optimizer.learning_rate = 1e-3;
    cfg.optimizer.log_every = 1;
    cfg.curriculum.k2 = vec![40, 60];
    cfg
}

fn run(cfg: &RunConfig, exp: &ExperimentConfig) -> ReconResult {
    let data = exp.build_problem().unwrap();
    reconstruct(cfg, &data.mask, &data.y, Some(&data.ground_truth), None).unwrap()
}

/// CogGen whose thresholds admit every sample from the first stage on.
fn all_admitting(base: &RunConfig, w: f64) -> RunConfig {
    let mut c = base.clone();
    c.optimizer.vanilla_mode = false;
    c.curriculum.lambda0 = Some(1e300);
    c.curriculum.r0 = Some(1e6);
    c.curriculum.delta_lambda_mode = StepMode::Geometric;
    c.curriculum.delta_lambda = Some(2.0);
    c.curriculum.delta_r_mode = StepMode::Additive;
    c.curriculum.delta_r = Some(1.0);
    c.curriculum.w1 = w;
    c.curriculum.w2 = w;
    c
}

fn max_rel_diff(a: &ReconResult, b: &ReconResult) -> f64 {
    assert_eq!(a.curve.len(), b.curve.len());
    let curve = a
        .curve
        .iter()
        .zip(&b.curve)
        .map(|(p, q)| (p.loss - q.loss).abs() / p.loss.abs().max(1e-300))
        .fold(0.0, f64::max);
    let params = a
        .params
        .values
        .iter()
        .zip(&b.params.values)
        .map(|(x, y)| (x - y).abs() / x.abs().max(1.0))
        .fold(0.0, f64::max);
    curve.max(params)
}

#[test]
fn all_admitting_curriculum_reproduces_vanilla() {
    let exp = small_experiment(4);
    let mut vanilla = exp.run_config();
    vanilla.optimizer.vanilla_mode = true;
    let reference = run(&vanilla, &exp);
    assert_eq!(reference.iterations, 100);
    assert_eq!(reference.curve.len(), 101);

    let exact = run(&all_admitting(&vanilla, 1.0), &exp);
    assert!(max_rel_diff(&reference, &exact) <= 1e-12);
    // Uniform 0.81 weights cancel in the normalized loss up to rounding.
    let scaled = run(&all_admitting(&vanilla, 0.9), &exp);
    assert!(scaled.weights_per_stage.iter().all(|w| w.v.iter().all(|&v| v == 0.9 * 0.9)));
    assert!(max_rel_diff(&reference, &scaled) <= 1e-9);
}

#[test]
fn runs_are_repeatable() {
    let exp = small_experiment(2);
    let a = run(&exp.run_config(), &exp);
    let b = run(&exp.run_config(), &exp);
    assert_eq!(a.curve, b.curve);
    assert_eq!(a.params, b.params);
    assert_eq!(a.image, b.image);
    assert_eq!(a.stages.len(), 2);
    assert!(a.stages[0].lambda < a.stages[1].lambda);
    // The curriculum actually weights samples apart in stage 1.
    assert!(a.weights_per_stage[0].level_counts().len() > 1);
}

#[test]
fn degenerate_mode_weighting_arms_agree() {
    let exp = small_experiment(6);
    let mut base = all_admitting(&exp.run_config(), 1.0);
    base.curriculum.k2 = vec![15, 15];
    let data = exp.build_problem().unwrap();
    let arms = run_ablation(AblationSuite::ModeWeighting, &base, &data).unwrap();
    assert_eq!(arms.len(), 4);
    for arm in &arms[1..] {
        assert_eq!(arm.row.final_rlne, arms[0].row.final_rlne, "{}", arm.row.arm);
    }
}

#[test]
fn ablation_arm_labels() {
    let base = RunConfig::default();
    let size: Vec<String> = ablation_arms(AblationSuite::CurriculumSize, &base).into_iter().map(|a| a.0).collect();
    assert_eq!(size, ["k1=1", "k1=2", "k1=3", "k1=4", "k1=5", "k1=6", "k1=8"]);
    for (_, cfg) in ablation_arms(AblationSuite::CurriculumSize, &base) {
        assert_eq!(cfg.curriculum.total_iterations(), 4000);
    }
    let modes = ablation_arms(AblationSuite::ModeWeighting, &base);
    assert_eq!(modes[0].1.curriculum.weighting, WeightingMode::Uniform);
    assert_eq!(modes[3].1.curriculum.weighting, WeightingMode::Dual);
}

fn noiseless_fit(layers: usize, width: usize, iterations: usize) -> f64 {
    let exp = ExperimentConfig {
        mask: MaskSpec {
            pattern: MaskPattern::Full,
            ..Default::default()
        },
        noise: NoiseSpec {
            noise_sigma: Some(0.0),
            ..Default::default()
        },
        ..Default::default()
    };
    let mut cfg = exp.run_config();
    cfg.inr.hidden_layers = layers;
    cfg.inr.hidden_width = width;
    cfg.inr.fourier_scale = 1.0;
    cfg.inr.omega0 = 10.0;
    cfg.optimizer.learning_rate = 1e-3;
    cfg.optimizer.log_every = 500;
    cfg.optimizer.vanilla_mode = true;
    cfg.curriculum.k2 = vec![iterations];
    let rlne = run(&cfg, &exp).final_point().rlne_roi.unwrap();
    println!("noiseless full-sampling fit {layers}x{width}, {iterations} iterations: RLNE_ROI {rlne:.4}");
    rlne
}

#[test]
fn noiseless_full_sampling_is_fitted() {
    assert!(noiseless_fit(3, 64, 1000) < 0.05);
}

/// The 4x128 / 5000-iteration version takes about ten minutes.
#[test]
#[ignore]
fn noiseless_full_sampling_is_fitted_at_full_width() {
    assert!(noiseless_fit(4, 128, 5000) < 0.05);
}
