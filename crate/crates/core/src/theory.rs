//! Numerical checks of the linear-regime analysis: Landweber mode errors,
//! PL constants of weighted stage objectives, stage-wise linear convergence,
//! the iteration-count bounds, and the noise-imprint bounds.
//!
//! Everything here works on small dense matrices; problem builders for the
//! standard experiments live at the bottom of the file.

use num_complex::Complex64;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Normal};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::forward::{gen_vd_mask, MaskPattern, MeasurementOperator};
use crate::math::linalg::{spectral_norm_power, svd_small, vec_norm, SmallMatrix, Svd};

/// Relative singular-value cutoff for "nonzero".
const RANK_TOL: f64 = 1e-12;
/// Relative slack allowed on every analytic bound.
const BOUND_SLACK: f64 = 1e-9;

fn zero() -> Complex64 {
    Complex64::new(0.0, 0.0)
}

/// `y = A x* + eps`, solved by gradient descent on `0.5 ||A x - y||^2`.
#[derive(Clone, Debug)]
pub struct LinearProblem {
    pub a: SmallMatrix,
    pub x_star: Vec<Complex64>,
    pub noise: Vec<Complex64>,
    pub eta: f64,
    svd: Svd,
}

impl LinearProblem {
    pub fn new(a: SmallMatrix, x_star: Vec<Complex64>, noise: Vec<Complex64>, eta: f64) -> Result<Self> {
        if x_star.len() != a.cols() || noise.len() != a.rows() {
            return Err(Error::DimMismatch(format!(
                "A is {}x{}, x* has {}, noise has {}",
                a.rows(),
                a.cols(),
                x_star.len(),
                noise.len()
            )));
        }
        let svd = svd_small(&a)?;
        let limit = 2.0 / svd.sigma[0].powi(2);
        if !(eta > 0.0 && eta < limit) {
            return Err(Error::StepSizeTooLarge { eta, limit });
        }
        Ok(Self {
            a,
            x_star,
            noise,
            eta,
            svd,
        })
    }

    pub fn singular_values(&self) -> &[f64] {
        &self.svd.sigma
    }

    pub fn svd(&self) -> &Svd {
        &self.svd
    }

    pub fn norm_a(&self) -> f64 {
        self.svd.sigma[0]
    }

    pub fn measurements(&self) -> Vec<Complex64> {
        let ax = self.a.mul_vec(&self.x_star);
        ax.iter().zip(&self.noise).map(|(a, e)| a + e).collect()
    }

    /// Iterations after which every mode with `sigma >= sigma_floor` has
    /// contracted its transient by at least `tol`.
    pub fn iterations_for(&self, sigma_floor: f64, tol: f64) -> usize {
        let worst = self
            .svd
            .sigma
            .iter()
            .filter(|&&s| s >= sigma_floor)
            .map(|s| (1.0 - self.eta * s * s).abs())
            .fold(0.0, f64::max);
        if worst == 0.0 {
            return 1;
        }
        (tol.ln() / worst.ln()).ceil().max(1.0) as usize
    }
}

/// Per-mode errors `e_i = v_i^H (x - x*)` of a Landweber run.
#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct ModeHistory {
    pub sigma: Vec<f64>,
    /// `u_i^H eps`.
    pub noise_modes: Vec<Complex64>,
    /// `eps_i / sigma_i` for modes with nonzero sigma.
    pub steady_state: Vec<Option<Complex64>>,
    pub initial: Vec<Complex64>,
    pub final_errors: Vec<Complex64>,
    pub iterations: usize,
    /// `(iteration, mode errors)` every `record_every` steps.
    pub recorded: Vec<(usize, Vec<Complex64>)>,
}

impl ModeHistory {
    /// Largest `|e_i - ss_i| / |ss_i|` over modes with `sigma >= sigma_floor`.
    pub fn max_steady_state_error(&self, sigma_floor: f64) -> f64 {
        self.sigma
            .iter()
            .zip(&self.steady_state)
            .zip(&self.final_errors)
            .filter(|((s, _), _)| **s >= sigma_floor)
            .filter_map(|((_, ss), e)| ss.map(|ss| (e - ss).norm() / ss.norm()))
            .fold(0.0, f64::max)
    }

    /// Largest violation of `|e_i(T) - ss_i| <= |1 - eta sigma_i^2|^T |e_i(0) - ss_i|`,
    /// relative to the scale of the mode.
    pub fn fixed_point_violation(&self, eta: f64) -> f64 {
        let t = self.iterations as i32;
        let mut worst: f64 = 0.0;
        for (i, ss) in self.steady_state.iter().enumerate() {
            let Some(ss) = ss else { continue };
            let factor = (1.0 - eta * self.sigma[i].powi(2)).abs().powi(t);
            let lhs = (self.final_errors[i] - ss).norm();
            let rhs = factor * (self.initial[i] - ss).norm();
            let scale = ss.norm().max(self.initial[i].norm()).max(f64::MIN_POSITIVE);
            worst = worst.max((lhs - rhs) / scale);
        }
        worst
    }
}

fn project_modes(v: &SmallMatrix, e: &[Complex64]) -> Vec<Complex64> {
    (0..v.cols())
        .map(|i| (0..v.rows()).map(|r| v[(r, i)].conj() * e[r]).sum())
        .collect()
}

/// Gradient descent from `x = 0`, reported in the right-singular basis.
pub fn landweber_trajectory(p: &LinearProblem, iterations: usize, record_every: usize) -> Result<ModeHistory> {
    let y = p.measurements();
    let svd = &p.svd;
    let top = svd.sigma[0];
    let noise_modes = project_modes(&svd.u, &p.noise);
    let steady_state = svd
        .sigma
        .iter()
        .zip(&noise_modes)
        .map(|(&s, &e)| (s > RANK_TOL * top).then(|| e / s))
        .collect();

    let mut x = vec![zero(); p.a.cols()];
    let error = |x: &[Complex64]| -> Vec<Complex64> { x.iter().zip(&p.x_star).map(|(a, b)| a - b).collect() };
    let initial = project_modes(&svd.v, &error(&x));
    let mut recorded = vec![(0, initial.clone())];
    for t in 1..=iterations {
        let ax = p.a.mul_vec(&x);
        let residual: Vec<Complex64> = ax.iter().zip(&y).map(|(a, b)| a - b).collect();
        let grad = p.a.adjoint_mul_vec(&residual);
        for (xi, g) in x.iter_mut().zip(&grad) {
            *xi -= p.eta * g;
        }
        if record_every > 0 && t % record_every == 0 {
            recorded.push((t, project_modes(&svd.v, &error(&x))));
        }
    }
    if x.iter().any(|z| !z.re.is_finite() || !z.im.is_finite()) {
        return Err(Error::NonFinite("Landweber iterate"));
    }
    Ok(ModeHistory {
        sigma: svd.sigma.clone(),
        noise_modes,
        steady_state,
        initial,
        final_errors: project_modes(&svd.v, &error(&x)),
        iterations,
        recorded,
    })
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct PlConstants {
    pub mu: f64,
    #[serde(rename = "L")]
    pub l: f64,
    pub rank: usize,
}

fn weighted_composite(j: &SmallMatrix, a: &SmallMatrix, v: &[f64]) -> Result<SmallMatrix> {
    if a.cols() != j.rows() {
        return Err(Error::DimMismatch(format!("A has {} columns, J has {} rows", a.cols(), j.rows())));
    }
    if v.len() != a.rows() {
        return Err(Error::DimMismatch(format!("{} weights for {} rows of A", v.len(), a.rows())));
    }
    a.matmul(j)?.scale_rows(v)
}

/// `H = 2 (V A J)^H (V A J)`.
pub fn stage_hessian(j: &SmallMatrix, a: &SmallMatrix, v: &[f64]) -> Result<SmallMatrix> {
    let m = weighted_composite(j, a, v)?;
    Ok(m.adjoint().matmul(&m)?.scale(2.0))
}

/// Smallest nonzero and largest eigenvalue of `2 (VAJ)^H (VAJ)`, i.e. the
/// PL and smoothness constants of the stage objective on the tangent space.
pub fn pl_constants(j: &SmallMatrix, a: &SmallMatrix, v: &[f64]) -> Result<PlConstants> {
    let m = weighted_composite(j, a, v)?;
    let svd = svd_small(&m)?;
    let rank = svd.rank(RANK_TOL);
    if rank == 0 {
        return Ok(PlConstants {
            mu: 0.0,
            l: 0.0,
            rank,
        });
    }
    Ok(PlConstants {
        mu: 2.0 * svd.sigma[rank - 1].powi(2),
        l: 2.0 * svd.sigma[0].powi(2),
        rank,
    })
}

/// Eigenvalue range of a Hermitian positive semidefinite matrix.
pub fn psd_constants(h: &SmallMatrix) -> Result<PlConstants> {
    if h.rows() != h.cols() {
        return Err(Error::DimMismatch(format!("H is {}x{}", h.rows(), h.cols())));
    }
    let svd = svd_small(h)?;
    let rank = svd.rank(RANK_TOL);
    let mu = if rank == 0 { 0.0 } else { svd.sigma[rank - 1] };
    Ok(PlConstants {
        mu,
        l: svd.sigma[0],
        rank,
    })
}

fn quadratic_gap(h: &SmallMatrix, theta: &[Complex64]) -> f64 {
    let ht = h.mul_vec(theta);
    0.5 * theta.iter().zip(&ht).map(|(a, b)| (a.conj() * b).re).sum::<f64>()
}

#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct StageLinearReport {
    pub constants: PlConstants,
    pub eta: f64,
    pub gaps: Vec<f64>,
    pub bounds: Vec<f64>,
    /// Largest `gap_k / bound_k` over steps with a nonzero bound.
    pub worst_ratio: f64,
    /// Largest single-step `gap_{k+1} / gap_k`.
    pub worst_step_ratio: f64,
}

/// Gradient descent on `0.5 theta^H H theta` with the per-step check
/// `gap_k <= (1 - eta mu)^k gap_0`.
pub fn verify_stage_linear(
    h: &SmallMatrix,
    theta0: &[Complex64],
    iterations: usize,
    eta: f64,
) -> Result<StageLinearReport> {
    if theta0.len() != h.cols() {
        return Err(Error::DimMismatch(format!("theta has {}, H is {}x{}", theta0.len(), h.rows(), h.cols())));
    }
    let constants = psd_constants(h)?;
    let limit = 1.0 / constants.l;
    if !(eta > 0.0) || eta > limit * (1.0 + 1e-12) {
        return Err(Error::StepSizeTooLarge { eta, limit });
    }
    let factor = 1.0 - eta * constants.mu;
    let mut theta = theta0.to_vec();
    let gap0 = quadratic_gap(h, &theta);
    let mut gaps = vec![gap0];
    let mut bounds = vec![gap0];
    let mut worst_ratio: f64 = if gap0 > 0.0 { 1.0 } else { 0.0 };
    let mut worst_step_ratio: f64 = 0.0;
    for k in 1..=iterations {
        let grad = h.mul_vec(&theta);
        for (t, g) in theta.iter_mut().zip(&grad) {
            *t -= eta * g;
        }
        let gap = quadratic_gap(h, &theta);
        let bound = factor.powi(k as i32) * gap0;
        if gap > bound * (1.0 + BOUND_SLACK) + f64::EPSILON * gap0 {
            return Err(Error::BoundViolated {
                step: k,
                measured: gap,
                bound,
            });
        }
        if bound > 0.0 {
            worst_ratio = worst_ratio.max(gap / bound);
        }
        let prev = gaps[k - 1];
        if prev > 0.0 {
            worst_step_ratio = worst_step_ratio.max(gap / prev);
        }
        gaps.push(gap);
        bounds.push(bound);
    }
    Ok(StageLinearReport {
        constants,
        eta,
        gaps,
        bounds,
        worst_ratio,
        worst_step_ratio,
    })
}

/// First `k` with `gap_k <= rho * gap_0` under gradient descent on
/// `0.5 theta^H H theta`, or `None` within `max_iterations`.
pub fn iterations_to_accuracy(
    h: &SmallMatrix,
    theta0: &[Complex64],
    eta: f64,
    rho: f64,
    max_iterations: usize,
) -> Option<usize> {
    let mut theta = theta0.to_vec();
    let gap0 = quadratic_gap(h, &theta);
    if gap0 <= 0.0 {
        return Some(0);
    }
    for k in 1..=max_iterations {
        let grad = h.mul_vec(&theta);
        for (t, g) in theta.iter_mut().zip(&grad) {
            *t -= eta * g;
        }
        if quadratic_gap(h, &theta) <= rho * gap0 {
            return Some(k);
        }
    }
    None
}

/// `(log(1/rho) / (eta mu_early), log(1/rho) / (eta mu_uniform))`.
pub fn acceleration_bound(rho: f64, eta: f64, mu_early: f64, mu_uniform: f64) -> Result<(f64, f64)> {
    if !(rho > 0.0 && rho < 1.0) {
        return Err(Error::BadInputs(format!("accuracy {rho} outside (0, 1)")));
    }
    if !(eta > 0.0) || !(mu_uniform > 0.0) {
        return Err(Error::BadInputs("eta and mu_uniform must be > 0".into()));
    }
    if !(mu_early > mu_uniform) {
        return Err(Error::BadInputs(format!(
            "mu_early {mu_early} does not exceed mu_uniform {mu_uniform}"
        )));
    }
    let log = (1.0 / rho).ln();
    let k_coggen = log / (eta * mu_early);
    let k_dip = log / (eta * mu_uniform);
    debug_assert!(k_coggen < k_dip);
    Ok((k_coggen, k_dip))
}

/// Piecewise-constant diagonal weights over consecutive stages, with the
/// contraction factor of each stage and the early-phase premise
/// `||v^(t) eps|| <= v_bar ||eps||` for `t < tau`.
#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct StageWeighting {
    pub weights: Vec<Vec<f64>>,
    pub stage_lengths: Vec<usize>,
    pub tau: usize,
    pub v_bar: f64,
    pub rho: Vec<f64>,
}

fn weighted_update_norm(p: &LinearProblem, v: &[f64]) -> Result<SmallMatrix> {
    // I - eta A^H V A
    let va = p.a.scale_rows(v)?;
    let ahva = p.a.adjoint().matmul(&va)?;
    Ok(SmallMatrix::identity(p.a.cols()).sub(&ahva.scale(p.eta)))
}

fn weighted_norm(v: &[f64], x: &[Complex64]) -> f64 {
    v.iter().zip(x).map(|(w, z)| (z * w).norm_sqr()).sum::<f64>().sqrt()
}

impl StageWeighting {
    /// Measures `rho_t = ||I - eta A^H V_t A||` and `v_bar` on `p`.
    pub fn measured(p: &LinearProblem, weights: Vec<Vec<f64>>, stage_lengths: Vec<usize>, tau: usize) -> Result<Self> {
        if weights.len() != stage_lengths.len() || weights.is_empty() {
            return Err(Error::BadInputs("one weight vector per stage is required".into()));
        }
        let mut rho = Vec::with_capacity(weights.len());
        for v in &weights {
            if v.len() != p.a.rows() {
                return Err(Error::DimMismatch(format!("{} weights for {} rows", v.len(), p.a.rows())));
            }
            rho.push(svd_small(&weighted_update_norm(p, v)?)?.sigma[0]);
        }
        let noise_norm = vec_norm(&p.noise);
        let mut start = 0;
        let mut v_bar: f64 = 0.0;
        for (v, &len) in weights.iter().zip(&stage_lengths) {
            if start < tau {
                let ratio = if noise_norm > 0.0 {
                    weighted_norm(v, &p.noise) / noise_norm
                } else {
                    v.iter().cloned().fold(0.0, f64::max)
                };
                v_bar = v_bar.max(ratio);
            }
            start += len;
        }
        if tau == 0 {
            v_bar = 1.0;
        }
        Ok(Self {
            weights,
            stage_lengths,
            tau,
            v_bar,
            rho,
        })
    }

    pub fn total(&self) -> usize {
        self.stage_lengths.iter().sum()
    }

    pub fn stage_of(&self, t: usize) -> usize {
        let mut end = 0;
        for (s, &len) in self.stage_lengths.iter().enumerate() {
            end += len;
            if t < end {
                return s;
            }
        }
        self.stage_lengths.len() - 1
    }

    /// `rho_t` for every iteration `t` of the schedule.
    pub fn per_iteration_rho(&self) -> Vec<f64> {
        self.stage_lengths
            .iter()
            .zip(&self.rho)
            .flat_map(|(&len, &r)| std::iter::repeat_n(r, len))
            .collect()
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct NoiseBounds {
    pub b_dip: f64,
    pub b_coggen: f64,
    /// `b_dip - b_coggen`, summed directly so it stays exact when the early
    /// terms are far below the rounding level of the bounds themselves.
    pub margin: f64,
}

/// `sum_t c_t prod_{s=t+1}^{T-1} rho_s` with `c_t = v_bar` for `t < tau`,
/// the same sum with `c_t = 1`, and their difference.
fn bound_sums(rho: &[f64], tau: usize, v_bar: f64) -> (f64, f64, f64) {
    let mut product = 1.0;
    let (mut dip, mut coggen, mut margin) = (0.0, 0.0, 0.0);
    for t in (0..rho.len()).rev() {
        dip += product;
        if t < tau {
            coggen += v_bar * product;
            margin += (1.0 - v_bar) * product;
        } else {
            coggen += product;
        }
        product *= rho[t];
    }
    (dip, coggen, margin)
}

/// Noise-imprint bounds at horizon `horizon` (iterations).
pub fn noise_imprint_bounds(
    w: &StageWeighting,
    norm_a: f64,
    noise_norm: f64,
    eta: f64,
    horizon: usize,
) -> Result<NoiseBounds> {
    if w.tau >= horizon {
        return Err(Error::BadInputs(format!("tau {} must be below T {horizon}", w.tau)));
    }
    if !(w.v_bar > 0.0 && w.v_bar <= 1.0) {
        return Err(Error::BadInputs(format!("v_bar {} outside (0, 1]", w.v_bar)));
    }
    let rho = w.per_iteration_rho();
    if rho.len() < horizon {
        return Err(Error::BadInputs(format!("schedule covers {} of {horizon} iterations", rho.len())));
    }
    let rho = &rho[..horizon];
    if rho.iter().any(|&r| !(r > 0.0 && r < 1.0)) {
        return Err(Error::BadInputs("every rho_t must lie in (0, 1)".into()));
    }
    let prefactor = eta * norm_a * noise_norm;
    let (dip, coggen, margin) = bound_sums(rho, w.tau, w.v_bar);
    let bounds = NoiseBounds {
        b_dip: prefactor * dip,
        b_coggen: prefactor * coggen,
        margin: prefactor * margin,
    };
    let strict = bounds.margin > 0.0 && bounds.b_coggen <= bounds.b_dip;
    if w.tau >= 1 && w.v_bar < 1.0 && prefactor > 0.0 && !strict {
        return Err(Error::BoundViolated {
            step: horizon,
            measured: bounds.b_coggen,
            bound: bounds.b_dip,
        });
    }
    Ok(bounds)
}

#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct NoiseSimulation {
    /// `||e_noise^(t)||` for `t = 0..=T`.
    pub norms: Vec<f64>,
    pub bounds: NoiseBounds,
    /// Largest `||e^(t)|| / B_coggen(t)` over the run.
    pub worst_ratio: f64,
}

/// Runs `e <- (I - eta A^H V_t A) e + eta A^H V_t eps` from `e = 0` (the
/// pure-noise part of the error) and checks it against the bound at every
/// horizon.
pub fn simulate_weighted_noise_error(p: &LinearProblem, w: &StageWeighting, horizon: usize) -> Result<NoiseSimulation> {
    if w.weights.iter().any(|v| v.len() != p.a.rows()) {
        return Err(Error::DimMismatch("stage weights do not match A".into()));
    }
    let noise_norm = vec_norm(&p.noise);
    for (stage, v) in w.weights.iter().enumerate() {
        let m = weighted_update_norm(p, v)?;
        let norm = svd_small(&m)?.sigma[0];
        let power = spectral_norm_power(&m, 200, stage as u64);
        if norm > w.rho[stage] * (1.0 + 1e-12) || power > w.rho[stage] * (1.0 + 1e-9) {
            return Err(Error::NonExpansivenessViolated { stage, norm });
        }
    }
    let mut start = 0;
    for (v, &len) in w.weights.iter().zip(&w.stage_lengths) {
        if start < w.tau && weighted_norm(v, &p.noise) > w.v_bar * noise_norm * (1.0 + 1e-12) {
            return Err(Error::BadInputs("early-phase weights exceed v_bar on the noise".into()));
        }
        start += len;
    }
    let bounds = noise_imprint_bounds(w, p.norm_a(), noise_norm, p.eta, horizon)?;

    let rho = w.per_iteration_rho();
    let prefactor = p.eta * p.norm_a() * noise_norm;
    let mut e = vec![zero(); p.a.cols()];
    let mut norms = vec![0.0];
    let mut worst_ratio: f64 = 0.0;
    for t in 0..horizon {
        let v = &w.weights[w.stage_of(t)];
        let ae = p.a.mul_vec(&e);
        let drive: Vec<Complex64> = ae
            .iter()
            .zip(&p.noise)
            .zip(v)
            .map(|((a, n), w)| (n - a) * w)
            .collect();
        let step = p.a.adjoint_mul_vec(&drive);
        for (ei, s) in e.iter_mut().zip(&step) {
            *ei += p.eta * s;
        }
        let norm = vec_norm(&e);
        let (_, coggen, _) = bound_sums(&rho[..t + 1], w.tau, w.v_bar);
        let bound = prefactor * coggen;
        if norm > bound * (1.0 + BOUND_SLACK) {
            return Err(Error::BoundViolated {
                step: t + 1,
                measured: norm,
                bound,
            });
        }
        if bound > 0.0 {
            worst_ratio = worst_ratio.max(norm / bound);
        }
        norms.push(norm);
    }
    Ok(NoiseSimulation {
        norms,
        bounds,
        worst_ratio,
    })
}

// ---------------------------------------------------------------------------
// Standard experiments.

fn complex_normal(n: usize, sd: f64, rng: &mut ChaCha8Rng) -> Vec<Complex64> {
    let normal = Normal::new(0.0, sd).expect("finite sd");
    (0..n)
        .map(|_| Complex64::new(normal.sample(rng), normal.sample(rng)))
        .collect()
}

/// Random real `n x n` system with small complex noise and `eta = 1/sigma_max^2`.
pub fn random_spectral_problem(n: usize, noise_sd: f64, seed: u64) -> Result<LinearProblem> {
    let a = SmallMatrix::random(n, n, false, seed);
    let mut rng = ChaCha8Rng::seed_from_u64(seed ^ 0x5EED);
    let x_star = complex_normal(n, 1.0, &mut rng);
    let noise = complex_normal(n, noise_sd, &mut rng);
    let smax = svd_small(&a)?.sigma[0];
    LinearProblem::new(a, x_star, noise, 1.0 / (smax * smax))
}

/// Random Hermitian `n x n` matrix with eigenvalues drawn from `[lo, hi]`.
pub fn random_psd(n: usize, lo: f64, hi: f64, seed: u64) -> SmallMatrix {
    let q = SmallMatrix::random_unitary(n, true, seed);
    let mut rng = ChaCha8Rng::seed_from_u64(seed.wrapping_add(17));
    let d: Vec<f64> = (0..n).map(|_| rng.random_range(lo..=hi)).collect();
    let qd = SmallMatrix::from_fn(n, n, |r, c| q[(r, c)] * d[c]);
    qd.matmul(&q.adjoint()).expect("square factors")
}

/// Linearized stage problem on an 8x8 grid: `A` is the masked unitary DFT,
/// `J = F^H diag(d) Q` with `d_k = 1 / (1 + (|k|/k0)^2)` and `Q` a random
/// unitary, so low frequencies are the well-conditioned directions.
/// `early` keeps only samples with `|k| <= radius`.
#[derive(Clone, Debug)]
pub struct AccelerationSetup {
    pub a: SmallMatrix,
    pub j: SmallMatrix,
    pub uniform: Vec<f64>,
    pub early: Vec<f64>,
}

pub fn masked_dft_setup(seed: u64) -> Result<AccelerationSetup> {
    const SIDE: usize = 8;
    const K0: f64 = 1.5;
    const RADIUS: f64 = 2.0;
    let n = SIDE * SIDE;
    let signed = |b: usize| if b < SIDE / 2 { b as f64 } else { b as f64 - SIDE as f64 };
    let freq = |bin: usize| (signed(bin / SIDE).powi(2) + signed(bin % SIDE).powi(2)).sqrt();
    let dft = SmallMatrix::from_fn(n, n, |k, p| {
        let phase = -2.0 * std::f64::consts::PI
            * (((k / SIDE) * (p / SIDE)) as f64 + ((k % SIDE) * (p % SIDE)) as f64)
            / SIDE as f64;
        Complex64::from_polar(1.0 / SIDE as f64, phase)
    });
    let mask = gen_vd_mask(SIDE, SIDE, MaskPattern::Vd2d, 2.0, 0.1, seed)?;
    let bins = MeasurementOperator::new(&mask).bins().to_vec();
    let a = SmallMatrix::from_fn(bins.len(), n, |r, c| dft[(bins[r], c)]);
    let decay: Vec<f64> = (0..n).map(|k| 1.0 / (1.0 + (freq(k) / K0).powi(2))).collect();
    let q = SmallMatrix::random_unitary(n, true, seed.wrapping_add(1));
    let dq = SmallMatrix::from_fn(n, n, |r, c| q[(r, c)] * decay[r]);
    let j = dft.adjoint().matmul(&dq)?;
    let early = bins.iter().map(|&b| if freq(b) <= RADIUS { 1.0 } else { 0.0 }).collect();
    Ok(AccelerationSetup {
        a,
        j,
        uniform: vec![1.0; bins.len()],
        early,
    })
}

/// 16-mode diagonal system with decaying singular values and a two-stage
/// low-frequency-first weighting (`tau = T/2`).
pub fn diagonal_noise_problem(
    noise_seed: u64,
    horizon: usize,
) -> Result<(LinearProblem, StageWeighting, StageWeighting)> {
    const MODES: usize = 16;
    const LOW: usize = 6;
    const V_LOW: f64 = 0.1;
    let sigma: Vec<f64> = (0..MODES).map(|i| 1.0 / (1.0 + i as f64 / 3.0)).collect();
    let a = SmallMatrix::diag_real(&sigma);
    let mut rng = ChaCha8Rng::seed_from_u64(noise_seed);
    let noise = complex_normal(MODES, 0.1, &mut rng);
    let p = LinearProblem::new(a, vec![zero(); MODES], noise, 0.5)?;
    let tau = horizon / 2;
    let early: Vec<f64> = (0..MODES).map(|i| if i < LOW { 1.0 } else { V_LOW }).collect();
    let weighted = StageWeighting::measured(
        &p,
        vec![early, vec![1.0; MODES]],
        vec![tau, horizon - tau],
        tau,
    )?;
    let uniform = StageWeighting::measured(&p, vec![vec![1.0; MODES]], vec![horizon], 0)?;
    Ok((p, weighted, uniform))
}

// ---------------------------------------------------------------------------
// Report.

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum TheorySection {
    Spectral,
    Pl,
    Bounds,
    All,
}

#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct SpectralSection {
    pub sigma: Vec<f64>,
    pub iterations: usize,
    pub max_steady_state_error: f64,
    pub fixed_point_violation: f64,
    pub passed: bool,
}

#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct PlSection {
    pub quadratics: usize,
    pub worst_gap_ratio: f64,
    pub mu_early: f64,
    pub mu_uniform: f64,
    pub eta: f64,
    pub k_coggen_bound: f64,
    pub k_dip_bound: f64,
    pub k_coggen_measured: Option<usize>,
    pub passed: bool,
}

#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct BoundsSection {
    pub configurations: usize,
    pub strict_dominance: usize,
    pub simulations: usize,
    pub worst_bound_ratio: f64,
    pub weighted_below_uniform: usize,
    pub passed: bool,
}

#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct TheoryReport {
    pub format: String,
    pub spectral: Option<SpectralSection>,
    pub pl: Option<PlSection>,
    pub bounds: Option<BoundsSection>,
    pub passed: bool,
}

pub fn spectral_section(seed: u64) -> Result<SpectralSection> {
    let p = random_spectral_problem(6, 0.01, seed)?;
    let iterations = p.iterations_for(0.05, 1e-6).min(50_000_000);
    let history = landweber_trajectory(&p, iterations, 0)?;
    let max_err = history.max_steady_state_error(0.05);
    let violation = history.fixed_point_violation(p.eta);
    Ok(SpectralSection {
        sigma: history.sigma.clone(),
        iterations,
        max_steady_state_error: max_err,
        fixed_point_violation: violation,
        passed: max_err < 0.01 && violation <= 1e-10,
    })
}

pub fn pl_section(seed: u64) -> Result<PlSection> {
    let quadratics = 10;
    let mut worst: f64 = 0.0;
    for q in 0..quadratics {
        let h = random_psd(10, 0.05, 5.0, seed.wrapping_add(q));
        let mut rng = ChaCha8Rng::seed_from_u64(seed.wrapping_add(100 + q));
        let theta0 = complex_normal(10, 1.0, &mut rng);
        let eta = 1.0 / psd_constants(&h)?.l;
        worst = worst.max(verify_stage_linear(&h, &theta0, 200, eta)?.worst_ratio);
    }
    let setup = masked_dft_setup(seed)?;
    let early = pl_constants(&setup.j, &setup.a, &setup.early)?;
    let uniform = pl_constants(&setup.j, &setup.a, &setup.uniform)?;
    let eta = 1.0 / early.l;
    let rho = 0.01;
    let (k_coggen, k_dip) = acceleration_bound(rho, eta, early.mu, uniform.mu)?;
    let h = stage_hessian(&setup.j, &setup.a, &setup.early)?;
    let mut rng = ChaCha8Rng::seed_from_u64(seed.wrapping_add(999));
    let theta0 = complex_normal(h.cols(), 1.0, &mut rng);
    let measured = iterations_to_accuracy(&h, &theta0, eta, rho, 100 * k_coggen.ceil() as usize);
    let passed = worst <= 1.0 + BOUND_SLACK
        && early.mu > uniform.mu
        && measured.is_some_and(|k| k as f64 <= k_coggen);
    Ok(PlSection {
        quadratics: quadratics as usize,
        worst_gap_ratio: worst,
        mu_early: early.mu,
        mu_uniform: uniform.mu,
        eta,
        k_coggen_bound: k_coggen,
        k_dip_bound: k_dip,
        k_coggen_measured: measured,
        passed,
    })
}

/// The 50 `(T, tau, rho, v_bar)` configurations of the dominance check.
pub fn bound_grid(seed: u64) -> Vec<(usize, usize, Vec<f64>, f64)> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut out = Vec::new();
    for horizon in [2usize, 5, 20, 100, 300] {
        for tau in [1, horizon.div_ceil(2)] {
            for (lo, v_bar) in [(0.1, 0.1), (0.5, 0.5), (0.9, 0.9), (0.99, 0.3), (0.3, 0.999)] {
                let rho: Vec<f64> = (0..horizon).map(|_| rng.random_range(lo..0.9999)).collect();
                out.push((horizon, tau.min(horizon - 1), rho, v_bar));
            }
        }
    }
    out
}

pub fn bounds_section(seed: u64) -> Result<BoundsSection> {
    let grid = bound_grid(seed);
    let mut strict = 0;
    for (horizon, tau, rho, v_bar) in &grid {
        let w = StageWeighting {
            weights: vec![vec![1.0]; *horizon],
            stage_lengths: vec![1; *horizon],
            tau: *tau,
            v_bar: *v_bar,
            rho: rho.clone(),
        };
        let b = noise_imprint_bounds(&w, 1.0, 1.0, 1.0, *horizon)?;
        if b.margin > 0.0 && b.b_coggen <= b.b_dip {
            strict += 1;
        }
    }
    let horizon = 200;
    let seeds = 10;
    let mut worst: f64 = 0.0;
    let mut wins = 0;
    for s in 0..seeds {
        let (p, weighted, uniform) = diagonal_noise_problem(seed.wrapping_add(s), horizon)?;
        let a = simulate_weighted_noise_error(&p, &weighted, horizon)?;
        let b = simulate_weighted_noise_error(&p, &uniform, horizon)?;
        worst = worst.max(a.worst_ratio).max(b.worst_ratio);
        if a.norms[horizon] < b.norms[horizon] {
            wins += 1;
        }
    }
    Ok(BoundsSection {
        configurations: grid.len(),
        strict_dominance: strict,
        simulations: 2 * seeds as usize,
        worst_bound_ratio: worst,
        weighted_below_uniform: wins,
        passed: strict == grid.len() && worst <= 1.0 + BOUND_SLACK && wins >= 9,
    })
}

pub const THEORY_FORMAT: &str = "coggen-theory/1";

pub fn theory_report(section: TheorySection, seed: u64) -> Result<TheoryReport> {
    let want = |s| section == TheorySection::All || section == s;
    let spectral = want(TheorySection::Spectral).then(|| spectral_section(seed)).transpose()?;
    let pl = want(TheorySection::Pl).then(|| pl_section(seed)).transpose()?;
    let bounds = want(TheorySection::Bounds).then(|| bounds_section(seed)).transpose()?;
    let passed = spectral.as_ref().is_none_or(|s| s.passed)
        && pl.as_ref().is_none_or(|s| s.passed)
        && bounds.as_ref().is_none_or(|s| s.passed);
    Ok(TheoryReport {
        format: THEORY_FORMAT.to_string(),
        spectral,
        pl,
        bounds,
        passed,
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    fn real(v: &[f64]) -> Vec<Complex64> {
        v.iter().map(|&x| Complex64::new(x, 0.0)).collect()
    }

    #[test]
    fn landweber_diagonal_steady_state() {
        let a = SmallMatrix::diag_real(&[2.0, 1.0, 0.1]);
        let p = LinearProblem::new(a, real(&[1.0, -1.0, 0.5]), real(&[0.01; 3]), 0.1).unwrap();
        let h = landweber_trajectory(&p, 100_000, 0).unwrap();
        let expected = [0.005, 0.01, 0.1];
        for (e, target) in h.final_errors.iter().zip(expected) {
            assert!((e.norm() - target).abs() <= 0.01 * target);
        }
        assert!(h.fixed_point_violation(0.1) <= 1e-10);
    }

    #[test]
    fn landweber_noiseless_contracts() {
        let a = SmallMatrix::diag_real(&[1.0, 0.5]);
        let p = LinearProblem::new(a, real(&[1.0, 1.0]), real(&[0.0, 0.0]), 0.5).unwrap();
        let h = landweber_trajectory(&p, 10, 1).unwrap();
        for (t, errs) in &h.recorded {
            for (i, e) in errs.iter().enumerate() {
                let factor = (1.0 - 0.5 * h.sigma[i].powi(2)).abs().powi(*t as i32);
                assert!((e.norm() - factor * h.initial[i].norm()).abs() < 1e-14);
            }
        }
    }

    #[test]
    fn step_size_guard() {
        let a = SmallMatrix::diag_real(&[2.0]);
        let err = LinearProblem::new(a, real(&[0.0]), real(&[0.0]), 0.5).unwrap_err();
        assert!(matches!(err, Error::StepSizeTooLarge { .. }));
    }

    #[test]
    fn pl_identity_chain() {
        let i = SmallMatrix::identity(3);
        let c = pl_constants(&i, &i, &[1.0; 3]).unwrap();
        assert!((c.mu - 2.0).abs() < 1e-12 && (c.l - 2.0).abs() < 1e-12);
        let i2 = SmallMatrix::identity(2);
        let c = pl_constants(&i2, &i2, &[1.0, 1e-3]).unwrap();
        assert!((c.mu - 2e-6).abs() < 1e-15);
        let c = pl_constants(&i2, &i2, &[1.0, 0.0]).unwrap();
        assert_eq!(c.rank, 1);
        assert!((c.mu - 2.0).abs() < 1e-12);
        assert!(pl_constants(&SmallMatrix::identity(3), &i2, &[1.0; 2]).is_err());
    }

    #[test]
    fn stage_linear_scalar_quadratic() {
        let h = SmallMatrix::diag_real(&[1.0, 4.0]);
        let r = verify_stage_linear(&h, &real(&[1.0, 0.0]), 20, 0.25).unwrap();
        assert!((r.worst_step_ratio - 0.5625).abs() < 1e-14);
        assert!(r.worst_ratio <= 1.0);
        let r = verify_stage_linear(&h, &real(&[0.0, 0.0]), 20, 0.25).unwrap();
        assert!(r.gaps.iter().all(|&g| g == 0.0));
        assert!(verify_stage_linear(&h, &real(&[1.0, 0.0]), 5, 0.3).is_err());
    }

    #[test]
    fn acceleration_arithmetic() {
        let (a, b) = acceleration_bound(0.01, 0.1, 2.0, 1.0).unwrap();
        assert!((a - 100f64.ln() / 0.2).abs() < 1e-12);
        assert!((b - 100f64.ln() / 0.1).abs() < 1e-12);
        assert!(acceleration_bound(0.01, 0.1, 1.0, 1.0).is_err());
        assert!(acceleration_bound(1.5, 0.1, 2.0, 1.0).is_err());
    }

    fn constant_weighting(horizon: usize, tau: usize, rho: f64, v_bar: f64) -> StageWeighting {
        StageWeighting {
            weights: vec![vec![1.0]],
            stage_lengths: vec![horizon],
            tau,
            v_bar,
            rho: vec![rho],
        }
    }

    #[test]
    fn two_term_bounds() {
        let b = noise_imprint_bounds(&constant_weighting(2, 1, 0.5, 0.5), 1.0, 1.0, 1.0, 2).unwrap();
        assert!((b.b_dip - 1.5).abs() < 1e-15);
        assert!((b.b_coggen - 1.25).abs() < 1e-15);
        assert!((b.margin - 0.25).abs() < 1e-15);
        let near = noise_imprint_bounds(&constant_weighting(2, 1, 0.5, 1.0 - 1e-12), 1.0, 1.0, 1.0, 2).unwrap();
        assert!((near.b_dip - near.b_coggen).abs() < 1e-11);
        assert!(noise_imprint_bounds(&constant_weighting(2, 2, 0.5, 0.5), 1.0, 1.0, 1.0, 2).is_err());
    }

    #[test]
    fn geometric_series_closed_form() {
        for (rho, horizon) in [(0.5, 10), (0.9, 57), (0.999, 300)] {
            let b = noise_imprint_bounds(&constant_weighting(horizon, 0, rho, 1.0), 1.0, 1.0, 1.0, horizon).unwrap();
            let closed = (1.0 - rho.powi(horizon as i32)) / (1.0 - rho);
            assert!((b.b_dip - closed).abs() <= 1e-12 * closed);
        }
    }

    #[test]
    fn zero_noise_zero_trajectory() {
        let a = SmallMatrix::diag_real(&[1.0, 0.5]);
        let p = LinearProblem::new(a, real(&[0.0; 2]), real(&[0.0; 2]), 0.5).unwrap();
        let w = StageWeighting::measured(&p, vec![vec![1.0, 0.2]], vec![10], 5).unwrap();
        let sim = simulate_weighted_noise_error(&p, &w, 10).unwrap();
        assert!(sim.norms.iter().all(|&n| n == 0.0));
    }
}
