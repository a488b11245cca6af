//! Coordinate-based generator: Gaussian Fourier features followed by a sine
//! MLP with a linear two-channel (real, imaginary) head.
//!
//! All pixels are pushed through the network as one batch, so every layer is
//! a single GEMM. Trainable parameters live in one flat vector (per layer:
//! row-major weights `[fan_out x fan_in]`, then biases) which the optimizers
//! treat as an opaque array.

use std::f64::consts::PI;

use num_complex::Complex64;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Normal};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::forward::{MeasurementOperator, MeasurementSet, SamplingMask};
use crate::math::{trig, ComplexGrid};
use crate::spcl::WeightVector;

/// Residual norms below this are treated as an exact fit (zero gradient).
const RESIDUAL_FLOOR: f64 = 1e-14;

#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
pub enum Activation {
    #[default]
    #[serde(rename = "SINE")]
    Sine,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct InrConfig {
    /// Number of width -> width sine layers after the input layer.
    pub hidden_layers: usize,
    pub hidden_width: usize,
    pub fourier_features: usize,
    pub fourier_scale: f64,
    pub activation: Activation,
    pub omega0: f64,
}

impl Default for InrConfig {
    fn default() -> Self {
        Self {
            hidden_layers: 4,
            hidden_width: 128,
            fourier_features: 64,
            fourier_scale: 10.0,
            activation: Activation::Sine,
            omega0: 30.0,
        }
    }
}

impl InrConfig {
    /// The large configuration (8 hidden layers of 256).
    pub fn full_scale() -> Self {
        Self {
            hidden_layers: 8,
            hidden_width: 256,
            ..Self::default()
        }
    }

    pub fn validate(&self) -> Result<()> {
        if self.hidden_layers == 0 {
            return Err(Error::BadConfig("hidden_layers must be >= 1".into()));
        }
        if self.hidden_width == 0 || self.fourier_features == 0 {
            return Err(Error::BadConfig("widths must be >= 1".into()));
        }
        if !(self.fourier_scale > 0.0) || !self.fourier_scale.is_finite() {
            return Err(Error::BadConfig("fourier_scale must be > 0".into()));
        }
        if !(self.omega0 > 0.0) || !self.omega0.is_finite() {
            return Err(Error::BadConfig("omega0 must be > 0".into()));
        }
        Ok(())
    }

    pub fn input_dim(&self) -> usize {
        2 * self.fourier_features
    }

    /// `(fan_in, fan_out)` of every trainable layer, output layer last.
    pub fn layer_shapes(&self) -> Vec<(usize, usize)> {
        let w = self.hidden_width;
        let mut shapes = vec![(self.input_dim(), w)];
        shapes.extend(std::iter::repeat_n((w, w), self.hidden_layers));
        shapes.push((w, 2));
        shapes
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct LayerShape {
    pub fan_in: usize,
    pub fan_out: usize,
    /// Offset of the weight block in the flat parameter vector.
    pub offset: usize,
}

impl LayerShape {
    pub fn weight_range(&self) -> std::ops::Range<usize> {
        self.offset..self.offset + self.fan_in * self.fan_out
    }

    pub fn bias_range(&self) -> std::ops::Range<usize> {
        let start = self.offset + self.fan_in * self.fan_out;
        start..start + self.fan_out
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct GeneratorParams {
    pub config: InrConfig,
    /// Fixed `[fourier_features x 2]` frequency matrix, row-major.
    pub fourier_matrix: Vec<f64>,
    pub layers: Vec<LayerShape>,
    pub values: Vec<f64>,
}

impl GeneratorParams {
    /// Zero-valued parameters with the right layout.
    pub fn zeros(config: &InrConfig, fourier_matrix: Vec<f64>) -> Result<Self> {
        config.validate()?;
        if fourier_matrix.len() != 2 * config.fourier_features {
            return Err(Error::BadConfig(format!(
                "fourier matrix has {} entries, expected {}",
                fourier_matrix.len(),
                2 * config.fourier_features
            )));
        }
        let mut layers = Vec::new();
        let mut offset = 0;
        for (fan_in, fan_out) in config.layer_shapes() {
            layers.push(LayerShape {
                fan_in,
                fan_out,
                offset,
            });
            offset += fan_in * fan_out + fan_out;
        }
        Ok(Self {
            config: config.clone(),
            fourier_matrix,
            layers,
            values: vec![0.0; offset],
        })
    }

    pub fn total_count(&self) -> usize {
        self.values.len()
    }

    pub fn weights(&self, layer: usize) -> &[f64] {
        &self.values[self.layers[layer].weight_range()]
    }

    pub fn bias(&self, layer: usize) -> &[f64] {
        &self.values[self.layers[layer].bias_range()]
    }

    pub fn weights_mut(&mut self, layer: usize) -> &mut [f64] {
        let range = self.layers[layer].weight_range();
        &mut self.values[range]
    }

    pub fn bias_mut(&mut self, layer: usize) -> &mut [f64] {
        let range = self.layers[layer].bias_range();
        &mut self.values[range]
    }

    pub fn is_finite(&self) -> bool {
        self.values.iter().all(|v| v.is_finite())
            && self.fourier_matrix.iter().all(|v| v.is_finite())
    }
}

/// Sine-network initialization: first layer `U(-1/fan_in, 1/fan_in)`, later
/// layers `U(-sqrt(6/fan_in)/omega0, +sqrt(6/fan_in)/omega0)`; biases share
/// their layer's bound. Fourier rows are `N(0, fourier_scale^2)`.
pub fn init_inr(config: &InrConfig, seed: u64) -> Result<GeneratorParams> {
    config.validate()?;
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let normal = Normal::new(0.0, config.fourier_scale).expect("validated scale");
    let fourier: Vec<f64> = (0..2 * config.fourier_features)
        .map(|_| normal.sample(&mut rng))
        .collect();
    let mut params = GeneratorParams::zeros(config, fourier)?;
    for k in 0..params.layers.len() {
        let bound = layer_init_bound(config, k, params.layers[k].fan_in);
        let range = params.layers[k].offset..params.layers[k].bias_range().end;
        for v in &mut params.values[range] {
            *v = rng.random_range(-bound..=bound);
        }
    }
    Ok(params)
}

pub fn layer_init_bound(config: &InrConfig, layer: usize, fan_in: usize) -> f64 {
    if layer == 0 {
        1.0 / fan_in as f64
    } else {
        (6.0 / fan_in as f64).sqrt() / config.omega0
    }
}

/// Pixel coordinates on `[-1, 1]^2`, endpoints included.
#[derive(Clone, Debug, PartialEq)]
pub struct CoordinateGrid {
    pub height: usize,
    pub width: usize,
    pub coords: Vec<[f64; 2]>,
}

impl CoordinateGrid {
    pub fn new(height: usize, width: usize) -> Self {
        let axis = |i: usize, n: usize| {
            if n == 1 {
                0.0
            } else {
                -1.0 + 2.0 * i as f64 / (n - 1) as f64
            }
        };
        let coords = (0..height * width)
            .map(|p| [axis(p / width, height), axis(p % width, width)])
            .collect();
        Self {
            height,
            width,
            coords,
        }
    }

    pub fn len(&self) -> usize {
        self.coords.len()
    }

    pub fn is_empty(&self) -> bool {
        self.coords.is_empty()
    }
}

/// `gamma(p) = [sin(2 pi B p); cos(2 pi B p)]`, one row per pixel.
pub fn fourier_encoding(fourier_matrix: &[f64], grid: &CoordinateGrid) -> Vec<f64> {
    let features = fourier_matrix.len() / 2;
    let mut out = vec![0.0; grid.len() * 2 * features];
    for (p, row) in out.chunks_exact_mut(2 * features).enumerate() {
        let [u, v] = grid.coords[p];
        for j in 0..features {
            let phase = 2.0 * PI * (fourier_matrix[2 * j] * u + fourier_matrix[2 * j + 1] * v);
            row[j] = phase.sin();
            row[features + j] = phase.cos();
        }
    }
    out
}

/// Batched evaluator that keeps the activations of the last forward pass for
/// the backward pass.
pub struct InrEvaluator {
    height: usize,
    width: usize,
    encoding: Vec<f64>,
    /// Post-activation output of every sine layer.
    acts: Vec<Vec<f64>>,
    /// `omega0 * cos(omega0 * z)` for every sine layer.
    slopes: Vec<Vec<f64>>,
    out: Vec<f64>,
    delta: Vec<f64>,
}

impl InrEvaluator {
    pub fn new(params: &GeneratorParams, grid: &CoordinateGrid) -> Self {
        let pixels = grid.len();
        let sine_layers = params.layers.len() - 1;
        let width = params.config.hidden_width;
        Self {
            height: grid.height,
            width: grid.width,
            encoding: fourier_encoding(&params.fourier_matrix, grid),
            acts: vec![vec![0.0; pixels * width]; sine_layers],
            slopes: vec![vec![0.0; pixels * width]; sine_layers],
            out: vec![0.0; pixels * 2],
            delta: vec![0.0; pixels * width],
        }
    }

    pub fn pixels(&self) -> usize {
        self.height * self.width
    }

    pub fn forward(&mut self, params: &GeneratorParams) -> Result<ComplexGrid> {
        let pixels = self.pixels();
        let omega0 = params.config.omega0;
        let n_layers = params.layers.len();
        for k in 0..n_layers {
            let shape = &params.layers[k];
            let is_output = k + 1 == n_layers;
            let mut z = if is_output {
                std::mem::take(&mut self.out)
            } else {
                std::mem::take(&mut self.acts[k])
            };
            let input: &[f64] = if k == 0 {
                &self.encoding
            } else {
                &self.acts[k - 1]
            };
            linear(
                input,
                params.weights(k),
                params.bias(k),
                pixels,
                shape.fan_in,
                shape.fan_out,
                &mut z,
            );
            if is_output {
                self.out = z;
            } else {
                trig::sine_with_slope(&mut z, &mut self.slopes[k], omega0);
                self.acts[k] = z;
            }
        }
        let data: Vec<Complex64> = self
            .out
            .chunks_exact(2)
            .map(|o| Complex64::new(o[0], o[1]))
            .collect();
        if data.iter().any(|z| !z.re.is_finite() || !z.im.is_finite()) {
            return Err(Error::NonFinite("generator output"));
        }
        Ok(ComplexGrid::from_raw(self.height, self.width, data))
    }

    /// Accumulates nothing: overwrites `grad` with `d loss / d params` given
    /// `d loss / d (Re x, Im x)` packed as a complex grid. Must follow a
    /// `forward` with the same parameters.
    pub fn backward(&mut self, params: &GeneratorParams, d_image: &ComplexGrid, grad: &mut [f64]) {
        assert_eq!(grad.len(), params.values.len());
        let pixels = self.pixels();
        let n_layers = params.layers.len();

        // Output layer: delta is d/d(out), P x 2.
        let mut d_out = vec![0.0; pixels * 2];
        for (d, z) in d_out.chunks_exact_mut(2).zip(d_image.data()) {
            d[0] = z.re;
            d[1] = z.im;
        }

        let mut cur = d_out;
        let mut next = std::mem::take(&mut self.delta);
        for k in (0..n_layers).rev() {
            let shape = &params.layers[k];
            let input: &[f64] = if k == 0 {
                &self.encoding
            } else {
                &self.acts[k - 1]
            };
            // dW = delta^T * input, db = column sums of delta
            gemm_at_b(
                &cur,
                input,
                pixels,
                shape.fan_out,
                shape.fan_in,
                &mut grad[shape.weight_range()],
            );
            let db = &mut grad[shape.bias_range()];
            db.iter_mut().for_each(|v| *v = 0.0);
            for row in cur.chunks_exact(shape.fan_out) {
                for (b, d) in db.iter_mut().zip(row) {
                    *b += d;
                }
            }
            if k == 0 {
                break;
            }
            // d(input) = delta * W, then back through the sine of layer k-1.
            next.resize(pixels * shape.fan_in, 0.0);
            gemm_a_b(&cur, params.weights(k), pixels, shape.fan_out, shape.fan_in, &mut next);
            for (d, s) in next.iter_mut().zip(&self.slopes[k - 1]) {
                *d *= s;
            }
            std::mem::swap(&mut cur, &mut next);
        }
        self.delta = if next.len() >= cur.len() { next } else { cur };
    }
}

/// `z = x * W^T + b` for `x: [m x k]`, `W: [n x k]`.
fn linear(x: &[f64], w: &[f64], b: &[f64], m: usize, k: usize, n: usize, z: &mut Vec<f64>) {
    z.resize(m * n, 0.0);
    for row in z.chunks_exact_mut(n) {
        row.copy_from_slice(b);
    }
    unsafe {
        matrixmultiply::dgemm(
            m,
            k,
            n,
            1.0,
            x.as_ptr(),
            k as isize,
            1,
            w.as_ptr(),
            1,
            k as isize,
            1.0,
            z.as_mut_ptr(),
            n as isize,
            1,
        );
    }
}

/// `out = a^T * b` for `a: [p x m]`, `b: [p x n]`, `out: [m x n]`.
fn gemm_at_b(a: &[f64], b: &[f64], p: usize, m: usize, n: usize, out: &mut [f64]) {
    debug_assert_eq!(out.len(), m * n);
    unsafe {
        matrixmultiply::dgemm(
            m,
            p,
            n,
            1.0,
            a.as_ptr(),
            1,
            m as isize,
            b.as_ptr(),
            n as isize,
            1,
            0.0,
            out.as_mut_ptr(),
            n as isize,
            1,
        );
    }
}

/// `out = a * b` for `a: [p x m]`, `b: [m x n]`, `out: [p x n]`.
fn gemm_a_b(a: &[f64], b: &[f64], p: usize, m: usize, n: usize, out: &mut [f64]) {
    debug_assert_eq!(out.len(), p * n);
    unsafe {
        matrixmultiply::dgemm(
            p,
            m,
            n,
            1.0,
            a.as_ptr(),
            m as isize,
            1,
            b.as_ptr(),
            n as isize,
            1,
            0.0,
            out.as_mut_ptr(),
            n as isize,
            1,
        );
    }
}

pub fn inr_forward(params: &GeneratorParams, grid: &CoordinateGrid) -> Result<ComplexGrid> {
    InrEvaluator::new(params, grid).forward(params)
}

/// The normalized weighted data term `||v (A x - y)|| / ||v y||` with its
/// gradient with respect to the image.
#[derive(Clone, Debug)]
pub struct WeightedDataTerm {
    op: MeasurementOperator,
    y: Vec<Complex64>,
    v: Vec<f64>,
    denom: f64,
}

impl WeightedDataTerm {
    pub fn new(op: MeasurementOperator, y: &[Complex64], v: &[f64]) -> Result<Self> {
        if y.len() != op.len() || v.len() != y.len() {
            return Err(Error::LengthMismatch {
                left: y.len(),
                right: v.len(),
            });
        }
        let denom = y
            .iter()
            .zip(v)
            .map(|(yi, vi)| (yi * vi).norm_sqr())
            .sum::<f64>()
            .sqrt();
        if !(denom > 0.0) {
            return Err(Error::DegenerateDenominator);
        }
        Ok(Self {
            op,
            y: y.to_vec(),
            v: v.to_vec(),
            denom,
        })
    }

    pub fn set_weights(&mut self, v: &[f64]) -> Result<()> {
        let next = Self::new(self.op.clone(), &self.y, v)?;
        *self = next;
        Ok(())
    }

    pub fn weights(&self) -> &[f64] {
        &self.v
    }

    pub fn denominator(&self) -> f64 {
        self.denom
    }

    pub fn operator(&self) -> &MeasurementOperator {
        &self.op
    }

    pub fn loss(&self, image: &ComplexGrid) -> Result<f64> {
        let pred = self.op.forward(image)?;
        Ok(self.weighted_residual_norm(&pred) / self.denom)
    }

    fn weighted_residual_norm(&self, pred: &[Complex64]) -> f64 {
        pred.iter()
            .zip(&self.y)
            .zip(&self.v)
            .map(|((p, y), v)| ((p - y) * v).norm_sqr())
            .sum::<f64>()
            .sqrt()
    }

    /// Loss and `dL/d(Re x, Im x)` packed as a complex grid:
    /// `A^H (v^2 (A x - y)) / (||v (A x - y)|| ||v y||)`.
    pub fn loss_and_image_gradient(&self, image: &ComplexGrid) -> Result<(f64, ComplexGrid)> {
        let pred = self.op.forward(image)?;
        let num = self.weighted_residual_norm(&pred);
        let loss = num / self.denom;
        let (h, w) = self.op.shape();
        if num < RESIDUAL_FLOOR {
            return Ok((loss, ComplexGrid::zeros(h, w)));
        }
        let scale = 1.0 / (num * self.denom);
        let direction: Vec<Complex64> = pred
            .iter()
            .zip(&self.y)
            .zip(&self.v)
            .map(|((p, y), v)| (p - y) * (v * v * scale))
            .collect();
        Ok((loss, self.op.adjoint(&direction)?))
    }
}

/// Loss `||v (A f(z) - y)|| / ||v y||` and its exact gradient with respect to
/// every trainable parameter.
pub fn loss_and_gradient(
    params: &GeneratorParams,
    grid: &CoordinateGrid,
    mask: &SamplingMask,
    y: &MeasurementSet,
    v: &WeightVector,
) -> Result<(f64, Vec<f64>)> {
    if y.mask.selected != mask.selected {
        return Err(Error::ShapeMismatch("measurements belong to a different mask".into()));
    }
    let term = WeightedDataTerm::new(MeasurementOperator::new(mask), &y.values, &v.v)?;
    let mut eval = InrEvaluator::new(params, grid);
    let image = eval.forward(params)?;
    let (loss, d_image) = term.loss_and_image_gradient(&image)?;
    let mut grad = vec![0.0; params.values.len()];
    eval.backward(params, &d_image, &mut grad);
    Ok((loss, grad))
}
