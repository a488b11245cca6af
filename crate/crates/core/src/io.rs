//! On-disk formats.
//!
//! CGIM layout (all little-endian): `b"CGIM"`, `u32` version (1), `u32`
//! height, `u32` width, `u8` dtype, then the row-major payload. dtype 0 is
//! complex f64 stored as interleaved `(re, im)`; dtype 1 is one byte (0/1)
//! per mask position.

use std::fs;
use std::io::Write;
use std::path::Path;

use num_complex::Complex64;
use serde::{Deserialize, Serialize};

use crate::config::ExperimentConfig;
use crate::error::{Error, Result};
use crate::forward::SamplingMask;
use crate::generator::GeneratorParams;
use crate::math::ComplexGrid;
use crate::optimizer::{CurvePoint, ReconResult};

pub const MAGIC: &[u8; 4] = b"CGIM";
pub const VERSION: u32 = 1;
pub const DTYPE_COMPLEX: u8 = 0;
pub const DTYPE_MASK: u8 = 1;
const HEADER_LEN: usize = 17;

pub const CURVE_HEADER: &str = "iteration,stage,loss,rlne_roi,psnr_db";
pub const REPORT_FORMAT: &str = "coggen-report/1";

fn header(height: usize, width: usize, dtype: u8) -> Vec<u8> {
    let mut out = Vec::with_capacity(HEADER_LEN);
    out.extend_from_slice(MAGIC);
    out.extend_from_slice(&VERSION.to_le_bytes());
    out.extend_from_slice(&(height as u32).to_le_bytes());
    out.extend_from_slice(&(width as u32).to_le_bytes());
    out.push(dtype);
    out
}

fn parse_header(bytes: &[u8]) -> Result<(usize, usize, u8, &[u8])> {
    if bytes.len() < 4 {
        return Err(Error::TruncatedFile);
    }
    if &bytes[..4] != MAGIC {
        return Err(Error::BadMagic);
    }
    if bytes.len() < HEADER_LEN {
        return Err(Error::TruncatedFile);
    }
    let word = |i: usize| u32::from_le_bytes(bytes[i..i + 4].try_into().expect("4 bytes"));
    let version = word(4);
    if version != VERSION {
        return Err(Error::UnsupportedVersion(version));
    }
    Ok((word(8) as usize, word(12) as usize, bytes[16], &bytes[HEADER_LEN..]))
}

fn check_payload(payload: &[u8], expected: usize) -> Result<()> {
    match payload.len().cmp(&expected) {
        std::cmp::Ordering::Less => Err(Error::TruncatedFile),
        std::cmp::Ordering::Greater => Err(Error::TrailingBytes),
        std::cmp::Ordering::Equal => Ok(()),
    }
}

pub fn encode_grid(grid: &ComplexGrid) -> Vec<u8> {
    let mut out = header(grid.height(), grid.width(), DTYPE_COMPLEX);
    out.reserve(grid.len() * 16);
    for z in grid.data() {
        out.extend_from_slice(&z.re.to_le_bytes());
        out.extend_from_slice(&z.im.to_le_bytes());
    }
    out
}

pub fn decode_grid(bytes: &[u8]) -> Result<ComplexGrid> {
    let (h, w, dtype, payload) = parse_header(bytes)?;
    if dtype != DTYPE_COMPLEX {
        return Err(Error::BadDtype(dtype));
    }
    check_payload(payload, h * w * 16)?;
    let f = |c: &[u8]| f64::from_le_bytes(c.try_into().expect("8 bytes"));
    let data = payload
        .chunks_exact(16)
        .map(|c| Complex64::new(f(&c[..8]), f(&c[8..])))
        .collect();
    ComplexGrid::new(h, w, data)
}

pub fn encode_mask(mask: &SamplingMask) -> Vec<u8> {
    let (h, w) = mask.shape();
    let mut out = header(h, w, DTYPE_MASK);
    out.extend(mask.selected.iter().map(|&b| b as u8));
    out
}

/// The file stores only the selection; the pattern is re-inferred and the
/// nominal acceleration factor is the achieved one.
pub fn decode_mask(bytes: &[u8]) -> Result<SamplingMask> {
    let (h, w, dtype, payload) = parse_header(bytes)?;
    if dtype != DTYPE_MASK {
        return Err(Error::BadDtype(dtype));
    }
    check_payload(payload, h * w)?;
    let selected = payload
        .iter()
        .map(|&b| match b {
            0 => Ok(false),
            1 => Ok(true),
            other => Err(Error::BadInputs(format!("mask byte {other} is not 0 or 1"))),
        })
        .collect::<Result<Vec<_>>>()?;
    SamplingMask::from_selection(h, w, selected)
}

pub fn write_grid(path: impl AsRef<Path>, grid: &ComplexGrid) -> Result<()> {
    Ok(fs::write(path, encode_grid(grid))?)
}

pub fn read_grid(path: impl AsRef<Path>) -> Result<ComplexGrid> {
    decode_grid(&fs::read(path)?)
}

pub fn write_mask(path: impl AsRef<Path>, mask: &SamplingMask) -> Result<()> {
    Ok(fs::write(path, encode_mask(mask))?)
}

pub fn read_mask(path: impl AsRef<Path>) -> Result<SamplingMask> {
    decode_mask(&fs::read(path)?)
}

fn fmt_float(x: f64) -> String {
    if x.is_nan() {
        "nan".into()
    } else {
        format!("{x:.9e}")
    }
}

pub fn format_curve_csv(curve: &[CurvePoint]) -> String {
    let mut out = String::from(CURVE_HEADER);
    out.push('\n');
    for p in curve {
        out.push_str(&format!(
            "{},{},{},{},{}\n",
            p.iteration,
            p.stage,
            fmt_float(p.loss),
            fmt_float(p.rlne_roi.unwrap_or(f64::NAN)),
            fmt_float(p.psnr_db.unwrap_or(f64::NAN)),
        ));
    }
    out
}

pub fn parse_curve_csv(text: &str) -> Result<Vec<CurvePoint>> {
    let mut lines = text.lines();
    if lines.next() != Some(CURVE_HEADER) {
        return Err(Error::BadInputs("missing curve header".into()));
    }
    let bad = |line: &str| Error::BadInputs(format!("malformed curve row: {line}"));
    lines
        .filter(|l| !l.is_empty())
        .map(|line| {
            let fields: Vec<&str> = line.split(',').collect();
            if fields.len() != 5 {
                return Err(bad(line));
            }
            let float = |s: &str| s.parse::<f64>().map_err(|_| bad(line));
            let optional = |s: &str| float(s).map(|v| (!v.is_nan()).then_some(v));
            Ok(CurvePoint {
                iteration: fields[0].parse().map_err(|_| bad(line))?,
                stage: fields[1].parse().map_err(|_| bad(line))?,
                loss: float(fields[2])?,
                rlne_roi: optional(fields[3])?,
                psnr_db: optional(fields[4])?,
            })
        })
        .collect()
}

pub fn write_curve_csv(path: impl AsRef<Path>, curve: &[CurvePoint]) -> Result<()> {
    Ok(fs::write(path, format_curve_csv(curve))?)
}

pub fn read_curve_csv(path: impl AsRef<Path>) -> Result<Vec<CurvePoint>> {
    parse_curve_csv(&fs::read_to_string(path)?)
}

/// Binary 8-bit PGM of `|x|`, scaled so the peak maps to 255.
pub fn write_pgm(path: impl AsRef<Path>, grid: &ComplexGrid) -> Result<()> {
    let peak = grid.max_magnitude();
    let scale = if peak > 0.0 { 255.0 / peak } else { 0.0 };
    let mut file = fs::File::create(path)?;
    write!(file, "P5\n{} {}\n255\n", grid.width(), grid.height())?;
    let bytes: Vec<u8> = grid
        .data()
        .iter()
        .map(|z| (z.norm() * scale).round().clamp(0.0, 255.0) as u8)
        .collect();
    file.write_all(&bytes)?;
    Ok(())
}

pub fn write_params(path: impl AsRef<Path>, params: &GeneratorParams) -> Result<()> {
    Ok(fs::write(path, serde_json::to_string(params)?)?)
}

pub fn read_params(path: impl AsRef<Path>) -> Result<GeneratorParams> {
    let params: GeneratorParams = serde_json::from_str(&fs::read_to_string(path)?)?;
    let fresh = GeneratorParams::zeros(&params.config, params.fourier_matrix.clone())?;
    if fresh.layers != params.layers || fresh.values.len() != params.values.len() || !params.is_finite() {
        return Err(Error::BadInputs("checkpoint layout does not match its config".into()));
    }
    Ok(params)
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct FinalMetrics {
    pub iterations: usize,
    pub loss: f64,
    pub rlne_roi: Option<f64>,
    pub psnr_db: Option<f64>,
    pub best_rlne_roi: Option<f64>,
    pub best_iteration: Option<usize>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct StageSummary {
    pub stage: usize,
    pub iterations: usize,
    /// Absent for uniform (vanilla) fitting.
    pub lambda: Option<f64>,
    pub r: Option<f64>,
    /// `(weight, count)` pairs, ascending by weight.
    pub weight_levels: Vec<(f64, usize)>,
    pub wall_time_s: f64,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct RunReport {
    pub format: String,
    pub config: ExperimentConfig,
    pub vanilla: bool,
    pub final_metrics: FinalMetrics,
    pub stages: Vec<StageSummary>,
    pub curve_file: String,
    /// Theory-lab verdict when a theory run accompanied the experiment.
    pub theory_passed: Option<bool>,
}

impl RunReport {
    pub fn new(config: &ExperimentConfig, result: &ReconResult, curve_file: &str) -> Self {
        let last = result.final_point();
        let best = result.best_rlne();
        let stages = result
            .stages
            .iter()
            .zip(&result.weights_per_stage)
            .map(|(s, w)| StageSummary {
                stage: s.stage,
                iterations: s.iterations,
                lambda: s.lambda.is_finite().then_some(s.lambda),
                r: s.r.is_finite().then_some(s.r),
                weight_levels: w.level_counts(),
                wall_time_s: s.wall_time_s,
            })
            .collect();
        Self {
            format: REPORT_FORMAT.to_string(),
            config: config.clone(),
            vanilla: config.optimizer.vanilla_mode,
            final_metrics: FinalMetrics {
                iterations: result.iterations,
                loss: last.loss,
                rlne_roi: last.rlne_roi,
                psnr_db: last.psnr_db,
                best_rlne_roi: best.map(|b| b.0),
                best_iteration: best.map(|b| b.1),
            },
            stages,
            curve_file: curve_file.to_string(),
            theory_passed: None,
        }
    }
}
