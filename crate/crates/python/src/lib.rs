//! Python bindings. Configs cross the boundary as JSON text; images as
//! nested lists of Python `complex`.

use coggen::config::ExperimentConfig;
use coggen::metrics::{rlne_roi as rlne, RoiMask};
use coggen::optimizer::reconstruct as run_reconstruct;
use coggen::theory::{theory_report, TheorySection};
use coggen::{ComplexGrid, Error};
use num_complex::Complex64;
use pyo3::exceptions::{PyIOError, PyRuntimeError, PyValueError};
use pyo3::prelude::*;
use pyo3::types::PyDict;

fn to_py(err: Error) -> PyErr {
    let msg = err.to_string();
    if err.is_io() {
        PyIOError::new_err(msg)
    } else if err.is_numerical() {
        PyRuntimeError::new_err(msg)
    } else {
        PyValueError::new_err(msg)
    }
}

pub fn load_config(config_json: &str, seed: Option<u64>) -> coggen::Result<ExperimentConfig> {
    let cfg = ExperimentConfig::from_json(config_json)?;
    Ok(seed.map_or(cfg.clone(), |s| cfg.with_seed(s)))
}

pub fn grid_rows(grid: &ComplexGrid) -> Vec<Vec<Complex64>> {
    grid.data().chunks(grid.width()).map(<[Complex64]>::to_vec).collect()
}

pub fn grid_from_rows(rows: Vec<Vec<Complex64>>) -> coggen::Result<ComplexGrid> {
    let height = rows.len();
    let width = rows.first().map_or(0, Vec::len);
    if rows.iter().any(|r| r.len() != width) {
        return Err(Error::BadDims("ragged rows".into()));
    }
    ComplexGrid::new(height, width, rows.into_iter().flatten().collect())
}

pub fn parse_section(name: &str) -> coggen::Result<TheorySection> {
    match name {
        "spectral" => Ok(TheorySection::Spectral),
        "pl" => Ok(TheorySection::Pl),
        "bounds" => Ok(TheorySection::Bounds),
        "all" => Ok(TheorySection::All),
        other => Err(Error::BadConfig(format!("unknown theory section {other:?}"))),
    }
}

#[pyfunction]
#[pyo3(signature = (config_json = "{}", seed = None))]
fn gen_phantom(config_json: &str, seed: Option<u64>) -> PyResult<Vec<Vec<Complex64>>> {
    let cfg = load_config(config_json, seed).map_err(to_py)?;
    let grid = coggen::phantom::gen_phantom(&cfg.phantom).map_err(to_py)?;
    Ok(grid_rows(&grid))
}

#[pyfunction]
#[pyo3(signature = (config_json = "{}", seed = None))]
fn gen_mask(config_json: &str, seed: Option<u64>) -> PyResult<Vec<Vec<bool>>> {
    let cfg = load_config(config_json, seed).map_err(to_py)?;
    let mask = cfg.build_mask().map_err(to_py)?;
    Ok(mask.selected.chunks(mask.shape().1).map(<[bool]>::to_vec).collect())
}

/// Returns a dict with `image`, `curve` (tuples of iteration, stage, loss,
/// rlne_roi, psnr_db) and `iterations`.
#[pyfunction]
#[pyo3(signature = (config_json = "{}", seed = None, vanilla = false))]
fn reconstruct<'py>(
    py: Python<'py>,
    config_json: &str,
    seed: Option<u64>,
    vanilla: bool,
) -> PyResult<Bound<'py, PyDict>> {
    let mut cfg = load_config(config_json, seed).map_err(to_py)?;
    cfg.optimizer.vanilla_mode |= vanilla;
    let result = py
        .detach(|| {
            let data = cfg.build_problem()?;
            run_reconstruct(&cfg.run_config(), &data.mask, &data.y, Some(&data.ground_truth), None)
        })
        .map_err(to_py)?;
    let curve: Vec<(usize, usize, f64, Option<f64>, Option<f64>)> = result
        .curve
        .iter()
        .map(|p| (p.iteration, p.stage, p.loss, p.rlne_roi, p.psnr_db))
        .collect();
    let out = PyDict::new(py);
    out.set_item("image", grid_rows(&result.image))?;
    out.set_item("curve", curve)?;
    out.set_item("iterations", result.iterations)?;
    Ok(out)
}

/// RLNE of `estimate` against `reference` over the whole image.
#[pyfunction]
fn rlne_roi(reference: Vec<Vec<Complex64>>, estimate: Vec<Vec<Complex64>>) -> PyResult<f64> {
    let x = grid_from_rows(reference).map_err(to_py)?;
    let xhat = grid_from_rows(estimate).map_err(to_py)?;
    let (h, w) = x.shape();
    rlne(&x, &xhat, &RoiMask::full(h, w)).map_err(to_py)
}

/// Runs theory checks and returns the JSON report text.
#[pyfunction]
#[pyo3(signature = (section = "all", seed = 0))]
fn verify_theory(py: Python<'_>, section: &str, seed: u64) -> PyResult<String> {
    let section = parse_section(section).map_err(to_py)?;
    let report = py.detach(|| theory_report(section, seed)).map_err(to_py)?;
    serde_json::to_string(&report).map_err(|e| to_py(e.into()))
}

#[pyfunction]
fn read_grid(path: &str) -> PyResult<Vec<Vec<Complex64>>> {
    coggen::io::read_grid(path).map(|g| grid_rows(&g)).map_err(to_py)
}

#[pyfunction]
fn write_grid(path: &str, rows: Vec<Vec<Complex64>>) -> PyResult<()> {
    let grid = grid_from_rows(rows).map_err(to_py)?;
    coggen::io::write_grid(path, &grid).map_err(to_py)
}

#[pymodule]
fn coggen_py(m: &Bound<'_, PyModule>) -> PyResult<()> {
    m.add_function(wrap_pyfunction!(gen_phantom, m)?)?;
    m.add_function(wrap_pyfunction!(gen_mask, m)?)?;
    m.add_function(wrap_pyfunction!(reconstruct, m)?)?;
    m.add_function(wrap_pyfunction!(rlne_roi, m)?)?;
    m.add_function(wrap_pyfunction!(verify_theory, m)?)?;
    m.add_function(wrap_pyfunction!(read_grid, m)?)?;
    m.add_function(wrap_pyfunction!(write_grid, m)?)?;
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn rows_round_trip() {
        let grid = ComplexGrid::new(2, 3, (0..6).map(|i| Complex64::new(i as f64, -1.0)).collect()).unwrap();
        let rows = grid_rows(&grid);
        assert_eq!(rows.len(), 2);
        assert_eq!(rows[1][0], Complex64::new(3.0, -1.0));
        assert_eq!(grid_from_rows(rows).unwrap(), grid);
        assert!(grid_from_rows(vec![vec![Complex64::new(0.0, 0.0)], vec![]]).is_err());
    }

    #[test]
    fn sections_and_seed() {
        assert_eq!(parse_section("pl").unwrap(), TheorySection::Pl);
        assert!(parse_section("nope").is_err());
        assert_eq!(load_config("{}", Some(9)).unwrap().seed, 9);
        assert!(load_config("[", None).is_err());
    }
}
