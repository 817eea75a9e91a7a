use std::collections::BTreeMap;
use std::io::Write;
use std::path::Path;

use serde::Serialize;

use crate::CliError;

/// Summary of one `densify` or `tonal` run.
#[derive(Debug, Clone, Default, Serialize)]
pub struct RunReport {
    pub command: Vec<String>,
    pub seed: Option<u64>,
    pub width: usize,
    pub height: usize,
    pub channels: usize,
    pub m: usize,
    pub p: usize,
    pub n: Option<usize>,
    /// Reconstruction error of the values before tonal optimisation.
    pub mse_before: Option<f64>,
    /// After tonal optimisation, unquantised values.
    pub mse_after: Option<f64>,
    /// After tonal optimisation with the 8-bit values stored in the payload.
    pub mse_after_quantised: Option<f64>,
    pub mae_before: Option<f64>,
    pub mae_after: Option<f64>,
    /// Seconds per stage.
    pub timings: BTreeMap<String, f64>,
    pub cg_iterations: BTreeMap<String, usize>,
    /// Rough upper estimate of the working memory beyond the input image.
    pub peak_aux_memory_bytes: usize,
    pub payload_bytes: usize,
}

/// One row of `bench`.
#[derive(Debug, Clone, Serialize)]
pub struct BenchRow {
    pub size: usize,
    pub pixels: usize,
    pub m: usize,
    pub spatial_seconds: f64,
    pub tonal_seconds: f64,
    pub mse_before: f64,
    pub mse_after: f64,
    pub outer_iterations: usize,
    pub inner_solves: usize,
    pub inner_iterations: usize,
}

#[derive(Debug, Clone, Serialize)]
pub struct BenchRatio {
    pub from: usize,
    pub to: usize,
    pub pixel_ratio: f64,
    pub spatial: f64,
    pub tonal: f64,
}

#[derive(Debug, Clone, Serialize)]
pub struct BenchReport {
    pub density: f64,
    pub iters: usize,
    pub seed: u64,
    pub repeats: usize,
    pub rows: Vec<BenchRow>,
    pub ratios: Vec<BenchRatio>,
}

/// Bytes held during tonal optimisation besides the input: pixel owner
/// table, three pixel planes (reconstruction, residual, weights), the
/// sparse matrices and a handful of vertex-sized CG vectors.
pub fn tonal_memory_estimate(pixels: usize, vertices: usize, nnz: usize) -> usize {
    pixels * (4 + 3 * 8) + nnz * 12 + vertices * 8 * 12
}

pub fn write_json<T: Serialize>(value: &T, path: &Path) -> Result<(), CliError> {
    let text = serde_json::to_string_pretty(value).expect("report serialises");
    if path.as_os_str() == "-" {
        let mut out = std::io::stdout().lock();
        writeln!(out, "{text}").map_err(harmonic_fem::Error::from)?;
    } else {
        std::fs::write(path, text + "\n").map_err(harmonic_fem::Error::from)?;
    }
    Ok(())
}
