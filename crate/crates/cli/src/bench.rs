use std::f64::consts::TAU;
use std::time::Instant;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use harmonic_fem::spatial::{densify, DensifyConfig};
use harmonic_fem::tonal::{tonal_optimise, ReconstructionOperator, DEFAULT_OUTER_MAX, DEFAULT_OUTER_TOL};
use harmonic_fem::Image;

use crate::args::BenchArgs;
use crate::report::{write_json, BenchRatio, BenchReport, BenchRow};
use crate::{mask_count_for, CliError};

/// Deterministic test image with a 1/f amplitude spectrum, like natural
/// photographs. Frequencies are in cycles per image and shared between
/// sizes, so a larger image shows the same scene plus finer detail.
pub fn synthetic_image(size: usize) -> Image {
    let mut rng = ChaCha8Rng::seed_from_u64(0x5eed);
    let mut acc = vec![0.0f64; size * size];
    let (mut cx, mut cy) = (vec![0.0; size], vec![0.0; size]);
    let mut octave = 1.0f64;
    while octave <= size as f64 / 4.0 {
        for _ in 0..8 {
            let f = octave * rng.gen_range(1.0..2.0);
            let theta = rng.gen_range(0.0..std::f64::consts::PI);
            let (fx, fy) = (f * theta.cos(), f * theta.sin());
            let (px, py) = (rng.gen_range(0.0..TAU), rng.gen_range(0.0..TAU));
            let amp = rng.gen_range(0.5..1.0) / f;
            for i in 0..size {
                let t = i as f64 / size as f64;
                cx[i] = (TAU * fx * t + px).cos();
                cy[i] = amp * (TAU * fy * t + py).cos();
            }
            for (row, &b) in acc.chunks_exact_mut(size).zip(&cy) {
                for (v, &a) in row.iter_mut().zip(&cx) {
                    *v += a * b;
                }
            }
        }
        octave *= 2.0;
    }
    let data = acc.into_iter().map(|v| (128.0 + 90.0 * v).clamp(0.0, 255.0)).collect();
    Image::new(size, size, 1, data).expect("non-empty image")
}

/// Centre crop of `f` shrunk to `size`×`size` by averaging square blocks
/// of `floor(min(w, h) / size)` pixels per side.
pub fn block_resample(f: &Image, size: usize) -> Result<Image, CliError> {
    let side = f.width().min(f.height());
    if size == 0 || size > side {
        return Err(CliError::Usage(format!("cannot resample a {}x{} image to {size}x{size}", f.width(), f.height())));
    }
    let k = side / size;
    let (x0, y0) = ((f.width() - k * size) / 2, (f.height() - k * size) / 2);
    let channels = f.channels();
    let mut data = vec![0.0; size * size * channels];
    for y in 0..size {
        for x in 0..size {
            for c in 0..channels {
                let mut sum = 0.0;
                for dy in 0..k {
                    for dx in 0..k {
                        sum += f.get(x0 + k * x + dx, y0 + k * y + dy, c);
                    }
                }
                data[(y * size + x) * channels + c] = sum / (k * k) as f64;
            }
        }
    }
    Ok(Image::new(size, size, channels, data)?)
}

#[derive(Debug, Clone)]
pub struct BenchConfig {
    pub sizes: Vec<usize>,
    pub density: f64,
    pub iters: usize,
    pub seed: u64,
    /// Each size is timed this often; the fastest run is kept.
    pub repeats: usize,
    /// Source image resampled to every size; the synthetic image otherwise.
    pub source: Option<Image>,
}

pub fn run_bench(cfg: &BenchConfig) -> Result<BenchReport, CliError> {
    if cfg.sizes.is_empty() {
        return Err(CliError::Usage("--sizes needs at least one size".into()));
    }
    if cfg.repeats == 0 {
        return Err(CliError::Usage("--repeats must be at least 1".into()));
    }
    let mut rows = Vec::with_capacity(cfg.sizes.len());
    for &size in &cfg.sizes {
        let f = match &cfg.source {
            Some(src) => block_resample(src, size)?,
            None => synthetic_image(size),
        };
        let m = mask_count_for(cfg.density, f.pixel_count())?;
        let dcfg = DensifyConfig::new(m, cfg.iters.min(m)).with_seed(cfg.seed);
        dcfg.validate(size, size).map_err(|e| CliError::Usage(e.to_string()))?;

        let mut row: Option<BenchRow> = None;
        for _ in 0..cfg.repeats {
            let start = Instant::now();
            let d = densify(&f, &dcfg)?;
            let spatial_seconds = start.elapsed().as_secs_f64();

            let start = Instant::now();
            let op = ReconstructionOperator::new(d.mesh, size, size)?;
            let result = tonal_optimise(&op, &f, DEFAULT_OUTER_TOL, DEFAULT_OUTER_MAX)?;
            let tonal_seconds = start.elapsed().as_secs_f64();

            match &mut row {
                Some(r) => {
                    r.spatial_seconds = r.spatial_seconds.min(spatial_seconds);
                    r.tonal_seconds = r.tonal_seconds.min(tonal_seconds);
                }
                None => {
                    row = Some(BenchRow {
                        size,
                        pixels: size * size,
                        m,
                        spatial_seconds,
                        tonal_seconds,
                        mse_before: result.mse_before,
                        mse_after: result.mse_after,
                        outer_iterations: result.outer_iterations,
                        inner_solves: result.inner_solves,
                        inner_iterations: op.inner_iterations(),
                    })
                }
            }
        }
        rows.extend(row);
    }
    let ratios = rows
        .windows(2)
        .map(|w| BenchRatio {
            from: w[0].size,
            to: w[1].size,
            pixel_ratio: w[1].pixels as f64 / w[0].pixels as f64,
            spatial: w[1].spatial_seconds / w[0].spatial_seconds,
            tonal: w[1].tonal_seconds / w[0].tonal_seconds,
        })
        .collect();
    Ok(BenchReport { density: cfg.density, iters: cfg.iters, seed: cfg.seed, repeats: cfg.repeats, rows, ratios })
}

pub fn cmd_bench(a: &BenchArgs) -> Result<(), CliError> {
    let source = a.input.as_ref().map(Image::load).transpose()?;
    let cfg = BenchConfig {
        sizes: a.sizes.clone(),
        density: a.density,
        iters: a.iters,
        seed: a.seed,
        repeats: a.repeats,
        source,
    };
    let report = run_bench(&cfg)?;
    println!(
        "{:>6} {:>9} {:>7} {:>10} {:>10} {:>9} {:>9} {:>8}",
        "size", "pixels", "m", "spatial/s", "tonal/s", "MSE", "MSE(TO)", "CG its"
    );
    for r in &report.rows {
        println!(
            "{:>6} {:>9} {:>7} {:>10.3} {:>10.3} {:>9.2} {:>9.2} {:>8}",
            r.size, r.pixels, r.m, r.spatial_seconds, r.tonal_seconds, r.mse_before, r.mse_after, r.inner_iterations
        );
    }
    for q in &report.ratios {
        println!(
            "{:>4} -> {:<4}  pixels x{:.2}  spatial x{:.2}  tonal x{:.2}",
            q.from, q.to, q.pixel_ratio, q.spatial, q.tonal
        );
    }
    if let Some(path) = &a.report {
        write_json(&report, path)?;
    }
    Ok(())
}
