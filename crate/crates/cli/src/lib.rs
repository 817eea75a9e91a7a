//! Library side of the `hfem` command-line tool.

pub mod args;
pub mod bench;
pub mod report;

use std::path::Path;
use std::time::Instant;

use harmonic_fem::codec::Payload;
use harmonic_fem::femsolve::{FemSystem, DEFAULT_TOL};
use harmonic_fem::image::{mean_abs_error, mse};
use harmonic_fem::spatial::{densify, DensifyConfig};
use harmonic_fem::tonal::{
    tonal_optimise, tonal_optimise_l1, ReconstructionOperator, DEFAULT_EPSILON, DEFAULT_IRLS_ITERS, DEFAULT_OUTER_MAX,
    DEFAULT_OUTER_TOL,
};
use harmonic_fem::{Error, Image};

use args::{Cli, Command, DecodeArgs, DensifyArgs, TonalArgs};
use report::{tonal_memory_estimate, write_json, RunReport};

#[derive(Debug)]
pub enum CliError {
    Usage(String),
    Core(Error),
}

impl From<Error> for CliError {
    fn from(e: Error) -> Self {
        CliError::Core(e)
    }
}

impl std::fmt::Display for CliError {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        match self {
            CliError::Usage(msg) => write!(f, "{msg}"),
            CliError::Core(e) => write!(f, "{e}"),
        }
    }
}

impl std::error::Error for CliError {}

impl CliError {
    /// 2 for bad arguments, 3 for unreadable or malformed files, 4 for
    /// numerical failures.
    pub fn exit_code(&self) -> i32 {
        match self {
            CliError::Usage(_) => 2,
            CliError::Core(e) if e.is_numerical() => 4,
            CliError::Core(
                Error::InvalidConfig(_)
                | Error::DimensionMismatch(_)
                | Error::InvalidImage(_)
                | Error::InvalidVertexSet(_),
            ) => 2,
            CliError::Core(_) => 3,
        }
    }
}

pub fn run(cli: Cli, argv: &[String]) -> Result<(), CliError> {
    if let Some(threads) = cli.threads {
        if threads == 0 {
            return Err(CliError::Usage("--threads must be at least 1".into()));
        }
        // Fails only if a pool already exists, in which case it is kept.
        let _ = rayon::ThreadPoolBuilder::new().num_threads(threads).build_global();
    }
    match cli.command {
        Command::Densify(a) => cmd_densify(&a, argv),
        Command::Tonal(a) => cmd_tonal(&a, argv),
        Command::Decode(a) => cmd_decode(&a),
        Command::Bench(a) => bench::cmd_bench(&a),
    }
}

/// `round(density * pixels)`, rejecting densities outside (0, 1).
pub fn mask_count_for(density: f64, pixels: usize) -> Result<usize, CliError> {
    if !(density > 0.0 && density < 1.0) {
        return Err(CliError::Usage(format!("--density must lie in (0, 1), got {density}")));
    }
    let m = (density * pixels as f64).round() as usize;
    if m == 0 {
        return Err(CliError::Usage(format!("density {density} selects no pixel of {pixels}")));
    }
    Ok(m)
}

fn write_payload(payload: &Payload, path: &Path) -> Result<usize, CliError> {
    let bytes = payload.encode();
    std::fs::write(path, &bytes).map_err(Error::from)?;
    Ok(bytes.len())
}

fn read_payload(path: &Path) -> Result<Payload, CliError> {
    let bytes = std::fs::read(path).map_err(Error::from)?;
    Ok(Payload::decode(&bytes)?)
}

fn cmd_densify(a: &DensifyArgs, argv: &[String]) -> Result<(), CliError> {
    let f = Image::load(&a.input)?;
    let pixels = f.pixel_count();
    let m = match (a.mask_count, a.density) {
        (Some(m), _) => m,
        (None, Some(d)) => mask_count_for(d, pixels)?,
        (None, None) => return Err(CliError::Usage("one of --density or --mask-count is required".into())),
    };
    let p = a.unknowns.unwrap_or(m.max(4));
    let cfg = DensifyConfig::new(m, a.iters).with_unknowns(p).with_seed(a.seed);
    cfg.validate(f.width(), f.height()).map_err(|e| CliError::Usage(e.to_string()))?;

    let start = Instant::now();
    let d = densify(&f, &cfg)?;
    let spatial = start.elapsed().as_secs_f64();

    let payload = Payload::from_mask(&d.mask, &d.unknowns, f.width(), f.height())?;
    let payload_bytes = write_payload(&payload, &a.out)?;
    if let Some(path) = &a.reconstruction {
        d.reconstruction.save(path)?;
    }
    let mse_before = mse(&d.reconstruction, &f)?;
    println!("densify: m = {m}, p = {p}, n = {}, MSE = {mse_before:.4}, {spatial:.3} s", a.iters);

    if let Some(path) = &a.report {
        let report = RunReport {
            command: argv.to_vec(),
            seed: Some(a.seed),
            width: f.width(),
            height: f.height(),
            channels: f.channels(),
            m,
            p,
            n: Some(a.iters),
            mse_before: Some(mse_before),
            mae_before: Some(mean_abs_error(&d.reconstruction, &f)?),
            timings: [("spatial".to_string(), spatial)].into(),
            cg_iterations: [("inpainting".to_string(), d.cg_iterations)].into(),
            peak_aux_memory_bytes: pixels * (4 + 8 * 3 * f.channels()) + d.mesh.vertices().len() * 64,
            payload_bytes,
            ..RunReport::default()
        };
        write_json(&report, path)?;
    }
    Ok(())
}

fn cmd_tonal(a: &TonalArgs, argv: &[String]) -> Result<(), CliError> {
    let f = Image::load(&a.input)?;
    let payload = read_payload(&a.payload)?;
    if (f.width(), f.height(), f.channels()) != (payload.width(), payload.height(), payload.channels()) {
        return Err(Error::DimensionMismatch(format!(
            "image is {}x{}x{}, payload {}x{}x{}",
            f.width(),
            f.height(),
            f.channels(),
            payload.width(),
            payload.height(),
            payload.channels()
        ))
        .into());
    }

    let start = Instant::now();
    let op = ReconstructionOperator::new(payload.mesh()?, f.width(), f.height())?;
    let setup = start.elapsed().as_secs_f64();
    let stored = op.reconstruct(&payload.mask_set().values, f.channels())?;
    let start = Instant::now();
    let result = if a.l1 {
        tonal_optimise_l1(&op, &f, DEFAULT_IRLS_ITERS, DEFAULT_EPSILON, DEFAULT_OUTER_TOL, DEFAULT_OUTER_MAX)?
    } else {
        tonal_optimise(&op, &f, DEFAULT_OUTER_TOL, DEFAULT_OUTER_MAX)?
    };
    let tonal = start.elapsed().as_secs_f64();

    let optimised = payload.with_values(&result.g_opt)?;
    let payload_bytes = write_payload(&optimised, &a.out)?;
    let quantised = op.reconstruct(&optimised.mask_set().values, f.channels())?;
    if let Some(path) = &a.reconstruction {
        quantised.save(path)?;
    }
    let (mse_before, mse_q) = (mse(&stored, &f)?, mse(&quantised, &f)?);
    println!(
        "tonal{}: MSE {mse_before:.4} -> {:.4} ({mse_q:.4} quantised), {} outer iterations, {tonal:.3} s",
        if a.l1 { " (L1)" } else { "" },
        result.mse_after,
        result.outer_iterations
    );

    if let Some(path) = &a.report {
        let split = op.system().split();
        let nnz = split.a_uu.nnz() + split.a_uk.nnz();
        let report = RunReport {
            command: argv.to_vec(),
            width: f.width(),
            height: f.height(),
            channels: f.channels(),
            m: payload.mask_positions().len(),
            p: payload.unknown_positions().len(),
            mse_before: Some(mse_before),
            mse_after: Some(result.mse_after),
            mse_after_quantised: Some(mse_q),
            mae_before: Some(mean_abs_error(&stored, &f)?),
            mae_after: Some(result.mae_after),
            timings: [("setup".to_string(), setup), ("tonal".to_string(), tonal)].into(),
            cg_iterations: [
                ("outer".to_string(), result.outer_iterations),
                ("inner_solves".to_string(), result.inner_solves),
            ]
            .into(),
            peak_aux_memory_bytes: tonal_memory_estimate(f.pixel_count(), op.system().mesh().vertices().len(), nnz),
            payload_bytes,
            ..RunReport::default()
        };
        write_json(&report, path)?;
    }
    Ok(())
}

fn cmd_decode(a: &DecodeArgs) -> Result<(), CliError> {
    let payload = read_payload(&a.payload)?;
    let system = FemSystem::new(payload.mesh()?, payload.width(), payload.height())?;
    let out = system.inpaint(&payload.mask_set().values, payload.channels(), DEFAULT_TOL, None)?;
    out.image.save(&a.out)?;
    println!("decode: {}x{}, {} mask pixels", payload.width(), payload.height(), payload.mask_positions().len());
    Ok(())
}
