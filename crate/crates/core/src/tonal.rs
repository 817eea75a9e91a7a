//! Tonal optimisation: least-squares mask values for a fixed mesh.
//!
//! The reconstruction is linear in the mask values, `u = B g`. `B` is dense
//! but never formed: applying it is one inpainting, applying `B^T` one more
//! solve with the same matrix. The normal equations `B^T B g = B^T f` are
//! solved by an outer conjugate gradient loop around these products.

use std::sync::atomic::{AtomicUsize, Ordering};

use rayon::prelude::*;

use crate::error::{Error, Result};
use crate::femsolve::sparse::{dot, norm};
use crate::femsolve::{cg_solve, default_max_iter, FemSystem, LinearOperator, Slot, DEFAULT_TOL};
use crate::image::{mean_abs_error, mse, Image};
use crate::mesh::TriMesh;

pub const DEFAULT_OUTER_TOL: f64 = 1e-4;
pub const DEFAULT_OUTER_MAX: usize = 200;
pub const DEFAULT_IRLS_ITERS: usize = 3;
pub const DEFAULT_EPSILON: f64 = 1.0;

/// The linear map from mask values to the reconstructed pixel plane.
#[derive(Debug)]
pub struct ReconstructionOperator {
    system: FemSystem,
    inner_tol: f64,
    inner_solves: AtomicUsize,
    inner_iterations: AtomicUsize,
    inner_capped: AtomicUsize,
}

impl ReconstructionOperator {
    pub fn new(mesh: TriMesh, width: usize, height: usize) -> Result<Self> {
        Ok(Self::from_system(FemSystem::new(mesh, width, height)?))
    }

    pub fn from_system(system: FemSystem) -> Self {
        Self {
            system,
            inner_tol: DEFAULT_TOL,
            inner_solves: AtomicUsize::new(0),
            inner_iterations: AtomicUsize::new(0),
            inner_capped: AtomicUsize::new(0),
        }
    }

    pub fn with_inner_tol(mut self, tol: f64) -> Self {
        self.inner_tol = tol;
        self
    }

    pub fn system(&self) -> &FemSystem {
        &self.system
    }

    pub fn mask_count(&self) -> usize {
        self.system.mask_count()
    }

    pub fn pixel_count(&self) -> usize {
        self.system.pixel_count()
    }

    /// Number of inner CG solves performed so far.
    pub fn inner_solves(&self) -> usize {
        self.inner_solves.load(Ordering::Relaxed)
    }

    /// Total inner CG iterations so far.
    pub fn inner_iterations(&self) -> usize {
        self.inner_iterations.load(Ordering::Relaxed)
    }

    /// Inner solves that stopped at the iteration cap.
    pub fn inner_capped(&self) -> usize {
        self.inner_capped.load(Ordering::Relaxed)
    }

    fn solve_uu(&self, rhs: &[f64]) -> Result<Vec<f64>> {
        self.inner_solves.fetch_add(1, Ordering::Relaxed);
        let a = &self.system.split().a_uu;
        let out = cg_solve(a, rhs, None, self.inner_tol, default_max_iter(rhs.len()))?;
        self.inner_iterations.fetch_add(out.iterations, Ordering::Relaxed);
        if !out.converged {
            self.inner_capped.fetch_add(1, Ordering::Relaxed);
        }
        Ok(out.x)
    }

    /// `B g` for one channel: the inpainting with mask values `g`.
    pub fn apply(&self, g: &[f64]) -> Result<Vec<f64>> {
        let mut out = vec![0.0; self.pixel_count()];
        self.apply_into(g, &mut out)?;
        Ok(out)
    }

    pub fn apply_into(&self, g: &[f64], out: &mut [f64]) -> Result<()> {
        if g.len() != self.mask_count() {
            return Err(Error::DimensionMismatch(format!(
                "{} values for {} mask vertices",
                g.len(),
                self.mask_count()
            )));
        }
        let u = self.solve_uu(&self.system.dirichlet_rhs(g))?;
        let values = self.system.vertex_values(g, &u);
        self.system.interpolate_into(&values, out);
        Ok(())
    }

    /// `B^T r = P_k^T r - A_uk^T A_uu^{-1} P_u^T r`, using the symmetry of `A_uu`.
    pub fn apply_adjoint(&self, r: &[f64]) -> Result<Vec<f64>> {
        if r.len() != self.pixel_count() {
            return Err(Error::DimensionMismatch(format!("{} values for {} pixels", r.len(), self.pixel_count())));
        }
        let split = self.system.split();
        let scattered = self.system.interpolate_adjoint(r);
        let mut s_k = vec![0.0; self.mask_count()];
        let mut s_u = vec![0.0; split.unknown_vertices.len()];
        for (slot, s) in split.slots.iter().zip(scattered) {
            match *slot {
                Slot::Mask(i) => s_k[i as usize] = s,
                Slot::Unknown(i) => s_u[i as usize] = s,
            }
        }
        if !s_u.is_empty() {
            let z = self.solve_uu(&s_u)?;
            let mut coupling = vec![0.0; s_k.len()];
            split.a_uk.mul_transpose_add(&z, &mut coupling);
            for (a, c) in s_k.iter_mut().zip(coupling) {
                *a -= c;
            }
        }
        Ok(s_k)
    }

    /// Values of channel `c` of `f` at the mask vertices, in mask order.
    pub fn restrict(&self, f: &Image, c: usize) -> Vec<f64> {
        let positions = self.system.mesh().vertices().positions();
        let (w, ch) = (f.width(), f.channels());
        self.system
            .split()
            .mask_vertices
            .iter()
            .map(|&v| {
                let p = positions[v as usize];
                f.data()[(p.y as usize * w + p.x as usize) * ch + c]
            })
            .collect()
    }

    /// Reconstruction of all channels from interleaved mask values.
    pub fn reconstruct(&self, g: &[f64], channels: usize) -> Result<Image> {
        let planes =
            (0..channels).into_par_iter().map(|c| self.apply(&channel(g, c, channels))).collect::<Result<Vec<_>>>()?;
        Image::from_planes(self.system.width(), self.system.height(), &planes)
    }

    fn check_image(&self, f: &Image) -> Result<()> {
        if (f.width(), f.height()) != (self.system.width(), self.system.height()) {
            return Err(Error::DimensionMismatch(format!(
                "image is {}x{}, mesh covers {}x{}",
                f.width(),
                f.height(),
                self.system.width(),
                self.system.height()
            )));
        }
        Ok(())
    }
}

/// `B^T W B` as an operator on mask values; `W` is a diagonal pixel weight.
struct NormalOperator<'a> {
    op: &'a ReconstructionOperator,
    weights: Option<&'a [f64]>,
}

impl LinearOperator for NormalOperator<'_> {
    fn dim(&self) -> usize {
        self.op.mask_count()
    }

    fn apply(&self, x: &[f64], y: &mut [f64]) -> Result<()> {
        let mut u = self.op.apply(x)?;
        if let Some(w) = self.weights {
            u.iter_mut().zip(w).for_each(|(a, b)| *a *= b);
        }
        y.copy_from_slice(&self.op.apply_adjoint(&u)?);
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct TonalResult {
    /// Optimised mask values, channel-interleaved.
    pub g_opt: Vec<f64>,
    /// Outer CG iterations summed over channels (and IRLS steps).
    pub outer_iterations: usize,
    pub inner_solves: usize,
    /// Largest final `||B^T W (B g - f)|| / ||B^T W f||` over channels.
    pub gradient_norm: f64,
    pub mse_before: f64,
    pub mse_after: f64,
    pub mae_before: f64,
    pub mae_after: f64,
    /// Reconstruction from `g_opt`.
    pub reconstruction: Image,
}

struct ChannelOutcome {
    g: Vec<f64>,
    iterations: usize,
    gradient: f64,
}

fn channel(data: &[f64], c: usize, channels: usize) -> Vec<f64> {
    data.iter().skip(c).step_by(channels).copied().collect()
}

fn interleave(planes: &[Vec<f64>]) -> Vec<f64> {
    let len = planes.first().map_or(0, Vec::len);
    (0..len).flat_map(|i| planes.iter().map(move |p| p[i])).collect()
}

/// Solves `B^T W B g = B^T W f` from `g0` by outer CG.
fn solve_normal(
    op: &ReconstructionOperator,
    f: &[f64],
    weights: Option<&[f64]>,
    g0: &[f64],
    outer_tol: f64,
    outer_max: usize,
) -> Result<ChannelOutcome> {
    let rhs = match weights {
        Some(w) => op.apply_adjoint(&f.iter().zip(w).map(|(a, b)| a * b).collect::<Vec<_>>())?,
        None => op.apply_adjoint(f)?,
    };
    let normal = NormalOperator { op, weights };
    let out = cg_solve(&normal, &rhs, Some(g0), outer_tol, outer_max)?;
    Ok(ChannelOutcome { g: out.x, iterations: out.iterations, gradient: out.relative_residual })
}

fn finish(
    op: &ReconstructionOperator,
    f: &Image,
    g0: Vec<f64>,
    outcomes: Vec<ChannelOutcome>,
    solves_before: usize,
    prefer_l1: bool,
) -> Result<TonalResult> {
    let channels = f.channels();
    let before = op.reconstruct(&g0, channels)?;
    let planes: Vec<Vec<f64>> = outcomes.iter().map(|o| o.g.clone()).collect();
    let g_opt = interleave(&planes);
    let after = op.reconstruct(&g_opt, channels)?;
    let (mse_before, mae_before) = (mse(&before, f)?, mean_abs_error(&before, f)?);
    let (mse_after, mae_after) = (mse(&after, f)?, mean_abs_error(&after, f)?);
    let outer_iterations = outcomes.iter().map(|o| o.iterations).sum();
    let gradient_norm = outcomes.iter().map(|o| o.gradient).fold(0.0, f64::max);
    let inner_solves = op.inner_solves() - solves_before;
    let worse = if prefer_l1 { mae_after > mae_before } else { mse_after > mse_before };
    // Never return something worse than the starting values.
    if worse {
        return Ok(TonalResult {
            g_opt: g0,
            outer_iterations,
            inner_solves,
            gradient_norm,
            mse_before,
            mse_after: mse_before,
            mae_before,
            mae_after: mae_before,
            reconstruction: before,
        });
    }
    Ok(TonalResult {
        g_opt,
        outer_iterations,
        inner_solves,
        gradient_norm,
        mse_before,
        mse_after,
        mae_before,
        mae_after,
        reconstruction: after,
    })
}

/// Least-squares optimal mask values for reconstructing `f`, starting from
/// `f` sampled at the mask. Channels are optimised independently.
pub fn tonal_optimise(op: &ReconstructionOperator, f: &Image, outer_tol: f64, outer_max: usize) -> Result<TonalResult> {
    op.check_image(f)?;
    let solves_before = op.inner_solves();
    let channels = f.channels();
    let g0: Vec<Vec<f64>> = (0..channels).map(|c| op.restrict(f, c)).collect();
    let outcomes = (0..channels)
        .into_par_iter()
        .map(|c| solve_normal(op, &f.plane(c), None, &g0[c], outer_tol, outer_max))
        .collect::<Result<Vec<_>>>()?;
    finish(op, f, interleave(&g0), outcomes, solves_before, false)
}

/// Mask values minimising the L1 reconstruction error, by iteratively
/// reweighted least squares with weights `1 / max(|r|, epsilon)`.
///
/// Starts from the least-squares optimum; a reweighted step is kept only if
/// it does not increase the L1 error.
pub fn tonal_optimise_l1(
    op: &ReconstructionOperator,
    f: &Image,
    irls_iters: usize,
    epsilon: f64,
    outer_tol: f64,
    outer_max: usize,
) -> Result<TonalResult> {
    op.check_image(f)?;
    if epsilon.is_nan() || epsilon <= 0.0 {
        return Err(Error::InvalidConfig(format!("IRLS epsilon {epsilon} must be positive")));
    }
    let solves_before = op.inner_solves();
    let channels = f.channels();
    let g0: Vec<Vec<f64>> = (0..channels).map(|c| op.restrict(f, c)).collect();
    let outcomes = (0..channels)
        .into_par_iter()
        .map(|c| {
            let fc = f.plane(c);
            let mut best = solve_normal(op, &fc, None, &g0[c], outer_tol, outer_max)?;
            let mut u = op.apply(&best.g)?;
            let mut l1 = l1_distance(&u, &fc);
            for _ in 0..irls_iters {
                let weights: Vec<f64> = u.iter().zip(&fc).map(|(a, b)| 1.0 / (a - b).abs().max(epsilon)).collect();
                let step = solve_normal(op, &fc, Some(&weights), &best.g, outer_tol, outer_max)?;
                let u_next = op.apply(&step.g)?;
                let l1_next = l1_distance(&u_next, &fc);
                if l1_next > l1 {
                    break;
                }
                let iterations = best.iterations + step.iterations;
                best = ChannelOutcome { iterations, ..step };
                u = u_next;
                l1 = l1_next;
            }
            Ok(best)
        })
        .collect::<Result<Vec<_>>>()?;
    finish(op, f, interleave(&g0), outcomes, solves_before, true)
}

fn l1_distance(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| (x - y).abs()).sum()
}

/// `||B^T (B g - f)|| / ||B^T f||` for one channel.
pub fn relative_gradient(op: &ReconstructionOperator, g: &[f64], f: &[f64]) -> Result<f64> {
    let u = op.apply(g)?;
    let r: Vec<f64> = u.iter().zip(f).map(|(a, b)| a - b).collect();
    let grad = op.apply_adjoint(&r)?;
    let scale = norm(&op.apply_adjoint(f)?);
    Ok(if scale == 0.0 { norm(&grad) } else { norm(&grad) / scale })
}

/// `<B x, y>` and `<x, B^T y>`, the two sides of the adjoint identity.
pub fn adjoint_pair(op: &ReconstructionOperator, x: &[f64], y: &[f64]) -> Result<(f64, f64)> {
    Ok((dot(&op.apply(x)?, y), dot(x, &op.apply_adjoint(y)?)))
}
