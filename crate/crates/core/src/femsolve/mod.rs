//! Linear finite elements for the Laplace equation on a [`TriMesh`].
//!
//! Mask vertices carry Dirichlet values; the image border gets the natural
//! (homogeneous Neumann) condition for free because no boundary terms are
//! assembled. The reconstruction on the pixel grid is the piecewise linear
//! interpolant of the vertex solution.

pub mod cg;
pub mod sparse;

use rayon::prelude::*;

pub use cg::{cg_solve, default_max_iter, CgOutcome, DEFAULT_TOL};
pub use sparse::{CsrMatrix, LinearOperator};

use crate::error::{Error, Result};
use crate::image::Image;
use crate::mesh::predicates::{orient, Point};
use crate::mesh::{bin_pixels, PixelBinning, TriMesh, VertexRole, VertexSet};

/// Element stiffness matrix of a linear triangle: off-diagonal `(i, j)` is
/// `-cot(angle opposite edge ij) / 2`, rows sum to zero.
pub fn local_stiffness(p: [Point; 3]) -> Option<[[f64; 3]; 3]> {
    let cross = orient(p[0], p[1], p[2]);
    if cross == 0 {
        return None;
    }
    let cross = cross.abs() as f64;
    let mut k = [[0.0; 3]; 3];
    for corner in 0..3 {
        let (i, j) = ((corner + 1) % 3, (corner + 2) % 3);
        let (c, a, b) = (p[corner], p[i], p[j]);
        let dot = (a.x - c.x) * (b.x - c.x) + (a.y - c.y) * (b.y - c.y);
        let w = 0.5 * dot as f64 / cross;
        k[i][j] -= w;
        k[j][i] -= w;
        k[i][i] += w;
        k[j][j] += w;
    }
    Some(k)
}

/// Global stiffness matrix over all mesh vertices.
///
/// Each edge gets the weight `(cot a + cot b) / 2` from the angles opposite
/// it. Interior edges of a Delaunay mesh have non-negative weights; a hull
/// edge sees a single angle, and when that angle is obtuse its weight is
/// clamped to zero so the matrix stays an M-matrix and the reconstruction
/// obeys the discrete maximum principle.
pub fn assemble_stiffness(mesh: &TriMesh) -> Result<CsrMatrix> {
    let n = mesh.vertices().len();
    let mut edges: Vec<(u32, u32, f64)> = Vec::with_capacity(3 * mesh.triangles().len());
    for (t, tri) in mesh.triangles().iter().enumerate() {
        let k = local_stiffness(mesh.triangle_points(t)).ok_or(Error::ZeroAreaTriangle(t))?;
        for (a, b) in [(0, 1), (1, 2), (2, 0)] {
            let (i, j) = (tri[a].min(tri[b]), tri[a].max(tri[b]));
            edges.push((i, j, -k[a][b]));
        }
    }
    let edges = sparse::sort_triplets(n, edges);

    let mut triplets = Vec::with_capacity(2 * edges.len() + n);
    let mut diagonal = vec![0.0; n];
    let mut k = 0;
    while k < edges.len() {
        let (i, j, mut w) = edges[k];
        let mut shared = 1;
        while k + shared < edges.len() && (edges[k + shared].0, edges[k + shared].1) == (i, j) {
            w += edges[k + shared].2;
            shared += 1;
        }
        k += shared;
        if shared == 1 {
            w = w.max(0.0);
        }
        triplets.push((i, j, -w));
        triplets.push((j, i, -w));
        diagonal[i as usize] += w;
        diagonal[j as usize] += w;
    }
    triplets.extend(diagonal.iter().enumerate().map(|(i, &d)| (i as u32, i as u32, d)));
    Ok(CsrMatrix::from_triplets(n, n, triplets))
}

/// Position of a vertex inside the unknown or mask block.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Slot {
    Unknown(u32),
    Mask(u32),
}

/// The stiffness matrix split by vertex role. Mask values are ordered as
/// the mask vertices appear in the vertex set.
#[derive(Debug, Clone)]
pub struct DirichletSplit {
    /// Unknown-unknown block (symmetric positive definite).
    pub a_uu: CsrMatrix,
    /// Unknown-mask block; `A_uu u = -A_uk g` gives the free values.
    pub a_uk: CsrMatrix,
    pub unknown_vertices: Vec<u32>,
    pub mask_vertices: Vec<u32>,
    pub slots: Vec<Slot>,
}

pub fn reduce_dirichlet(a: &CsrMatrix, vertices: &VertexSet) -> Result<DirichletSplit> {
    assert_eq!(a.nrows(), vertices.len(), "matrix and vertex set disagree");
    let mut slots = Vec::with_capacity(vertices.len());
    let (mut unknown_vertices, mut mask_vertices) = (Vec::new(), Vec::new());
    for (v, role) in vertices.roles().iter().enumerate() {
        match role {
            VertexRole::Unknown => {
                slots.push(Slot::Unknown(unknown_vertices.len() as u32));
                unknown_vertices.push(v as u32);
            }
            VertexRole::Mask => {
                slots.push(Slot::Mask(mask_vertices.len() as u32));
                mask_vertices.push(v as u32);
            }
        }
    }
    if mask_vertices.is_empty() {
        return Err(Error::Singular("no mask vertex, the Neumann problem has no unique solution".into()));
    }
    let (mut uu, mut uk) = (Vec::new(), Vec::new());
    for (r, &v) in unknown_vertices.iter().enumerate() {
        for (c, val) in a.row(v as usize) {
            match slots[c] {
                Slot::Unknown(j) => uu.push((r as u32, j, val)),
                Slot::Mask(j) => uk.push((r as u32, j, val)),
            }
        }
    }
    let (nu, nk) = (unknown_vertices.len(), mask_vertices.len());
    Ok(DirichletSplit {
        a_uu: CsrMatrix::from_triplets(nu, nu, uu),
        a_uk: CsrMatrix::from_triplets(nu, nk, uk),
        unknown_vertices,
        mask_vertices,
        slots,
    })
}

/// Everything derived from one mesh that repeated solves can share: the
/// reduced matrices and the pixel binning.
#[derive(Debug, Clone)]
pub struct FemSystem {
    mesh: TriMesh,
    split: DirichletSplit,
    binning: PixelBinning,
}

/// Vertex values, pixel values and solver outcome of one channel.
type ChannelSolve = (Vec<f64>, Vec<f64>, CgOutcome);

/// Outcome of one harmonic inpainting.
#[derive(Debug, Clone)]
pub struct InpaintResult {
    /// Per-vertex values, channel-interleaved like [`Image`] data.
    pub vertex_values: Vec<f64>,
    pub image: Image,
    /// CG iterations summed over channels.
    pub iterations: usize,
    /// Largest final relative residual over channels.
    pub residual: f64,
    pub converged: bool,
}

impl FemSystem {
    pub fn new(mesh: TriMesh, width: usize, height: usize) -> Result<Self> {
        mesh.vertices().check_covers_image(width, height)?;
        let a = assemble_stiffness(&mesh)?;
        let split = reduce_dirichlet(&a, mesh.vertices())?;
        let binning = bin_pixels(&mesh, width, height);
        Ok(Self { mesh, split, binning })
    }

    pub fn mesh(&self) -> &TriMesh {
        &self.mesh
    }

    pub fn split(&self) -> &DirichletSplit {
        &self.split
    }

    pub fn binning(&self) -> &PixelBinning {
        &self.binning
    }

    pub fn width(&self) -> usize {
        self.binning.width()
    }

    pub fn height(&self) -> usize {
        self.binning.height()
    }

    pub fn pixel_count(&self) -> usize {
        self.width() * self.height()
    }

    pub fn mask_count(&self) -> usize {
        self.split.mask_vertices.len()
    }

    pub fn unknown_count(&self) -> usize {
        self.split.unknown_vertices.len()
    }

    /// `-A_uk g`.
    pub fn dirichlet_rhs(&self, g: &[f64]) -> Vec<f64> {
        let mut rhs = vec![0.0; self.unknown_count()];
        self.split.a_uk.mul_vec(g, &mut rhs);
        rhs.iter_mut().for_each(|v| *v = -*v);
        rhs
    }

    /// Solves for the unknown-vertex values of one channel.
    pub fn solve_unknowns(&self, g: &[f64], x0: Option<&[f64]>, tol: f64) -> Result<CgOutcome> {
        assert_eq!(g.len(), self.mask_count(), "one value per mask vertex expected");
        let rhs = self.dirichlet_rhs(g);
        let n = self.unknown_count();
        cg_solve(&self.split.a_uu, &rhs, x0, tol, default_max_iter(n))
    }

    /// Merges mask and unknown values into one per-vertex vector.
    pub fn vertex_values(&self, g: &[f64], u: &[f64]) -> Vec<f64> {
        self.split
            .slots
            .iter()
            .map(|s| match *s {
                Slot::Unknown(i) => u[i as usize],
                Slot::Mask(i) => g[i as usize],
            })
            .collect()
    }

    /// Piecewise linear interpolation of per-vertex values onto the pixel
    /// grid. Pixels at vertices reproduce the vertex value exactly.
    pub fn interpolate(&self, vertex_values: &[f64]) -> Vec<f64> {
        let mut out = vec![0.0; self.pixel_count()];
        self.interpolate_into(vertex_values, &mut out);
        out
    }

    pub fn interpolate_into(&self, vertex_values: &[f64], out: &mut [f64]) {
        assert_eq!(vertex_values.len(), self.mesh.vertices().len());
        assert_eq!(out.len(), self.pixel_count());
        let width = self.width();
        out.par_chunks_mut(width).enumerate().for_each(|(y, row)| {
            self.for_each_weight_in_row(y, |x, tri, w| {
                row[x] = w[0] * vertex_values[tri[0] as usize]
                    + w[1] * vertex_values[tri[1] as usize]
                    + w[2] * vertex_values[tri[2] as usize];
            });
        });
    }

    /// Calls `visit(x, triangle, weights)` for every pixel of row `y`.
    /// Runs of pixels with the same owner share the triangle lookup, and the
    /// integer edge functions advance by constant steps along the run.
    fn for_each_weight_in_row(&self, y: usize, mut visit: impl FnMut(usize, [u32; 3], [f64; 3])) {
        let width = self.width();
        let owners = &self.binning.owners()[y * width..(y + 1) * width];
        let mut x = 0;
        while x < width {
            let t = owners[x];
            let end = owners[x..].iter().position(|&o| o != t).map_or(width, |k| x + k);
            let tri = self.mesh.triangles()[t as usize];
            let [a, b, c] = self.mesh.triangle_points(t as usize);
            let area = orient(a, b, c);
            let inv = 1.0 / area as f64;
            let q = Point::new(x as i64, y as i64);
            let mut e = [orient(q, b, c), orient(a, q, c), orient(a, b, q)];
            let step = [b.y - c.y, c.y - a.y, a.y - b.y];
            for xx in x..end {
                let w = if let Some(k) = e.iter().position(|&v| v == area) {
                    // exactly on a vertex
                    let mut w = [0.0; 3];
                    w[k] = 1.0;
                    w
                } else if e.iter().all(|&v| v >= 0) {
                    e.map(|v| v as f64 * inv)
                } else {
                    self.binning.weights(&self.mesh, y * width + xx)
                };
                visit(xx, tri, w);
                for k in 0..3 {
                    e[k] += step[k];
                }
            }
            x = end;
        }
    }

    /// Transpose of [`interpolate`](Self::interpolate): scatters pixel
    /// values back onto the vertices with the same weights.
    pub fn interpolate_adjoint(&self, pixel_values: &[f64]) -> Vec<f64> {
        assert_eq!(pixel_values.len(), self.pixel_count());
        let mut out = vec![0.0; self.mesh.vertices().len()];
        let width = self.width();
        for (y, row) in pixel_values.chunks_exact(width).enumerate() {
            self.for_each_weight_in_row(y, |x, tri, w| {
                let r = row[x];
                for k in 0..3 {
                    out[tri[k] as usize] += w[k] * r;
                }
            });
        }
        out
    }

    /// Inpaints all channels. `g` holds `channels` interleaved values per
    /// mask vertex; `warm_start`, if given, holds per-pixel values (e.g. a
    /// previous reconstruction) used as the initial guess at unknown vertices.
    pub fn inpaint(&self, g: &[f64], channels: usize, tol: f64, warm_start: Option<&Image>) -> Result<InpaintResult> {
        let m = self.mask_count();
        if g.len() != m * channels {
            return Err(Error::DimensionMismatch(format!(
                "{} mask values for {m} mask vertices and {channels} channels",
                g.len()
            )));
        }
        let width = self.width();
        let positions = self.mesh.vertices().positions();
        let solves: Vec<Result<ChannelSolve>> = (0..channels)
            .into_par_iter()
            .map(|c| {
                let gc: Vec<f64> = g.iter().skip(c).step_by(channels).copied().collect();
                let x0 = warm_start.map(|img| {
                    self.split
                        .unknown_vertices
                        .iter()
                        .map(|&v| {
                            let p = positions[v as usize];
                            img.data()[(p.y as usize * width + p.x as usize) * img.channels() + c]
                        })
                        .collect::<Vec<f64>>()
                });
                let outcome = self.solve_unknowns(&gc, x0.as_deref(), tol)?;
                let values = self.vertex_values(&gc, &outcome.x);
                let plane = self.interpolate(&values);
                Ok((values, plane, outcome))
            })
            .collect();

        let nv = positions.len();
        let mut vertex_values = vec![0.0; nv * channels];
        let mut planes = Vec::with_capacity(channels);
        let (mut iterations, mut residual, mut converged) = (0, 0.0f64, true);
        for (c, solve) in solves.into_iter().enumerate() {
            let (values, plane, outcome) = solve?;
            for (v, val) in values.into_iter().enumerate() {
                vertex_values[v * channels + c] = val;
            }
            planes.push(plane);
            iterations += outcome.iterations;
            residual = residual.max(outcome.relative_residual);
            converged &= outcome.converged;
        }
        let image = Image::from_planes(width, self.height(), &planes)?;
        Ok(InpaintResult { vertex_values, image, iterations, residual, converged })
    }
}

/// One-shot harmonic inpainting of a `width` x `height` image.
pub fn inpaint(
    mesh: &TriMesh,
    g: &[f64],
    channels: usize,
    width: usize,
    height: usize,
    tol: f64,
) -> Result<InpaintResult> {
    FemSystem::new(mesh.clone(), width, height)?.inpaint(g, channels, tol, None)
}
