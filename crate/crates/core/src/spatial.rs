//! Spatial optimisation: coarse-to-fine densification of the mask.
//!
//! Starting from a small random mask, every iteration inpaints, measures the
//! squared error per triangle and inserts one new mask pixel into each of the
//! worst triangles, at its worst empty pixel.

use rand::seq::index;
use rand_chacha::rand_core::SeedableRng;
use rand_chacha::ChaCha8Rng;

use crate::error::{Error, Result};
use crate::femsolve::{FemSystem, DEFAULT_TOL};
use crate::image::{error_map, ErrorMap, Image};
use crate::mesh::{hilbert_key, image_corners, PixelBinning, Point, TriMesh, Triangulation, VertexRole, VertexSet};

#[derive(Debug, Clone, PartialEq)]
pub struct DensifyConfig {
    /// Number of mask pixels to select.
    pub m: usize,
    /// Number of iterations (inpaintings).
    pub n: usize,
    /// Number of unknown vertices, corners included.
    pub p: usize,
    pub seed: u64,
    /// Relative residual tolerance of the inpainting solves.
    pub tol: f64,
}

impl DensifyConfig {
    /// `m` mask pixels in `n` iterations with as many unknown vertices as
    /// mask pixels.
    pub fn new(m: usize, n: usize) -> Self {
        Self { m, n, p: m.max(4), seed: 0, tol: DEFAULT_TOL }
    }

    pub fn with_unknowns(mut self, p: usize) -> Self {
        self.p = p;
        self
    }

    pub fn with_seed(mut self, seed: u64) -> Self {
        self.seed = seed;
        self
    }

    pub fn validate(&self, width: usize, height: usize) -> Result<()> {
        if width < 2 || height < 2 {
            return Err(Error::InvalidConfig(format!("image {width}x{height} is too small to triangulate")));
        }
        if self.m == 0 || self.n == 0 || self.n > self.m {
            return Err(Error::InvalidConfig(format!("need 1 <= n <= m, got m = {}, n = {}", self.m, self.n)));
        }
        if self.p < 4 {
            return Err(Error::InvalidConfig(format!("p = {} but the 4 corners are unknown vertices", self.p)));
        }
        if self.m + self.p > width * height {
            return Err(Error::InvalidConfig(format!(
                "m + p = {} exceeds the {} pixels of the image",
                self.m + self.p,
                width * height
            )));
        }
        if self.tol.is_nan() || self.tol <= 0.0 {
            return Err(Error::InvalidConfig(format!("tolerance {} must be positive", self.tol)));
        }
        Ok(())
    }

    /// Mask pixels present after iteration `t` (cumulative ceiling, so the
    /// first batch is `ceil(m / n)` and the last iteration reaches `m`).
    pub fn cumulative(&self, t: usize) -> usize {
        (self.m * (t + 1)).div_ceil(self.n)
    }

    pub fn batch(&self, t: usize) -> usize {
        if t == 0 {
            self.cumulative(0)
        } else {
            self.cumulative(t) - self.cumulative(t - 1)
        }
    }
}

/// Mask pixel positions with their stored values.
#[derive(Debug, Clone, PartialEq)]
pub struct MaskSet {
    /// Row-major pixel indices.
    pub positions: Vec<usize>,
    /// `channels` interleaved values per position.
    pub values: Vec<f64>,
    pub channels: usize,
}

impl MaskSet {
    /// Samples `f` at `positions`.
    pub fn sample(f: &Image, positions: Vec<usize>) -> Self {
        let c = f.channels();
        let values = positions.iter().flat_map(|&i| f.data()[i * c..(i + 1) * c].iter().copied()).collect();
        Self { positions, values, channels: c }
    }

    pub fn len(&self) -> usize {
        self.positions.len()
    }

    pub fn is_empty(&self) -> bool {
        self.positions.is_empty()
    }

    /// Same mask, sorted by ascending pixel index.
    pub fn canonical(&self) -> Self {
        let mut order: Vec<usize> = (0..self.len()).collect();
        order.sort_unstable_by_key(|&k| self.positions[k]);
        let c = self.channels;
        Self {
            positions: order.iter().map(|&k| self.positions[k]).collect(),
            values: order.iter().flat_map(|&k| self.values[k * c..(k + 1) * c].iter().copied()).collect(),
            channels: c,
        }
    }
}

/// Mesh in canonical vertex order: mask pixels by ascending index, then
/// unknown vertices by ascending index. Encoder and decoder both build the
/// mesh this way.
pub fn canonical_mesh(width: usize, mask: &[usize], unknowns: &[usize]) -> Result<TriMesh> {
    let mut mask = mask.to_vec();
    let mut unknowns = unknowns.to_vec();
    mask.sort_unstable();
    unknowns.sort_unstable();
    TriMesh::delaunay(VertexSet::from_pixels(width, &mask, &unknowns)?)
}

/// Sum of the error map over the pixels owned by each triangle.
pub fn triangle_errors(e: &ErrorMap, binning: &PixelBinning, triangle_count: usize) -> Vec<f64> {
    assert_eq!((e.width(), e.height()), (binning.width(), binning.height()), "error map and binning disagree");
    let mut errs = vec![0.0; triangle_count];
    for (&o, &v) in binning.owners().iter().zip(e.values()) {
        errs[o as usize] += v;
    }
    errs
}

/// Result of [`densify`].
#[derive(Debug, Clone)]
pub struct Densified {
    /// Canonical (ascending) mask with values read from the input image.
    pub mask: MaskSet,
    /// Ascending unknown-vertex pixel indices.
    pub unknowns: Vec<usize>,
    /// Mesh in canonical vertex order.
    pub mesh: TriMesh,
    /// Inpainting of the final mask.
    pub reconstruction: Image,
    pub inpaintings: usize,
    pub cg_iterations: usize,
}

/// Selects `cfg.m` mask pixels of `f` in `cfg.n` iterations.
pub fn densify(f: &Image, cfg: &DensifyConfig) -> Result<Densified> {
    let (width, height) = (f.width(), f.height());
    cfg.validate(width, height)?;
    let pixels = width * height;
    let mut rng = ChaCha8Rng::seed_from_u64(cfg.seed);

    // Iteration 0: random mask batch, random unknown vertices (corners forced).
    let mut is_vertex = vec![false; pixels];
    let mask0: Vec<usize> = index::sample(&mut rng, pixels, cfg.batch(0)).into_vec();
    for &i in &mask0 {
        is_vertex[i] = true;
    }
    let mut unknowns: Vec<usize> = image_corners(width, height)
        .iter()
        .map(|c| c.y as usize * width + c.x as usize)
        .filter(|&i| !is_vertex[i])
        .collect();
    for &i in &unknowns {
        is_vertex[i] = true;
    }
    let pool: Vec<usize> = (0..pixels).filter(|&i| !is_vertex[i]).collect();
    let extra = cfg.p - unknowns.len();
    unknowns.extend(index::sample(&mut rng, pool.len(), extra).into_iter().map(|k| pool[k]));
    drop(pool);
    for &i in &unknowns {
        is_vertex[i] = true;
    }

    let mut vertices = VertexSet::from_pixels(width, &mask0, &unknowns)?;
    let mut tri = Triangulation::new(vertices.positions())?;
    let mut previous: Option<Image> = None;
    let mut cg_iterations = 0;
    let mut inpaintings = 0;

    for t in 1..cfg.n {
        let system = FemSystem::new(TriMesh::from_triangulation(vertices.clone(), &tri), width, height)?;
        let g = mask_values(f, &vertices);
        let out = system.inpaint(&g, f.channels(), cfg.tol, previous.as_ref())?;
        inpaintings += 1;
        cg_iterations += out.iterations;
        let e = error_map(f, &out.image)?;
        let mut chosen =
            select_insertions(&e, system.binning(), system.mesh().triangles().len(), &is_vertex, cfg.batch(t));
        // Hilbert order keeps the point-location walks short.
        chosen.sort_by_cached_key(|&i| hilbert_key(Point::new((i % width) as i64, (i / width) as i64)));
        for &i in &chosen {
            is_vertex[i] = true;
            let p = Point::new((i % width) as i64, (i / width) as i64);
            tri.insert(p)?;
            vertices.push(p, VertexRole::Mask);
        }
        previous = Some(out.image);
    }

    let mask_positions: Vec<usize> = vertices
        .positions()
        .iter()
        .zip(vertices.roles())
        .filter(|(_, r)| **r == VertexRole::Mask)
        .map(|(p, _)| p.y as usize * width + p.x as usize)
        .collect();
    debug_assert_eq!(mask_positions.len(), cfg.m);
    let mask = MaskSet::sample(f, mask_positions).canonical();
    unknowns.sort_unstable();
    let mesh = canonical_mesh(width, &mask.positions, &unknowns)?;
    let system = FemSystem::new(mesh, width, height)?;
    let out = system.inpaint(&mask.values, f.channels(), cfg.tol, previous.as_ref())?;
    inpaintings += 1;
    cg_iterations += out.iterations;
    Ok(Densified { mask, unknowns, mesh: system.mesh().clone(), reconstruction: out.image, inpaintings, cg_iterations })
}

fn mask_values(f: &Image, vertices: &VertexSet) -> Vec<f64> {
    let (w, c) = (f.width(), f.channels());
    vertices
        .positions()
        .iter()
        .zip(vertices.roles())
        .filter(|(_, r)| **r == VertexRole::Mask)
        .flat_map(|(p, _)| {
            let i = p.y as usize * w + p.x as usize;
            f.data()[i * c..(i + 1) * c].iter().copied()
        })
        .collect()
}

/// Picks `count` empty pixels: first the worst pixel of each of the worst
/// triangles, then the globally worst remaining empty pixels.
fn select_insertions(
    e: &ErrorMap,
    binning: &PixelBinning,
    triangle_count: usize,
    is_vertex: &[bool],
    count: usize,
) -> Vec<usize> {
    let errs = triangle_errors(e, binning, triangle_count);
    // worst empty pixel per triangle; strict comparison keeps the lowest index
    let mut best: Vec<Option<usize>> = vec![None; triangle_count];
    for (i, (&o, &v)) in binning.owners().iter().zip(e.values()).enumerate() {
        if is_vertex[i] {
            continue;
        }
        let slot = &mut best[o as usize];
        if slot.is_none_or(|b| v > e.values()[b]) {
            *slot = Some(i);
        }
    }

    let mut order: Vec<usize> = (0..triangle_count).filter(|&t| errs[t] > 0.0 && best[t].is_some()).collect();
    order.sort_by(|&a, &b| errs[b].total_cmp(&errs[a]).then(a.cmp(&b)));
    let mut chosen: Vec<usize> = order.iter().take(count).map(|&t| best[t].unwrap()).collect();

    if chosen.len() < count {
        let mut taken = vec![false; is_vertex.len()];
        for &i in &chosen {
            taken[i] = true;
        }
        let mut rest: Vec<usize> = (0..is_vertex.len()).filter(|&i| !is_vertex[i] && !taken[i]).collect();
        let need = count - chosen.len();
        let by_error = |a: &usize, b: &usize| e.values()[*b].total_cmp(&e.values()[*a]).then(a.cmp(b));
        if need < rest.len() {
            rest.select_nth_unstable_by(need, by_error);
            rest.truncate(need);
        }
        rest.sort_by(by_error);
        chosen.extend(rest);
    }
    chosen
}
