//! Delaunay meshes over pixel positions, point location and pixel binning.

mod delaunay;
pub mod predicates;

use std::collections::HashSet;

pub(crate) use delaunay::hilbert_key;
pub use delaunay::Triangulation;
pub use predicates::Point;
use predicates::{orient, MAX_COORD};

use crate::error::{Error, Result};

/// Marks whether a vertex carries a stored (Dirichlet) value.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum VertexRole {
    Mask,
    Unknown,
}

/// Ordered, pairwise distinct mesh vertices with their roles. The order is
/// significant: it fixes vertex numbering in the mesh.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct VertexSet {
    positions: Vec<Point>,
    roles: Vec<VertexRole>,
}

impl VertexSet {
    pub fn new(positions: Vec<Point>, roles: Vec<VertexRole>) -> Result<Self> {
        if positions.len() != roles.len() {
            return Err(Error::InvalidVertexSet(format!("{} positions but {} roles", positions.len(), roles.len())));
        }
        let mut seen = HashSet::with_capacity(positions.len());
        for p in &positions {
            if !(0..MAX_COORD).contains(&p.x) || !(0..MAX_COORD).contains(&p.y) {
                return Err(Error::InvalidVertexSet(format!("coordinate out of range: {p:?}")));
            }
            if !seen.insert(*p) {
                return Err(Error::InvalidVertexSet(format!("duplicate position {p:?}")));
            }
        }
        Ok(Self { positions, roles })
    }

    /// Vertex set for a `width` x `height` image: mask pixels first, then
    /// unknown vertices, both given as row-major pixel indices.
    pub fn from_pixels(width: usize, mask: &[usize], unknowns: &[usize]) -> Result<Self> {
        let to_point = |i: &usize| Point::new((i % width) as i64, (i / width) as i64);
        let positions = mask.iter().chain(unknowns).map(to_point).collect();
        let roles = std::iter::repeat_n(VertexRole::Mask, mask.len())
            .chain(std::iter::repeat_n(VertexRole::Unknown, unknowns.len()))
            .collect();
        Self::new(positions, roles)
    }

    /// Checks the extra conditions for inpainting a `width` x `height`
    /// image: all four corners present and at least one mask vertex.
    pub fn check_covers_image(&self, width: usize, height: usize) -> Result<()> {
        let (w, h) = (width as i64, height as i64);
        if let Some(p) = self.positions.iter().find(|p| p.x >= w || p.y >= h) {
            return Err(Error::InvalidVertexSet(format!("{p:?} outside {width}x{height} image")));
        }
        let present: HashSet<&Point> = self.positions.iter().collect();
        for corner in image_corners(width, height) {
            if !present.contains(&corner) {
                return Err(Error::InvalidVertexSet(format!("image corner {corner:?} missing")));
            }
        }
        if self.mask_count() == 0 {
            return Err(Error::Singular("no mask vertex".into()));
        }
        Ok(())
    }

    pub fn len(&self) -> usize {
        self.positions.len()
    }

    pub fn is_empty(&self) -> bool {
        self.positions.is_empty()
    }

    pub fn positions(&self) -> &[Point] {
        &self.positions
    }

    pub fn roles(&self) -> &[VertexRole] {
        &self.roles
    }

    pub fn mask_count(&self) -> usize {
        self.roles.iter().filter(|r| **r == VertexRole::Mask).count()
    }

    pub(crate) fn push(&mut self, p: Point, role: VertexRole) {
        self.positions.push(p);
        self.roles.push(role);
    }
}

/// The four corner pixels of an image, deduplicated for 1-pixel-wide or
/// 1-pixel-high images.
pub fn image_corners(width: usize, height: usize) -> Vec<Point> {
    let (r, b) = (width as i64 - 1, height as i64 - 1);
    let mut corners = vec![Point::new(0, 0), Point::new(r, 0), Point::new(0, b), Point::new(r, b)];
    corners.dedup();
    corners.sort_unstable_by(|a, b| a.lex_cmp(b));
    corners.dedup();
    corners
}

const NO_NEIGHBOR: u32 = u32::MAX;

/// An immutable Delaunay triangulation of a [`VertexSet`].
///
/// Triangles are counter-clockwise vertex-index triples in canonical order
/// (see [`Triangulation::canonical_triangles`]).
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct TriMesh {
    vertices: VertexSet,
    triangles: Vec<[u32; 3]>,
    neighbors: Vec<[u32; 3]>,
}

/// Result of [`TriMesh::locate`].
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Location {
    pub triangle: usize,
    pub weights: [f64; 3],
    /// False when the query lay outside the hull and the nearest triangle
    /// was used with clamped weights.
    pub inside: bool,
}

impl TriMesh {
    /// Builds the Delaunay triangulation of `vertices` by incremental insertion
    /// in vertex order.
    pub fn delaunay(vertices: VertexSet) -> Result<Self> {
        let tri = Triangulation::new(vertices.positions())?;
        Ok(Self::from_triangulation(vertices, &tri))
    }

    /// Snapshot of an incremental triangulation whose points coincide with
    /// `vertices` (same order).
    pub fn from_triangulation(vertices: VertexSet, tri: &Triangulation) -> Self {
        assert_eq!(vertices.positions(), tri.points(), "vertex set does not match triangulation");
        let triangles = tri.canonical_triangles();
        let neighbors = neighbors_of(&triangles);
        Self { vertices, triangles, neighbors }
    }

    pub fn vertices(&self) -> &VertexSet {
        &self.vertices
    }

    pub fn triangles(&self) -> &[[u32; 3]] {
        &self.triangles
    }

    /// `neighbors()[t][i]` is the triangle across the edge opposite corner
    /// `i` of `t`, or `None` on the hull.
    pub fn neighbor(&self, t: usize, i: usize) -> Option<usize> {
        match self.neighbors[t][i] {
            NO_NEIGHBOR => None,
            n => Some(n as usize),
        }
    }

    pub fn triangle_points(&self, t: usize) -> [Point; 3] {
        let p = self.vertices.positions();
        self.triangles[t].map(|v| p[v as usize])
    }

    /// Barycentric weights of an integer point with respect to triangle `t`.
    /// Exact unit weights at the triangle's own vertices.
    pub fn barycentric(&self, t: usize, q: Point) -> [f64; 3] {
        let [a, b, c] = self.triangle_points(t);
        let area = orient(a, b, c) as f64;
        [orient(q, b, c) as f64 / area, orient(a, q, c) as f64 / area, orient(a, b, q) as f64 / area]
    }

    /// Finds the triangle containing `(x, y)` by a visibility walk. Points
    /// outside the hull fall back to the nearest triangle with weights
    /// clamped to `[0, 1]` and renormalised.
    pub fn locate(&self, x: f64, y: f64) -> Location {
        let q = (x, y);
        let mut t = 0usize;
        let mut rot = 0usize;
        for _ in 0..4 * self.triangles.len() + 16 {
            let pts = self.triangle_points(t).map(to_f64);
            let mut moved = false;
            for k in 0..3 {
                let i = (k + rot) % 3;
                if orient_f64(pts[(i + 1) % 3], pts[(i + 2) % 3], q) < 0.0 {
                    match self.neighbor(t, i) {
                        Some(n) => {
                            t = n;
                            rot = (rot + 1) % 3;
                            moved = true;
                        }
                        None => return self.nearest_triangle(q),
                    }
                    break;
                }
            }
            if !moved {
                return Location { triangle: t, weights: barycentric_f64(pts, q), inside: true };
            }
        }
        self.nearest_triangle(q)
    }

    fn nearest_triangle(&self, q: (f64, f64)) -> Location {
        let mut best = (f64::INFINITY, 0usize);
        for t in 0..self.triangles.len() {
            let pts = self.triangle_points(t).map(to_f64);
            let inside = (0..3).all(|i| orient_f64(pts[(i + 1) % 3], pts[(i + 2) % 3], q) >= 0.0);
            let d = if inside {
                0.0
            } else {
                (0..3).map(|i| segment_distance2(pts[i], pts[(i + 1) % 3], q)).fold(f64::INFINITY, f64::min)
            };
            if d < best.0 {
                best = (d, t);
            }
        }
        let t = best.1;
        let raw = barycentric_f64(self.triangle_points(t).map(to_f64), q);
        let clamped = raw.map(|w| w.clamp(0.0, 1.0));
        let sum: f64 = clamped.iter().sum();
        Location { triangle: t, weights: clamped.map(|w| w / sum), inside: best.0 == 0.0 }
    }
}

fn neighbors_of(triangles: &[[u32; 3]]) -> Vec<[u32; 3]> {
    let mut edges: Vec<(u32, u32, u32, u8)> = Vec::with_capacity(3 * triangles.len());
    for (t, tri) in triangles.iter().enumerate() {
        for i in 0..3 {
            let (u, v) = (tri[(i + 1) % 3], tri[(i + 2) % 3]);
            edges.push((u.min(v), u.max(v), t as u32, i as u8));
        }
    }
    edges.sort_unstable();
    let mut neighbors = vec![[NO_NEIGHBOR; 3]; triangles.len()];
    for pair in edges.windows(2) {
        let (a, b) = (pair[0], pair[1]);
        if a.0 == b.0 && a.1 == b.1 {
            neighbors[a.2 as usize][a.3 as usize] = b.2;
            neighbors[b.2 as usize][b.3 as usize] = a.2;
        }
    }
    neighbors
}

fn to_f64(p: Point) -> (f64, f64) {
    (p.x as f64, p.y as f64)
}

fn orient_f64(a: (f64, f64), b: (f64, f64), c: (f64, f64)) -> f64 {
    (b.0 - a.0) * (c.1 - a.1) - (b.1 - a.1) * (c.0 - a.0)
}

fn barycentric_f64(p: [(f64, f64); 3], q: (f64, f64)) -> [f64; 3] {
    let area = orient_f64(p[0], p[1], p[2]);
    [orient_f64(q, p[1], p[2]) / area, orient_f64(p[0], q, p[2]) / area, orient_f64(p[0], p[1], q) / area]
}

fn segment_distance2(a: (f64, f64), b: (f64, f64), q: (f64, f64)) -> f64 {
    let (dx, dy) = (b.0 - a.0, b.1 - a.1);
    let len2 = dx * dx + dy * dy;
    let s = (((q.0 - a.0) * dx + (q.1 - a.1) * dy) / len2).clamp(0.0, 1.0);
    let (ex, ey) = (a.0 + s * dx - q.0, a.1 + s * dy - q.1);
    ex * ex + ey * ey
}

/// Assignment of every pixel of a `width` x `height` grid to one triangle.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct PixelBinning {
    width: usize,
    height: usize,
    owner: Vec<u32>,
}

impl PixelBinning {
    pub fn width(&self) -> usize {
        self.width
    }

    pub fn height(&self) -> usize {
        self.height
    }

    pub fn owners(&self) -> &[u32] {
        &self.owner
    }

    pub fn owner(&self, pixel: usize) -> usize {
        self.owner[pixel] as usize
    }

    pub fn pixel_point(&self, pixel: usize) -> Point {
        Point::new((pixel % self.width) as i64, (pixel / self.width) as i64)
    }

    /// Barycentric weights of `pixel` in its owning triangle. Computed on
    /// demand so the binning costs four bytes per pixel.
    #[inline]
    pub fn weights(&self, mesh: &TriMesh, pixel: usize) -> [f64; 3] {
        let t = self.owner(pixel);
        let w = mesh.barycentric(t, self.pixel_point(pixel));
        if w.iter().all(|&x| (0.0..=1.0).contains(&x)) {
            w
        } else {
            // pixel outside the hull (mesh without image corners)
            let c = w.map(|x| x.clamp(0.0, 1.0));
            let s: f64 = c.iter().sum();
            c.map(|x| x / s)
        }
    }

    /// Number of pixels owned by each triangle.
    pub fn counts(&self, triangle_count: usize) -> Vec<usize> {
        let mut counts = vec![0; triangle_count];
        for &o in &self.owner {
            counts[o as usize] += 1;
        }
        counts
    }
}

/// Assigns every pixel to the lowest-index triangle containing it (closed
/// containment, exact integer tests). Pixels outside the hull go to the
/// nearest triangle.
pub fn bin_pixels(mesh: &TriMesh, width: usize, height: usize) -> PixelBinning {
    const UNOWNED: u32 = u32::MAX;
    let mut owner = vec![UNOWNED; width * height];
    let (w, h) = (width as i64, height as i64);
    for t in 0..mesh.triangles().len() {
        let [a, b, c] = mesh.triangle_points(t);
        let x0 = a.x.min(b.x).min(c.x).max(0);
        let x1 = a.x.max(b.x).max(c.x).min(w - 1);
        let y0 = a.y.min(b.y).min(c.y).max(0);
        let y1 = a.y.max(b.y).max(c.y).min(h - 1);
        if x0 > x1 || y0 > y1 {
            continue;
        }
        // Edge functions advance by constant steps along a row.
        let edges = [(b, c), (c, a), (a, b)];
        let step_x = edges.map(|(u, v)| -(v.y - u.y));
        for y in y0..=y1 {
            let start = Point::new(x0, y);
            let mut e = edges.map(|(u, v)| orient(u, v, start));
            let row = (y * w) as usize;
            for x in x0..=x1 {
                if e[0] >= 0 && e[1] >= 0 && e[2] >= 0 {
                    let o = &mut owner[row + x as usize];
                    if *o == UNOWNED {
                        *o = t as u32;
                    }
                }
                for k in 0..3 {
                    e[k] += step_x[k];
                }
            }
        }
    }
    for (i, o) in owner.iter_mut().enumerate() {
        if *o == UNOWNED {
            let loc = mesh.locate((i % width) as f64, (i / width) as f64);
            *o = loc.triangle as u32;
        }
    }
    PixelBinning { width, height, owner }
}
