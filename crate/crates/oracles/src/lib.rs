//! Slow, independent reference implementations for testing `harmonic-fem`.
//!
//! Nothing here shares assembly or solver code with the main crate: the
//! finite-difference inpainting builds its own stencil, dense systems are
//! solved with `nalgebra` factorisations, and the Delaunay checker has its
//! own exact in-circle test. Every oracle has a size guard.

use harmonic_fem::mesh::TriMesh;
use harmonic_fem::tonal::ReconstructionOperator;
use harmonic_fem::Image;
use nalgebra::{DMatrix, DVector};

pub const FDM_MAX_PIXELS: usize = 64 * 64;
pub const MATERIALISE_MAX_PIXELS: usize = 256;
pub const MATERIALISE_MAX_MASK: usize = 16;
pub const DENSE_MAX_DIM: usize = 4096;

#[derive(Debug, thiserror::Error)]
pub enum OracleError {
    #[error("instance too large for a dense oracle: {0}")]
    TooLarge(String),
    #[error("invalid input: {0}")]
    Invalid(String),
    #[error("matrix is singular or not positive definite")]
    Singular,
    #[error(transparent)]
    Core(#[from] harmonic_fem::Error),
}

pub type Result<T> = std::result::Result<T, OracleError>;

/// A small dense linear system `A x = b`.
#[derive(Debug, Clone)]
pub struct DenseSystem {
    pub matrix: DMatrix<f64>,
    pub rhs: DVector<f64>,
}

impl DenseSystem {
    pub fn new(matrix: DMatrix<f64>, rhs: DVector<f64>) -> Result<Self> {
        if !matrix.is_square() || matrix.nrows() != rhs.len() {
            return Err(OracleError::Invalid(format!(
                "{}x{} matrix with {} right-hand side entries",
                matrix.nrows(),
                matrix.ncols(),
                rhs.len()
            )));
        }
        if matrix.nrows() > DENSE_MAX_DIM {
            return Err(OracleError::TooLarge(format!("dimension {}", matrix.nrows())));
        }
        Ok(Self { matrix, rhs })
    }

    /// LU with partial pivoting.
    pub fn solve(&self) -> Result<DVector<f64>> {
        self.matrix.clone().lu().solve(&self.rhs).ok_or(OracleError::Singular)
    }

    /// Cholesky; fails unless the matrix is symmetric positive definite.
    pub fn solve_spd(&self) -> Result<DVector<f64>> {
        Ok(cholesky(&self.matrix)?.solve(&self.rhs))
    }
}

/// Cholesky factorisation; `Err(Singular)` when the matrix is not positive
/// definite.
pub fn cholesky(a: &DMatrix<f64>) -> Result<nalgebra::Cholesky<f64, nalgebra::Dyn>> {
    if a.nrows() > DENSE_MAX_DIM {
        return Err(OracleError::TooLarge(format!("dimension {}", a.nrows())));
    }
    a.clone().cholesky().ok_or(OracleError::Singular)
}

/// Least-squares solution of `min ||B g - f||` via Householder QR.
pub fn least_squares(b: &DMatrix<f64>, f: &DVector<f64>) -> Result<DVector<f64>> {
    if b.nrows() < b.ncols() || b.nrows() != f.len() {
        return Err(OracleError::Invalid(format!("{}x{} matrix, {} data", b.nrows(), b.ncols(), f.len())));
    }
    if b.nrows() * b.ncols() > DENSE_MAX_DIM * 64 {
        return Err(OracleError::TooLarge(format!("{}x{}", b.nrows(), b.ncols())));
    }
    let qr = b.clone().qr();
    let qtf = qr.q().transpose() * f;
    qr.r().solve_upper_triangular(&qtf).ok_or(OracleError::Singular)
}

/// Weighted least squares `min sum_i w_i (B g - f)_i^2`.
pub fn weighted_least_squares(b: &DMatrix<f64>, f: &DVector<f64>, w: &[f64]) -> Result<DVector<f64>> {
    let mut bw = b.clone();
    let mut fw = f.clone();
    for (i, &wi) in w.iter().enumerate() {
        let s = wi.sqrt();
        bw.row_mut(i).scale_mut(s);
        fw[i] *= s;
    }
    least_squares(&bw, &fw)
}

/// Harmonic inpainting with the 5-point finite-difference Laplacian and
/// mirrored (homogeneous Neumann) image borders, solved densely. The mirror
/// axis is the outermost row or column of pixel centres.
///
/// Pixels listed in `mask` keep the values of `f`; the rest solve the
/// discrete Laplace equation.
pub fn fdm_inpaint_dense(f: &Image, mask: &[usize]) -> Result<Image> {
    let (w, h) = (f.width(), f.height());
    let n = w * h;
    if n > FDM_MAX_PIXELS {
        return Err(OracleError::TooLarge(format!("{w}x{h} image")));
    }
    if f.channels() != 1 {
        return Err(OracleError::Invalid("grey images only".into()));
    }
    if mask.is_empty() {
        return Err(OracleError::Invalid("empty mask".into()));
    }
    let mut known = vec![false; n];
    for &i in mask {
        if i >= n {
            return Err(OracleError::Invalid(format!("mask pixel {i} outside the image")));
        }
        known[i] = true;
    }

    let mut a = DMatrix::<f64>::zeros(n, n);
    let mut rhs = DVector::<f64>::zeros(n);
    for y in 0..h {
        for x in 0..w {
            let i = y * w + x;
            if known[i] {
                a[(i, i)] = 1.0;
                rhs[i] = f.data()[i];
                continue;
            }
            // Reflection about the border pixel centres: a missing neighbour
            // is replaced by its mirror image on the other side (u[-1] = u[1]).
            for (back, fwd) in [
                ((x > 0).then(|| i - 1), (x + 1 < w).then(|| i + 1)),
                ((y > 0).then(|| i - w), (y + 1 < h).then(|| i + w)),
            ] {
                for j in [back.or(fwd), fwd.or(back)].into_iter().flatten() {
                    a[(i, i)] += 1.0;
                    a[(i, j)] -= 1.0;
                }
            }
        }
    }
    let u = DenseSystem::new(a, rhs)?.solve()?;
    Ok(Image::new(w, h, 1, u.iter().copied().collect())?)
}

/// One violation of the empty-circumcircle property.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct Violation {
    pub triangle: usize,
    pub vertex: usize,
}

/// Exhaustive empty-circumcircle test over all (triangle, vertex) pairs.
/// Points exactly on a circumcircle are allowed. Also reports triangles
/// that are not counter-clockwise as violations against their own first
/// vertex.
pub fn delaunay_check(mesh: &TriMesh) -> (bool, Vec<Violation>) {
    let pts: Vec<(i128, i128)> = mesh.vertices().positions().iter().map(|p| (p.x as i128, p.y as i128)).collect();
    let mut violations = Vec::new();
    for (t, tri) in mesh.triangles().iter().enumerate() {
        let [a, b, c] = tri.map(|v| pts[v as usize]);
        let area2 = (b.0 - a.0) * (c.1 - a.1) - (b.1 - a.1) * (c.0 - a.0);
        if area2 <= 0 {
            violations.push(Violation { triangle: t, vertex: tri[0] as usize });
            continue;
        }
        for (v, &d) in pts.iter().enumerate() {
            if tri.contains(&(v as u32)) {
                continue;
            }
            if incircle(a, b, c, d) > 0 {
                violations.push(Violation { triangle: t, vertex: v });
            }
        }
    }
    (violations.is_empty(), violations)
}

/// Positive when `d` lies strictly inside the circle through the
/// counter-clockwise triangle `a, b, c`.
fn incircle(a: (i128, i128), b: (i128, i128), c: (i128, i128), d: (i128, i128)) -> i128 {
    let rows = [a, b, c].map(|p| {
        let (dx, dy) = (p.0 - d.0, p.1 - d.1);
        [dx, dy, dx * dx + dy * dy]
    });
    let [r0, r1, r2] = rows;
    r0[0] * (r1[1] * r2[2] - r1[2] * r2[1]) - r0[1] * (r1[0] * r2[2] - r1[2] * r2[0])
        + r0[2] * (r1[0] * r2[1] - r1[1] * r2[0])
}

/// Total area of the triangles (twice the area, exact) and twice the area
/// of the convex hull of the vertices; equal for a valid triangulation.
pub fn area_check(mesh: &TriMesh) -> (i128, i128) {
    let pts: Vec<(i128, i128)> = mesh.vertices().positions().iter().map(|p| (p.x as i128, p.y as i128)).collect();
    let tri_area: i128 = mesh
        .triangles()
        .iter()
        .map(|t| {
            let [a, b, c] = t.map(|v| pts[v as usize]);
            (b.0 - a.0) * (c.1 - a.1) - (b.1 - a.1) * (c.0 - a.0)
        })
        .sum();
    (tri_area, hull_area2(&pts))
}

/// Twice the convex hull area (monotone chain).
fn hull_area2(pts: &[(i128, i128)]) -> i128 {
    let mut p = pts.to_vec();
    p.sort_unstable();
    p.dedup();
    if p.len() < 3 {
        return 0;
    }
    let cross =
        |o: (i128, i128), a: (i128, i128), b: (i128, i128)| (a.0 - o.0) * (b.1 - o.1) - (a.1 - o.1) * (b.0 - o.0);
    let mut hull: Vec<(i128, i128)> = Vec::with_capacity(2 * p.len());
    for pass in 0..2 {
        let start = hull.len();
        let iter: Box<dyn Iterator<Item = &(i128, i128)>> =
            if pass == 0 { Box::new(p.iter()) } else { Box::new(p.iter().rev()) };
        for &q in iter {
            while hull.len() >= start + 2 && cross(hull[hull.len() - 2], hull[hull.len() - 1], q) <= 0 {
                hull.pop();
            }
            hull.push(q);
        }
        hull.pop();
    }
    let n = hull.len();
    (0..n).map(|i| hull[i].0 * hull[(i + 1) % n].1 - hull[(i + 1) % n].0 * hull[i].1).sum()
}

/// The dense reconstruction matrix `B` (pixels x mask), column `j` being
/// the reconstruction from the `j`-th unit vector.
pub fn materialise_b(op: &ReconstructionOperator) -> Result<DMatrix<f64>> {
    let (p, m) = (op.pixel_count(), op.mask_count());
    if p > MATERIALISE_MAX_PIXELS || m > MATERIALISE_MAX_MASK {
        return Err(OracleError::TooLarge(format!("{p} pixels, {m} mask vertices")));
    }
    let mut b = DMatrix::<f64>::zeros(p, m);
    let mut e = vec![0.0; m];
    for j in 0..m {
        e[j] = 1.0;
        let col = op.apply(&e)?;
        b.set_column(j, &DVector::from_vec(col));
        e[j] = 0.0;
    }
    Ok(b)
}
