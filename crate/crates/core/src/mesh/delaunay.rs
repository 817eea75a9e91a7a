//! Incremental Bowyer–Watson triangulation with ghost triangles.
//!
//! Every hull edge carries a ghost triangle `(a, b, GHOST)` whose "interior"
//! is the half-plane left of `a -> b` outside the hull. A point conflicts
//! with a ghost when it is strictly on that side, or on the open hull edge.
//! Together with the perturbed in-circle test this yields a triangulation
//! that is a function of the point set alone.

use super::predicates::{in_circumcircle, on_closed_segment, orient, Point, MAX_COORD};
use crate::error::{Error, Result};

pub(crate) const GHOST: u32 = u32::MAX;
const NONE: u32 = u32::MAX;

#[derive(Debug, Clone)]
pub struct Triangulation {
    points: Vec<Point>,
    tris: Vec<[u32; 3]>,
    /// `adj[t][i]` is the triangle across the edge opposite corner `i`.
    adj: Vec<[u32; 3]>,
    alive: Vec<bool>,
    free: Vec<u32>,
    /// Per-triangle visit stamp used by the cavity search.
    stamp: Vec<u32>,
    epoch: u32,
    hint: u32,
    // scratch buffers reused across insertions
    cavity: Vec<u32>,
    boundary: Vec<BoundaryEdge>,
}

#[derive(Debug, Clone, Copy)]
struct BoundaryEdge {
    from: u32,
    to: u32,
    outside: u32,
    outside_slot: usize,
}

impl Triangulation {
    /// Triangulates `points`. They are inserted along a Hilbert curve so each
    /// point-location walk starts next to its target; the result does not
    /// depend on the insertion order.
    pub fn new(points: &[Point]) -> Result<Self> {
        if points.len() < 3 {
            return Err(Error::Degenerate(format!("{} points, need at least 3", points.len())));
        }
        let mut order: Vec<u32> = (0..points.len() as u32).collect();
        order.sort_by_cached_key(|&k| hilbert_key(points[k as usize]));
        let (a, b) = (points[order[0] as usize], points[order[1] as usize]);
        if a == b {
            return Err(Error::Degenerate(format!("duplicate point {a:?}")));
        }
        let third = (2..points.len())
            .find(|&k| orient(a, b, points[order[k] as usize]) != 0)
            .ok_or_else(|| Error::Degenerate("all points are collinear".into()))?;

        let mut tri = Self {
            points: Vec::with_capacity(points.len()),
            tris: Vec::with_capacity(2 * points.len() + 4),
            adj: Vec::with_capacity(2 * points.len() + 4),
            alive: Vec::new(),
            free: Vec::new(),
            stamp: Vec::new(),
            epoch: 0,
            hint: 0,
            cavity: Vec::new(),
            boundary: Vec::new(),
        };
        tri.points.extend_from_slice(points);
        tri.seed_triangle(order[0], order[1], order[third]);
        for (k, &v) in order.iter().enumerate().skip(2) {
            if k != third {
                tri.insert_existing(v)?;
            }
        }
        Ok(tri)
    }

    pub fn points(&self) -> &[Point] {
        &self.points
    }

    pub fn len(&self) -> usize {
        self.points.len()
    }

    pub fn is_empty(&self) -> bool {
        self.points.is_empty()
    }

    /// Appends `p` as a new vertex and restores the Delaunay property.
    /// Returns the index of the new vertex.
    pub fn insert(&mut self, p: Point) -> Result<usize> {
        let id = self.points.len() as u32;
        self.points.push(p);
        if let Err(e) = self.insert_existing(id) {
            self.points.pop();
            return Err(e);
        }
        Ok(id as usize)
    }

    /// Real triangles in canonical form: each rotated so its smallest vertex
    /// index comes first (orientation kept counter-clockwise), the list
    /// sorted. Identical vertex sequences give identical lists.
    pub fn canonical_triangles(&self) -> Vec<[u32; 3]> {
        let mut out: Vec<[u32; 3]> = self
            .tris
            .iter()
            .zip(&self.alive)
            .filter(|(t, &alive)| alive && t[2] != GHOST)
            .map(|(t, _)| canonical_rotation(*t))
            .collect();
        out.sort_unstable();
        out
    }

    fn seed_triangle(&mut self, a: u32, b: u32, c: u32) {
        let (b, c) = if orient(self.point(a), self.point(b), self.point(c)) > 0 { (b, c) } else { (c, b) };
        // t0 = (a, b, c); ghosts on the reversed hull edges b->a, c->b, a->c.
        let t0 = self.alloc([a, b, c]);
        let g_ab = self.alloc([b, a, GHOST]);
        let g_bc = self.alloc([c, b, GHOST]);
        let g_ca = self.alloc([a, c, GHOST]);
        self.adj[t0 as usize] = [g_bc, g_ca, g_ab];
        // ghost (u, v, G): across (v, G) is the ghost starting at v, across
        // (G, u) the ghost ending at u
        self.adj[g_ab as usize] = [g_ca, g_bc, t0];
        self.adj[g_bc as usize] = [g_ab, g_ca, t0];
        self.adj[g_ca as usize] = [g_bc, g_ab, t0];
        self.hint = t0;
    }

    #[inline]
    fn point(&self, v: u32) -> Point {
        self.points[v as usize]
    }

    fn alloc(&mut self, verts: [u32; 3]) -> u32 {
        if let Some(t) = self.free.pop() {
            self.tris[t as usize] = verts;
            self.adj[t as usize] = [NONE; 3];
            self.alive[t as usize] = true;
            t
        } else {
            self.tris.push(verts);
            self.adj.push([NONE; 3]);
            self.alive.push(true);
            self.stamp.push(0);
            (self.tris.len() - 1) as u32
        }
    }

    fn conflicts(&self, t: u32, p: Point) -> bool {
        let [a, b, c] = self.tris[t as usize];
        if c == GHOST {
            let (pa, pb) = (self.point(a), self.point(b));
            let o = orient(pa, pb, p);
            o > 0 || (o == 0 && on_closed_segment(pa, pb, p))
        } else {
            in_circumcircle(self.point(a), self.point(b), self.point(c), p)
        }
    }

    /// Visibility walk from the hint towards `p`. Returns a real triangle
    /// containing `p` (closed), or a ghost whose hull edge sees `p` strictly.
    fn locate(&self, p: Point) -> u32 {
        let mut t = self.hint;
        if !self.alive[t as usize] || self.tris[t as usize][2] == GHOST {
            t = self.adj[t as usize][2];
            if !self.alive[t as usize] {
                t = (0..self.tris.len() as u32)
                    .find(|&t| self.alive[t as usize] && self.tris[t as usize][2] != GHOST)
                    .expect("triangulation has a real triangle");
            }
        }
        // rotate the starting edge to avoid cycling on degenerate paths
        let mut rot = 0usize;
        'walk: loop {
            let verts = self.tris[t as usize];
            for k in 0..3 {
                let i = (k + rot) % 3;
                let (u, v) = (verts[(i + 1) % 3], verts[(i + 2) % 3]);
                if orient(self.point(u), self.point(v), p) < 0 {
                    let next = self.adj[t as usize][i];
                    rot = (rot + 1) % 3;
                    if self.tris[next as usize][2] == GHOST {
                        return next;
                    }
                    t = next;
                    continue 'walk;
                }
            }
            return t;
        }
    }

    fn insert_existing(&mut self, id: u32) -> Result<()> {
        let p = self.point(id);
        let start = self.locate(p);
        if let Some(&v) = self.tris[start as usize].iter().find(|&&v| v != GHOST && self.point(v) == p) {
            return Err(Error::Degenerate(format!("duplicate point {p:?} (vertex {v})")));
        }
        debug_assert!(self.conflicts(start, p));

        // Stamps: `epoch` marks cavity members, `epoch + 1` rejected ones.
        if self.epoch >= u32::MAX - 2 {
            self.stamp.iter_mut().for_each(|s| *s = 0);
            self.epoch = 0;
        }
        self.epoch += 2;
        let (inside, rejected) = (self.epoch, self.epoch + 1);
        let mut cavity = std::mem::take(&mut self.cavity);
        let mut boundary = std::mem::take(&mut self.boundary);
        cavity.clear();
        boundary.clear();

        self.stamp[start as usize] = inside;
        cavity.push(start);
        let mut i = 0;
        while i < cavity.len() {
            let t = cavity[i];
            i += 1;
            for slot in 0..3 {
                let nb = self.adj[t as usize][slot] as usize;
                if self.stamp[nb] == inside || self.stamp[nb] == rejected {
                    continue;
                }
                if self.conflicts(nb as u32, p) {
                    self.stamp[nb] = inside;
                    cavity.push(nb as u32);
                } else {
                    self.stamp[nb] = rejected;
                }
            }
        }

        for &t in &cavity {
            let verts = self.tris[t as usize];
            for slot in 0..3 {
                let nb = self.adj[t as usize][slot];
                if self.stamp[nb as usize] == inside {
                    continue;
                }
                let outside_slot = (0..3).find(|&j| self.adj[nb as usize][j] == t).expect("adjacency is symmetric");
                boundary.push(BoundaryEdge {
                    from: verts[(slot + 1) % 3],
                    to: verts[(slot + 2) % 3],
                    outside: nb,
                    outside_slot,
                });
            }
        }

        for &t in &cavity {
            self.alive[t as usize] = false;
            self.free.push(t);
        }

        // One new triangle (from, to, p) per boundary edge.
        let mut created: Vec<(u32, u32, u32)> = Vec::with_capacity(boundary.len());
        for e in &boundary {
            let t = self.alloc([e.from, e.to, id]);
            created.push((e.from, e.to, t));
        }
        for (k, e) in boundary.iter().enumerate() {
            let (from, to, t) = created[k];
            // across (to, p): the new triangle whose edge starts at `to`
            let across_to = created.iter().find(|c| c.0 == to).expect("closed cavity boundary").2;
            // across (p, from): the new triangle whose edge ends at `from`
            let across_from = created.iter().find(|c| c.1 == from).expect("closed cavity boundary").2;
            self.adj[t as usize] = [across_to, across_from, e.outside];
            self.adj[e.outside as usize][e.outside_slot] = t;
        }
        // Keep ghosts in canonical shape with GHOST in the last slot.
        for &(from, to, t) in &created {
            let ti = t as usize;
            if from == GHOST {
                self.tris[ti] = [to, id, GHOST];
                let a = self.adj[ti];
                self.adj[ti] = [a[1], a[2], a[0]];
            } else if to == GHOST {
                self.tris[ti] = [id, from, GHOST];
                let a = self.adj[ti];
                self.adj[ti] = [a[2], a[0], a[1]];
            }
        }
        self.hint = created.iter().map(|c| c.2).find(|&t| self.tris[t as usize][2] != GHOST).unwrap_or(created[0].2);

        self.cavity = cavity;
        self.boundary = boundary;
        Ok(())
    }

    /// Internal consistency check used by tests: adjacency symmetry and
    /// orientation of every real triangle.
    #[cfg(test)]
    pub(crate) fn check_topology(&self) {
        for (t, verts) in self.tris.iter().enumerate() {
            if !self.alive[t] {
                continue;
            }
            if verts[2] != GHOST {
                assert!(orient(self.point(verts[0]), self.point(verts[1]), self.point(verts[2])) > 0);
            }
            for slot in 0..3 {
                let nb = self.adj[t][slot] as usize;
                assert!(self.alive[nb], "triangle {t} points at dead {nb}");
                assert!(self.adj[nb].contains(&(t as u32)), "asymmetric adjacency {t} <-> {nb}");
                let (u, v) = (verts[(slot + 1) % 3], verts[(slot + 2) % 3]);
                assert!(self.tris[nb].contains(&u) && self.tris[nb].contains(&v));
            }
        }
    }
}

/// Position of `p` along a Hilbert curve covering the coordinate range.
pub(crate) fn hilbert_key(p: Point) -> u64 {
    let n = MAX_COORD as u64;
    let (mut x, mut y) = (p.x as u64, p.y as u64);
    let mut d = 0;
    let mut s = n / 2;
    while s > 0 {
        let rx = u64::from(x & s > 0);
        let ry = u64::from(y & s > 0);
        d += s * s * ((3 * rx) ^ ry);
        if ry == 0 {
            if rx == 1 {
                (x, y) = (n - 1 - x, n - 1 - y);
            }
            (x, y) = (y, x);
        }
        s /= 2;
    }
    d
}

/// Rotates a counter-clockwise triple so its smallest index is first.
pub(crate) fn canonical_rotation(t: [u32; 3]) -> [u32; 3] {
    let k = (0..3).min_by_key(|&i| t[i]).unwrap();
    [t[k], t[(k + 1) % 3], t[(k + 2) % 3]]
}
