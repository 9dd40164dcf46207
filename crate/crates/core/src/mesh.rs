//! Structured right-crossed triangulations of a space-time rectangle.
//!
//! Every grid cell `[t_i, t_{i+1}] x [x_j, x_{j+1}]` is split by the diagonal
//! running from `(t_i, x_j)` to `(t_{i+1}, x_{j+1})`. Refinement keeps the
//! parent vertices (with their indices) as a prefix and appends one vertex per
//! parent edge, so P1 spaces on consecutive levels are nested.

use std::collections::HashMap;
use std::fmt::Write as _;

use crate::error::{Error, Result};

/// A space-time point `(t, x)`.
pub type Point = [f64; 2];

const GEOM_TOL: f64 = 1e-12;

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct Rect {
    pub t0: f64,
    pub t1: f64,
    pub x0: f64,
    pub x1: f64,
}

impl Rect {
    pub fn new(t0: f64, t1: f64, x0: f64, x1: f64) -> Self {
        Self { t0, t1, x0, x1 }
    }

    pub fn area(&self) -> f64 {
        (self.t1 - self.t0) * (self.x1 - self.x0)
    }

    pub fn perimeter(&self) -> f64 {
        2.0 * ((self.t1 - self.t0) + (self.x1 - self.x0))
    }

    pub fn contains(&self, p: Point, tol: f64) -> bool {
        p[0] >= self.t0 - tol && p[0] <= self.t1 + tol && p[1] >= self.x0 - tol && p[1] <= self.x1 + tol
    }

    fn scale(&self) -> f64 {
        (self.t1 - self.t0).abs().max((self.x1 - self.x0).abs()).max(1.0)
    }

    /// The side of the rectangle a point lies on, if any. Corners report the
    /// `t` sides first.
    pub fn side_of(&self, p: Point) -> Option<Side> {
        let tol = GEOM_TOL * self.scale();
        if !self.contains(p, tol) {
            return None;
        }
        if (p[0] - self.t0).abs() <= tol {
            Some(Side::TMin)
        } else if (p[0] - self.t1).abs() <= tol {
            Some(Side::TMax)
        } else if (p[1] - self.x0).abs() <= tol {
            Some(Side::XMin)
        } else if (p[1] - self.x1).abs() <= tol {
            Some(Side::XMax)
        } else {
            None
        }
    }

    fn on_side(&self, p: Point, side: Side) -> bool {
        let tol = GEOM_TOL * self.scale();
        self.contains(p, tol)
            && match side {
                Side::TMin => (p[0] - self.t0).abs() <= tol,
                Side::TMax => (p[0] - self.t1).abs() <= tol,
                Side::XMin => (p[1] - self.x0).abs() <= tol,
                Side::XMax => (p[1] - self.x1).abs() <= tol,
            }
    }

    /// Outward unit normal of a side, in `(t, x)` order.
    pub fn normal(side: Side) -> Point {
        match side {
            Side::TMin => [-1.0, 0.0],
            Side::TMax => [1.0, 0.0],
            Side::XMin => [0.0, -1.0],
            Side::XMax => [0.0, 1.0],
        }
    }
}

/// Which part of the boundary an edge belongs to.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash)]
pub enum BoundaryTag {
    /// Inflow boundary, where data is prescribed.
    Inflow,
    /// Outflow and tangential parts of the boundary.
    Complement,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash)]
pub enum Side {
    TMin,
    TMax,
    XMin,
    XMax,
}

#[derive(Clone, Debug, PartialEq)]
pub struct BoundaryEdge {
    pub edge: usize,
    pub vertices: [usize; 2],
    pub triangle: usize,
    pub side: Side,
    pub tag: BoundaryTag,
}

/// An axis-aligned piece of the rectangle perimeter.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct Segment {
    pub a: Point,
    pub b: Point,
}

impl Segment {
    pub fn new(a: Point, b: Point) -> Self {
        Self { a, b }
    }
}

/// The boundary portions assigned to the inflow part; everything else is the
/// complement.
#[derive(Clone, Debug, Default, PartialEq)]
pub struct BoundarySplit {
    pub inflow: Vec<Segment>,
}

impl BoundarySplit {
    pub fn new(inflow: Vec<Segment>) -> Self {
        Self { inflow }
    }
}

#[derive(Clone, Debug)]
pub struct Mesh {
    rect: Rect,
    nt: usize,
    nx: usize,
    level: usize,
    vertices: Vec<Point>,
    triangles: Vec<[usize; 3]>,
    edges: Vec<[usize; 2]>,
    triangle_edges: Vec<[usize; 3]>,
    boundary_edges: Vec<BoundaryEdge>,
    grid_vertex: Vec<usize>,
}

impl Mesh {
    /// Builds the `nt x nx` right-crossed mesh of `rect`. Cells must be square.
    pub fn build_structured(nt: usize, nx: usize, rect: Rect) -> Result<Mesh> {
        if nt == 0 || nx == 0 {
            return Err(Error::Geometry(format!("cell counts must be positive, got {nt} x {nx}")));
        }
        if !(rect.t1 > rect.t0) || !(rect.x1 > rect.x0) {
            return Err(Error::Geometry(format!("degenerate rectangle {rect:?}")));
        }
        let ht = (rect.t1 - rect.t0) / nt as f64;
        let hx = (rect.x1 - rect.x0) / nx as f64;
        if (ht - hx).abs() > 1e-12 * ht.max(hx) {
            return Err(Error::Geometry(format!("cells are not square: dt = {ht}, dx = {hx}")));
        }
        let mut vertices = Vec::with_capacity((nt + 1) * (nx + 1));
        for i in 0..=nt {
            for j in 0..=nx {
                vertices.push(grid_point(&rect, nt, nx, i, j));
            }
        }
        let grid_vertex: Vec<usize> = (0..vertices.len()).collect();
        let mut mesh = Mesh {
            rect,
            nt,
            nx,
            level: 0,
            vertices,
            triangles: Vec::new(),
            edges: Vec::new(),
            triangle_edges: Vec::new(),
            boundary_edges: Vec::new(),
            grid_vertex,
        };
        mesh.build_connectivity();
        Ok(mesh)
    }

    fn build_connectivity(&mut self) {
        let (nt, nx) = (self.nt, self.nx);
        let gv = |i: usize, j: usize| self.grid_vertex[i * (nx + 1) + j];
        let mut triangles = Vec::with_capacity(2 * nt * nx);
        for i in 0..nt {
            for j in 0..nx {
                let (a, b, c, d) = (gv(i, j), gv(i + 1, j), gv(i + 1, j + 1), gv(i, j + 1));
                triangles.push([a, b, c]);
                triangles.push([a, c, d]);
            }
        }
        let mut edge_index: HashMap<(usize, usize), usize> =
            HashMap::with_capacity(3 * triangles.len() / 2 + nt + nx + 2);
        let mut edges = Vec::new();
        let mut edge_tris: Vec<Vec<usize>> = Vec::new();
        let mut triangle_edges = Vec::with_capacity(triangles.len());
        for (k, tri) in triangles.iter().enumerate() {
            let mut te = [0usize; 3];
            for l in 0..3 {
                let (p, q) = (tri[l], tri[(l + 1) % 3]);
                let key = (p.min(q), p.max(q));
                let e = *edge_index.entry(key).or_insert_with(|| {
                    edges.push([key.0, key.1]);
                    edge_tris.push(Vec::with_capacity(2));
                    edges.len() - 1
                });
                edge_tris[e].push(k);
                te[l] = e;
            }
            triangle_edges.push(te);
        }
        let mut boundary_edges = Vec::new();
        for (e, tris) in edge_tris.iter().enumerate() {
            if tris.len() == 1 {
                let [p, q] = edges[e];
                let mid = midpoint(self.vertices[p], self.vertices[q]);
                let side = self.rect.side_of(mid).expect("boundary edge off the perimeter");
                boundary_edges.push(BoundaryEdge {
                    edge: e,
                    vertices: [p, q],
                    triangle: tris[0],
                    side,
                    tag: BoundaryTag::Complement,
                });
            }
        }
        self.triangles = triangles;
        self.edges = edges;
        self.triangle_edges = triangle_edges;
        self.boundary_edges = boundary_edges;
    }

    /// Splits every cell into four; parent vertices keep their indices and tags
    /// are inherited by the child edges.
    pub fn refine_uniform(&self) -> Mesh {
        let (nt, nx) = (2 * self.nt, 2 * self.nx);
        let nvp = self.vertices.len();
        let mut vertices = self.vertices.clone();
        vertices.reserve(self.edges.len());
        for &[p, q] in &self.edges {
            vertices.push(midpoint(self.vertices[p], self.vertices[q]));
        }
        let mut grid_vertex = vec![usize::MAX; (nt + 1) * (nx + 1)];
        for i in 0..=self.nt {
            for j in 0..=self.nx {
                grid_vertex[2 * i * (nx + 1) + 2 * j] = self.grid_vertex[i * (self.nx + 1) + j];
            }
        }
        let mut parent_pos = vec![(0usize, 0usize); nvp];
        for i in 0..=self.nt {
            for j in 0..=self.nx {
                parent_pos[self.grid_vertex[i * (self.nx + 1) + j]] = (2 * i, 2 * j);
            }
        }
        for (e, &[p, q]) in self.edges.iter().enumerate() {
            let (a, b) = (parent_pos[p], parent_pos[q]);
            let (i, j) = ((a.0 + b.0) / 2, (a.1 + b.1) / 2);
            grid_vertex[i * (nx + 1) + j] = nvp + e;
        }
        debug_assert!(grid_vertex.iter().all(|&v| v != usize::MAX));
        let mut fine = Mesh {
            rect: self.rect,
            nt,
            nx,
            level: self.level + 1,
            vertices,
            triangles: Vec::new(),
            edges: Vec::new(),
            triangle_edges: Vec::new(),
            boundary_edges: Vec::new(),
            grid_vertex,
        };
        fine.build_connectivity();
        let parent_tags: HashMap<usize, BoundaryTag> = self.boundary_edges.iter().map(|b| (b.edge, b.tag)).collect();
        for be in &mut fine.boundary_edges {
            let new_vertex = be.vertices.iter().copied().find(|&v| v >= nvp).expect("child edge without midpoint");
            be.tag = parent_tags[&(new_vertex - nvp)];
        }
        fine
    }

    /// Tags boundary edges covered by the inflow segments as `Inflow`, the rest
    /// as `Complement`.
    pub fn tag_boundary(&self, split: &BoundarySplit) -> Result<Mesh> {
        if split.inflow.is_empty() {
            return Err(Error::Boundary("inflow boundary is empty".into()));
        }
        let tol = GEOM_TOL * self.rect.scale();
        let mut sides = Vec::with_capacity(split.inflow.len());
        for seg in &split.inflow {
            let side = [Side::TMin, Side::TMax, Side::XMin, Side::XMax]
                .into_iter()
                .find(|&s| self.rect.on_side(seg.a, s) && self.rect.on_side(seg.b, s))
                .ok_or_else(|| {
                    Error::Boundary(format!("segment {:?} -> {:?} does not lie on the perimeter", seg.a, seg.b))
                })?;
            if dist(seg.a, seg.b) <= tol {
                return Err(Error::Boundary(format!("segment at {:?} has zero length", seg.a)));
            }
            sides.push(side);
        }
        let mut mesh = self.clone();
        for be in &mut mesh.boundary_edges {
            let pa = self.vertices[be.vertices[0]];
            let pb = self.vertices[be.vertices[1]];
            let mut tag = BoundaryTag::Complement;
            for (seg, &side) in split.inflow.iter().zip(&sides) {
                if side != be.side {
                    continue;
                }
                let ina = within(seg, pa, tol);
                let inb = within(seg, pb, tol);
                let overlaps = overlap_len(seg, pa, pb) > tol;
                if ina && inb {
                    tag = BoundaryTag::Inflow;
                } else if overlaps {
                    return Err(Error::Boundary(format!("edge {:?} -> {:?} straddles an inflow segment end", pa, pb)));
                }
            }
            be.tag = tag;
        }
        let n_in = mesh.boundary_edges.iter().filter(|b| b.tag == BoundaryTag::Inflow).count();
        if n_in == 0 {
            return Err(Error::Boundary("no boundary edge is covered by the inflow segments".into()));
        }
        if n_in == mesh.boundary_edges.len() {
            return Err(Error::Boundary("inflow covers the whole perimeter".into()));
        }
        Ok(mesh)
    }

    pub fn rect(&self) -> Rect {
        self.rect
    }

    /// Cells along `t` and `x`.
    pub fn cells(&self) -> (usize, usize) {
        (self.nt, self.nx)
    }

    pub fn level(&self) -> usize {
        self.level
    }

    /// Side length of the square cells.
    pub fn h(&self) -> f64 {
        (self.rect.t1 - self.rect.t0) / self.nt as f64
    }

    pub fn vertices(&self) -> &[Point] {
        &self.vertices
    }

    pub fn triangles(&self) -> &[[usize; 3]] {
        &self.triangles
    }

    pub fn edges(&self) -> &[[usize; 2]] {
        &self.edges
    }

    /// Local edge `k` of a triangle joins local vertices `k` and `k + 1`.
    pub fn triangle_edges(&self) -> &[[usize; 3]] {
        &self.triangle_edges
    }

    pub fn boundary_edges(&self) -> &[BoundaryEdge] {
        &self.boundary_edges
    }

    pub fn n_vertices(&self) -> usize {
        self.vertices.len()
    }

    pub fn n_triangles(&self) -> usize {
        self.triangles.len()
    }

    /// Vertex at grid position `(i, j)` (`i` along `t`).
    pub fn grid_vertex(&self, i: usize, j: usize) -> usize {
        self.grid_vertex[i * (self.nx + 1) + j]
    }

    pub fn triangle_points(&self, k: usize) -> [Point; 3] {
        let [a, b, c] = self.triangles[k];
        [self.vertices[a], self.vertices[b], self.vertices[c]]
    }

    pub fn signed_area(&self, k: usize) -> f64 {
        let [a, b, c] = self.triangle_points(k);
        0.5 * ((b[0] - a[0]) * (c[1] - a[1]) - (c[0] - a[0]) * (b[1] - a[1]))
    }

    /// Finds the triangle containing `p` and the reference coordinates of `p`
    /// in it. Points on shared edges resolve to the lower-indexed cell side.
    pub fn locate(&self, p: Point) -> Option<(usize, [f64; 2])> {
        let r = &self.rect;
        let tol = 1e-10 * r.scale();
        if !r.contains(p, tol) {
            return None;
        }
        let h = self.h();
        let ft = (p[0] - r.t0) / h;
        let fx = (p[1] - r.x0) / h;
        let i = (ft.floor().max(0.0) as usize).min(self.nt - 1);
        let j = (fx.floor().max(0.0) as usize).min(self.nx - 1);
        let a = ft - i as f64;
        let b = fx - j as f64;
        let cell = 2 * (i * self.nx + j);
        if b <= a {
            Some((cell, [a - b, b]))
        } else {
            Some((cell + 1, [a, b - a]))
        }
    }

    /// Plain-text vertex adjacency listing, one vertex per line.
    pub fn adjacency_dump(&self) -> String {
        let mut nbrs = vec![Vec::new(); self.vertices.len()];
        for &[p, q] in &self.edges {
            nbrs[p].push(q);
            nbrs[q].push(p);
        }
        let mut out = String::new();
        let _ = writeln!(out, "# vertex t x : neighbours");
        for (v, list) in nbrs.iter_mut().enumerate() {
            list.sort_unstable();
            let p = self.vertices[v];
            let _ = write!(out, "{v} {:.12} {:.12} :", p[0], p[1]);
            for n in list.iter() {
                let _ = write!(out, " {n}");
            }
            out.push('\n');
        }
        out
    }
}

fn grid_point(rect: &Rect, nt: usize, nx: usize, i: usize, j: usize) -> Point {
    let t = if i == nt { rect.t1 } else { rect.t0 + (rect.t1 - rect.t0) * i as f64 / nt as f64 };
    let x = if j == nx { rect.x1 } else { rect.x0 + (rect.x1 - rect.x0) * j as f64 / nx as f64 };
    [t, x]
}

pub(crate) fn midpoint(a: Point, b: Point) -> Point {
    [0.5 * (a[0] + b[0]), 0.5 * (a[1] + b[1])]
}

pub(crate) fn dist(a: Point, b: Point) -> f64 {
    ((a[0] - b[0]).powi(2) + (a[1] - b[1]).powi(2)).sqrt()
}

fn within(seg: &Segment, p: Point, tol: f64) -> bool {
    let len = dist(seg.a, seg.b);
    (dist(seg.a, p) + dist(p, seg.b) - len).abs() <= 4.0 * tol
}

fn overlap_len(seg: &Segment, pa: Point, pb: Point) -> f64 {
    // all four points are collinear along one axis
    let axis = if (seg.a[0] - seg.b[0]).abs() > (seg.a[1] - seg.b[1]).abs() { 0 } else { 1 };
    let (s0, s1) = (seg.a[axis].min(seg.b[axis]), seg.a[axis].max(seg.b[axis]));
    let (e0, e1) = (pa[axis].min(pb[axis]), pa[axis].max(pb[axis]));
    (s1.min(e1) - s0.max(e0)).max(0.0)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn burgers_rect() -> Rect {
        Rect::new(0.0, 1.0, -0.25, 1.75)
    }

    fn burgers_split() -> BoundarySplit {
        BoundarySplit::new(vec![Segment::new([0.0, -0.25], [0.0, 1.75]), Segment::new([0.0, -0.25], [1.0, -0.25])])
    }

    #[test]
    fn coarsest_counts() {
        let m = Mesh::build_structured(16, 32, burgers_rect()).unwrap();
        assert_eq!(m.n_vertices(), 561);
        assert_eq!(m.n_triangles(), 1024);
        assert!((m.h() - 1.0 / 16.0).abs() < 1e-15);
        let unit = Mesh::build_structured(1, 1, Rect::new(0.0, 1.0, 0.0, 1.0)).unwrap();
        assert_eq!((unit.n_vertices(), unit.n_triangles()), (4, 2));
        assert_eq!(unit.h(), 1.0);
        let two = Mesh::build_structured(2, 2, Rect::new(0.0, 1.0, 0.0, 1.0)).unwrap();
        assert_eq!((two.n_vertices(), two.n_triangles()), (9, 8));
    }

    #[test]
    fn non_square_cells_rejected() {
        let err = Mesh::build_structured(16, 16, burgers_rect()).unwrap_err();
        assert!(matches!(err, Error::Geometry(_)));
        assert!(Mesh::build_structured(0, 4, burgers_rect()).is_err());
    }

    #[test]
    fn orientation_area_and_perimeter() {
        let m = Mesh::build_structured(16, 32, burgers_rect()).unwrap().refine_uniform();
        let mut area = 0.0;
        for k in 0..m.n_triangles() {
            let a = m.signed_area(k);
            assert!(a > 0.0);
            area += a;
        }
        assert!((area - 2.0).abs() <= 1e-12 * 2.0);
        let len: f64 =
            m.boundary_edges().iter().map(|b| dist(m.vertices()[b.vertices[0]], m.vertices()[b.vertices[1]])).sum();
        assert!((len - 6.0).abs() <= 1e-12);
    }

    #[test]
    fn edge_incidence() {
        let m = Mesh::build_structured(3, 5, Rect::new(0.0, 0.6, 0.0, 1.0)).unwrap();
        let mut count = vec![0usize; m.edges().len()];
        for te in m.triangle_edges() {
            for &e in te {
                count[e] += 1;
            }
        }
        let boundary: std::collections::HashSet<usize> = m.boundary_edges().iter().map(|b| b.edge).collect();
        for (e, c) in count.iter().enumerate() {
            if boundary.contains(&e) {
                assert_eq!(*c, 1);
            } else {
                assert_eq!(*c, 2);
            }
        }
        // Euler: V - E + F = 1 for a disc
        assert_eq!(m.n_vertices() + m.n_triangles(), m.edges().len() + 1);
    }

    #[test]
    fn refinement_is_nested() {
        let coarse = Mesh::build_structured(16, 32, burgers_rect()).unwrap();
        let fine = coarse.refine_uniform();
        assert_eq!(fine.n_vertices(), 2145);
        assert_eq!(fine.n_triangles(), 4096);
        assert!((fine.h() - 1.0 / 32.0).abs() < 1e-15);
        assert_eq!(fine.level(), 1);
        assert_eq!(&fine.vertices()[..coarse.n_vertices()], coarse.vertices());
        let fine_pts: std::collections::HashSet<(u64, u64)> =
            fine.vertices().iter().map(|p| (p[0].to_bits(), p[1].to_bits())).collect();
        for &[p, q] in coarse.edges() {
            let m = midpoint(coarse.vertices()[p], coarse.vertices()[q]);
            assert!(fine_pts.contains(&(m[0].to_bits(), m[1].to_bits())));
        }
        let unit = Mesh::build_structured(1, 1, Rect::new(0.0, 1.0, 0.0, 1.0)).unwrap();
        let twice = unit.refine_uniform().refine_uniform();
        assert_eq!(twice.h(), 0.25);
        assert_eq!(twice.n_triangles(), 32);
    }

    #[test]
    fn burgers_tags() {
        let m = Mesh::build_structured(16, 32, burgers_rect()).unwrap().tag_boundary(&burgers_split()).unwrap();
        for be in m.boundary_edges() {
            let expected = match be.side {
                Side::TMin | Side::XMin => BoundaryTag::Inflow,
                Side::TMax | Side::XMax => BoundaryTag::Complement,
            };
            assert_eq!(be.tag, expected);
        }
        let fine = m.refine_uniform();
        for be in fine.boundary_edges() {
            let expected = match be.side {
                Side::TMin | Side::XMin => BoundaryTag::Inflow,
                _ => BoundaryTag::Complement,
            };
            assert_eq!(be.tag, expected);
        }
    }

    #[test]
    fn tag_errors() {
        let m = Mesh::build_structured(16, 32, burgers_rect()).unwrap();
        assert!(m.tag_boundary(&BoundarySplit::default()).is_err());
        let full = BoundarySplit::new(vec![
            Segment::new([0.0, -0.25], [0.0, 1.75]),
            Segment::new([0.0, -0.25], [1.0, -0.25]),
            Segment::new([1.0, -0.25], [1.0, 1.75]),
            Segment::new([0.0, 1.75], [1.0, 1.75]),
        ]);
        assert!(m.tag_boundary(&full).is_err());
        let off = BoundarySplit::new(vec![Segment::new([0.5, 0.5], [0.0, 0.5])]);
        assert!(m.tag_boundary(&off).is_err());
        let straddle = BoundarySplit::new(vec![Segment::new([0.0, -0.25], [0.0, 0.01])]);
        assert!(m.tag_boundary(&straddle).is_err());
    }

    #[test]
    fn locate_points() {
        let m = Mesh::build_structured(4, 8, burgers_rect()).unwrap();
        for &p in &[[0.3, 0.1], [0.0, -0.25], [1.0, 1.75], [0.61, 1.2], [0.5, 0.0]] {
            let (k, r) = m.locate(p).unwrap();
            let [a, b, c] = m.triangle_points(k);
            let q = [
                a[0] + r[0] * (b[0] - a[0]) + r[1] * (c[0] - a[0]),
                a[1] + r[0] * (b[1] - a[1]) + r[1] * (c[1] - a[1]),
            ];
            assert!(dist(p, q) < 1e-12);
            assert!(r[0] >= -1e-12 && r[1] >= -1e-12 && r[0] + r[1] <= 1.0 + 1e-12);
        }
        assert!(m.locate([1.5, 0.0]).is_none());
    }
}
