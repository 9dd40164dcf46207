//! Continuous Lagrange spaces of order 1 and 2, fields over them, and the
//! reference-element machinery used by assembly.

use std::sync::Arc;

use crate::error::{Error, Result};
use crate::mesh::{BoundaryEdge, BoundaryTag, Mesh, Point};
use crate::quadrature::QuadratureRule;

/// Which boundary portion carries a homogeneous trace constraint.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash)]
pub enum Constraint {
    None,
    OnGammaC,
    OnGammaI,
}

impl Constraint {
    fn tag(self) -> Option<BoundaryTag> {
        match self {
            Constraint::None => None,
            Constraint::OnGammaC => Some(BoundaryTag::Complement),
            Constraint::OnGammaI => Some(BoundaryTag::Inflow),
        }
    }
}

const NONE: u32 = u32::MAX;

#[derive(Debug)]
pub struct FeSpace {
    mesh: Arc<Mesh>,
    order: usize,
    constraint: Constraint,
    dof_coords: Vec<Point>,
    dof_grid: Vec<[u32; 2]>,
    elem_dofs: Vec<usize>,
    constrained: Vec<bool>,
    free_index: Vec<u32>,
    free_dofs: Vec<usize>,
}

impl FeSpace {
    pub fn new(mesh: Arc<Mesh>, order: usize, constraint: Constraint) -> Result<Arc<FeSpace>> {
        if order != 1 && order != 2 {
            return Err(Error::Order(order));
        }
        let nv = mesh.n_vertices();
        let rect = mesh.rect();
        let h = mesh.h();
        let vgrid: Vec<[u32; 2]> = mesh
            .vertices()
            .iter()
            .map(|p| {
                let i = ((p[0] - rect.t0) / h).round() as u32;
                let j = ((p[1] - rect.x0) / h).round() as u32;
                [i * order as u32, j * order as u32]
            })
            .collect();
        let mut dof_coords = mesh.vertices().to_vec();
        let mut dof_grid = vgrid.clone();
        if order == 2 {
            for &[a, b] in mesh.edges() {
                dof_coords.push(crate::mesh::midpoint(mesh.vertices()[a], mesh.vertices()[b]));
                dof_grid.push([(vgrid[a][0] + vgrid[b][0]) / 2, (vgrid[a][1] + vgrid[b][1]) / 2]);
            }
        }
        let nloc = n_local(order);
        let mut elem_dofs = Vec::with_capacity(nloc * mesh.n_triangles());
        for (tri, te) in mesh.triangles().iter().zip(mesh.triangle_edges()) {
            elem_dofs.extend_from_slice(tri);
            if order == 2 {
                elem_dofs.extend(te.iter().map(|&e| nv + e));
            }
        }
        let ndof = dof_coords.len();
        let mut constrained = vec![false; ndof];
        if let Some(tag) = constraint.tag() {
            for be in mesh.boundary_edges().iter().filter(|b| b.tag == tag) {
                constrained[be.vertices[0]] = true;
                constrained[be.vertices[1]] = true;
                if order == 2 {
                    constrained[nv + be.edge] = true;
                }
            }
        }
        let mut free_index = vec![NONE; ndof];
        let mut free_dofs = Vec::with_capacity(ndof);
        for d in 0..ndof {
            if !constrained[d] {
                free_index[d] = free_dofs.len() as u32;
                free_dofs.push(d);
            }
        }
        Ok(Arc::new(FeSpace {
            mesh,
            order,
            constraint,
            dof_coords,
            dof_grid,
            elem_dofs,
            constrained,
            free_index,
            free_dofs,
        }))
    }

    pub fn mesh(&self) -> &Arc<Mesh> {
        &self.mesh
    }

    pub fn order(&self) -> usize {
        self.order
    }

    pub fn constraint(&self) -> Constraint {
        self.constraint
    }

    pub fn n_dofs(&self) -> usize {
        self.dof_coords.len()
    }

    pub fn n_free(&self) -> usize {
        self.free_dofs.len()
    }

    pub fn n_constrained(&self) -> usize {
        self.n_dofs() - self.n_free()
    }

    pub fn n_local(&self) -> usize {
        n_local(self.order)
    }

    pub fn dof_coords(&self) -> &[Point] {
        &self.dof_coords
    }

    /// Dof positions on the lattice of spacing `h / order`.
    pub fn dof_grid(&self) -> &[[u32; 2]] {
        &self.dof_grid
    }

    pub fn elem_dofs(&self, k: usize) -> &[usize] {
        let n = self.n_local();
        &self.elem_dofs[k * n..(k + 1) * n]
    }

    pub fn is_constrained(&self, dof: usize) -> bool {
        self.constrained[dof]
    }

    /// Position of `dof` among the free dofs.
    pub fn free_index(&self, dof: usize) -> Option<usize> {
        match self.free_index[dof] {
            NONE => None,
            i => Some(i as usize),
        }
    }

    pub fn free_dofs(&self) -> &[usize] {
        &self.free_dofs
    }

    /// Dofs along a boundary edge: its two vertices, then the midpoint for P2.
    pub fn edge_dofs(&self, be: &BoundaryEdge) -> Vec<usize> {
        let mut d = vec![be.vertices[0], be.vertices[1]];
        if self.order == 2 {
            d.push(self.mesh.n_vertices() + be.edge);
        }
        d
    }

    /// Basis values and physical gradients of the local dofs of triangle `k`.
    pub fn eval_basis(&self, k: usize, r: [f64; 2]) -> (Vec<f64>, Vec<[f64; 2]>) {
        let n = self.n_local();
        let mut v = vec![0.0; n];
        let mut g = vec![[0.0; 2]; n];
        ref_basis(self.order, r, &mut v, &mut g);
        let geo = Geometry::new(&self.mesh, k);
        for gi in g.iter_mut() {
            *gi = geo.grad(*gi);
        }
        (v, g)
    }

    /// Reference basis values and gradients at the points of a rule.
    pub fn tabulate(&self, rule: &QuadratureRule) -> Tabulation {
        Tabulation::new(self.order, rule)
    }

    pub fn same_mesh(&self, other: &FeSpace) -> bool {
        Arc::ptr_eq(&self.mesh, &other.mesh)
    }
}

pub fn n_local(order: usize) -> usize {
    if order == 1 {
        3
    } else {
        6
    }
}

/// Lagrange basis on the reference triangle. Local order: vertices, then the
/// midpoints of edges (0,1), (1,2), (2,0).
pub fn ref_basis(order: usize, r: [f64; 2], vals: &mut [f64], grads: &mut [[f64; 2]]) {
    let l = [1.0 - r[0] - r[1], r[0], r[1]];
    let dl = [[-1.0, -1.0], [1.0, 0.0], [0.0, 1.0]];
    if order == 1 {
        vals[..3].copy_from_slice(&l);
        grads[..3].copy_from_slice(&dl);
        return;
    }
    for i in 0..3 {
        vals[i] = l[i] * (2.0 * l[i] - 1.0);
        let c = 4.0 * l[i] - 1.0;
        grads[i] = [c * dl[i][0], c * dl[i][1]];
    }
    for e in 0..3 {
        let (a, b) = (e, (e + 1) % 3);
        vals[3 + e] = 4.0 * l[a] * l[b];
        grads[3 + e] = [4.0 * (dl[a][0] * l[b] + l[a] * dl[b][0]), 4.0 * (dl[a][1] * l[b] + l[a] * dl[b][1])];
    }
}

/// 1D Lagrange basis along an edge parameterized by `s` in `[0, 1]`:
/// start vertex, end vertex, midpoint.
pub fn edge_basis(order: usize, s: f64, vals: &mut [f64]) {
    if order == 1 {
        vals[0] = 1.0 - s;
        vals[1] = s;
    } else {
        vals[0] = (1.0 - s) * (1.0 - 2.0 * s);
        vals[1] = s * (2.0 * s - 1.0);
        vals[2] = 4.0 * s * (1.0 - s);
    }
}

#[derive(Clone, Debug)]
pub struct Tabulation {
    pub n_local: usize,
    pub n_points: usize,
    /// `values[q * n_local + i]`
    pub values: Vec<f64>,
    /// Reference gradients, same layout as `values`.
    pub grads: Vec<[f64; 2]>,
}

impl Tabulation {
    pub fn new(order: usize, rule: &QuadratureRule) -> Self {
        let n = n_local(order);
        let mut values = vec![0.0; n * rule.len()];
        let mut grads = vec![[0.0; 2]; n * rule.len()];
        for (q, &p) in rule.points.iter().enumerate() {
            ref_basis(order, p, &mut values[q * n..(q + 1) * n], &mut grads[q * n..(q + 1) * n]);
        }
        Self { n_local: n, n_points: rule.len(), values, grads }
    }

    pub fn values(&self, q: usize) -> &[f64] {
        &self.values[q * self.n_local..(q + 1) * self.n_local]
    }

    pub fn grads(&self, q: usize) -> &[[f64; 2]] {
        &self.grads[q * self.n_local..(q + 1) * self.n_local]
    }
}

/// Affine map of a triangle from the reference element.
#[derive(Clone, Copy, Debug)]
pub struct Geometry {
    pub origin: Point,
    pub jac: [[f64; 2]; 2],
    /// `J^{-T}`, applied to reference gradients.
    pub jinv_t: [[f64; 2]; 2],
    /// `|det J|` = twice the area.
    pub det: f64,
}

impl Geometry {
    pub fn new(mesh: &Mesh, k: usize) -> Self {
        Self::from_points(mesh.triangle_points(k))
    }

    pub fn from_points(p: [Point; 3]) -> Self {
        let [a, b, c] = p;
        let jac = [[b[0] - a[0], c[0] - a[0]], [b[1] - a[1], c[1] - a[1]]];
        let det = jac[0][0] * jac[1][1] - jac[0][1] * jac[1][0];
        let jinv_t = [[jac[1][1] / det, -jac[1][0] / det], [-jac[0][1] / det, jac[0][0] / det]];
        Self { origin: a, jac, jinv_t, det: det.abs() }
    }

    /// Reference coordinates of a physical point.
    pub fn inverse(&self, p: Point) -> [f64; 2] {
        let rel = [p[0] - self.origin[0], p[1] - self.origin[1]];
        [
            self.jinv_t[0][0] * rel[0] + self.jinv_t[1][0] * rel[1],
            self.jinv_t[0][1] * rel[0] + self.jinv_t[1][1] * rel[1],
        ]
    }

    pub fn map(&self, r: [f64; 2]) -> Point {
        [
            self.origin[0] + self.jac[0][0] * r[0] + self.jac[0][1] * r[1],
            self.origin[1] + self.jac[1][0] * r[0] + self.jac[1][1] * r[1],
        ]
    }

    #[inline]
    pub fn grad(&self, g: [f64; 2]) -> [f64; 2] {
        [self.jinv_t[0][0] * g[0] + self.jinv_t[0][1] * g[1], self.jinv_t[1][0] * g[0] + self.jinv_t[1][1] * g[1]]
    }
}

/// Coefficient vector over a space; constrained entries are zero.
#[derive(Clone, Debug)]
pub struct FeField {
    space: Arc<FeSpace>,
    coeffs: Vec<f64>,
}

impl FeField {
    pub fn zeros(space: &Arc<FeSpace>) -> Self {
        Self { space: space.clone(), coeffs: vec![0.0; space.n_dofs()] }
    }

    pub fn from_coeffs(space: &Arc<FeSpace>, mut coeffs: Vec<f64>) -> Result<Self> {
        if coeffs.len() != space.n_dofs() {
            return Err(Error::Dimension { expected: space.n_dofs(), got: coeffs.len() });
        }
        for (d, c) in coeffs.iter_mut().enumerate() {
            if space.constrained[d] {
                *c = 0.0;
            }
        }
        Ok(Self { space: space.clone(), coeffs })
    }

    /// Nodal interpolant of `w`, with constrained entries zeroed.
    pub fn interpolate(space: &Arc<FeSpace>, w: impl Fn(Point) -> f64) -> Self {
        let coeffs =
            space.dof_coords.iter().enumerate().map(|(d, &p)| if space.constrained[d] { 0.0 } else { w(p) }).collect();
        Self { space: space.clone(), coeffs }
    }

    pub fn space(&self) -> &Arc<FeSpace> {
        &self.space
    }

    pub fn coeffs(&self) -> &[f64] {
        &self.coeffs
    }

    /// Free coefficients in free-dof order.
    pub fn free_coeffs(&self) -> Vec<f64> {
        self.space.free_dofs.iter().map(|&d| self.coeffs[d]).collect()
    }

    /// `self += s * delta`, with `delta` given over the free dofs.
    pub fn add_free(&mut self, s: f64, delta: &[f64]) {
        for (&d, &v) in self.space.free_dofs.iter().zip(delta) {
            self.coeffs[d] += s * v;
        }
    }

    /// Local coefficients of triangle `k`.
    #[inline]
    pub fn local(&self, k: usize, out: &mut [f64]) {
        for (o, &d) in out.iter_mut().zip(self.space.elem_dofs(k)) {
            *o = self.coeffs[d];
        }
    }

    pub fn eval_in(&self, k: usize, r: [f64; 2]) -> f64 {
        let n = self.space.n_local();
        let mut v = [0.0; 6];
        let mut g = [[0.0; 2]; 6];
        ref_basis(self.space.order, r, &mut v[..n], &mut g[..n]);
        self.space.elem_dofs(k).iter().zip(&v[..n]).map(|(&d, &b)| self.coeffs[d] * b).sum()
    }

    /// Point evaluation; `None` outside the mesh.
    pub fn eval(&self, p: Point) -> Option<f64> {
        let (k, r) = self.space.mesh.locate(p)?;
        Some(self.eval_in(k, r))
    }

    /// Interpolates this field into a space on a refinement of its mesh.
    /// Exact when the target space contains this one.
    pub fn prolongate(&self, fine: &Arc<FeSpace>) -> FeField {
        FeField::interpolate(fine, |p| self.eval(p).expect("fine dof outside coarse mesh"))
    }
}
