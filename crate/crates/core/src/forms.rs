//! Data functional, least-squares functionals, and Gauss-Newton assembly.
//!
//! The unknown is the triple `(u, q, psi)` with `u` unconstrained, `q` vanishing
//! on the complement boundary, and `psi` vanishing on the inflow boundary.
//! The data-only functional is
//!
//! ```text
//! F(u, q, psi) = |f(u) - grad q - curl psi|^2 + |grad q|^2 + 2 l(q)
//!              + h |u - g|^2_{inflow} + eps^2 |curl psi|^2
//! ```
//!
//! with `l(p) = (r, p) - <f(g) . n, p>_{inflow}`; the boundary term is the
//! optional augmentation.

use std::sync::Arc;

use rayon::prelude::*;

use crate::error::{Error, Result};
use crate::linalg::{dot, CsrMatrix};
use crate::mesh::{Mesh, Rect};
use crate::problem::{split_segment, ProblemSpec};
use crate::quadrature::{gauss_legendre, QuadratureRule};
use crate::space::{edge_basis, Constraint, FeField, FeSpace, Geometry, Tabulation};

const CHUNK: usize = 512;
const DATA_DEGREE: usize = 10;
const EDGE_POINTS: usize = 6;

/// The three spaces of one level and the quadrature used with them.
#[derive(Clone, Debug)]
pub struct Spaces {
    pub mesh: Arc<Mesh>,
    pub u: Arc<FeSpace>,
    pub c: Arc<FeSpace>,
    pub i: Arc<FeSpace>,
    pub rule: QuadratureRule,
    pub tab_u: Tabulation,
    pub tab_v: Tabulation,
}

impl Spaces {
    pub fn new(mesh: Arc<Mesh>, order_u: usize, order_v: usize) -> Result<Self> {
        let u = FeSpace::new(mesh.clone(), order_u, Constraint::None)?;
        let c = FeSpace::new(mesh.clone(), order_v, Constraint::OnGammaC)?;
        let i = FeSpace::new(mesh.clone(), order_v, Constraint::OnGammaI)?;
        let rule = QuadratureRule::new(assembly_degree(order_u, order_v))?;
        let tab_u = Tabulation::new(order_u, &rule);
        let tab_v = Tabulation::new(order_v, &rule);
        Ok(Self { mesh, u, c, i, rule, tab_u, tab_v })
    }

    /// Block offsets of `(u, q, psi)` among the free unknowns, plus the total.
    pub fn offsets(&self) -> [usize; 4] {
        let (a, b, c) = (self.u.n_free(), self.c.n_free(), self.i.n_free());
        [0, a, a + b, a + b + c]
    }

    pub fn n_unknowns(&self) -> usize {
        self.offsets()[3]
    }

    pub fn h(&self) -> f64 {
        self.mesh.h()
    }

    /// Lattice positions of all unknowns on a common grid of spacing `h / 2`.
    pub fn unknown_lattice(&self) -> Vec<[u32; 2]> {
        let mut out = Vec::with_capacity(self.n_unknowns());
        for s in [&self.u, &self.c, &self.i] {
            let scale = (2 / s.order()) as u32;
            out.extend(s.free_dofs().iter().map(|&d| {
                let g = s.dof_grid()[d];
                [g[0] * scale, g[1] * scale]
            }));
        }
        out
    }
}

/// Quadrature degree that integrates the Burgers terms exactly.
pub fn assembly_degree(order_u: usize, order_v: usize) -> usize {
    if order_u >= 2 {
        8
    } else if order_v >= 2 {
        6
    } else {
        4
    }
}

/// Options shared by functional evaluation and assembly.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct FormOptions {
    /// Weight of the boundary augmentation (the level mesh size).
    pub h: f64,
    pub augment: bool,
    pub eps: f64,
}

/// An iterate `(u, q, psi)`.
#[derive(Clone, Debug)]
pub struct Triple {
    pub u: FeField,
    pub q: FeField,
    pub psi: FeField,
}

impl Triple {
    pub fn zeros(sp: &Spaces) -> Self {
        Self { u: FeField::zeros(&sp.u), q: FeField::zeros(&sp.c), psi: FeField::zeros(&sp.i) }
    }

    /// Constant `u`, zero potentials.
    pub fn constant(sp: &Spaces, value: f64) -> Self {
        Self { u: FeField::interpolate(&sp.u, |_| value), q: FeField::zeros(&sp.c), psi: FeField::zeros(&sp.i) }
    }

    /// Free coefficients stacked as `(u, q, psi)`.
    pub fn to_vec(&self) -> Vec<f64> {
        let mut v = self.u.free_coeffs();
        v.extend(self.q.free_coeffs());
        v.extend(self.psi.free_coeffs());
        v
    }

    /// `self + s * delta` with `delta` over the stacked free unknowns.
    pub fn step(&self, s: f64, delta: &[f64]) -> Triple {
        let mut out = self.clone();
        let nu = self.u.space().n_free();
        let nq = self.q.space().n_free();
        out.u.add_free(s, &delta[..nu]);
        out.q.add_free(s, &delta[nu..nu + nq]);
        out.psi.add_free(s, &delta[nu + nq..]);
        out
    }

    pub fn prolongate(&self, fine: &Spaces) -> Triple {
        Triple { u: self.u.prolongate(&fine.u), q: self.q.prolongate(&fine.c), psi: self.psi.prolongate(&fine.i) }
    }

    fn check(&self, sp: &Spaces) -> Result<()> {
        let ok = Arc::ptr_eq(self.u.space(), &sp.u)
            && Arc::ptr_eq(self.q.space(), &sp.c)
            && Arc::ptr_eq(self.psi.space(), &sp.i);
        if ok {
            Ok(())
        } else {
            Err(Error::MeshMismatch)
        }
    }
}

/// `l(phi_i)` for every dof of the complement-constrained space (zero on
/// constrained dofs).
pub fn assemble_ld(space_c: &FeSpace, prob: &ProblemSpec) -> Result<Vec<f64>> {
    let mesh = space_c.mesh();
    prob.check_mesh(mesh)?;
    let rule = QuadratureRule::new(DATA_DEGREE)?;
    let tab = Tabulation::new(space_c.order(), &rule);
    let nl = space_c.n_local();
    let mut ld = vec![0.0; space_c.n_dofs()];
    for k in 0..mesh.n_triangles() {
        let geo = Geometry::new(mesh, k);
        let dofs = space_c.elem_dofs(k);
        for (q, (&p, &w)) in rule.points.iter().zip(&rule.weights).enumerate() {
            let r = prob.r(geo.map(p)) * w * geo.det;
            for (a, &phi) in tab.values(q).iter().enumerate().take(nl) {
                ld[dofs[a]] += r * phi;
            }
        }
    }
    for_inflow_points(space_c, prob, |dofs, phi, p, n, w| {
        let fg = prob.flux.f(prob.g(p));
        let fn_ = fg[0] * n[0] + fg[1] * n[1];
        for (a, &d) in dofs.iter().enumerate() {
            ld[d] -= w * fn_ * phi[a];
        }
    });
    for (d, v) in ld.iter_mut().enumerate() {
        if space_c.is_constrained(d) {
            *v = 0.0;
        }
    }
    Ok(ld)
}

/// Visits Gauss points on inflow edges: `(edge dofs, edge basis values, point,
/// outward normal, weight including length)`. Edges are split at the declared
/// jump points of `g`.
fn for_inflow_points(
    space: &FeSpace,
    prob: &ProblemSpec,
    mut visit: impl FnMut(&[usize], &[f64], [f64; 2], [f64; 2], f64),
) {
    let mesh = space.mesh();
    let (gx, gw) = gauss_legendre(EDGE_POINTS);
    let mut phi = [0.0; 3];
    for be in mesh.boundary_edges().iter().filter(|b| b.tag == crate::mesh::BoundaryTag::Inflow) {
        let dofs = space.edge_dofs(be);
        let a = mesh.vertices()[be.vertices[0]];
        let b = mesh.vertices()[be.vertices[1]];
        let len = crate::mesh::dist(a, b);
        let n = Rect::normal(be.side);
        let pieces = split_segment(&crate::mesh::Segment::new(a, b), &prob.inflow_jumps);
        if pieces.len() > 1 {
            log::warn!("inflow data jumps inside boundary edge {:?} -> {:?}; splitting the edge", a, b);
        }
        for (p0, p1) in pieces {
            let s0 = crate::mesh::dist(a, p0) / len;
            let s1 = crate::mesh::dist(a, p1) / len;
            for (x, w) in gx.iter().zip(&gw) {
                let s = s0 + (s1 - s0) * x;
                let p = [a[0] + s * (b[0] - a[0]), a[1] + s * (b[1] - a[1])];
                edge_basis(space.order(), s, &mut phi);
                visit(&dofs, &phi[..dofs.len()], p, n, w * (s1 - s0) * len);
            }
        }
    }
}

/// Terms of the data-only functional.
#[derive(Clone, Copy, Debug, Default, PartialEq)]
pub struct FunctionalParts {
    /// `|f(u) - grad q - curl psi|^2`
    pub residual: f64,
    /// `|grad q|^2`
    pub grad_q: f64,
    /// `l(q)`
    pub data: f64,
    /// `h |u - g|^2` over the inflow boundary (zero without augmentation).
    pub boundary: f64,
    /// `eps^2 |curl psi|^2`
    pub regularization: f64,
}

impl FunctionalParts {
    pub fn total(&self) -> f64 {
        self.residual + self.grad_q + 2.0 * self.data + self.boundary + self.regularization
    }
}

/// Values and physical gradients of a field at the quadrature points of one
/// triangle.
#[inline]
fn field_at(field: &FeField, tab: &Tabulation, geo: &Geometry, k: usize, q: usize) -> (f64, [f64; 2]) {
    let dofs = field.space().elem_dofs(k);
    let c = field.coeffs();
    let (mut v, mut g) = (0.0, [0.0, 0.0]);
    for (a, &d) in dofs.iter().enumerate() {
        let x = c[d];
        v += x * tab.values(q)[a];
        let gr = tab.grads(q)[a];
        g[0] += x * gr[0];
        g[1] += x * gr[1];
    }
    (v, geo.grad(g))
}

#[inline]
fn curl(g: [f64; 2]) -> [f64; 2] {
    [g[1], -g[0]]
}

/// Deterministic parallel sum of per-triangle contributions.
fn sum_over_triangles<const N: usize>(n: usize, f: impl Fn(usize) -> [f64; N] + Sync) -> [f64; N] {
    let chunks: Vec<[f64; N]> = (0..n.div_ceil(CHUNK))
        .into_par_iter()
        .map(|c| {
            let mut acc = [0.0; N];
            for k in c * CHUNK..((c + 1) * CHUNK).min(n) {
                let v = f(k);
                for i in 0..N {
                    acc[i] += v[i];
                }
            }
            acc
        })
        .collect();
    let mut out = [0.0; N];
    for c in chunks {
        for i in 0..N {
            out[i] += c[i];
        }
    }
    out
}

pub fn eval_parts(
    sp: &Spaces,
    x: &Triple,
    ld: &[f64],
    prob: &ProblemSpec,
    opts: &FormOptions,
) -> Result<FunctionalParts> {
    x.check(sp)?;
    if ld.len() != sp.c.n_dofs() {
        return Err(Error::Dimension { expected: sp.c.n_dofs(), got: ld.len() });
    }
    let mesh = &sp.mesh;
    let [residual, grad_q, curl_psi] = sum_over_triangles(mesh.n_triangles(), |k| {
        let geo = Geometry::new(mesh, k);
        let mut acc = [0.0; 3];
        for (q, &w) in sp.rule.weights.iter().enumerate() {
            let (u, _) = field_at(&x.u, &sp.tab_u, &geo, k, q);
            let (_, gq) = field_at(&x.q, &sp.tab_v, &geo, k, q);
            let (_, gp) = field_at(&x.psi, &sp.tab_v, &geo, k, q);
            let f = prob.flux.f(u);
            let cp = curl(gp);
            let r = [f[0] - gq[0] - cp[0], f[1] - gq[1] - cp[1]];
            let wd = w * geo.det;
            acc[0] += wd * (r[0] * r[0] + r[1] * r[1]);
            acc[1] += wd * (gq[0] * gq[0] + gq[1] * gq[1]);
            acc[2] += wd * (gp[0] * gp[0] + gp[1] * gp[1]);
        }
        acc
    });
    let mut boundary = 0.0;
    if opts.augment {
        let c = x.u.coeffs();
        for_inflow_points(&sp.u, prob, |dofs, phi, p, _, w| {
            let u: f64 = dofs.iter().zip(phi).map(|(&d, &b)| c[d] * b).sum();
            let e = u - prob.g(p);
            boundary += w * e * e;
        });
        boundary *= opts.h;
    }
    Ok(FunctionalParts {
        residual,
        grad_q,
        data: dot(ld, x.q.coeffs()),
        boundary,
        regularization: opts.eps * opts.eps * curl_psi,
    })
}

/// The data-only functional, optionally augmented and regularized.
pub fn eval_fhat(sp: &Spaces, x: &Triple, ld: &[f64], prob: &ProblemSpec, opts: &FormOptions) -> Result<f64> {
    Ok(eval_parts(sp, x, ld, prob, opts)?.total())
}

/// Sparsity pattern coupling the free dofs of several spaces on one mesh,
/// in block order.
pub fn block_pattern(spaces: &[&FeSpace]) -> CsrMatrix {
    let mut offsets = vec![0usize];
    for s in spaces {
        offsets.push(offsets.last().unwrap() + s.n_free());
    }
    let n = *offsets.last().unwrap();
    let elems: Vec<(Vec<usize>, Vec<usize>)> = spaces.iter().map(|s| elements_of_dofs(s)).collect();
    let rows: Vec<(usize, usize)> =
        spaces.iter().enumerate().flat_map(|(b, s)| s.free_dofs().iter().map(move |&d| (b, d))).collect();
    let chunks: Vec<Vec<Vec<u32>>> = rows
        .par_chunks(4096)
        .map(|chunk| {
            chunk
                .iter()
                .map(|&(b, d)| {
                    let (ptr, list) = &elems[b];
                    let mut cols = Vec::with_capacity(64);
                    for &k in &list[ptr[d]..ptr[d + 1]] {
                        for (b2, s2) in spaces.iter().enumerate() {
                            for &d2 in s2.elem_dofs(k) {
                                if let Some(f) = s2.free_index(d2) {
                                    cols.push((offsets[b2] + f) as u32);
                                }
                            }
                        }
                    }
                    cols.sort_unstable();
                    cols.dedup();
                    cols
                })
                .collect()
        })
        .collect();
    CsrMatrix::from_pattern(n, chunks.into_iter().flatten().collect())
}

/// Triangles touching each dof, as offsets into a flat list.
fn elements_of_dofs(s: &FeSpace) -> (Vec<usize>, Vec<usize>) {
    let nt = s.mesh().n_triangles();
    let mut count = vec![0usize; s.n_dofs() + 1];
    for k in 0..nt {
        for &d in s.elem_dofs(k) {
            count[d + 1] += 1;
        }
    }
    for i in 0..s.n_dofs() {
        count[i + 1] += count[i];
    }
    let mut fill = count.clone();
    let mut list = vec![0usize; count[s.n_dofs()]];
    for k in 0..nt {
        for &d in s.elem_dofs(k) {
            list[fill[d]] = k;
            fill[d] += 1;
        }
    }
    (count, list)
}

/// Normal equations of one Gauss-Newton step over the stacked free unknowns.
#[derive(Clone, Debug)]
pub struct GnSystem {
    pub a: CsrMatrix,
    pub b: Vec<f64>,
    pub offsets: [usize; 4],
}

/// Assembles the Gauss-Newton system at `x` into `pattern` (from
/// [`gn_pattern`]). The update `d` solving `A d = b` minimizes the quadratic
/// model of the functional around `x`, whose gradient at `x` is `-2 b`.
pub fn assemble_gn(
    sp: &Spaces,
    x: &Triple,
    ld: &[f64],
    prob: &ProblemSpec,
    opts: &FormOptions,
    mut pattern: CsrMatrix,
) -> Result<GnSystem> {
    x.check(sp)?;
    let offsets = sp.offsets();
    if pattern.n_rows() != offsets[3] {
        return Err(Error::Dimension { expected: offsets[3], got: pattern.n_rows() });
    }
    pattern.fill_zero();
    let mut a = pattern;
    let mut b = vec![0.0; offsets[3]];
    let mesh = &sp.mesh;
    let (nu, nv) = (sp.u.n_local(), sp.c.n_local());
    let nl = nu + 2 * nv;
    let eps2 = opts.eps * opts.eps;
    let mut idx = [usize::MAX; 18];
    let mut ke = [[0.0; 18]; 18];
    let mut be = [0.0; 18];
    // Jacobian columns and gradients of the test functions
    let mut jc = [[0.0; 2]; 18];
    for k in 0..mesh.n_triangles() {
        let geo = Geometry::new(mesh, k);
        for (l, &d) in sp.u.elem_dofs(k).iter().enumerate() {
            idx[l] = sp.u.free_index(d).map_or(usize::MAX, |f| offsets[0] + f);
        }
        for (l, &d) in sp.c.elem_dofs(k).iter().enumerate() {
            idx[nu + l] = sp.c.free_index(d).map_or(usize::MAX, |f| offsets[1] + f);
        }
        for (l, &d) in sp.i.elem_dofs(k).iter().enumerate() {
            idx[nu + nv + l] = sp.i.free_index(d).map_or(usize::MAX, |f| offsets[2] + f);
        }
        for row in ke.iter_mut().take(nl) {
            row[..nl].iter_mut().for_each(|v| *v = 0.0);
        }
        be[..nl].iter_mut().for_each(|v| *v = 0.0);
        for (q, &w) in sp.rule.weights.iter().enumerate() {
            let wd = w * geo.det;
            let (u, _) = field_at(&x.u, &sp.tab_u, &geo, k, q);
            let (_, gq) = field_at(&x.q, &sp.tab_v, &geo, k, q);
            let (_, gp) = field_at(&x.psi, &sp.tab_v, &geo, k, q);
            let f = prob.flux.f(u);
            let fp = prob.flux.df(u);
            let cp = curl(gp);
            let r0 = [f[0] - gq[0] - cp[0], f[1] - gq[1] - cp[1]];
            let vu = sp.tab_u.values(q);
            for l in 0..nu {
                jc[l] = [fp[0] * vu[l], fp[1] * vu[l]];
            }
            let gv = sp.tab_v.grads(q);
            for l in 0..nv {
                let g = geo.grad(gv[l]);
                jc[nu + l] = [-g[0], -g[1]];
                let c = curl(g);
                jc[nu + nv + l] = [-c[0], -c[1]];
            }
            for i in 0..nl {
                let ji = jc[i];
                be[i] -= wd * (ji[0] * r0[0] + ji[1] * r0[1]);
                for j in i..nl {
                    ke[i][j] += wd * (ji[0] * jc[j][0] + ji[1] * jc[j][1]);
                }
            }
            for l in 0..nv {
                let g = [-jc[nu + l][0], -jc[nu + l][1]];
                let c = [-jc[nu + nv + l][0], -jc[nu + nv + l][1]];
                be[nu + l] -= wd * (gq[0] * g[0] + gq[1] * g[1]);
                be[nu + nv + l] -= wd * eps2 * (cp[0] * c[0] + cp[1] * c[1]);
                for m in l..nv {
                    let gm = [-jc[nu + m][0], -jc[nu + m][1]];
                    let s = wd * (g[0] * gm[0] + g[1] * gm[1]);
                    ke[nu + l][nu + m] += s;
                    ke[nu + nv + l][nu + nv + m] += eps2 * s;
                }
            }
        }
        for i in 0..nl {
            if idx[i] == usize::MAX {
                continue;
            }
            b[idx[i]] += be[i];
            for j in i..nl {
                if idx[j] == usize::MAX {
                    continue;
                }
                let v = ke[i][j];
                a.add(idx[i], idx[j], v);
                if i != j {
                    a.add(idx[j], idx[i], v);
                }
            }
        }
    }
    // data term on the q block
    for (d, &l) in ld.iter().enumerate() {
        if let Some(f) = sp.c.free_index(d) {
            b[offsets[1] + f] -= l;
        }
    }
    if opts.augment {
        let c = x.u.coeffs();
        let h = opts.h;
        for_inflow_points(&sp.u, prob, |dofs, phi, p, _, w| {
            let u: f64 = dofs.iter().zip(phi).map(|(&d, &v)| c[d] * v).sum();
            let e = u - prob.g(p);
            for (i, &di) in dofs.iter().enumerate() {
                let fi = offsets[0] + sp.u.free_index(di).expect("u is unconstrained");
                b[fi] -= h * w * e * phi[i];
                for (j, &dj) in dofs.iter().enumerate() {
                    let fj = offsets[0] + sp.u.free_index(dj).expect("u is unconstrained");
                    a.add(fi, fj, h * w * phi[i] * phi[j]);
                }
            }
        });
    }
    Ok(GnSystem { a, b, offsets })
}

/// Pattern of the Gauss-Newton matrix for a level.
pub fn gn_pattern(sp: &Spaces) -> CsrMatrix {
    block_pattern(&[&sp.u, &sp.c, &sp.i])
}

/// Stiffness matrix `(grad phi_i, grad phi_j)` over the free dofs.
pub fn assemble_stiffness(space: &FeSpace, rule: &QuadratureRule) -> CsrMatrix {
    let mut a = block_pattern(&[space]);
    let tab = Tabulation::new(space.order(), rule);
    let mesh = space.mesh();
    let nl = space.n_local();
    let mut g = [[0.0; 2]; 6];
    for k in 0..mesh.n_triangles() {
        let geo = Geometry::new(mesh, k);
        let dofs = space.elem_dofs(k);
        for (q, &w) in rule.weights.iter().enumerate() {
            for l in 0..nl {
                g[l] = geo.grad(tab.grads(q)[l]);
            }
            for i in 0..nl {
                let Some(fi) = space.free_index(dofs[i]) else { continue };
                for j in 0..nl {
                    let Some(fj) = space.free_index(dofs[j]) else { continue };
                    a.add(fi, fj, w * geo.det * (g[i][0] * g[j][0] + g[i][1] * g[j][1]));
                }
            }
        }
    }
    a
}

/// Load vector `(f(v), grad phi_i)` (or `(f(v), curl phi_i)` when `rotated`)
/// over the free dofs of `space`.
pub fn flux_load(v: &FeField, prob: &ProblemSpec, space: &FeSpace, rule: &QuadratureRule, rotated: bool) -> Vec<f64> {
    let tab_u = Tabulation::new(v.space().order(), rule);
    let tab = Tabulation::new(space.order(), rule);
    let mesh = space.mesh();
    let mut out = vec![0.0; space.n_free()];
    for k in 0..mesh.n_triangles() {
        let geo = Geometry::new(mesh, k);
        let dofs = space.elem_dofs(k);
        for (q, &w) in rule.weights.iter().enumerate() {
            let (u, _) = field_at(v, &tab_u, &geo, k, q);
            let f = prob.flux.f(u);
            for (l, &d) in dofs.iter().enumerate() {
                let Some(fi) = space.free_index(d) else { continue };
                let mut g = geo.grad(tab.grads(q)[l]);
                if rotated {
                    g = curl(g);
                }
                out[fi] += w * geo.det * (f[0] * g[0] + f[1] * g[1]);
            }
        }
    }
    out
}

/// `(a, b)` for two vector fields given by gradients or rotated gradients of
/// scalar fields on one mesh: `sum` of `(D1 x, D2 y)` with `D = grad` or `curl`.
pub fn gradient_inner(x: &FeField, rot_x: bool, y: &FeField, rot_y: bool, rule: &QuadratureRule) -> Result<f64> {
    if !x.space().same_mesh(y.space()) {
        return Err(Error::MeshMismatch);
    }
    let tx = Tabulation::new(x.space().order(), rule);
    let ty = Tabulation::new(y.space().order(), rule);
    let mesh = x.space().mesh().clone();
    let [s] = sum_over_triangles(mesh.n_triangles(), |k| {
        let geo = Geometry::new(&mesh, k);
        let mut acc = 0.0;
        for (q, &w) in rule.weights.iter().enumerate() {
            let (_, mut a) = field_at(x, &tx, &geo, k, q);
            let (_, mut b) = field_at(y, &ty, &geo, k, q);
            if rot_x {
                a = curl(a);
            }
            if rot_y {
                b = curl(b);
            }
            acc += w * geo.det * (a[0] * b[0] + a[1] * b[1]);
        }
        [acc]
    });
    Ok(s)
}

/// `|f(v) - grad p - curl mu|^2` and `|f(v)|^2`.
pub fn residual_norms(
    v: &FeField,
    p: &FeField,
    mu: &FeField,
    prob: &ProblemSpec,
    rule: &QuadratureRule,
) -> Result<(f64, f64)> {
    if !v.space().same_mesh(p.space()) || !v.space().same_mesh(mu.space()) {
        return Err(Error::MeshMismatch);
    }
    let tv = Tabulation::new(v.space().order(), rule);
    let tp = Tabulation::new(p.space().order(), rule);
    let tm = Tabulation::new(mu.space().order(), rule);
    let mesh = v.space().mesh().clone();
    let [res, fv] = sum_over_triangles(mesh.n_triangles(), |k| {
        let geo = Geometry::new(&mesh, k);
        let mut acc = [0.0; 2];
        for (q, &w) in rule.weights.iter().enumerate() {
            let (u, _) = field_at(v, &tv, &geo, k, q);
            let (_, gp) = field_at(p, &tp, &geo, k, q);
            let (_, gm) = field_at(mu, &tm, &geo, k, q);
            let f = prob.flux.f(u);
            let c = curl(gm);
            let r = [f[0] - gp[0] - c[0], f[1] - gp[1] - c[1]];
            acc[0] += w * geo.det * (r[0] * r[0] + r[1] * r[1]);
            acc[1] += w * geo.det * (f[0] * f[0] + f[1] * f[1]);
        }
        acc
    });
    Ok((res, fv))
}
