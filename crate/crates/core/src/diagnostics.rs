//! Helmholtz-decomposition diagnostics, error norms, and convergence tables.

use std::fmt::Write as _;
use std::sync::Arc;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::exact::Oracle;
use crate::forms::{assemble_ld, assemble_stiffness, flux_load, gradient_inner, residual_norms, Spaces, Triple};
use crate::gn::SolveReport;
use crate::linalg::{nested_dissection, Cholesky, Ordering};
use crate::mesh::Point;
use crate::problem::ProblemSpec;
use crate::quadrature::QuadratureRule;
use crate::space::{FeField, FeSpace, Geometry};

/// Poisson solver on the free dofs of one space.
pub struct Poisson {
    space: Arc<FeSpace>,
    chol: Cholesky,
}

impl Poisson {
    pub fn new(space: &Arc<FeSpace>, rule: &QuadratureRule) -> Result<Self> {
        let k = assemble_stiffness(space, rule);
        let lattice: Vec<[u32; 2]> = space.free_dofs().iter().map(|&d| space.dof_grid()[d]).collect();
        let order = nested_dissection(&lattice, space.order() as u32);
        let mut chol = Cholesky::analyze(&k, &Ordering::Custom(order))?;
        chol.factor(&k)?;
        Ok(Self { space: space.clone(), chol })
    }

    /// Field whose stiffness pairing with each free basis function is `load`.
    pub fn solve(&self, load: &[f64]) -> Result<FeField> {
        let x = self.chol.solve(load)?;
        let mut c = vec![0.0; self.space.n_dofs()];
        for (&d, v) in self.space.free_dofs().iter().zip(x) {
            c[d] = v;
        }
        FeField::from_coeffs(&self.space, c)
    }
}

/// Discrete Helmholtz machinery for one level: potentials of `f(v)` and the
/// data potential `q_*` with `(grad q_*, grad phi) = -l(phi)`.
pub struct Helmholtz {
    pub spaces: Spaces,
    prob: ProblemSpec,
    ld_free: Vec<f64>,
    poisson_c: Poisson,
    poisson_i: Poisson,
}

impl Helmholtz {
    pub fn new(spaces: &Spaces, prob: &ProblemSpec) -> Result<Self> {
        let ld = assemble_ld(&spaces.c, prob)?;
        let ld_free = spaces.c.free_dofs().iter().map(|&d| ld[d]).collect();
        Ok(Self {
            spaces: spaces.clone(),
            prob: prob.clone(),
            ld_free,
            poisson_c: Poisson::new(&spaces.c, &spaces.rule)?,
            poisson_i: Poisson::new(&spaces.i, &spaces.rule)?,
        })
    }

    fn check(&self, v: &FeField) -> Result<()> {
        if v.space().same_mesh(&self.spaces.c) {
            Ok(())
        } else {
            Err(Error::MeshMismatch)
        }
    }

    /// `(q_v, psi_v)`: `(grad q_v, grad phi) = (f(v), grad phi)` and
    /// `(curl psi_v, curl nu) = (f(v), curl nu)`.
    pub fn discrete_helmholtz(&self, v: &FeField) -> Result<(FeField, FeField)> {
        self.check(v)?;
        let rule = &self.spaces.rule;
        let lq = flux_load(v, &self.prob, &self.spaces.c, rule, false);
        let lp = flux_load(v, &self.prob, &self.spaces.i, rule, true);
        Ok((self.poisson_c.solve(&lq)?, self.poisson_i.solve(&lp)?))
    }

    pub fn q_star(&self) -> Result<FeField> {
        let rhs: Vec<f64> = self.ld_free.iter().map(|v| -v).collect();
        self.poisson_c.solve(&rhs)
    }

    /// `|grad (q_v - q_*)|`, the discrete dual norm of `div f(v) - l`.
    pub fn hminus1_residual(&self, v: &FeField) -> Result<f64> {
        self.check(v)?;
        let mut load = flux_load(v, &self.prob, &self.spaces.c, &self.spaces.rule, false);
        for (l, d) in load.iter_mut().zip(&self.ld_free) {
            *l += d;
        }
        let w = self.poisson_c.solve(&load)?;
        Ok(gradient_inner(&w, false, &w, false, &self.spaces.rule)?.max(0.0).sqrt())
    }

    /// Minimum over `(p, mu)` of `|grad p - grad q_v|^2 + |curl mu - curl psi_v|^2
    /// + |grad p - grad q_*|^2`, attained at `p = (q_v + q_*) / 2`, `mu = psi_v`.
    pub fn reduced_functional(&self, v: &FeField) -> Result<f64> {
        let (qv, psiv) = self.discrete_helmholtz(v)?;
        let qs = self.q_star()?;
        let p: Vec<f64> = qv.coeffs().iter().zip(qs.coeffs()).map(|(a, b)| 0.5 * (a + b)).collect();
        let p = FeField::from_coeffs(&self.spaces.c, p)?;
        let diff = |a: &FeField, b: &FeField| -> Result<FeField> {
            FeField::from_coeffs(a.space(), a.coeffs().iter().zip(b.coeffs()).map(|(x, y)| x - y).collect())
        };
        let rule = &self.spaces.rule;
        let d1 = diff(&p, &qv)?;
        let d2 = diff(&psiv, &psiv)?;
        let d3 = diff(&p, &qs)?;
        Ok(gradient_inner(&d1, false, &d1, false, rule)?
            + gradient_inner(&d2, true, &d2, true, rule)?
            + gradient_inner(&d3, false, &d3, false, rule)?)
    }

    /// `|f(v)|^2 - |grad q_v|^2 - |curl psi_v|^2`: the part of `f(v)` outside the
    /// discrete gradient and rotated-gradient spaces.
    pub fn helmholtz_remainder(&self, v: &FeField) -> Result<f64> {
        let (qv, psiv) = self.discrete_helmholtz(v)?;
        let rule = &self.spaces.rule;
        let zero_c = FeField::zeros(&self.spaces.c);
        let zero_i = FeField::zeros(&self.spaces.i);
        let (_, fv) = residual_norms(v, &zero_c, &zero_i, &self.prob, rule)?;
        Ok(fv - gradient_inner(&qv, false, &qv, false, rule)? - gradient_inner(&psiv, true, &psiv, true, rule)?)
    }

    /// `|f(u) - grad q - curl psi|^2 + |grad q - grad q_ref|^2`.
    pub fn eval_f(&self, x: &Triple, q_ref: &FeField) -> Result<f64> {
        let rule = &self.spaces.rule;
        let (res, _) = residual_norms(&x.u, &x.q, &x.psi, &self.prob, rule)?;
        let d = FeField::from_coeffs(
            &self.spaces.c,
            x.q.coeffs().iter().zip(q_ref.coeffs()).map(|(a, b)| a - b).collect(),
        )?;
        Ok(res + gradient_inner(&d, false, &d, false, rule)?)
    }
}

/// Squared L2, L1, and squared L1 norms of `u - exact`.
#[derive(Clone, Copy, Debug, Default, PartialEq, Serialize, Deserialize)]
pub struct ErrorNorms {
    pub l2_squared: f64,
    pub l1: f64,
    pub l1_squared: f64,
}

const ERROR_DEGREE: usize = 8;
/// Leaves of the shock-aware subdivision are at most this large.
const LEAF_SIZE: f64 = 2e-3;

struct Chords {
    segs: Vec<[Point; 2]>,
    cell: f64,
    t0: f64,
    x0: f64,
    nt: usize,
    nx: usize,
    buckets: Vec<Vec<u32>>,
}

impl Chords {
    fn new(polylines: &[Vec<Point>], rect: crate::mesh::Rect, cell: f64) -> Self {
        let segs: Vec<[Point; 2]> = polylines.iter().flat_map(|p| p.windows(2).map(|w| [w[0], w[1]])).collect();
        let nt = (((rect.t1 - rect.t0) / cell).ceil() as usize).max(1);
        let nx = (((rect.x1 - rect.x0) / cell).ceil() as usize).max(1);
        let mut c = Self { segs, cell, t0: rect.t0, x0: rect.x0, nt, nx, buckets: vec![Vec::new(); nt * nx] };
        for (k, s) in c.segs.iter().enumerate() {
            let (i0, i1, j0, j1) = c.range(bbox(&[s[0], s[1]]));
            for i in i0..=i1 {
                for j in j0..=j1 {
                    c.buckets[i * nx + j].push(k as u32);
                }
            }
        }
        c
    }

    fn range(&self, b: [f64; 4]) -> (usize, usize, usize, usize) {
        let f = |v: f64, o: f64, n: usize| (((v - o) / self.cell).floor().max(0.0) as usize).min(n - 1);
        (f(b[0], self.t0, self.nt), f(b[1], self.t0, self.nt), f(b[2], self.x0, self.nx), f(b[3], self.x0, self.nx))
    }

    fn candidates(&self, tri: &[Point; 3]) -> Vec<u32> {
        let b = bbox(tri);
        let pad = 1e-12;
        let (i0, i1, j0, j1) = self.range([b[0] - pad, b[1] + pad, b[2] - pad, b[3] + pad]);
        let mut out = Vec::new();
        for i in i0..=i1 {
            for j in j0..=j1 {
                out.extend_from_slice(&self.buckets[i * self.nx + j]);
            }
        }
        out.sort_unstable();
        out.dedup();
        out.retain(|&k| segment_hits_triangle(&self.segs[k as usize], tri));
        out
    }
}

fn bbox(p: &[Point]) -> [f64; 4] {
    let mut b = [f64::INFINITY, f64::NEG_INFINITY, f64::INFINITY, f64::NEG_INFINITY];
    for q in p {
        b[0] = b[0].min(q[0]);
        b[1] = b[1].max(q[0]);
        b[2] = b[2].min(q[1]);
        b[3] = b[3].max(q[1]);
    }
    b
}

fn orient(a: Point, b: Point, c: Point) -> f64 {
    (b[0] - a[0]) * (c[1] - a[1]) - (b[1] - a[1]) * (c[0] - a[0])
}

fn segment_hits_triangle(s: &[Point; 2], tri: &[Point; 3]) -> bool {
    let sb = bbox(s);
    let tb = bbox(tri);
    if sb[1] < tb[0] || sb[0] > tb[1] || sb[3] < tb[2] || sb[2] > tb[3] {
        return false;
    }
    // separating axis test on the segment line and the triangle edges
    let d: Vec<f64> = tri.iter().map(|&p| orient(s[0], s[1], p)).collect();
    if d.iter().all(|&v| v > 0.0) || d.iter().all(|&v| v < 0.0) {
        return false;
    }
    let area = orient(tri[0], tri[1], tri[2]);
    for e in 0..3 {
        let (a, b) = (tri[e], tri[(e + 1) % 3]);
        let o0 = orient(a, b, s[0]) * area.signum();
        let o1 = orient(a, b, s[1]) * area.signum();
        if o0 < 0.0 && o1 < 0.0 {
            return false;
        }
    }
    true
}

/// Splits a convex polygon by the line through `a` and `b`.
fn clip(poly: &[Point], a: Point, b: Point) -> (Vec<Point>, Vec<Point>) {
    let mut left = Vec::new();
    let mut right = Vec::new();
    let n = poly.len();
    for i in 0..n {
        let p = poly[i];
        let q = poly[(i + 1) % n];
        let dp = orient(a, b, p);
        let dq = orient(a, b, q);
        if dp >= 0.0 {
            left.push(p);
        }
        if dp <= 0.0 {
            right.push(p);
        }
        if (dp > 0.0 && dq < 0.0) || (dp < 0.0 && dq > 0.0) {
            let s = dp / (dp - dq);
            let x = [p[0] + s * (q[0] - p[0]), p[1] + s * (q[1] - p[1])];
            left.push(x);
            right.push(x);
        }
    }
    (left, right)
}

fn polygon_area(poly: &[Point]) -> f64 {
    let mut a = 0.0;
    for i in 1..poly.len().saturating_sub(1) {
        a += 0.5 * orient(poly[0], poly[i], poly[i + 1]);
    }
    a.abs()
}

/// Error norms of `u` against `exact`, integrating by subdividing triangles
/// crossed by discontinuities and splitting the leaves along shock chords.
pub fn error_norms(u: &FeField, exact: &dyn Oracle) -> Result<ErrorNorms> {
    let mesh = u.space().mesh();
    let rule = QuadratureRule::new(ERROR_DEGREE)?;
    let polylines = exact.shock_polylines();
    let chords = Chords::new(&polylines, mesh.rect(), mesh.h().max(LEAF_SIZE));
    let parts: Vec<[f64; 2]> = {
        use rayon::prelude::*;
        (0..mesh.n_triangles())
            .into_par_iter()
            .with_min_len(256)
            .map(|k| {
                let geo = Geometry::new(mesh, k);
                let tri = mesh.triangle_points(k);
                let mut acc = [0.0; 2];
                let integrate_tri = |t: [Point; 3], acc: &mut [f64; 2]| {
                    let sub = Geometry::from_points(t);
                    for (&p, &w) in rule.points.iter().zip(&rule.weights) {
                        let x = sub.map(p);
                        let r = geo.inverse(x);
                        let e = u.eval_in(k, r) - exact.value(x);
                        acc[0] += w * sub.det * e * e;
                        acc[1] += w * sub.det * e.abs();
                    }
                };
                let cands = if polylines.is_empty() { Vec::new() } else { chords.candidates(&tri) };
                if cands.is_empty() {
                    integrate_tri(tri, &mut acc);
                } else {
                    subdivide(&tri, &cands, &chords, &mut |t| integrate_tri(t, &mut acc));
                }
                acc
            })
            .collect()
    };
    let (mut l2, mut l1) = (0.0, 0.0);
    for p in parts {
        l2 += p[0];
        l1 += p[1];
    }
    Ok(ErrorNorms { l2_squared: l2, l1, l1_squared: l1 * l1 })
}

fn subdivide(tri: &[Point; 3], cands: &[u32], chords: &Chords, visit: &mut dyn FnMut([Point; 3])) {
    let hits: Vec<u32> =
        cands.iter().copied().filter(|&k| segment_hits_triangle(&chords.segs[k as usize], tri)).collect();
    if hits.is_empty() {
        visit(*tri);
        return;
    }
    let b = bbox(tri);
    if (b[1] - b[0]).max(b[3] - b[2]) > LEAF_SIZE {
        let m = |a: Point, c: Point| [0.5 * (a[0] + c[0]), 0.5 * (a[1] + c[1])];
        let (m01, m12, m20) = (m(tri[0], tri[1]), m(tri[1], tri[2]), m(tri[2], tri[0]));
        for child in [[tri[0], m01, m20], [m01, tri[1], m12], [m20, m12, tri[2]], [m01, m12, m20]] {
            subdivide(&child, &hits, chords, visit);
        }
        return;
    }
    // leaf: cut along the lines of the crossing chords
    let mut pieces = vec![tri.to_vec()];
    for &k in &hits {
        let s = chords.segs[k as usize];
        let mut next = Vec::new();
        for p in pieces {
            let (l, r) = clip(&p, s[0], s[1]);
            for q in [l, r] {
                if q.len() >= 3 && polygon_area(&q) > 0.0 {
                    next.push(q);
                }
            }
        }
        pieces = next;
    }
    for p in pieces {
        for i in 1..p.len() - 1 {
            visit([p[0], p[i], p[i + 1]]);
        }
    }
}

/// One row of a convergence table.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct TableRow {
    pub level: usize,
    pub h: f64,
    pub l2sq: f64,
    pub l2sq_rate: Option<f64>,
    pub l1sq: f64,
    pub l1sq_rate: Option<f64>,
    pub m_h: f64,
    /// `M^h - M^{h/2}`; absent on the finest level.
    pub dm_h: Option<f64>,
    pub iters: usize,
}

#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
pub struct ConvergenceTable {
    pub rows: Vec<TableRow>,
}

fn rate(prev: f64, cur: f64) -> Option<f64> {
    (prev > 0.0 && cur > 0.0).then(|| (prev / cur).log2())
}

impl ConvergenceTable {
    /// Builds the table from per-level reports and their error norms.
    pub fn new(reports: &[SolveReport], errors: &[ErrorNorms]) -> Result<Self> {
        if reports.len() != errors.len() {
            return Err(Error::Dimension { expected: reports.len(), got: errors.len() });
        }
        let mut rows: Vec<TableRow> = Vec::with_capacity(reports.len());
        for (i, (r, e)) in reports.iter().zip(errors).enumerate() {
            let prev = i.checked_sub(1).map(|j| &rows[j]);
            rows.push(TableRow {
                level: r.level,
                h: r.h,
                l2sq: e.l2_squared,
                l2sq_rate: prev.and_then(|p| rate(p.l2sq, e.l2_squared)),
                l1sq: e.l1_squared,
                l1sq_rate: prev.and_then(|p| rate(p.l1sq, e.l1_squared)),
                m_h: r.m_h,
                dm_h: reports.get(i + 1).map(|n| r.m_h - n.m_h),
                iters: r.iterations,
            });
        }
        Ok(Self { rows })
    }

    /// `log2` rates of `M^h - M^{h/2}` between consecutive levels.
    pub fn dm_rates(&self) -> Vec<Option<f64>> {
        self.rows
            .windows(2)
            .map(|w| match (w[0].dm_h, w[1].dm_h) {
                (Some(a), Some(b)) => rate(a, b),
                _ => None,
            })
            .collect()
    }

    pub fn to_csv(&self) -> String {
        let opt = |v: Option<f64>| v.map_or(String::new(), |x| format!("{x:.6}"));
        let mut s = String::from("level,h,l2sq,l2sq_rate,l1sq,l1sq_rate,Mh,dMh,iters\n");
        for r in &self.rows {
            let _ = writeln!(
                s,
                "{},{:.10e},{:.10e},{},{:.10e},{},{:.14e},{},{}",
                r.level,
                r.h,
                r.l2sq,
                opt(r.l2sq_rate),
                r.l1sq,
                opt(r.l1sq_rate),
                r.m_h,
                r.dm_h.map_or(String::new(), |x| format!("{x:.10e}")),
                r.iters
            );
        }
        s
    }
}

/// Shock fronts of `u` along the time row `t`, as `(position, drop)`.
///
/// The field is sampled at spacing `dx`. Each local maximum of `-du/dx` above
/// `min_slope` marks a front. Its window extends while the slope stays above
/// `floor`, but never past the slope minimum between it and a neighbouring
/// front. The front is placed where a sharp jump between the window end values
/// would enclose the same area as the samples.
pub fn fronts(u: &FeField, t: f64, dx: f64, min_slope: f64, floor: f64) -> Vec<(f64, f64)> {
    let rect = u.space().mesh().rect();
    let n = ((rect.x1 - rect.x0) / dx).round() as usize;
    if n < 3 {
        return Vec::new();
    }
    let xs = |j: usize| rect.x0 + j as f64 * dx;
    let v: Vec<f64> = (0..=n).map(|j| u.eval([t, xs(j)]).unwrap_or(f64::NAN)).collect();
    let s: Vec<f64> = v.windows(2).map(|w| (w[0] - w[1]) / dx).collect();
    let peaks: Vec<usize> = (1..n - 1).filter(|&j| s[j] >= min_slope && s[j] > s[j - 1] && s[j] >= s[j + 1]).collect();
    let valley = |a: usize, b: usize| (a..b).min_by(|&i, &j| s[i].total_cmp(&s[j])).unwrap_or(a);
    let mut out = Vec::with_capacity(peaks.len());
    for (k, &p) in peaks.iter().enumerate() {
        let lo = if k > 0 { valley(peaks[k - 1], p) + 1 } else { 0 };
        let hi = if k + 1 < peaks.len() { valley(p, peaks[k + 1]) } else { n - 1 };
        let (mut a, mut b) = (p, p);
        while a > lo && s[a - 1] > floor {
            a -= 1;
        }
        while b < hi && s[b + 1] > floor {
            b += 1;
        }
        let (ua, ub) = (v[a], v[b + 1]);
        let area: f64 = (a..=b).map(|j| 0.5 * (v[j] + v[j + 1]) * dx).sum();
        let len = xs(b + 1) - xs(a);
        out.push((xs(a) + (area - ub * len) / (ua - ub), ua - ub));
    }
    out
}

/// Least-squares polynomial fit `x = sum c_k t^k`.
pub fn polyfit(pts: &[(f64, f64)], degree: usize) -> Option<Vec<f64>> {
    let m = degree + 1;
    if pts.len() < m {
        return None;
    }
    let mut a = vec![vec![0.0; m + 1]; m];
    for &(t, x) in pts {
        let pw: Vec<f64> = (0..m).map(|k| t.powi(k as i32)).collect();
        for i in 0..m {
            for j in 0..m {
                a[i][j] += pw[i] * pw[j];
            }
            a[i][m] += pw[i] * x;
        }
    }
    for c in 0..m {
        let piv = (c..m).max_by(|&i, &j| a[i][c].abs().total_cmp(&a[j][c].abs()))?;
        a.swap(c, piv);
        if a[c][c].abs() < 1e-300 {
            return None;
        }
        for r in 0..m {
            if r != c {
                let f = a[r][c] / a[c][c];
                for k in c..=m {
                    a[r][k] -= f * a[c][k];
                }
            }
        }
    }
    Some((0..m).map(|i| a[i][m] / a[i][i]).collect())
}

pub fn polyval(c: &[f64], t: f64) -> f64 {
    c.iter().rev().fold(0.0, |acc, &v| acc * t + v)
}

/// Shock tracks read off a computed solution.
#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
pub struct ShockTracks {
    /// Time rows with two fronts: `(t, left, right)`.
    pub pairs: Vec<(f64, f64, f64)>,
    /// Time rows with a single front: `(t, x)`.
    pub singles: Vec<(f64, f64)>,
}

/// Smallest peak of `-du/dx` taken as a front.
pub const FRONT_SLOPE: f64 = 3.0;
/// Slope below which a front window ends.
pub const FRONT_FLOOR: f64 = 0.5;

/// Runs [`fronts`] on every interior grid row of the mesh.
pub fn shock_tracks(u: &FeField, min_slope: f64, floor: f64) -> ShockTracks {
    let mesh = u.space().mesh();
    let rect = mesh.rect();
    let h = mesh.h();
    let (nt, _) = mesh.cells();
    let dx = h / u.space().order() as f64;
    let mut tracks = ShockTracks::default();
    for i in 1..nt {
        let t = rect.t0 + i as f64 * h;
        let f = fronts(u, t, dx, min_slope, floor);
        match f.len() {
            1 => tracks.singles.push((t, f[0].0)),
            2 => tracks.pairs.push((t, f[0].0, f[1].0)),
            _ => {}
        }
    }
    tracks
}

/// Collision point of two shocks in a computed solution. Quadratics in `t` are
/// fitted to the left and right fronts of the two-front rows before the first
/// single-front row and intersected.
pub fn estimate_collision(u: &FeField) -> Option<Point> {
    let tracks = shock_tracks(u, FRONT_SLOPE, FRONT_FLOOR);
    let t_first = tracks.pairs.first()?.0;
    let merged = tracks.singles.iter().map(|s| s.0).filter(|&t| t > t_first).fold(f64::INFINITY, f64::min);
    let pairs: Vec<(f64, f64, f64)> = tracks.pairs.into_iter().filter(|p| p.0 < merged).collect();
    if pairs.len() < 4 {
        return None;
    }
    let left: Vec<(f64, f64)> = pairs.iter().map(|p| (p.0, p.1)).collect();
    let right: Vec<(f64, f64)> = pairs.iter().map(|p| (p.0, p.2)).collect();
    let cl = polyfit(&left, 2)?;
    let cr = polyfit(&right, 2)?;
    let gap_at = |t: f64| polyval(&cr, t) - polyval(&cl, t);
    let rect = u.space().mesh().rect();
    let step = u.space().mesh().h();
    let mut lo = pairs.iter().map(|p| p.0).fold(f64::NEG_INFINITY, f64::max);
    if gap_at(lo) <= 0.0 {
        return None;
    }
    let mut hi = lo;
    while gap_at(hi) > 0.0 {
        lo = hi;
        hi += step;
        if hi > rect.t1 {
            return None;
        }
    }
    for _ in 0..100 {
        let mid = 0.5 * (lo + hi);
        if gap_at(mid) > 0.0 {
            lo = mid;
        } else {
            hi = mid;
        }
    }
    let t = 0.5 * (lo + hi);
    Some([t, 0.5 * (polyval(&cl, t) + polyval(&cr, t))])
}
