//! Fluxes, data, and the Burgers test problems.

use std::f64::consts::PI;
use std::fmt;
use std::sync::Arc;

use crate::error::{Error, Result};
use crate::mesh::{BoundarySplit, Mesh, Point, Rect, Segment};
use crate::quadrature::gauss_legendre;

/// Flux functions `f : R -> R^2` in `(t, x)` order.
#[derive(Clone, Copy, Debug, PartialEq)]
pub enum Flux {
    /// `f(v) = [v, v^2 / 2]`
    Burgers,
    /// `f(v) = [v, a v]`
    Linear { a: f64 },
}

impl Flux {
    #[inline]
    pub fn f(&self, v: f64) -> [f64; 2] {
        match *self {
            Flux::Burgers => burgers_flux(v),
            Flux::Linear { a } => [v, a * v],
        }
    }

    #[inline]
    pub fn df(&self, v: f64) -> [f64; 2] {
        match *self {
            Flux::Burgers => burgers_flux_deriv(v),
            Flux::Linear { a } => [1.0, a],
        }
    }

    /// Polynomial degree of `f` in `v`.
    pub fn degree(&self) -> usize {
        match self {
            Flux::Burgers => 2,
            Flux::Linear { .. } => 1,
        }
    }
}

#[inline]
pub fn burgers_flux(v: f64) -> [f64; 2] {
    [v, 0.5 * v * v]
}

#[inline]
pub fn burgers_flux_deriv(v: f64) -> [f64; 2] {
    [1.0, v]
}

pub type ScalarFn = Arc<dyn Fn(Point) -> f64 + Send + Sync>;

/// A balance law `div f(u) = r` on a rectangle with inflow data `g`.
#[derive(Clone)]
pub struct ProblemSpec {
    pub name: String,
    pub flux: Flux,
    pub rect: Rect,
    pub split: BoundarySplit,
    pub source: ScalarFn,
    /// Lines `x = c` across which the source jumps.
    pub source_jumps: Vec<f64>,
    pub inflow: ScalarFn,
    /// Boundary points where `g` jumps.
    pub inflow_jumps: Vec<Point>,
}

impl fmt::Debug for ProblemSpec {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_struct("ProblemSpec")
            .field("name", &self.name)
            .field("flux", &self.flux)
            .field("rect", &self.rect)
            .field("split", &self.split)
            .field("source_jumps", &self.source_jumps)
            .field("inflow_jumps", &self.inflow_jumps)
            .finish()
    }
}

impl ProblemSpec {
    pub fn new(
        name: impl Into<String>,
        flux: Flux,
        rect: Rect,
        split: BoundarySplit,
        source: impl Fn(Point) -> f64 + Send + Sync + 'static,
        inflow: impl Fn(Point) -> f64 + Send + Sync + 'static,
    ) -> Self {
        Self {
            name: name.into(),
            flux,
            rect,
            split,
            source: Arc::new(source),
            source_jumps: Vec::new(),
            inflow: Arc::new(inflow),
            inflow_jumps: Vec::new(),
        }
    }

    pub fn with_source_jumps(mut self, xs: Vec<f64>) -> Self {
        self.source_jumps = xs;
        self
    }

    pub fn with_inflow_jumps(mut self, pts: Vec<Point>) -> Self {
        self.inflow_jumps = pts;
        self
    }

    #[inline]
    pub fn r(&self, p: Point) -> f64 {
        (self.source)(p)
    }

    #[inline]
    pub fn g(&self, p: Point) -> f64 {
        (self.inflow)(p)
    }

    /// Checks that every source jump line is a grid line of `mesh`.
    pub fn check_mesh(&self, mesh: &Mesh) -> Result<()> {
        let h = mesh.h();
        for &x in &self.source_jumps {
            let k = (x - self.rect.x0) / h;
            if (k - k.round()).abs() > 1e-9 {
                return Err(Error::SourceJump(x));
            }
        }
        Ok(())
    }

    /// Mean of `g` over the inflow boundary.
    pub fn inflow_mean(&self) -> f64 {
        let (gx, gw) = gauss_legendre(8);
        let mut total = 0.0;
        let mut length = 0.0;
        for seg in &self.split.inflow {
            for (a, b) in split_segment(seg, &self.inflow_jumps) {
                let len = crate::mesh::dist(a, b);
                length += len;
                for (s, w) in gx.iter().zip(&gw) {
                    let p = [a[0] + s * (b[0] - a[0]), a[1] + s * (b[1] - a[1])];
                    total += len * w * self.g(p);
                }
            }
        }
        total / length
    }
}

/// Splits a segment at the given points that lie strictly inside it.
pub fn split_segment(seg: &Segment, cuts: &[Point]) -> Vec<(Point, Point)> {
    let (a, b) = (seg.a, seg.b);
    let len2 = (b[0] - a[0]).powi(2) + (b[1] - a[1]).powi(2);
    let mut params: Vec<f64> = cuts
        .iter()
        .filter_map(|c| {
            let s = ((c[0] - a[0]) * (b[0] - a[0]) + (c[1] - a[1]) * (b[1] - a[1])) / len2;
            let q = [a[0] + s * (b[0] - a[0]), a[1] + s * (b[1] - a[1])];
            let off = crate::mesh::dist(q, *c);
            (s > 1e-12 && s < 1.0 - 1e-12 && off < 1e-12 * len2.sqrt().max(1.0)).then_some(s)
        })
        .collect();
    params.sort_by(f64::total_cmp);
    let mut out = Vec::with_capacity(params.len() + 1);
    let mut prev = 0.0;
    for s in params.into_iter().chain([1.0]) {
        let p0 = [a[0] + prev * (b[0] - a[0]), a[1] + prev * (b[1] - a[1])];
        let p1 = [a[0] + s * (b[0] - a[0]), a[1] + s * (b[1] - a[1])];
        out.push((p0, p1));
        prev = s;
    }
    out
}

/// Domain shared by the Burgers examples.
pub fn burgers_rect() -> Rect {
    Rect::new(0.0, 1.0, -0.25, 1.75)
}

/// Inflow boundary `{t = 0} u {x = -0.25}`.
pub fn burgers_split() -> BoundarySplit {
    BoundarySplit::new(vec![Segment::new([0.0, -0.25], [0.0, 1.75]), Segment::new([0.0, -0.25], [1.0, -0.25])])
}

fn burgers_source(p: Point) -> f64 {
    if p[1] <= 0.0 {
        1.0
    } else {
        2.0
    }
}

fn on_left_side(p: Point) -> bool {
    (p[1] + 0.25).abs() <= 1e-12
}

/// Burgers example `k` (1: single shock, 2: rarefaction, 3: colliding shocks).
pub fn example_spec(k: usize) -> Result<ProblemSpec> {
    let base = |name: &str, g: fn(Point) -> f64| {
        ProblemSpec::new(name, Flux::Burgers, burgers_rect(), burgers_split(), burgers_source, g)
            .with_source_jumps(vec![0.0])
    };
    match k {
        1 => Ok(base("example1", |p| {
            if on_left_side(p) {
                p[0] + 3.0
            } else if p[1] <= 0.0 {
                3.0
            } else {
                1.0
            }
        })
        .with_inflow_jumps(vec![[0.0, 0.0]])),
        2 => Ok(base("example2", |p| {
            if on_left_side(p) {
                p[0] + 1.0
            } else if p[1] <= 0.0 {
                1.0
            } else {
                2.0
            }
        })
        .with_inflow_jumps(vec![[0.0, 0.0]])),
        3 => Ok(base("example3", |p| {
            if on_left_side(p) {
                p[0] + 3.0
            } else if p[1] <= 0.0 {
                3.0
            } else if p[1] <= 0.5 {
                1.0
            } else {
                0.5
            }
        })
        .with_inflow_jumps(vec![[0.0, 0.0], [0.0, 0.5]])),
        k => Err(Error::UnknownExample(k)),
    }
}

/// Smooth solution used by the manufactured problem.
pub fn manufactured_solution(p: Point) -> f64 {
    2.5 + 0.25 * (PI * p[0]).sin() * (PI * p[1]).cos()
}

/// Burgers problem whose exact solution is [`manufactured_solution`].
pub fn manufactured_spec() -> ProblemSpec {
    let source = |p: Point| {
        let u = manufactured_solution(p);
        let ut = 0.25 * PI * (PI * p[0]).cos() * (PI * p[1]).cos();
        let ux = -0.25 * PI * (PI * p[0]).sin() * (PI * p[1]).sin();
        ut + u * ux
    };
    ProblemSpec::new("manufactured", Flux::Burgers, burgers_rect(), burgers_split(), source, manufactured_solution)
}
