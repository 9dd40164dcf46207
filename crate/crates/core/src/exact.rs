//! Reference solutions for the Burgers examples.
//!
//! The source is `r = 1` for `x <= 0` and `r = 2` for `x > 0`, so characteristics
//! are parabolas within each half-plane. Every smooth region of the solution
//! is one of a few closed-form states; shocks between them follow the
//! Rankine-Hugoniot ODE `s' = (u_L + u_R) / 2`, integrated with an adaptive
//! Dormand-Prince pair and stored as a cubic Hermite spline.

use crate::error::{Error, Result};
use crate::mesh::{Point, Rect};
use crate::problem::{burgers_rect, manufactured_solution};

const R_LEFT: f64 = 1.0;
const R_RIGHT: f64 = 2.0;
const MAX_STEP: f64 = 2e-3;

/// Anything that can serve as the exact solution in error computations.
pub trait Oracle: Send + Sync {
    fn value(&self, p: Point) -> f64;

    /// Discontinuity curves as `(t, x)` polylines.
    fn shock_polylines(&self) -> Vec<Vec<Point>> {
        Vec::new()
    }
}

/// Smooth closed-form solution.
pub struct SmoothSolution(pub fn(Point) -> f64);

impl Oracle for SmoothSolution {
    fn value(&self, p: Point) -> f64 {
        (self.0)(p)
    }
}

pub fn manufactured_oracle() -> SmoothSolution {
    SmoothSolution(manufactured_solution)
}

/// Closed-form solution states.
#[derive(Clone, Copy, Debug, PartialEq)]
pub enum State {
    /// `x <= 0`, characteristics that never left the left half-plane: `u = a + t`.
    Left { a: f64 },
    /// `x > 0`, characteristics that entered through `x = 0` from a left state `a`.
    Crossed { a: f64 },
    /// Rarefaction centred at the origin.
    Fan,
    /// `x > 0`, characteristics from constant initial data `u0`.
    Plateau { u0: f64 },
}

impl State {
    pub fn value(&self, t: f64, x: f64) -> f64 {
        match *self {
            State::Left { a } => a + R_LEFT * t,
            State::Crossed { a } => {
                // time since crossing sigma solves c2 sigma^2 + b sigma = x
                let b = a + R_LEFT * t;
                let c2 = 0.5 * R_RIGHT - R_LEFT;
                let x = x.max(0.0);
                let sigma = 2.0 * x / (b + (b * b + 4.0 * c2 * x).sqrt());
                b + (R_RIGHT - R_LEFT) * sigma
            }
            State::Fan => {
                if t <= 0.0 {
                    0.0
                } else {
                    x / t + 0.5 * R_RIGHT * t
                }
            }
            State::Plateau { u0 } => u0 + R_RIGHT * t,
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq)]
enum Interface {
    Line(f64),
    /// Characteristic that crosses `x = 0` at `t = 0` from left state `a`.
    CrossEdge {
        a: f64,
    },
    /// Characteristic leaving the origin with speed `c`.
    FanEdge {
        c: f64,
    },
    Shock(usize),
}

#[derive(Clone, Debug)]
struct Phase {
    t1: f64,
    states: Vec<State>,
    interfaces: Vec<Interface>,
}

/// Shock curve `x = s(t)` stored as Hermite knots `(t, s, s')`.
#[derive(Clone, Debug)]
pub struct ShockPath {
    pub id: usize,
    pub left: State,
    pub right: State,
    knots: Vec<[f64; 3]>,
    exited: bool,
}

impl ShockPath {
    pub fn t_start(&self) -> f64 {
        self.knots[0][0]
    }

    pub fn t_end(&self) -> f64 {
        self.knots[self.knots.len() - 1][0]
    }

    /// Whether the path ends by leaving the domain.
    pub fn exited(&self) -> bool {
        self.exited
    }

    pub fn end_point(&self) -> Point {
        let k = self.knots[self.knots.len() - 1];
        [k[0], k[1]]
    }

    fn segment(&self, t: f64) -> usize {
        let i = self.knots.partition_point(|k| k[0] <= t);
        i.clamp(1, self.knots.len() - 1) - 1
    }

    fn hermite(&self, t: f64) -> (f64, f64) {
        let i = self.segment(t);
        let (a, b) = (self.knots[i], self.knots[i + 1]);
        let dt = b[0] - a[0];
        let s = (t - a[0]) / dt;
        let (s2, s3) = (s * s, s * s * s);
        let h00 = 2.0 * s3 - 3.0 * s2 + 1.0;
        let h10 = s3 - 2.0 * s2 + s;
        let h01 = -2.0 * s3 + 3.0 * s2;
        let h11 = s3 - s2;
        let pos = h00 * a[1] + h10 * dt * a[2] + h01 * b[1] + h11 * dt * b[2];
        let d00 = (6.0 * s2 - 6.0 * s) / dt;
        let d10 = 3.0 * s2 - 4.0 * s + 1.0;
        let d01 = (-6.0 * s2 + 6.0 * s) / dt;
        let d11 = 3.0 * s2 - 2.0 * s;
        let vel = d00 * a[1] + d10 * a[2] + d01 * b[1] + d11 * b[2];
        (pos, vel)
    }

    /// Shock position; `t` is clamped to the path's time range.
    pub fn position(&self, t: f64) -> f64 {
        self.hermite(t.clamp(self.t_start(), self.t_end())).0
    }

    pub fn speed(&self, t: f64) -> f64 {
        self.hermite(t.clamp(self.t_start(), self.t_end())).1
    }

    /// Rankine-Hugoniot speed from the adjacent states at the current position.
    pub fn rh_speed(&self, t: f64) -> f64 {
        let s = self.position(t);
        0.5 * (self.left.value(t, s) + self.right.value(t, s))
    }

    /// Polyline through the path with time spacing at most `max_dt`.
    pub fn polyline(&self, max_dt: f64) -> Vec<Point> {
        let mut pts = Vec::new();
        for w in self.knots.windows(2) {
            let n = ((w[1][0] - w[0][0]) / max_dt).ceil().max(1.0) as usize;
            for k in 0..n {
                let t = w[0][0] + (w[1][0] - w[0][0]) * k as f64 / n as f64;
                pts.push([t, self.hermite(t).0]);
            }
        }
        pts.push(self.end_point());
        pts
    }

    fn truncate(&mut self, t: f64) {
        let (s, v) = self.hermite(t);
        self.knots.retain(|k| k[0] < t);
        self.knots.push([t, s, v]);
        self.exited = false;
    }
}

/// Semi-analytic solution of one of the Burgers examples.
#[derive(Clone, Debug)]
pub struct ExactSolution {
    example: usize,
    tol: f64,
    rect: Rect,
    phases: Vec<Phase>,
    shocks: Vec<ShockPath>,
    collision: Option<Point>,
}

impl ExactSolution {
    pub fn new(example: usize) -> Result<Self> {
        Self::with_tol(example, 1e-10)
    }

    /// Builds the oracle with ODE tolerance `tol`.
    pub fn with_tol(example: usize, tol: f64) -> Result<Self> {
        let rect = burgers_rect();
        let (t_end, x_max) = (rect.t1, rect.x1);
        let one_shock = |a: f64, u0: f64| -> (Vec<Phase>, Vec<ShockPath>) {
            let left = State::Crossed { a };
            let right = State::Plateau { u0 };
            let s = integrate_shock(0, left, right, 0.0, 0.0, t_end, x_max, tol);
            let phase = Phase {
                t1: t_end,
                states: vec![State::Left { a }, left, right],
                interfaces: vec![Interface::Line(0.0), Interface::Shock(0)],
            };
            (vec![phase], vec![s])
        };
        let (phases, shocks, collision) = match example {
            1 => {
                let (p, s) = one_shock(3.0, 1.0);
                (p, s, None)
            }
            2 => {
                let phase = Phase {
                    t1: t_end,
                    states: vec![
                        State::Left { a: 1.0 },
                        State::Crossed { a: 1.0 },
                        State::Fan,
                        State::Plateau { u0: 2.0 },
                    ],
                    interfaces: vec![
                        Interface::Line(0.0),
                        Interface::CrossEdge { a: 1.0 },
                        Interface::FanEdge { c: 2.0 },
                    ],
                };
                (vec![phase], Vec::new(), None)
            }
            3 => {
                let crossed = State::Crossed { a: 3.0 };
                let mid = State::Plateau { u0: 1.0 };
                let right = State::Plateau { u0: 0.5 };
                let mut s1 = integrate_shock(0, crossed, mid, 0.0, 0.0, t_end, x_max, tol);
                let mut s2 = integrate_shock(1, mid, right, 0.0, 0.5, t_end, x_max, tol);
                let tc = first_crossing(&s1, &s2)
                    .ok_or_else(|| Error::Solver("shocks of example 3 do not collide".into()))?;
                s1.truncate(tc);
                s2.truncate(tc);
                let xc = s1.position(tc);
                let s3 = integrate_shock(2, crossed, right, tc, xc, t_end, x_max, tol);
                let before = Phase {
                    t1: tc,
                    states: vec![State::Left { a: 3.0 }, crossed, mid, right],
                    interfaces: vec![Interface::Line(0.0), Interface::Shock(0), Interface::Shock(1)],
                };
                let after = Phase {
                    t1: t_end,
                    states: vec![State::Left { a: 3.0 }, crossed, right],
                    interfaces: vec![Interface::Line(0.0), Interface::Shock(2)],
                };
                (vec![before, after], vec![s1, s2, s3], Some([tc, xc]))
            }
            k => return Err(Error::UnknownExample(k)),
        };
        Ok(Self { example, tol, rect, phases, shocks, collision })
    }

    pub fn example(&self) -> usize {
        self.example
    }

    pub fn tol(&self) -> f64 {
        self.tol
    }

    pub fn shocks(&self) -> &[ShockPath] {
        &self.shocks
    }

    /// Point where two shocks merge, if any.
    pub fn collision(&self) -> Option<Point> {
        self.collision
    }

    /// Points where shocks leave through the boundary.
    pub fn exits(&self) -> Vec<Point> {
        self.shocks.iter().filter(|s| s.exited()).map(|s| s.end_point()).collect()
    }

    fn interface_pos(&self, iface: Interface, t: f64) -> f64 {
        match iface {
            Interface::Line(x) => x,
            Interface::CrossEdge { a } => (a + R_LEFT * t) * t + (0.5 * R_RIGHT - R_LEFT) * t * t,
            Interface::FanEdge { c } => c * t + 0.5 * R_RIGHT * t * t,
            Interface::Shock(id) => {
                let s = &self.shocks[id];
                if s.exited() && t > s.t_end() {
                    f64::INFINITY
                } else {
                    s.position(t)
                }
            }
        }
    }

    /// Which state holds at `p`.
    pub fn state_at(&self, p: Point) -> State {
        let [t, x] = p;
        let phase = self.phases.iter().find(|ph| t <= ph.t1).unwrap_or(&self.phases[self.phases.len() - 1]);
        let zone =
            phase.interfaces.iter().position(|&i| x <= self.interface_pos(i, t)).unwrap_or(phase.interfaces.len());
        phase.states[zone]
    }

    pub fn try_value(&self, p: Point) -> Result<f64> {
        if !self.rect.contains(p, 1e-12) {
            return Err(Error::OutsideDomain(p[0], p[1]));
        }
        Ok(self.eval(p))
    }

    fn eval(&self, p: Point) -> f64 {
        self.state_at(p).value(p[0], p[1])
    }
}

impl Oracle for ExactSolution {
    fn value(&self, p: Point) -> f64 {
        self.eval(p)
    }

    fn shock_polylines(&self) -> Vec<Vec<Point>> {
        self.shocks.iter().map(|s| s.polyline(5e-4)).collect()
    }
}

/// Dormand-Prince 5(4) integration of the Rankine-Hugoniot ODE from `(t0, s0)`
/// until `t_end` or until the shock reaches `x_max`.
#[allow(clippy::too_many_arguments)]
fn integrate_shock(
    id: usize,
    left: State,
    right: State,
    t0: f64,
    s0: f64,
    t_end: f64,
    x_max: f64,
    tol: f64,
) -> ShockPath {
    let rhs = |t: f64, s: f64| 0.5 * (left.value(t, s) + right.value(t, s));
    const C: [f64; 7] = [0.0, 1.0 / 5.0, 3.0 / 10.0, 4.0 / 5.0, 8.0 / 9.0, 1.0, 1.0];
    const A: [[f64; 6]; 7] = [
        [0.0; 6],
        [1.0 / 5.0, 0.0, 0.0, 0.0, 0.0, 0.0],
        [3.0 / 40.0, 9.0 / 40.0, 0.0, 0.0, 0.0, 0.0],
        [44.0 / 45.0, -56.0 / 15.0, 32.0 / 9.0, 0.0, 0.0, 0.0],
        [19372.0 / 6561.0, -25360.0 / 2187.0, 64448.0 / 6561.0, -212.0 / 729.0, 0.0, 0.0],
        [9017.0 / 3168.0, -355.0 / 33.0, 46732.0 / 5247.0, 49.0 / 176.0, -5103.0 / 18656.0, 0.0],
        [35.0 / 384.0, 0.0, 500.0 / 1113.0, 125.0 / 192.0, -2187.0 / 6784.0, 11.0 / 84.0],
    ];
    const B5: [f64; 7] = [35.0 / 384.0, 0.0, 500.0 / 1113.0, 125.0 / 192.0, -2187.0 / 6784.0, 11.0 / 84.0, 0.0];
    const B4: [f64; 7] =
        [5179.0 / 57600.0, 0.0, 7571.0 / 16695.0, 393.0 / 640.0, -92097.0 / 339200.0, 187.0 / 2100.0, 1.0 / 40.0];

    let mut t = t0;
    let mut s = s0;
    let mut f = rhs(t, s);
    let mut knots = vec![[t, s, f]];
    let mut dt = (1e-3f64).min(t_end - t0);
    let mut exited = false;
    while t < t_end {
        dt = dt.min(t_end - t).min(MAX_STEP);
        let mut k = [0.0; 7];
        k[0] = f;
        for i in 1..7 {
            let mut y = s;
            for j in 0..i {
                y += dt * A[i][j] * k[j];
            }
            k[i] = rhs(t + C[i] * dt, y);
        }
        let y5 = s + dt * B5.iter().zip(&k).map(|(b, k)| b * k).sum::<f64>();
        let y4 = s + dt * B4.iter().zip(&k).map(|(b, k)| b * k).sum::<f64>();
        let err = (y5 - y4).abs();
        let scale = tol * (1.0 + s.abs());
        if err <= scale {
            t += dt;
            s = y5;
            f = k[6];
            knots.push([t, s, f]);
            if s >= x_max {
                exited = true;
                break;
            }
        }
        let fac = if err == 0.0 { 5.0 } else { (0.9 * (scale / err).powf(0.2)).clamp(0.2, 5.0) };
        dt *= fac;
    }
    let mut path = ShockPath { id, left, right, knots, exited };
    if exited {
        let n = path.knots.len();
        let (mut lo, mut hi) = (path.knots[n - 2][0], path.knots[n - 1][0]);
        for _ in 0..100 {
            let mid = 0.5 * (lo + hi);
            if path.hermite(mid).0 < x_max {
                lo = mid;
            } else {
                hi = mid;
            }
        }
        let te = 0.5 * (lo + hi);
        let v = path.hermite(te).1;
        path.knots.retain(|k| k[0] < te);
        path.knots.push([te, x_max, v]);
        path.exited = true;
    }
    path
}

/// First time at which path `a` catches up with path `b` (`a` starts left of `b`).
fn first_crossing(a: &ShockPath, b: &ShockPath) -> Option<f64> {
    let t0 = a.t_start().max(b.t_start());
    let t1 = a.t_end().min(b.t_end());
    let gap = |t: f64| b.position(t) - a.position(t);
    let mut times: Vec<f64> = a.knots.iter().chain(&b.knots).map(|k| k[0]).filter(|&t| t > t0 && t <= t1).collect();
    times.sort_by(f64::total_cmp);
    let mut prev = t0;
    for t in times {
        if gap(t) <= 0.0 {
            let (mut lo, mut hi) = (prev, t);
            for _ in 0..200 {
                let mid = 0.5 * (lo + hi);
                if gap(mid) > 0.0 {
                    lo = mid;
                } else {
                    hi = mid;
                }
            }
            return Some(0.5 * (lo + hi));
        }
        prev = t;
    }
    None
}
