//! Damped Gauss-Newton iteration and nested iteration over refinements.

use std::sync::Arc;
use std::time::Instant;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::forms::{assemble_gn, assemble_ld, eval_fhat, gn_pattern, FormOptions, Spaces, Triple};
use crate::linalg::{cg_solve, dot, nested_dissection, norm, Cholesky, CsrMatrix, Ordering};
use crate::mesh::Mesh;
use crate::problem::ProblemSpec;

/// How the Gauss-Newton systems are solved.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub enum LinearSolver {
    /// Sparse Cholesky, nested-dissection ordering.
    Direct,
    /// Jacobi-preconditioned conjugate gradients.
    Cg { tol: f64, max_iters: usize },
    /// Cholesky when the factor fits in `factor_budget_bytes`, else CG.
    Auto { factor_budget_bytes: usize },
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct GnOptions {
    pub rel_tol: f64,
    pub max_iters: usize,
    pub max_backtracks: usize,
    pub shrink: f64,
    pub augment: bool,
    /// Regularization `eps = h^eta`; `None` disables it.
    pub eta: Option<f64>,
    /// Stop when `|update| <= step_tol |x|`.
    pub step_tol: f64,
    pub solver: LinearSolver,
}

impl Default for GnOptions {
    fn default() -> Self {
        Self {
            rel_tol: 1e-8,
            max_iters: 50,
            max_backtracks: 30,
            shrink: 0.5,
            augment: true,
            eta: None,
            step_tol: 1e-12,
            solver: LinearSolver::Auto { factor_budget_bytes: 3 << 30 },
        }
    }
}

impl GnOptions {
    pub fn validate(&self) -> Result<()> {
        if !(self.rel_tol > 0.0) {
            return Err(Error::Config(format!("rel_tol must be positive, got {}", self.rel_tol)));
        }
        if !(self.shrink > 0.0 && self.shrink < 1.0) {
            return Err(Error::Config(format!("shrink factor must lie in (0, 1), got {}", self.shrink)));
        }
        if let Some(eta) = self.eta {
            if !eta.is_finite() {
                return Err(Error::Config(format!("eta must be finite, got {eta}")));
            }
        }
        Ok(())
    }

    pub fn eps(&self, h: f64) -> f64 {
        self.eta.map_or(0.0, |eta| h.powf(eta))
    }
}

/// One accepted (or final rejected) Gauss-Newton step.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct IterationLog {
    pub iter: usize,
    /// Functional value after the step.
    pub functional: f64,
    pub damping: f64,
    pub backtracks: usize,
    /// `|A d - b| / |b|` of the linear solve.
    pub linear_residual: f64,
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub enum Termination {
    /// Relative functional change below tolerance.
    Converged,
    /// The update vanished relative to the iterate.
    StepTolerance,
    /// No decrease found, but the predicted decrease is below tolerance.
    Stagnated,
    /// No decrease found by the line search.
    StalledLineSearch,
    MaxIterations,
}

#[derive(Clone, Debug)]
pub struct SolveReport {
    pub level: usize,
    pub h: f64,
    pub eps: f64,
    pub spaces: Spaces,
    pub fields: Triple,
    pub initial_functional: f64,
    /// Final functional value.
    pub m_h: f64,
    pub iterations: usize,
    pub log: Vec<IterationLog>,
    pub termination: Termination,
    pub seconds: f64,
}

impl SolveReport {
    pub fn stalled(&self) -> bool {
        self.termination == Termination::StalledLineSearch
    }
}

enum Solver {
    Direct(Box<Cholesky>),
    Cg { tol: f64, max_iters: usize },
}

impl Solver {
    fn new(sp: &Spaces, a: &CsrMatrix, choice: LinearSolver) -> Result<Self> {
        let direct = || -> Result<Cholesky> {
            let order = nested_dissection(&sp.unknown_lattice(), 2);
            Cholesky::analyze(a, &Ordering::Custom(order))
        };
        match choice {
            LinearSolver::Direct => Ok(Solver::Direct(Box::new(direct()?))),
            LinearSolver::Cg { tol, max_iters } => Ok(Solver::Cg { tol, max_iters }),
            LinearSolver::Auto { factor_budget_bytes } => {
                let c = direct()?;
                if c.factor_nnz() * 8 <= factor_budget_bytes {
                    Ok(Solver::Direct(Box::new(c)))
                } else {
                    log::warn!("factor would need {:.2} GB; using conjugate gradients", c.factor_nnz() as f64 * 8e-9);
                    Ok(Solver::Cg { tol: 1e-10, max_iters: 20_000 })
                }
            }
        }
    }

    fn solve(&mut self, a: &CsrMatrix, b: &[f64]) -> Result<Vec<f64>> {
        match self {
            Solver::Direct(c) => {
                c.factor(a)?;
                c.solve(b)
            }
            Solver::Cg { tol, max_iters } => cg_solve(a, b, *tol, *max_iters),
        }
    }
}

/// Runs damped Gauss-Newton on one level from `init`.
pub fn solve_level(prob: &ProblemSpec, sp: &Spaces, opts: &GnOptions, init: Triple) -> Result<SolveReport> {
    opts.validate()?;
    let start = Instant::now();
    let h = sp.h();
    let eps = opts.eps(h);
    let fo = FormOptions { h, augment: opts.augment, eps };
    let ld = assemble_ld(&sp.c, prob)?;
    let mut x = init;
    let f0 = eval_fhat(sp, &x, &ld, prob, &fo)?;
    let scale = f0.abs().max(f64::MIN_POSITIVE.sqrt());
    let mut f = f0;
    let mut log = Vec::new();
    let mut pattern = Some(gn_pattern(sp));
    let mut solver: Option<Solver> = None;
    let mut termination = Termination::MaxIterations;
    let mut iterations = 0;
    for iter in 1..=opts.max_iters {
        let sys = assemble_gn(sp, &x, &ld, prob, &fo, pattern.take().expect("pattern"))?;
        if solver.is_none() {
            solver = Some(Solver::new(sp, &sys.a, opts.solver)?);
        }
        let d = solver.as_mut().unwrap().solve(&sys.a, &sys.b)?;
        let bn = norm(&sys.b);
        let lin_res = if bn > 0.0 {
            let ad = sys.a.matvec(&d);
            norm(&ad.iter().zip(&sys.b).map(|(p, q)| p - q).collect::<Vec<_>>()) / bn
        } else {
            0.0
        };
        let predicted = dot(&sys.b, &d);
        pattern = Some(sys.a);
        let dn = norm(&d);
        let xn = norm(&x.to_vec());
        if dn == 0.0 || dn <= opts.step_tol * xn {
            termination = Termination::StepTolerance;
            break;
        }
        let mut s = 1.0;
        let mut accepted = None;
        for bt in 0..=opts.max_backtracks {
            let trial = x.step(s, &d);
            let ft = eval_fhat(sp, &trial, &ld, prob, &fo)?;
            if ft < f {
                accepted = Some((trial, ft, bt));
                break;
            }
            s *= opts.shrink;
        }
        let Some((trial, ft, bt)) = accepted else {
            termination = if predicted <= opts.rel_tol * scale {
                Termination::Stagnated
            } else {
                log::warn!("line search stalled at level {} after {} iterations", sp.mesh.level(), iterations);
                Termination::StalledLineSearch
            };
            break;
        };
        let damping = s;
        let change = (f - ft).abs() / scale;
        x = trial;
        f = ft;
        iterations = iter;
        log::debug!("level {} iter {iter}: F = {ft:.12e}, damping {damping}, backtracks {bt}", sp.mesh.level());
        log.push(IterationLog { iter, functional: ft, damping, backtracks: bt, linear_residual: lin_res });
        if change <= opts.rel_tol {
            termination = Termination::Converged;
            break;
        }
    }
    Ok(SolveReport {
        level: sp.mesh.level(),
        h,
        eps,
        spaces: sp.clone(),
        fields: x,
        initial_functional: f0,
        m_h: f,
        iterations,
        log,
        termination,
        seconds: start.elapsed().as_secs_f64(),
    })
}

/// Coarsest mesh and polynomial orders.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct Discretization {
    pub coarse_nt: usize,
    pub coarse_nx: usize,
    pub order_u: usize,
    pub order_v: usize,
}

impl Discretization {
    /// The 16 x 32 coarsest mesh of the Burgers experiments.
    pub fn burgers(order_u: usize, order_v: usize) -> Self {
        Self { coarse_nt: 16, coarse_nx: 32, order_u, order_v }
    }
}

/// Tagged meshes of levels `0..levels`.
pub fn mesh_hierarchy(prob: &ProblemSpec, disc: &Discretization, levels: usize) -> Result<Vec<Arc<Mesh>>> {
    let mut mesh = Mesh::build_structured(disc.coarse_nt, disc.coarse_nx, prob.rect)?.tag_boundary(&prob.split)?;
    let mut out = Vec::with_capacity(levels);
    for l in 0..levels {
        if l > 0 {
            mesh = mesh.refine_uniform();
        }
        out.push(Arc::new(mesh.clone()));
    }
    Ok(out)
}

/// Solves on `levels` uniformly refined meshes, each level starting from the
/// previous solution. Level 0 starts from the mean of `g` with zero
/// potentials. `on_level` sees each report as soon as it is available.
pub fn nested_iterate_with(
    prob: &ProblemSpec,
    levels: usize,
    disc: &Discretization,
    opts: &GnOptions,
    mut on_level: impl FnMut(&SolveReport) -> Result<()>,
) -> Result<Vec<SolveReport>> {
    if levels == 0 {
        return Err(Error::Config("at least one level is required".into()));
    }
    opts.validate()?;
    let mut mesh = Mesh::build_structured(disc.coarse_nt, disc.coarse_nx, prob.rect)?.tag_boundary(&prob.split)?;
    let mut reports: Vec<SolveReport> = Vec::with_capacity(levels);
    for l in 0..levels {
        if l > 0 {
            mesh = mesh.refine_uniform();
        }
        let sp = Spaces::new(Arc::new(mesh.clone()), disc.order_u, disc.order_v)?;
        let init = match reports.last() {
            None => Triple::constant(&sp, prob.inflow_mean()),
            Some(prev) => prev.fields.prolongate(&sp),
        };
        let rep = solve_level(prob, &sp, opts, init)?;
        log::info!(
            "level {l}: h = {:.5}, {} unknowns, M = {:.10e}, {} iterations ({:?}), {:.1} s",
            rep.h,
            sp.n_unknowns(),
            rep.m_h,
            rep.iterations,
            rep.termination,
            rep.seconds
        );
        on_level(&rep)?;
        reports.push(rep);
    }
    Ok(reports)
}

pub fn nested_iterate(
    prob: &ProblemSpec,
    levels: usize,
    disc: &Discretization,
    opts: &GnOptions,
) -> Result<Vec<SolveReport>> {
    nested_iterate_with(prob, levels, disc, opts, |_| Ok(()))
}
