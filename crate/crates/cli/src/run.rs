use std::fs::{self, File};
use std::io::BufWriter;
use std::path::Path;

use serde::Serialize;

use helmls::diagnostics::{
    error_norms, estimate_collision, fronts, ConvergenceTable, ErrorNorms, Helmholtz, FRONT_FLOOR, FRONT_SLOPE,
};
use helmls::exact::{manufactured_oracle, ExactSolution, Oracle};
use helmls::gn::{nested_iterate_with, Discretization, GnOptions, SolveReport};
use helmls::mesh::{BoundaryTag, Point};
use helmls::output;
use helmls::problem::{example_spec, manufactured_spec, ProblemSpec};

use crate::config::{ConfigError, Example, RunConfig};

#[derive(Debug, thiserror::Error)]
pub enum RunError {
    #[error(transparent)]
    Config(#[from] ConfigError),
    #[error(transparent)]
    Solver(#[from] helmls::Error),
    #[error("i/o error: {0}")]
    Io(#[from] std::io::Error),
    #[error("json error: {0}")]
    Json(#[from] serde_json::Error),
}

#[derive(Clone, Debug, Serialize)]
pub struct LevelSummary {
    pub level: usize,
    pub h: f64,
    pub eps: f64,
    pub unknowns: usize,
    pub iterations: usize,
    pub termination: String,
    pub initial_functional: f64,
    pub m_h: f64,
    pub l2sq: f64,
    pub l1: f64,
    pub l1sq: f64,
    /// `|grad(q_v - q_*)|` with `q_*` computed on this level's mesh.
    pub hminus1_residual: f64,
    pub q_star_mesh: &'static str,
    pub seconds: f64,
}

#[derive(Clone, Debug, Serialize)]
pub struct Collision {
    pub oracle: Point,
    pub estimated: Option<Point>,
    pub distance: Option<f64>,
    pub two_h: f64,
}

/// Quantities the acceptance checks are phrased in.
#[derive(Clone, Debug, Default, Serialize)]
pub struct Metrics {
    pub l2sq_rates: Vec<Option<f64>>,
    pub l1sq_rates: Vec<Option<f64>>,
    pub dm_h: Vec<f64>,
    pub dm_rates: Vec<Option<f64>>,
    /// `l2sq(h) / l2sq(h/2)` per refinement.
    pub contraction: Vec<f64>,
    pub collision: Option<Collision>,
}

#[derive(Clone, Debug, Serialize)]
pub struct Summary {
    pub config: RunConfig,
    pub problem: String,
    pub levels: Vec<LevelSummary>,
    pub metrics: Metrics,
}

/// Problem data, the oracle for errors, and the shock oracle when there is one.
type Loaded = (ProblemSpec, Box<dyn Oracle>, Option<ExactSolution>);

fn problem(example: Example) -> Result<Loaded, RunError> {
    Ok(match example {
        Example::Burgers(k) => {
            let exact = ExactSolution::new(k)?;
            (example_spec(k)?, Box::new(exact.clone()), Some(exact))
        }
        Example::Manufactured => (manufactured_spec(), Box::new(manufactured_oracle()), None),
    })
}

fn create(dir: &Path, name: &str) -> std::io::Result<BufWriter<File>> {
    Ok(BufWriter::new(File::create(dir.join(name))?))
}

fn write_level(cfg: &RunConfig, rep: &SolveReport) -> helmls::Result<()> {
    let mesh = rep.spaces.mesh.as_ref();
    let nt = (mesh.cells().0 * cfg.order_u).min(cfg.grid);
    let nx = nt * mesh.cells().1 / mesh.cells().0;
    let u = &rep.fields.u;
    let vals = output::sample_grid(mesh.rect(), nt, nx, |p| u.eval(p).unwrap_or(f64::NAN));
    output::write_grid_csv(create(&cfg.out, &format!("level{}_u.csv", rep.level))?, mesh.rect(), nt, nx, "u", &vals)?;
    output::write_grid_vtk(create(&cfg.out, &format!("level{}_u.vtk", rep.level))?, mesh.rect(), nt, nx, "u", &vals)?;
    Ok(())
}

/// Fronts of the computed solution on every grid row, as `t,x,drop`.
fn write_fronts(dir: &Path, rep: &SolveReport) -> Result<(), RunError> {
    use std::io::Write;
    let u = &rep.fields.u;
    let mesh = rep.spaces.mesh.as_ref();
    let (nt, _) = mesh.cells();
    let dx = mesh.h() / rep.spaces.u.order() as f64;
    let mut w = create(dir, "fronts.csv")?;
    writeln!(w, "t,x,drop")?;
    for i in 1..nt {
        let t = mesh.rect().t0 + i as f64 * mesh.h();
        for (x, d) in fronts(u, t, dx, FRONT_SLOPE, FRONT_FLOOR) {
            writeln!(w, "{t:.10},{x:.10},{d:.10}")?;
        }
    }
    Ok(())
}

fn metrics(table: &ConvergenceTable, reports: &[SolveReport], exact: Option<&ExactSolution>) -> Metrics {
    let rows = &table.rows;
    let collision = exact.and_then(|e| e.collision()).zip(reports.last()).map(|(c, rep)| {
        let est = estimate_collision(&rep.fields.u);
        Collision {
            oracle: c,
            estimated: est,
            distance: est.map(|p| ((p[0] - c[0]).powi(2) + (p[1] - c[1]).powi(2)).sqrt()),
            two_h: 2.0 * rep.h,
        }
    });
    Metrics {
        l2sq_rates: rows.iter().skip(1).map(|r| r.l2sq_rate).collect(),
        l1sq_rates: rows.iter().skip(1).map(|r| r.l1sq_rate).collect(),
        dm_h: rows.iter().filter_map(|r| r.dm_h).collect(),
        dm_rates: table.dm_rates().into_iter().flatten().map(Some).collect(),
        contraction: rows.windows(2).map(|w| w[0].l2sq / w[1].l2sq).collect(),
        collision,
    }
}

/// Nested iteration for `cfg`, writing all artifacts into `cfg.out`.
pub fn run(cfg: &RunConfig) -> Result<Summary, RunError> {
    cfg.validate()?;
    let (prob, oracle, exact) = problem(cfg.example)?;
    fs::create_dir_all(&cfg.out)?;
    let opts = GnOptions { rel_tol: cfg.tol, max_iters: cfg.max_iters, eta: cfg.eta, ..Default::default() };
    let disc = Discretization::burgers(cfg.order_u, cfg.order_v);
    let mut errors: Vec<ErrorNorms> = Vec::new();
    let mut levels = Vec::new();
    let reports = nested_iterate_with(&prob, cfg.levels, &disc, &opts, |rep| {
        let e = error_norms(&rep.fields.u, oracle.as_ref())?;
        let hm1 = Helmholtz::new(&rep.spaces, &prob)?.hminus1_residual(&rep.fields.u)?;
        log::info!("level {}: squared L2 error {:.6e}, L1 error {:.6e}", rep.level, e.l2_squared, e.l1);
        write_level(cfg, rep)?;
        levels.push(LevelSummary {
            level: rep.level,
            h: rep.h,
            eps: rep.eps,
            unknowns: rep.spaces.n_unknowns(),
            iterations: rep.iterations,
            termination: format!("{:?}", rep.termination),
            initial_functional: rep.initial_functional,
            m_h: rep.m_h,
            l2sq: e.l2_squared,
            l1: e.l1,
            l1sq: e.l1_squared,
            hminus1_residual: hm1,
            q_star_mesh: "current",
            seconds: rep.seconds,
        });
        errors.push(e);
        Ok(())
    })?;
    let table = ConvergenceTable::new(&reports, &errors)?;
    fs::write(cfg.out.join("convergence.csv"), table.to_csv())?;
    output::write_iterations_csv(create(&cfg.out, "iterations.csv")?, &reports)?;
    if let Some(ex) = &exact {
        let lines = ex.shock_polylines();
        output::write_polylines_csv(create(&cfg.out, "shocks_exact.csv")?, &lines)?;
        output::write_polylines_vtk(create(&cfg.out, "shocks_exact.vtk")?, &lines)?;
    }
    if let Some(last) = reports.last() {
        write_fronts(&cfg.out, last)?;
    }
    let summary = Summary {
        config: cfg.clone(),
        problem: prob.name.clone(),
        metrics: metrics(&table, &reports, exact.as_ref()),
        levels,
    };
    serde_json::to_writer_pretty(create(&cfg.out, "summary.json")?, &summary)?;
    Ok(summary)
}

/// Exact solution sampled on an `nt x 2nt` grid plus its shock curves.
pub fn dump_oracle(example: Example, nt: usize, dir: &Path) -> Result<(), RunError> {
    let (prob, oracle, exact) = problem(example)?;
    fs::create_dir_all(dir)?;
    let nx = 2 * nt;
    let vals = output::sample_grid(prob.rect, nt, nx, |p| oracle.value(p));
    output::write_grid_csv(create(dir, "exact_u.csv")?, prob.rect, nt, nx, "u", &vals)?;
    output::write_grid_vtk(create(dir, "exact_u.vtk")?, prob.rect, nt, nx, "u", &vals)?;
    if let Some(ex) = exact {
        let lines = ex.shock_polylines();
        output::write_polylines_csv(create(dir, "shocks_exact.csv")?, &lines)?;
        output::write_polylines_vtk(create(dir, "shocks_exact.vtk")?, &lines)?;
    }
    Ok(())
}

/// Level `level` of the Burgers mesh hierarchy with an inflow-vertex flag.
pub fn dump_mesh(level: usize, path: &Path) -> Result<(), RunError> {
    let prob = example_spec(1)?;
    let meshes = helmls::gn::mesh_hierarchy(&prob, &Discretization::burgers(1, 1), level + 1)?;
    let mesh = meshes.last().expect("at least one level");
    let mut inflow = vec![0.0; mesh.n_vertices()];
    for be in mesh.boundary_edges() {
        if be.tag == BoundaryTag::Inflow {
            for &v in &be.vertices {
                inflow[v] = 1.0;
            }
        }
    }
    if let Some(dir) = path.parent() {
        if !dir.as_os_str().is_empty() {
            fs::create_dir_all(dir)?;
        }
    }
    output::write_mesh_vtk(BufWriter::new(File::create(path)?), mesh, &[("inflow", &inflow)])?;
    Ok(())
}
