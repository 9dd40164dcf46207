//! CSV and legacy-VTK writers.

use std::io::Write;

use crate::error::Result;
use crate::gn::SolveReport;
use crate::mesh::{Mesh, Point, Rect};

/// Values of `f` on the `(nt + 1) x (nx + 1)` uniform grid of `rect`, t-major.
pub fn sample_grid(rect: Rect, nt: usize, nx: usize, f: impl Fn(Point) -> f64) -> Vec<f64> {
    let mut out = Vec::with_capacity((nt + 1) * (nx + 1));
    for i in 0..=nt {
        for j in 0..=nx {
            out.push(f(grid_point(rect, nt, nx, i, j)));
        }
    }
    out
}

fn grid_point(rect: Rect, nt: usize, nx: usize, i: usize, j: usize) -> Point {
    [rect.t0 + (rect.t1 - rect.t0) * i as f64 / nt as f64, rect.x0 + (rect.x1 - rect.x0) * j as f64 / nx as f64]
}

/// Grid samples as `t,x,<name>` rows.
pub fn write_grid_csv(mut w: impl Write, rect: Rect, nt: usize, nx: usize, name: &str, vals: &[f64]) -> Result<()> {
    writeln!(w, "t,x,{name}")?;
    for i in 0..=nt {
        for j in 0..=nx {
            let p = grid_point(rect, nt, nx, i, j);
            writeln!(w, "{:.10},{:.10},{:.12e}", p[0], p[1], vals[i * (nx + 1) + j])?;
        }
    }
    Ok(())
}

/// Grid samples as a legacy-VTK structured-points data set (x along t).
pub fn write_grid_vtk(mut w: impl Write, rect: Rect, nt: usize, nx: usize, name: &str, vals: &[f64]) -> Result<()> {
    writeln!(w, "# vtk DataFile Version 3.0")?;
    writeln!(w, "{name} sampled on a uniform grid")?;
    writeln!(w, "ASCII")?;
    writeln!(w, "DATASET STRUCTURED_POINTS")?;
    writeln!(w, "DIMENSIONS {} {} 1", nt + 1, nx + 1)?;
    writeln!(w, "ORIGIN {} {} 0", rect.t0, rect.x0)?;
    writeln!(w, "SPACING {} {} 1", (rect.t1 - rect.t0) / nt as f64, (rect.x1 - rect.x0) / nx as f64)?;
    writeln!(w, "POINT_DATA {}", vals.len())?;
    writeln!(w, "SCALARS {name} double 1")?;
    writeln!(w, "LOOKUP_TABLE default")?;
    // VTK varies the first axis fastest
    for j in 0..=nx {
        for i in 0..=nt {
            writeln!(w, "{:.12e}", vals[i * (nx + 1) + j])?;
        }
    }
    Ok(())
}

/// The triangulation with optional per-vertex data.
pub fn write_mesh_vtk(mut w: impl Write, mesh: &Mesh, point_data: &[(&str, &[f64])]) -> Result<()> {
    writeln!(w, "# vtk DataFile Version 3.0")?;
    writeln!(w, "space-time mesh, level {}", mesh.level())?;
    writeln!(w, "ASCII")?;
    writeln!(w, "DATASET UNSTRUCTURED_GRID")?;
    writeln!(w, "POINTS {} double", mesh.n_vertices())?;
    for p in mesh.vertices() {
        writeln!(w, "{:.12} {:.12} 0", p[0], p[1])?;
    }
    writeln!(w, "CELLS {} {}", mesh.n_triangles(), 4 * mesh.n_triangles())?;
    for t in mesh.triangles() {
        writeln!(w, "3 {} {} {}", t[0], t[1], t[2])?;
    }
    writeln!(w, "CELL_TYPES {}", mesh.n_triangles())?;
    for _ in 0..mesh.n_triangles() {
        writeln!(w, "5")?;
    }
    if !point_data.is_empty() {
        writeln!(w, "POINT_DATA {}", mesh.n_vertices())?;
        for (name, vals) in point_data {
            writeln!(w, "SCALARS {name} double 1")?;
            writeln!(w, "LOOKUP_TABLE default")?;
            for v in vals.iter().take(mesh.n_vertices()) {
                writeln!(w, "{v:.12e}")?;
            }
        }
    }
    Ok(())
}

/// Polylines as legacy-VTK poly data.
pub fn write_polylines_vtk(mut w: impl Write, lines: &[Vec<Point>]) -> Result<()> {
    let n: usize = lines.iter().map(|l| l.len()).sum();
    writeln!(w, "# vtk DataFile Version 3.0")?;
    writeln!(w, "shock curves")?;
    writeln!(w, "ASCII")?;
    writeln!(w, "DATASET POLYDATA")?;
    writeln!(w, "POINTS {n} double")?;
    for p in lines.iter().flatten() {
        writeln!(w, "{:.12} {:.12} 0", p[0], p[1])?;
    }
    writeln!(w, "LINES {} {}", lines.len(), n + lines.len())?;
    let mut k = 0;
    for l in lines {
        write!(w, "{}", l.len())?;
        for _ in 0..l.len() {
            write!(w, " {k}")?;
            k += 1;
        }
        writeln!(w)?;
    }
    Ok(())
}

/// Polylines as `curve,t,x` rows.
pub fn write_polylines_csv(mut w: impl Write, lines: &[Vec<Point>]) -> Result<()> {
    writeln!(w, "curve,t,x")?;
    for (c, l) in lines.iter().enumerate() {
        for p in l {
            writeln!(w, "{c},{:.12},{:.12}", p[0], p[1])?;
        }
    }
    Ok(())
}

/// Gauss-Newton logs as `level,iter,functional,damping` rows.
pub fn write_iterations_csv(mut w: impl Write, reports: &[SolveReport]) -> Result<()> {
    writeln!(w, "level,iter,functional,damping")?;
    for r in reports {
        writeln!(w, "{},0,{:.14e},", r.level, r.initial_functional)?;
        for l in &r.log {
            writeln!(w, "{},{},{:.14e},{}", r.level, l.iter, l.functional, l.damping)?;
        }
    }
    Ok(())
}
