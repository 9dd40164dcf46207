//! Command-line front end of the space-time least-squares Burgers solver.

mod config;
mod run;

use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};

use config::{Example, Overrides, RunConfig};

#[derive(Parser)]
#[command(name = "helmls", version, about = "Space-time least-squares solver for scalar balance laws")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Nested iteration over refined meshes; writes tables, grids and a summary.
    Run(RunArgs),
    /// Writes the exact solution of an example on a uniform grid.
    Oracle {
        #[arg(long, default_value = "1")]
        example: Example,
        /// Time samples; the x direction gets twice as many.
        #[arg(long, default_value_t = 256)]
        nt: usize,
        #[arg(long, default_value = "oracle")]
        out: PathBuf,
    },
    /// Writes one level of the mesh hierarchy as legacy VTK.
    Mesh {
        #[arg(long, default_value_t = 0)]
        level: usize,
        #[arg(long, default_value = "mesh.vtk")]
        out: PathBuf,
    },
}

#[derive(Args)]
struct RunArgs {
    /// 1, 2, 3 or manufactured.
    #[arg(long)]
    example: Option<Example>,
    #[arg(long)]
    levels: Option<usize>,
    #[arg(long)]
    order_u: Option<usize>,
    #[arg(long)]
    order_v: Option<usize>,
    /// Regularization exponent: eps = h^eta.
    #[arg(long)]
    eta: Option<f64>,
    /// Relative functional change that stops Gauss-Newton.
    #[arg(long)]
    tol: Option<f64>,
    #[arg(long)]
    max_iters: Option<usize>,
    #[arg(long)]
    out: Option<PathBuf>,
    /// Time samples of the per-level solution grids.
    #[arg(long)]
    grid: Option<usize>,
    /// File of `key = value` lines; flags take precedence.
    #[arg(long)]
    config: Option<PathBuf>,
}

impl RunArgs {
    fn overrides(&self) -> Overrides {
        Overrides {
            example: self.example,
            levels: self.levels,
            order_u: self.order_u,
            order_v: self.order_v,
            eta: self.eta.map(Some),
            tol: self.tol,
            max_iters: self.max_iters,
            out: self.out.clone(),
            grid: self.grid,
        }
    }

    fn resolve(&self) -> Result<RunConfig, config::ConfigError> {
        let file = self.config.as_deref().map(Overrides::from_file).transpose()?;
        RunConfig::resolve(file.as_ref(), &self.overrides())
    }
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("info")).init();
    let cli = Cli::parse();
    let result = match cli.command {
        Command::Run(args) => args.resolve().map_err(run::RunError::from).and_then(|cfg| {
            log::info!("writing results to {}", cfg.out.display());
            run::run(&cfg).map(|s| {
                if let Some(r) = s.metrics.l2sq_rates.last().copied().flatten() {
                    log::info!("last squared L2 rate {r:.3}");
                }
            })
        }),
        Command::Oracle { example, nt, out } => run::dump_oracle(example, nt, &out),
        Command::Mesh { level, out } => run::dump_mesh(level, &out),
    };
    match result {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::FAILURE
        }
    }
}
