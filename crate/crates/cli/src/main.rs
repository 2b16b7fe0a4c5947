use std::fs::File;
use std::io::{self, Write};
use std::path::PathBuf;

use anyhow::{bail, Context, Result};
use clap::{Parser, ValueEnum};
use serde::Serialize;

use tlamg::bench::{solve_system, BenchmarkRow, Method};
use tlamg::coarse_amg::AmgConfig;
use tlamg::krylov::SolverConfig;
use tlamg::meshgen::{ContactModelSpec, ModelId};
use tlamg::sparsela::mm;
use tlamg::system::{export_system, import_system, SaddleSystem};
use tlamg::twolevel::{
    CoarseSolve, Interpolation, Restriction, Smoother, TwoLevelConfig, TwoLevelPreconditioner,
};

#[derive(Debug, Clone, Copy, ValueEnum)]
enum Precond {
    Tlamg,
    Simple,
    Amg,
    None,
}

#[derive(Debug, Clone, Copy, ValueEnum)]
enum Interp {
    Ideal,
    Simplified,
}

#[derive(Debug, Clone, Copy, ValueEnum)]
enum Restrict {
    Ideal,
    Transpose,
}

#[derive(Debug, Clone, Copy, ValueEnum)]
enum SmootherArg {
    Jac,
    Exactf,
    Ssimple,
    None,
}

#[derive(Debug, Clone, Copy, ValueEnum)]
enum Coarse {
    Amg,
    Direct,
}

#[derive(Debug, Clone, Copy, ValueEnum)]
enum Report {
    Csv,
    Json,
}

/// Solves a tied-contact saddle-point system with preconditioned GCR and
/// prints one report row.
#[derive(Debug, Parser)]
#[command(name = "tlamg", version)]
struct Args {
    /// Generated test model (1, 2 or 3).
    #[arg(long, conflicts_with = "import", required_unless_present = "import")]
    model: Option<ModelId>,
    /// Element count along the master body's shortest edge.
    #[arg(long, default_value_t = 16)]
    resolution: usize,
    /// Load the system from a directory written by --export.
    #[arg(long, value_name = "DIR")]
    import: Option<PathBuf>,
    /// Write the system to DIR before solving.
    #[arg(long, value_name = "DIR")]
    export: Option<PathBuf>,
    /// Write the two-level coarse operator as MatrixMarket.
    #[arg(long, value_name = "FILE")]
    export_coarse: Option<PathBuf>,
    #[arg(long, value_enum, default_value_t = Precond::Tlamg)]
    precond: Precond,
    #[arg(long, value_enum, default_value_t = Interp::Simplified)]
    interp: Interp,
    #[arg(long, value_enum, default_value_t = Restrict::Ideal)]
    restrict: Restrict,
    /// Drop tolerance for the entries of D⁻¹M.
    #[arg(long, default_value_t = 1e-10)]
    approx_eps: f64,
    #[arg(long, value_enum, default_value_t = SmootherArg::Exactf)]
    smoother: SmootherArg,
    /// Sweeps of the Jacobi smoother or inner sSIMPLE iterations.
    #[arg(long, default_value_t = 1)]
    sweeps: usize,
    #[arg(long, value_enum, default_value_t = Coarse::Amg)]
    coarse: Coarse,
    #[arg(long, default_value_t = 1e-8)]
    tol: f64,
    #[arg(long, default_value_t = 100)]
    max_it: usize,
    /// GCR restart length (default: no restart).
    #[arg(long)]
    restart: Option<usize>,
    #[arg(long, value_enum, default_value_t = Report::Csv)]
    report: Report,
    /// Report file (default: stdout).
    #[arg(long, short)]
    output: Option<PathBuf>,
}

impl Args {
    fn method(&self) -> Method {
        match self.precond {
            Precond::Tlamg => Method::TwoLevel(self.two_level()),
            Precond::Simple => Method::Simple(AmgConfig::default()),
            Precond::Amg => Method::PlainAmg(AmgConfig::default()),
            Precond::None => Method::None,
        }
    }

    fn two_level(&self) -> TwoLevelConfig {
        TwoLevelConfig {
            interpolation: match self.interp {
                Interp::Ideal => Interpolation::Ideal,
                Interp::Simplified => Interpolation::Simplified,
            },
            restriction: match self.restrict {
                Restrict::Ideal => Restriction::Ideal,
                Restrict::Transpose => Restriction::InterpolationTranspose,
            },
            smoother: match self.smoother {
                SmootherArg::Jac => Smoother::Jacobi { sweeps: self.sweeps },
                SmootherArg::Exactf => Smoother::ExactF,
                SmootherArg::Ssimple => Smoother::SSimple {
                    inner_sweeps: self.sweeps,
                },
                SmootherArg::None => Smoother::None,
            },
            drop_tolerance: self.approx_eps,
            coarse: match self.coarse {
                Coarse::Amg => CoarseSolve::Amg(AmgConfig::default()),
                Coarse::Direct => CoarseSolve::Direct,
            },
        }
    }

    fn solver(&self) -> SolverConfig {
        SolverConfig {
            max_iterations: self.max_it,
            rel_tolerance: self.tol,
            restart: self.restart,
        }
    }
}

/// Flat view of a row for CSV output.
#[derive(Serialize)]
struct CsvRow<'a> {
    problem: &'a str,
    method: &'a str,
    dofs: usize,
    nit: usize,
    converged: bool,
    r_rel: f64,
    setup_s: f64,
    solve_s: f64,
    total_s: f64,
    p_nnz: Option<usize>,
    p_nnz_row: Option<f64>,
    interp_nnz_row: Option<f64>,
    coarse_nnz_row: Option<f64>,
    constraint_violation: f64,
    solver_error: Option<&'a str>,
}

impl<'a> From<&'a BenchmarkRow> for CsvRow<'a> {
    fn from(r: &'a BenchmarkRow) -> Self {
        Self {
            problem: &r.problem,
            method: &r.method,
            dofs: r.dofs,
            nit: r.iterations,
            converged: r.converged,
            r_rel: r.final_residual,
            setup_s: r.setup_seconds,
            solve_s: r.solve_seconds,
            total_s: r.total_seconds,
            p_nnz: r.p_nnz,
            p_nnz_row: r.p_nnz_per_row,
            interp_nnz_row: r.interp_nnz_per_row,
            coarse_nnz_row: r.coarse_nnz_per_row,
            constraint_violation: r.constraint_violation,
            solver_error: r.solver_error.as_deref(),
        }
    }
}

fn write_report(row: &BenchmarkRow, format: Report, out: &mut dyn Write) -> Result<()> {
    match format {
        Report::Csv => {
            let mut w = csv::Writer::from_writer(out);
            w.serialize(CsvRow::from(row))?;
            w.flush()?;
        }
        Report::Json => {
            serde_json::to_writer_pretty(&mut *out, row)?;
            writeln!(out)?;
        }
    }
    Ok(())
}

fn run(args: &Args) -> Result<()> {
    if args.sweeps == 0 {
        bail!("--sweeps must be at least 1");
    }
    let (sys, problem) = match (&args.import, args.model) {
        (Some(dir), _) => (
            import_system(dir).with_context(|| format!("importing {}", dir.display()))?,
            dir.display().to_string(),
        ),
        (None, Some(model)) => {
            let spec = ContactModelSpec::new(model, args.resolution);
            spec.validate()?;
            (SaddleSystem::from_model(&spec)?, format!("{model}-r{}", args.resolution))
        }
        (None, None) => bail!("one of --model or --import is required"),
    };
    if let Some(dir) = &args.export {
        export_system(&sys, dir).with_context(|| format!("exporting to {}", dir.display()))?;
    }
    if let Some(path) = &args.export_coarse {
        let pc = TwoLevelPreconditioner::new(&sys, args.two_level())?;
        let file = File::create(path).with_context(|| format!("creating {}", path.display()))?;
        mm::write_matrix(io::BufWriter::new(file), pc.coarse_operator(), true)?;
    }
    let solver = args.solver();
    solver.validate().map_err(anyhow::Error::msg)?;
    let (row, _) = solve_system(&sys, &problem, &args.method(), &solver)?;
    match &args.output {
        Some(path) => {
            let mut f = File::create(path).with_context(|| format!("creating {}", path.display()))?;
            write_report(&row, args.report, &mut f)
        }
        None => write_report(&row, args.report, &mut io::stdout().lock()),
    }
}

fn main() {
    let args = Args::parse();
    if let Err(e) = run(&args) {
        eprintln!("error: {e:#}");
        std::process::exit(1);
    }
}
