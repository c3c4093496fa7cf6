use std::fs::File;
use std::io::{BufWriter, Write};
use std::path::PathBuf;
use std::process::ExitCode;

use clap::error::ErrorKind;
use clap::{CommandFactory, Parser, ValueEnum};

use equip::harness::{self, ExperimentSpec};
use equip::Mode;

#[derive(Debug, Clone, Copy, ValueEnum)]
enum ProblemArg {
    Kepler,
    Pendulum,
    Poisson,
    Lotka,
}

impl ProblemArg {
    fn key(self) -> &'static str {
        match self {
            ProblemArg::Kepler => "kepler",
            ProblemArg::Pendulum => "pendulum",
            ProblemArg::Poisson => "poisson",
            ProblemArg::Lotka => "lotka",
        }
    }
}

#[derive(Debug, Clone, Copy, ValueEnum)]
enum MethodArg {
    Equip,
    Gauss,
}

/// Run EQUIP / Gauss convergence or error-growth experiments and write CSV.
#[derive(Debug, Parser)]
#[command(name = "equip-bench", version)]
struct Args {
    #[arg(long, value_enum)]
    problem: ProblemArg,
    #[arg(long, value_enum)]
    method: MethodArg,
    /// Stage count.
    #[arg(long, default_value_t = 2)]
    s: usize,
    /// Quadrature points for the line integrals.
    #[arg(long, default_value_t = 6)]
    k: usize,
    /// Comma-separated steps per period, ascending.
    #[arg(long, value_delimiter = ',', required = true)]
    n_list: Vec<usize>,
    #[arg(long, default_value_t = 10)]
    periods: usize,
    #[arg(long)]
    out: PathBuf,
    /// Write per-period errors instead of the table.
    #[arg(long)]
    growth: bool,
    #[arg(long)]
    fp_tol: Option<f64>,
    #[arg(long)]
    no_drift_correction: bool,
}

fn main() -> ExitCode {
    let args = Args::parse();
    let spec = ExperimentSpec {
        problem: args.problem.key().to_string(),
        mode: match args.method {
            MethodArg::Equip => Mode::Equip,
            MethodArg::Gauss => Mode::Gauss,
        },
        stages: args.s,
        quad_points: args.k,
        n_list: args.n_list,
        periods: args.periods,
        fp_tol: args.fp_tol,
        drift_correction: !args.no_drift_correction,
    };
    if let Err(e) = spec.validate() {
        Args::command().error(ErrorKind::ValueValidation, e).exit();
    }

    let records = match harness::run_records(&spec) {
        Ok(r) => r,
        Err(e) => {
            eprintln!("equip-bench: integration failed: {e}");
            return ExitCode::FAILURE;
        }
    };

    let written = File::create(&args.out).and_then(|f| {
        let mut w = BufWriter::new(f);
        if args.growth {
            harness::write_growth_csv(&records, &mut w)?;
        } else {
            harness::write_table_csv(&harness::report_rows(&records), &mut w)?;
        }
        w.flush()
    });
    if let Err(e) = written {
        eprintln!("equip-bench: cannot write {}: {e}", args.out.display());
        return ExitCode::FAILURE;
    }
    ExitCode::SUCCESS
}
