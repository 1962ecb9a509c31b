use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Parser, Subcommand};
use thermoporous::{Decoupling, PreconditionerKind, SchurApprox};
use thermoporous_bench::conddiag::condition_diagnostic;
use thermoporous_bench::metrics::{format_summary, read_metrics_file, summarize, write_metrics_file};
use thermoporous_bench::runner::{dump_first_system, run_case, warm_up};
use thermoporous_bench::{load_case, CaseSpec, MetricsRecord, Result};

#[derive(Parser)]
#[command(name = "thermoporous", version, about = "Thermal heavy-oil flow benchmarks")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(clap::Args, Clone)]
struct SolverArgs {
    /// Override the preconditioner (cpr or block).
    #[arg(long)]
    precond: Option<PreconditionerKind>,
    /// Schur approximation for the block preconditioner.
    #[arg(long)]
    schur: Option<SchurApprox>,
    /// Decoupling applied before CPR.
    #[arg(long)]
    decoupling: Option<Decoupling>,
    /// Relative GMRES tolerance.
    #[arg(long)]
    gmres_rtol: Option<f64>,
}

#[derive(Subcommand)]
enum Command {
    /// Run one case and record per-step metrics.
    Run {
        case: PathBuf,
        #[command(flatten)]
        solver: SolverArgs,
        /// Cells per axis, replacing the case's grid.
        #[arg(long)]
        grid: Option<usize>,
        #[arg(long)]
        out: Option<PathBuf>,
        /// Write the first Jacobian's blocks as Matrix Market files here.
        #[arg(long)]
        dump_matrices: Option<PathBuf>,
    },
    /// Run a case over several grids and preconditioners.
    Sweep {
        case: PathBuf,
        #[arg(long, value_delimiter = ',', default_values_t = [20usize, 40, 80, 160])]
        grids: Vec<usize>,
        #[arg(long, value_delimiter = ',', default_values_t = [PreconditionerKind::Block, PreconditionerKind::Cpr])]
        preconds: Vec<PreconditionerKind>,
        #[arg(long, value_delimiter = ',', default_values_t = [SchurApprox::STildeT])]
        schurs: Vec<SchurApprox>,
        #[arg(long)]
        gmres_rtol: Option<f64>,
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Dense condition numbers of the preconditioned Schur complement.
    Conddiag {
        case: PathBuf,
        #[arg(long)]
        grid: Option<usize>,
        /// Steps taken before the system is formed.
        #[arg(long, default_value_t = 0)]
        warmup: usize,
    },
    /// Average linear iterations per Newton iteration from a metrics file.
    Summarize { metrics: PathBuf },
}

fn apply(spec: &mut CaseSpec, a: &SolverArgs) {
    if let Some(k) = a.precond {
        spec.solver.precond.kind = k;
    }
    if let Some(s) = a.schur {
        spec.solver.precond.schur = s;
    }
    if let Some(d) = a.decoupling {
        spec.solver.precond.decoupling = d;
    }
    if let Some(r) = a.gmres_rtol {
        spec.solver.gmres_rtol = r;
    }
}

fn print_step(m: &MetricsRecord) {
    println!(
        "{} {}({}) n={} step={} dt={:.4e} newton={} linear={} converged={}",
        m.case, m.precond, m.schur, m.n, m.step, m.dt, m.newton_iters, m.linear_iters, m.converged
    );
}

fn emit(records: &[MetricsRecord], out: Option<&PathBuf>) -> Result<()> {
    match out {
        Some(p) => write_metrics_file(p, records),
        None => Ok(()),
    }?;
    print!("{}", format_summary(&summarize(records)));
    Ok(())
}

fn run(cli: Cli) -> Result<()> {
    match cli.command {
        Command::Run { case, solver, grid, out, dump_matrices } => {
            let mut spec = load_case(&case)?;
            if let Some(n) = grid {
                spec = spec.with_grid(n);
            }
            apply(&mut spec, &solver);
            spec.solver.validate()?;
            if let Some(dir) = dump_matrices {
                dump_first_system(&spec, &dir)?;
            }
            let (records, _) = run_case(&spec, print_step)?;
            emit(&records, out.as_ref())
        }
        Command::Sweep { case, grids, preconds, schurs, gmres_rtol, out } => {
            let base = load_case(&case)?;
            let mut all = Vec::new();
            for &n in &grids {
                for &kind in &preconds {
                    let variants: Vec<Option<SchurApprox>> = match kind {
                        PreconditionerKind::Block => schurs.iter().copied().map(Some).collect(),
                        PreconditionerKind::Cpr => vec![None],
                    };
                    for schur in variants {
                        let mut spec = base.clone().with_grid(n);
                        apply(&mut spec, &SolverArgs { precond: Some(kind), schur, decoupling: None, gmres_rtol });
                        spec.solver.validate()?;
                        let (records, _) = run_case(&spec, print_step)?;
                        all.extend(records);
                    }
                }
            }
            emit(&all, out.as_ref())
        }
        Command::Conddiag { case, grid, warmup } => {
            let mut spec = load_case(&case)?;
            if let Some(n) = grid {
                spec = spec.with_grid(n);
            }
            let (state, dt) = warm_up(&spec, warmup)?;
            let report = condition_diagnostic(&spec.build_model()?, &state, dt)?;
            println!("{} n={} warmup={warmup}", spec.name, spec.dims[0]);
            print!("{}", report.format());
            Ok(())
        }
        Command::Summarize { metrics } => {
            let records = read_metrics_file(&metrics)?;
            let groups = summarize(&records);
            print!("{}", format_summary(&groups));
            for g in &groups {
                if let Some(avg) = g.average() {
                    println!(
                        "{} {} {} n={}: Average linear iterations per nonlinear iteration = {avg}",
                        g.case, g.precond, g.schur, g.n
                    );
                }
            }
            Ok(())
        }
    }
}

fn main() -> ExitCode {
    match run(Cli::parse()) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::FAILURE
        }
    }
}

