//! Running cases and sweeps into metrics records.

use std::path::Path;

use thermoporous::{newton_step, run_simulation, PreconditionerConfig64, PreconditionerKind, SimulationReport, State64, TimePlan64};

use crate::config::CaseSpec;
use crate::error::Result;
use crate::metrics::MetricsRecord;

/// Label of the secondary preconditioner option written to the `schur`
/// column: the Schur approximation for block, the decoupling for CPR.
pub fn variant_label(p: &PreconditionerConfig64) -> String {
    match p.kind {
        PreconditionerKind::Block => p.schur.to_string(),
        PreconditionerKind::Cpr => p.decoupling.to_string(),
    }
}

pub fn run_case<F>(spec: &CaseSpec, mut on_step: F) -> Result<(Vec<MetricsRecord>, SimulationReport<f64>)>
where
    F: FnMut(&MetricsRecord),
{
    let model = spec.build_model()?;
    let init = spec.initial_state();
    let precond = spec.solver.precond.kind.to_string();
    let variant = variant_label(&spec.solver.precond);
    let n = spec.dims[0];
    let mut records = Vec::new();
    let report = run_simulation(&model, &init, &spec.plan, &spec.solver, |r, _| {
        let m = MetricsRecord::from_step(&spec.name, &precond, &variant, n, r);
        on_step(&m);
        records.push(m);
    })?;
    Ok((records, report))
}

/// Length of the first planned step.
pub fn first_dt(plan: &TimePlan64) -> f64 {
    match plan {
        TimePlan64::Fixed(steps) => steps[0],
        TimePlan64::Adaptive(c) => c.dt,
    }
}

/// Advances `warmup` steps of the case's plan (fixed plans only use their
/// listed steps; adaptive plans repeat `dt0`) and returns the state and the
/// length of the next step.
pub fn warm_up(spec: &CaseSpec, warmup: usize) -> Result<(State64, f64)> {
    let model = spec.build_model()?;
    let mut state = spec.initial_state();
    let dts: Vec<f64> = match &spec.plan {
        TimePlan64::Fixed(steps) => steps.iter().copied().cycle().take(warmup + 1).collect(),
        TimePlan64::Adaptive(c) => vec![c.dt; warmup + 1],
    };
    for &dt in &dts[..warmup] {
        let (next, stats) = newton_step(&model, &state, &state, dt, &spec.solver)?;
        if !stats.converged {
            return Err(crate::error::Error::Config(format!(
                "warm-up step did not converge: {}",
                stats.failure.unwrap_or_default()
            )));
        }
        state = next;
    }
    Ok((state, dts[warmup]))
}

/// Writes the Jacobian blocks of the first Newton system of the case.
pub fn dump_first_system(spec: &CaseSpec, dir: &Path) -> Result<()> {
    let model = spec.build_model()?;
    let s = spec.initial_state();
    std::fs::create_dir_all(dir).map_err(crate::error::io_err(dir))?;
    let jac = thermoporous::assemble_jacobian(&model, &s, &s, first_dt(&spec.plan))?;
    jac.dump_matrix_market(dir)?;
    Ok(())
}
