//! Newton's method with backtracking line search and the time-stepping loop.

use std::time::Instant;

use crate::discretization::{assemble_jacobian, assemble_residual, assemble_schur_approx, Model, State};
use crate::error::{Error, Result};
use crate::linalg::{gmres, BlockVector, GmresConfig};
use crate::precond::{self, decoupling_operator, Decoupling, PreconditionerConfig, PreconditionerKind, SchurApprox};
use crate::scalar::Real;

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct NewtonConfig<T> {
    /// Stop once `||G|| <= rtol_f ||G_0||`.
    pub rtol_f: T,
    /// Stop once the accepted update satisfies `||dx|| <= rtol_step ||x||`.
    pub rtol_step: T,
    /// Absolute residual floor; an initial guess at or below it needs no
    /// iteration.
    pub atol_f: T,
    pub max_newton: usize,
    pub linesearch_max: usize,
    pub linesearch_factor: T,
    pub gmres_rtol: T,
    pub gmres_restart: usize,
    pub gmres_maxit: usize,
    pub precond: PreconditionerConfig<T>,
}

impl<T: Real> Default for NewtonConfig<T> {
    fn default() -> Self {
        NewtonConfig {
            rtol_f: T::lit(1e-8),
            rtol_step: T::lit(1e-8),
            atol_f: T::lit(1e-50),
            max_newton: 20,
            linesearch_max: 8,
            linesearch_factor: T::lit(0.5),
            gmres_rtol: T::lit(1e-5),
            gmres_restart: 30,
            gmres_maxit: 200,
            precond: PreconditionerConfig::default(),
        }
    }
}

impl<T: Real> NewtonConfig<T> {
    pub fn validate(&self) -> Result<()> {
        let unit = |x: T| x > T::zero() && x < T::one();
        if !(unit(self.rtol_f) && unit(self.rtol_step) && unit(self.gmres_rtol) && unit(self.linesearch_factor)) {
            return Err(Error::OutOfDomain("Newton and GMRES tolerances must lie in (0, 1)".into()));
        }
        if self.max_newton == 0 || self.gmres_restart == 0 || self.gmres_maxit == 0 {
            return Err(Error::OutOfDomain("iteration limits must be at least 1".into()));
        }
        self.precond.amg.validate()
    }
}

/// Outcome of the Newton iteration for one time step.
#[derive(Debug, Clone, PartialEq)]
pub struct NewtonStats<T> {
    pub converged: bool,
    pub iterations: usize,
    /// GMRES iterations of each Newton iteration.
    pub linear_iterations: Vec<usize>,
    /// `||G||` at the initial guess and after every accepted update.
    pub residual_history: Vec<T>,
    /// Iterations whose line search failed and took the full step.
    pub nonmonotone: usize,
    pub failure: Option<String>,
    /// Wall-clock seconds spent in assembly, preconditioner setup and GMRES.
    pub t_assembly: f64,
    pub t_setup: f64,
    pub t_solve: f64,
}

impl<T> NewtonStats<T> {
    fn new() -> Self {
        NewtonStats {
            converged: false,
            iterations: 0,
            linear_iterations: Vec::new(),
            residual_history: Vec::new(),
            nonmonotone: 0,
            failure: None,
            t_assembly: 0.0,
            t_setup: 0.0,
            t_solve: 0.0,
        }
    }

    pub fn total_linear(&self) -> usize {
        self.linear_iterations.iter().sum()
    }
}

fn block_norm<T: Real>(v: &BlockVector<T>) -> T {
    v.p.iter().chain(&v.t).map(|&x| x * x).sum::<T>().sqrt()
}

fn state_norm<T: Real>(s: &State<T>) -> T {
    s.p.iter().chain(&s.t).map(|&x| x * x).sum::<T>().sqrt()
}

/// Solves `G(x) = 0` for the state at the end of a step of length `dt`,
/// starting from `guess`. Linear-solver breakdowns and non-finite residuals
/// are reported through `converged = false` rather than as errors, so the
/// caller can cut the step.
pub fn newton_step<T: Real>(
    model: &Model<T>,
    old: &State<T>,
    guess: &State<T>,
    dt: T,
    cfg: &NewtonConfig<T>,
) -> Result<(State<T>, NewtonStats<T>)> {
    cfg.validate()?;
    let mut stats = NewtonStats::new();
    let mut x = guess.clone();

    let clock = Instant::now();
    let g = assemble_residual(model, &x, old, dt)?;
    stats.t_assembly += clock.elapsed().as_secs_f64();
    let g0 = block_norm(&g);
    stats.residual_history.push(g0);
    if !g0.is_finite() {
        stats.failure = Some("non-finite initial residual".into());
        return Ok((x, stats));
    }
    if g0 <= cfg.atol_f {
        stats.converged = true;
        return Ok((x, stats));
    }
    let mut gnorm = g0;
    let gmres_cfg = GmresConfig { rtol: cfg.gmres_rtol, restart: cfg.gmres_restart, max_iter: cfg.gmres_maxit };
    let needs_se = cfg.precond.kind == PreconditionerKind::Block && cfg.precond.schur == SchurApprox::STildeT;

    while stats.iterations < cfg.max_newton {
        stats.iterations += 1;
        let clock = Instant::now();
        let mut jac = assemble_jacobian(model, &x, old, dt)?;
        let s_e = if needs_se { Some(assemble_schur_approx(model, &x, dt)?) } else { None };
        if cfg.precond.kind == PreconditionerKind::Cpr && cfg.precond.decoupling != Decoupling::None {
            match decoupling_operator(&jac, cfg.precond.decoupling) {
                Ok(j) => jac = j,
                Err(e) => {
                    stats.failure = Some(format!("decoupling failed: {e}"));
                    return Ok((x, stats));
                }
            }
        }
        stats.t_assembly += clock.elapsed().as_secs_f64();

        let clock = Instant::now();
        let pc = precond::build(&cfg.precond, &jac, s_e.as_ref());
        stats.t_setup += clock.elapsed().as_secs_f64();
        let pc = match pc {
            Ok(pc) => pc,
            Err(e) => {
                stats.failure = Some(format!("preconditioner setup failed: {e}"));
                return Ok((x, stats));
            }
        };

        let clock = Instant::now();
        let b = jac.rhs().to_stacked();
        let sol = gmres(&jac, &pc, &b, &gmres_cfg)?;
        stats.t_solve += clock.elapsed().as_secs_f64();
        stats.linear_iterations.push(sol.iterations);
        if !sol.converged {
            stats.failure = Some(format!(
                "GMRES stopped after {} iterations at relative residual {:e}",
                sol.iterations, sol.relative_residual
            ));
            return Ok((x, stats));
        }
        let dx = BlockVector::from_stacked(&sol.x)?;

        // backtracking on the residual norm
        let clock = Instant::now();
        let mut alpha = T::one();
        let mut accepted: Option<(State<T>, T)> = None;
        let mut full: Option<(State<T>, T)> = None;
        for trial in 0..=cfg.linesearch_max {
            let x_try = x.updated(alpha, &dx);
            // constitutive laws outside their domain count as a failed trial
            let n_try = assemble_residual(model, &x_try, old, dt).map(|gt| block_norm(&gt)).unwrap_or(T::infinity());
            if trial == 0 {
                full = Some((x_try.clone(), n_try));
            }
            if n_try.is_finite() && n_try < gnorm {
                accepted = Some((x_try, n_try));
                break;
            }
            alpha *= cfg.linesearch_factor;
        }
        stats.t_assembly += clock.elapsed().as_secs_f64();
        let (x_new, n_new) = match accepted {
            Some(a) => a,
            None => match full {
                Some(f) if f.1.is_finite() => {
                    stats.nonmonotone += 1;
                    alpha = T::one();
                    f
                }
                _ => {
                    stats.failure = Some("line search found no admissible state".into());
                    return Ok((x, stats));
                }
            },
        };
        let step = alpha.abs() * block_norm(&dx);
        x = x_new;
        gnorm = n_new;
        stats.residual_history.push(gnorm);

        if gnorm <= cfg.rtol_f * g0 || gnorm <= cfg.atol_f || step <= cfg.rtol_step * state_norm(&x) {
            stats.converged = true;
            return Ok((x, stats));
        }
    }
    stats.failure = Some(format!("no convergence in {} Newton iterations", cfg.max_newton));
    Ok((x, stats))
}

/// Time-step schedule.
#[derive(Debug, Clone, PartialEq)]
pub enum TimePlan<T> {
    /// Prescribed step lengths. A failing step is subdivided by halving
    /// until the prescribed interval is covered.
    Fixed(Vec<T>),
    /// Steps adapted toward `target_newton` Newton iterations.
    Adaptive(TimeController<T>),
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct TimeController<T> {
    pub dt: T,
    pub t_end: T,
    pub dt_min: T,
    pub dt_max: T,
    pub grow: T,
    pub shrink: T,
    pub cut: T,
    pub target_newton: usize,
}

impl<T: Real> TimeController<T> {
    pub fn new(dt0: T, t_end: T, dt_min: T, dt_max: T) -> Self {
        TimeController {
            dt: dt0,
            t_end,
            dt_min,
            dt_max,
            grow: T::lit(1.5),
            shrink: T::lit(0.7),
            cut: T::lit(0.5),
            target_newton: 4,
        }
    }

    pub fn validate(&self) -> Result<()> {
        let ok = T::zero() < self.shrink
            && self.shrink < T::one()
            && T::one() < self.grow
            && T::zero() < self.cut
            && self.cut < T::one()
            && T::zero() < self.dt_min
            && self.dt_min <= self.dt_max
            && self.t_end > T::zero();
        if !ok {
            return Err(Error::OutOfDomain("inconsistent time controller settings".into()));
        }
        Ok(())
    }

    /// Step length after a converged step that took `newton` iterations.
    pub fn after_success(&self, newton: usize) -> T {
        let dt = if newton + 1 <= self.target_newton {
            self.dt * self.grow
        } else if newton >= self.target_newton + 2 {
            self.dt * self.shrink
        } else {
            self.dt
        };
        dt.max(self.dt_min).min(self.dt_max)
    }
}

/// One attempted time step.
#[derive(Debug, Clone, PartialEq)]
pub struct StepRecord {
    /// Index of the attempt, counting failed attempts.
    pub step: usize,
    /// Simulation time at the start of the attempt (s).
    pub time: f64,
    pub dt: f64,
    pub newton_iterations: usize,
    pub linear_iterations: usize,
    pub converged: bool,
    pub t_assembly: f64,
    pub t_setup: f64,
    pub t_solve: f64,
}

impl StepRecord {
    fn from_stats<T: Real>(step: usize, time: T, dt: T, s: &NewtonStats<T>) -> Self {
        StepRecord {
            step,
            time: time.to_f64_lossy(),
            dt: dt.to_f64_lossy(),
            newton_iterations: s.iterations,
            linear_iterations: s.total_linear(),
            converged: s.converged,
            t_assembly: s.t_assembly,
            t_setup: s.t_setup,
            t_solve: s.t_solve,
        }
    }
}

/// Aggregate counts over a set of step records.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SolverStats {
    pub steps: usize,
    pub failed_steps: usize,
    pub newton_iterations: usize,
    pub linear_iterations: usize,
}

impl SolverStats {
    pub fn from_records(records: &[StepRecord]) -> Self {
        SolverStats {
            steps: records.len(),
            failed_steps: records.iter().filter(|r| !r.converged).count(),
            newton_iterations: records.iter().map(|r| r.newton_iterations).sum(),
            linear_iterations: records.iter().map(|r| r.linear_iterations).sum(),
        }
    }

    /// Total linear iterations divided by total Newton iterations.
    pub fn average_linear_per_newton(&self) -> Option<f64> {
        if self.newton_iterations == 0 {
            None
        } else {
            Some(self.linear_iterations as f64 / self.newton_iterations as f64)
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct SimulationReport<T> {
    pub records: Vec<StepRecord>,
    pub final_state: State<T>,
    pub time: T,
}

impl<T> SimulationReport<T> {
    pub fn stats(&self) -> SolverStats {
        SolverStats::from_records(&self.records)
    }
}

/// Maximum number of halvings of one prescribed step.
const MAX_FIXED_CUTS: usize = 10;

/// Advances `initial` through `plan`, calling `observer` after every
/// attempted step (including failed attempts).
pub fn run_simulation<T, F>(
    model: &Model<T>,
    initial: &State<T>,
    plan: &TimePlan<T>,
    cfg: &NewtonConfig<T>,
    mut observer: F,
) -> Result<SimulationReport<T>>
where
    T: Real,
    F: FnMut(&StepRecord, &State<T>),
{
    initial.check(model.n_cells())?;
    cfg.validate()?;
    let mut state = initial.clone();
    let mut time = T::zero();
    let mut records = Vec::new();
    let mut attempt = |state: &State<T>, time: T, dt: T, records: &mut Vec<StepRecord>| -> Result<Option<State<T>>> {
        let (next, stats) = newton_step(model, state, state, dt, cfg)?;
        let rec = StepRecord::from_stats(records.len(), time, dt, &stats);
        observer(&rec, &next);
        records.push(rec);
        Ok(if stats.converged { Some(next) } else { None })
    };

    match plan {
        TimePlan::Fixed(steps) => {
            for &dt_plan in steps {
                if !(dt_plan > T::zero()) {
                    return Err(Error::OutOfDomain(format!("non-positive planned step {dt_plan}")));
                }
                let end = time + dt_plan;
                let mut dt = dt_plan;
                let mut cuts = 0;
                while time < end {
                    dt = dt.min(end - time);
                    match attempt(&state, time, dt, &mut records)? {
                        Some(next) => {
                            state = next;
                            time += dt;
                            if end - time <= T::epsilon() * end.abs() {
                                time = end;
                            }
                        }
                        None => {
                            cuts += 1;
                            dt *= T::lit(0.5);
                            if cuts > MAX_FIXED_CUTS {
                                return Err(Error::TimeStepTooSmall {
                                    dt: dt.to_f64_lossy(),
                                    dt_min: (dt_plan * T::lit(0.5f64.powi(MAX_FIXED_CUTS as i32))).to_f64_lossy(),
                                });
                            }
                        }
                    }
                }
            }
        }
        TimePlan::Adaptive(ctrl) => {
            ctrl.validate()?;
            let mut ctrl = *ctrl;
            ctrl.dt = ctrl.dt.max(ctrl.dt_min).min(ctrl.dt_max);
            while time < ctrl.t_end {
                let remaining = ctrl.t_end - time;
                let dt = ctrl.dt.min(remaining);
                match attempt(&state, time, dt, &mut records)? {
                    Some(next) => {
                        state = next;
                        time += dt;
                        if ctrl.t_end - time <= T::epsilon() * ctrl.t_end {
                            time = ctrl.t_end;
                        }
                        let newton = records.last().map(|r| r.newton_iterations).unwrap_or(0);
                        // a truncated final step does not shrink the controller
                        if dt == ctrl.dt {
                            ctrl.dt = ctrl.after_success(newton);
                        }
                    }
                    None => {
                        ctrl.dt = dt * ctrl.cut;
                        if ctrl.dt < ctrl.dt_min {
                            return Err(Error::TimeStepTooSmall { dt: ctrl.dt.to_f64_lossy(), dt_min: ctrl.dt_min.to_f64_lossy() });
                        }
                    }
                }
            }
        }
    }
    Ok(SimulationReport { records, final_state: state, time })
}
