//! Fully implicit simulation of non-isothermal single-phase flow of a heavy
//! oil in porous media, with the linear-solver machinery needed to compare
//! a CPR preconditioner against a block-factorization preconditioner built
//! on a sparse temperature Schur complement approximation.
//!
//! Every numeric routine is generic over [`Real`] (`f32` or `f64`); the
//! aliases at the crate root fix the scalar to `f64` for everyday use.

pub mod amg;
pub mod discretization;
pub mod error;
pub mod linalg;
pub mod mesh;
pub mod physics;
pub mod precond;
pub mod scalar;
pub mod solver;

pub use amg::{AmgHierarchy, AmgOptions};
pub use discretization::{
    assemble_jacobian, assemble_residual, assemble_schur_approx, BlockJacobian, Layout, Model, State, STANDARD_GRAVITY,
};
pub use error::{Error, Result};
pub use linalg::{gmres, BlockVector, CsrMatrix, DenseLu, GmresConfig, GmresResult, Ilu0Factor, LinearOperator};
pub use mesh::{build_grid, Grid};
pub use physics::{FluidModel, RateMode, RockModel, SourceKind, SourceTerm, WellGeometry};
pub use precond::{Decoupling, Preconditioner, PreconditionerConfig, PreconditionerKind, SchurApprox};
pub use scalar::Real;
pub use solver::{
    newton_step, run_simulation, NewtonConfig, NewtonStats, SimulationReport, SolverStats, StepRecord, TimeController,
    TimePlan,
};

pub type Grid64 = Grid<f64>;
pub type State64 = State<f64>;
pub type Model64 = Model<f64>;
pub type FluidModel64 = FluidModel<f64>;
pub type RockModel64 = RockModel<f64>;
pub type SourceTerm64 = SourceTerm<f64>;
pub type CsrMatrix64 = CsrMatrix<f64>;
pub type BlockJacobian64 = BlockJacobian<f64>;
pub type NewtonConfig64 = NewtonConfig<f64>;
pub type PreconditionerConfig64 = PreconditionerConfig<f64>;
pub type TimePlan64 = TimePlan<f64>;

pub type Grid32 = Grid<f32>;
pub type State32 = State<f32>;
pub type Model32 = Model<f32>;
pub type CsrMatrix32 = CsrMatrix<f32>;
