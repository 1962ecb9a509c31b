use std::fmt;

/// Errors raised by grid construction, constitutive laws, assembly and the
/// linear and nonlinear solvers.
#[derive(Debug, Clone, PartialEq)]
pub enum Error {
    /// Grid extents, lengths or axis count are invalid.
    InvalidGrid(String),
    /// A cell index lies outside the grid.
    CellOutOfRange { cell: usize, n_cells: usize },
    /// A constitutive correlation was evaluated outside of its domain.
    OutOfDomain(String),
    /// Peaceman equivalent radius does not exceed the well radius.
    IllPosedWell { r_e: f64, r_w: f64 },
    /// Operand sizes do not agree.
    DimensionMismatch { expected: usize, found: usize, context: &'static str },
    /// Zero pivot met during an incomplete or dense factorization.
    ZeroPivot { row: usize },
    /// Algebraic multigrid setup could not produce a usable hierarchy.
    AmgSetup(String),
    /// A diagonal or column-sum entry needed for decoupling vanished.
    SingularDecoupling { index: usize },
    /// A required operand was not supplied.
    MissingInput(&'static str),
    /// Newton iteration failed; the caller is expected to cut the time step.
    NewtonFailure(String),
    /// The time step dropped below its lower bound.
    TimeStepTooSmall { dt: f64, dt_min: f64 },
    /// Malformed Matrix Market content.
    MatrixMarket(String),
    Io(String),
}

impl fmt::Display for Error {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Error::InvalidGrid(msg) => write!(f, "invalid grid: {msg}"),
            Error::CellOutOfRange { cell, n_cells } => {
                write!(f, "cell index {cell} out of range for grid with {n_cells} cells")
            }
            Error::OutOfDomain(msg) => write!(f, "correlation evaluated out of domain: {msg}"),
            Error::IllPosedWell { r_e, r_w } => write!(
                f,
                "ill-posed well index: equivalent radius {r_e} does not exceed well radius {r_w}"
            ),
            Error::DimensionMismatch { expected, found, context } => {
                write!(f, "dimension mismatch in {context}: expected {expected}, found {found}")
            }
            Error::ZeroPivot { row } => write!(f, "zero pivot in row {row}"),
            Error::AmgSetup(msg) => write!(f, "AMG setup failed: {msg}"),
            Error::SingularDecoupling { index } => {
                write!(f, "decoupling operator singular at index {index}")
            }
            Error::MissingInput(what) => write!(f, "missing input: {what}"),
            Error::NewtonFailure(msg) => write!(f, "Newton iteration failed: {msg}"),
            Error::TimeStepTooSmall { dt, dt_min } => {
                write!(f, "time step {dt:e} s fell below minimum {dt_min:e} s")
            }
            Error::MatrixMarket(msg) => write!(f, "Matrix Market: {msg}"),
            Error::Io(msg) => write!(f, "I/O error: {msg}"),
        }
    }
}

impl std::error::Error for Error {}

impl From<std::io::Error> for Error {
    fn from(e: std::io::Error) -> Self {
        Error::Io(e.to_string())
    }
}

pub type Result<T> = std::result::Result<T, Error>;
