//! Sparse matrices, direct and incomplete factorizations, and restarted GMRES.

mod csr;
mod dense;
mod gmres;
mod ilu;
pub mod matrix_market;

pub use csr::CsrMatrix;
pub use dense::DenseLu;
pub use gmres::{gmres, GmresConfig, GmresResult};
pub use ilu::Ilu0Factor;

use crate::error::{Error, Result};
use crate::scalar::Real;

/// Anything that maps a vector to a vector linearly: matrices, block
/// operators and preconditioners alike.
pub trait LinearOperator<T: Real> {
    fn dim(&self) -> usize;

    /// Writes `A x` into `y`. Both slices have length `dim()`.
    fn apply(&self, x: &[T], y: &mut [T]);

    fn apply_vec(&self, x: &[T]) -> Vec<T> {
        let mut y = vec![T::zero(); self.dim()];
        self.apply(x, &mut y);
        y
    }
}

impl<T: Real, L: LinearOperator<T> + ?Sized> LinearOperator<T> for &L {
    fn dim(&self) -> usize {
        (**self).dim()
    }

    fn apply(&self, x: &[T], y: &mut [T]) {
        (**self).apply(x, y)
    }
}

impl<T: Real, L: LinearOperator<T> + ?Sized> LinearOperator<T> for Box<L> {
    fn dim(&self) -> usize {
        (**self).dim()
    }

    fn apply(&self, x: &[T], y: &mut [T]) {
        (**self).apply(x, y)
    }
}

/// The identity map on vectors of a fixed length.
#[derive(Debug, Clone, Copy)]
pub struct Identity(pub usize);

impl<T: Real> LinearOperator<T> for Identity {
    fn dim(&self) -> usize {
        self.0
    }

    fn apply(&self, x: &[T], y: &mut [T]) {
        y.copy_from_slice(x);
    }
}

/// Pressure and temperature parts of a vector over cells.
#[derive(Debug, Clone, PartialEq)]
pub struct BlockVector<T> {
    pub p: Vec<T>,
    pub t: Vec<T>,
}

impl<T: Real> BlockVector<T> {
    pub fn zeros(n: usize) -> Self {
        BlockVector { p: vec![T::zero(); n], t: vec![T::zero(); n] }
    }

    pub fn new(p: Vec<T>, t: Vec<T>) -> Result<Self> {
        if p.len() != t.len() {
            return Err(Error::DimensionMismatch {
                expected: p.len(),
                found: t.len(),
                context: "block vector parts",
            });
        }
        Ok(BlockVector { p, t })
    }

    pub fn n_cells(&self) -> usize {
        self.p.len()
    }

    /// Splits a stacked `[p; T]` vector.
    pub fn from_stacked(x: &[T]) -> Result<Self> {
        if x.len() % 2 != 0 {
            return Err(Error::DimensionMismatch {
                expected: x.len() + 1,
                found: x.len(),
                context: "stacked block vector",
            });
        }
        let n = x.len() / 2;
        Ok(BlockVector { p: x[..n].to_vec(), t: x[n..].to_vec() })
    }

    pub fn to_stacked(&self) -> Vec<T> {
        let mut v = Vec::with_capacity(2 * self.p.len());
        v.extend_from_slice(&self.p);
        v.extend_from_slice(&self.t);
        v
    }
}
