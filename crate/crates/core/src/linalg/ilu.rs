use crate::error::{Error, Result};
use crate::linalg::{CsrMatrix, LinearOperator};
use crate::scalar::Real;

/// Zero-fill incomplete LU factorization.
///
/// `L` (unit diagonal, implicit) and `U` are stored together on the
/// sparsity pattern of the factored matrix.
#[derive(Debug, Clone)]
pub struct Ilu0Factor<T> {
    lu: CsrMatrix<T>,
    diag_pos: Vec<usize>,
}

impl<T: Real> Ilu0Factor<T> {
    /// Factors `a` in IKJ order, discarding every update that falls outside
    /// the pattern of `a`. Fails on a missing or zero pivot.
    pub fn factor(a: &CsrMatrix<T>) -> Result<Self> {
        if !a.is_square() {
            return Err(Error::DimensionMismatch { expected: a.n_rows(), found: a.n_cols(), context: "ILU(0)" });
        }
        let n = a.n_rows();
        let mut lu = a.clone();
        let row_ptr = a.row_ptr().to_vec();
        let col_idx = a.col_idx().to_vec();
        let mut diag_pos = Vec::with_capacity(n);
        for i in 0..n {
            match a.position(i, i) {
                Some(k) => diag_pos.push(k),
                None => return Err(Error::ZeroPivot { row: i }),
            }
        }

        // column -> storage position within the current row
        let mut slot = vec![usize::MAX; n];
        let vals = lu.values_mut();
        for i in 0..n {
            let (start, end) = (row_ptr[i], row_ptr[i + 1]);
            for k in start..end {
                slot[col_idx[k]] = k;
            }
            for k in start..end {
                let col = col_idx[k];
                if col >= i {
                    break;
                }
                let pivot = vals[diag_pos[col]];
                let l = vals[k] / pivot;
                vals[k] = l;
                for kk in diag_pos[col] + 1..row_ptr[col + 1] {
                    let j = col_idx[kk];
                    let s = slot[j];
                    if s != usize::MAX {
                        let u = vals[kk];
                        vals[s] -= l * u;
                    }
                }
            }
            let d = vals[diag_pos[i]];
            if d == T::zero() || !d.is_finite() {
                return Err(Error::ZeroPivot { row: i });
            }
            for k in start..end {
                slot[col_idx[k]] = usize::MAX;
            }
        }
        Ok(Ilu0Factor { lu, diag_pos })
    }

    pub fn dim(&self) -> usize {
        self.lu.n_rows()
    }

    /// Combined `L\U` storage.
    pub fn factors(&self) -> &CsrMatrix<T> {
        &self.lu
    }

    /// Forward then backward substitution.
    pub fn solve_into(&self, b: &[T], x: &mut [T]) {
        let n = self.dim();
        let rp = self.lu.row_ptr();
        let ci = self.lu.col_idx();
        let v = self.lu.values();
        for i in 0..n {
            let mut s = b[i];
            for k in rp[i]..self.diag_pos[i] {
                s -= v[k] * x[ci[k]];
            }
            x[i] = s;
        }
        for i in (0..n).rev() {
            let mut s = x[i];
            for k in self.diag_pos[i] + 1..rp[i + 1] {
                s -= v[k] * x[ci[k]];
            }
            x[i] = s / v[self.diag_pos[i]];
        }
    }

    pub fn solve(&self, b: &[T]) -> Result<Vec<T>> {
        if b.len() != self.dim() {
            return Err(Error::DimensionMismatch { expected: self.dim(), found: b.len(), context: "ILU(0) solve" });
        }
        let mut x = vec![T::zero(); self.dim()];
        self.solve_into(b, &mut x);
        Ok(x)
    }
}

impl<T: Real> LinearOperator<T> for Ilu0Factor<T> {
    fn dim(&self) -> usize {
        self.lu.n_rows()
    }

    fn apply(&self, x: &[T], y: &mut [T]) {
        self.solve_into(x, y);
    }
}
