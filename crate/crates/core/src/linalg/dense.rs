use crate::error::{Error, Result};
use crate::linalg::{CsrMatrix, LinearOperator};
use crate::scalar::Real;

/// Dense LU factorization with scaled partial pivoting, `P A = L U`.
///
/// Serves as the coarsest-level multigrid solver and as an exact inner
/// solver when checking preconditioners against their exact limits.
#[derive(Debug, Clone)]
pub struct DenseLu<T> {
    n: usize,
    lu: Vec<T>,
    perm: Vec<usize>,
}

impl<T: Real> DenseLu<T> {
    pub fn factor_rows(rows: &[Vec<T>]) -> Result<Self> {
        let n = rows.len();
        let mut lu = Vec::with_capacity(n * n);
        for r in rows {
            if r.len() != n {
                return Err(Error::DimensionMismatch { expected: n, found: r.len(), context: "dense LU row" });
            }
            lu.extend_from_slice(r);
        }
        Self::factor_in_place(n, lu)
    }

    pub fn from_csr(a: &CsrMatrix<T>) -> Result<Self> {
        if !a.is_square() {
            return Err(Error::DimensionMismatch { expected: a.n_rows(), found: a.n_cols(), context: "dense LU" });
        }
        let n = a.n_rows();
        let mut lu = vec![T::zero(); n * n];
        for i in 0..n {
            let (cols, vals) = a.row(i);
            for (&j, &v) in cols.iter().zip(vals) {
                lu[i * n + j] += v;
            }
        }
        Self::factor_in_place(n, lu)
    }

    fn factor_in_place(n: usize, mut lu: Vec<T>) -> Result<Self> {
        let mut perm: Vec<usize> = (0..n).collect();
        // pivots are compared relative to their row's largest entry, so rows
        // carrying different units (mass and energy balances) do not skew
        // the choice
        let mut row_scale: Vec<T> = (0..n)
            .map(|i| lu[i * n..(i + 1) * n].iter().fold(T::zero(), |m, v| m.max(v.abs())))
            .collect();
        if let Some(i) = row_scale.iter().position(|&s| !(s > T::zero())) {
            return Err(Error::ZeroPivot { row: i });
        }
        let tiny = T::epsilon() * T::from_count(n.max(1));
        for k in 0..n {
            let (piv, pval) = (k..n)
                .map(|i| (i, lu[i * n + k].abs() / row_scale[i]))
                .fold((k, -T::one()), |best, cur| if cur.1 > best.1 { cur } else { best });
            if !(pval > tiny) {
                return Err(Error::ZeroPivot { row: k });
            }
            if piv != k {
                for j in 0..n {
                    lu.swap(k * n + j, piv * n + j);
                }
                perm.swap(k, piv);
                row_scale.swap(k, piv);
            }
            let d = lu[k * n + k];
            for i in k + 1..n {
                let l = lu[i * n + k] / d;
                lu[i * n + k] = l;
                if l != T::zero() {
                    for j in k + 1..n {
                        let u = lu[k * n + j];
                        lu[i * n + j] -= l * u;
                    }
                }
            }
        }
        Ok(DenseLu { n, lu, perm })
    }

    pub fn dim(&self) -> usize {
        self.n
    }

    pub fn solve_into(&self, b: &[T], x: &mut [T]) {
        let n = self.n;
        for i in 0..n {
            x[i] = b[self.perm[i]];
        }
        for i in 0..n {
            let mut s = x[i];
            for j in 0..i {
                s -= self.lu[i * n + j] * x[j];
            }
            x[i] = s;
        }
        for i in (0..n).rev() {
            let mut s = x[i];
            for j in i + 1..n {
                s -= self.lu[i * n + j] * x[j];
            }
            x[i] = s / self.lu[i * n + i];
        }
    }

    pub fn solve(&self, b: &[T]) -> Vec<T> {
        let mut x = vec![T::zero(); self.n];
        self.solve_into(b, &mut x);
        x
    }
}

impl<T: Real> LinearOperator<T> for DenseLu<T> {
    fn dim(&self) -> usize {
        self.n
    }

    fn apply(&self, x: &[T], y: &mut [T]) {
        self.solve_into(x, y);
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;

    #[test]
    fn solves_with_pivoting() {
        let lu = DenseLu::factor_rows(&[vec![0.0, 2.0, 1.0], vec![1.0, 1.0, 0.0], vec![3.0, 0.0, 1.0]]).unwrap();
        let x = lu.solve(&[3.0, 2.0, 4.0]);
        for (xi, e) in x.iter().zip([1.0, 1.0, 1.0]) {
            assert_relative_eq!(*xi, e, epsilon = 1e-14);
        }
    }

    #[test]
    fn singular_matrix_reports_pivot() {
        let err = DenseLu::factor_rows(&[vec![1.0, 2.0], vec![2.0, 4.0]]).unwrap_err();
        assert_eq!(err, Error::ZeroPivot { row: 1 });
    }
}
