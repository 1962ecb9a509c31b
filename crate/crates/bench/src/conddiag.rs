//! Dense condition numbers of the preconditioned temperature Schur
//! complement for each Schur approximation.

use nalgebra::DMatrix;
use thermoporous::precond::schur_diag;
use thermoporous::{assemble_jacobian, assemble_schur_approx, CsrMatrix64, Model64, State64};

use crate::error::{Error, Result};

/// Largest grid for which the dense diagnostic is attempted.
pub const MAX_CELLS: usize = 2500;

#[derive(Debug, Clone, PartialEq)]
pub struct ConditionReport {
    /// `cond2(S_tilde_T^{-1} S)`.
    pub s_tilde_t: f64,
    /// `cond2(A_TT^{-1} S)`.
    pub att: f64,
    /// `cond2(S_diag^{-1} S)`.
    pub diag: f64,
    pub cond_att: f64,
    pub cond_s: f64,
}

pub fn to_dense(a: &CsrMatrix64) -> DMatrix<f64> {
    let mut m = DMatrix::zeros(a.n_rows(), a.n_cols());
    for i in 0..a.n_rows() {
        let (cols, vals) = a.row(i);
        for (&j, &v) in cols.iter().zip(vals) {
            m[(i, j)] += v;
        }
    }
    m
}

/// 2-norm condition number from the singular values; infinite when the
/// matrix is numerically singular.
pub fn cond2(m: &DMatrix<f64>) -> f64 {
    let sv = m.clone().svd(false, false).singular_values;
    let (max, min) = (sv.max(), sv.min());
    if !(min > 0.0) || !min.is_finite() {
        f64::INFINITY
    } else {
        max / min
    }
}

/// `cond2(approx^{-1} s)`, infinite if `approx` cannot be factored.
pub fn preconditioned_cond(approx: &DMatrix<f64>, s: &DMatrix<f64>) -> f64 {
    match approx.clone().lu().solve(s) {
        Some(m) if m.iter().all(|v| v.is_finite()) => cond2(&m),
        _ => f64::INFINITY,
    }
}

/// Exact Schur complement `A_TT - A_Tp A_pp^{-1} A_pT`, formed densely.
pub fn dense_schur(app: &DMatrix<f64>, apt: &DMatrix<f64>, atp: &DMatrix<f64>, att: &DMatrix<f64>) -> Result<DMatrix<f64>> {
    if apt.iter().all(|&v| v == 0.0) {
        return Ok(att.clone());
    }
    let x = app
        .clone()
        .lu()
        .solve(apt)
        .ok_or_else(|| Error::Config("pressure block is singular; the exact Schur complement is undefined".into()))?;
    Ok(att - atp * x)
}

/// Diagnostic for the Newton system of a step of length `dt` from `state`,
/// linearized at the initial guess `state`.
pub fn condition_diagnostic(model: &Model64, state: &State64, dt: f64) -> Result<ConditionReport> {
    let n = model.n_cells();
    if n > MAX_CELLS {
        return Err(Error::Config(format!("{n} cells is too many for the dense diagnostic (limit {MAX_CELLS})")));
    }
    let jac = assemble_jacobian(model, state, state, dt)?;
    let se = assemble_schur_approx(model, state, dt)?;
    let att = to_dense(&jac.att);
    let s = dense_schur(&to_dense(&jac.app), &to_dense(&jac.apt), &to_dense(&jac.atp), &att)?;
    let diag = match schur_diag(&jac) {
        Ok(d) => preconditioned_cond(&to_dense(&d), &s),
        Err(_) => f64::INFINITY,
    };
    Ok(ConditionReport {
        s_tilde_t: preconditioned_cond(&to_dense(&se), &s),
        att: preconditioned_cond(&att, &s),
        diag,
        cond_att: cond2(&att),
        cond_s: cond2(&s),
    })
}

impl ConditionReport {
    pub fn format(&self) -> String {
        format!(
            "cond(S_tilde_T^-1 S) = {:.6e}\ncond(A_TT^-1 S)      = {:.6e}\ncond(S_diag^-1 S)    = {:.6e}\ncond(A_TT)           = {:.6e}\ncond(S)              = {:.6e}\n",
            self.s_tilde_t, self.att, self.diag, self.cond_att, self.cond_s
        )
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn identity_has_unit_condition() {
        let i = DMatrix::<f64>::identity(5, 5);
        assert_eq!(cond2(&i), 1.0);
        assert_eq!(preconditioned_cond(&i, &i), 1.0);
    }

    #[test]
    fn singular_approximation_is_infinite() {
        let z = DMatrix::<f64>::zeros(3, 3);
        assert_eq!(preconditioned_cond(&z, &DMatrix::identity(3, 3)), f64::INFINITY);
        assert_eq!(cond2(&z), f64::INFINITY);
    }

    #[test]
    fn diagonal_condition() {
        let d = DMatrix::from_diagonal(&nalgebra::DVector::from_vec(vec![1.0, 4.0, 0.5]));
        assert!((cond2(&d) - 8.0).abs() < 1e-12);
    }
}
