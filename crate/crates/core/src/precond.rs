//! CPR and block-factorization preconditioners for the coupled
//! pressure-temperature Jacobian.
//!
//! Both act on stacked `[p; T]` vectors and are fixed linear maps, so they
//! can be used as right preconditioners for GMRES.

use std::fmt;
use std::str::FromStr;

use crate::amg::{AmgHierarchy, AmgOptions};
use crate::discretization::{BlockJacobian, Layout};
use crate::error::{Error, Result};
use crate::linalg::{CsrMatrix, Ilu0Factor, LinearOperator};
use crate::scalar::Real;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum PreconditionerKind {
    Cpr,
    Block,
}

/// Sparse approximation of the temperature Schur complement used by the
/// block preconditioner.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum SchurApprox {
    /// Accumulation, advection, conduction, heater and producer terms.
    STildeT,
    /// The temperature block itself.
    Att,
    /// `A_TT - A_Tp diag(A_pp)^{-1} A_pT`.
    Diag,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Decoupling {
    None,
    QuasiImpes,
    TrueImpes,
}

impl fmt::Display for PreconditionerKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            PreconditionerKind::Cpr => "cpr",
            PreconditionerKind::Block => "block",
        })
    }
}

impl FromStr for PreconditionerKind {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "cpr" => Ok(PreconditionerKind::Cpr),
            "block" => Ok(PreconditionerKind::Block),
            _ => Err(Error::OutOfDomain(format!("unknown preconditioner '{s}' (expected cpr or block)"))),
        }
    }
}

impl fmt::Display for SchurApprox {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            SchurApprox::STildeT => "s_tilde_T",
            SchurApprox::Att => "s_att",
            SchurApprox::Diag => "s_diag",
        })
    }
}

impl FromStr for SchurApprox {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "s_tilde_T" => Ok(SchurApprox::STildeT),
            "s_att" => Ok(SchurApprox::Att),
            "s_diag" => Ok(SchurApprox::Diag),
            _ => Err(Error::OutOfDomain(format!("unknown Schur approximation '{s}' (expected s_tilde_T, s_att or s_diag)"))),
        }
    }
}

impl fmt::Display for Decoupling {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Decoupling::None => "none",
            Decoupling::QuasiImpes => "quasi_impes",
            Decoupling::TrueImpes => "true_impes",
        })
    }
}

impl FromStr for Decoupling {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "none" => Ok(Decoupling::None),
            "quasi_impes" => Ok(Decoupling::QuasiImpes),
            "true_impes" => Ok(Decoupling::TrueImpes),
            _ => Err(Error::OutOfDomain(format!("unknown decoupling '{s}' (expected none, quasi_impes or true_impes)"))),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct PreconditionerConfig<T> {
    pub kind: PreconditionerKind,
    /// Only consulted by the block preconditioner.
    pub schur: SchurApprox,
    /// Only consulted by CPR.
    pub decoupling: Decoupling,
    pub amg: AmgOptions<T>,
}

impl<T: Real> PreconditionerConfig<T> {
    pub fn block(schur: SchurApprox) -> Self {
        PreconditionerConfig { kind: PreconditionerKind::Block, schur, decoupling: Decoupling::None, amg: AmgOptions::default() }
    }

    pub fn cpr() -> Self {
        PreconditionerConfig {
            kind: PreconditionerKind::Cpr,
            schur: SchurApprox::STildeT,
            decoupling: Decoupling::None,
            amg: AmgOptions::default(),
        }
    }
}

impl<T: Real> Default for PreconditionerConfig<T> {
    fn default() -> Self {
        Self::block(SchurApprox::STildeT)
    }
}

type Inner<T> = Box<dyn LinearOperator<T> + Send + Sync>;

/// Block-triangular factorization preconditioner:
/// `x_p = A_pp^{-1} b_p`, `d_T = S^{-1}(b_T - A_Tp x_p)`,
/// `d_p = A_pp^{-1}(b_p - A_pT d_T)`.
pub struct BlockPreconditioner<T> {
    apt: CsrMatrix<T>,
    atp: CsrMatrix<T>,
    app_inv: Inner<T>,
    schur_inv: Inner<T>,
}

impl<T: Real> BlockPreconditioner<T> {
    /// Assembles the preconditioner from arbitrary inner solvers.
    pub fn from_parts(apt: CsrMatrix<T>, atp: CsrMatrix<T>, app_inv: Inner<T>, schur_inv: Inner<T>) -> Result<Self> {
        let n = apt.n_rows();
        for (d, ctx) in [(app_inv.dim(), "pressure inner solver"), (schur_inv.dim(), "Schur inner solver"), (atp.n_rows(), "ATp")] {
            if d != n {
                return Err(Error::DimensionMismatch { expected: n, found: d, context: ctx });
            }
        }
        Ok(BlockPreconditioner { apt, atp, app_inv, schur_inv })
    }

    pub fn n_cells(&self) -> usize {
        self.apt.n_rows()
    }

    pub fn apply_block(&self, bp: &[T], bt: &[T], dp: &mut [T], dt: &mut [T]) {
        let n = self.n_cells();
        let mut xp = vec![T::zero(); n];
        self.app_inv.apply(bp, &mut xp);
        let mut rt = bt.to_vec();
        self.atp.mul_sub_into(&xp, &mut rt);
        self.schur_inv.apply(&rt, dt);
        let mut rp = bp.to_vec();
        self.apt.mul_sub_into(dt, &mut rp);
        self.app_inv.apply(&rp, dp);
    }
}

impl<T: Real> LinearOperator<T> for BlockPreconditioner<T> {
    fn dim(&self) -> usize {
        2 * self.n_cells()
    }

    fn apply(&self, x: &[T], y: &mut [T]) {
        let n = self.n_cells();
        let (bp, bt) = x.split_at(n);
        let (dp, dt) = y.split_at_mut(n);
        self.apply_block(bp, bt, dp, dt);
    }
}

/// Two-stage multiplicative preconditioner
/// `M^{-1} = M_2^{-1}(I - A M_1^{-1}) + M_1^{-1}` with
/// `M_1^{-1} = [[A_pp^{-1}, 0], [0, 0]]` and `M_2` acting on the full
/// system in cell-interleaved ordering.
pub struct CprPreconditioner<T> {
    jac: BlockJacobian<T>,
    app_inv: Inner<T>,
    stage2: Inner<T>,
}

impl<T: Real> CprPreconditioner<T> {
    /// `stage2` must act on interleaved `[p_0, T_0, p_1, T_1, ...]` vectors.
    pub fn from_parts(jac: BlockJacobian<T>, app_inv: Inner<T>, stage2: Inner<T>) -> Result<Self> {
        let n = jac.n_cells();
        if app_inv.dim() != n {
            return Err(Error::DimensionMismatch { expected: n, found: app_inv.dim(), context: "CPR pressure solver" });
        }
        if stage2.dim() != 2 * n {
            return Err(Error::DimensionMismatch { expected: 2 * n, found: stage2.dim(), context: "CPR second stage" });
        }
        Ok(CprPreconditioner { jac, app_inv, stage2 })
    }

    pub fn n_cells(&self) -> usize {
        self.jac.n_cells()
    }
}

impl<T: Real> LinearOperator<T> for CprPreconditioner<T> {
    fn dim(&self) -> usize {
        2 * self.n_cells()
    }

    fn apply(&self, x: &[T], y: &mut [T]) {
        let n = self.n_cells();
        let (rp, rt) = x.split_at(n);
        let mut x1 = vec![T::zero(); n];
        self.app_inv.apply(rp, &mut x1);

        // interleaved residual of the first stage
        let mut r2 = vec![T::zero(); 2 * n];
        let mut ap = vec![T::zero(); n];
        self.jac.app.mul_into(&x1, &mut ap);
        let mut tp = vec![T::zero(); n];
        self.jac.atp.mul_into(&x1, &mut tp);
        for i in 0..n {
            r2[2 * i] = rp[i] - ap[i];
            r2[2 * i + 1] = rt[i] - tp[i];
        }
        let mut x2 = vec![T::zero(); 2 * n];
        self.stage2.apply(&r2, &mut x2);
        for i in 0..n {
            y[i] = x1[i] + x2[2 * i];
            y[n + i] = x2[2 * i + 1];
        }
    }
}

/// A built preconditioner of either kind.
pub enum Preconditioner<T> {
    Block(BlockPreconditioner<T>),
    Cpr(CprPreconditioner<T>),
}

impl<T: Real> LinearOperator<T> for Preconditioner<T> {
    fn dim(&self) -> usize {
        match self {
            Preconditioner::Block(b) => b.dim(),
            Preconditioner::Cpr(c) => c.dim(),
        }
    }

    fn apply(&self, x: &[T], y: &mut [T]) {
        match self {
            Preconditioner::Block(b) => b.apply(x, y),
            Preconditioner::Cpr(c) => c.apply(x, y),
        }
    }
}

/// `A_TT - A_Tp diag(A_pp)^{-1} A_pT`, assembled sparsely.
pub fn schur_diag<T: Real>(jac: &BlockJacobian<T>) -> Result<CsrMatrix<T>> {
    let d = jac.app.diagonal();
    if let Some(i) = d.iter().position(|&v| v == T::zero()) {
        return Err(Error::SingularDecoupling { index: i });
    }
    let inv: Vec<T> = d.iter().map(|&v| T::one() / v).collect();
    let coupling = jac.atp.scale_cols(&inv).matmul(&jac.apt)?;
    jac.att.add_scaled(T::one(), &coupling, -T::one())
}

/// The Schur matrix selected by `schur`; `s_e` is required for
/// [`SchurApprox::STildeT`].
pub fn schur_matrix<T: Real>(schur: SchurApprox, jac: &BlockJacobian<T>, s_e: Option<&CsrMatrix<T>>) -> Result<CsrMatrix<T>> {
    match schur {
        SchurApprox::STildeT => s_e.cloned().ok_or(Error::MissingInput("S_e matrix for the s_tilde_T Schur approximation")),
        SchurApprox::Att => Ok(jac.att.clone()),
        SchurApprox::Diag => schur_diag(jac),
    }
}

/// Builds the preconditioner for one Newton system. `jac` must already be
/// decoupled if CPR decoupling is requested (see [`decoupling_operator`]).
pub fn build<T: Real>(config: &PreconditionerConfig<T>, jac: &BlockJacobian<T>, s_e: Option<&CsrMatrix<T>>) -> Result<Preconditioner<T>> {
    let app_inv = AmgHierarchy::build(&jac.app, config.amg)?;
    match config.kind {
        PreconditionerKind::Block => {
            let s = schur_matrix(config.schur, jac, s_e)?;
            let schur_inv = AmgHierarchy::build(&s, config.amg)?;
            Ok(Preconditioner::Block(BlockPreconditioner::from_parts(
                jac.apt.clone(),
                jac.atp.clone(),
                Box::new(app_inv),
                Box::new(schur_inv),
            )?))
        }
        PreconditionerKind::Cpr => {
            let ilu = Ilu0Factor::factor(&jac.to_csr(Layout::Interleaved))?;
            Ok(Preconditioner::Cpr(CprPreconditioner::from_parts(jac.clone(), Box::new(app_inv), Box::new(ilu))?))
        }
    }
}

/// Left-multiplies the block system by `[[I, -D], [0, I]]` with the
/// diagonal `D` of the chosen decoupling.
pub fn decoupling_operator<T: Real>(jac: &BlockJacobian<T>, mode: Decoupling) -> Result<BlockJacobian<T>> {
    let d: Vec<T> = match mode {
        Decoupling::None => return Ok(jac.clone()),
        Decoupling::QuasiImpes => {
            let num = jac.apt.diagonal();
            let den = jac.att.diagonal();
            ratio(&num, &den)?
        }
        Decoupling::TrueImpes => {
            let num = jac.apt.column_sums();
            let den = jac.att.column_sums();
            ratio(&num, &den)?
        }
    };
    let app = jac.app.add_scaled(T::one(), &jac.atp.scale_rows(&d), -T::one())?;
    let mut apt = jac.apt.add_scaled(T::one(), &jac.att.scale_rows(&d), -T::one())?;
    if mode == Decoupling::QuasiImpes {
        for i in 0..apt.n_rows() {
            if let Some(k) = apt.position(i, i) {
                apt.values_mut()[k] = T::zero();
            }
        }
    }
    let bp = jac.bp.iter().zip(&jac.bt).zip(&d).map(|((&p, &t), &di)| p - di * t).collect();
    BlockJacobian::new(app, apt, jac.atp.clone(), jac.att.clone(), bp, jac.bt.clone())
}

fn ratio<T: Real>(num: &[T], den: &[T]) -> Result<Vec<T>> {
    num.iter()
        .zip(den)
        .enumerate()
        .map(|(i, (&a, &b))| if b == T::zero() { Err(Error::SingularDecoupling { index: i }) } else { Ok(a / b) })
        .collect()
}
