use crate::error::{Error, Result};
use crate::linalg::LinearOperator;
use crate::scalar::{axpy, dot, norm2, Real};

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct GmresConfig<T> {
    /// Relative tolerance on `||b - A x|| / ||b||`.
    pub rtol: T,
    /// Krylov subspace dimension before restarting.
    pub restart: usize,
    /// Cap on the total number of inner iterations across restarts.
    pub max_iter: usize,
}

impl<T: Real> Default for GmresConfig<T> {
    fn default() -> Self {
        GmresConfig { rtol: T::lit(1e-5), restart: 30, max_iter: 200 }
    }
}

#[derive(Debug, Clone)]
pub struct GmresResult<T> {
    pub x: Vec<T>,
    /// Total inner (Arnoldi) iterations.
    pub iterations: usize,
    pub converged: bool,
    /// Explicitly recomputed `||b - A x|| / ||b||` for the returned iterate.
    pub relative_residual: T,
    /// Arnoldi residual estimate after each inner iteration, relative to
    /// `||b||`. Restarts start a new, independently monotone run.
    pub history: Vec<T>,
    /// Iteration indices at which a restart cycle began.
    pub restarts: Vec<usize>,
}

/// Restarted GMRES with right preconditioning, starting from `x = 0`.
///
/// The Krylov space is built on `A M^{-1}`; the solution is mapped back
/// through `M^{-1}` at the end of every cycle, so the reported residual is
/// that of the original, unpreconditioned system.
pub fn gmres<T, A, M>(op: &A, precond: &M, b: &[T], cfg: &GmresConfig<T>) -> Result<GmresResult<T>>
where
    T: Real,
    A: LinearOperator<T> + ?Sized,
    M: LinearOperator<T> + ?Sized,
{
    let n = op.dim();
    if b.len() != n {
        return Err(Error::DimensionMismatch { expected: n, found: b.len(), context: "GMRES right-hand side" });
    }
    if precond.dim() != n {
        return Err(Error::DimensionMismatch { expected: n, found: precond.dim(), context: "GMRES preconditioner" });
    }
    let restart = cfg.restart.max(1);
    let mut x = vec![T::zero(); n];
    let bnorm = norm2(b);
    let mut out = GmresResult {
        x: Vec::new(),
        iterations: 0,
        converged: false,
        relative_residual: T::zero(),
        history: Vec::new(),
        restarts: Vec::new(),
    };
    if bnorm == T::zero() {
        out.x = x;
        out.converged = true;
        return Ok(out);
    }
    if !bnorm.is_finite() {
        return Err(Error::NewtonFailure("non-finite GMRES right-hand side".into()));
    }
    let target = cfg.rtol * bnorm;

    let mut r = b.to_vec();
    let mut rnorm = bnorm;
    let mut basis: Vec<Vec<T>> = Vec::with_capacity(restart + 1);
    // Hessenberg columns, each of length restart + 1
    let mut hess: Vec<Vec<T>> = Vec::with_capacity(restart);
    let mut cs = vec![T::zero(); restart];
    let mut sn = vec![T::zero(); restart];
    let mut g = vec![T::zero(); restart + 1];
    let mut z = vec![T::zero(); n];
    let mut w = vec![T::zero(); n];

    loop {
        if rnorm <= target {
            out.converged = true;
            break;
        }
        if out.iterations >= cfg.max_iter {
            break;
        }
        out.restarts.push(out.iterations);
        basis.clear();
        hess.clear();
        g.iter_mut().for_each(|v| *v = T::zero());
        g[0] = rnorm;
        basis.push(r.iter().map(|&v| v / rnorm).collect());

        let mut m = 0;
        for j in 0..restart {
            if out.iterations >= cfg.max_iter {
                break;
            }
            precond.apply(&basis[j], &mut z);
            op.apply(&z, &mut w);
            out.iterations += 1;

            let wnorm0 = norm2(&w);
            let mut h = vec![T::zero(); restart + 1];
            for (i, v) in basis.iter().enumerate() {
                let hij = dot(&w, v);
                h[i] = hij;
                axpy(-hij, v, &mut w);
            }
            let hnext = norm2(&w);
            h[j + 1] = hnext;

            for i in 0..j {
                let t = cs[i] * h[i] + sn[i] * h[i + 1];
                h[i + 1] = -sn[i] * h[i] + cs[i] * h[i + 1];
                h[i] = t;
            }
            let denom = (h[j] * h[j] + h[j + 1] * h[j + 1]).sqrt();
            if denom == T::zero() {
                // A M^{-1} v_j vanished; nothing more can be learned in this cycle
                break;
            }
            cs[j] = h[j] / denom;
            sn[j] = h[j + 1] / denom;
            h[j] = denom;
            h[j + 1] = T::zero();
            g[j + 1] = -sn[j] * g[j];
            g[j] = cs[j] * g[j];
            hess.push(h);
            m = j + 1;

            let est = g[j + 1].abs();
            out.history.push(est / bnorm);
            let breakdown = !(hnext > T::epsilon() * wnorm0 * T::lit(10.0));
            if est <= target || breakdown {
                break;
            }
            basis.push(w.iter().map(|&v| v / hnext).collect());
        }

        if m == 0 {
            break;
        }
        // back substitution on the triangularized Hessenberg system
        let mut y = vec![T::zero(); m];
        for i in (0..m).rev() {
            let mut s = g[i];
            for k in i + 1..m {
                s -= hess[k][i] * y[k];
            }
            y[i] = s / hess[i][i];
        }
        let mut u = vec![T::zero(); n];
        for (k, &yk) in y.iter().enumerate() {
            axpy(yk, &basis[k], &mut u);
        }
        precond.apply(&u, &mut z);
        axpy(T::one(), &z, &mut x);

        op.apply(&x, &mut w);
        for i in 0..n {
            r[i] = b[i] - w[i];
        }
        let new_norm = norm2(&r);
        if !new_norm.is_finite() {
            break;
        }
        let stalled = new_norm >= rnorm;
        rnorm = new_norm;
        if rnorm <= target {
            out.converged = true;
            break;
        }
        if stalled && m < restart && out.iterations < cfg.max_iter {
            // breakdown without progress: the Krylov space is exhausted
            break;
        }
    }
    out.relative_residual = rnorm / bnorm;
    out.x = x;
    Ok(out)
}
