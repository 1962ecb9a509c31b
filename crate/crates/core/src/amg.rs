//! Classical Ruge-Stüben algebraic multigrid used as a fixed V(1,1) cycle.

use std::cmp::Reverse;
use std::collections::BTreeSet;

use crate::error::{Error, Result};
use crate::linalg::{CsrMatrix, DenseLu, LinearOperator};
use crate::scalar::Real;

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct AmgOptions<T> {
    pub strength_threshold: T,
    pub max_levels: usize,
    /// Levels at or below this size are solved directly.
    pub coarse_threshold: usize,
    /// Largest coarsest level accepted for the dense direct solve.
    pub max_coarse_size: usize,
    pub pre_sweeps: usize,
    pub post_sweeps: usize,
}

impl<T: Real> Default for AmgOptions<T> {
    fn default() -> Self {
        AmgOptions {
            strength_threshold: T::lit(0.25),
            max_levels: 25,
            coarse_threshold: 64,
            max_coarse_size: 3000,
            pre_sweeps: 1,
            post_sweeps: 1,
        }
    }
}

impl<T: Real> AmgOptions<T> {
    pub fn validate(&self) -> Result<()> {
        if !(self.strength_threshold > T::zero() && self.strength_threshold < T::one()) {
            return Err(Error::AmgSetup(format!("strength threshold {} outside (0, 1)", self.strength_threshold)));
        }
        if self.max_levels == 0 {
            return Err(Error::AmgSetup("max_levels must be at least 1".into()));
        }
        Ok(())
    }
}

/// Strong dependencies: row `i` lists the points `i` strongly depends on.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct StrengthGraph {
    ptr: Vec<usize>,
    idx: Vec<usize>,
}

impl StrengthGraph {
    pub fn from_rows(rows: &[Vec<usize>]) -> Self {
        let mut ptr = vec![0];
        let mut idx = Vec::new();
        for r in rows {
            idx.extend_from_slice(r);
            ptr.push(idx.len());
        }
        StrengthGraph { ptr, idx }
    }

    pub fn n(&self) -> usize {
        self.ptr.len() - 1
    }

    pub fn dependencies(&self, i: usize) -> &[usize] {
        &self.idx[self.ptr[i]..self.ptr[i + 1]]
    }

    pub fn n_edges(&self) -> usize {
        self.idx.len()
    }

    /// Graph of influences: row `j` lists the points that depend on `j`.
    pub fn transpose(&self) -> StrengthGraph {
        let n = self.n();
        let mut count = vec![0usize; n + 1];
        for &j in &self.idx {
            count[j + 1] += 1;
        }
        for i in 0..n {
            count[i + 1] += count[i];
        }
        let mut next = count.clone();
        let mut idx = vec![0; self.idx.len()];
        for i in 0..n {
            for &j in self.dependencies(i) {
                idx[next[j]] = i;
                next[j] += 1;
            }
        }
        StrengthGraph { ptr: count, idx }
    }
}

/// `i` strongly depends on `j != i` when
/// `-s a_ij >= theta * max_k (-s a_ik)` with `s = sign(a_ii)`; rows
/// without a negative coupling (relative to the diagonal sign) have none.
pub fn strength_graph<T: Real>(a: &CsrMatrix<T>, theta: T) -> Result<StrengthGraph> {
    if !a.is_square() {
        return Err(Error::DimensionMismatch { expected: a.n_rows(), found: a.n_cols(), context: "strength graph" });
    }
    let n = a.n_rows();
    let mut ptr = Vec::with_capacity(n + 1);
    let mut idx = Vec::with_capacity(a.nnz());
    ptr.push(0);
    for i in 0..n {
        let (cols, vals) = a.row(i);
        let diag = a.get(i, i);
        let s = if diag < T::zero() { -T::one() } else { T::one() };
        let mut max = T::zero();
        for (&j, &v) in cols.iter().zip(vals) {
            if j != i {
                max = max.max(-s * v);
            }
        }
        if max > T::zero() {
            let cut = theta * max;
            for (&j, &v) in cols.iter().zip(vals) {
                if j != i && -s * v >= cut {
                    idx.push(j);
                }
            }
        }
        ptr.push(idx.len());
    }
    Ok(StrengthGraph { ptr, idx })
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum PointType {
    Coarse,
    Fine,
}

/// Classical two-pass C/F splitting. Points without any strong connection
/// become coarse.
pub fn coarsen(graph: &StrengthGraph) -> Vec<PointType> {
    coarsen_with(graph, PointType::Coarse)
}

fn coarsen_with(graph: &StrengthGraph, isolated: PointType) -> Vec<PointType> {
    let n = graph.n();
    let influences = graph.transpose();
    let mut state: Vec<Option<PointType>> = vec![None; n];
    let mut lambda: Vec<usize> = (0..n).map(|i| influences.dependencies(i).len()).collect();
    let mut queue = BTreeSet::new();
    for i in 0..n {
        if graph.dependencies(i).is_empty() && influences.dependencies(i).is_empty() {
            state[i] = Some(isolated);
        } else {
            queue.insert((Reverse(lambda[i]), i));
        }
    }

    while let Some((_, i)) = queue.pop_first() {
        state[i] = Some(PointType::Coarse);
        for &j in influences.dependencies(i) {
            if state[j].is_some() {
                continue;
            }
            state[j] = Some(PointType::Fine);
            queue.remove(&(Reverse(lambda[j]), j));
            for &k in graph.dependencies(j) {
                if state[k].is_none() {
                    queue.remove(&(Reverse(lambda[k]), k));
                    lambda[k] += 1;
                    queue.insert((Reverse(lambda[k]), k));
                }
            }
        }
        for &j in graph.dependencies(i) {
            if state[j].is_none() && lambda[j] > 0 {
                queue.remove(&(Reverse(lambda[j]), j));
                lambda[j] -= 1;
                queue.insert((Reverse(lambda[j]), j));
            }
        }
    }
    let mut split: Vec<PointType> = state.into_iter().map(|s| s.unwrap_or(PointType::Coarse)).collect();

    // second pass: strongly connected F-points must share a strong C-point
    for i in 0..n {
        if split[i] != PointType::Fine {
            continue;
        }
        for &j in graph.dependencies(i) {
            if split[j] != PointType::Fine {
                continue;
            }
            let shared = graph
                .dependencies(j)
                .iter()
                .any(|&k| split[k] == PointType::Coarse && graph.dependencies(i).contains(&k));
            if !shared {
                split[j] = PointType::Coarse;
            }
        }
        if split[i] == PointType::Fine
            && !graph.dependencies(i).is_empty()
            && !graph.dependencies(i).iter().any(|&k| split[k] == PointType::Coarse)
        {
            split[i] = PointType::Coarse;
        }
    }
    split
}

/// Classical interpolation: C-points inject, F-points interpolate from their
/// strong C-neighbors, with strong F-neighbors distributed over common
/// C-points and weak connections lumped into the diagonal.
pub fn interpolation<T: Real>(a: &CsrMatrix<T>, split: &[PointType], graph: &StrengthGraph) -> Result<CsrMatrix<T>> {
    let n = a.n_rows();
    if split.len() != n || graph.n() != n {
        return Err(Error::DimensionMismatch { expected: n, found: split.len(), context: "interpolation splitting" });
    }
    let mut coarse_index = vec![usize::MAX; n];
    let mut nc = 0;
    for i in 0..n {
        if split[i] == PointType::Coarse {
            coarse_index[i] = nc;
            nc += 1;
        }
    }
    let mut is_strong = vec![false; n];
    let mut in_ci = vec![false; n];
    let mut trip = Vec::new();
    for i in 0..n {
        if split[i] == PointType::Coarse {
            trip.push((i, coarse_index[i], T::one()));
            continue;
        }
        let deps = graph.dependencies(i);
        for &j in deps {
            is_strong[j] = true;
            if split[j] == PointType::Coarse {
                in_ci[j] = true;
            }
        }
        let (cols, vals) = a.row(i);
        let mut diag = T::zero();
        let mut numer: Vec<(usize, T)> =
            deps.iter().filter(|&&j| split[j] == PointType::Coarse).map(|&j| (j, a.get(i, j))).collect();
        if numer.is_empty() && !deps.is_empty() {
            return Err(Error::AmgSetup(format!("fine point {i} has no strong coarse neighbor")));
        }
        for (&j, &v) in cols.iter().zip(vals) {
            if j == i {
                diag += v;
            } else if !is_strong[j] {
                diag += v;
            } else if split[j] == PointType::Fine {
                // distribute a_ij over the C-points shared with j
                let (kc, kv) = a.row(j);
                let a_jj = a.get(j, j);
                let opposite = |x: T| if a_jj > T::zero() { x < T::zero() } else { x > T::zero() };
                let mut denom = T::zero();
                for (&m, &w) in kc.iter().zip(kv) {
                    if in_ci[m] && opposite(w) {
                        denom += w;
                    }
                }
                if denom == T::zero() {
                    diag += v;
                } else {
                    for (&m, &w) in kc.iter().zip(kv) {
                        if in_ci[m] && opposite(w) {
                            let slot = numer.iter_mut().find(|e| e.0 == m).expect("m is a strong C neighbor");
                            slot.1 += v * w / denom;
                        }
                    }
                }
            }
        }
        for &j in deps {
            is_strong[j] = false;
            in_ci[j] = false;
        }
        if diag == T::zero() {
            return Err(Error::AmgSetup(format!("vanishing interpolation denominator in row {i}")));
        }
        for (j, num) in numer {
            trip.push((i, coarse_index[j], -num / diag));
        }
    }
    CsrMatrix::from_triplets(n, nc, &trip)
}

#[derive(Debug, Clone)]
struct Level<T> {
    a: CsrMatrix<T>,
    diag: Vec<T>,
    p: CsrMatrix<T>,
    r: CsrMatrix<T>,
}

/// Multigrid hierarchy with Galerkin coarse operators and a dense LU solve
/// on the coarsest level.
#[derive(Debug, Clone)]
pub struct AmgHierarchy<T> {
    levels: Vec<Level<T>>,
    coarse_a: CsrMatrix<T>,
    coarse: DenseLu<T>,
    options: AmgOptions<T>,
}

fn diagonal_checked<T: Real>(a: &CsrMatrix<T>, level: usize) -> Result<Vec<T>> {
    let d = a.diagonal();
    if let Some(i) = d.iter().position(|&v| v == T::zero() || !v.is_finite()) {
        return Err(Error::AmgSetup(format!("zero or non-finite diagonal in row {i} on level {level}")));
    }
    Ok(d)
}

impl<T: Real> AmgHierarchy<T> {
    pub fn build(a: &CsrMatrix<T>, options: AmgOptions<T>) -> Result<Self> {
        options.validate()?;
        if !a.is_square() {
            return Err(Error::DimensionMismatch { expected: a.n_rows(), found: a.n_cols(), context: "AMG operator" });
        }
        let mut levels = Vec::new();
        let mut current = a.clone();
        while current.n_rows() > options.coarse_threshold && levels.len() + 1 < options.max_levels {
            let lvl = levels.len();
            let diag = diagonal_checked(&current, lvl)?;
            let graph = strength_graph(&current, options.strength_threshold)?;
            let split = coarsen_with(&graph, PointType::Fine);
            let p = interpolation(&current, &split, &graph)?;
            if p.n_cols() >= current.n_rows() {
                break;
            }
            let r = p.transpose();
            let coarse = r.matmul(&current.matmul(&p)?)?;
            levels.push(Level { a: std::mem::replace(&mut current, coarse), diag, p, r });
        }
        if current.n_rows() > options.max_coarse_size {
            return Err(Error::AmgSetup(format!(
                "coarsest level has {} unknowns, above the direct-solve limit {}",
                current.n_rows(),
                options.max_coarse_size
            )));
        }
        let coarse = DenseLu::from_csr(&current).map_err(|e| match e {
            Error::ZeroPivot { row } => Error::AmgSetup(format!("singular coarsest operator (pivot {row})")),
            other => other,
        })?;
        Ok(AmgHierarchy { levels, coarse_a: current, coarse, options })
    }

    pub fn n_levels(&self) -> usize {
        self.levels.len() + 1
    }

    pub fn level_sizes(&self) -> Vec<usize> {
        let mut s: Vec<usize> = self.levels.iter().map(|l| l.a.n_rows()).collect();
        s.push(self.coarse_a.n_rows());
        s
    }

    /// Operator on level `l` (0 is the finest).
    pub fn operator(&self, l: usize) -> &CsrMatrix<T> {
        if l < self.levels.len() {
            &self.levels[l].a
        } else {
            &self.coarse_a
        }
    }

    /// Prolongation from level `l + 1` to level `l`.
    pub fn prolongation(&self, l: usize) -> &CsrMatrix<T> {
        &self.levels[l].p
    }

    pub fn options(&self) -> &AmgOptions<T> {
        &self.options
    }

    /// One V-cycle from a zero initial guess.
    pub fn vcycle(&self, b: &[T]) -> Vec<T> {
        let mut x = vec![T::zero(); b.len()];
        self.cycle(0, b, &mut x);
        x
    }

    fn cycle(&self, l: usize, b: &[T], x: &mut [T]) {
        if l == self.levels.len() {
            self.coarse.solve_into(b, x);
            return;
        }
        let lev = &self.levels[l];
        x.iter_mut().for_each(|v| *v = T::zero());
        for _ in 0..self.options.pre_sweeps {
            symmetric_gauss_seidel(&lev.a, &lev.diag, b, x);
        }
        let mut r = b.to_vec();
        lev.a.mul_sub_into(x, &mut r);
        let nc = lev.p.n_cols();
        let mut bc = vec![T::zero(); nc];
        lev.r.mul_into(&r, &mut bc);
        let mut xc = vec![T::zero(); nc];
        self.cycle(l + 1, &bc, &mut xc);
        lev.p.mul_add_into(&xc, x);
        for _ in 0..self.options.post_sweeps {
            symmetric_gauss_seidel(&lev.a, &lev.diag, b, x);
        }
    }
}

/// One forward followed by one backward Gauss-Seidel sweep.
pub fn symmetric_gauss_seidel<T: Real>(a: &CsrMatrix<T>, diag: &[T], b: &[T], x: &mut [T]) {
    let n = a.n_rows();
    let (rp, ci, v) = (a.row_ptr(), a.col_idx(), a.values());
    let relax = |i: usize, x: &mut [T]| {
        let mut s = b[i];
        for k in rp[i]..rp[i + 1] {
            let j = ci[k];
            if j != i {
                s -= v[k] * x[j];
            }
        }
        x[i] = s / diag[i];
    };
    for i in 0..n {
        relax(i, x);
    }
    for i in (0..n).rev() {
        relax(i, x);
    }
}

impl<T: Real> LinearOperator<T> for AmgHierarchy<T> {
    fn dim(&self) -> usize {
        self.operator(0).n_rows()
    }

    fn apply(&self, x: &[T], y: &mut [T]) {
        self.cycle(0, x, y);
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn poisson_1d(n: usize) -> CsrMatrix<f64> {
        let mut t = Vec::new();
        for i in 0..n {
            t.push((i, i, 2.0));
            if i > 0 {
                t.push((i, i - 1, -1.0));
            }
            if i + 1 < n {
                t.push((i, i + 1, -1.0));
            }
        }
        CsrMatrix::from_triplets(n, n, &t).unwrap()
    }

    #[test]
    fn identity_has_empty_strength_graph() {
        let g = strength_graph(&CsrMatrix::<f64>::identity(4), 0.25).unwrap();
        assert_eq!(g.n_edges(), 0);
        assert!(coarsen(&g).iter().all(|&p| p == PointType::Coarse));
    }

    #[test]
    fn poisson_connections_are_all_strong() {
        let a = poisson_1d(6);
        let g = strength_graph(&a, 0.25).unwrap();
        assert_eq!(g.n_edges(), a.nnz() - 6);
    }

    #[test]
    fn weak_connection_is_dropped() {
        let a = CsrMatrix::from_dense(&[vec![2.0, -1.0, -0.1], vec![-1.0, 2.0, 0.0], vec![-0.1, 0.0, 2.0]]);
        let g = strength_graph(&a, 0.25).unwrap();
        assert_eq!(g.dependencies(0), &[1]);
    }

    #[test]
    fn poisson_1d_splitting_alternates() {
        let g = strength_graph(&poisson_1d(5), 0.25).unwrap();
        use PointType::*;
        assert_eq!(coarsen(&g), vec![Fine, Coarse, Fine, Coarse, Fine]);
    }

    #[test]
    fn poisson_1d_weights_are_halves() {
        let a = poisson_1d(5);
        let g = strength_graph(&a, 0.25).unwrap();
        let p = interpolation(&a, &coarsen(&g), &g).unwrap();
        assert_eq!(p.n_cols(), 2);
        let d = p.to_dense();
        assert_eq!(d[2], vec![0.5, 0.5]);
        assert_eq!(d[1], vec![1.0, 0.0]);
        assert_eq!(d[0], vec![0.5, 0.0]);
    }

    #[test]
    fn small_operator_is_solved_exactly() {
        let a = poisson_1d(20);
        let h = AmgHierarchy::build(&a, AmgOptions::default()).unwrap();
        assert_eq!(h.n_levels(), 1);
        let b: Vec<f64> = (0..20).map(|i| i as f64).collect();
        let x = h.vcycle(&b);
        let r = a.spmv(&x).unwrap();
        for (ri, bi) in r.iter().zip(&b) {
            assert!((ri - bi).abs() < 1e-10);
        }
    }

    #[test]
    fn zero_rhs_gives_zero() {
        let a = poisson_1d(200);
        let h = AmgHierarchy::build(&a, AmgOptions::default()).unwrap();
        assert!(h.n_levels() > 1);
        assert!(h.vcycle(&vec![0.0; 200]).iter().all(|&v| v == 0.0));
    }

    #[test]
    fn zero_diagonal_is_rejected() {
        let mut t = vec![(0, 1, -1.0), (1, 0, -1.0)];
        for i in 1..100 {
            t.push((i, i, 2.0));
        }
        let a = CsrMatrix::from_triplets(100, 100, &t).unwrap();
        assert!(matches!(AmgHierarchy::build(&a, AmgOptions::default()), Err(Error::AmgSetup(_))));
    }
}
