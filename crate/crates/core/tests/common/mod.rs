#![allow(dead_code)]

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use thermoporous::physics::WellGeometry;
use thermoporous::*;

pub const P_INIT: f64 = 4.1369e5;
pub const T_INIT: f64 = 288.706;
pub const T_HOT: f64 = 422.039;
pub const U_HEATER: f64 = 5.44409e-6;

pub fn heater_model(n: usize) -> Model<f64> {
    let l = 20.0;
    let grid = build_grid(&[n, n], &[l, l]).unwrap();
    let rock = RockModel::uniform(n * n, [3e-13; 3], 0.2);
    let mut src = Vec::new();
    for &x in &[0.25, 0.5, 0.75] {
        for &y in &[1.0 / 3.0, 2.0 / 3.0] {
            src.push(SourceTerm::heater(grid.locate(&[x * l, y * l]).unwrap(), U_HEATER, T_HOT));
        }
    }
    Model::new(grid, FluidModel::default(), rock, src).unwrap()
}

pub fn well_model(n: usize, kx: f64, q: f64) -> Model<f64> {
    let l = 20.0;
    let grid = build_grid(&[n, n], &[l, l]).unwrap();
    let rock = RockModel::uniform(n * n, [kx, 3e-13, 3e-13], 0.2);
    let mut src = Vec::new();
    for &y in &[0.25, 0.5, 0.75] {
        src.push(SourceTerm::injector(grid.locate(&[0.25 * l, y * l]).unwrap(), RateMode::Fixed { q }, T_HOT));
        src.push(SourceTerm::producer(grid.locate(&[0.75 * l, y * l]).unwrap(), RateMode::Fixed { q }));
    }
    Model::new(grid, FluidModel::default(), rock, src).unwrap()
}

/// Heterogeneous field with Peaceman wells and a heater.
pub fn peaceman_model(nx: usize, ny: usize, seed: u64) -> Model<f64> {
    let grid = build_grid(&[nx, ny], &[60.0, 120.0]).unwrap();
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut rock = RockModel::uniform(nx * ny, [1e-13; 3], 0.2);
    for k in rock.perm.iter_mut() {
        let v = 1e-13 * (rng.random::<f64>() * 6.0 - 3.0).exp();
        *k = [v, v, 0.1 * v];
    }
    let geometry = WellGeometry::default();
    let src = vec![
        SourceTerm::injector(grid.locate(&[10.0, 100.0]).unwrap(), RateMode::Peaceman { p_bh: 6.895e7, q_max: 1.8e-3, geometry }, T_HOT),
        SourceTerm::producer(grid.locate(&[50.0, 100.0]).unwrap(), RateMode::Peaceman { p_bh: 2.7579e7, q_max: 1.8e-3, geometry }),
        SourceTerm::heater(grid.locate(&[30.0, 60.0]).unwrap(), U_HEATER, T_HOT),
    ];
    Model::new(grid, FluidModel::default(), rock, src).unwrap()
}

pub fn gravity_model(n: usize) -> Model<f64> {
    let l = 50.0;
    let grid = build_grid(&[n, n, n], &[l, l, l]).unwrap();
    let rock = RockModel::uniform(n * n * n, [3e-13; 3], 0.2);
    let src = vec![
        SourceTerm::injector(grid.locate(&[25.0, 25.0, 45.0]).unwrap(), RateMode::Fixed { q: 1e-7 }, T_HOT),
        SourceTerm::producer(grid.locate(&[25.0, 25.0, 5.0]).unwrap(), RateMode::Fixed { q: 1e-7 }),
        SourceTerm::heater(grid.locate(&[10.0, 10.0, 5.0]).unwrap(), U_HEATER, T_HOT),
    ];
    Model::new(grid, FluidModel::default(), rock, src).unwrap().with_gravity(STANDARD_GRAVITY)
}

pub fn random_state(n: usize, seed: u64, p_base: f64) -> State<f64> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let p = (0..n).map(|_| p_base + rng.random_range(-2e5..2e5)).collect();
    let t = (0..n).map(|_| rng.random_range(290.0..410.0)).collect();
    State::new(p, t).unwrap()
}

/// Largest relative column error of each block `[App, ApT, ATp, ATT]`
/// against central differences of the residual.
pub fn jacobian_fd_errors(model: &Model<f64>, new: &State<f64>, old: &State<f64>, dt: f64) -> [f64; 4] {
    let jac = assemble_jacobian(model, new, old, dt).unwrap();
    let n = model.n_cells();
    let dense = |m: &CsrMatrix<f64>| m.to_dense();
    let blocks = [dense(&jac.app), dense(&jac.apt), dense(&jac.atp), dense(&jac.att)];
    let mut worst = [0.0f64; 4];
    for j in 0..n {
        for temperature in [false, true] {
            let (mut plus, mut minus) = (new.clone(), new.clone());
            let eps = if temperature { 1e-4 } else { 1e-6 * new.p[j].abs().max(1.0) };
            if temperature {
                plus.t[j] += eps;
                minus.t[j] -= eps;
            } else {
                plus.p[j] += eps;
                minus.p[j] -= eps;
            }
            let gp = assemble_residual(model, &plus, old, dt).unwrap();
            let gm = assemble_residual(model, &minus, old, dt).unwrap();
            for (rows_t, fd_p, fd_m) in [(false, &gp.p, &gm.p), (true, &gp.t, &gm.t)] {
                let b = match (rows_t, temperature) {
                    (false, false) => 0,
                    (false, true) => 1,
                    (true, false) => 2,
                    (true, true) => 3,
                };
                let mut diff = 0.0;
                let mut norm = 0.0;
                for i in 0..n {
                    let fd = (fd_p[i] - fd_m[i]) / (2.0 * eps);
                    let an = blocks[b][i][j];
                    diff += (fd - an).powi(2);
                    norm += an.powi(2);
                }
                if norm > 0.0 {
                    worst[b] = worst[b].max((diff / norm).sqrt());
                } else {
                    assert!(diff.sqrt() < 1e-8, "analytic column zero but fd nonzero");
                }
            }
        }
    }
    worst
}

/// Five-point Laplacian with homogeneous Dirichlet conditions on an
/// `n x n` grid.
pub fn poisson2d(n: usize) -> CsrMatrix<f64> {
    let mut trip = Vec::new();
    for j in 0..n {
        for i in 0..n {
            let k = i + n * j;
            trip.push((k, k, 4.0));
            if i > 0 {
                trip.push((k, k - 1, -1.0));
            }
            if i + 1 < n {
                trip.push((k, k + 1, -1.0));
            }
            if j > 0 {
                trip.push((k, k - n, -1.0));
            }
            if j + 1 < n {
                trip.push((k, k + n, -1.0));
            }
        }
    }
    CsrMatrix::from_triplets(n * n, n * n, &trip).unwrap()
}

/// Sparse, diagonally dominant and nonsymmetric.
pub fn random_sparse(n: usize, per_row: usize, seed: u64) -> CsrMatrix<f64> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut trip = Vec::new();
    for i in 0..n {
        let mut off = 0.0;
        for _ in 0..per_row {
            let j = rng.random_range(0..n);
            if j != i {
                let v: f64 = rng.random_range(-1.0..1.0);
                off += v.abs();
                trip.push((i, j, v));
            }
        }
        trip.push((i, i, off + rng.random_range(0.5..1.5)));
    }
    CsrMatrix::from_triplets(n, n, &trip).unwrap()
}

pub fn dense_solve(a: &CsrMatrix<f64>, b: &[f64]) -> Vec<f64> {
    let d = a.to_dense();
    let n = a.n_rows();
    let m = nalgebra::DMatrix::from_fn(n, n, |i, j| d[i][j]);
    let x = m.lu().solve(&nalgebra::DVector::from_column_slice(b)).unwrap();
    x.as_slice().to_vec()
}

pub fn rel_err(a: &[f64], b: &[f64]) -> f64 {
    let num: f64 = a.iter().zip(b).map(|(x, y)| (x - y).powi(2)).sum::<f64>().sqrt();
    let den: f64 = b.iter().map(|y| y * y).sum::<f64>().sqrt();
    num / den
}
