mod common;

use approx::assert_relative_eq;
use common::*;
use proptest::prelude::*;
use thermoporous::discretization::{source_totals, total_energy, total_mass};
use thermoporous::*;

/// Residual written out cell by cell on an `nx x ny` grid with unit depth,
/// gravity along y and only heaters and fixed-rate wells.
fn oracle_residual(model: &Model<f64>, nx: usize, ny: usize, new: &State<f64>, old: &State<f64>, dt: f64) -> Vec<f64> {
    let fl = &model.fluid;
    let rk = &model.rock;
    let (hx, hy) = (model.grid.lengths()[0] / nx as f64, model.grid.lengths()[1] / ny as f64);
    let vol = hx * hy;
    let n = nx * ny;
    let mut gm = vec![0.0; n];
    let mut ge = vec![0.0; n];
    let rho = |s: &State<f64>, i: usize| fl.density(s.p[i], s.t[i]);
    let lam = |i: usize| rho(new, i) / fl.viscosity(new.t[i]).unwrap();
    let ktot = |i: usize| rk.poro[i] * rk.k_tr + (1.0 - rk.poro[i]) * fl.k_tf;
    let hm = |a: f64, b: f64| 2.0 * a * b / (a + b);
    for i in 0..n {
        let phi = rk.poro[i];
        gm[i] = phi * (rho(new, i) - rho(old, i)) * vol / dt;
        ge[i] = (phi * fl.c_v * (rho(new, i) * new.t[i] - rho(old, i) * old.t[i])
            + (1.0 - phi) * rk.rho_r * rk.c_r * (new.t[i] - old.t[i]))
            * vol
            / dt;
    }
    for j in 0..ny {
        for i in 0..nx {
            let a = i + nx * j;
            let mut nbrs = Vec::new();
            if i + 1 < nx {
                nbrs.push((a + 1, 0usize, hy, hx, 0.0));
            }
            if j + 1 < ny {
                nbrs.push((a + nx, 1usize, hx, hy, 1.0));
            }
            for (b, axis, area, d, nz) in nbrs {
                let drive = (new.p[a] - new.p[b]) / d - 0.5 * (rho(new, a) + rho(new, b)) * model.gravity * nz;
                let up = if drive >= 0.0 { a } else { b };
                let f = hm(rk.perm[a][axis], rk.perm[b][axis]) * area * lam(up) * drive;
                let h = fl.c_v * f * new.t[up] + hm(ktot(a), ktot(b)) * area / d * (new.t[a] - new.t[b]);
                gm[a] += f;
                gm[b] -= f;
                ge[a] += h;
                ge[b] -= h;
            }
        }
    }
    for s in &model.sources {
        let c = s.cell;
        match (s.kind, s.rate) {
            (SourceKind::Heater { u, t_heater }, _) => ge[c] -= u * (t_heater - new.t[c]),
            (SourceKind::Injector { t_inj }, RateMode::Fixed { q }) => {
                let m = q * fl.density(new.p[c], t_inj);
                gm[c] -= m;
                ge[c] -= m * fl.c_v * t_inj;
            }
            (SourceKind::Producer, RateMode::Fixed { q }) => {
                let m = q * rho(new, c);
                gm[c] += m;
                ge[c] += m * fl.c_v * new.t[c];
            }
            _ => unreachable!(),
        }
    }
    gm.extend(ge);
    gm
}

fn small_model(nx: usize, ny: usize, seed: u64, gravity: f64) -> Model<f64> {
    use rand::{Rng, SeedableRng};
    let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(seed);
    let grid = build_grid(&[nx, ny], &[7.0, 3.0]).unwrap();
    let mut rock = RockModel::uniform(nx * ny, [1e-12; 3], 0.2);
    for (k, phi) in rock.perm.iter_mut().zip(rock.poro.iter_mut()) {
        *k = [rng.random_range(1e-14..1e-12), rng.random_range(1e-14..1e-12), 1e-13];
        *phi = rng.random_range(0.05..0.4);
    }
    let n = nx * ny;
    let src = vec![
        SourceTerm::heater(0, 2.0, 400.0),
        SourceTerm::injector(n / 2, RateMode::Fixed { q: 1e-4 }, 350.0),
        SourceTerm::producer(n - 1, RateMode::Fixed { q: 2e-4 }),
    ];
    Model::new(grid, FluidModel::default(), rock, src).unwrap().with_gravity(gravity)
}

#[test]
fn residual_matches_cellwise_oracle_on_small_grids() {
    for (nx, ny) in [(1, 1), (2, 1), (1, 3), (3, 3), (5, 4), (5, 5)] {
        for gravity in [0.0, STANDARD_GRAVITY] {
            let model = small_model(nx, ny, (nx * 10 + ny) as u64, gravity);
            let n = nx * ny;
            let new = random_state(n, 1, 1e6);
            let old = random_state(n, 2, 1e6);
            let g = assemble_residual(&model, &new, &old, 3600.0).unwrap().to_stacked();
            let want = oracle_residual(&model, nx, ny, &new, &old, 3600.0);
            let scale = want.iter().fold(0.0f64, |m, v| m.max(v.abs()));
            for (a, b) in g.iter().zip(&want) {
                assert!((a - b).abs() <= 1e-12 * scale, "{nx}x{ny} g={gravity}: {a} vs {b}");
            }
        }
    }
}

#[test]
fn jacobian_matches_finite_differences() {
    let cases: Vec<(&str, Model<f64>, f64)> = vec![
        ("heater", heater_model(6), P_INIT),
        ("wells", well_model(6, 3e-11, 1e-6), P_INIT),
        ("peaceman", peaceman_model(5, 7, 3), 4e7),
        ("gravity3d", gravity_model(3), P_INIT),
    ];
    for (name, model, p0) in cases {
        let n = model.n_cells();
        let new = random_state(n, 11, p0);
        let old = random_state(n, 12, p0);
        let err = jacobian_fd_errors(&model, &new, &old, 86400.0);
        for (b, e) in err.iter().enumerate() {
            assert!(*e < 1e-6, "{name} block {b}: {e:e}");
        }
    }
}

#[test]
fn dirichlet_boundary_jacobian_matches_finite_differences() {
    let grid = build_grid(&[4, 3], &[4.0, 3.0]).unwrap();
    let bc: Vec<_> = grid
        .boundary_facets()
        .iter()
        .enumerate()
        .filter(|(_, f)| f.normal_axis == 0)
        .map(|(k, f)| thermoporous::discretization::DirichletFacet {
            boundary_facet: k,
            p: if f.outward_sign < 0 { 2e6 } else { 1e6 },
            t: 330.0,
        })
        .collect();
    let rock = RockModel::uniform(12, [1e-12; 3], 0.25);
    let model = Model::new(grid, FluidModel::default(), rock, vec![]).unwrap().with_dirichlet(bc).unwrap();
    let new = random_state(12, 5, 1.5e6);
    let old = random_state(12, 6, 1.5e6);
    for e in jacobian_fd_errors(&model, &new, &old, 100.0) {
        assert!(e < 1e-6, "{e:e}");
    }
}

#[test]
fn jacobian_rhs_is_negative_residual() {
    let model = peaceman_model(4, 4, 9);
    let new = random_state(16, 1, 4e7);
    let old = random_state(16, 2, 4e7);
    let g = assemble_residual(&model, &new, &old, 10.0).unwrap();
    let jac = assemble_jacobian(&model, &new, &old, 10.0).unwrap();
    for i in 0..16 {
        assert_eq!(jac.bp[i], -g.p[i]);
        assert_eq!(jac.bt[i], -g.t[i]);
    }
}

#[test]
fn schur_approx_shares_att_pattern_and_conduction() {
    let model = well_model(5, 3e-13, 1e-6);
    let new = random_state(25, 3, P_INIT);
    let old = random_state(25, 4, P_INIT);
    let jac = assemble_jacobian(&model, &new, &old, 86400.0).unwrap();
    let se = assemble_schur_approx(&model, &new, 86400.0).unwrap();
    assert_eq!(se.row_ptr(), jac.att.row_ptr());
    assert_eq!(se.col_idx(), jac.att.col_idx());
    // conduction is symmetric, so the skew part is c_v F whichever side is upwind
    let cv = model.fluid.c_v;
    for (k, f) in model.grid.facets().iter().enumerate() {
        let (flux, up) = model.darcy_flux(k, &new).unwrap();
        assert!(up == f.cell_a || up == f.cell_b);
        let (a, b) = (f.cell_a, f.cell_b);
        let skew = se.get(a, b) - se.get(b, a);
        assert_relative_eq!(skew, cv * flux, max_relative = 1e-10, epsilon = 1e-12 * se.max_abs());
    }
}

#[test]
fn schur_approx_is_spd_without_flow() {
    let model = heater_model(5);
    let state = State::uniform(25, P_INIT, T_INIT);
    let se = assemble_schur_approx(&model, &state, 86400.0).unwrap();
    let d = se.to_dense();
    let m = nalgebra::DMatrix::from_fn(25, 25, |i, j| d[i][j]);
    assert_relative_eq!(m.clone(), m.transpose(), max_relative = 1e-14);
    assert!(m.symmetric_eigenvalues().min() > 0.0);
}

#[test]
fn constant_coefficients_decouple_temperature() {
    let mut fluid = FluidModel::default();
    fluid.c = 0.0;
    fluid.beta = 0.0;
    let grid = build_grid(&[4, 4], &[4.0, 4.0]).unwrap();
    let rock = RockModel::uniform(16, [1e-12; 3], 0.2);
    let model = Model::new(grid, fluid, rock, vec![SourceTerm::heater(5, 3.0, 400.0)]).unwrap();
    let state = State::uniform(16, P_INIT, T_INIT);
    let jac = assemble_jacobian(&model, &state, &state, 1000.0).unwrap();
    let se = assemble_schur_approx(&model, &state, 1000.0).unwrap();
    assert_eq!(jac.apt.max_abs(), 0.0);
    for (a, b) in se.values().iter().zip(jac.att.values()) {
        assert_relative_eq!(*a, *b, max_relative = 1e-12);
    }
}

#[test]
fn closed_box_mass_change_equals_sources() {
    let model = well_model(4, 3e-13, 1e-7);
    let new = random_state(16, 1, P_INIT);
    let old = random_state(16, 2, P_INIT);
    let dt = 500.0;
    let g = assemble_residual(&model, &new, &old, dt).unwrap();
    let (fm, fe) = source_totals(&model, &new).unwrap();
    let dm = (total_mass(&model, &new) - total_mass(&model, &old)) / dt;
    let de = (total_energy(&model, &new) - total_energy(&model, &old)) / dt;
    assert_relative_eq!(g.p.iter().sum::<f64>(), dm - fm, max_relative = 1e-9);
    assert_relative_eq!(g.t.iter().sum::<f64>(), de - fe, max_relative = 1e-9);
}

#[test]
fn f32_residual_tracks_f64() {
    let m64 = heater_model(4);
    let grid = build_grid(&[4usize, 4], &[20.0f32, 20.0]).unwrap();
    let src: Vec<SourceTerm<f32>> = m64
        .sources
        .iter()
        .map(|s| SourceTerm::heater(s.cell, U_HEATER as f32, T_HOT as f32))
        .collect();
    let m32 = Model::new(grid, FluidModel::default(), RockModel::uniform(16, [3e-13f32; 3], 0.2), src).unwrap();
    let s64 = random_state(16, 4, P_INIT);
    let o64 = State::uniform(16, P_INIT, T_INIT);
    let to32 = |s: &State<f64>| State::new(s.p.iter().map(|&v| v as f32).collect(), s.t.iter().map(|&v| v as f32).collect()).unwrap();
    let g64 = assemble_residual(&m64, &s64, &o64, 86400.0).unwrap();
    let g32 = assemble_residual(&m32, &to32(&s64), &to32(&o64), 86400.0).unwrap();
    let scale = g64.t.iter().fold(0.0f64, |m, v| m.max(v.abs()));
    for (a, b) in g32.t.iter().zip(&g64.t) {
        assert!((*a as f64 - b).abs() < 1e-2 * scale);
    }
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(64))]

    #[test]
    fn flux_is_antisymmetric_under_swap(
        pa in 1e5f64..1e7, pb in 1e5f64..1e7, ta in 280.0f64..420.0, tb in 280.0f64..420.0, nx in 2usize..5,
    ) {
        let grid = build_grid(&[nx, 1], &[1.0, 1.0]).unwrap();
        let model = Model::new(grid, FluidModel::default(), RockModel::uniform(nx, [1e-12; 3], 0.2), vec![]).unwrap();
        let mut s = State::uniform(nx, 1e6, 300.0);
        s.p[0] = pa; s.t[0] = ta; s.p[1] = pb; s.t[1] = tb;
        let mut r = s.clone();
        r.p.swap(0, 1); r.t.swap(0, 1);
        let (f, up) = model.darcy_flux(0, &s).unwrap();
        let (g, upr) = model.darcy_flux(0, &r).unwrap();
        prop_assert!((f + g).abs() <= 1e-12 * f.abs().max(1e-300));
        if pa != pb { prop_assert_ne!(up, upr); }
    }

    #[test]
    fn fluxes_telescope_without_sources(seed in 0u64..1000, nx in 1usize..6, ny in 1usize..6) {
        let grid = build_grid(&[nx, ny], &[3.0, 2.0]).unwrap();
        let n = nx * ny;
        let model = Model::new(grid, FluidModel::default(), RockModel::uniform(n, [2e-13; 3], 0.3), vec![]).unwrap();
        let s = random_state(n, seed, 2e6);
        let g = assemble_residual(&model, &s, &s, 1.0).unwrap();
        let scale = g.p.iter().fold(1e-300f64, |m, v| m.max(v.abs()));
        let scale_t = g.t.iter().fold(1e-300f64, |m, v| m.max(v.abs()));
        prop_assert!(g.p.iter().sum::<f64>().abs() <= 1e-12 * scale * n as f64);
        prop_assert!(g.t.iter().sum::<f64>().abs() <= 1e-12 * scale_t * n as f64);
    }

    #[test]
    fn uniform_state_is_stationary_without_gravity(p in 1e5f64..1e8, t in 280.0f64..420.0) {
        let model = Model::new(build_grid(&[3, 3], &[1.0, 1.0]).unwrap(), FluidModel::default(), RockModel::uniform(9, [1e-12; 3], 0.2), vec![]).unwrap();
        let s = State::uniform(9, p, t);
        let g = assemble_residual(&model, &s, &s, 10.0).unwrap();
        prop_assert!(g.p.iter().chain(&g.t).all(|v| *v == 0.0));
    }
}
