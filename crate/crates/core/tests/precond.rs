mod common;

use common::*;
use proptest::prelude::*;
use thermoporous::linalg::LinearOperator;
use thermoporous::precond::{build, decoupling_operator, BlockPreconditioner, CprPreconditioner};
use thermoporous::*;

fn sample_system(n: usize, seed: u64) -> (Model<f64>, BlockJacobian<f64>, CsrMatrix<f64>) {
    let model = well_model(n, 3e-11, 1e-6);
    let new = random_state(n * n, seed, P_INIT);
    let old = random_state(n * n, seed + 1, P_INIT);
    let jac = assemble_jacobian(&model, &new, &old, 43200.0).unwrap();
    let se = assemble_schur_approx(&model, &new, 43200.0).unwrap();
    (model, jac, se)
}

fn dense_schur(jac: &BlockJacobian<f64>) -> CsrMatrix<f64> {
    let n = jac.n_cells();
    let app = DenseLu::from_csr(&jac.app).unwrap();
    let apt = jac.apt.to_dense();
    let mut cols = vec![vec![0.0; n]; n];
    for j in 0..n {
        let c: Vec<f64> = (0..n).map(|i| apt[i][j]).collect();
        let x = app.solve(&c);
        let y = jac.atp.spmv(&x).unwrap();
        for i in 0..n {
            cols[i][j] = jac.att.get(i, j) - y[i];
        }
    }
    CsrMatrix::from_dense(&cols)
}

#[test]
fn exact_block_factorization_converges_in_one_iteration() {
    let (_, jac, _) = sample_system(4, 1);
    let s = dense_schur(&jac);
    let pc = BlockPreconditioner::from_parts(
        jac.apt.clone(),
        jac.atp.clone(),
        Box::new(DenseLu::from_csr(&jac.app).unwrap()),
        Box::new(DenseLu::from_csr(&s).unwrap()),
    )
    .unwrap();
    let b = jac.rhs().to_stacked();
    let r = gmres(&jac, &pc, &b, &GmresConfig { rtol: 1e-9, restart: 30, max_iter: 50 }).unwrap();
    assert!(r.converged);
    assert_eq!(r.iterations, 1);
}

#[test]
fn cpr_with_exact_second_stage_converges_in_one_iteration() {
    for mode in [Decoupling::None, Decoupling::QuasiImpes, Decoupling::TrueImpes] {
        let (_, jac, _) = sample_system(4, 3);
        let jac = decoupling_operator(&jac, mode).unwrap();
        let full = DenseLu::from_csr(&jac.to_csr(Layout::Interleaved)).unwrap();
        let amg = AmgHierarchy::build(&jac.app, AmgOptions::default()).unwrap();
        let pc = CprPreconditioner::from_parts(jac.clone(), Box::new(amg), Box::new(full)).unwrap();
        let b = jac.rhs().to_stacked();
        let r = gmres(&jac, &pc, &b, &GmresConfig { rtol: 1e-9, restart: 30, max_iter: 50 }).unwrap();
        assert!(r.converged, "{mode}");
        assert_eq!(r.iterations, 1, "{mode}");
    }
}

#[test]
fn quasi_impes_annihilates_coupling_diagonal() {
    let (_, jac, _) = sample_system(5, 7);
    let dec = decoupling_operator(&jac, Decoupling::QuasiImpes).unwrap();
    assert!(dec.apt.diagonal().iter().all(|&v| v == 0.0));
    // the temperature rows are untouched
    assert_eq!(dec.att, jac.att);
    assert_eq!(dec.atp, jac.atp);
    assert_eq!(dec.bt, jac.bt);
}

#[test]
fn true_impes_weights_balance_column_sums() {
    let (_, jac, _) = sample_system(5, 9);
    let dec = decoupling_operator(&jac, Decoupling::TrueImpes).unwrap();
    let cs_att = jac.att.column_sums();
    let cs_apt = jac.apt.column_sums();
    // recover D from the transformed pressure rows: A_pT' = A_pT - D A_TT
    let d: Vec<f64> = (0..jac.n_cells())
        .map(|i| (jac.apt.get(i, i) - dec.apt.get(i, i)) / jac.att.get(i, i))
        .collect();
    for j in 0..jac.n_cells() {
        assert!((d[j] * cs_att[j] - cs_apt[j]).abs() <= 1e-10 * cs_apt[j].abs().max(1e-30));
    }
}

#[test]
fn decoupling_preserves_solution() {
    let (_, jac, _) = sample_system(4, 11);
    let x = dense_solve(&jac.to_csr(Layout::Stacked), &jac.rhs().to_stacked());
    for mode in [Decoupling::QuasiImpes, Decoupling::TrueImpes] {
        let dec = decoupling_operator(&jac, mode).unwrap();
        let y = dense_solve(&dec.to_csr(Layout::Stacked), &dec.rhs().to_stacked());
        assert!(rel_err(&y, &x) < 1e-9, "{mode}");
    }
}

#[test]
fn building_does_not_touch_the_jacobian() {
    let (_, jac, se) = sample_system(6, 13);
    let before = jac.clone();
    let x: Vec<f64> = (0..72).map(|i| (i as f64).sin()).collect();
    for cfg in [
        PreconditionerConfig::cpr(),
        PreconditionerConfig::block(SchurApprox::STildeT),
        PreconditionerConfig::block(SchurApprox::Att),
        PreconditionerConfig::block(SchurApprox::Diag),
    ] {
        let y1 = build(&cfg, &jac, Some(&se)).unwrap().apply_vec(&x);
        let y2 = build(&cfg, &jac, Some(&se)).unwrap().apply_vec(&x);
        assert_eq!(y1, y2);
        assert_eq!(jac, before);
    }
}

#[test]
fn s_tilde_t_requires_s_e() {
    let (_, jac, _) = sample_system(3, 1);
    assert!(build(&PreconditionerConfig::block(SchurApprox::STildeT), &jac, None).is_err());
}

#[test]
fn option_names_round_trip() {
    for s in ["cpr", "block"] {
        assert_eq!(s.parse::<PreconditionerKind>().unwrap().to_string(), s);
    }
    for s in ["s_tilde_T", "s_att", "s_diag"] {
        assert_eq!(s.parse::<SchurApprox>().unwrap().to_string(), s);
    }
    for s in ["none", "quasi_impes", "true_impes"] {
        assert_eq!(s.parse::<Decoupling>().unwrap().to_string(), s);
    }
    assert!("ilu".parse::<PreconditionerKind>().is_err());
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(16))]

    #[test]
    fn preconditioners_are_linear(seed in 0u64..100, alpha in -3.0f64..3.0, cpr in any::<bool>()) {
        let (_, jac, se) = sample_system(5, seed);
        let cfg = if cpr { PreconditionerConfig::cpr() } else { PreconditionerConfig::default() };
        let pc = build(&cfg, &jac, Some(&se)).unwrap();
        let x: Vec<f64> = (0..50).map(|i| (i as f64 * 1.3 + seed as f64).sin()).collect();
        let y: Vec<f64> = (0..50).map(|i| (i as f64 * 0.7).cos()).collect();
        let z: Vec<f64> = x.iter().zip(&y).map(|(a, b)| alpha * a + b).collect();
        let (px, py, pz) = (pc.apply_vec(&x), pc.apply_vec(&y), pc.apply_vec(&z));
        let scale = pz.iter().chain(&px).fold(1e-300f64, |m, v| m.max(v.abs()));
        for i in 0..50 {
            prop_assert!((pz[i] - alpha * px[i] - py[i]).abs() <= 1e-10 * scale);
        }
    }
}
