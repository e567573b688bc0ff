mod common;

use common::*;
use nalgebra::{DMatrix, DVector};
use num_complex::Complex64;
use proptest::prelude::*;
use riccati_mor::dense::newton_kleinman;
use riccati_mor::harness::Reference;
use riccati_mor::krylov::*;
use riccati_mor::problems::*;
use riccati_mor::Error;

fn real(s: f64) -> Complex64 {
    Complex64::new(s, 0.0)
}

/// `‖(I − QQᵀ) X‖_F` for orthonormal `Q`: zero iff `range(X) ⊆ range(Q)`.
fn outside(q: &DMatrix<f64>, x: &DMatrix<f64>) -> f64 {
    (x - q * (q.transpose() * x)).norm()
}

fn orthonormal(x: &DMatrix<f64>) -> DMatrix<f64> {
    x.clone().qr().q()
}

#[test]
fn two_expansions_span_the_explicit_space() {
    let d = DVector::from_vec(vec![-1.0, -2.0, -3.5, -7.0, -11.0]);
    let a = DMatrix::from_diagonal(&d);
    let c = DMatrix::from_row_slice(1, 5, &[1.0, 0.5, -0.3, 0.8, 0.2]);
    let sys = riccati_mor::problems::StateSpaceSystem::from_dense(&a, DMatrix::from_element(5, 1, 1.0), c.clone()).unwrap();
    let (s2, s3) = (1.5, 6.0);
    let mut state = KrylovState::seed_galerkin(&sys).unwrap();
    expand_galerkin(&mut state, &sys, real(s2)).unwrap();
    expand_galerkin(&mut state, &sys, real(s3)).unwrap();
    assert_eq!(state.dim(), 3);
    assert!(state.dim() <= state.blocks() * sys.p());

    let at = a.transpose();
    let id = DMatrix::<f64>::identity(5, 5);
    let k0 = c.transpose();
    let k1 = (&at - &id * s2).lu().solve(&k0).unwrap();
    let k2 = (&at - &id * s2).lu().solve(&(&at - &id * s3).lu().solve(&k0).unwrap()).unwrap();
    let explicit = orthonormal(&DMatrix::from_columns(&[k0.column(0), k1.column(0), k2.column(0)]));
    let w = state.w();
    assert!(outside(&explicit, w) <= 1e-10);
    assert!(outside(w, &explicit) <= 1e-10);
    assert!((w.transpose() * w - DMatrix::identity(3, 3)).norm() <= 1e-10);
}

#[test]
fn complex_shift_keeps_basis_real_and_adds_conjugate_pair() {
    let mut rng = rng(31);
    let sys = random_system(&mut rng, 12, 1, 1);
    let mut state = KrylovState::seed_galerkin(&sys).unwrap();
    let added = expand_galerkin(&mut state, &sys, Complex64::new(2.0, 3.0)).unwrap();
    assert_eq!(added, 2);
    let a = sys.dense_a();
    let id = DMatrix::<f64>::identity(12, 12);
    let shifted = (a.transpose() - &id * 2.0).map(|v| Complex64::new(v, 0.0)) - id.map(|v| Complex64::new(0.0, 3.0 * v));
    let z = shifted.lu().solve(&sys.c.transpose().map(|v| Complex64::new(v, 0.0))).unwrap();
    let target = DMatrix::from_columns(&[sys.c.transpose().column(0).into_owned(), z.map(|v| v.re).column(0).into_owned(), z.map(|v| v.im).column(0).into_owned()]);
    assert!(outside(state.w(), &target) <= 1e-10 * target.norm());
}

#[test]
fn galerkin_relation_orthonormality_and_nesting() {
    let sys = assemble_system(&PdeConfig::convection_diffusion()).unwrap();
    let a = sys.dense_a();
    let mut state = KrylovState::seed_galerkin(&sys).unwrap();
    for _ in 0..10 {
        let before = state.w().clone();
        let sigma = state.next_shift(None).unwrap();
        expand_galerkin(&mut state, &sys, sigma).unwrap();
        let w = state.w();
        let k = w.ncols();
        assert!((w.transpose() * w - DMatrix::identity(k, k)).norm() <= 1e-10);
        let rel = a.transpose() * w - w * state.relation_matrix() - state.w_hat() * state.coupling().transpose();
        assert!(rel.norm() <= 1e-8 * a.norm());
        assert!(outside(w, &before) <= 1e-10);
    }
}

#[test]
fn residual_formulas_match_explicit_on_small_instance() {
    let mut rng = rng(32);
    let sys = random_system(&mut rng, 5, 1, 1);
    let a = sys.dense_a();
    for kind in [Projection::Galerkin, Projection::PetrovGalerkin] {
        let mut state = match kind {
            Projection::Galerkin => KrylovState::seed_galerkin(&sys).unwrap(),
            Projection::PetrovGalerkin => KrylovState::seed_petrov(&sys).unwrap(),
        };
        let sigma = state.next_shift(None).unwrap();
        match kind {
            Projection::Galerkin => expand_galerkin(&mut state, &sys, sigma).unwrap(),
            Projection::PetrovGalerkin => expand_petrov(&mut state, &sys, sigma).unwrap(),
        };
        let a_r = state.a_r();
        let p_r = riccati_mor::dense::newton_kleinman_stabilized(&a_r, state.b_r(), state.c_r(), &sys.r_weight).unwrap().p;
        let w = state.w();
        let explicit = are_residual_dense(&a, &sys.b, &sys.c, &sys.r_weight, &(w * &p_r * w.transpose())).norm();
        let cheap = match kind {
            Projection::Galerkin => galerkin_residual_norm(&p_r, state.coupling()),
            Projection::PetrovGalerkin => pg_residual_norm(&p_r, state.coupling(), &state.extended_r().unwrap()).unwrap(),
        };
        assert!((cheap - explicit).abs() <= 1e-8 * explicit, "{kind:?}: {cheap} vs {explicit}");
    }
}

#[test]
fn random_instances_galerkin_cheap_equals_explicit() {
    for seed in 0..20u64 {
        let mut rng = rng(3300 + seed);
        let n = 20 + (seed as usize * 7) % 41;
        let sys = random_system(&mut rng, n, 1, 1);
        for s in residual_trace(&sys, Projection::Galerkin, 1e-8, 60).unwrap() {
            assert!((s.pure - s.explicit).abs() <= 1e-6 * s.explicit, "seed {seed} dim {}", s.dim);
        }
    }
}

#[test]
fn zero_cb_is_a_serious_breakdown() {
    let mut cfg = PdeConfig::heat().with_dx(0.1);
    cfg.omega_b = Rect::new(0.15, 0.25, 0.15, 0.25);
    cfg.omega_c = Rect::new(0.65, 0.75, 0.65, 0.75);
    let sys = assemble_system(&cfg).unwrap();
    assert_eq!((&sys.c * &sys.b)[(0, 0)], 0.0);
    assert!(matches!(KrylovState::seed_petrov(&sys), Err(Error::Breakdown { iteration: 0, .. })));
    let failure = pgark(&sys, &KrylovOptions::default()).unwrap_err();
    assert!(matches!(failure.error, Error::Breakdown { iteration: 0, .. }));
    assert!(failure.history.events.iter().any(|e| e.contains("breakdown")));
}

#[test]
fn symmetric_with_c_equal_bt_degenerates_to_galerkin() {
    let mut rng = rng(33);
    let l = random_matrix(&mut rng, 6, 6);
    let a = -(&l * l.transpose() + DMatrix::identity(6, 6) * 0.2);
    let b = random_matrix(&mut rng, 6, 1);
    let sys = riccati_mor::problems::StateSpaceSystem::from_dense(&a, b.clone(), b.transpose()).unwrap();
    let mut g = KrylovState::seed_galerkin(&sys).unwrap();
    let mut pg = KrylovState::seed_petrov(&sys).unwrap();
    for _ in 0..3 {
        let sigma = g.next_shift(None).unwrap();
        assert!((sigma - pg.next_shift(None).unwrap()).norm() <= 1e-10 * sigma.norm());
        expand_galerkin(&mut g, &sys, sigma).unwrap();
        expand_petrov(&mut pg, &sys, sigma).unwrap();
        assert!((pg.v() - pg.w()).norm() <= 1e-10);
        assert!(outside(g.w(), pg.w()) <= 1e-10);
    }
}

#[test]
fn symmetric_histories_agree() {
    // R_P is already a relative quantity, so histories are compared entrywise
    for seed in [34, 35, 36] {
        let mut rng = rng(seed);
        let l = random_matrix(&mut rng, 30, 30);
        let a = -(&l * l.transpose() + DMatrix::identity(30, 30) * 0.2);
        let b = random_matrix(&mut rng, 30, 1);
        let sys = riccati_mor::problems::StateSpaceSystem::from_dense(&a, b.clone(), b.transpose()).unwrap();
        let opts = KrylovOptions::default();
        let hg = gark(&sys, &opts).unwrap().history;
        let hp = pgark(&sys, &opts).unwrap().history;
        assert_eq!(hg.records.len(), hp.records.len());
        for (x, y) in hg.records.iter().zip(&hp.records) {
            assert_eq!(x.r, y.r);
            assert!((x.residual - y.residual).abs() <= 1e-8, "r = {}: {} vs {}", x.r, x.residual, y.residual);
        }
    }
}

#[test]
fn heat_gark_real_shifts_inside_bounds_and_matches_dense() {
    let sys = assemble_system(&PdeConfig::heat()).unwrap();
    let run = gark(&sys, &KrylovOptions::default()).unwrap();
    assert!(run.solution.residual <= 1e-8);
    assert!(run.model.r() <= 60);
    let bounds = KrylovState::seed_galerkin(&sys).unwrap().bounds();
    let a = sys.dense_a();
    let spectrum = eigenvalues(&a);
    let lo = spectrum.iter().map(|z| z.norm()).fold(f64::INFINITY, f64::min);
    assert!(bounds.s_max >= spectrum.iter().map(|z| z.norm()).fold(0.0, f64::max));
    for s in &run.shifts {
        assert_eq!(s.im, 0.0);
        assert!(s.re >= lo * (1.0 - 1e-12) && s.re <= bounds.s_max, "shift {s}");
    }
    let w = &run.model.w;
    assert!(explicit_relative_residual(&sys, w, &run.solution.p_r) <= 1e-8);
    let p = newton_kleinman(&a, &sys.b, &sys.c, &sys.r_weight).unwrap().p;
    assert!(rel(&(w * &run.solution.p_r * w.transpose()), &p) <= 1e-6);
}

#[test]
fn gark_residual_trend_on_both_tests() {
    for cfg in [PdeConfig::heat(), PdeConfig::convection_diffusion()] {
        let sys = assemble_system(&cfg).unwrap();
        let res = gark(&sys, &KrylovOptions::default()).unwrap().history.residuals();
        for w in res.windows(3) {
            assert!(w[2] <= w[0], "{res:?}");
        }
    }
}

#[test]
fn convection_pgark_stays_biorthogonal_until_it_stops() {
    let sys = assemble_system(&PdeConfig::convection_diffusion()).unwrap();
    let mut worst = 0.0f64;
    let mut observer = |red: &riccati_mor::reduction::ReducedModel, _: &DMatrix<f64>| {
        worst = worst.max(red.biorthogonality_defect());
        Observation::default()
    };
    let outcome = run(&sys, &KrylovOptions::default(), Projection::PetrovGalerkin, &mut observer);
    assert!(worst <= 1e-8, "biorthogonality {worst:e}");
    match outcome {
        Ok(r) => assert!(explicit_relative_residual(&sys, &r.model.w, &r.solution.p_r) <= 1e-6),
        Err(f) => assert!(!f.history.events.is_empty()),
    }
}

#[test]
fn observer_metrics_land_in_history() {
    let sys = assemble_system(&PdeConfig::heat().with_dx(0.1)).unwrap();
    let reference = Reference::new(&sys).unwrap();
    let mut observer = |red: &riccati_mor::reduction::ReducedModel, p_r: &DMatrix<f64>| reference.observe(red, p_r, &sys.r_weight);
    let out = run(&sys, &KrylovOptions::default(), Projection::Galerkin, &mut observer).unwrap();
    assert!(out.history.records.iter().all(|r| r.gain_error.is_some()));
    assert!(out.history.last().unwrap().gain_error.unwrap() <= 1e-6);
}

#[test]
fn not_converged_keeps_history() {
    let sys = assemble_system(&PdeConfig::heat()).unwrap();
    let opts = KrylovOptions {
        r_max: 3,
        ..KrylovOptions::default()
    };
    let failure = gark(&sys, &opts).unwrap_err();
    assert!(matches!(failure.error, Error::NotConverged { .. }));
    assert_eq!(failure.history.len(), 3);
}

#[test]
fn shift_examples() {
    let bounds = SpectralBounds { s_min: 1.0, s_max: 1.0 };
    assert_eq!(next_shift(&[real(-1.0)], &[], bounds, None), real(1.0));
    let bounds = SpectralBounds { s_min: 1.0, s_max: 4.0 };
    let s = next_shift(&[real(-1.0), real(-4.0)], &[], bounds, None);
    assert!((s - real(4.0)).norm() < 1e-12 || (s - real(1.0)).norm() < 1e-12);
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(24))]

    #[test]
    fn galerkin_state_invariants(seed in any::<u64>(), n in 6usize..30, p in 1usize..3) {
        let mut rng = rng(seed);
        let sys = random_system(&mut rng, n, 1, p);
        let a = sys.dense_a();
        let mut state = KrylovState::seed_galerkin(&sys).unwrap();
        for _ in 0..3 {
            let sigma = state.next_shift(None).unwrap();
            prop_assert!(sigma.re > 0.0);
            if expand_galerkin(&mut state, &sys, sigma).unwrap() == 0 {
                break;
            }
            let w = state.w();
            let k = w.ncols();
            prop_assert!(k <= state.blocks() * 2 * p);
            prop_assert!((w.transpose() * w - DMatrix::identity(k, k)).norm() <= 1e-10);
            let rel = a.transpose() * w - w * state.relation_matrix() - state.w_hat() * state.coupling().transpose();
            prop_assert!(rel.norm() <= 1e-8 * a.norm());
        }
    }
}
