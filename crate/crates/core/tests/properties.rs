use nalgebra::DMatrix;
use proptest::prelude::*;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha20Rng;
use rand_distr::{Distribution, StandardNormal};

use spfa::linalg::{eigen_desc, psd_factor};
use spfa::rotation::random_orthogonal;
use spfa::scores::{
    determinacy_pca, determinacy_sample, determinacy_spfa, reproduced_cov_from_loadings, reproduced_cov_from_weights,
};
use spfa::simgen::{build_model_error_population, ladder_populations};
use spfa::study::run_condition_serial;
use spfa::{
    fit_report, mfa_extract, pca_extract, predictor_weights, procrustes, run_condition, spfa_extract, varimax_gpa,
    ExtractionSettings, LoadingMatrix, ModelError, PopulationSpec, PredictorKind, RotationChoice, SimCondition,
    StudyKind, SymMatrix, VarimaxSettings,
};

/// Variable `i` loads mainly on factor `i % q`; every factor therefore has
/// at least two clear indicators.
fn factor_matrix(q: usize, p: usize, main: &[f64], cross: &[f64]) -> (LoadingMatrix, SymMatrix) {
    let mut l = DMatrix::from_iterator(p, q, cross.iter().copied());
    for i in 0..p {
        l[(i, i % q)] = main[i];
        let norm = l.row(i).norm();
        if norm > 0.9 {
            l.row_mut(i).scale_mut(0.9 / norm);
        }
    }
    let mut s = &l * l.transpose();
    for i in 0..p {
        s[(i, i)] = 1.0;
    }
    (LoadingMatrix::new(l).unwrap(), SymMatrix::symmetrized(s))
}

/// Exact common-factor correlation matrices with q factors and p variables.
fn factor_case() -> impl Strategy<Value = (usize, LoadingMatrix, SymMatrix)> {
    (1usize..=4)
        .prop_flat_map(|q| (Just(q), 2 * q + 1..=12usize))
        .prop_flat_map(|(q, p)| {
            (Just(q), Just(p), prop::collection::vec(0.4f64..0.85, p), prop::collection::vec(-0.25f64..0.25, p * q))
        })
        .prop_map(|(q, p, main, cross)| {
            let (l, s) = factor_matrix(q, p, &main, &cross);
            (q, l, s)
        })
}

/// Sample correlation matrices drawn from a random factor model, so they
/// carry sampling error and no exact factor structure.
fn sample_case() -> impl Strategy<Value = (usize, SymMatrix)> {
    factor_case().prop_flat_map(|(q, l, s)| (Just(q), Just(l), Just(s), any::<u64>())).prop_map(|(q, _l, s, seed)| {
        let mut rng = ChaCha20Rng::seed_from_u64(seed);
        let f = psd_factor(&s).unwrap();
        let z = DMatrix::from_fn(200, s.dim(), |_, _| -> f64 { StandardNormal.sample(&mut rng) });
        (q, spfa::model::correlation_from_data(&(z * f.transpose())).unwrap())
    })
}

fn offdiag_gap(a: &SymMatrix, b: &SymMatrix) -> f64 {
    let p = a.dim();
    let mut m: f64 = 0.0;
    for i in 0..p {
        for j in 0..p {
            if i != j {
                m = m.max((a.get(i, j) - b.get(i, j)).abs());
            }
        }
    }
    m
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(48))]

    #[test]
    fn mfa_objective_never_increases((q, _l, s) in factor_case()) {
        let sol = mfa_extract(&s, &ExtractionSettings::new(q)).unwrap();
        prop_assume!(!sol.heywood);
        for w in sol.history.windows(2) {
            prop_assert!(w[1] <= w[0] + 1e-12 * w[0].abs().max(1e-12), "{} -> {}", w[0], w[1]);
        }
    }

    // The SPFA update is a fixed-point step rather than a descent step on
    // its own trace, so single iterations may increase it.
    #[test]
    fn spfa_objective_ends_below_its_start((q, _l, s) in factor_case()) {
        let sol = spfa_extract(&s, &ExtractionSettings::new(q)).unwrap();
        prop_assume!(!sol.heywood);
        let (first, last) = (sol.history[0], *sol.history.last().unwrap());
        prop_assert!(last <= first * (1.0 + 1e-12) + 1e-15, "{} -> {}", first, last);
    }

    #[test]
    fn spfa_constraint_and_theorem_1((q, s) in sample_case()) {
        let sol = spfa_extract(&s, &ExtractionSettings::new(q));
        prop_assume!(sol.is_ok());
        let sol = sol.unwrap();
        prop_assume!(sol.converged && !sol.heywood);
        let l = sol.loadings.as_matrix();
        let s_inv = s.as_matrix().clone().try_inverse().unwrap();
        let inner = l.transpose() * s_inv * l;
        prop_assert!((inner - DMatrix::identity(q, q)).abs().max() < 1e-8);
        let implied = reproduced_cov_from_loadings(&sol.loadings, &s).unwrap();
        prop_assert!(offdiag_gap(&sol.loadings.outer(), &implied) < 1e-8);
    }

    #[test]
    fn theorem_2_for_any_correlation_matrix((q, s) in sample_case()) {
        let sol = pca_extract(&s, q).unwrap();
        let w = predictor_weights(&sol, &s, PredictorKind::PcaComponent).unwrap();
        let implied = reproduced_cov_from_weights(&s, &w).unwrap();
        prop_assert!(offdiag_gap(&sol.loadings.outer(), &implied) < 1e-8);
    }

    #[test]
    fn regression_and_mcdonald_imply_the_same_covariance((q, s) in sample_case()) {
        for sol in [mfa_extract(&s, &ExtractionSettings::new(q)), spfa_extract(&s, &ExtractionSettings::new(q))] {
            let Ok(sol) = sol else { continue };
            let reg = reproduced_cov_from_weights(&s, &predictor_weights(&sol, &s, PredictorKind::Regression).unwrap()).unwrap();
            let mcd = reproduced_cov_from_weights(&s, &predictor_weights(&sol, &s, PredictorKind::Mcdonald).unwrap()).unwrap();
            let from_loadings = reproduced_cov_from_loadings(&sol.loadings, &s).unwrap();
            prop_assert!(reg.max_abs_diff(&mcd) < 1e-8);
            prop_assert!(reg.max_abs_diff(&from_loadings) < 1e-8);
        }
    }

    #[test]
    fn rotations_preserve_communalities_and_fit((q, _l, s) in factor_case(), seed in any::<u64>()) {
        let mut rng = ChaCha20Rng::seed_from_u64(seed);
        let sol = spfa_extract(&s, &ExtractionSettings::new(q)).unwrap();
        let before = fit_report(&s, &sol).unwrap();
        let target = LoadingMatrix::new(sol.loadings.as_matrix() * random_orthogonal(q, &mut rng)).unwrap();
        let mut transforms = vec![procrustes(&sol.loadings, &target).unwrap()];
        if q >= 2 {
            transforms.push(varimax_gpa(&sol.loadings, &VarimaxSettings::default(), &mut rng).unwrap());
        }
        for r in transforms {
            let t = &r.transform;
            prop_assert!((t.transpose() * t - DMatrix::identity(q, q)).abs().max() < 1e-10);
            prop_assert_eq!(r.rotated.as_matrix(), &(sol.loadings.as_matrix() * t));
            for (a, b) in sol.loadings.communalities().iter().zip(r.rotated.communalities()) {
                prop_assert!((a - b).abs() < 1e-10);
            }
            let after = fit_report(&s, &sol.rotated(t).unwrap()).unwrap();
            prop_assert!((after.srmr_nd_loadings - before.srmr_nd_loadings).abs() < 1e-10);
            prop_assert!((after.srmr_nd_scores - before.srmr_nd_scores).abs() < 1e-10);
        }
    }

    #[test]
    fn procrustes_is_locally_optimal((q, l, _s) in factor_case(), seed in any::<u64>()) {
        let mut rng = ChaCha20Rng::seed_from_u64(seed);
        let target = LoadingMatrix::new(l.as_matrix() * random_orthogonal(q, &mut rng) + DMatrix::from_element(l.p(), q, 0.05)).unwrap();
        let r = procrustes(&l, &target).unwrap();
        for _ in 0..20 {
            let k = rng.random_range(0..q.max(2) - 1);
            let angle = rng.random_range(-0.2..0.2);
            let mut g = DMatrix::identity(q, q);
            if q >= 2 {
                let (c, s) = (f64::cos(angle), f64::sin(angle));
                g[(k, k)] = c;
                g[(k + 1, k + 1)] = c;
                g[(k, k + 1)] = -s;
                g[(k + 1, k)] = s;
            } else {
                g[(0, 0)] = -1.0;
            }
            let perturbed = l.as_matrix() * (&r.transform * g);
            let rss = (perturbed - target.as_matrix()).norm_squared();
            prop_assert!(r.criterion <= rss + 1e-12);
        }
    }

    #[test]
    fn determinacies_are_correlations((q, l, s) in factor_case()) {
        let phi = SymMatrix::identity(q);
        let spfa = spfa_extract(&s, &ExtractionSettings::new(q)).unwrap();
        let mfa = mfa_extract(&s, &ExtractionSettings::new(q)).unwrap();
        let pca = pca_extract(&s, q).unwrap();
        let mut all = determinacy_spfa(&l, &phi, &s, &spfa.loadings).unwrap();
        all.extend(determinacy_pca(&l, &phi, &pca.loadings).unwrap());
        all.extend(determinacy_sample(&l, &phi, &s, &predictor_weights(&mfa, &s, PredictorKind::Regression).unwrap()).unwrap());
        for r in all {
            prop_assert!(r.is_finite() && (-1.0 - 1e-12..=1.0 + 1e-12).contains(&r), "rho = {}", r);
        }
    }

    #[test]
    fn eigen_desc_is_bit_deterministic_and_reconstructs((_q, l, s) in factor_case()) {
        let a = eigen_desc(&s).unwrap();
        let b = eigen_desc(&SymMatrix::new(s.as_matrix().clone()).unwrap()).unwrap();
        prop_assert_eq!(&a.values, &b.values);
        prop_assert_eq!(&a.vectors, &b.vectors);
        let f = psd_factor(&s).unwrap();
        prop_assert!((&f * f.transpose() - s.as_matrix()).abs().max() < 1e-10);
        prop_assert!(l.p() == s.dim());
    }

    #[test]
    fn model_error_populations_are_valid_correlation_matrices(
        q in 1usize..=3,
        per in 2usize..=5,
        base in 0.3f64..0.6,
        extra in 0.0f64..0.35,
        large in any::<bool>(),
        seed in any::<u64>(),
    ) {
        let level = if large { ModelError::Large } else { ModelError::Moderate };
        let spec = PopulationSpec::new(q, q * per, base, base + extra).with_model_error(level, seed);
        let pop = build_model_error_population(&spec).unwrap();
        let sigma = pop.sigma.as_matrix();
        prop_assert!((sigma - sigma.transpose()).abs().max() == 0.0);
        prop_assert!(pop.sigma.diagonal().iter().all(|d| (d - 1.0).abs() < 1e-12));
        prop_assert!(eigen_desc(&pop.sigma).unwrap().values.iter().all(|v| *v > 0.0));
        prop_assert!(pop.minor_loadings.iter().all(|w| (-1.0..=1.0).contains(w)));
        prop_assert!((pop.minor_share() - level.minor_share()).abs() < 1e-6);
        let again = build_model_error_population(&spec).unwrap();
        prop_assert_eq!(pop, again);
    }
}

#[test]
fn score_fit_improves_along_the_ladders() {
    for p in [9, 15] {
        let pops = ladder_populations(3, p, 0.5).unwrap();
        let srmr: Vec<f64> = pops
            .iter()
            .map(|pop| {
                let sol = spfa_extract(&pop.sigma, &ExtractionSettings::new(3)).unwrap();
                fit_report(&pop.sigma, &sol).unwrap().srmr_nd_scores
            })
            .collect();
        // `pops` runs from the largest leading loading down, so the score
        // misfit must not decrease along the vector.
        for w in srmr.windows(2) {
            assert!(w[1] >= w[0] - 1e-9, "p = {p}: {} then {}", w[0], w[1]);
        }
    }
}

fn sample_condition(q: usize, n: usize, base: f64, max: f64, seed: u64) -> SimCondition {
    SimCondition::new(
        StudyKind::Sample,
        q,
        5 * q,
        Some(n),
        base,
        max,
        ModelError::None,
        12,
        seed,
        RotationChoice::Procrustes,
    )
}

#[test]
fn parallel_and_serial_runs_agree() {
    let cond = sample_condition(3, 150, 0.4, 0.7, 21);
    assert_eq!(run_condition(&cond).unwrap(), run_condition_serial(&cond).unwrap());
}

#[test]
fn sample_replications_keep_the_score_fit_ordering() {
    let mut checked = 0;
    for (k, (base, max)) in [(0.35, 0.35), (0.4, 0.7), (0.5, 0.95)].into_iter().enumerate() {
        for n in [150, 600] {
            for rec in run_condition(&sample_condition(3, n, base, max, 40 + k as u64)).unwrap() {
                let m = |method| rec.method(method).unwrap();
                let (mfa, spfa, pca) = (m(spfa::Method::Mfa), m(spfa::Method::Spfa), m(spfa::Method::Pca));
                if mfa.is_failed() || spfa.is_failed() || pca.is_failed() {
                    continue;
                }
                let (ms, ss, ps) =
                    (mfa.srmr_nd_scores.unwrap(), spfa.srmr_nd_scores.unwrap(), pca.srmr_nd_scores.unwrap());
                assert!(ss <= ms + 1e-10, "{} rep {}: SPFA {ss} > MFA {ms}", rec.condition, rec.replication);
                assert!(ms <= ps + 1e-10, "{} rep {}: MFA {ms} > PCA {ps}", rec.condition, rec.replication);
                checked += 1;
            }
        }
    }
    assert!(checked > 60);
}
