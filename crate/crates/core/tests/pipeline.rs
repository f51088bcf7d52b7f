//! Cross-module integration: generate, decompose, regress, infer, and check
//! against the generating truth.

use tenfos_core::basis::{backproject, build_basis, project};
use tenfos_core::bayes::{run_sampler, ChainConfig, PriorSpec};
use tenfos_core::cp::{cp_als, AlsConfig};
use tenfos_core::rng::derive_seed;
use tenfos_core::simbas::{contrast_moments, simbas, ContrastSpec, ContrastStream, SampleStream};
use tenfos_core::synth::{generate, Covariate, SynthSpec};
use tenfos_core::tensor::{matricize, Mat};

fn strong_spec(seed: u64) -> SynthSpec {
    SynthSpec {
        spatial_dims: [8, 7, 6],
        n_subjects: 30,
        rank: 3,
        covariates: vec![Covariate::Binary],
        coef_true: Mat::from_row_slice(2, 3, &[1.5, -1.0, 0.8, 0.0, 0.0, 0.0]),
        noise_subject_sd: 0.02,
        noise_voxel_sd: 0.005,
        seed,
    }
}

#[test]
fn projection_recovers_scores_on_noiseless_data() {
    let mut spec = strong_spec(2);
    spec.noise_subject_sd = 0.0;
    spec.noise_voxel_sd = 0.0;
    let data = generate(&spec).unwrap();

    let als = AlsConfig {
        tol: 1e-13,
        ..AlsConfig::default()
    };
    let model = cp_als(&data.y4, 3, &als).unwrap();
    assert!(model.fit < 1e-10, "fit {}", model.fit);

    let basis = build_basis(&model).unwrap();
    let y = matricize(&data.y4, 3).unwrap();

    // project . backproject is the identity on the row space of L.
    let g = project(&y, &basis).unwrap();
    let y_back = backproject(&g, &basis).unwrap();
    let rel = (&y_back - &y).norm() / y.norm();
    assert!(rel < 1e-8, "projection round trip error {rel}");

    // The fitted scores reproduce the unfolding through the fitted loading.
    let recon = &model.factors[3] * &basis.loading;
    let rel = (&recon - &y).norm() / y.norm();
    assert!(rel < 1e-8, "scores-times-loading error {rel}");
}

#[test]
fn noiseless_fit_recovers_truth_up_to_canonical_form() {
    // A decomposition is only identified up to component permutation and
    // paired sign flips; comparing canonical forms removes both.
    let spec = SynthSpec {
        spatial_dims: [8, 7, 6],
        n_subjects: 30,
        rank: 3,
        covariates: vec![Covariate::Binary],
        coef_true: Mat::from_row_slice(2, 3, &[1.5, -1.0, 0.8, 0.3, -0.4, 0.5]),
        noise_subject_sd: 0.0,
        noise_voxel_sd: 0.0,
        seed: 33,
    };
    let data = generate(&spec).unwrap();
    let als = AlsConfig {
        tol: 1e-13,
        ..AlsConfig::default()
    };
    let model = cp_als(&data.y4, 3, &als).unwrap();
    assert!(model.fit < 1e-10);

    let truth_factors = vec![
        data.truth.factors[0].clone(),
        data.truth.factors[1].clone(),
        data.truth.factors[2].clone(),
        data.truth.scores.clone(),
    ];
    let (lam_truth, fac_truth) =
        tenfos_core::cp::canonicalize_model(&data.truth.lambda, &truth_factors);
    for (got, want) in model.lambda.iter().zip(&lam_truth) {
        assert!((got - want).abs() < 1e-6 * want, "weight {got} vs {want}");
    }
    for (got, want) in model.factors.iter().zip(&fac_truth) {
        assert!((got - want).abs().max() < 1e-6, "factor mismatch");
    }

    // Projecting the unfolding recovers the canonical subject scores.
    let basis = build_basis(&model).unwrap();
    let projected = project(&matricize(&data.y4, 3).unwrap(), &basis).unwrap();
    assert!((&projected - &fac_truth[3]).abs().max() < 1e-6);
}

#[test]
fn scores_times_loading_error_equals_model_fit() {
    // On noisy data the loading/scores split must reproduce the model's own
    // relative error: with the weights absorbed into L, G is the fourth
    // factor exactly.
    let data = generate(&strong_spec(21)).unwrap();
    let model = cp_als(&data.y4, 3, &AlsConfig::default()).unwrap();
    let basis = build_basis(&model).unwrap();
    let y = matricize(&data.y4, 3).unwrap();
    let err = (&model.factors[3] * &basis.loading - &y).norm() / y.norm();
    assert!(
        (err - model.fit).abs() < 1e-10,
        "unfolding error {err} vs model fit {}",
        model.fit
    );
}

#[test]
fn full_pipeline_flags_signal_not_null_covariate() {
    let data = generate(&strong_spec(5)).unwrap();
    let als = AlsConfig {
        tol: 1e-12,
        ..AlsConfig::default()
    };
    let model = cp_als(&data.y4, 3, &als).unwrap();
    let basis = build_basis(&model).unwrap();

    // The scores matrix has unit-norm columns, so its residual scale is far
    // below 1; match the inverse Wishart scale to it instead of using the
    // identity default, which would swamp the data.
    let p = data.design.ncols();
    let prior = PriorSpec::new(
        Mat::zeros(p, 3),
        Mat::identity(p, p) * 1e-6,
        Mat::identity(3, 3) * 1e-4,
        5.0,
    )
    .unwrap();
    let chain_cfg = ChainConfig {
        n_total: 1200,
        burn_in: 200,
        thin: 1,
        seed: derive_seed(5, 2),
    };
    let chain = run_sampler(&model.factors[3], &data.design, &prior, &chain_cfg).unwrap();

    // Intercept contrast: the strong-signal support must come out flagged.
    let intercept = ContrastSpec::new(vec![1.0, 0.0], "intercept").unwrap();
    let stream = ContrastStream::new(&chain, &basis, &intercept).unwrap();
    let (mean, std) = contrast_moments(&stream).unwrap();
    let result = simbas(&mean, &std, &stream, 0.01).unwrap();

    let truth_map = {
        let row = data.truth.coef.row(0).transpose();
        let mut m = vec![0.0; basis.n_voxels()];
        for (j, mj) in m.iter_mut().enumerate() {
            let mut acc = 0.0;
            for r in 0..3 {
                acc += row[r] * data.truth.loading[(r, j)];
            }
            *mj = acc;
        }
        m
    };
    let peak = truth_map.iter().fold(0.0f64, |a, &v| a.max(v.abs()));
    let strong: Vec<usize> = (0..truth_map.len())
        .filter(|&v| truth_map[v].abs() >= 0.5 * peak)
        .collect();
    assert!(!strong.is_empty());
    for &v in &strong {
        assert!(
            result.flags[v],
            "strong-signal voxel {v} (|C|={:.3e}) not flagged",
            truth_map[v].abs()
        );
    }

    // Null covariate contrast: nothing should light up.
    let null = ContrastSpec::new(vec![0.0, 1.0], "covariate").unwrap();
    let null_stream = ContrastStream::new(&chain, &basis, &null).unwrap();
    let (mean_n, std_n) = contrast_moments(&null_stream).unwrap();
    let null_result = simbas(&mean_n, &std_n, &null_stream, 0.01).unwrap();
    assert_eq!(
        null_result.n_flagged(),
        0,
        "null covariate flagged {} voxels",
        null_result.n_flagged()
    );
}

#[test]
fn streamed_contrast_matches_dense_backprojection() {
    let data = generate(&strong_spec(9)).unwrap();
    let model = cp_als(&data.y4, 3, &AlsConfig::default()).unwrap();
    let basis = build_basis(&model).unwrap();
    let prior = PriorSpec::weakly_informative(2, 3);
    let chain = run_sampler(
        &model.factors[3],
        &data.design,
        &prior,
        &ChainConfig {
            n_total: 40,
            burn_in: 10,
            thin: 1,
            seed: 3,
        },
    )
    .unwrap();

    let contrast = ContrastSpec::new(vec![1.0, -2.0], "diff").unwrap();
    let stream = ContrastStream::new(&chain, &basis, &contrast).unwrap();
    let mut row = vec![0.0; basis.n_voxels()];
    for (m, coef) in chain.coef_samples.iter().enumerate() {
        stream.fill_row(m, &mut row);
        let c = Mat::from_row_slice(1, 2, &[1.0, -2.0]);
        let dense = backproject(&(&c * coef), &basis).unwrap();
        for j in 0..basis.n_voxels() {
            assert!(
                (row[j] - dense[(0, j)]).abs() <= 1e-12 * dense[(0, j)].abs().max(1.0),
                "draw {m}, voxel {j}"
            );
        }
    }
}

#[test]
fn pipeline_is_deterministic_end_to_end() {
    let run_once = || {
        let data = generate(&strong_spec(7)).unwrap();
        let model = cp_als(&data.y4, 3, &AlsConfig::default()).unwrap();
        let basis = build_basis(&model).unwrap();
        let prior = PriorSpec::weakly_informative(2, 3);
        let chain = run_sampler(
            &model.factors[3],
            &data.design,
            &prior,
            &ChainConfig {
                n_total: 100,
                burn_in: 20,
                thin: 2,
                seed: 11,
            },
        )
        .unwrap();
        let contrast = ContrastSpec::new(vec![1.0, 0.0], "intercept").unwrap();
        let stream = ContrastStream::new(&chain, &basis, &contrast).unwrap();
        let (mean, std) = contrast_moments(&stream).unwrap();
        let result = simbas(&mean, &std, &stream, 0.05).unwrap();
        (result.psimbas, result.z_quantiles, mean, std)
    };
    let a = run_once();
    let b = run_once();
    assert_eq!(a.0, b.0);
    assert_eq!(a.1, b.1);
    assert_eq!(a.2, b.2);
    assert_eq!(a.3, b.3);
}
