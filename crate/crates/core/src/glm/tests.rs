use ndarray::{array, Array2};

use super::*;

fn unscaled() -> GlmOptions {
    GlmOptions {
        standardize: false,
        ..GlmOptions::default()
    }
}

/// Centered columns with `(1/n) X^T X = I` on three rows.
fn orthonormal_3x2() -> Array2<f64> {
    let a = 1.5f64.sqrt();
    let b = 0.5f64.sqrt();
    array![[a, b], [0.0, -2.0 * b], [-a, b]]
}

#[test]
fn fractions_are_log_spaced() {
    let f = lambda_fractions(100, 0.01).unwrap();
    assert_eq!(f.len(), 100);
    assert_eq!(f[0], 1.0);
    assert!((f[99] - 0.01).abs() < 1e-15);
    let ratio = f[1] / f[0];
    for w in f.windows(2) {
        assert!((w[1] / w[0] - ratio).abs() < 1e-12);
    }
    assert_eq!(lambda_fractions(1, 0.01).unwrap(), vec![1.0]);
    assert!(lambda_fractions(10, 1.0).is_err());
    assert!(lambda_fractions(0, 0.5).is_err());
}

#[test]
fn default_ratio_depends_on_shape() {
    assert_eq!(default_lambda_min_ratio(300, 100), 0.01);
    assert_eq!(default_lambda_min_ratio(100, 100), 0.05);
}

#[test]
fn lambda_max_on_two_point_design() {
    // Standardized two-row columns are (1, -1) and (-1, 1).
    let x = array![[1.0, -1.0], [-1.0, 1.0]];
    let y = Response::Real(vec![1.0, -1.0]);
    let path = compute_lambda_path(x.view(), &y, GlmFamily::Gaussian, 5, 0.1).unwrap();
    let LambdaPath::Regular(path) = path else { panic!() };
    // max_j |x_j^T y| / n = |1 + 1| / 2
    assert_eq!(path[0], 1.0);
    assert_eq!(path.len(), 5);
    assert!((path[4] - 0.1).abs() < 1e-15);

    let single = compute_lambda_path(x.view(), &y, GlmFamily::Gaussian, 1, 0.1).unwrap();
    assert_eq!(single, LambdaPath::Regular(vec![1.0]));
}

#[test]
fn constant_gaussian_response_gives_zero_path() {
    let x = array![[1.0], [2.0], [3.0]];
    let y = Response::Real(vec![4.0, 4.0, 4.0]);
    let path = compute_lambda_path(x.view(), &y, GlmFamily::Gaussian, 10, 0.01).unwrap();
    assert_eq!(path, LambdaPath::Regular(vec![0.0]));
}

#[test]
fn single_class_path_is_flagged() {
    let x = array![[1.0], [2.0], [3.0]];
    let y = Response::Classes { labels: vec![1, 1, 1], n_classes: 2 };
    let path = compute_lambda_path(x.view(), &y, GlmFamily::Binomial, 10, 0.01).unwrap();
    assert_eq!(path, LambdaPath::SingleClass { class: 1 });
}

#[test]
fn null_solution_at_lambda_max() {
    let x = array![[0.3, 1.0], [1.2, -0.5], [2.2, 0.1], [-0.7, 0.9], [0.0, 2.0]];
    let yr = Response::Real(vec![1.0, 2.0, 0.5, -1.0, 3.0]);
    let fit = fit_glm_fractions(x.view(), &yr, GlmFamily::Gaussian, &[1.0, 0.5], &GlmOptions::default(), None)
        .unwrap();
    assert!(fit.coefficients[0].iter().all(|&b| b == 0.0));
    assert!((fit.intercepts[0][0] - 1.1).abs() < 1e-12);

    let yb = Response::Classes { labels: vec![1, 0, 1, 1, 0], n_classes: 2 };
    let fit = fit_glm_fractions(x.view(), &yb, GlmFamily::Binomial, &[1.0], &GlmOptions::default(), None)
        .unwrap();
    assert!(fit.coefficients[0].iter().all(|&b| b == 0.0));
    assert!((fit.intercepts[0][0] - (0.6f64 / 0.4).ln()).abs() < 1e-12);
}

#[test]
fn orthonormal_design_matches_soft_threshold() {
    let x = orthonormal_3x2();
    let yv = [2.0, 0.5, -1.0];
    let y = Response::Real(yv.to_vec());
    let lambdas = [0.9, 0.6, 0.3, 0.1, 0.01];
    let fit = fit_glm_path(x.view(), &y, GlmFamily::Gaussian, &lambdas, &unscaled(), None).unwrap();
    for (l, &lambda) in lambdas.iter().enumerate() {
        for j in 0..2 {
            let xty: f64 = (0..3).map(|i| x[[i, j]] * yv[i]).sum::<f64>() / 3.0;
            let expected = soft_threshold(xty, lambda);
            assert!(
                (fit.coefficients[l][[0, j]] - expected).abs() < 1e-6,
                "lambda {lambda}, coef {j}"
            );
        }
        assert!((fit.intercepts[l][0] - 0.5).abs() < 1e-6);
    }
}

#[test]
fn closed_form_agrees_with_grid_search() {
    // Independent check of the closed form itself on the same instance.
    let x = orthonormal_3x2();
    let yv = [2.0, 0.5, -1.0];
    let ybar = 0.5;
    let lambda = 0.3;
    let objective = |b1: f64, b2: f64| {
        let rss: f64 = (0..3)
            .map(|i| {
                let r = yv[i] - ybar - x[[i, 0]] * b1 - x[[i, 1]] * b2;
                r * r
            })
            .sum();
        rss / 6.0 + lambda * (b1.abs() + b2.abs())
    };
    let (mut best, mut arg) = (f64::INFINITY, (0.0, 0.0));
    let steps = 1200;
    for a in 0..=steps {
        for b in 0..=steps {
            let b1 = -3.0 + 6.0 * a as f64 / steps as f64;
            let b2 = -3.0 + 6.0 * b as f64 / steps as f64;
            let v = objective(b1, b2);
            if v < best {
                best = v;
                arg = (b1, b2);
            }
        }
    }
    let closed: Vec<f64> = (0..2)
        .map(|j| soft_threshold((0..3).map(|i| x[[i, j]] * yv[i]).sum::<f64>() / 3.0, lambda))
        .collect();
    assert!((arg.0 - closed[0]).abs() <= 0.005);
    assert!((arg.1 - closed[1]).abs() <= 0.005);
    assert!(objective(closed[0], closed[1]) <= best + 1e-12);
}

#[test]
fn all_class_one_saturates_intercept() {
    let x = array![[0.1, 1.0], [0.5, 0.2], [0.9, -0.3]];
    let y = Response::Classes { labels: vec![1, 1, 1], n_classes: 2 };
    let fit = fit_glm_path(x.view(), &y, GlmFamily::Binomial, &[0.5, 0.1], &GlmOptions::default(), None).unwrap();
    assert!(fit.saturated);
    for l in 0..2 {
        assert_eq!(fit.intercepts[l][0], INTERCEPT_CLIP);
        assert!(fit.coefficients[l].iter().all(|&b| b == 0.0));
    }
}

#[test]
fn rejects_bad_penalties_and_family_mismatch() {
    let x = array![[0.1], [0.5], [0.9]];
    let y = Response::Real(vec![1.0, 2.0, 3.0]);
    assert!(fit_glm_path(x.view(), &y, GlmFamily::Gaussian, &[0.1, 0.2], &GlmOptions::default(), None).is_err());
    assert!(fit_glm_path(x.view(), &y, GlmFamily::Binomial, &[0.1], &GlmOptions::default(), None).is_err());
}

fn intercept_only(family: GlmFamily, b0: Vec<f64>, p: usize) -> GlmFit {
    let k = family.n_outputs();
    GlmFit {
        family,
        lambdas: vec![1.0],
        intercepts: vec![b0],
        coefficients: vec![Array2::zeros((k, p))],
        n_train: 1,
        feature_names: (0..p).map(|j| format!("x{j}")).collect(),
        standardizer: Standardizer {
            means: vec![0.0; p],
            scales: vec![1.0; p],
        },
        converged: vec![true],
        saturated: false,
    }
}

#[test]
fn prediction_examples() {
    let x = array![[1.0, 2.0], [-3.0, 0.5], [10.0, -7.0]];
    let g = intercept_only(GlmFamily::Gaussian, vec![2.5], 2);
    assert_eq!(g.predict_response(0, x.view()).unwrap(), vec![2.5; 3]);

    let b = intercept_only(GlmFamily::Binomial, vec![0.0], 2);
    assert_eq!(b.predict_response(0, x.view()).unwrap(), vec![0.5; 3]);

    let m = intercept_only(GlmFamily::Multinomial { n_classes: 3 }, vec![0.7, 0.7, 0.7], 2);
    let p = m.predict_proba(0, x.view()).unwrap();
    for v in p.iter() {
        assert!((v - 1.0 / 3.0).abs() < 1e-15);
    }

    assert!(g.predict_response(0, array![[1.0]].view()).is_err());
    assert!(g.predict_response(1, x.view()).is_err());
}

#[test]
fn class_mode_uses_decision_weights() {
    // p(class 1) = logistic(ln(0.4/0.6)) = 0.4
    let b = intercept_only(GlmFamily::Binomial, vec![(0.4f64 / 0.6).ln()], 1);
    let x = array![[0.0]];
    assert_eq!(b.predict_class(0, x.view(), None).unwrap(), vec![0]);
    assert_eq!(b.predict_class(0, x.view(), Some(&[1.0, 2.0])).unwrap(), vec![1]);
}

#[test]
fn multinomial_with_absent_class_keeps_it_negligible() {
    let x = array![[0.0], [0.2], [1.0], [1.3], [0.4], [1.1]];
    let y = Response::Classes { labels: vec![0, 0, 2, 2, 0, 2], n_classes: 3 };
    let fit = fit_glm_fractions(
        x.view(),
        &y,
        GlmFamily::Multinomial { n_classes: 3 },
        &lambda_fractions(20, 0.05).unwrap(),
        &GlmOptions::default(),
        None,
    )
    .unwrap();
    let last = fit.lambdas.len() - 1;
    let p = fit.predict_proba(last, x.view()).unwrap();
    for row in p.rows() {
        assert!(row[1] < 1e-9);
        assert!((row.sum() - 1.0).abs() < 1e-12);
    }
    assert!(fit.kkt_violation(last, x.view(), &y, None).unwrap() < 1e-4);
}

#[test]
fn fit_serializes_sparsely_and_round_trips() {
    let x = array![[0.3, 1.0, 5.0], [1.2, -0.5, 5.0], [2.2, 0.1, 5.0], [-0.7, 0.9, 5.0], [0.0, 2.0, 5.0]];
    let y = Response::Real(vec![1.0, 2.0, 0.5, -1.0, 3.0]);
    let fit = fit_glm_fractions(x.view(), &y, GlmFamily::Gaussian, &lambda_fractions(5, 0.01).unwrap(), &GlmOptions::default(), None)
        .unwrap()
        .with_feature_names(vec!["a".into(), "b".into(), "c".into()]);
    let json = serde_json::to_string(&fit).unwrap();
    let doc: serde_json::Value = serde_json::from_str(&json).unwrap();
    assert_eq!(doc["family"]["kind"], "gaussian");
    assert_eq!(doc["path"][0]["coefficients"][0].as_array().unwrap().len(), 0);
    assert_eq!(doc["feature_names"][2], "c");
    let back: GlmFit = serde_json::from_str(&json).unwrap();
    assert_eq!(back, fit);
}
