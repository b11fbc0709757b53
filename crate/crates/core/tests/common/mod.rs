//! Independent oracles and random instances shared by the integration tests.
#![allow(dead_code)]

use ct_core::data::Response;
use ct_core::glm::GlmFamily;
use nalgebra::{DMatrix, DVector};
use ndarray::{Array2, ArrayView2};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;

pub fn rng(seed: u64) -> ChaCha8Rng {
    ChaCha8Rng::seed_from_u64(seed)
}

pub fn normal_matrix(rng: &mut ChaCha8Rng, n: usize, p: usize) -> Array2<f64> {
    Array2::from_shape_fn((n, p), |_| rng.sample(StandardNormal))
}

/// Response drawn from a sparse linear model on `x`; every class appears at
/// least once for classification families.
pub fn random_response(rng: &mut ChaCha8Rng, family: GlmFamily, x: ArrayView2<f64>) -> Response {
    let n = x.nrows();
    let k = family.n_outputs();
    let beta = Array2::from_shape_fn((k, x.ncols()), |_| {
        if rng.random_bool(0.5) {
            rng.sample::<f64, _>(StandardNormal)
        } else {
            0.0
        }
    });
    let eta = x.dot(&beta.t());
    match family {
        GlmFamily::Gaussian => Response::Real(
            (0..n)
                .map(|i| eta[[i, 0]] + rng.sample::<f64, _>(StandardNormal))
                .collect(),
        ),
        GlmFamily::Binomial => {
            let mut labels: Vec<usize> = (0..n)
                .map(|i| (rng.random::<f64>() < 1.0 / (1.0 + (-eta[[i, 0]]).exp())) as usize)
                .collect();
            labels[0] = 0;
            labels[1] = 1;
            Response::Classes { labels, n_classes: 2 }
        }
        GlmFamily::Multinomial { n_classes } => {
            let mut labels: Vec<usize> = (0..n)
                .map(|i| {
                    let e: Vec<f64> = (0..n_classes).map(|c| eta[[i, c]].exp()).collect();
                    let total: f64 = e.iter().sum();
                    let mut u = rng.random::<f64>() * total;
                    for (c, v) in e.iter().enumerate() {
                        if u < *v {
                            return c;
                        }
                        u -= v;
                    }
                    n_classes - 1
                })
                .collect();
            for (c, l) in labels.iter_mut().take(n_classes).enumerate() {
                *l = c;
            }
            Response::Classes { labels, n_classes }
        }
    }
}

fn distance(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| (x - y) * (x - y)).sum::<f64>().sqrt()
}

/// Complete linkage by brute force: every step rescans all cluster pairs and
/// all member pairs. Ties go to the pair with the lexicographically smallest
/// (smallest leaf, smallest leaf). Returns `(members_a, members_b, height)`
/// per merge with `min(a) < min(b)`.
pub fn naive_complete_linkage(rows: ArrayView2<f64>) -> Vec<(Vec<usize>, Vec<usize>, f64)> {
    let n = rows.nrows();
    let point = |i: usize| rows.row(i).to_vec();
    let mut clusters: Vec<Vec<usize>> = (0..n).map(|i| vec![i]).collect();
    let mut merges = Vec::new();
    while clusters.len() > 1 {
        let mut best: Option<(f64, usize, usize)> = None;
        for a in 0..clusters.len() {
            for b in 0..clusters.len() {
                if a == b || clusters[a][0] > clusters[b][0] {
                    continue;
                }
                let mut d: f64 = 0.0;
                for &i in &clusters[a] {
                    for &j in &clusters[b] {
                        d = d.max(distance(&point(i), &point(j)));
                    }
                }
                let better = match best {
                    None => true,
                    Some((bd, ba, bb)) => {
                        d < bd || (d == bd && (clusters[a][0], clusters[b][0]) < (clusters[ba][0], clusters[bb][0]))
                    }
                };
                if better {
                    best = Some((d, a, b));
                }
            }
        }
        let (d, a, b) = best.unwrap();
        let (ca, cb) = (clusters[a].clone(), clusters[b].clone());
        merges.push((ca.clone(), cb.clone(), d));
        let mut joined = [ca, cb].concat();
        joined.sort();
        let (lo, hi) = (a.min(b), a.max(b));
        clusters.remove(hi);
        clusters[lo] = joined;
        clusters.sort_by_key(|c| c[0]);
    }
    merges
}

/// Penalized objective on the original scale with the penalty measured on
/// standardized coefficients (`scales`), written out independently of the
/// library.
pub fn penalized_objective(
    family: GlmFamily,
    x: ArrayView2<f64>,
    y: &Response,
    b0: &[f64],
    beta: ArrayView2<f64>,
    lambda: f64,
    scales: &[f64],
) -> f64 {
    let n = x.nrows();
    let k = b0.len();
    let mut nll = 0.0;
    for i in 0..n {
        let eta: Vec<f64> = (0..k)
            .map(|c| b0[c] + (0..x.ncols()).map(|j| x[[i, j]] * beta[[c, j]]).sum::<f64>())
            .collect();
        nll += match (family, y) {
            (GlmFamily::Gaussian, Response::Real(v)) => 0.5 * (v[i] - eta[0]).powi(2),
            (GlmFamily::Binomial, Response::Classes { labels, .. }) => {
                (1.0 + eta[0].exp()).ln() - labels[i] as f64 * eta[0]
            }
            (GlmFamily::Multinomial { .. }, Response::Classes { labels, .. }) => {
                eta.iter().map(|e| e.exp()).sum::<f64>().ln() - eta[labels[i]]
            }
            _ => unreachable!(),
        };
    }
    let l1: f64 = beta
        .rows()
        .into_iter()
        .map(|r| r.iter().zip(scales).map(|(b, s)| (b * s).abs()).sum::<f64>())
        .sum();
    nll / n as f64 + lambda * l1
}

/// Population standard deviation per column.
pub fn column_sds(x: ArrayView2<f64>) -> Vec<f64> {
    let n = x.nrows() as f64;
    x.columns()
        .into_iter()
        .map(|c| {
            let m = c.sum() / n;
            (c.iter().map(|v| (v - m).powi(2)).sum::<f64>() / n).sqrt()
        })
        .collect()
}

/// Grid search over two (or one) coefficients of a single-output family,
/// with the intercept profiled out at every grid point. Refines the
/// grid around the incumbent, quartering its width each round. Returns the best objective.
pub fn grid_search_objective(
    family: GlmFamily,
    x: ArrayView2<f64>,
    y: &Response,
    lambda: f64,
    scales: &[f64],
    half_width: f64,
) -> f64 {
    let p = x.ncols();
    assert!(p <= 2 && family.n_outputs() == 1);
    let eval = |beta: &[f64]| {
        let offsets: Vec<f64> = (0..x.nrows())
            .map(|i| (0..p).map(|j| x[[i, j]] * beta[j]).sum::<f64>())
            .collect();
        let b0 = profile_intercept(family, y, &offsets);
        let b = Array2::from_shape_vec((1, p), beta.to_vec()).unwrap();
        penalized_objective(family, x, y, &[b0], b.view(), lambda, scales)
    };
    let steps = 40;
    let mut center = vec![0.0; p];
    let mut width = half_width;
    let mut best = eval(&center);
    for _ in 0..12 {
        let mut incumbent = center.clone();
        let axis = |k: usize, c: f64| c - width + 2.0 * width * k as f64 / steps as f64;
        if p == 1 {
            for a in 0..=steps {
                let v = eval(&[axis(a, center[0])]);
                if v < best {
                    best = v;
                    incumbent = vec![axis(a, center[0])];
                }
            }
        } else {
            for a in 0..=steps {
                for b in 0..=steps {
                    let beta = [axis(a, center[0]), axis(b, center[1])];
                    let v = eval(&beta);
                    if v < best {
                        best = v;
                        incumbent = beta.to_vec();
                    }
                }
            }
        }
        center = incumbent;
        width *= 0.25;
    }
    best
}

/// Intercept minimizing the unpenalized loss given fixed linear offsets:
/// the mean residual for gaussian, Newton's method for binomial.
fn profile_intercept(family: GlmFamily, y: &Response, offsets: &[f64]) -> f64 {
    let n = offsets.len() as f64;
    match (family, y) {
        (GlmFamily::Gaussian, Response::Real(v)) => v.iter().zip(offsets).map(|(y, o)| y - o).sum::<f64>() / n,
        (GlmFamily::Binomial, Response::Classes { labels, .. }) => {
            let mut b0 = 0.0f64;
            for _ in 0..100 {
                let (mut g, mut h) = (0.0, 0.0);
                for (l, o) in labels.iter().zip(offsets) {
                    let mu = 1.0 / (1.0 + (-(b0 + o)).exp());
                    g += mu - *l as f64;
                    h += mu * (1.0 - mu);
                }
                let step = (g / h.max(1e-12)).clamp(-5.0, 5.0);
                b0 -= step;
                if step.abs() < 1e-13 {
                    break;
                }
            }
            b0
        }
        _ => unreachable!(),
    }
}

/// Ordinary least squares with an intercept, via an SVD solve.
/// Returns `(intercept, coefficients)`.
pub fn ols(x: ArrayView2<f64>, y: &[f64]) -> (f64, Vec<f64>) {
    let (n, p) = x.dim();
    let a = DMatrix::from_fn(n, p + 1, |i, j| if j == 0 { 1.0 } else { x[[i, j - 1]] });
    let b = DVector::from_column_slice(y);
    let sol = a.svd(true, true).solve(&b, 1e-12).expect("svd solve");
    (sol[0], sol.iter().skip(1).copied().collect())
}

/// Central difference of `f` at `t` with step 1e-5.
pub fn derivative(f: impl Fn(f64) -> f64, t: f64) -> f64 {
    let h = 1e-5;
    (f(t + h) - f(t - h)) / (2.0 * h)
}
