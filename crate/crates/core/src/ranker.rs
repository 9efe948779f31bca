//! Impact-increment ranking learning (IIRL) and simple baselines.
//!
//! IIRL scores an author linearly, `s_hat = w . f`, and maximises
//!
//! ```text
//! J(w) = sum_{(i,j): s_i > s_j} ln sigma(s_hat_i - s_hat_j) - lambda * |w|^2
//! ```
//!
//! by stochastic gradient ascent over the ordered pairs, with the per-pair
//! update
//!
//! ```text
//! w <- w + alpha * ( sigma(-d) * (f_i - f_j) - lambda * w ),  d = s_hat_i - s_hat_j
//! ```
//!
//! The update is the exact gradient of the single-pair objective
//! `ln sigma(d) - (lambda / 2) |w|^2`, see [`pair_objective`].

use nalgebra::{DMatrix, DVector};
use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Normal};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::features::FeatureRow;

/// Ordered author pairs `(i, j)` with `s_i > s_j`, as row indices.
#[derive(Debug, Clone, PartialEq, Eq, Default, Serialize, Deserialize)]
pub struct PairSet {
    pub pairs: Vec<(usize, usize)>,
    /// Number of ordered pairs before any subsampling.
    pub total: usize,
    pub subsampled: bool,
}

impl PairSet {
    pub fn len(&self) -> usize {
        self.pairs.len()
    }

    pub fn is_empty(&self) -> bool {
        self.pairs.is_empty()
    }
}

/// All pairs with a strictly larger label first. When more than `cap`
/// exist, a seeded uniform sample of `cap` pairs is kept (reservoir
/// sampling over the row-major enumeration), returned in row-major order.
pub fn build_pairs(labels: &[f64], cap: usize, seed: u64) -> PairSet {
    let n = labels.len();
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut pairs = Vec::new();
    let mut total = 0usize;
    for i in 0..n {
        for j in 0..n {
            if labels[i] > labels[j] {
                total += 1;
                if pairs.len() < cap {
                    pairs.push((i, j));
                } else {
                    let slot = rng.gen_range(0..total);
                    if slot < cap {
                        pairs[slot] = (i, j);
                    }
                }
            }
        }
    }
    let subsampled = total > cap;
    if subsampled {
        pairs.sort_unstable();
    }
    PairSet {
        pairs,
        total,
        subsampled,
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct TrainConfig {
    pub alpha: f64,
    pub lambda_w: f64,
    pub max_epochs: usize,
    pub rel_tol: f64,
    pub pair_cap: usize,
    pub seed: u64,
}

impl Default for TrainConfig {
    fn default() -> Self {
        TrainConfig {
            alpha: 0.01,
            lambda_w: 0.01,
            max_epochs: 100,
            rel_tol: 1e-6,
            pair_cap: 2_000_000,
            seed: 0,
        }
    }
}

impl TrainConfig {
    pub fn validate(&self) -> Result<()> {
        if !(self.alpha > 0.0) || !(self.lambda_w >= 0.0) || self.max_epochs == 0 {
            return Err(Error::InvalidParameter(
                "train config needs alpha > 0, lambda_w >= 0, max_epochs >= 1".into(),
            ));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct IirlModel {
    /// One weight per feature column.
    pub weights: Vec<f64>,
    pub config: TrainConfig,
    pub epochs: usize,
    pub initial_objective: f64,
    pub objective: f64,
    /// Objective after each epoch.
    pub trace: Vec<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub warning: Option<String>,
}

impl IirlModel {
    pub fn score(&self, row: &[f64]) -> Result<f64> {
        iirl_score(&self.weights, row)
    }
}

fn dot(w: &[f64], f: &[f64]) -> f64 {
    w.iter().zip(f).map(|(a, b)| a * b).sum()
}

/// `ln sigma(x)`, stable for large `|x|`.
pub fn log_sigmoid(x: f64) -> f64 {
    if x >= 0.0 {
        -(-x).exp().ln_1p()
    } else {
        x - x.exp().ln_1p()
    }
}

/// `sigma(-x) = e^-x / (1 + e^-x)`, stable for large `|x|`.
fn sigmoid_neg(x: f64) -> f64 {
    if x >= 0.0 {
        let e = (-x).exp();
        e / (1.0 + e)
    } else {
        1.0 / (1.0 + x.exp())
    }
}

/// Linear score `w . f`.
pub fn iirl_score(weights: &[f64], row: &[f64]) -> Result<f64> {
    if weights.len() != row.len() {
        return Err(Error::Dimension {
            expected: weights.len(),
            got: row.len(),
        });
    }
    Ok(dot(weights, row))
}

/// Full objective `sum ln sigma(d) - lambda |w|^2`.
pub fn iirl_objective<R: AsRef<[f64]>>(weights: &[f64], pairs: &PairSet, rows: &[R], lambda_w: f64) -> f64 {
    let scores: Vec<f64> = rows.iter().map(|r| dot(weights, r.as_ref())).collect();
    let likelihood: f64 = pairs
        .pairs
        .iter()
        .map(|&(i, j)| log_sigmoid(scores[i] - scores[j]))
        .sum();
    likelihood - lambda_w * dot(weights, weights)
}

/// Single-pair objective `ln sigma(d) - (lambda / 2) |w|^2`, whose gradient
/// is the update direction of [`sgd_step`].
pub fn pair_objective<R: AsRef<[f64]>>(weights: &[f64], pair: (usize, usize), rows: &[R], lambda_w: f64) -> f64 {
    let d = dot(weights, rows[pair.0].as_ref()) - dot(weights, rows[pair.1].as_ref());
    log_sigmoid(d) - 0.5 * lambda_w * dot(weights, weights)
}

/// `sigma(-d) (f_i - f_j) - lambda w`.
pub fn pair_gradient<R: AsRef<[f64]>>(weights: &[f64], pair: (usize, usize), rows: &[R], lambda_w: f64) -> Vec<f64> {
    let (fi, fj) = (rows[pair.0].as_ref(), rows[pair.1].as_ref());
    let g = sigmoid_neg(dot(weights, fi) - dot(weights, fj));
    weights
        .iter()
        .enumerate()
        .map(|(k, w)| g * (fi[k] - fj[k]) - lambda_w * w)
        .collect()
}

/// One ascent step on a single pair, in place.
pub fn sgd_step<R: AsRef<[f64]>>(weights: &mut [f64], pair: (usize, usize), rows: &[R], alpha: f64, lambda_w: f64) {
    let (fi, fj) = (rows[pair.0].as_ref(), rows[pair.1].as_ref());
    let g = sigmoid_neg(dot(weights, fi) - dot(weights, fj));
    for (k, w) in weights.iter_mut().enumerate() {
        *w += alpha * (g * (fi[k] - fj[k]) - lambda_w * *w);
    }
}

/// Seeded `N(0, lambda_w I)` initial weights.
pub fn initial_weights(dim: usize, config: &TrainConfig, rng: &mut ChaCha8Rng) -> Vec<f64> {
    if config.lambda_w == 0.0 {
        return vec![0.0; dim];
    }
    let normal = Normal::new(0.0, config.lambda_w.sqrt()).expect("finite std");
    (0..dim).map(|_| normal.sample(rng)).collect()
}

/// Train by epochs of shuffled single-pair updates until `max_epochs` or
/// the relative objective change drops below `rel_tol`.
pub fn train_iirl<R: AsRef<[f64]>>(pairs: &PairSet, rows: &[R], config: &TrainConfig) -> Result<IirlModel> {
    config.validate()?;
    let Some(first) = rows.first() else {
        return Err(Error::InvalidParameter("empty feature matrix".into()));
    };
    let dim = first.as_ref().len();
    if let Some(bad) = rows.iter().find(|r| r.as_ref().len() != dim) {
        return Err(Error::Dimension {
            expected: dim,
            got: bad.as_ref().len(),
        });
    }
    let mut rng = ChaCha8Rng::seed_from_u64(config.seed);
    let mut weights = initial_weights(dim, config, &mut rng);
    let initial_objective = iirl_objective(&weights, pairs, rows, config.lambda_w);
    if pairs.is_empty() {
        log::warn!("no ordered pairs; returning initial weights");
        return Ok(IirlModel {
            weights,
            config: *config,
            epochs: 0,
            initial_objective,
            objective: initial_objective,
            trace: Vec::new(),
            warning: Some("empty pair set".into()),
        });
    }

    let mut order: Vec<usize> = (0..pairs.len()).collect();
    let mut trace = Vec::new();
    let mut previous = initial_objective;
    for _ in 0..config.max_epochs {
        order.shuffle(&mut rng);
        for &p in &order {
            sgd_step(&mut weights, pairs.pairs[p], rows, config.alpha, config.lambda_w);
        }
        let objective = iirl_objective(&weights, pairs, rows, config.lambda_w);
        trace.push(objective);
        let change = (objective - previous).abs() / (objective.abs() + 1e-12);
        previous = objective;
        if change < config.rel_tol {
            break;
        }
    }
    Ok(IirlModel {
        weights,
        config: *config,
        epochs: trace.len(),
        initial_objective,
        objective: previous,
        trace,
        warning: None,
    })
}

/// Base-1: current citation count (raw F2).
pub fn base1_score(raw: &FeatureRow) -> f64 {
    raw[1]
}

/// Base-2: average citation increment over the previous two years (raw F16).
pub fn base2_score(raw: &FeatureRow) -> f64 {
    raw[15]
}

/// Ridge least squares `min |X w - y|^2 + ridge |w|^2`, solved by QR of the
/// augmented system `[X; sqrt(ridge) I] w = [y; 0]`.
pub fn train_pointwise<R: AsRef<[f64]>>(rows: &[R], labels: &[f64], ridge: f64) -> Result<Vec<f64>> {
    if rows.len() != labels.len() {
        return Err(Error::Dimension {
            expected: rows.len(),
            got: labels.len(),
        });
    }
    let Some(first) = rows.first() else {
        return Err(Error::InvalidParameter("empty feature matrix".into()));
    };
    if !(ridge >= 0.0) {
        return Err(Error::InvalidParameter("ridge must be >= 0".into()));
    }
    let k = first.as_ref().len();
    let n = rows.len();
    if ridge == 0.0 && n < k {
        return Err(Error::Singular);
    }
    let m = n + k;
    let sqrt_ridge = ridge.sqrt();
    let a = DMatrix::from_fn(m, k, |r, c| {
        if r < n {
            rows[r].as_ref()[c]
        } else if r - n == c {
            sqrt_ridge
        } else {
            0.0
        }
    });
    let b = DVector::from_fn(m, |r, _| if r < n { labels[r] } else { 0.0 });
    let qr = a.qr();
    let r = qr.r();
    let max_diag = (0..k).map(|i| r[(i, i)].abs()).fold(0.0, f64::max);
    if max_diag == 0.0 || (0..k).any(|i| r[(i, i)].abs() <= 1e-12 * max_diag) {
        return Err(Error::Singular);
    }
    let rhs = qr.q().transpose() * b;
    let w = r.solve_upper_triangular(&rhs).ok_or(Error::Singular)?;
    Ok(w.iter().copied().collect())
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn ties_make_no_pairs() {
        let p = build_pairs(&[3.0, 1.0, 1.0], 100, 0);
        assert_eq!(p.pairs, vec![(0, 1), (0, 2)]);
        assert!(build_pairs(&[2.0], 100, 0).is_empty());
    }

    #[test]
    fn distinct_labels_make_all_pairs() {
        let labels: Vec<f64> = (0..12).map(|x| x as f64).collect();
        assert_eq!(build_pairs(&labels, 1000, 0).len(), 12 * 11 / 2);
    }

    #[test]
    fn capped_pairs_are_a_seeded_subset() {
        let labels: Vec<f64> = (0..40).map(|x| x as f64).collect();
        let a = build_pairs(&labels, 100, 5);
        assert_eq!(a.len(), 100);
        assert_eq!(a.total, 780);
        assert!(a.subsampled);
        assert!(a.pairs.iter().all(|&(i, j)| labels[i] > labels[j]));
        assert_eq!(a, build_pairs(&labels, 100, 5));
        assert_ne!(a, build_pairs(&labels, 100, 6));
    }

    #[test]
    fn score_basics() {
        let row = [1.0, 2.0, 3.0];
        assert_eq!(iirl_score(&[0.0; 3], &row).unwrap(), 0.0);
        assert_eq!(iirl_score(&[0.0, 1.0, 0.0], &row).unwrap(), 2.0);
        assert!(matches!(
            iirl_score(&[0.0; 2], &row),
            Err(Error::Dimension { expected: 2, got: 3 })
        ));
    }

    #[test]
    fn objective_at_zero_weights() {
        let rows = vec![vec![1.0], vec![0.0]];
        let pairs = PairSet {
            pairs: vec![(0, 1); 10],
            total: 10,
            subsampled: false,
        };
        let j = iirl_objective(&[0.0], &pairs, &rows, 0.01);
        assert!((j - 10.0 * 0.5f64.ln()).abs() < 1e-12);
        assert_eq!(iirl_objective(&[0.0], &PairSet::default(), &rows, 0.01), 0.0);
    }

    #[test]
    fn log_sigmoid_is_stable() {
        assert!((log_sigmoid(700.0)).abs() < 1e-300);
        assert!((log_sigmoid(-700.0) + 700.0).abs() < 1e-9);
        assert!(log_sigmoid(-700.0).is_finite());
        for x in [-3.0, -0.5, 0.0, 0.5, 3.0] {
            let naive = (1.0 / (1.0 + f64::exp(-x))).ln();
            assert!((log_sigmoid(x) - naive).abs() < 1e-14);
        }
    }

    #[test]
    fn step_from_zero_weights() {
        let rows = vec![vec![3.0, 1.0], vec![1.0, 2.0]];
        let mut w = vec![0.0, 0.0];
        sgd_step(&mut w, (0, 1), &rows, 0.1, 0.01);
        assert!((w[0] - 0.1 * 0.5 * 2.0).abs() < 1e-15);
        assert!((w[1] + 0.1 * 0.5).abs() < 1e-15);
    }

    #[test]
    fn equal_features_only_decay() {
        let rows = vec![vec![1.0, 2.0], vec![1.0, 2.0]];
        let mut w = vec![0.5, -2.0];
        sgd_step(&mut w, (0, 1), &rows, 0.01, 0.01);
        let f = 1.0 - 0.01 * 0.01;
        assert!((w[0] - 0.5 * f).abs() < 1e-15);
        assert!((w[1] + 2.0 * f).abs() < 1e-15);
    }

    #[test]
    fn empty_pairs_return_initialisation() {
        let rows = vec![vec![1.0; 18]];
        let cfg = TrainConfig {
            seed: 9,
            ..Default::default()
        };
        let m = train_iirl(&PairSet::default(), &rows, &cfg).unwrap();
        let mut rng = ChaCha8Rng::seed_from_u64(9);
        assert_eq!(m.weights, initial_weights(18, &cfg, &mut rng));
        assert_eq!(m.epochs, 0);
        assert!(m.warning.is_some());
    }

    #[test]
    fn baselines_read_raw_columns() {
        let mut row = [0.0; 18];
        row[1] = 134.0;
        row[15] = 99.0;
        assert_eq!(base1_score(&row), 134.0);
        assert_eq!(base2_score(&row), 99.0);
    }

    #[test]
    fn pointwise_interpolates_exact_labels() {
        let rows: Vec<Vec<f64>> = (0..10)
            .map(|i| vec![1.0, i as f64, (i * i) as f64 * 0.1])
            .collect();
        let labels: Vec<f64> = rows.iter().map(|r| 2.0 - r[1] + 3.0 * r[2]).collect();
        let w = train_pointwise(&rows, &labels, 0.0).unwrap();
        let resid: f64 = rows
            .iter()
            .zip(&labels)
            .map(|(r, y)| (dot(&w, r) - y).powi(2))
            .sum::<f64>()
            .sqrt();
        assert!(resid < 1e-8, "{resid}");
    }

    #[test]
    fn pointwise_large_ridge_shrinks() {
        let rows: Vec<Vec<f64>> = (0..10).map(|i| vec![1.0, i as f64]).collect();
        let labels: Vec<f64> = (0..10).map(|i| i as f64).collect();
        let w = train_pointwise(&rows, &labels, 1e12).unwrap();
        assert!(w.iter().all(|x| x.abs() < 1e-8));
    }

    #[test]
    fn pointwise_singular_without_ridge() {
        let rows = vec![vec![1.0, 0.0], vec![2.0, 0.0], vec![3.0, 0.0]];
        let err = train_pointwise(&rows, &[1.0, 2.0, 3.0], 0.0).unwrap_err();
        assert!(err.to_string().contains("ridge > 0"));
        assert!(train_pointwise(&rows, &[1.0, 2.0, 3.0], 0.1).is_ok());
    }
}
