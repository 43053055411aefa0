//! Exact O(N²) t-SNE in two dimensions.
//!
//! Gaussian affinities are calibrated per row by bisection on the precision
//! so that each conditional distribution has the requested perplexity, then
//! symmetrized. The map minimizes KL(P‖Q) with Student-t (one degree of
//! freedom) affinities Q by gradient descent with momentum, per-parameter
//! adaptive gains and early exaggeration.

use ndarray::{s, Array2, ArrayView2, Axis};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::linalg::{pairwise_sq_dists, svd_with, SvdOptions};
use crate::matrix::FeatureMatrix;
use crate::rng::{SplitMix64, Stream};

const MAX_BISECTION_STEPS: usize = 64;
/// Entropy tolerance in nats; keeps 2^H within ~1e-5 of the target.
const ENTROPY_TOLERANCE: f64 = 1e-5;
const MIN_GAIN: f64 = 0.01;
const KL_EVERY: usize = 50;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum TsneInit {
    Pca,
    Random,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct TsneConfig {
    pub perplexity: f64,
    pub n_iter: usize,
    pub early_exaggeration: f64,
    /// Iterations (from 1) that use exaggerated P.
    pub exaggeration_iters: usize,
    pub learning_rate: f64,
    pub momentum: f64,
    pub final_momentum: f64,
    /// Last iteration that uses `momentum`.
    pub momentum_switch: usize,
    pub seed: u64,
    pub init: TsneInit,
}

impl Default for TsneConfig {
    fn default() -> Self {
        Self {
            perplexity: 30.0,
            n_iter: 1000,
            early_exaggeration: 12.0,
            exaggeration_iters: 250,
            learning_rate: 200.0,
            momentum: 0.5,
            final_momentum: 0.8,
            momentum_switch: 250,
            seed: 0,
            init: TsneInit::Pca,
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct TsneEmbedding {
    pub coords: Array2<f64>,
    pub final_kl: f64,
    /// `(iteration, KL)` every 50 iterations, measured against the true P.
    pub kl_trace: Vec<(usize, f64)>,
}

#[derive(Clone, Debug, PartialEq)]
pub struct JointProbabilities {
    /// Symmetric, zero diagonal, sums to 1.
    pub p: Array2<f64>,
    /// Calibrated Gaussian precision `1 / (2σ_i²)` per row.
    pub betas: Vec<f64>,
    /// Achieved perplexity `exp(H(P_i))` per row.
    pub perplexities: Vec<f64>,
}

/// Conditional row distribution for a precision; returns (probabilities, entropy in nats).
fn conditional_row(shifted: &[f64], beta: f64, own: usize) -> (Vec<f64>, f64) {
    let mut w: Vec<f64> = shifted.iter().map(|d| (-beta * d).exp()).collect();
    w[own] = 0.0;
    let total: f64 = w.iter().sum();
    let weighted: f64 = w.iter().zip(shifted).map(|(p, d)| p * d).sum();
    let entropy = total.ln() + beta * weighted / total;
    w.iter_mut().for_each(|p| *p /= total);
    (w, entropy)
}

/// Symmetrized Gaussian affinities at the given perplexity.
///
/// Rows whose distances to all other points are equal have a perplexity of
/// exactly `N − 1` at any bandwidth; those rows are accepted as uniform.
pub fn joint_probabilities(x: ArrayView2<'_, f64>, perplexity: f64) -> Result<JointProbabilities> {
    let n = x.nrows();
    if n < 2 {
        return Err(Error::PerplexityInfeasible(format!("need at least 2 points, got {n}")));
    }
    if !(perplexity > 0.0 && perplexity <= (n - 1) as f64) {
        return Err(Error::PerplexityInfeasible(format!(
            "perplexity {perplexity} must lie in (0, {}] for {n} points",
            n - 1
        )));
    }
    let dists = pairwise_sq_dists(x);
    let target = perplexity.ln();
    let mut cond = Array2::<f64>::zeros((n, n));
    let mut betas = Vec::with_capacity(n);
    let mut perplexities = Vec::with_capacity(n);
    for i in 0..n {
        let row = dists.row(i);
        let min = (0..n).filter(|&j| j != i).map(|j| row[j]).fold(f64::INFINITY, f64::min);
        let shifted: Vec<f64> = row.iter().map(|d| (d - min).max(0.0)).collect();
        let spread = (0..n).filter(|&j| j != i).map(|j| shifted[j]).fold(0.0, f64::max);
        let mean_gap = shifted.iter().sum::<f64>() / (n - 1) as f64;

        let flat = spread <= 1e-12 * row.iter().copied().fold(1.0, f64::max);
        if flat {
            let uniform = 1.0 / (n - 1) as f64;
            cond.row_mut(i).fill(uniform);
            cond[[i, i]] = 0.0;
            betas.push(0.0);
            perplexities.push((n - 1) as f64);
            continue;
        }

        let mut beta = 1.0 / mean_gap;
        let (mut lo, mut hi) = (0.0_f64, f64::INFINITY);
        let (mut probs, mut entropy) = conditional_row(&shifted, beta, i);
        let mut converged = (entropy - target).abs() < ENTROPY_TOLERANCE;
        for _ in 0..MAX_BISECTION_STEPS {
            if converged {
                break;
            }
            if entropy > target {
                lo = beta;
                beta = if hi.is_finite() { (beta + hi) / 2.0 } else { beta * 2.0 };
            } else {
                hi = beta;
                beta = (beta + lo) / 2.0;
            }
            (probs, entropy) = conditional_row(&shifted, beta, i);
            converged = (entropy - target).abs() < ENTROPY_TOLERANCE;
        }
        if !converged {
            return Err(Error::PerplexityInfeasible(format!(
                "row {i}: bandwidth search reached perplexity {:.6} for target {perplexity}",
                entropy.exp()
            )));
        }
        cond.row_mut(i).assign(&ndarray::Array1::from(probs));
        betas.push(beta);
        perplexities.push(entropy.exp());
    }
    let mut p = &cond + &cond.t();
    p /= 2.0 * n as f64;
    Ok(JointProbabilities { p, betas, perplexities })
}

/// Student-t kernel values `1 / (1 + |y_i − y_j|²)` (zero diagonal) and their sum.
fn student_kernel(y: &Array2<f64>) -> (Array2<f64>, f64) {
    let n = y.nrows();
    let mut num = Array2::<f64>::zeros((n, n));
    let mut total = 0.0;
    for i in 0..n {
        for j in i + 1..n {
            let dx = y[[i, 0]] - y[[j, 0]];
            let dy = y[[i, 1]] - y[[j, 1]];
            let v = 1.0 / (1.0 + dx * dx + dy * dy);
            num[[i, j]] = v;
            num[[j, i]] = v;
            total += 2.0 * v;
        }
    }
    (num, total)
}

/// Low-dimensional affinities Q for an N×2 map.
pub fn student_q(y: &Array2<f64>) -> Array2<f64> {
    let (num, total) = student_kernel(y);
    num / total
}

/// KL(P‖Q) over entries with `p > 0`.
pub fn kl_divergence(p: &Array2<f64>, y: &Array2<f64>) -> f64 {
    let (num, total) = student_kernel(y);
    p.indexed_iter()
        .filter(|(_, &pij)| pij > 0.0)
        .map(|((i, j), &pij)| pij * (pij / (num[[i, j]] / total).max(f64::MIN_POSITIVE)).ln())
        .sum()
}

/// Analytic gradient `4 Σ_j (p_ij − q_ij)(y_i − y_j)/(1 + |y_i − y_j|²)`.
pub fn kl_gradient(p: &Array2<f64>, y: &Array2<f64>) -> Array2<f64> {
    let n = y.nrows();
    let (num, total) = student_kernel(y);
    let mut grad = Array2::<f64>::zeros((n, 2));
    for i in 0..n {
        let (mut gx, mut gy) = (0.0, 0.0);
        for j in 0..n {
            if i == j {
                continue;
            }
            let w = (p[[i, j]] - num[[i, j]] / total) * num[[i, j]];
            gx += w * (y[[i, 0]] - y[[j, 0]]);
            gy += w * (y[[i, 1]] - y[[j, 1]]);
        }
        grad[[i, 0]] = 4.0 * gx;
        grad[[i, 1]] = 4.0 * gy;
    }
    grad
}

fn initial_map(x: &FeatureMatrix, config: &TsneConfig) -> Result<Array2<f64>> {
    let n = x.n_rows();
    match config.init {
        TsneInit::Random => {
            let mut rng = SplitMix64::derive(config.seed, Stream::TsneInit);
            Ok(Array2::from_shape_simple_fn((n, 2), || 1e-4 * rng.standard_normal()))
        }
        TsneInit::Pca => {
            let f = svd_with(x, SvdOptions { center: true })?;
            let mut means = x.as_array().mean_axis(Axis(0)).expect("non-empty");
            means.mapv_inplace(|v| -v);
            let centered = x.as_array() + &means.insert_axis(Axis(0));
            let mut y = Array2::<f64>::zeros((n, 2));
            let dims = f.v.ncols().min(2);
            y.slice_mut(s![.., ..dims]).assign(&centered.dot(&f.v.slice(s![.., ..dims])));
            let col = y.column(0);
            let mean = col.mean().unwrap_or(0.0);
            let std = (col.iter().map(|v| (v - mean).powi(2)).sum::<f64>() / n as f64).sqrt();
            if std > 0.0 {
                y *= 1e-4 / std;
            }
            Ok(y)
        }
    }
}

/// Embeds the rows of `x` in two dimensions.
pub fn fit(x: &FeatureMatrix, config: &TsneConfig) -> Result<TsneEmbedding> {
    let n = x.n_rows();
    if n < 4 {
        return Err(Error::PerplexityInfeasible(format!("t-SNE needs at least 4 points, got {n}")));
    }
    if !(config.perplexity < (n - 1) as f64 / 3.0) {
        return Err(Error::PerplexityInfeasible(format!(
            "perplexity {} must be below (N-1)/3 = {:.3}",
            config.perplexity,
            (n - 1) as f64 / 3.0
        )));
    }
    let p = joint_probabilities(x.view(), config.perplexity)?.p;
    let mut y = initial_map(x, config)?;
    let mut velocity = Array2::<f64>::zeros((n, 2));
    let mut gains = Array2::<f64>::ones((n, 2));
    let exaggerated = &p * config.early_exaggeration;
    let mut kl_trace = Vec::new();

    for iteration in 1..=config.n_iter {
        let target = if iteration <= config.exaggeration_iters { &exaggerated } else { &p };
        let grad = kl_gradient(target, &y);
        if grad.iter().any(|g| !g.is_finite()) {
            return Err(Error::NonFiniteGradient { iteration });
        }
        let momentum = if iteration <= config.momentum_switch { config.momentum } else { config.final_momentum };
        ndarray::Zip::from(&mut gains).and(&grad).and(&velocity).for_each(|g, &d, &v| {
            *g = if (d > 0.0) != (v > 0.0) { *g + 0.2 } else { *g * 0.8 };
            if *g < MIN_GAIN {
                *g = MIN_GAIN;
            }
        });
        ndarray::Zip::from(&mut velocity).and(&gains).and(&grad).for_each(|v, &g, &d| {
            *v = momentum * *v - config.learning_rate * g * d;
        });
        y += &velocity;
        let mean = y.mean_axis(Axis(0)).expect("non-empty");
        y -= &mean.insert_axis(Axis(0));
        if y.iter().any(|v| !v.is_finite()) {
            return Err(Error::NonFiniteGradient { iteration });
        }
        if iteration % KL_EVERY == 0 {
            kl_trace.push((iteration, kl_divergence(&p, &y)));
        }
    }
    let final_kl = match kl_trace.last() {
        Some(&(it, kl)) if it == config.n_iter => kl,
        _ => kl_divergence(&p, &y),
    };
    Ok(TsneEmbedding { coords: y, final_kl: final_kl.max(0.0), kl_trace })
}

#[cfg(test)]
mod tests {
    use super::*;
    use ndarray::array;

    #[test]
    fn equilateral_triangle_is_uniform() {
        let h = 3f64.sqrt() / 2.0;
        let x = array![[0.0, 0.0], [1.0, 0.0], [0.5, h]];
        let jp = joint_probabilities(x.view(), 1.5).unwrap();
        for i in 0..3 {
            for j in 0..3 {
                let expected = if i == j { 0.0 } else { 1.0 / 6.0 };
                assert!((jp.p[[i, j]] - expected).abs() < 1e-12);
            }
        }
    }

    #[test]
    fn rejects_bad_perplexity() {
        let x = array![[0.0], [1.0], [2.0], [3.0]];
        assert!(joint_probabilities(x.view(), 0.0).is_err());
        assert!(joint_probabilities(x.view(), 3.5).is_err());
        let fm = FeatureMatrix::new(x).unwrap();
        let cfg = TsneConfig { perplexity: 1.5, ..TsneConfig::default() };
        assert!(matches!(fit(&fm, &cfg), Err(Error::PerplexityInfeasible(_))));
    }

    #[test]
    fn duplicate_heavy_rows_are_infeasible() {
        // 6 copies of one point: a copy's nearest neighbours alone give
        // perplexity >= 5, so a target of 2 is unreachable.
        let mut rows = vec![vec![0.0, 0.0]; 6];
        rows.push(vec![5.0, 5.0]);
        rows.push(vec![6.0, 5.0]);
        let x = FeatureMatrix::from_rows(&rows).unwrap();
        assert!(matches!(joint_probabilities(x.view(), 2.0), Err(Error::PerplexityInfeasible(_))));
    }

    #[test]
    fn q_sums_to_one() {
        let y = array![[0.0, 0.0], [1.0, 0.5], [-2.0, 1.0], [0.3, -0.7]];
        let q = student_q(&y);
        assert!((q.sum() - 1.0).abs() < 1e-12);
        assert!(q.iter().all(|v| *v >= 0.0));
    }
}
