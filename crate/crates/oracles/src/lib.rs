//! Slow, obviously-correct reference implementations for tests.
//!
//! Nothing here depends on `latent-split`; each routine takes a different
//! algorithmic route from the library code it checks.

use ndarray::{Array1, Array2, ArrayView2, Axis};

/// Small deterministic generator for test fixtures (xorshift64*), kept apart
/// from the library's own stream.
pub struct TestRng(u64);

impl TestRng {
    pub fn new(seed: u64) -> Self {
        Self(seed.wrapping_mul(0x2545_F491_4F6C_DD1D) | 1)
    }

    pub fn next_u64(&mut self) -> u64 {
        let mut x = self.0;
        x ^= x >> 12;
        x ^= x << 25;
        x ^= x >> 27;
        self.0 = x;
        x.wrapping_mul(0x2545_F491_4F6C_DD1D)
    }

    pub fn uniform(&mut self) -> f64 {
        ((self.next_u64() >> 11) as f64 + 0.5) / (1u64 << 53) as f64
    }

    pub fn below(&mut self, n: usize) -> usize {
        (self.uniform() * n as f64) as usize % n
    }

    pub fn normal(&mut self) -> f64 {
        let (u1, u2) = (self.uniform(), self.uniform());
        (-2.0 * u1.ln()).sqrt() * (std::f64::consts::TAU * u2).cos()
    }

    pub fn normal_matrix(&mut self, rows: usize, cols: usize) -> Array2<f64> {
        Array2::from_shape_simple_fn((rows, cols), || self.normal())
    }
}

/// Eigenvalues (descending) and eigenvectors (columns) of a symmetric matrix
/// by the classical two-sided cyclic Jacobi method.
pub fn jacobi_eigen(a: ArrayView2<'_, f64>) -> (Array1<f64>, Array2<f64>) {
    let n = a.nrows();
    let mut m = a.to_owned();
    let mut vecs = Array2::<f64>::eye(n);
    for _ in 0..200 {
        let off: f64 = (0..n)
            .flat_map(|i| (0..n).filter(move |&j| j != i).map(move |j| (i, j)))
            .map(|(i, j)| m[[i, j]] * m[[i, j]])
            .sum();
        let total: f64 = m.iter().map(|v| v * v).sum();
        if off <= 1e-30 * total.max(f64::MIN_POSITIVE) {
            break;
        }
        for p in 0..n {
            for q in p + 1..n {
                let apq = m[[p, q]];
                if apq == 0.0 {
                    continue;
                }
                let theta = (m[[q, q]] - m[[p, p]]) / (2.0 * apq);
                let t = theta.signum() / (theta.abs() + (theta * theta + 1.0).sqrt());
                let t = if theta == 0.0 { 1.0 } else { t };
                let c = 1.0 / (t * t + 1.0).sqrt();
                let s = t * c;
                for k in 0..n {
                    let (mkp, mkq) = (m[[k, p]], m[[k, q]]);
                    m[[k, p]] = c * mkp - s * mkq;
                    m[[k, q]] = s * mkp + c * mkq;
                }
                for k in 0..n {
                    let (mpk, mqk) = (m[[p, k]], m[[q, k]]);
                    m[[p, k]] = c * mpk - s * mqk;
                    m[[q, k]] = s * mpk + c * mqk;
                }
                for k in 0..n {
                    let (vkp, vkq) = (vecs[[k, p]], vecs[[k, q]]);
                    vecs[[k, p]] = c * vkp - s * vkq;
                    vecs[[k, q]] = s * vkp + c * vkq;
                }
            }
        }
    }
    let mut order: Vec<usize> = (0..n).collect();
    order.sort_by(|&i, &j| m[[j, j]].total_cmp(&m[[i, i]]));
    let values = Array1::from_iter(order.iter().map(|&i| m[[i, i]]));
    let vectors = vecs.select(Axis(1), &order);
    (values, vectors)
}

/// Least-squares solution with intercept via the eigen-decomposition
/// pseudoinverse of the centered Gram matrix.
pub fn least_squares_pinv(x: ArrayView2<'_, f64>, y: &[f64]) -> (Vec<f64>, f64) {
    let n = x.nrows() as f64;
    let x_mean = x.mean_axis(Axis(0)).unwrap();
    let y_mean = y.iter().sum::<f64>() / n;
    let xc = &x - &x_mean.view().insert_axis(Axis(0));
    let yc = Array1::from_iter(y.iter().map(|v| v - y_mean));
    let gram = xc.t().dot(&xc);
    let (vals, vecs) = jacobi_eigen(gram.view());
    let cutoff = vals[0] * 1e-12;
    let rhs = xc.t().dot(&yc);
    let mut w = Array1::<f64>::zeros(x.ncols());
    for (k, &lambda) in vals.iter().enumerate() {
        if lambda > cutoff {
            let vk = vecs.column(k);
            w = w + &vk * (vk.dot(&rhs) / lambda);
        }
    }
    let b = y_mean - x_mean.dot(&w);
    (w.to_vec(), b)
}

/// Silhouette by direct transcription of the definition: O(N²) distances
/// recomputed per sample, no shared accumulators.
pub fn naive_silhouette(x: ArrayView2<'_, f64>, labels: &[usize]) -> (f64, Vec<f64>) {
    let n = x.nrows();
    let dist = |i: usize, j: usize| -> f64 {
        let mut s = 0.0;
        for k in 0..x.ncols() {
            let d = x[[i, k]] - x[[j, k]];
            s += d * d;
        }
        s.sqrt()
    };
    let mut clusters: Vec<usize> = labels.to_vec();
    clusters.sort_unstable();
    clusters.dedup();
    let mut scores = Vec::with_capacity(n);
    for i in 0..n {
        let own: Vec<usize> = (0..n).filter(|&j| j != i && labels[j] == labels[i]).collect();
        if own.is_empty() {
            scores.push(0.0);
            continue;
        }
        let a = own.iter().map(|&j| dist(i, j)).sum::<f64>() / own.len() as f64;
        let b = clusters
            .iter()
            .filter(|&&c| c != labels[i])
            .map(|&c| {
                let members: Vec<usize> = (0..n).filter(|&j| labels[j] == c).collect();
                members.iter().map(|&j| dist(i, j)).sum::<f64>() / members.len() as f64
            })
            .fold(f64::INFINITY, f64::min);
        let denom = a.max(b);
        scores.push(if denom == 0.0 { 0.0 } else { (b - a) / denom });
    }
    let mean = scores.iter().sum::<f64>() / n as f64;
    (mean, scores)
}

/// Cosines of the principal angles between the column spans of two
/// orthonormal bases, descending (largest cosine = smallest angle).
pub fn principal_angle_cosines(a: ArrayView2<'_, f64>, b: ArrayView2<'_, f64>) -> Vec<f64> {
    let m = a.t().dot(&b);
    let (vals, _) = jacobi_eigen(m.dot(&m.t()).view());
    vals.iter().map(|v| v.max(0.0).sqrt().min(1.0)).collect()
}

/// Largest principal angle in degrees.
pub fn max_principal_angle_deg(a: ArrayView2<'_, f64>, b: ArrayView2<'_, f64>) -> f64 {
    let cosines = principal_angle_cosines(a, b);
    let smallest = cosines.iter().copied().fold(1.0, f64::min);
    smallest.acos().to_degrees()
}

/// Central finite-difference gradient of a scalar function of a matrix.
pub fn central_difference<F>(f: F, at: &Array2<f64>, step: f64) -> Array2<f64>
where
    F: Fn(&Array2<f64>) -> f64,
{
    let mut grad = Array2::zeros(at.dim());
    let mut probe = at.clone();
    for idx in ndarray::indices(at.dim()) {
        let orig = probe[idx];
        probe[idx] = orig + step;
        let up = f(&probe);
        probe[idx] = orig - step;
        let down = f(&probe);
        probe[idx] = orig;
        grad[idx] = (up - down) / (2.0 * step);
    }
    grad
}

/// Squared distances by a plain double loop.
pub fn naive_sq_dists(x: ArrayView2<'_, f64>) -> Array2<f64> {
    let n = x.nrows();
    let mut out = Array2::zeros((n, n));
    for i in 0..n {
        for j in 0..n {
            let mut s = 0.0;
            for k in 0..x.ncols() {
                s += (x[[i, k]] - x[[j, k]]).powi(2);
            }
            out[[i, j]] = s;
        }
    }
    out
}
