//! Deterministic dense linear algebra: thin SVD by one-sided Jacobi,
//! orthonormal bases and projection, pairwise distances, SPD solves.

use ndarray::{Array1, Array2, ArrayView2, Axis};

use crate::error::{dim_mismatch, Error, Result};
use crate::matrix::FeatureMatrix;

/// Sweep cap for the Jacobi iteration.
pub const MAX_SWEEPS: usize = 100;
/// Relative off-diagonal threshold: a column pair is orthogonal once
/// `|a·b| <= tol * |a| |b|`.
pub const JACOBI_TOLERANCE: f64 = 1e-12;

/// `X = U diag(s) Vᵀ` with `r = min(N, D)` columns in `U` and `V`.
#[derive(Clone, Debug, PartialEq)]
pub struct SvdFactorization {
    pub u: Array2<f64>,
    pub s: Array1<f64>,
    pub v: Array2<f64>,
}

impl SvdFactorization {
    /// Number of singular directions, `min(N, D)`.
    pub fn rank_bound(&self) -> usize {
        self.s.len()
    }

    /// Latent dimensionality D.
    pub fn dim(&self) -> usize {
        self.v.nrows()
    }

    pub fn reconstruct(&self) -> Array2<f64> {
        let us = &self.u * &self.s.view().insert_axis(Axis(0));
        us.dot(&self.v.t())
    }
}

#[derive(Clone, Copy, Debug, Default, PartialEq, Eq)]
pub struct SvdOptions {
    /// Subtract column means before factorizing (PCA-style). Off by default.
    pub center: bool,
}

pub fn svd(x: &FeatureMatrix) -> Result<SvdFactorization> {
    svd_with(x, SvdOptions::default())
}

pub fn svd_with(x: &FeatureMatrix, options: SvdOptions) -> Result<SvdFactorization> {
    let mut a = x.as_array().clone();
    if options.center {
        let means = a.mean_axis(Axis(0)).expect("non-empty matrix");
        a -= &means.insert_axis(Axis(0));
    }
    svd_array(a.view())
}

/// SVD of an arbitrary finite matrix with at least one row and column.
pub fn svd_array(a: ArrayView2<'_, f64>) -> Result<SvdFactorization> {
    let (n, d) = a.dim();
    if n == 0 || d == 0 {
        return Err(dim_mismatch(format!("cannot factorize a {n}x{d} matrix")));
    }
    let (u, s, v) = if n >= d {
        let (left, s, right) = tall_svd(columns_of(a), n)?;
        (left, s, right)
    } else {
        let (left, s, right) = tall_svd(columns_of(a.t()), d)?;
        (right, s, left)
    };
    let mut f = SvdFactorization { u, s, v };
    fix_signs(&mut f);
    Ok(f)
}

fn columns_of(a: ArrayView2<'_, f64>) -> Vec<Vec<f64>> {
    a.axis_iter(Axis(1)).map(|c| c.to_vec()).collect()
}

fn to_array(cols: &[Vec<f64>], rows: usize) -> Array2<f64> {
    Array2::from_shape_fn((rows, cols.len()), |(i, j)| cols[j][i])
}

fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

/// Thin SVD of an m×n matrix given as n columns of length m, m ≥ n.
/// Returns (left m×n, singular values descending, right n×n).
fn tall_svd(cols: Vec<Vec<f64>>, m: usize) -> Result<(Array2<f64>, Array1<f64>, Array2<f64>)> {
    let n = cols.len();
    let (reflectors, mut r) = householder_qr(cols, m);
    let mut rot: Vec<Vec<f64>> = (0..n)
        .map(|j| {
            let mut e = vec![0.0; n];
            e[j] = 1.0;
            e
        })
        .collect();
    jacobi_orthogonalize(&mut r, &mut rot)?;

    let sigma: Vec<f64> = r.iter().map(|c| dot(c, c).sqrt()).collect();
    let mut order: Vec<usize> = (0..n).collect();
    // stable: equal singular values keep their column order
    order.sort_by(|&i, &j| sigma[j].total_cmp(&sigma[i]));

    let s_max = sigma.iter().copied().fold(0.0, f64::max);
    let negligible = s_max * (n as f64) * f64::EPSILON;
    let mut left_small: Vec<Vec<f64>> = Vec::with_capacity(n);
    let mut missing = Vec::new();
    for (slot, &j) in order.iter().enumerate() {
        if sigma[j] > negligible && sigma[j] > 0.0 {
            left_small.push(r[j].iter().map(|v| v / sigma[j]).collect());
        } else {
            left_small.push(vec![0.0; n]);
            missing.push(slot);
        }
    }
    complete_orthonormal(&mut left_small, &missing);

    let left = apply_q(&reflectors, &left_small, m);
    let s = Array1::from_iter(order.iter().map(|&j| sigma[j]));
    let right_cols: Vec<Vec<f64>> = order.iter().map(|&j| rot[j].clone()).collect();
    Ok((to_array(&left, m), s, to_array(&right_cols, n)))
}

struct Reflector {
    start: usize,
    v: Vec<f64>,
    beta: f64,
}

impl Reflector {
    fn apply(&self, x: &mut [f64]) {
        if self.beta == 0.0 {
            return;
        }
        let tail = &mut x[self.start..];
        let w = self.beta * dot(&self.v, tail);
        for (t, v) in tail.iter_mut().zip(&self.v) {
            *t -= w * v;
        }
    }
}

/// Householder QR of m×n column data. Returns the reflectors and the n×n
/// upper-triangular R as columns.
fn householder_qr(mut cols: Vec<Vec<f64>>, m: usize) -> (Vec<Reflector>, Vec<Vec<f64>>) {
    let n = cols.len();
    let mut reflectors = Vec::with_capacity(n);
    for j in 0..n {
        let x = &cols[j][j..];
        let norm = dot(x, x).sqrt();
        let reflector = if norm == 0.0 {
            Reflector { start: j, v: vec![0.0; m - j], beta: 0.0 }
        } else {
            let alpha = if x[0] >= 0.0 { -norm } else { norm };
            let mut v = x.to_vec();
            v[0] -= alpha;
            let vv = dot(&v, &v);
            let beta = if vv == 0.0 { 0.0 } else { 2.0 / vv };
            Reflector { start: j, v, beta }
        };
        for col in cols.iter_mut().skip(j) {
            reflector.apply(col);
        }
        reflectors.push(reflector);
    }
    let r = cols
        .into_iter()
        .enumerate()
        .map(|(j, c)| {
            let mut top = c[..n].to_vec();
            top[j + 1..].iter_mut().for_each(|v| *v = 0.0);
            top
        })
        .collect();
    (reflectors, r)
}

/// Q·M for M given as n-length columns padded with zeros to length m.
fn apply_q(reflectors: &[Reflector], small: &[Vec<f64>], m: usize) -> Vec<Vec<f64>> {
    small
        .iter()
        .map(|c| {
            let mut x = vec![0.0; m];
            x[..c.len()].copy_from_slice(c);
            for h in reflectors.iter().rev() {
                h.apply(&mut x);
            }
            x
        })
        .collect()
}

/// Cyclic one-sided Jacobi: rotates column pairs of `a` until all pairs are
/// numerically orthogonal, accumulating the rotations into `rot`.
fn jacobi_orthogonalize(a: &mut [Vec<f64>], rot: &mut [Vec<f64>]) -> Result<()> {
    let n = a.len();
    let len = a.first().map_or(0, Vec::len);
    let tol = JACOBI_TOLERANCE.max(len as f64 * f64::EPSILON);
    let mut norms: Vec<f64> = a.iter().map(|c| dot(c, c)).collect();
    for _sweep in 0..MAX_SWEEPS {
        let mut rotated = false;
        for p in 0..n {
            for q in p + 1..n {
                let (alpha, beta) = (norms[p], norms[q]);
                if alpha == 0.0 || beta == 0.0 {
                    continue;
                }
                let gamma = dot(&a[p], &a[q]);
                if gamma.abs() <= tol * (alpha * beta).sqrt() {
                    continue;
                }
                rotated = true;
                let zeta = (beta - alpha) / (2.0 * gamma);
                let t = zeta.signum() / (zeta.abs() + (1.0 + zeta * zeta).sqrt());
                let c = 1.0 / (1.0 + t * t).sqrt();
                let s = c * t;
                rotate_pair(a, p, q, c, s);
                rotate_pair(rot, p, q, c, s);
                norms[p] = dot(&a[p], &a[p]);
                norms[q] = dot(&a[q], &a[q]);
            }
        }
        if !rotated {
            return Ok(());
        }
    }
    Err(Error::ConvergenceFailure { sweeps: MAX_SWEEPS, tolerance: tol })
}

fn rotate_pair(cols: &mut [Vec<f64>], p: usize, q: usize, c: f64, s: f64) {
    let (lo, hi) = cols.split_at_mut(q);
    for (x, y) in lo[p].iter_mut().zip(hi[0].iter_mut()) {
        let (xp, yq) = (*x, *y);
        *x = c * xp - s * yq;
        *y = s * xp + c * yq;
    }
}

/// Fills the `missing` columns with unit vectors orthogonal to all others,
/// drawn from the standard basis by Gram-Schmidt.
fn complete_orthonormal(cols: &mut [Vec<f64>], missing: &[usize]) {
    if missing.is_empty() {
        return;
    }
    let dim = cols[0].len();
    let mut candidate = 0;
    for &slot in missing {
        loop {
            assert!(candidate < dim, "orthonormal completion ran out of candidates");
            let mut e = vec![0.0; dim];
            e[candidate] = 1.0;
            candidate += 1;
            // two passes of modified Gram-Schmidt
            for _ in 0..2 {
                for (j, c) in cols.iter().enumerate() {
                    if j == slot || (missing.contains(&j) && c.iter().all(|v| *v == 0.0)) {
                        continue;
                    }
                    let proj = dot(&e, c);
                    e.iter_mut().zip(c).for_each(|(x, y)| *x -= proj * y);
                }
            }
            let norm = dot(&e, &e).sqrt();
            if norm > 0.5 / (dim as f64).sqrt() {
                cols[slot] = e.into_iter().map(|v| v / norm).collect();
                break;
            }
        }
    }
}

/// Each V column's entry of largest magnitude (lowest index on ties) is made
/// non-negative; U columns flip with it.
fn fix_signs(f: &mut SvdFactorization) {
    for j in 0..f.v.ncols() {
        let col = f.v.column(j);
        let mut best = 0;
        for (i, v) in col.iter().enumerate() {
            if v.abs() > col[best].abs() {
                best = i;
            }
        }
        if col[best] < 0.0 {
            f.v.column_mut(j).mapv_inplace(|v| -v);
            f.u.column_mut(j).mapv_inplace(|v| -v);
        }
    }
}

/// Tolerance for the orthonormality check on [`Basis`].
pub const ORTHONORMAL_TOLERANCE: f64 = 1e-8;

/// D×m matrix with orthonormal columns.
#[derive(Clone, Debug, PartialEq)]
pub struct Basis {
    columns: Array2<f64>,
}

impl Basis {
    pub fn new(columns: Array2<f64>) -> Result<Self> {
        let (d, m) = columns.dim();
        if m == 0 || m > d {
            return Err(dim_mismatch(format!("basis needs 1 <= m <= D, got D={d}, m={m}")));
        }
        let err = orthonormality_error(columns.view());
        if err > ORTHONORMAL_TOLERANCE {
            return Err(dim_mismatch(format!("basis columns not orthonormal (max error {err:e})")));
        }
        Ok(Self { columns })
    }

    pub fn identity(d: usize) -> Self {
        Self { columns: Array2::eye(d) }
    }

    /// Basis from selected columns of an orthonormal matrix, in the given order.
    pub fn from_columns_of(v: &Array2<f64>, indices: &[usize]) -> Result<Self> {
        Self::new(v.select(Axis(1), indices))
    }

    pub fn dim_in(&self) -> usize {
        self.columns.nrows()
    }

    pub fn dim_out(&self) -> usize {
        self.columns.ncols()
    }

    pub fn columns(&self) -> &Array2<f64> {
        &self.columns
    }
}

/// `max |BᵀB − I|`.
pub fn orthonormality_error(b: ArrayView2<'_, f64>) -> f64 {
    let gram = b.t().dot(&b);
    gram.indexed_iter().map(|((i, j), v)| (v - if i == j { 1.0 } else { 0.0 }).abs()).fold(0.0, f64::max)
}

/// `X·B`.
pub fn project(x: &FeatureMatrix, basis: &Basis) -> Result<FeatureMatrix> {
    if x.n_cols() != basis.dim_in() {
        return Err(dim_mismatch(format!("matrix has {} columns, basis expects {}", x.n_cols(), basis.dim_in())));
    }
    FeatureMatrix::new(x.as_array().dot(&basis.columns))
}

/// Squared Euclidean distance accumulated in ascending coordinate order.
#[inline]
pub fn sq_dist(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| (x - y) * (x - y)).sum()
}

/// Symmetric N×N matrix of squared distances with zero diagonal.
pub fn pairwise_sq_dists(x: ArrayView2<'_, f64>) -> Array2<f64> {
    let n = x.nrows();
    let rows: Vec<Vec<f64>> = x.axis_iter(Axis(0)).map(|r| r.to_vec()).collect();
    let mut out = Array2::zeros((n, n));
    for i in 0..n {
        for j in i + 1..n {
            let d = sq_dist(&rows[i], &rows[j]).max(0.0);
            out[[i, j]] = d;
            out[[j, i]] = d;
        }
    }
    out
}

/// Solves `A X = B` for symmetric positive definite `A` by Cholesky.
pub fn cholesky_solve(a: &Array2<f64>, b: &Array2<f64>) -> Result<Array2<f64>> {
    let n = a.nrows();
    if a.ncols() != n || b.nrows() != n {
        return Err(dim_mismatch(format!("system {:?} with rhs {:?}", a.dim(), b.dim())));
    }
    let mut l = Array2::<f64>::zeros((n, n));
    for j in 0..n {
        let mut diag = a[[j, j]];
        for k in 0..j {
            diag -= l[[j, k]] * l[[j, k]];
        }
        if !(diag > 0.0) || !diag.is_finite() {
            return Err(Error::DegenerateDesign(format!("non-positive pivot {diag:e} at column {j}")));
        }
        let ljj = diag.sqrt();
        l[[j, j]] = ljj;
        for i in j + 1..n {
            let mut v = a[[i, j]];
            for k in 0..j {
                v -= l[[i, k]] * l[[j, k]];
            }
            l[[i, j]] = v / ljj;
        }
    }
    let mut x = b.clone();
    for mut col in x.axis_iter_mut(Axis(1)) {
        for i in 0..n {
            let mut v = col[i];
            for k in 0..i {
                v -= l[[i, k]] * col[k];
            }
            col[i] = v / l[[i, i]];
        }
        for i in (0..n).rev() {
            let mut v = col[i];
            for k in i + 1..n {
                v -= l[[k, i]] * col[k];
            }
            col[i] = v / l[[i, i]];
        }
    }
    Ok(x)
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_abs_diff_eq;
    use ndarray::array;

    fn fm(rows: &[Vec<f64>]) -> FeatureMatrix {
        FeatureMatrix::from_rows(rows).unwrap()
    }

    #[test]
    fn diagonal_matrix() {
        let f = svd(&fm(&[vec![3.0, 0.0], vec![0.0, 2.0]])).unwrap();
        assert_abs_diff_eq!(f.s, array![3.0, 2.0], epsilon = 1e-14);
        assert_abs_diff_eq!(f.v, array![[1.0, 0.0], [0.0, 1.0]], epsilon = 1e-14);
        assert_abs_diff_eq!(f.u, array![[1.0, 0.0], [0.0, 1.0]], epsilon = 1e-14);
    }

    #[test]
    fn swapped_diagonal_sorts_descending() {
        let f = svd(&fm(&[vec![1.0, 0.0], vec![0.0, -5.0]])).unwrap();
        assert_abs_diff_eq!(f.s, array![5.0, 1.0], epsilon = 1e-14);
        assert_abs_diff_eq!(f.v, array![[0.0, 1.0], [1.0, 0.0]], epsilon = 1e-14);
        assert_abs_diff_eq!(f.reconstruct(), array![[1.0, 0.0], [0.0, -5.0]], epsilon = 1e-14);
    }

    #[test]
    fn zero_matrix_has_orthonormal_factors() {
        let f = svd(&fm(&[vec![0.0, 0.0], vec![0.0, 0.0], vec![0.0, 0.0]])).unwrap();
        assert_eq!(f.s, array![0.0, 0.0]);
        assert!(orthonormality_error(f.u.view()) < 1e-14);
        assert!(orthonormality_error(f.v.view()) < 1e-14);
    }

    #[test]
    fn wide_rank_deficient() {
        let x = fm(&[vec![1.0, 2.0, 3.0, 4.0], vec![2.0, 4.0, 6.0, 8.0]]);
        let f = svd(&x).unwrap();
        assert_eq!(f.u.dim(), (2, 2));
        assert_eq!(f.v.dim(), (4, 2));
        assert!(f.s[1].abs() < 1e-12);
        assert!(orthonormality_error(f.u.view()) < 1e-12);
        assert!(orthonormality_error(f.v.view()) < 1e-12);
        assert_abs_diff_eq!(f.reconstruct(), x.as_array().clone(), epsilon = 1e-12);
    }

    #[test]
    fn centering_removes_mean_direction() {
        let x = fm(&[vec![5.0, 1.0], vec![5.0, -1.0], vec![5.0, 2.0], vec![5.0, -2.0]]);
        let f = svd_with(&x, SvdOptions { center: true }).unwrap();
        assert!(f.s[1] < 1e-12);
        assert_abs_diff_eq!(f.v.column(0)[1].abs(), 1.0, epsilon = 1e-12);
    }

    #[test]
    fn projection_cases() {
        let x = fm(&[vec![1.0, 2.0, 3.0], vec![4.0, 5.0, 6.0]]);
        assert_eq!(project(&x, &Basis::identity(3)).unwrap(), x);
        let first = Basis::new(array![[1.0], [0.0], [0.0]]).unwrap();
        assert_eq!(project(&x, &first).unwrap().as_array(), &array![[1.0], [4.0]]);
        assert!(matches!(project(&x, &Basis::identity(2)), Err(Error::DimensionMismatch(_))));
        assert!(Basis::new(array![[1.0, 1.0], [0.0, 0.0]]).is_err());
    }

    #[test]
    fn pairwise_small_cases() {
        let d = pairwise_sq_dists(array![[0.0, 0.0], [3.0, 4.0]].view());
        assert_eq!(d, array![[0.0, 25.0], [25.0, 0.0]]);
        let d = pairwise_sq_dists(array![[1.0, 2.0], [1.0, 2.0], [1.0, 2.0]].view());
        assert!(d.iter().all(|v| *v == 0.0));
    }

    #[test]
    fn cholesky_solves_and_rejects_singular() {
        let a = array![[4.0, 2.0], [2.0, 3.0]];
        let b = array![[2.0], [1.0]];
        let x = cholesky_solve(&a, &b).unwrap();
        assert_abs_diff_eq!(a.dot(&x), b, epsilon = 1e-12);
        let singular = array![[1.0, 1.0], [1.0, 1.0]];
        assert!(matches!(cholesky_solve(&singular, &b), Err(Error::DegenerateDesign(_))));
    }
}
