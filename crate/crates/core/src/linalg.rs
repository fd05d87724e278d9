//! Dense matrix helpers: a row-major [`Matrix`], a cyclic Jacobi eigensolver
//! for symmetric matrices, and the weighted first/second moments used by the
//! M-step.

use std::ops::{Index, IndexMut};

use crate::error::{Error, Result};

/// Maximum number of cyclic Jacobi sweeps before giving up.
pub const MAX_SWEEPS: usize = 100;

/// Sweeps stop once the off-diagonal Frobenius norm drops below this
/// fraction of the Frobenius norm of the input.
pub const JACOBI_TOL: f64 = 1e-12;

/// Relative asymmetry tolerated by the symmetric routines.
pub const SYMMETRY_TOL: f64 = 1e-10;

/// Dense row-major matrix of `f64`.
#[derive(Debug, Clone, PartialEq)]
pub struct Matrix {
    rows: usize,
    cols: usize,
    data: Vec<f64>,
}

impl Matrix {
    pub fn zeros(rows: usize, cols: usize) -> Self {
        Self {
            rows,
            cols,
            data: vec![0.0; rows * cols],
        }
    }

    pub fn identity(n: usize) -> Self {
        let mut m = Self::zeros(n, n);
        for i in 0..n {
            m[(i, i)] = 1.0;
        }
        m
    }

    pub fn from_diag(diag: &[f64]) -> Self {
        let mut m = Self::zeros(diag.len(), diag.len());
        for (i, &d) in diag.iter().enumerate() {
            m[(i, i)] = d;
        }
        m
    }

    pub fn from_row_major(rows: usize, cols: usize, data: Vec<f64>) -> Result<Self> {
        if data.len() != rows * cols {
            return Err(Error::input(format!(
                "expected {} entries for a {rows}x{cols} matrix, got {}",
                rows * cols,
                data.len()
            )));
        }
        Ok(Self { rows, cols, data })
    }

    /// Builds a matrix from equally sized rows.
    pub fn from_rows(rows: &[Vec<f64>]) -> Result<Self> {
        let cols = rows.first().map_or(0, Vec::len);
        let mut data = Vec::with_capacity(rows.len() * cols);
        for (i, row) in rows.iter().enumerate() {
            if row.len() != cols {
                return Err(Error::input(format!(
                    "row {i} has {} entries, expected {cols}",
                    row.len()
                )));
            }
            data.extend_from_slice(row);
        }
        Ok(Self {
            rows: rows.len(),
            cols,
            data,
        })
    }

    pub fn rows(&self) -> usize {
        self.rows
    }

    pub fn cols(&self) -> usize {
        self.cols
    }

    pub fn is_square(&self) -> bool {
        self.rows == self.cols
    }

    pub fn as_slice(&self) -> &[f64] {
        &self.data
    }

    pub fn into_vec(self) -> Vec<f64> {
        self.data
    }

    pub fn row(&self, i: usize) -> &[f64] {
        &self.data[i * self.cols..(i + 1) * self.cols]
    }

    pub fn row_mut(&mut self, i: usize) -> &mut [f64] {
        &mut self.data[i * self.cols..(i + 1) * self.cols]
    }

    pub fn column(&self, j: usize) -> Vec<f64> {
        (0..self.rows).map(|i| self[(i, j)]).collect()
    }

    pub fn iter_rows(&self) -> impl Iterator<Item = &[f64]> {
        self.data.chunks_exact(self.cols.max(1)).take(self.rows)
    }

    pub fn transpose(&self) -> Matrix {
        let mut t = Matrix::zeros(self.cols, self.rows);
        for i in 0..self.rows {
            for j in 0..self.cols {
                t[(j, i)] = self[(i, j)];
            }
        }
        t
    }

    pub fn matmul(&self, other: &Matrix) -> Result<Matrix> {
        if self.cols != other.rows {
            return Err(Error::input(format!(
                "cannot multiply {}x{} by {}x{}",
                self.rows, self.cols, other.rows, other.cols
            )));
        }
        let mut out = Matrix::zeros(self.rows, other.cols);
        for i in 0..self.rows {
            for k in 0..self.cols {
                let a = self[(i, k)];
                if a == 0.0 {
                    continue;
                }
                let src = other.row(k);
                for (o, &b) in out.row_mut(i).iter_mut().zip(src) {
                    *o += a * b;
                }
            }
        }
        Ok(out)
    }

    pub fn mat_vec(&self, v: &[f64]) -> Vec<f64> {
        assert_eq!(v.len(), self.cols, "dimension mismatch in mat_vec");
        self.iter_rows().map(|row| dot(row, v)).collect()
    }

    pub fn max_abs(&self) -> f64 {
        self.data.iter().fold(0.0, |m, x| m.max(x.abs()))
    }

    pub fn frobenius(&self) -> f64 {
        self.data.iter().map(|x| x * x).sum::<f64>().sqrt()
    }

    pub fn trace(&self) -> f64 {
        (0..self.rows.min(self.cols)).map(|i| self[(i, i)]).sum()
    }

    pub fn is_finite(&self) -> bool {
        self.data.iter().all(|x| x.is_finite())
    }

    /// Largest entry of `|A - Aᵀ|`; infinite for non-square matrices.
    pub fn asymmetry(&self) -> f64 {
        if !self.is_square() {
            return f64::INFINITY;
        }
        let mut worst = 0.0f64;
        for i in 0..self.rows {
            for j in (i + 1)..self.cols {
                worst = worst.max((self[(i, j)] - self[(j, i)]).abs());
            }
        }
        worst
    }

    pub fn is_symmetric(&self) -> bool {
        self.is_square() && self.asymmetry() <= SYMMETRY_TOL * self.max_abs()
    }

    /// Largest entrywise difference with another matrix of the same shape.
    pub fn max_abs_diff(&self, other: &Matrix) -> f64 {
        assert_eq!((self.rows, self.cols), (other.rows, other.cols));
        self.data
            .iter()
            .zip(&other.data)
            .fold(0.0, |m, (a, b)| m.max((a - b).abs()))
    }
}

impl Index<(usize, usize)> for Matrix {
    type Output = f64;

    fn index(&self, (i, j): (usize, usize)) -> &f64 {
        &self.data[i * self.cols + j]
    }
}

impl IndexMut<(usize, usize)> for Matrix {
    fn index_mut(&mut self, (i, j): (usize, usize)) -> &mut f64 {
        &mut self.data[i * self.cols + j]
    }
}

#[inline]
pub fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

/// Eigenvalues in non-increasing order with matching orthonormal eigenvectors
/// stored as the columns of `eigenvectors`.
#[derive(Debug, Clone, PartialEq)]
pub struct SpectralDecomposition {
    pub eigenvalues: Vec<f64>,
    pub eigenvectors: Matrix,
}

impl SpectralDecomposition {
    pub fn dim(&self) -> usize {
        self.eigenvalues.len()
    }

    /// `V diag(ℓ) Vᵀ`.
    pub fn reconstruct(&self) -> Matrix {
        let p = self.dim();
        let v = &self.eigenvectors;
        let mut out = Matrix::zeros(p, p);
        for i in 0..p {
            for j in i..p {
                let s: f64 = (0..p).map(|k| v[(i, k)] * self.eigenvalues[k] * v[(j, k)]).sum();
                out[(i, j)] = s;
                out[(j, i)] = s;
            }
        }
        out
    }
}

/// Eigendecomposition of a symmetric matrix by cyclic Jacobi rotations.
///
/// Eigenvalues come out sorted in non-increasing order. Exactly equal
/// eigenvalues are ordered by the row index of the largest-magnitude entry of
/// their eigenvector, and each eigenvector is signed so that this entry is
/// positive, which makes the output a deterministic function of the input.
pub fn sym_eig(a: &Matrix) -> Result<SpectralDecomposition> {
    if !a.is_square() {
        return Err(Error::input(format!(
            "eigendecomposition needs a square matrix, got {}x{}",
            a.rows(),
            a.cols()
        )));
    }
    if !a.is_finite() {
        return Err(Error::input("matrix has non-finite entries"));
    }
    if !a.is_symmetric() {
        return Err(Error::input(format!(
            "matrix is not symmetric (asymmetry {:e})",
            a.asymmetry()
        )));
    }
    let n = a.rows();
    let mut m = a.data.clone();
    // Symmetrize so that the tolerated asymmetry does not bias the rotations.
    for i in 0..n {
        for j in (i + 1)..n {
            let s = 0.5 * (m[i * n + j] + m[j * n + i]);
            m[i * n + j] = s;
            m[j * n + i] = s;
        }
    }
    let mut v = Matrix::identity(n).data;
    let target = JACOBI_TOL * a.frobenius();

    let off_norm = |m: &[f64]| -> f64 {
        let mut s = 0.0;
        for i in 0..n {
            for j in (i + 1)..n {
                s += 2.0 * m[i * n + j] * m[i * n + j];
            }
        }
        s.sqrt()
    };

    let mut converged = false;
    for _ in 0..MAX_SWEEPS {
        if off_norm(&m) <= target {
            converged = true;
            break;
        }
        for p in 0..n.saturating_sub(1) {
            for q in (p + 1)..n {
                let apq = m[p * n + q];
                if apq == 0.0 {
                    continue;
                }
                let theta = (m[q * n + q] - m[p * n + p]) / (2.0 * apq);
                let t = if theta.abs() > 1e150 {
                    0.5 / theta
                } else {
                    theta.signum() / (theta.abs() + (theta * theta + 1.0).sqrt())
                };
                let c = 1.0 / (t * t + 1.0).sqrt();
                let s = t * c;
                for k in 0..n {
                    let akp = m[k * n + p];
                    let akq = m[k * n + q];
                    m[k * n + p] = c * akp - s * akq;
                    m[k * n + q] = s * akp + c * akq;
                }
                for k in 0..n {
                    let apk = m[p * n + k];
                    let aqk = m[q * n + k];
                    m[p * n + k] = c * apk - s * aqk;
                    m[q * n + k] = s * apk + c * aqk;
                }
                m[p * n + q] = 0.0;
                m[q * n + p] = 0.0;
                for k in 0..n {
                    let vkp = v[k * n + p];
                    let vkq = v[k * n + q];
                    v[k * n + p] = c * vkp - s * vkq;
                    v[k * n + q] = s * vkp + c * vkq;
                }
            }
        }
    }
    if !converged {
        let residual = off_norm(&m);
        if residual > target {
            return Err(Error::NoConvergence {
                sweeps: MAX_SWEEPS,
                residual,
            });
        }
    }

    // Column j's pivot: index of its largest-magnitude entry (first on ties).
    let pivot = |j: usize| -> usize {
        let mut best = 0;
        let mut best_abs = -1.0;
        for i in 0..n {
            let x = v[i * n + j].abs();
            if x > best_abs {
                best_abs = x;
                best = i;
            }
        }
        best
    };
    let pivots: Vec<usize> = (0..n).map(pivot).collect();
    let mut order: Vec<usize> = (0..n).collect();
    order.sort_by(|&i, &j| {
        m[j * n + j]
            .total_cmp(&m[i * n + i])
            .then(pivots[i].cmp(&pivots[j]))
    });

    let eigenvalues: Vec<f64> = order.iter().map(|&j| m[j * n + j]).collect();
    let mut vectors = Matrix::zeros(n, n);
    for (dst, &src) in order.iter().enumerate() {
        let sign = if v[pivots[src] * n + src] < 0.0 { -1.0 } else { 1.0 };
        for i in 0..n {
            vectors[(i, dst)] = sign * v[i * n + src];
        }
    }
    Ok(SpectralDecomposition {
        eigenvalues,
        eigenvectors: vectors,
    })
}

fn check_weights(x: &Matrix, w: &[f64]) -> Result<f64> {
    if w.len() != x.rows() {
        return Err(Error::input(format!(
            "{} weights for {} samples",
            w.len(),
            x.rows()
        )));
    }
    if w.iter().any(|&wi| !(wi >= 0.0) || !wi.is_finite()) {
        return Err(Error::input("weights must be finite and nonnegative"));
    }
    let total: f64 = w.iter().sum();
    if total <= 0.0 {
        return Err(Error::DegenerateWeights);
    }
    Ok(total)
}

/// `Σ wᵢ xᵢ / Σ wᵢ` over the rows of `x`.
pub fn weighted_mean(x: &Matrix, w: &[f64]) -> Result<Vec<f64>> {
    let total = check_weights(x, w)?;
    let mut mean = vec![0.0; x.cols()];
    for (row, &wi) in x.iter_rows().zip(w) {
        if wi == 0.0 {
            continue;
        }
        for (m, &xi) in mean.iter_mut().zip(row) {
            *m += wi * xi;
        }
    }
    mean.iter_mut().for_each(|m| *m /= total);
    Ok(mean)
}

/// Weighted average of the centered outer products `(xᵢ-m)(xᵢ-m)ᵀ`.
pub fn weighted_scatter(x: &Matrix, w: &[f64], mean: &[f64]) -> Result<Matrix> {
    let total = check_weights(x, w)?;
    let p = x.cols();
    if mean.len() != p {
        return Err(Error::input(format!(
            "mean has length {}, data has {p} columns",
            mean.len()
        )));
    }
    let mut s = Matrix::zeros(p, p);
    let mut centered = vec![0.0; p];
    for (row, &wi) in x.iter_rows().zip(w) {
        if wi == 0.0 {
            continue;
        }
        for ((c, &xi), &mi) in centered.iter_mut().zip(row).zip(mean) {
            *c = xi - mi;
        }
        for a in 0..p {
            let wa = wi * centered[a];
            let dst = &mut s.data[a * p + a..(a + 1) * p];
            for (o, &cb) in dst.iter_mut().zip(&centered[a..]) {
                *o += wa * cb;
            }
        }
    }
    for a in 0..p {
        for b in a..p {
            let v = s[(a, b)] / total;
            s[(a, b)] = v;
            s[(b, a)] = v;
        }
    }
    Ok(s)
}

/// Adds `eps · trace(S)/p` to the diagonal, or `eps` when the trace is zero.
pub fn regularize(s: &Matrix, eps: f64) -> Result<Matrix> {
    if !(eps >= 0.0) || !eps.is_finite() {
        return Err(Error::input(format!(
            "regularization must be finite and nonnegative, got {eps}"
        )));
    }
    if !s.is_square() {
        return Err(Error::input("regularize needs a square matrix"));
    }
    let p = s.rows();
    let tr = s.trace();
    let shift = if tr > 0.0 { eps * tr / p as f64 } else { eps };
    let mut out = s.clone();
    for i in 0..p {
        out[(i, i)] += shift;
    }
    Ok(out)
}

/// Lower-triangular Cholesky factor `L` with `A = L Lᵀ`.
pub fn cholesky(a: &Matrix) -> Result<Matrix> {
    if !a.is_square() {
        return Err(Error::input("cholesky needs a square matrix"));
    }
    let n = a.rows();
    let mut l = Matrix::zeros(n, n);
    for j in 0..n {
        let mut d = a[(j, j)];
        for k in 0..j {
            d -= l[(j, k)] * l[(j, k)];
        }
        if !(d > 0.0) {
            return Err(Error::Numerical(format!(
                "matrix is not positive definite (pivot {j} = {d:e})"
            )));
        }
        let d = d.sqrt();
        l[(j, j)] = d;
        for i in (j + 1)..n {
            let mut s = a[(i, j)];
            for k in 0..j {
                s -= l[(i, k)] * l[(j, k)];
            }
            l[(i, j)] = s / d;
        }
    }
    Ok(l)
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    fn orthonormality_error(v: &Matrix) -> f64 {
        v.transpose()
            .matmul(v)
            .unwrap()
            .max_abs_diff(&Matrix::identity(v.cols()))
    }

    fn check_decomposition(a: &Matrix) {
        let eig = sym_eig(a).unwrap();
        assert!(orthonormality_error(&eig.eigenvectors) <= 1e-8);
        assert!(eig.reconstruct().max_abs_diff(a) <= 1e-8 * (1.0 + a.max_abs()));
        assert!(eig.eigenvalues.windows(2).all(|w| w[0] >= w[1]));
    }

    #[test]
    fn identity_spectrum() {
        let eig = sym_eig(&Matrix::identity(3)).unwrap();
        assert_eq!(eig.eigenvalues, vec![1.0, 1.0, 1.0]);
        check_decomposition(&Matrix::identity(3));
    }

    #[test]
    fn diagonal_spectrum_is_sorted() {
        let a = Matrix::from_diag(&[1.0, 4.0, 2.0]);
        let eig = sym_eig(&a).unwrap();
        assert_eq!(eig.eigenvalues, vec![4.0, 2.0, 1.0]);
        assert_eq!(eig.eigenvectors.column(0), vec![0.0, 1.0, 0.0]);
    }

    #[test]
    fn two_by_two() {
        let a = Matrix::from_rows(&[vec![2.0, 1.0], vec![1.0, 2.0]]).unwrap();
        let eig = sym_eig(&a).unwrap();
        assert!((eig.eigenvalues[0] - 3.0).abs() < 1e-14);
        assert!((eig.eigenvalues[1] - 1.0).abs() < 1e-14);
        let h = std::f64::consts::FRAC_1_SQRT_2;
        let v0 = eig.eigenvectors.column(0);
        let v1 = eig.eigenvectors.column(1);
        assert!((v0[0].abs() - h).abs() < 1e-14 && (v0[0] - v0[1]).abs() < 1e-14);
        assert!((v1[0].abs() - h).abs() < 1e-14 && (v1[0] + v1[1]).abs() < 1e-14);
    }

    #[test]
    fn zero_matrix() {
        let eig = sym_eig(&Matrix::zeros(4, 4)).unwrap();
        assert_eq!(eig.eigenvalues, vec![0.0; 4]);
        assert_eq!(eig.eigenvectors, Matrix::identity(4));
    }

    #[test]
    fn rejects_bad_input() {
        let mut a = Matrix::identity(2);
        a[(0, 1)] = f64::NAN;
        assert!(matches!(sym_eig(&a), Err(Error::Input(_))));
        let mut b = Matrix::identity(2);
        b[(0, 1)] = 0.5;
        assert!(matches!(sym_eig(&b), Err(Error::Input(_))));
        assert!(sym_eig(&Matrix::zeros(2, 3)).is_err());
    }

    #[test]
    fn deterministic_output() {
        let a = Matrix::from_rows(&[
            vec![2.0, 0.5, 0.1],
            vec![0.5, 1.0, -0.3],
            vec![0.1, -0.3, 3.0],
        ])
        .unwrap();
        assert_eq!(sym_eig(&a).unwrap(), sym_eig(&a).unwrap());
    }

    #[test]
    fn weighted_mean_examples() {
        let x = Matrix::from_rows(&[vec![0.0], vec![2.0]]).unwrap();
        assert_eq!(weighted_mean(&x, &[1.0, 3.0]).unwrap(), vec![1.5]);
        assert_eq!(weighted_mean(&x, &[1.0, 1.0]).unwrap(), vec![1.0]);
        assert_eq!(weighted_mean(&x, &[0.0, 1.0]).unwrap(), vec![2.0]);
        assert!(matches!(
            weighted_mean(&x, &[0.0, 0.0]),
            Err(Error::DegenerateWeights)
        ));
        assert!(weighted_mean(&x, &[1.0]).is_err());
    }

    #[test]
    fn weighted_scatter_examples() {
        let one = Matrix::from_rows(&[vec![1.0, 2.0]]).unwrap();
        let s = weighted_scatter(&one, &[1.0], &[1.0, 2.0]).unwrap();
        assert_eq!(s, Matrix::zeros(2, 2));
        let x = Matrix::from_rows(&[vec![1.0], vec![-1.0]]).unwrap();
        let s = weighted_scatter(&x, &[1.0, 1.0], &[0.0]).unwrap();
        assert_eq!(s, Matrix::from_rows(&[vec![1.0]]).unwrap());
    }

    #[test]
    fn weighted_scatter_matches_double_loop() {
        let x = Matrix::from_rows(&[
            vec![0.3, -1.2, 2.0],
            vec![1.1, 0.4, -0.7],
            vec![-0.5, 0.9, 0.2],
            vec![2.2, -0.1, 1.3],
            vec![0.0, 1.7, -1.9],
        ])
        .unwrap();
        let w = [0.2, 1.5, 0.7, 0.05, 1.0];
        let m = [0.1, 0.2, -0.3];
        let s = weighted_scatter(&x, &w, &m).unwrap();
        let total: f64 = w.iter().sum();
        for a in 0..3 {
            for b in 0..3 {
                let mut acc = 0.0;
                for i in 0..5 {
                    acc += w[i] * (x[(i, a)] - m[a]) * (x[(i, b)] - m[b]);
                }
                assert!((s[(a, b)] - acc / total).abs() <= 1e-12);
            }
        }
    }

    #[test]
    fn regularize_examples() {
        let i2 = Matrix::identity(2);
        assert_eq!(regularize(&i2, 0.0).unwrap(), i2);
        let r = regularize(&i2, 0.1).unwrap();
        assert!(r.max_abs_diff(&Matrix::from_diag(&[1.1, 1.1])) < 1e-15);
        let z = regularize(&Matrix::zeros(2, 2), 0.1).unwrap();
        assert_eq!(z, Matrix::from_diag(&[0.1, 0.1]));
        assert!(matches!(regularize(&i2, -1.0), Err(Error::Input(_))));
    }

    #[test]
    fn cholesky_reconstructs() {
        let a = Matrix::from_rows(&[vec![4.0, 2.0], vec![2.0, 3.0]]).unwrap();
        let l = cholesky(&a).unwrap();
        assert!(l.matmul(&l.transpose()).unwrap().max_abs_diff(&a) < 1e-14);
        assert!(cholesky(&Matrix::from_diag(&[1.0, -1.0])).is_err());
    }

    fn symmetric_strategy() -> impl Strategy<Value = Matrix> {
        (1usize..=24).prop_flat_map(|p| {
            proptest::collection::vec(-10.0f64..10.0, p * p).prop_map(move |v| {
                let mut m = Matrix::from_row_major(p, p, v).unwrap();
                for i in 0..p {
                    for j in (i + 1)..p {
                        m[(j, i)] = m[(i, j)];
                    }
                }
                m
            })
        })
    }

    proptest! {
        #![proptest_config(ProptestConfig::with_cases(64))]

        #[test]
        fn jacobi_reconstructs(a in symmetric_strategy()) {
            check_decomposition(&a);
        }

        #[test]
        fn scatter_is_scale_invariant(
            rows in proptest::collection::vec(proptest::collection::vec(-5.0f64..5.0, 3), 2..12),
            scale in 0.01f64..100.0,
        ) {
            let x = Matrix::from_rows(&rows).unwrap();
            let w: Vec<f64> = (0..rows.len()).map(|i| 1.0 + i as f64).collect();
            let ws: Vec<f64> = w.iter().map(|v| v * scale).collect();
            let m = weighted_mean(&x, &w).unwrap();
            let a = weighted_scatter(&x, &w, &m).unwrap();
            let b = weighted_scatter(&x, &ws, &m).unwrap();
            prop_assert!(a.max_abs_diff(&b) <= 1e-12 * (1.0 + a.max_abs()));
        }

        #[test]
        fn regularize_shifts_spectrum(a in symmetric_strategy(), eps in 0.0f64..1.0) {
            // Gram matrix so the trace is nonnegative.
            let s = a.transpose().matmul(&a).unwrap();
            let p = s.rows() as f64;
            let shift = if s.trace() > 0.0 { eps * s.trace() / p } else { eps };
            let before = sym_eig(&s).unwrap().eigenvalues;
            let after = sym_eig(&regularize(&s, eps).unwrap()).unwrap().eigenvalues;
            for (b, a) in before.iter().zip(&after) {
                prop_assert!((a - b - shift).abs() <= 1e-8 * (1.0 + s.max_abs()));
            }
        }
    }
}
