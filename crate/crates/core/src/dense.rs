//! Small dense linear algebra.
//!
//! Everything here is row-major `f64` and sized for Kalman filters over a few
//! hundred state coordinates at most. There is deliberately no pivoted LU or
//! SVD: the only solve the filter needs is against an SPD innovation
//! covariance, which goes through Cholesky.

use std::ops::{Index, IndexMut};

use crate::error::{KgdError, Result};

/// Absolute tolerance used when a routine requires a symmetric input.
pub const SYMMETRY_TOL: f64 = 1e-10;

/// Dense real vector.
#[derive(Debug, Clone, PartialEq, Default)]
pub struct Vector(Vec<f64>);

impl Vector {
    /// Builds a vector, rejecting NaN/Inf entries.
    pub fn new(data: Vec<f64>) -> Result<Self> {
        if let Some(index) = data.iter().position(|v| !v.is_finite()) {
            return Err(KgdError::NonFinite { index });
        }
        Ok(Vector(data))
    }

    pub fn zeros(dim: usize) -> Self {
        Vector(vec![0.0; dim])
    }

    pub fn filled(dim: usize, value: f64) -> Self {
        Vector(vec![value; dim])
    }

    pub fn dim(&self) -> usize {
        self.0.len()
    }

    pub fn as_slice(&self) -> &[f64] {
        &self.0
    }

    pub fn as_mut_slice(&mut self) -> &mut [f64] {
        &mut self.0
    }

    pub fn into_inner(self) -> Vec<f64> {
        self.0
    }

    pub fn iter(&self) -> std::slice::Iter<'_, f64> {
        self.0.iter()
    }

    pub fn dot(&self, other: &Vector) -> f64 {
        self.0.iter().zip(&other.0).map(|(a, b)| a * b).sum()
    }

    pub fn norm(&self) -> f64 {
        self.dot(self).sqrt()
    }

    pub fn norm_sq(&self) -> f64 {
        self.dot(self)
    }

    pub fn max_abs(&self) -> f64 {
        self.0.iter().fold(0.0_f64, |m, v| m.max(v.abs()))
    }

    pub fn is_finite(&self) -> bool {
        self.0.iter().all(|v| v.is_finite())
    }

    pub fn add(&self, other: &Vector) -> Vector {
        Vector(self.0.iter().zip(&other.0).map(|(a, b)| a + b).collect())
    }

    pub fn sub(&self, other: &Vector) -> Vector {
        Vector(self.0.iter().zip(&other.0).map(|(a, b)| a - b).collect())
    }

    pub fn scale(&self, s: f64) -> Vector {
        Vector(self.0.iter().map(|a| a * s).collect())
    }

    /// `self += s * other`
    pub fn axpy(&mut self, s: f64, other: &Vector) {
        for (a, b) in self.0.iter_mut().zip(&other.0) {
            *a += s * b;
        }
    }

    /// Copy of `self[range]`.
    pub fn slice(&self, range: std::ops::Range<usize>) -> Vector {
        Vector(self.0[range].to_vec())
    }

    /// Concatenation `[self; other]`.
    pub fn concat(parts: &[&Vector]) -> Vector {
        Vector(parts.iter().flat_map(|p| p.0.iter().copied()).collect())
    }
}

impl From<Vec<f64>> for Vector {
    /// Unchecked conversion; use [`Vector::new`] at trust boundaries.
    fn from(v: Vec<f64>) -> Self {
        Vector(v)
    }
}

impl Index<usize> for Vector {
    type Output = f64;
    fn index(&self, i: usize) -> &f64 {
        &self.0[i]
    }
}

impl IndexMut<usize> for Vector {
    fn index_mut(&mut self, i: usize) -> &mut f64 {
        &mut self.0[i]
    }
}

/// Dense row-major matrix.
#[derive(Debug, Clone, PartialEq)]
pub struct Mat {
    rows: usize,
    cols: usize,
    data: Vec<f64>,
}

impl Mat {
    pub fn new(rows: usize, cols: usize, data: Vec<f64>) -> Result<Self> {
        if data.len() != rows * cols {
            return Err(KgdError::Shape {
                op: "Mat::new",
                lhs: (rows, cols),
                rhs: (data.len(), 1),
            });
        }
        if let Some(index) = data.iter().position(|v| !v.is_finite()) {
            return Err(KgdError::NonFinite { index });
        }
        Ok(Mat { rows, cols, data })
    }

    /// Builds from nested rows. Panics on ragged input; meant for literals.
    pub fn from_rows(rows: &[&[f64]]) -> Result<Self> {
        let r = rows.len();
        let c = rows.first().map_or(0, |row| row.len());
        assert!(rows.iter().all(|row| row.len() == c), "ragged rows");
        Mat::new(
            r,
            c,
            rows.iter().flat_map(|row| row.iter().copied()).collect(),
        )
    }

    pub fn zeros(rows: usize, cols: usize) -> Self {
        Mat {
            rows,
            cols,
            data: vec![0.0; rows * cols],
        }
    }

    pub fn identity(n: usize) -> Self {
        Mat::scaled_identity(n, 1.0)
    }

    pub fn scaled_identity(n: usize, s: f64) -> Self {
        let mut m = Mat::zeros(n, n);
        for i in 0..n {
            m[(i, i)] = s;
        }
        m
    }

    pub fn diag(values: &[f64]) -> Self {
        let mut m = Mat::zeros(values.len(), values.len());
        for (i, v) in values.iter().enumerate() {
            m[(i, i)] = *v;
        }
        m
    }

    /// Single-column matrix holding `v`.
    pub fn column(v: &Vector) -> Self {
        Mat {
            rows: v.dim(),
            cols: 1,
            data: v.as_slice().to_vec(),
        }
    }

    pub fn rows(&self) -> usize {
        self.rows
    }

    pub fn cols(&self) -> usize {
        self.cols
    }

    pub fn shape(&self) -> (usize, usize) {
        (self.rows, self.cols)
    }

    pub fn is_square(&self) -> bool {
        self.rows == self.cols
    }

    pub fn data(&self) -> &[f64] {
        &self.data
    }

    pub fn row(&self, r: usize) -> &[f64] {
        &self.data[r * self.cols..(r + 1) * self.cols]
    }

    pub fn diagonal(&self) -> Vec<f64> {
        (0..self.rows.min(self.cols))
            .map(|i| self[(i, i)])
            .collect()
    }

    pub fn transpose(&self) -> Mat {
        let mut t = Mat::zeros(self.cols, self.rows);
        for i in 0..self.rows {
            for j in 0..self.cols {
                t[(j, i)] = self[(i, j)];
            }
        }
        t
    }

    pub fn mul(&self, other: &Mat) -> Result<Mat> {
        mat_mul(self, other)
    }

    pub fn mul_vec(&self, v: &Vector) -> Result<Vector> {
        if self.cols != v.dim() {
            return Err(KgdError::Shape {
                op: "mul_vec",
                lhs: self.shape(),
                rhs: (v.dim(), 1),
            });
        }
        Ok(Vector::from(
            (0..self.rows)
                .map(|i| self.row(i).iter().zip(v.iter()).map(|(a, b)| a * b).sum())
                .collect::<Vec<f64>>(),
        ))
    }

    pub fn add(&self, other: &Mat) -> Result<Mat> {
        self.zip_with(other, "add", |a, b| a + b)
    }

    pub fn sub(&self, other: &Mat) -> Result<Mat> {
        self.zip_with(other, "sub", |a, b| a - b)
    }

    fn zip_with(&self, other: &Mat, op: &'static str, f: impl Fn(f64, f64) -> f64) -> Result<Mat> {
        if self.shape() != other.shape() {
            return Err(KgdError::Shape {
                op,
                lhs: self.shape(),
                rhs: other.shape(),
            });
        }
        Ok(Mat {
            rows: self.rows,
            cols: self.cols,
            data: self
                .data
                .iter()
                .zip(&other.data)
                .map(|(a, b)| f(*a, *b))
                .collect(),
        })
    }

    pub fn scale(&self, s: f64) -> Mat {
        Mat {
            rows: self.rows,
            cols: self.cols,
            data: self.data.iter().map(|a| a * s).collect(),
        }
    }

    /// Adds `s` to every diagonal entry in place.
    pub fn add_diagonal(&mut self, s: f64) {
        for i in 0..self.rows.min(self.cols) {
            self[(i, i)] += s;
        }
    }

    /// Largest `|a_ij - a_ji|`; zero for non-square input is not meaningful.
    pub fn max_asymmetry(&self) -> f64 {
        let mut worst = 0.0_f64;
        for i in 0..self.rows {
            for j in (i + 1)..self.cols {
                worst = worst.max((self[(i, j)] - self[(j, i)]).abs());
            }
        }
        worst
    }

    /// Replaces `self` by `(self + selfᵀ) / 2`.
    pub fn symmetrize(&mut self) {
        debug_assert!(self.is_square());
        let n = self.rows;
        for i in 0..n {
            for j in (i + 1)..n {
                let avg = 0.5 * (self[(i, j)] + self[(j, i)]);
                self[(i, j)] = avg;
                self[(j, i)] = avg;
            }
        }
    }

    pub fn frobenius(&self) -> f64 {
        self.data.iter().map(|v| v * v).sum::<f64>().sqrt()
    }

    pub fn max_abs(&self) -> f64 {
        self.data.iter().fold(0.0_f64, |m, v| m.max(v.abs()))
    }

    /// Copy of the `rows × cols` sub-block starting at `(r0, c0)`.
    pub fn block(&self, r0: usize, c0: usize, rows: usize, cols: usize) -> Mat {
        let mut b = Mat::zeros(rows, cols);
        for i in 0..rows {
            b.data[i * cols..(i + 1) * cols].copy_from_slice(
                &self.data[(r0 + i) * self.cols + c0..(r0 + i) * self.cols + c0 + cols],
            );
        }
        b
    }

    pub fn set_block(&mut self, r0: usize, c0: usize, block: &Mat) {
        for i in 0..block.rows {
            let dst = (r0 + i) * self.cols + c0;
            self.data[dst..dst + block.cols].copy_from_slice(block.row(i));
        }
    }

    pub fn is_finite(&self) -> bool {
        self.data.iter().all(|v| v.is_finite())
    }
}

impl Index<(usize, usize)> for Mat {
    type Output = f64;
    fn index(&self, (r, c): (usize, usize)) -> &f64 {
        &self.data[r * self.cols + c]
    }
}

impl IndexMut<(usize, usize)> for Mat {
    fn index_mut(&mut self, (r, c): (usize, usize)) -> &mut f64 {
        &mut self.data[r * self.cols + c]
    }
}

/// Matrix product `a · b`.
///
/// Uses i-k-j order and skips exact zeros of `a`. The filter matrices are
/// block-structured (transition matrices, `I - KC`) so this skip removes most
/// of the work without changing any floating-point result.
pub fn mat_mul(a: &Mat, b: &Mat) -> Result<Mat> {
    if a.cols != b.rows {
        return Err(KgdError::Shape {
            op: "mat_mul",
            lhs: a.shape(),
            rhs: b.shape(),
        });
    }
    let (n, m, p) = (a.rows, a.cols, b.cols);
    let mut out = vec![0.0; n * p];
    for i in 0..n {
        let out_row = &mut out[i * p..(i + 1) * p];
        for k in 0..m {
            let aik = a.data[i * m + k];
            if aik == 0.0 {
                continue;
            }
            let b_row = &b.data[k * p..(k + 1) * p];
            for (o, bv) in out_row.iter_mut().zip(b_row) {
                *o += aik * bv;
            }
        }
    }
    Ok(Mat {
        rows: n,
        cols: p,
        data: out,
    })
}

/// `a · s · aᵀ` for symmetric `s`, computed as `a · (a · s)ᵀ` so both
/// products have the (typically sparse) `a` on the left.
pub fn congruence(a: &Mat, s: &Mat) -> Result<Mat> {
    let as_ = mat_mul(a, s)?;
    mat_mul(a, &as_.transpose())
}

/// Lower-triangular Cholesky factor of an SPD matrix.
pub fn cholesky(spd: &Mat) -> Result<Mat> {
    if !spd.is_square() {
        return Err(KgdError::Shape {
            op: "cholesky",
            lhs: spd.shape(),
            rhs: spd.shape(),
        });
    }
    let asym = spd.max_asymmetry();
    if asym > SYMMETRY_TOL {
        return Err(KgdError::NotSymmetric { max_asym: asym });
    }
    let n = spd.rows;
    let mut l = Mat::zeros(n, n);
    for j in 0..n {
        let mut d = spd[(j, j)];
        for k in 0..j {
            d -= l[(j, k)] * l[(j, k)];
        }
        if !(d > 0.0) || !d.is_finite() {
            return Err(KgdError::NotPositiveDefinite { pivot: j, value: d });
        }
        let djj = d.sqrt();
        l[(j, j)] = djj;
        for i in (j + 1)..n {
            let mut s = spd[(i, j)];
            for k in 0..j {
                s -= l[(i, k)] * l[(j, k)];
            }
            l[(i, j)] = s / djj;
        }
    }
    Ok(l)
}

/// Solves `spd · X = rhs` through a Cholesky factorization.
pub fn chol_solve(spd: &Mat, rhs: &Mat) -> Result<Mat> {
    if spd.rows != rhs.rows {
        return Err(KgdError::Shape {
            op: "chol_solve",
            lhs: spd.shape(),
            rhs: rhs.shape(),
        });
    }
    let l = cholesky(spd)?;
    let n = spd.rows;
    let p = rhs.cols;
    let mut x = rhs.clone();
    // forward: L y = b, row-oriented so each step updates a whole rhs row
    for i in 0..n {
        for k in 0..i {
            let lik = l[(i, k)];
            if lik == 0.0 {
                continue;
            }
            for c in 0..p {
                let v = x.data[k * p + c];
                x.data[i * p + c] -= lik * v;
            }
        }
        let lii = l[(i, i)];
        for c in 0..p {
            x.data[i * p + c] /= lii;
        }
    }
    // backward: Lᵀ x = y
    for i in (0..n).rev() {
        for k in (i + 1)..n {
            let lki = l[(k, i)];
            if lki == 0.0 {
                continue;
            }
            for c in 0..p {
                let v = x.data[k * p + c];
                x.data[i * p + c] -= lki * v;
            }
        }
        let lii = l[(i, i)];
        for c in 0..p {
            x.data[i * p + c] /= lii;
        }
    }
    Ok(x)
}

/// Largest dimension accepted by [`sym_eig_bounds`].
pub const EIG_MAX_DIM: usize = 512;

/// Smallest and largest eigenvalue of a symmetric matrix (cyclic Jacobi).
pub fn sym_eig_bounds(s: &Mat) -> Result<(f64, f64)> {
    let eig = sym_eigenvalues(s)?;
    let lo = eig.iter().copied().fold(f64::INFINITY, f64::min);
    let hi = eig.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    Ok((lo, hi))
}

/// All eigenvalues of a symmetric matrix, unordered.
pub fn sym_eigenvalues(s: &Mat) -> Result<Vec<f64>> {
    if !s.is_square() {
        return Err(KgdError::Shape {
            op: "sym_eig_bounds",
            lhs: s.shape(),
            rhs: s.shape(),
        });
    }
    if s.rows > EIG_MAX_DIM {
        return Err(KgdError::Parameter(format!(
            "eigen diagnostics limited to dimension {EIG_MAX_DIM}, got {}",
            s.rows
        )));
    }
    let asym = s.max_asymmetry();
    if asym > SYMMETRY_TOL {
        return Err(KgdError::NotSymmetric { max_asym: asym });
    }
    let n = s.rows;
    let mut a = s.clone();
    a.symmetrize();
    let scale = a.frobenius();
    if n == 0 {
        return Ok(Vec::new());
    }
    if scale == 0.0 {
        return Ok(vec![0.0; n]);
    }
    for _sweep in 0..100 {
        let mut off = 0.0;
        for p in 0..n {
            for q in (p + 1)..n {
                off += a[(p, q)] * a[(p, q)];
            }
        }
        if off.sqrt() <= 1e-15 * scale {
            break;
        }
        for p in 0..n {
            for q in (p + 1)..n {
                let apq = a[(p, q)];
                if apq == 0.0 || apq.abs() < 1e-300 {
                    continue;
                }
                let app = a[(p, p)];
                let aqq = a[(q, q)];
                let theta = (aqq - app) / (2.0 * apq);
                let t = theta.signum() / (theta.abs() + (theta * theta + 1.0).sqrt());
                let c = 1.0 / (t * t + 1.0).sqrt();
                let sn = t * c;
                for k in 0..n {
                    let akp = a[(k, p)];
                    let akq = a[(k, q)];
                    a[(k, p)] = c * akp - sn * akq;
                    a[(k, q)] = sn * akp + c * akq;
                }
                for k in 0..n {
                    let apk = a[(p, k)];
                    let aqk = a[(q, k)];
                    a[(p, k)] = c * apk - sn * aqk;
                    a[(q, k)] = sn * apk + c * aqk;
                }
                a[(p, q)] = 0.0;
                a[(q, p)] = 0.0;
            }
        }
    }
    Ok(a.diagonal())
}

#[cfg(test)]
mod tests {
    use super::*;

    fn brute_mul(a: &Mat, b: &Mat) -> Mat {
        let mut out = Mat::zeros(a.rows(), b.cols());
        for i in 0..a.rows() {
            for j in 0..b.cols() {
                let mut s = 0.0;
                for k in 0..a.cols() {
                    s += a[(i, k)] * b[(k, j)];
                }
                out[(i, j)] = s;
            }
        }
        out
    }

    #[test]
    fn identity_product() {
        let m = Mat::from_rows(&[&[1.5, -2.0], &[0.25, 4.0]]).unwrap();
        assert_eq!(mat_mul(&Mat::identity(2), &m).unwrap(), m);
    }

    #[test]
    fn transition_times_vector() {
        let a = Mat::from_rows(&[&[1.0, -0.1], &[0.0, 1.0]]).unwrap();
        let v = Mat::from_rows(&[&[1.0], &[2.0]]).unwrap();
        let out = mat_mul(&a, &v).unwrap();
        assert!((out[(0, 0)] - 0.8).abs() < 1e-15);
        assert_eq!(out[(1, 0)], 2.0);
    }

    #[test]
    fn transition_outer_product_matches_triple_loop() {
        let a = Mat::from_rows(&[&[1.0, -0.1], &[0.0, 1.0]]).unwrap();
        let got = mat_mul(&a, &a.transpose()).unwrap();
        let oracle = brute_mul(&a, &a.transpose());
        let expected = [1.01, -0.1, -0.1, 1.0];
        for (i, e) in expected.iter().enumerate() {
            assert!((got.data()[i] - e).abs() < 1e-15);
            assert!((oracle.data()[i] - e).abs() < 1e-15);
        }
    }

    #[test]
    fn mul_shape_error_names_both_shapes() {
        let err = mat_mul(&Mat::zeros(2, 3), &Mat::zeros(2, 3)).unwrap_err();
        assert_eq!(
            err,
            KgdError::Shape {
                op: "mat_mul",
                lhs: (2, 3),
                rhs: (2, 3)
            }
        );
        assert!(err.to_string().contains("(2, 3)"));
    }

    #[test]
    fn construction_rejects_non_finite() {
        assert!(matches!(
            Mat::new(1, 2, vec![1.0, f64::NAN]),
            Err(KgdError::NonFinite { index: 1 })
        ));
        assert!(Vector::new(vec![f64::INFINITY]).is_err());
        assert!(Mat::new(2, 2, vec![1.0; 3]).is_err());
    }

    #[test]
    fn chol_solve_examples() {
        let x = chol_solve(
            &Mat::scaled_identity(1, 2.02),
            &Mat::from_rows(&[&[1.0]]).unwrap(),
        )
        .unwrap();
        assert!((x[(0, 0)] - 1.0 / 2.02).abs() < 1e-15);
        assert!((x[(0, 0)] - 0.49505).abs() < 1e-5);

        let m = Mat::from_rows(&[&[1.0, 2.0], &[3.0, 4.0], &[5.0, 6.0]]).unwrap();
        assert_eq!(chol_solve(&Mat::identity(3), &m).unwrap(), m);

        let x = chol_solve(
            &Mat::diag(&[2.0, 4.0]),
            &Mat::from_rows(&[&[2.0], &[4.0]]).unwrap(),
        )
        .unwrap();
        assert!(x.data().iter().all(|v| (v - 1.0).abs() < 1e-15));
    }

    #[test]
    fn chol_rejects_indefinite_with_pivot() {
        let m = Mat::from_rows(&[&[1.0, 2.0], &[2.0, 1.0]]).unwrap();
        match chol_solve(&m, &Mat::identity(2)) {
            Err(KgdError::NotPositiveDefinite { pivot, .. }) => assert_eq!(pivot, 1),
            other => panic!("unexpected {other:?}"),
        }
        let asym = Mat::from_rows(&[&[1.0, 0.5], &[0.0, 1.0]]).unwrap();
        assert!(matches!(
            chol_solve(&asym, &Mat::identity(2)),
            Err(KgdError::NotSymmetric { .. })
        ));
    }

    #[test]
    fn eig_bounds_examples() {
        assert_eq!(sym_eig_bounds(&Mat::diag(&[0.5, 3.0])).unwrap(), (0.5, 3.0));
        let (lo, hi) = sym_eig_bounds(&Mat::scaled_identity(4, 0.01)).unwrap();
        assert_eq!((lo, hi), (0.01, 0.01));
        let (lo, hi) =
            sym_eig_bounds(&Mat::from_rows(&[&[2.0, 1.0], &[1.0, 2.0]]).unwrap()).unwrap();
        assert!((lo - 1.0).abs() < 1e-12 && (hi - 3.0).abs() < 1e-12);
    }

    #[test]
    fn eig_rejects_asymmetric() {
        let m = Mat::from_rows(&[&[1.0, 0.3], &[0.0, 1.0]]).unwrap();
        match sym_eig_bounds(&m) {
            Err(KgdError::NotSymmetric { max_asym }) => assert!((max_asym - 0.3).abs() < 1e-15),
            other => panic!("unexpected {other:?}"),
        }
    }

    #[test]
    fn eig_matches_characteristic_polynomial_3x3() {
        // [[4,1,0],[1,3,1],[0,1,2]] has eigenvalues 3 and 3 ± sqrt(3)
        let m = Mat::from_rows(&[&[4.0, 1.0, 0.0], &[1.0, 3.0, 1.0], &[0.0, 1.0, 2.0]]).unwrap();
        let (lo, hi) = sym_eig_bounds(&m).unwrap();
        assert!((lo - (3.0 - 3f64.sqrt())).abs() < 1e-12);
        assert!((hi - (3.0 + 3f64.sqrt())).abs() < 1e-12);
    }
}
