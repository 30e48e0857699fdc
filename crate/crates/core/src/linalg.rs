//! Dense complex linear algebra for small square systems: matrix/vector
//! arithmetic, a one-sided Jacobi SVD and a 2×2 solver.

use num_complex::Complex64;
use thiserror::Error;

/// Largest matrix dimension accepted by [`svd`].
pub const MAX_SVD_DIM: usize = 64;

#[derive(Debug, Error, PartialEq)]
pub enum LinalgError {
    #[error("matrix dimensions must be positive, got {rows}x{cols}")]
    EmptyDimensions { rows: usize, cols: usize },
    #[error("data length {len} does not match {rows}x{cols}")]
    DataLengthMismatch { rows: usize, cols: usize, len: usize },
    #[error("expected a square matrix, got {rows}x{cols}")]
    NotSquare { rows: usize, cols: usize },
    #[error("dimension {n} exceeds the supported maximum {max}")]
    TooLarge { n: usize, max: usize },
    #[error("matrix contains non-finite entries")]
    NonFinite,
    #[error("2x2 system is numerically singular (|det| = {det_abs:e})")]
    SingularSystem { det_abs: f64 },
}

/// Dense complex matrix, row-major.
#[derive(Debug, Clone, PartialEq)]
pub struct ComplexMatrix {
    rows: usize,
    cols: usize,
    data: Vec<Complex64>,
}

impl ComplexMatrix {
    pub fn new(rows: usize, cols: usize, data: Vec<Complex64>) -> Result<Self, LinalgError> {
        if rows == 0 || cols == 0 {
            return Err(LinalgError::EmptyDimensions { rows, cols });
        }
        if data.len() != rows * cols {
            return Err(LinalgError::DataLengthMismatch { rows, cols, len: data.len() });
        }
        Ok(Self { rows, cols, data })
    }

    pub fn zeros(rows: usize, cols: usize) -> Self {
        Self { rows, cols, data: vec![Complex64::ZERO; rows * cols] }
    }

    pub fn identity(n: usize) -> Self {
        let mut m = Self::zeros(n, n);
        for i in 0..n {
            m.set(i, i, Complex64::ONE);
        }
        m
    }

    /// Diagonal matrix from real entries.
    pub fn from_real_diagonal(diag: &[f64]) -> Self {
        let n = diag.len();
        let mut m = Self::zeros(n, n);
        for (i, &d) in diag.iter().enumerate() {
            m.set(i, i, Complex64::new(d, 0.0));
        }
        m
    }

    pub fn rows(&self) -> usize {
        self.rows
    }

    pub fn cols(&self) -> usize {
        self.cols
    }

    #[inline]
    pub fn get(&self, r: usize, c: usize) -> Complex64 {
        self.data[r * self.cols + c]
    }

    #[inline]
    pub fn set(&mut self, r: usize, c: usize, v: Complex64) {
        self.data[r * self.cols + c] = v;
    }

    pub fn column(&self, c: usize) -> Vec<Complex64> {
        (0..self.rows).map(|r| self.get(r, c)).collect()
    }

    pub fn mat_vec(&self, v: &[Complex64]) -> Vec<Complex64> {
        assert_eq!(self.cols, v.len(), "matrix-vector dimension mismatch");
        let mut out = vec![Complex64::ZERO; self.rows];
        for (r, row) in self.data.chunks_exact(self.cols).enumerate() {
            let mut sum = Complex64::ZERO;
            for (a, b) in row.iter().zip(v.iter()) {
                sum += a * b;
            }
            out[r] = sum;
        }
        out
    }

    pub fn matmul(&self, other: &Self) -> Self {
        assert_eq!(self.cols, other.rows, "matrix-matrix dimension mismatch");
        let mut out = Self::zeros(self.rows, other.cols);
        for r in 0..self.rows {
            for k in 0..self.cols {
                let a = self.get(r, k);
                for c in 0..other.cols {
                    let v = out.get(r, c) + a * other.get(k, c);
                    out.set(r, c, v);
                }
            }
        }
        out
    }

    /// Conjugate transpose.
    pub fn hermitian(&self) -> Self {
        let mut out = Self::zeros(self.cols, self.rows);
        for r in 0..self.rows {
            for c in 0..self.cols {
                out.set(c, r, self.get(r, c).conj());
            }
        }
        out
    }

    pub fn frobenius_norm(&self) -> f64 {
        self.data.iter().map(|z| z.norm_sqr()).sum::<f64>().sqrt()
    }

    pub fn is_finite(&self) -> bool {
        self.data.iter().all(|z| z.re.is_finite() && z.im.is_finite())
    }
}

/// Squared Euclidean norm of a complex vector.
#[inline]
pub fn norm_sqr(v: &[Complex64]) -> f64 {
    v.iter().map(|z| z.norm_sqr()).sum()
}

/// Squared Euclidean distance between two complex vectors.
#[inline]
pub fn dist_sqr(a: &[Complex64], b: &[Complex64]) -> f64 {
    debug_assert_eq!(a.len(), b.len());
    a.iter().zip(b.iter()).map(|(x, y)| (x - y).norm_sqr()).sum()
}

/// Singular value decomposition `H = U · Σ · V*` of a square matrix.
///
/// `u` and `v` are unitary; `singular_values` are non-negative and sorted
/// non-increasing.
#[derive(Debug, Clone)]
pub struct SvdFactors {
    pub u: ComplexMatrix,
    pub singular_values: Vec<f64>,
    pub v: ComplexMatrix,
}

impl SvdFactors {
    /// Applies `H⁻¹ = V · Σ⁻¹ · U*` to a vector.
    pub fn solve(&self, y: &[Complex64]) -> Vec<Complex64> {
        let n = self.singular_values.len();
        assert_eq!(y.len(), n, "solve dimension mismatch");
        // w = Σ⁻¹ U* y
        let mut w = vec![Complex64::ZERO; n];
        for k in 0..n {
            let mut sum = Complex64::ZERO;
            for i in 0..n {
                sum += self.u.get(i, k).conj() * y[i];
            }
            w[k] = sum / self.singular_values[k];
        }
        // x = V w
        self.v.mat_vec(&w)
    }

    /// Rebuilds `U · Σ · V*`.
    pub fn reconstruct(&self) -> ComplexMatrix {
        let sigma = ComplexMatrix::from_real_diagonal(&self.singular_values);
        self.u.matmul(&sigma).matmul(&self.v.hermitian())
    }
}

/// Computes the SVD of a square complex matrix by one-sided Jacobi
/// rotations: the working copy `W = H·V` is driven to orthogonal columns,
/// after which `σ_j = ‖W_j‖` and `U_j = W_j/σ_j`.
pub fn svd(h: &ComplexMatrix) -> Result<SvdFactors, LinalgError> {
    if h.rows != h.cols {
        return Err(LinalgError::NotSquare { rows: h.rows, cols: h.cols });
    }
    let n = h.rows;
    if n > MAX_SVD_DIM {
        return Err(LinalgError::TooLarge { n, max: MAX_SVD_DIM });
    }
    if !h.is_finite() {
        return Err(LinalgError::NonFinite);
    }

    // Column-major working copies of W = H·V_acc and V_acc.
    let mut w: Vec<Vec<Complex64>> = (0..n).map(|c| h.column(c)).collect();
    let mut v: Vec<Vec<Complex64>> = (0..n)
        .map(|c| {
            let mut e = vec![Complex64::ZERO; n];
            e[c] = Complex64::ONE;
            e
        })
        .collect();

    let off_tol = 1e-15;
    let max_sweeps = 60;
    for _ in 0..max_sweeps {
        let mut rotated = false;
        for p in 0..n {
            for q in (p + 1)..n {
                let alpha = norm_sqr(&w[p]);
                let beta = norm_sqr(&w[q]);
                let gamma: Complex64 =
                    w[p].iter().zip(w[q].iter()).map(|(a, b)| a.conj() * b).sum();
                let gabs = gamma.norm();
                if gabs <= off_tol * (alpha * beta).sqrt() || gabs == 0.0 {
                    continue;
                }
                rotated = true;
                let phase = gamma / gabs;
                let zeta = (beta - alpha) / (2.0 * gabs);
                let t = zeta.signum() / (zeta.abs() + (1.0 + zeta * zeta).sqrt());
                let c = 1.0 / (1.0 + t * t).sqrt();
                let s = c * t;
                // New columns: p ← c·p − s·e^{-iφ}·q, q ← s·e^{iφ}·p + c·q.
                let sp = s * phase.conj();
                let sq = s * phase;
                for cols in [&mut w, &mut v] {
                    let (head, tail) = cols.split_at_mut(q);
                    let cp = &mut head[p];
                    let cq = &mut tail[0];
                    for i in 0..n {
                        let a = cp[i];
                        let b = cq[i];
                        cp[i] = c * a - sp * b;
                        cq[i] = sq * a + c * b;
                    }
                }
            }
        }
        if !rotated {
            break;
        }
    }

    // Singular values with a non-increasing sort.
    let mut order: Vec<usize> = (0..n).collect();
    let sigmas: Vec<f64> = w.iter().map(|col| norm_sqr(col).sqrt()).collect();
    order.sort_by(|&a, &b| sigmas[b].total_cmp(&sigmas[a]));

    let mut u_mat = ComplexMatrix::zeros(n, n);
    let mut v_mat = ComplexMatrix::zeros(n, n);
    let mut singular_values = Vec::with_capacity(n);
    let sigma_max = order.first().map_or(0.0, |&j| sigmas[j]);
    let mut deficient = Vec::new();
    for (k, &j) in order.iter().enumerate() {
        let sig = sigmas[j];
        singular_values.push(sig);
        for i in 0..n {
            v_mat.set(i, k, v[j][i]);
        }
        if sig > sigma_max * 1e-300 && sig > 0.0 {
            for i in 0..n {
                u_mat.set(i, k, w[j][i] / sig);
            }
        } else {
            deficient.push(k);
        }
    }
    if !deficient.is_empty() {
        complete_unitary(&mut u_mat, &deficient);
    }

    Ok(SvdFactors { u: u_mat, singular_values, v: v_mat })
}

/// Fills the listed columns with unit vectors orthogonal to the rest, so a
/// rank-deficient input still yields a unitary U.
fn complete_unitary(u: &mut ComplexMatrix, missing: &[usize]) {
    let n = u.rows();
    let mut filled: Vec<usize> = (0..n).filter(|c| !missing.contains(c)).collect();
    for &col in missing {
        // Pick the canonical basis vector with the largest residual after
        // projecting out the already-filled columns.
        let mut best: Option<(f64, Vec<Complex64>)> = None;
        for basis in 0..n {
            let mut cand = vec![Complex64::ZERO; n];
            cand[basis] = Complex64::ONE;
            for &f in &filled {
                let mut dot = Complex64::ZERO;
                for i in 0..n {
                    dot += u.get(i, f).conj() * cand[i];
                }
                for i in 0..n {
                    let v = cand[i] - dot * u.get(i, f);
                    cand[i] = v;
                }
            }
            let nrm = norm_sqr(&cand);
            if best.as_ref().is_none_or(|(b, _)| nrm > *b) {
                best = Some((nrm, cand));
            }
        }
        let (nrm, cand) = best.expect("n > 0");
        let scale = nrm.sqrt();
        for i in 0..n {
            u.set(i, col, cand[i] / scale);
        }
        filled.push(col);
    }
}

/// Relative singularity guard for [`solve_2x2`].
pub fn solve_2x2_det_tol(max_coeff_abs: f64) -> f64 {
    1e-12 * max_coeff_abs * max_coeff_abs
}

/// Solves the 2×2 complex system `a·z = rhs` by Cramer's rule.
///
/// Returns [`LinalgError::SingularSystem`] when `|det|` falls under the
/// scale-relative guard, which callers treat as a rejection of the pair of
/// equations rather than a fatal error.
#[allow(clippy::too_many_arguments)]
pub fn solve_2x2(
    a11: Complex64,
    a12: Complex64,
    a21: Complex64,
    a22: Complex64,
    rhs1: Complex64,
    rhs2: Complex64,
) -> Result<(Complex64, Complex64), LinalgError> {
    let det = a11 * a22 - a12 * a21;
    let max_abs = a11.norm().max(a12.norm()).max(a21.norm()).max(a22.norm());
    let det_abs = det.norm();
    if det_abs <= solve_2x2_det_tol(max_abs) {
        return Err(LinalgError::SingularSystem { det_abs });
    }
    let z1 = (rhs1 * a22 - rhs2 * a12) / det;
    let z2 = (a11 * rhs2 - a21 * rhs1) / det;
    Ok((z1, z2))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::rng::SeededRng;

    fn random_matrix(n: usize, rng: &mut SeededRng) -> ComplexMatrix {
        let data = rng.complex_normal_vector(n * n);
        ComplexMatrix::new(n, n, data).unwrap()
    }

    fn assert_svd_quality(h: &ComplexMatrix, f: &SvdFactors) {
        let n = h.rows();
        let recon = f.reconstruct();
        let mut err = ComplexMatrix::zeros(n, n);
        for r in 0..n {
            for c in 0..n {
                err.set(r, c, recon.get(r, c) - h.get(r, c));
            }
        }
        let scale = h.frobenius_norm().max(1.0);
        assert!(
            err.frobenius_norm() <= 1e-12 * scale,
            "reconstruction residual {:e} over scale {:e}",
            err.frobenius_norm(),
            scale
        );
        for m in [&f.u, &f.v] {
            let gram = m.hermitian().matmul(m);
            let mut dev = 0.0;
            for r in 0..n {
                for c in 0..n {
                    let expect = if r == c { Complex64::ONE } else { Complex64::ZERO };
                    dev += (gram.get(r, c) - expect).norm_sqr();
                }
            }
            assert!(dev.sqrt() <= 1e-12 * n as f64, "unitarity deviation {:e}", dev.sqrt());
        }
        for w in f.singular_values.windows(2) {
            assert!(w[0] >= w[1], "singular values not sorted: {:?}", f.singular_values);
        }
        assert!(f.singular_values.iter().all(|&s| s >= 0.0));
    }

    #[test]
    fn svd_identity() {
        let h = ComplexMatrix::identity(3);
        let f = svd(&h).unwrap();
        for &s in &f.singular_values {
            assert!((s - 1.0).abs() < 1e-14);
        }
        assert_svd_quality(&h, &f);
    }

    #[test]
    fn svd_real_diagonal() {
        let h = ComplexMatrix::from_real_diagonal(&[3.0, 1.0]);
        let f = svd(&h).unwrap();
        assert!((f.singular_values[0] - 3.0).abs() < 1e-14);
        assert!((f.singular_values[1] - 1.0).abs() < 1e-14);
        assert_svd_quality(&h, &f);
    }

    #[test]
    fn svd_zero_matrix_still_unitary() {
        let h = ComplexMatrix::zeros(4, 4);
        let f = svd(&h).unwrap();
        assert!(f.singular_values.iter().all(|&s| s == 0.0));
        assert_svd_quality(&h, &f);
    }

    #[test]
    fn svd_random_gaussian_8x8() {
        let mut rng = SeededRng::new(7);
        let h = random_matrix(8, &mut rng);
        let f = svd(&h).unwrap();
        assert_svd_quality(&h, &f);
    }

    #[test]
    fn svd_random_many_sizes() {
        let mut rng = SeededRng::new(1234);
        for n in 2..=16 {
            for _ in 0..20 {
                let h = random_matrix(n, &mut rng);
                let f = svd(&h).unwrap();
                assert_svd_quality(&h, &f);
            }
        }
    }

    #[test]
    fn svd_rejects_bad_input() {
        let rect = ComplexMatrix::zeros(2, 3);
        assert!(matches!(svd(&rect), Err(LinalgError::NotSquare { .. })));
        let mut inf = ComplexMatrix::zeros(2, 2);
        inf.set(0, 0, Complex64::new(f64::INFINITY, 0.0));
        assert!(matches!(svd(&inf), Err(LinalgError::NonFinite)));
    }

    #[test]
    fn solve_applies_inverse() {
        let mut rng = SeededRng::new(99);
        let h = random_matrix(6, &mut rng);
        let f = svd(&h).unwrap();
        let x = rng.complex_normal_vector(6);
        let y = h.mat_vec(&x);
        let back = f.solve(&y);
        for (a, b) in back.iter().zip(x.iter()) {
            assert!((a - b).norm() < 1e-10);
        }
    }

    #[test]
    fn solve_2x2_identity_and_diagonal() {
        let one = Complex64::ONE;
        let zero = Complex64::ZERO;
        let rhs1 = Complex64::new(3.0, 1.0);
        let rhs2 = Complex64::new(-2.0, 0.0);
        let (z1, z2) = solve_2x2(one, zero, zero, one, rhs1, rhs2).unwrap();
        assert_eq!((z1, z2), (rhs1, rhs2));

        let (z1, z2) = solve_2x2(
            Complex64::new(2.0, 0.0),
            zero,
            zero,
            Complex64::new(4.0, 0.0),
            Complex64::new(2.0, 0.0),
            Complex64::new(4.0, 0.0),
        )
        .unwrap();
        assert!((z1 - one).norm() < 1e-15 && (z2 - one).norm() < 1e-15);
    }

    #[test]
    fn solve_2x2_recovers_known_solution() {
        let mut rng = SeededRng::new(5);
        for _ in 0..1000 {
            let a11 = rng.complex_normal();
            let a12 = rng.complex_normal();
            let a21 = rng.complex_normal();
            let a22 = rng.complex_normal();
            let z1 = rng.complex_normal();
            let z2 = rng.complex_normal();
            let rhs1 = a11 * z1 + a12 * z2;
            let rhs2 = a21 * z1 + a22 * z2;
            match solve_2x2(a11, a12, a21, a22, rhs1, rhs2) {
                Ok((w1, w2)) => {
                    let scale = 1.0
                        + [a11, a12, a21, a22, rhs1, rhs2]
                            .iter()
                            .map(|z| z.norm())
                            .fold(0.0, f64::max);
                    let r1 = (a11 * w1 + a12 * w2 - rhs1).norm();
                    let r2 = (a21 * w1 + a22 * w2 - rhs2).norm();
                    assert!(r1 <= 1e-10 * scale && r2 <= 1e-10 * scale);
                }
                // Random Gaussian systems may occasionally be ill-conditioned.
                Err(LinalgError::SingularSystem { .. }) => {}
                Err(e) => panic!("unexpected error {e}"),
            }
        }
    }

    #[test]
    fn solve_2x2_singular_rejected() {
        let one = Complex64::ONE;
        let err = solve_2x2(one, one, one, one, one, one);
        assert!(matches!(err, Err(LinalgError::SingularSystem { .. })));
    }
}
