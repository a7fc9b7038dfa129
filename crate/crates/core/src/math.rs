//! Small complex-vector kernels shared by the solvers.

use num_complex::Complex64;

/// Hermitian inner product `a^H b`.
pub(crate) fn cdot(a: &[Complex64], b: &[Complex64]) -> Complex64 {
    debug_assert_eq!(a.len(), b.len());
    a.iter().zip(b).map(|(x, y)| x.conj() * y).sum()
}

/// Squared Euclidean norm `‖v‖²`.
pub(crate) fn norm_sqr(v: &[Complex64]) -> f64 {
    v.iter().map(|x| x.norm_sqr()).sum()
}

/// `v * s` for a real scalar.
pub(crate) fn scaled(v: &[Complex64], s: f64) -> Vec<Complex64> {
    v.iter().map(|x| x * s).collect()
}

/// `dst += s * src` with a complex scalar.
pub(crate) fn axpy(dst: &mut [Complex64], s: Complex64, src: &[Complex64]) {
    debug_assert_eq!(dst.len(), src.len());
    for (d, x) in dst.iter_mut().zip(src) {
        *d += s * x;
    }
}

/// Euclidean projection of `v` onto the probability simplex.
///
/// Sorting-based algorithm; exact up to floating point for small dimensions.
pub(crate) fn project_simplex(v: &[f64]) -> Vec<f64> {
    let mut sorted = v.to_vec();
    sorted.sort_by(|a, b| b.partial_cmp(a).unwrap());
    let mut cumsum = 0.0;
    let mut theta = 0.0;
    for (i, &u) in sorted.iter().enumerate() {
        cumsum += u;
        let candidate = (cumsum - 1.0) / (i + 1) as f64;
        if u - candidate > 0.0 {
            theta = candidate;
        }
    }
    v.iter().map(|&x| (x - theta).max(0.0)).collect()
}

/// In-place Cholesky factor `L` (lower triangular, row-major) of a Hermitian
/// positive-definite matrix. Returns `None` if a pivot is not positive.
pub(crate) fn cholesky_lower(matrix: &[Complex64], dim: usize) -> Option<Vec<Complex64>> {
    let mut lower = vec![Complex64::new(0.0, 0.0); dim * dim];
    for i in 0..dim {
        for j in 0..=i {
            let mut sum = matrix[i * dim + j];
            for k in 0..j {
                sum -= lower[i * dim + k] * lower[j * dim + k].conj();
            }
            if i == j {
                let pivot = sum.re;
                if pivot <= 0.0 || !pivot.is_finite() {
                    return None;
                }
                lower[i * dim + i] = Complex64::new(pivot.sqrt(), 0.0);
            } else {
                lower[i * dim + j] = sum / lower[j * dim + j];
            }
        }
    }
    Some(lower)
}

/// Solves `L^H x = b` by back substitution, with `L` lower triangular.
pub(crate) fn solve_upper_from_lower(
    lower: &[Complex64],
    dim: usize,
    b: &[Complex64],
) -> Vec<Complex64> {
    let mut x = vec![Complex64::new(0.0, 0.0); dim];
    for i in (0..dim).rev() {
        let mut sum = b[i];
        for j in (i + 1)..dim {
            // (L^H)[i][j] = conj(L[j][i])
            sum -= lower[j * dim + i].conj() * x[j];
        }
        x[i] = sum / lower[i * dim + i].conj();
    }
    x
}
