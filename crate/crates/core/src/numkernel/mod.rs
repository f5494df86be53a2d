//! Dense real-matrix kernels shared by every other module.
//!
//! Tolerances are relative to the norm of the input with an absolute floor of
//! [`ABS_FLOOR`].

mod expm;
mod lyapunov;
mod schur;

pub use expm::expm;
pub use lyapunov::{lyapunov_residual, solve_lyapunov};
pub use schur::{eigenvalues, real_schur_dominant, DominantBlock, Ordering, SchurDominant};

use nalgebra::{DMatrix, DVector};

use crate::error::{Error, Result};

pub type Matrix = DMatrix<f64>;
pub type Vector = DVector<f64>;

/// Absolute floor applied to every scale-relative tolerance.
pub const ABS_FLOOR: f64 = 1e-12;

/// Relative symmetry tolerance accepted by the symmetric kernels.
pub const SYMMETRY_TOL: f64 = 1e-10;

/// Largest condition estimate accepted by [`solve_linear`].
pub const MAX_CONDITION: f64 = 1e12;

/// Time domain of a model, also selects the eigenvalue ordering key.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum Domain {
    Continuous,
    Discrete,
}

impl Domain {
    pub fn ordering(self) -> Ordering {
        match self {
            Domain::Continuous => Ordering::RealPart,
            Domain::Discrete => Ordering::Modulus,
        }
    }
}

/// Counts of positive, negative and (numerically) zero eigenvalues.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct Inertia {
    pub n_pos: usize,
    pub n_neg: usize,
    pub n_zero: usize,
}

/// Eigen-decomposition of a symmetric matrix, eigenvalues ascending.
#[derive(Debug, Clone)]
pub struct SymEig {
    pub values: Vector,
    pub vectors: Matrix,
}

pub fn scaled(tol: f64, norm: f64) -> f64 {
    (tol * norm).max(ABS_FLOOR)
}

pub fn check_finite(m: &Matrix) -> Result<()> {
    if m.iter().all(|x| x.is_finite()) {
        Ok(())
    } else {
        Err(Error::NonFinite)
    }
}

pub fn check_square(m: &Matrix, what: &str) -> Result<()> {
    if m.is_square() {
        Ok(())
    } else {
        Err(Error::ShapeMismatch(format!(
            "{what} must be square, got {}x{}",
            m.nrows(),
            m.ncols()
        )))
    }
}

pub fn symmetrize(m: &Matrix) -> Matrix {
    (m + m.transpose()) * 0.5
}

fn check_symmetric(m: &Matrix) -> Result<()> {
    check_square(m, "symmetric matrix")?;
    let scale = m.norm();
    let asymmetry = (m - m.transpose()).norm();
    if asymmetry > scaled(SYMMETRY_TOL, scale) {
        return Err(Error::NotSymmetric { asymmetry, scale });
    }
    Ok(())
}

/// Symmetric eigen-decomposition with eigenvalues sorted ascending.
pub fn sym_eig(m: &Matrix) -> Result<SymEig> {
    check_symmetric(m)?;
    check_finite(m)?;
    let n = m.nrows();
    if n == 0 {
        return Ok(SymEig {
            values: Vector::zeros(0),
            vectors: Matrix::zeros(0, 0),
        });
    }
    let eig = nalgebra::SymmetricEigen::new(symmetrize(m));
    let mut order: Vec<usize> = (0..n).collect();
    order.sort_by(|&i, &j| eig.eigenvalues[i].total_cmp(&eig.eigenvalues[j]));
    let values = Vector::from_iterator(n, order.iter().map(|&i| eig.eigenvalues[i]));
    let mut vectors = Matrix::zeros(n, n);
    for (dst, &src) in order.iter().enumerate() {
        vectors.set_column(dst, &eig.eigenvectors.column(src));
    }
    Ok(SymEig { values, vectors })
}

pub fn min_eigenvalue(m: &Matrix) -> Result<f64> {
    let eig = sym_eig(m)?;
    Ok(eig.values.iter().copied().fold(f64::INFINITY, f64::min))
}

pub fn max_eigenvalue(m: &Matrix) -> Result<f64> {
    let eig = sym_eig(m)?;
    Ok(eig.values.iter().copied().fold(f64::NEG_INFINITY, f64::max))
}

/// Inertia with the zero band `tol·‖M‖₂` (floored at [`ABS_FLOOR`]).
pub fn inertia_of(m: &Matrix, tol: f64) -> Result<Inertia> {
    let eig = sym_eig(m)?;
    let spectral = eig.values.iter().fold(0.0_f64, |acc, v| acc.max(v.abs()));
    let band = scaled(tol, spectral);
    let mut inertia = Inertia {
        n_pos: 0,
        n_neg: 0,
        n_zero: 0,
    };
    for &v in eig.values.iter() {
        if v > band {
            inertia.n_pos += 1;
        } else if v < -band {
            inertia.n_neg += 1;
        } else {
            inertia.n_zero += 1;
        }
    }
    Ok(inertia)
}

fn norm1(m: &Matrix) -> f64 {
    m.column_iter()
        .map(|c| c.iter().map(|x| x.abs()).sum::<f64>())
        .fold(0.0, f64::max)
}

/// 1-norm condition number, computed from an explicit inverse (desk scale only).
pub fn condition_estimate(a: &Matrix) -> f64 {
    if a.nrows() == 0 {
        return 1.0;
    }
    match a.clone().lu().try_inverse() {
        Some(inv) if inv.iter().all(|x| x.is_finite()) => norm1(a) * norm1(&inv),
        _ => f64::INFINITY,
    }
}

/// Solves `A·X = rhs` by partial-pivoting LU.
pub fn solve_linear(a: &Matrix, rhs: &Matrix) -> Result<Matrix> {
    check_square(a, "coefficient matrix")?;
    if a.nrows() != rhs.nrows() {
        return Err(Error::ShapeMismatch(format!(
            "rhs has {} rows, expected {}",
            rhs.nrows(),
            a.nrows()
        )));
    }
    check_finite(a)?;
    check_finite(rhs)?;
    let cond = condition_estimate(a);
    if !(cond < MAX_CONDITION) {
        return Err(Error::IllConditioned { cond });
    }
    let x = a
        .clone()
        .lu()
        .solve(rhs)
        .ok_or(Error::IllConditioned { cond: f64::INFINITY })?;
    check_finite(&x)?;
    Ok(x)
}

/// Inverse with the same conditioning guard as [`solve_linear`].
pub fn inverse(a: &Matrix) -> Result<Matrix> {
    solve_linear(a, &Matrix::identity(a.nrows(), a.nrows()))
}

/// Inverse guarded by a caller-chosen condition bound.
pub fn inverse_with_bound(a: &Matrix, max_cond: f64) -> Result<Matrix> {
    check_square(a, "matrix")?;
    let cond = condition_estimate(a);
    if !(cond < max_cond) {
        return Err(Error::IllConditioned { cond });
    }
    a.clone()
        .lu()
        .try_inverse()
        .ok_or(Error::IllConditioned { cond: f64::INFINITY })
}

/// Numerical rank via singular values above `tol·σ_max`.
pub fn rank(m: &Matrix, tol: f64) -> usize {
    if m.nrows() == 0 || m.ncols() == 0 {
        return 0;
    }
    let sv = m.clone().svd(false, false).singular_values;
    let smax = sv.iter().copied().fold(0.0, f64::max);
    if smax <= ABS_FLOOR {
        return 0;
    }
    sv.iter().filter(|&&s| s > tol * smax).count()
}

/// Orthonormal basis of the numerical range of `m`: leading columns of a
/// column-pivoted Householder QR whose `|R_ii|` exceed `threshold` (absolute).
///
/// Used instead of the SVD's `U`, which loses orthogonality to the null
/// space on some nearly rank-deficient tall blocks.
pub fn range_basis(m: &Matrix, threshold: f64) -> Matrix {
    if m.nrows() == 0 || m.ncols() == 0 {
        return Matrix::zeros(m.nrows(), 0);
    }
    let qr = m.clone().col_piv_qr();
    let r = qr.r();
    let k = (0..r.nrows().min(r.ncols()))
        .take_while(|&i| r[(i, i)].abs() > threshold)
        .count();
    qr.q().columns(0, k).into_owned()
}

/// Orthogonal matrix whose leading `k` columns span the columns of `x` (n×k, full column rank).
pub(crate) fn complete_orthonormal_basis(x: &Matrix) -> Matrix {
    let n = x.nrows();
    let k = x.ncols();
    let mut q = Matrix::identity(n, n);
    let mut work = x.clone();
    for j in 0..k {
        let col: Vector = work.column(j).rows(j, n - j).into_owned();
        let alpha = col.norm();
        if alpha <= 0.0 {
            continue;
        }
        let sign = if col[0] >= 0.0 { 1.0 } else { -1.0 };
        let mut v = col.clone();
        v[0] += sign * alpha;
        let vnorm = v.norm();
        if vnorm <= 0.0 {
            continue;
        }
        v /= vnorm;
        // work <- H work, q <- q H with H = I - 2 v vᵀ acting on rows j..n
        for c in 0..k {
            let mut seg = work.view_mut((j, c), (n - j, 1));
            let d = 2.0 * v.dot(&seg.column(0));
            seg.column_mut(0).axpy(-d, &v, 1.0);
        }
        for r in 0..n {
            let mut seg = q.view_mut((r, j), (1, n - j));
            let d = 2.0 * seg.row(0).transpose().dot(&v);
            for (i, vi) in v.iter().enumerate() {
                seg[(0, i)] -= d * vi;
            }
        }
    }
    q
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_abs_diff_eq;

    /// Rank-one 7×2 block on which the SVD's `U` is off by ~1e-4.
    #[test]
    fn range_basis_stays_in_range() {
        let col = [-0.030169138362094637, -0.0269103992177823, 0.0023800580513415994, 0.016504398821141388,
            0.0033452399105714575, -0.010790367551922883, 0.0010344226607215232];
        let ratio = 2.8238772;
        let m = Matrix::from_fn(7, 2, |i, j| if j == 0 { col[i] } else { ratio * col[i] });
        let q = range_basis(&m, 1e-10);
        assert_eq!(q.ncols(), 1);
        assert!((&m - &q * (q.transpose() * &m)).norm() < 1e-14);
        assert!(range_basis(&Matrix::zeros(3, 2), 1e-10).ncols() == 0);
    }

    #[test]
    fn sym_eig_diagonal_sorted() {
        let m = Matrix::from_diagonal(&Vector::from_vec(vec![3.0, 1.0, 2.0]));
        let e = sym_eig(&m).unwrap();
        assert_eq!(e.values.as_slice(), &[1.0, 2.0, 3.0]);
    }

    #[test]
    fn sym_eig_identity_orthogonal() {
        let e = sym_eig(&Matrix::identity(4, 4)).unwrap();
        for v in e.values.iter() {
            assert_abs_diff_eq!(*v, 1.0, epsilon = 1e-14);
        }
        let vvt = &e.vectors * e.vectors.transpose();
        assert!((vvt - Matrix::identity(4, 4)).norm() < 1e-12);
    }

    #[test]
    fn sym_eig_swap() {
        let m = Matrix::from_row_slice(2, 2, &[0.0, 1.0, 1.0, 0.0]);
        let e = sym_eig(&m).unwrap();
        assert_abs_diff_eq!(e.values[0], -1.0, epsilon = 1e-14);
        assert_abs_diff_eq!(e.values[1], 1.0, epsilon = 1e-14);
    }

    #[test]
    fn sym_eig_rejects_asymmetric() {
        let m = Matrix::from_row_slice(2, 2, &[0.0, 1.0, 0.0, 0.0]);
        assert!(matches!(sym_eig(&m), Err(Error::NotSymmetric { .. })));
    }

    #[test]
    fn inertia_examples() {
        let d = |v: &[f64]| Matrix::from_diagonal(&Vector::from_row_slice(v));
        let i = inertia_of(&d(&[1.0, -1.0, 0.0]), 1e-9).unwrap();
        assert_eq!((i.n_pos, i.n_neg, i.n_zero), (1, 1, 1));
        let i = inertia_of(&Matrix::identity(5, 5), 1e-9).unwrap();
        assert_eq!((i.n_pos, i.n_neg, i.n_zero), (5, 0, 0));
        let i = inertia_of(&d(&[2.0, -3.0, -3.0, 5.0]), 1e-9).unwrap();
        assert_eq!((i.n_pos, i.n_neg, i.n_zero), (2, 2, 0));
    }

    #[test]
    fn solve_linear_examples() {
        let rhs = Matrix::from_row_slice(3, 2, &[1.0, 2.0, 3.0, 4.0, 5.0, 6.0]);
        let x = solve_linear(&Matrix::identity(3, 3), &rhs).unwrap();
        assert_eq!(x, rhs);

        let a = Matrix::from_row_slice(2, 2, &[2.0, 0.0, 0.0, 4.0]);
        let x = solve_linear(&a, &Matrix::from_column_slice(2, 1, &[2.0, 4.0])).unwrap();
        assert_abs_diff_eq!(x[0], 1.0, epsilon = 1e-15);
        assert_abs_diff_eq!(x[1], 1.0, epsilon = 1e-15);

        let a = Matrix::from_row_slice(2, 2, &[1.0, 1.0, 0.0, 1.0]);
        let x = solve_linear(&a, &Matrix::from_column_slice(2, 1, &[2.0, 1.0])).unwrap();
        assert_abs_diff_eq!(x[0], 1.0, epsilon = 1e-15);
        assert_abs_diff_eq!(x[1], 1.0, epsilon = 1e-15);
    }

    #[test]
    fn solve_linear_singular_is_ill_conditioned() {
        let a = Matrix::from_row_slice(2, 2, &[1.0, 2.0, 2.0, 4.0]);
        let rhs = Matrix::from_column_slice(2, 1, &[1.0, 1.0]);
        assert!(matches!(
            solve_linear(&a, &rhs),
            Err(Error::IllConditioned { .. })
        ));
    }

    #[test]
    fn completed_basis_spans_input() {
        let x = Matrix::from_row_slice(4, 2, &[1.0, 0.5, 2.0, -1.0, 0.0, 3.0, -1.0, 1.0]);
        let q = complete_orthonormal_basis(&x);
        assert!((q.transpose() * &q - Matrix::identity(4, 4)).norm() < 1e-13);
        // trailing columns orthogonal to span(x)
        let tail = q.columns(2, 2);
        assert!((tail.transpose() * &x).norm() < 1e-12);
    }
}
