//! Lyapunov equations by Kronecker-product linear solve (desk scale, n ≤ 30).

use super::{check_finite, check_square, schur::eigenvalues, symmetrize, Domain, Matrix, ABS_FLOOR};
use crate::error::{Error, Result};

/// Solves `AᵀX + XA + Q = 0` (continuous) or `AᵀXA − X + Q = 0` (discrete).
pub fn solve_lyapunov(a: &Matrix, q: &Matrix, domain: Domain) -> Result<Matrix> {
    check_square(a, "A")?;
    check_square(q, "Q")?;
    if a.nrows() != q.nrows() {
        return Err(Error::ShapeMismatch(format!(
            "A is {0}x{0} but Q is {1}x{1}",
            a.nrows(),
            q.nrows()
        )));
    }
    check_finite(a)?;
    check_finite(q)?;
    let n = a.nrows();
    if n == 0 {
        return Ok(Matrix::zeros(0, 0));
    }

    let eigs = eigenvalues(a)?;
    let scale = a.norm().max(ABS_FLOOR);
    let sep = match domain {
        Domain::Continuous => eigs
            .iter()
            .flat_map(|x| eigs.iter().map(move |y| (x + y).norm()))
            .fold(f64::INFINITY, f64::min),
        Domain::Discrete => eigs
            .iter()
            .flat_map(|x| eigs.iter().map(move |y| (x * y - 1.0).norm()))
            .fold(f64::INFINITY, f64::min),
    };
    let sep_scale = match domain {
        Domain::Continuous => scale,
        Domain::Discrete => scale * scale + 1.0,
    };
    if sep <= 1e-10 * sep_scale {
        return Err(Error::SingularSylvester);
    }

    let at = a.transpose();
    let id = Matrix::identity(n, n);
    // column-major vec: vec(AᵀX) = (I⊗Aᵀ)vec X, vec(XA) = (Aᵀ⊗I)vec X, vec(AᵀXA) = (Aᵀ⊗Aᵀ)vec X
    let op = match domain {
        Domain::Continuous => id.kronecker(&at) + at.kronecker(&id),
        Domain::Discrete => at.kronecker(&at) - Matrix::identity(n * n, n * n),
    };
    let rhs = nalgebra::DVector::from_iterator(n * n, q.iter().map(|v| -v));
    let sol = op.lu().solve(&rhs).ok_or(Error::SingularSylvester)?;
    let x = Matrix::from_column_slice(n, n, sol.as_slice());
    let x = symmetrize(&x);
    check_finite(&x)?;
    Ok(x)
}

/// Residual of the Lyapunov equation for a candidate solution.
pub fn lyapunov_residual(a: &Matrix, q: &Matrix, x: &Matrix, domain: Domain) -> Matrix {
    match domain {
        Domain::Continuous => a.transpose() * x + x * a + q,
        Domain::Discrete => a.transpose() * x * a - x + q,
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_abs_diff_eq;

    #[test]
    fn scalar_continuous() {
        let x = solve_lyapunov(
            &Matrix::from_element(1, 1, -1.0),
            &Matrix::from_element(1, 1, 2.0),
            Domain::Continuous,
        )
        .unwrap();
        assert_abs_diff_eq!(x[(0, 0)], 1.0, epsilon = 1e-14);
    }

    #[test]
    fn scalar_discrete() {
        let x = solve_lyapunov(
            &Matrix::from_element(1, 1, 0.5),
            &Matrix::from_element(1, 1, 0.75),
            Domain::Discrete,
        )
        .unwrap();
        assert_abs_diff_eq!(x[(0, 0)], 1.0, epsilon = 1e-14);
    }

    #[test]
    fn decoupled_diagonal() {
        let a = Matrix::from_row_slice(2, 2, &[-1.0, 0.0, 0.0, -2.0]);
        let x = solve_lyapunov(&a, &Matrix::identity(2, 2), Domain::Continuous).unwrap();
        assert_abs_diff_eq!(x[(0, 0)], 0.5, epsilon = 1e-14);
        assert_abs_diff_eq!(x[(1, 1)], 0.25, epsilon = 1e-14);
        assert_abs_diff_eq!(x[(0, 1)], 0.0, epsilon = 1e-14);
    }

    #[test]
    fn singular_operator_detected() {
        // eigenvalues ±1 sum to zero
        let a = Matrix::from_row_slice(2, 2, &[1.0, 0.0, 0.0, -1.0]);
        assert_eq!(
            solve_lyapunov(&a, &Matrix::identity(2, 2), Domain::Continuous),
            Err(Error::SingularSylvester)
        );
        let a = Matrix::from_row_slice(2, 2, &[2.0, 0.0, 0.0, 0.5]);
        assert_eq!(
            solve_lyapunov(&a, &Matrix::identity(2, 2), Domain::Discrete),
            Err(Error::SingularSylvester)
        );
    }

    #[test]
    fn nonsymmetric_a_residual() {
        let a = Matrix::from_row_slice(3, 3, &[-2.0, 1.0, 0.3, 0.0, -1.0, 2.0, -0.5, 0.0, -3.0]);
        let q = Matrix::from_row_slice(3, 3, &[2.0, 0.5, 0.0, 0.5, 1.0, 0.1, 0.0, 0.1, 3.0]);
        let x = solve_lyapunov(&a, &q, Domain::Continuous).unwrap();
        let r = lyapunov_residual(&a, &q, &x, Domain::Continuous);
        assert!(r.norm() <= 1e-8 * (a.norm() * x.norm() + q.norm()));
    }
}
