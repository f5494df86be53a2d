//! Matrix exponential by scaling and squaring with diagonal Padé approximants.

use super::{check_finite, check_square, Matrix};
use crate::error::Result;

const B3: [f64; 4] = [120.0, 60.0, 12.0, 1.0];
const B5: [f64; 6] = [30240.0, 15120.0, 3360.0, 420.0, 30.0, 1.0];
const B7: [f64; 8] = [
    17297280.0, 8648640.0, 1995840.0, 277200.0, 25200.0, 1512.0, 56.0, 1.0,
];
const B9: [f64; 10] = [
    17643225600.0,
    8821612800.0,
    2075673600.0,
    302702400.0,
    30270240.0,
    2162160.0,
    110880.0,
    3960.0,
    90.0,
    1.0,
];
const B13: [f64; 14] = [
    64764752532480000.0,
    32382376266240000.0,
    7771770303897600.0,
    1187353796428800.0,
    129060195264000.0,
    10559470521600.0,
    670442572800.0,
    33522128640.0,
    1323241920.0,
    40840800.0,
    960960.0,
    16380.0,
    182.0,
    1.0,
];

// 1-norm thresholds below which degree m meets unit roundoff backward error
const THETA: [(usize, f64); 4] = [
    (3, 1.495585217958292e-2),
    (5, 2.539_398_330_063_23e-1),
    (7, 9.504178996162932e-1),
    (9, 2.097847961257068e0),
];
const THETA13: f64 = 5.371920351148152e0;

fn norm1(m: &Matrix) -> f64 {
    m.column_iter()
        .map(|c| c.iter().map(|x| x.abs()).sum::<f64>())
        .fold(0.0, f64::max)
}

fn pade_low(a: &Matrix, b: &[f64]) -> (Matrix, Matrix) {
    let n = a.nrows();
    let id = Matrix::identity(n, n);
    let a2 = a * a;
    let mut u = &id * b[1];
    let mut v = &id * b[0];
    let mut pow = id.clone();
    for k in 1..b.len() / 2 {
        pow = &pow * &a2;
        u += &pow * b[2 * k + 1];
        v += &pow * b[2 * k];
    }
    (a * u, v)
}

fn pade13(a: &Matrix) -> (Matrix, Matrix) {
    let n = a.nrows();
    let b = &B13;
    let id = Matrix::identity(n, n);
    let a2 = a * a;
    let a4 = &a2 * &a2;
    let a6 = &a4 * &a2;
    let u_inner = &a6 * b[13] + &a4 * b[11] + &a2 * b[9];
    let u = a * (&a6 * u_inner + &a6 * b[7] + &a4 * b[5] + &a2 * b[3] + &id * b[1]);
    let v_inner = &a6 * b[12] + &a4 * b[10] + &a2 * b[8];
    let v = &a6 * v_inner + &a6 * b[6] + &a4 * b[4] + &a2 * b[2] + &id * b[0];
    (u, v)
}

fn rational(u: Matrix, v: Matrix) -> Matrix {
    let p = &v + &u;
    let q = &v - &u;
    // q is well conditioned for the chosen degree/norm pairs
    q.lu()
        .solve(&p)
        .expect("Padé denominator is nonsingular within the theta bounds")
}

/// `e^A` for a square matrix with finite entries.
pub fn expm(a: &Matrix) -> Result<Matrix> {
    check_square(a, "A")?;
    check_finite(a)?;
    let n = a.nrows();
    if n == 0 {
        return Ok(Matrix::zeros(0, 0));
    }
    let nrm = norm1(a);
    if nrm == 0.0 {
        return Ok(Matrix::identity(n, n));
    }
    for &(m, theta) in THETA.iter() {
        if nrm <= theta {
            let b: &[f64] = match m {
                3 => &B3,
                5 => &B5,
                7 => &B7,
                _ => &B9,
            };
            let (u, v) = pade_low(a, b);
            return Ok(rational(u, v));
        }
    }
    let s = ((nrm / THETA13).log2().ceil()).max(0.0) as i32;
    let scaled = a * 2f64.powi(-s);
    let (u, v) = pade13(&scaled);
    let mut r = rational(u, v);
    for _ in 0..s {
        r = &r * &r;
    }
    Ok(r)
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_abs_diff_eq;

    #[test]
    fn zero_gives_identity() {
        let e = expm(&Matrix::zeros(3, 3)).unwrap();
        assert_eq!(e, Matrix::identity(3, 3));
    }

    #[test]
    fn nilpotent_series_terminates() {
        let a = Matrix::from_row_slice(2, 2, &[0.0, 1.0, 0.0, 0.0]);
        let e = expm(&a).unwrap();
        let want = Matrix::from_row_slice(2, 2, &[1.0, 1.0, 0.0, 1.0]);
        assert!((e - want).norm() < 1e-14);
    }

    #[test]
    fn log_two_diagonal() {
        let a = Matrix::identity(3, 3) * std::f64::consts::LN_2;
        let e = expm(&a).unwrap();
        for i in 0..3 {
            assert_abs_diff_eq!(e[(i, i)], 2.0, epsilon = 1e-12);
        }
    }

    #[test]
    fn large_norm_uses_squaring() {
        // rotation generator: exp([[0,-w],[w,0]]) = [[cos w, -sin w],[sin w, cos w]]
        let w = 40.0_f64;
        let a = Matrix::from_row_slice(2, 2, &[0.0, -w, w, 0.0]);
        let e = expm(&a).unwrap();
        assert_abs_diff_eq!(e[(0, 0)], w.cos(), epsilon = 1e-11);
        assert_abs_diff_eq!(e[(1, 0)], w.sin(), epsilon = 1e-11);
    }

    #[test]
    fn every_pade_degree_matches_taylor() {
        let base = Matrix::from_row_slice(3, 3, &[0.1, -0.3, 0.2, 0.05, -0.2, 0.4, -0.3, 0.1, 0.0]);
        for scale in [0.01, 0.3, 1.0, 2.0, 5.0, 12.0] {
            let a = &base * scale;
            // Taylor with scaling and squaring as an independent route
            let s = 10;
            let small = &a / 2f64.powi(s);
            let mut term = Matrix::identity(3, 3);
            let mut sum = term.clone();
            for k in 1..30 {
                term = &term * &small / k as f64;
                sum += &term;
            }
            for _ in 0..s {
                sum = &sum * &sum;
            }
            let e = expm(&a).unwrap();
            assert!((&e - &sum).norm() <= 1e-12 * sum.norm(), "scale {scale}");
        }
    }
}
