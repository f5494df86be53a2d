//! Real Schur form with the dominant eigenvalue block moved to the top.

use nalgebra::Complex;

use super::{check_finite, check_square, complete_orthonormal_basis, Matrix, Vector, ABS_FLOOR};
use crate::error::{Error, Result};

type CMatrix = nalgebra::DMatrix<Complex<f64>>;
type CVector = nalgebra::DVector<Complex<f64>>;

const SCHUR_EPS: f64 = 1e-15;
const SCHUR_MAX_ITER: usize = 10_000;
/// Relative diagonal shifts tried when the unshifted iteration stalls.
const EXCEPTIONAL_SHIFTS: [f64; 3] = [0.7316, -0.4187, 1.9631];

/// Ordering key used to decide which eigenvalue dominates.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Ordering {
    /// Largest real part (continuous time).
    RealPart,
    /// Largest modulus (discrete time).
    Modulus,
}

impl Ordering {
    pub fn key(self, z: Complex<f64>) -> f64 {
        match self {
            Ordering::RealPart => z.re,
            Ordering::Modulus => z.norm(),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub enum DominantBlock {
    Real(f64),
    ComplexPair { re: f64, im: f64 },
}

impl DominantBlock {
    pub fn size(&self) -> usize {
        match self {
            DominantBlock::Real(_) => 1,
            DominantBlock::ComplexPair { .. } => 2,
        }
    }
}

/// `A = T·S·Tᵀ` with `T` orthogonal and the dominant block leading `S`.
#[derive(Debug, Clone)]
pub struct SchurDominant {
    pub t: Matrix,
    pub s: Matrix,
    pub dominant: DominantBlock,
    /// Dominance margin to the next eigenvalue in the ordering key (`inf` for n = 1).
    pub gap: f64,
    /// All eigenvalues, dominant block first.
    pub eigenvalues: Vec<Complex<f64>>,
}

fn schur_parts(a: &Matrix) -> Result<(Matrix, Matrix, Vec<Complex<f64>>)> {
    let n = a.nrows();
    if n == 0 {
        return Ok((Matrix::zeros(0, 0), Matrix::zeros(0, 0), Vec::new()));
    }
    if let Some(schur) = nalgebra::Schur::try_new(a.clone(), SCHUR_EPS, SCHUR_MAX_ITER) {
        let eigs = schur.complex_eigenvalues().iter().copied().collect();
        let (q, t) = schur.unpack();
        return Ok((q, t, eigs));
    }
    // Exceptional shifts: the Francis iteration can stall on exactly
    // structured input (a nilpotent shift matrix, say). Qᵀ(A + σI)Q = S + σI
    // keeps the Schur vectors, so factor a shifted copy and undo the shift.
    let scale = a.norm().max(ABS_FLOOR);
    for sigma in EXCEPTIONAL_SHIFTS.iter().map(|f| f * scale) {
        let shifted = a + Matrix::identity(n, n) * sigma;
        if let Some(schur) = nalgebra::Schur::try_new(shifted, SCHUR_EPS, SCHUR_MAX_ITER) {
            let eigs = schur.complex_eigenvalues().iter().map(|z| z - sigma).collect();
            let (q, mut t) = schur.unpack();
            for i in 0..n {
                t[(i, i)] -= sigma;
            }
            return Ok((q, t, eigs));
        }
    }
    Err(Error::ConvergenceFailure)
}

/// Eigenvalues of a general real matrix.
pub fn eigenvalues(a: &Matrix) -> Result<Vec<Complex<f64>>> {
    check_square(a, "A")?;
    check_finite(a)?;
    Ok(schur_parts(a)?.2)
}

fn start_vector(n: usize) -> Vector {
    Vector::from_iterator(n, (0..n).map(|i| 1.0 + 0.37 * ((i as f64 + 1.0) * 1.7).sin()))
}

fn real_eigenvector(a: &Matrix, lambda: f64, scale: f64) -> Result<Vector> {
    let n = a.nrows();
    let mut shift = 1e-10 * scale;
    for _ in 0..6 {
        let m = a - Matrix::identity(n, n) * (lambda + shift);
        let lu = m.lu();
        let mut x = start_vector(n);
        x /= x.norm();
        let mut ok = true;
        for _ in 0..4 {
            match lu.solve(&x) {
                Some(y) if y.iter().all(|v| v.is_finite()) && y.norm() > 0.0 => {
                    x = &y / y.norm();
                }
                _ => {
                    ok = false;
                    break;
                }
            }
        }
        if ok {
            return Ok(x);
        }
        shift *= 10.0;
    }
    Err(Error::NumericalBreakdown(
        "inverse iteration for dominant eigenvector failed".into(),
    ))
}

fn complex_invariant_pair(a: &Matrix, lambda: Complex<f64>, scale: f64) -> Result<Matrix> {
    let n = a.nrows();
    let ac: CMatrix = a.map(|v| Complex::new(v, 0.0));
    let mut shift = 1e-10 * scale;
    for _ in 0..6 {
        let mu = lambda + Complex::new(shift, shift);
        let m = &ac - CMatrix::identity(n, n) * mu;
        let lu = m.lu();
        let s = start_vector(n);
        let mut x = CVector::from_iterator(n, s.iter().enumerate().map(|(i, v)| {
            Complex::new(*v, 0.21 * (i as f64 + 0.5).cos())
        }));
        x /= Complex::new(x.norm(), 0.0);
        let mut ok = true;
        for _ in 0..4 {
            match lu.solve(&x) {
                Some(y) if y.iter().all(|v| v.re.is_finite() && v.im.is_finite()) => {
                    let nrm = y.norm();
                    if nrm <= 0.0 {
                        ok = false;
                        break;
                    }
                    x = y / Complex::new(nrm, 0.0);
                }
                _ => {
                    ok = false;
                    break;
                }
            }
        }
        if ok {
            let mut basis = Matrix::zeros(n, 2);
            for i in 0..n {
                basis[(i, 0)] = x[i].re;
                basis[(i, 1)] = x[i].im;
            }
            return Ok(basis);
        }
        shift *= 10.0;
    }
    Err(Error::NumericalBreakdown(
        "inverse iteration for dominant invariant pair failed".into(),
    ))
}

/// Real Schur form with the dominant eigenvalue (or complex pair) in the leading block.
pub fn real_schur_dominant(a: &Matrix, ordering: Ordering) -> Result<SchurDominant> {
    check_square(a, "A")?;
    check_finite(a)?;
    let n = a.nrows();
    if n == 0 {
        return Err(Error::Precondition("empty matrix has no dominant eigenvalue".into()));
    }
    if n == 1 {
        return Ok(SchurDominant {
            t: Matrix::identity(1, 1),
            s: a.clone(),
            dominant: DominantBlock::Real(a[(0, 0)]),
            gap: f64::INFINITY,
            eigenvalues: vec![Complex::new(a[(0, 0)], 0.0)],
        });
    }

    let (_, _, eigs) = schur_parts(a)?;
    let scale = a.norm().max(ABS_FLOOR);
    let imag_tol = 1e-12 * scale;
    let key_tol = 1e-14 * scale;

    // dominant candidate: largest key; a real eigenvalue wins ties
    let mut best = 0usize;
    for (i, z) in eigs.iter().enumerate() {
        let kz = ordering.key(*z);
        let kb = ordering.key(eigs[best]);
        let z_real = z.im.abs() <= imag_tol;
        let b_real = eigs[best].im.abs() <= imag_tol;
        if kz > kb + key_tol
            || ((kz - kb).abs() <= key_tol && z_real && !b_real)
            || ((kz - kb).abs() <= key_tol && z_real == b_real && z.im > eigs[best].im)
        {
            best = i;
        }
    }
    let dom = eigs[best];
    let dominant = if dom.im.abs() <= imag_tol {
        DominantBlock::Real(dom.re)
    } else {
        DominantBlock::ComplexPair {
            re: dom.re,
            im: dom.im.abs(),
        }
    };

    // remaining eigenvalues (drop the conjugate partner of a complex pair)
    let mut rest: Vec<Complex<f64>> = eigs.clone();
    rest.remove(best);
    if let DominantBlock::ComplexPair { .. } = dominant {
        let conj = dom.conj();
        if let Some(j) = rest
            .iter()
            .enumerate()
            .min_by(|x, y| (x.1 - conj).norm().total_cmp(&(y.1 - conj).norm()))
            .map(|(j, _)| j)
        {
            rest.remove(j);
        }
    }
    let key_dom = ordering.key(dom);
    let gap = rest
        .iter()
        .map(|z| key_dom - ordering.key(*z))
        .fold(f64::INFINITY, f64::min);

    let basis = match dominant {
        DominantBlock::Real(l) => {
            let v = real_eigenvector(a, l, scale)?;
            Matrix::from_column_slice(n, 1, v.as_slice())
        }
        DominantBlock::ComplexPair { re, im } => {
            complex_invariant_pair(a, Complex::new(re, im), scale)?
        }
    };
    let k = dominant.size();
    let q0 = complete_orthonormal_basis(&basis);
    let s0 = q0.transpose() * a * &q0;

    let m = n - k;
    let mut t = q0.clone();
    let mut s = Matrix::zeros(n, n);
    s.view_mut((0, 0), (k, k)).copy_from(&s0.view((0, 0), (k, k)));
    let mut eigenvalues = match dominant {
        DominantBlock::Real(l) => vec![Complex::new(l, 0.0)],
        DominantBlock::ComplexPair { re, im } => vec![Complex::new(re, im), Complex::new(re, -im)],
    };
    if m > 0 {
        let trailing = s0.view((k, k), (m, m)).into_owned();
        let (q2, t2, e2) = schur_parts(&trailing)?;
        let top = s0.view((0, k), (k, m)) * &q2;
        s.view_mut((0, k), (k, m)).copy_from(&top);
        s.view_mut((k, k), (m, m)).copy_from(&t2);
        let tail = q0.columns(k, m) * &q2;
        t.columns_mut(k, m).copy_from(&tail);
        eigenvalues.extend(e2);
    }

    // leading block value is the Rayleigh quotient of the reordered basis
    let dominant = match dominant {
        DominantBlock::Real(_) => DominantBlock::Real(s[(0, 0)]),
        pair => pair,
    };
    eigenvalues[0] = match dominant {
        DominantBlock::Real(l) => Complex::new(l, 0.0),
        _ => eigenvalues[0],
    };

    Ok(SchurDominant {
        t,
        s,
        dominant,
        gap,
        eigenvalues,
    })
}
