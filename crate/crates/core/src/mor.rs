//! Generalized balanced truncation that keeps the cone certificate.
//!
//! The dominant mode is never truncated. On the deflated block, the
//! certificate matrix `P1` (minimum trace over all certificates) and a
//! controllability-side Gramian `Q1` are balanced against each other, and
//! the trailing balanced states are dropped. With `P1` diagonal in balanced
//! coordinates, every certificate condition of the truncated system is a
//! principal submatrix (or a lower bound) of the full one.

use nalgebra::DMatrix;
use num_complex::Complex64;

use crate::certify::{assemble, certificate_sdp, verify_certificate, Certificate, CertifyOptions};
use crate::error::{Error, Result};
use crate::lti::{dominant_decomposition, DominantDecomposition, DominantOutcome, StateSpace};
use crate::numkernel::{eigenvalues, min_eigenvalue, solve_lyapunov, sym_eig, symmetrize, Domain, Matrix, Vector, ABS_FLOOR};
use crate::sdp::{self, AffineMat, SdpOptions, SdpStatus};

/// Hankel values below this fraction of the largest cannot be kept.
const HANKEL_FLOOR: f64 = 1e-12;
/// Frequency samples of the error estimate.
pub const ERROR_GRID: usize = 400;

#[derive(Debug, Clone, Default)]
pub struct MorOptions {
    pub certify: CertifyOptions,
    pub sdp: SdpOptions,
}

/// Generalized Gramians of the deflated block.
#[derive(Debug, Clone)]
pub struct Gramians {
    /// Minimum-trace certificate matrix.
    pub p1: Matrix,
    /// Controllability-side Gramian.
    pub q1: Matrix,
    /// False when the minimum-trace solve failed and the input certificate's
    /// own `P1` was used.
    pub p1_min_trace: bool,
}

/// Balancing data: full-order balanced coordinates are
/// `ξ = blkdiag(1, S⁻¹)·T⁻¹·x`.
#[derive(Debug, Clone)]
pub struct Balancing {
    pub t: Matrix,
    pub t_inv: Matrix,
    pub s: Matrix,
    pub s_inv: Matrix,
}

#[derive(Debug, Clone)]
pub struct ReducedResult {
    pub system: StateSpace,
    pub certificate: Certificate,
    /// Kept balanced coordinates; 0 is the dominant state.
    pub kept_indices: Vec<usize>,
    /// Nonincreasing diagonal of the balanced `P1` and `Q1`.
    pub generalized_hankel_values: Vec<f64>,
    pub error_estimate: f64,
    pub transforms: Balancing,
}

fn mor_failed(what: impl Into<String>) -> Error {
    Error::MorFailed(what.into())
}

/// Minimum-trace certificate matrix and the controllability-side Gramian.
///
/// `Q1` is the solution of `A2·Q1 + Q1·A2ᵀ + B2·B2ᵀ = 0` (discrete
/// `A2·Q1·A2ᵀ − Q1 + B2·B2ᵀ = 0`), the least element of every matrix
/// satisfying the inequality form, plus `ε·I` with
/// `ε = 1e−10·trace(P1)/(n−1)` so it stays positive definite. Unstable
/// deflated blocks are shifted (continuous) or scaled (discrete) into the
/// stable region first.
pub fn generalized_gramians(sys: &StateSpace, cert: &Certificate, opts: &MorOptions) -> Result<Gramians> {
    let dec = &cert.decomposition;
    let d = dec.a2.nrows();
    if sys.order() != dec.order() {
        return Err(Error::ShapeMismatch(format!(
            "certificate for order {} applied to order {}",
            dec.order(),
            sys.order()
        )));
    }
    if d == 0 {
        return Ok(Gramians {
            p1: Matrix::zeros(0, 0),
            q1: Matrix::zeros(0, 0),
            p1_min_trace: true,
        });
    }
    let (p1, p1_min_trace) = match min_trace_p1(sys, cert, opts)? {
        Some(p) => (p, true),
        None => (symmetrize(&cert.p1), false),
    };

    let a2 = stabilized(&dec.a2, dec.domain)?;
    let q = &dec.b2 * dec.b2.transpose();
    // solve_lyapunov solves AᵀX + XA + Q = 0, so pass A2ᵀ
    let q1 = symmetrize(&solve_lyapunov(&a2.transpose(), &q, dec.domain)?);
    let eps = 1e-10 * p1.trace().max(ABS_FLOOR) / d as f64;
    let q1 = q1 + Matrix::identity(d, d) * eps;
    if min_eigenvalue(&q1)? <= 0.0 {
        return Err(mor_failed("controllability Gramian is not positive definite"));
    }
    Ok(Gramians { p1, q1, p1_min_trace })
}

fn stabilized(a2: &Matrix, domain: Domain) -> Result<Matrix> {
    let eig = eigenvalues(a2)?;
    let d = a2.nrows();
    Ok(match domain {
        Domain::Continuous => {
            let alpha = eig.iter().map(|z| z.re).fold(f64::NEG_INFINITY, f64::max);
            if alpha < 0.0 {
                a2.clone()
            } else {
                a2 - Matrix::identity(d, d) * (alpha + 0.1 * a2.norm().max(1.0))
            }
        }
        Domain::Discrete => {
            let rho = eig.iter().map(|z| z.norm()).fold(0.0, f64::max);
            if rho < 1.0 {
                a2.clone()
            } else {
                a2 / (1.1 * rho)
            }
        }
    })
}

/// `min trace(P1)` over the certificate conditions with `P1 ⪰ μ·I`, where
/// `μ = 1e−3·λmin` of the input certificate (so that certificate is
/// feasible). `None` if the solve or the re-verification fails.
fn min_trace_p1(sys: &StateSpace, cert: &Certificate, opts: &MorOptions) -> Result<Option<Matrix>> {
    let dec = &cert.decomposition;
    let d = dec.a2.nrows();
    let lmin = min_eigenvalue(&symmetrize(&cert.p1))?;
    if lmin <= 0.0 {
        return Ok(None);
    }
    let mut cs = certificate_sdp(dec);
    let p1e = AffineMat::sym(&cs.p1);
    let mu = 1e-3 * lmin;
    cs.problem
        .add_lmi("P1_floor", p1e.add_constant(&(-Matrix::identity(d, d) * mu)).scale(1.0 / mu));
    let mut c = Vector::zeros(cs.problem.num_vars());
    for i in 0..d {
        c[cs.p1.index(i, i)] = 1.0 / cert.p1.trace().max(ABS_FLOOR);
    }
    cs.problem.set_objective(c);
    let sol = match sdp::solve(&cs.problem, &opts.sdp) {
        Ok(s) => s,
        Err(_) => return Ok(None),
    };
    if sol.status != SdpStatus::Feasible {
        return Ok(None);
    }
    let p1 = symmetrize(&cs.p1.value(&sol.x));
    let trial = Certificate {
        p1: p1.clone(),
        cone: match crate::cone::EllipsoidalCone::from_deflated(1.0, &p1, &dec.t) {
            Ok(c) => c,
            Err(_) => return Ok(None),
        },
        ..cert.clone()
    };
    let report = verify_certificate(sys, &trial, opts.certify.verify_tol)?;
    Ok(report.passed.then_some(p1))
}

/// Contragredient balancing `SᵀP1S = S⁻¹Q1S⁻ᵀ = Σ`: with `Q1 = LLᵀ` and
/// `LᵀP1L = UΣ²Uᵀ`, `S = LUΣ^{−1/2}`.
pub fn contragredient(p1: &Matrix, q1: &Matrix) -> Result<(Matrix, Matrix, Vec<f64>)> {
    let d = p1.nrows();
    let chol = nalgebra::Cholesky::new(symmetrize(q1)).ok_or_else(|| mor_failed("Q1 is not positive definite"))?;
    let l = chol.l();
    let m = symmetrize(&(l.transpose() * p1 * &l));
    let eig = sym_eig(&m)?;
    // descending
    let order: Vec<usize> = (0..d).rev().collect();
    let sigma: Vec<f64> = order.iter().map(|&i| eig.values[i].max(0.0).sqrt()).collect();
    let smax = sigma.first().copied().unwrap_or(0.0);
    if smax <= 0.0 || sigma.iter().any(|s| *s <= 0.0) {
        return Err(mor_failed("a generalized Hankel value is zero; balancing is undefined"));
    }
    let mut u = Matrix::zeros(d, d);
    for (dst, &src) in order.iter().enumerate() {
        u.set_column(dst, &eig.vectors.column(src));
    }
    let root = Matrix::from_diagonal(&Vector::from_iterator(d, sigma.iter().map(|s| 1.0 / s.sqrt())));
    let root_inv = Matrix::from_diagonal(&Vector::from_iterator(d, sigma.iter().map(|s| s.sqrt())));
    let s = &l * &u * root;
    let l_inv = l
        .clone()
        .solve_lower_triangular(&Matrix::identity(d, d))
        .ok_or_else(|| mor_failed("Cholesky factor is singular"))?;
    let s_inv = root_inv * u.transpose() * l_inv;
    Ok((s, s_inv, sigma))
}

/// Reduces to order `r` (the dominant state plus `r − 1` balanced states).
pub fn balance_and_truncate(sys: &StateSpace, cert: &Certificate, r: usize, opts: &MorOptions) -> Result<ReducedResult> {
    let n = sys.order();
    if r < 1 || r > n {
        return Err(Error::Precondition(format!("reduced order {r} outside 1..={n}")));
    }
    let dec = &cert.decomposition;
    let d = n - 1;
    let gram = generalized_gramians(sys, cert, opts)?;
    let (s, s_inv, sigma) = if d == 0 {
        (Matrix::zeros(0, 0), Matrix::zeros(0, 0), Vec::new())
    } else {
        contragredient(&gram.p1, &gram.q1)?
    };
    let transforms = Balancing {
        t: dec.t.clone(),
        t_inv: dec.t_inv.clone(),
        s: s.clone(),
        s_inv: s_inv.clone(),
    };
    if r == n {
        return Ok(ReducedResult {
            system: sys.clone(),
            certificate: cert.clone(),
            kept_indices: (0..n).collect(),
            generalized_hankel_values: sigma,
            error_estimate: 0.0,
            transforms,
        });
    }
    let r2 = r - 1;
    if let (Some(&top), Some(&last)) = (sigma.first(), sigma.get(r2.wrapping_sub(1))) {
        if r2 > 0 && last < HANKEL_FLOOR * top {
            return Err(mor_failed(format!(
                "Hankel value {last:.3e} below {HANKEL_FLOOR:e} of the largest must be kept"
            )));
        }
    }

    let a2 = &s_inv * &dec.a2 * &s;
    let b2 = &s_inv * &dec.b2;
    let c2 = &dec.c2 * &s;
    let (m, p) = (sys.inputs(), sys.outputs());
    let mut ar = Matrix::zeros(r, r);
    ar[(0, 0)] = dec.lambda1;
    ar.view_mut((1, 1), (r2, r2)).copy_from(&a2.view((0, 0), (r2, r2)));
    let mut br = Matrix::zeros(r, m);
    br.row_mut(0).copy_from(&dec.b0.transpose());
    br.view_mut((1, 0), (r2, m)).copy_from(&b2.view((0, 0), (r2, m)));
    let mut cr = Matrix::zeros(p, r);
    cr.column_mut(0).copy_from(&dec.c0);
    cr.view_mut((0, 1), (p, r2)).copy_from(&c2.view((0, 0), (p, r2)));
    let reduced = StateSpace::new(ar, br, cr, sys.d().clone(), sys.domain())?;

    let certificate = reduced_certificate(&reduced, &sigma[..r2], cert.rate, opts)?;
    let error_estimate = error_estimate(sys, &reduced)?;
    Ok(ReducedResult {
        system: reduced,
        certificate,
        kept_indices: (0..r).collect(),
        generalized_hankel_values: sigma,
        error_estimate,
        transforms,
    })
}

/// Certificate of the truncated system: in its balanced coordinates the
/// cone is `−z0² + wᵀΣ_lead·w`, mapped into the reduced system's own
/// deflated coordinates and verified from scratch.
fn reduced_certificate(reduced: &StateSpace, sigma_lead: &[f64], rate: f64, opts: &MorOptions) -> Result<Certificate> {
    let r = reduced.order();
    let dec: DominantDecomposition = match dominant_decomposition(reduced)? {
        DominantOutcome::Simple(d) => d,
        DominantOutcome::NotSimpleReal(why) => {
            return Err(mor_failed(format!("reduced dominant mode is not simple real: {why:?}")))
        }
    };
    let mut form = Matrix::zeros(r, r);
    form[(0, 0)] = -1.0;
    for (i, s) in sigma_lead.iter().enumerate() {
        form[(i + 1, i + 1)] = *s;
    }
    let in_dec = dec.t.transpose() * form * &dec.t;
    let p0 = -in_dec[(0, 0)];
    if !(p0 > 0.0) {
        return Err(mor_failed("dominant direction left the cone axis"));
    }
    let p1 = symmetrize(&in_dec.view((1, 1), (r - 1, r - 1)).into_owned()) / p0;
    // the rate of the truncated block never exceeds the pinned one
    let rate = rate.min(crate::certify::pinned_rate(&dec));
    match assemble(reduced, dec, p1, rate, f64::NAN, opts.certify.verify_tol)? {
        Ok(c) => Ok(c),
        Err(why) => Err(mor_failed(format!("reduced certificate: {why}"))),
    }
}

type CMatrix = DMatrix<Complex64>;

fn to_complex(m: &Matrix) -> CMatrix {
    m.map(|v| Complex64::new(v, 0.0))
}

/// `C(zI − A)⁻¹B + D`.
pub fn transfer_at(sys: &StateSpace, z: Complex64) -> Result<CMatrix> {
    let n = sys.order();
    let d = to_complex(sys.d());
    if n == 0 {
        return Ok(d);
    }
    let lhs = CMatrix::identity(n, n) * z - to_complex(sys.a());
    let x = lhs
        .lu()
        .solve(&to_complex(sys.b()))
        .ok_or_else(|| Error::NumericalBreakdown(format!("zI − A is singular at z = {z}")))?;
    Ok(to_complex(sys.c()) * x + d)
}

/// Sample points of the error estimate, fixed by the full-order system:
/// `ERROR_GRID` log-spaced frequencies spanning two decades beyond its
/// eigenvalue moduli (continuous), or equally spaced angles on `[0, π]`
/// (discrete).
pub fn error_grid(full: &StateSpace) -> Result<Vec<Complex64>> {
    Ok(match full.domain() {
        Domain::Continuous => {
            let eig = eigenvalues(full.a())?;
            let mags: Vec<f64> = eig.iter().map(|z| z.norm()).filter(|m| *m > ABS_FLOOR).collect();
            let lo = mags.iter().copied().fold(f64::INFINITY, f64::min);
            let hi = mags.iter().copied().fold(0.0, f64::max);
            let (lo, hi) = if mags.is_empty() { (1.0, 1.0) } else { (lo, hi) };
            let (a, b) = (lo.log10().floor() - 2.0, hi.log10().ceil() + 2.0);
            (0..ERROR_GRID)
                .map(|k| {
                    let w = 10f64.powf(a + (b - a) * k as f64 / (ERROR_GRID - 1) as f64);
                    Complex64::new(0.0, w)
                })
                .collect()
        }
        Domain::Discrete => (0..ERROR_GRID)
            .map(|k| Complex64::from_polar(1.0, std::f64::consts::PI * k as f64 / (ERROR_GRID - 1) as f64))
            .collect(),
    })
}

/// Largest singular value of `G_full − G_reduced` over the error grid.
pub fn error_estimate(full: &StateSpace, reduced: &StateSpace) -> Result<f64> {
    let mut worst = 0.0_f64;
    for z in error_grid(full)? {
        let diff = transfer_at(full, z)? - transfer_at(reduced, z)?;
        let s = diff.svd(false, false).singular_values.max();
        worst = worst.max(s);
    }
    Ok(worst)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::certify::{certify_soc, falsify_by_sampling, CertifyOutcome, FalsifyOptions};

    // tridiag(1, −2, 1) with B = 1 and C = (1, 1/2, 1/4, 1/8); the e1 → e4ᵀ
    // chain is externally positive but has no ellipsoidal certificate
    fn chain4() -> StateSpace {
        let mut a = Matrix::zeros(4, 4);
        for i in 0..4 {
            a[(i, i)] = -2.0;
            if i + 1 < 4 {
                a[(i, i + 1)] = 1.0;
                a[(i + 1, i)] = 1.0;
            }
        }
        let b = Matrix::from_element(4, 1, 1.0);
        let c = Matrix::from_row_slice(1, 4, &[1.0, 0.5, 0.25, 0.125]);
        StateSpace::new(a, b, c, Matrix::zeros(1, 1), Domain::Continuous).unwrap()
    }

    fn certified(sys: &StateSpace) -> Certificate {
        match certify_soc(sys, &CertifyOptions::default()) {
            CertifyOutcome::Certified(c) => *c,
            other => panic!("expected a certificate, got {}", other.label()),
        }
    }

    #[test]
    fn scalar_lyapunov_gramian() {
        // A2 = −3, B2 = β: Q1 = β²/6 (+ε)
        let beta: f64 = 0.7;
        let q = solve_lyapunov(&Matrix::from_element(1, 1, -3.0), &Matrix::from_element(1, 1, beta * beta), Domain::Continuous)
            .unwrap();
        assert!((q[(0, 0)] - beta * beta / 6.0).abs() < 1e-14);
    }

    #[test]
    fn chain_reduces_with_certificate() {
        let sys = chain4();
        let cert = certified(&sys);
        let opts = MorOptions::default();
        let mut last = f64::INFINITY;
        for r in 1..=4 {
            let red = balance_and_truncate(&sys, &cert, r, &opts).unwrap();
            assert_eq!(red.system.order(), r);
            assert!(certify_soc(&red.system, &CertifyOptions::default()).is_certified(), "r = {r}");
            assert!(falsify_by_sampling(&red.system, &FalsifyOptions::default()).is_none());
            let worst = red.certificate.residuals.iter().map(|(_, v)| *v).fold(f64::INFINITY, f64::min);
            assert!(worst >= -1e-7, "r = {r}: {worst:e}");
            assert!(red.generalized_hankel_values.windows(2).all(|w| w[0] >= w[1]));
            assert!(red.error_estimate <= last + 1e-9, "r = {r}");
            last = red.error_estimate;
        }
        assert!(last <= 1e-10);
    }

    #[test]
    fn order_one_keeps_dominant_residue() {
        let sys = chain4();
        let cert = certified(&sys);
        let red = balance_and_truncate(&sys, &cert, 1, &MorOptions::default()).unwrap();
        let dec = &cert.decomposition;
        assert!((red.system.a()[(0, 0)] - dec.lambda1).abs() < 1e-12);
        let cb = (red.system.c() * red.system.b())[(0, 0)];
        assert!((cb - dec.c0[0] * dec.b0[0]).abs() < 1e-12 && cb > 0.0);
    }

    #[test]
    fn balancing_is_contragredient() {
        let sys = chain4();
        let cert = certified(&sys);
        let g = generalized_gramians(&sys, &cert, &MorOptions::default()).unwrap();
        assert!(g.p1_min_trace);
        assert!(g.p1.trace() <= cert.p1.trace() * (1.0 + 1e-9));
        let (s, s_inv, sigma) = contragredient(&g.p1, &g.q1).unwrap();
        let target = Matrix::from_diagonal(&Vector::from_vec(sigma.clone()));
        let scale = sigma[0];
        assert!((s.transpose() * &g.p1 * &s - &target).norm() <= 1e-7 * scale);
        assert!((&s_inv * &g.q1 * s_inv.transpose() - &target).norm() <= 1e-7 * scale);
    }

    #[test]
    fn zero_b2_gets_regularized_gramian() {
        // B along the dominant eigenvector only
        let sys = StateSpace::new(
            Matrix::from_row_slice(2, 2, &[-1.0, 0.0, 0.0, -3.0]),
            Matrix::from_row_slice(2, 1, &[1.0, 0.0]),
            Matrix::from_row_slice(1, 2, &[1.0, 0.5]),
            Matrix::zeros(1, 1),
            Domain::Continuous,
        )
        .unwrap();
        let cert = certified(&sys);
        let g = generalized_gramians(&sys, &cert, &MorOptions::default()).unwrap();
        assert!(g.q1[(0, 0)] > 0.0 && g.q1[(0, 0)] <= 1e-9 * g.p1.trace());
        let red = balance_and_truncate(&sys, &cert, 1, &MorOptions::default()).unwrap();
        assert!(red.error_estimate <= 1e-12);
    }

    #[test]
    fn rejects_bad_order() {
        let sys = chain4();
        let cert = certified(&sys);
        assert!(matches!(
            balance_and_truncate(&sys, &cert, 0, &MorOptions::default()),
            Err(Error::Precondition(_))
        ));
    }
}
