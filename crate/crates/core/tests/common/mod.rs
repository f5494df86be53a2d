//! Helpers shared by the integration and acceptance targets.
#![allow(dead_code)]

use rand::{Rng, SeedableRng};
use rand_distr::StandardNormal;
use rand_pcg::Pcg64;
use socpos::certify::{certify_soc, Certificate, CertifyOptions, CertifyOutcome, FalsifyOptions};
use socpos::corpus::{generate, CorpusConfig, CorpusEntry, SystemClass};
use socpos::lti::StateSpace;
use socpos::numkernel::{expm, lyapunov_residual, real_schur_dominant, solve_lyapunov, sym_eig};
use socpos::{Domain, Matrix};

pub type Check = Result<(), String>;

pub fn rng(seed: u64) -> Pcg64 {
    Pcg64::seed_from_u64(seed)
}

pub fn gaussian(rng: &mut Pcg64, r: usize, c: usize) -> Matrix {
    Matrix::from_fn(r, c, |_, _| rng.sample(StandardNormal))
}

pub fn random_symmetric(rng: &mut Pcg64, n: usize) -> Matrix {
    let g = gaussian(rng, n, n);
    (&g + g.transpose()) * 0.5
}

/// Gaussian matrix shifted so its spectral abscissa is at most `-margin`.
pub fn random_hurwitz(rng: &mut Pcg64, n: usize, margin: f64) -> Matrix {
    let a = gaussian(rng, n, n);
    let alpha = socpos::numkernel::eigenvalues(&a)
        .unwrap()
        .iter()
        .map(|z| z.re)
        .fold(f64::NEG_INFINITY, f64::max);
    a - Matrix::identity(n, n) * (alpha + margin)
}

/// Gaussian matrix scaled to spectral radius `rho`.
pub fn random_schur_stable(rng: &mut Pcg64, n: usize, rho: f64) -> Matrix {
    let a = gaussian(rng, n, n);
    let r = socpos::numkernel::eigenvalues(&a)
        .unwrap()
        .iter()
        .map(|z| z.norm())
        .fold(0.0, f64::max);
    a * (rho / r)
}

/// Eigen-decomposition reconstructs `m` and the eigenvectors are orthonormal.
pub fn check_sym_eig(m: &Matrix) -> Check {
    let n = m.nrows();
    let e = sym_eig(m).map_err(|e| e.to_string())?;
    let scale = m.norm().max(1e-12);
    let recon = &e.vectors * Matrix::from_diagonal(&e.values) * e.vectors.transpose();
    let err = (recon - m).norm();
    if err > 1e-8 * scale {
        return Err(format!("reconstruction error {err:.3e} (scale {scale:.3e})"));
    }
    let orth = (e.vectors.transpose() * &e.vectors - Matrix::identity(n, n)).norm();
    if orth > 1e-10 * n as f64 {
        return Err(format!("orthogonality defect {orth:.3e}"));
    }
    if e.values.as_slice().windows(2).any(|w| w[1] < w[0]) {
        return Err("eigenvalues not ascending".into());
    }
    Ok(())
}

/// `T S Tᵀ = A`, `T` orthogonal, and the leading block carries the dominant key.
pub fn check_schur(a: &Matrix, domain: Domain) -> Check {
    let n = a.nrows();
    let sd = real_schur_dominant(a, domain.ordering()).map_err(|e| e.to_string())?;
    let scale = a.norm().max(1e-12);
    let err = (&sd.t * &sd.s * sd.t.transpose() - a).norm();
    if err > 1e-7 * scale {
        return Err(format!("similarity error {err:.3e} (scale {scale:.3e})"));
    }
    let orth = (sd.t.transpose() * &sd.t - Matrix::identity(n, n)).norm();
    if orth > 1e-10 * n as f64 {
        return Err(format!("T not orthogonal ({orth:.3e})"));
    }
    for j in 0..n {
        for i in j + 2..n {
            if sd.s[(i, j)].abs() > 1e-10 * scale {
                return Err(format!("S({i},{j}) = {:.3e} below the subdiagonal", sd.s[(i, j)]));
            }
        }
    }
    let key = |z: num_complex::Complex64| match domain {
        Domain::Continuous => z.re,
        Domain::Discrete => z.norm(),
    };
    let best = sd.eigenvalues.iter().map(|z| key(*z)).fold(f64::NEG_INFINITY, f64::max);
    let lead = sd.eigenvalues[0];
    if key(lead) < best - 1e-9 * scale {
        return Err(format!("leading eigenvalue {lead} is not dominant"));
    }
    Ok(())
}

/// `expm(A)·expm(−A) = I`.
pub fn check_expm_group(a: &Matrix) -> Check {
    let n = a.nrows();
    let e = expm(a).map_err(|e| e.to_string())?;
    let f = expm(&(-a)).map_err(|e| e.to_string())?;
    let err = (&e * &f - Matrix::identity(n, n)).amax();
    if err > 1e-9 {
        return Err(format!("expm(A)expm(-A) - I = {err:.3e}"));
    }
    Ok(())
}

/// Residual bound `‖res‖ ≤ 1e-8 (‖A‖‖X‖ + ‖Q‖)` and symmetry of `X`.
pub fn check_lyapunov(a: &Matrix, q: &Matrix, domain: Domain) -> Check {
    let x = solve_lyapunov(a, q, domain).map_err(|e| e.to_string())?;
    let res = lyapunov_residual(a, q, &x, domain).norm();
    let bound = 1e-8 * (a.norm() * x.norm() + q.norm());
    if res > bound {
        return Err(format!("residual {res:.3e} above {bound:.3e}"));
    }
    if (&x - x.transpose()).norm() > 1e-10 * x.norm().max(1.0) {
        return Err("solution not symmetric".into());
    }
    Ok(())
}

/// Falsifier settings for a `1e-6·peak` tolerance.
pub fn falsify_at_peak_tol() -> FalsifyOptions {
    FalsifyOptions {
        refute_tol: 0.0,
        refute_rel: 1e-6,
        ..FalsifyOptions::default()
    }
}

/// First `count` certified entries of a corpus, with their certificates.
pub fn certified_systems(cfg: &CorpusConfig, count: usize) -> Vec<(CorpusEntry, Certificate)> {
    let opts = CertifyOptions::default();
    let mut out = Vec::with_capacity(count);
    for e in generate(cfg).expect("corpus") {
        if out.len() == count {
            break;
        }
        if let CertifyOutcome::Certified(c) = certify_soc(&e.system, &opts) {
            out.push((e, *c));
        }
    }
    out
}

/// Config for a supply of certified systems (cone-invariant and Metzler).
pub fn certified_supply(seed: u64, count: usize, min_order: usize, max_order: usize) -> CorpusConfig {
    CorpusConfig {
        count,
        min_order,
        max_order,
        seed,
        classes: vec![SystemClass::ConeInvariant, SystemClass::Metzler],
        ..CorpusConfig::default()
    }
}

pub fn two_state() -> StateSpace {
    StateSpace::siso(&[-2.0, 1.0, 1.0, -2.0], &[1.0, 0.0], &[0.0, 1.0], 0.0, Domain::Continuous).unwrap()
}

pub fn oscillatory() -> StateSpace {
    StateSpace::siso(&[-1.0, -2.0, 2.0, -1.0], &[1.0, 0.0], &[1.0, 0.0], 0.0, Domain::Continuous).unwrap()
}

pub fn double_integrator() -> StateSpace {
    StateSpace::siso(&[0.0, 1.0, 0.0, 0.0], &[0.0, 1.0], &[1.0, 0.0], 0.0, Domain::Continuous).unwrap()
}
