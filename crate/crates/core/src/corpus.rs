//! Deterministic random test systems.
//!
//! All randomness flows from one `u64` seed through PCG64 (`rand_pcg::Pcg64`,
//! the 128-bit LCG `s ← s·M + I mod 2¹²⁸` with XSL-RR output), whose output
//! stream is platform independent. Each system is drawn from its own generator
//! seeded by the master stream, so entry `k` does not depend on the others.

use std::fmt;
use std::str::FromStr;

use nalgebra::QR;
use rand::{Rng, SeedableRng};
use rand_distr::StandardNormal;
use rand_pcg::Pcg64;

use crate::error::{Error, Result};
use crate::lti::{similarity_transform, StateSpace};
use crate::numkernel::{eigenvalues, inverse, sym_eig, Domain, Matrix, Vector};

pub type CorpusRng = Pcg64;

pub fn rng_from_seed(seed: u64) -> CorpusRng {
    Pcg64::seed_from_u64(seed)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum SystemClass {
    /// Internally positive: Metzler (continuous) or nonnegative (discrete) `A`.
    Metzler,
    /// Gaussian stable `A` with Gaussian `B`, `C`.
    StableGeneric,
    /// Rotation blocks, with either a complex or a real dominant mode.
    Oscillatory,
    /// A Metzler or cone-invariant system padded with unreachable or
    /// unobservable stable states.
    PaddedNonminimal,
    /// Built in deflated coordinates around a strictly feasible cone.
    ConeInvariant,
}

impl SystemClass {
    pub const ALL: [SystemClass; 5] = [
        SystemClass::Metzler,
        SystemClass::StableGeneric,
        SystemClass::Oscillatory,
        SystemClass::PaddedNonminimal,
        SystemClass::ConeInvariant,
    ];

    pub fn as_str(self) -> &'static str {
        match self {
            SystemClass::Metzler => "metzler",
            SystemClass::StableGeneric => "stable-generic",
            SystemClass::Oscillatory => "oscillatory",
            SystemClass::PaddedNonminimal => "padded-nonminimal",
            SystemClass::ConeInvariant => "cone-invariant",
        }
    }
}

impl fmt::Display for SystemClass {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for SystemClass {
    type Err = Error;
    fn from_str(s: &str) -> Result<Self> {
        SystemClass::ALL
            .into_iter()
            .find(|c| c.as_str() == s)
            .ok_or_else(|| Error::Precondition(format!("unknown system class '{s}'")))
    }
}

#[derive(Debug, Clone)]
pub struct CorpusConfig {
    pub count: usize,
    pub min_order: usize,
    pub max_order: usize,
    pub seed: u64,
    /// Classes are assigned round-robin.
    pub classes: Vec<SystemClass>,
    pub discrete_fraction: f64,
}

impl Default for CorpusConfig {
    fn default() -> Self {
        Self {
            count: 100,
            min_order: 2,
            max_order: 8,
            seed: 1,
            classes: vec![
                SystemClass::Metzler,
                SystemClass::StableGeneric,
                SystemClass::Oscillatory,
                SystemClass::PaddedNonminimal,
            ],
            discrete_fraction: 0.3,
        }
    }
}

#[derive(Debug, Clone)]
pub struct CorpusEntry {
    pub index: usize,
    pub name: String,
    pub class: SystemClass,
    /// Seed of this entry's own generator.
    pub seed: u64,
    pub system: StateSpace,
}

pub fn generate(cfg: &CorpusConfig) -> Result<Vec<CorpusEntry>> {
    if cfg.min_order == 0 || cfg.min_order > cfg.max_order {
        return Err(Error::Precondition(format!(
            "invalid order range {}..{}",
            cfg.min_order, cfg.max_order
        )));
    }
    if cfg.classes.is_empty() {
        return Err(Error::Precondition("no system classes selected".into()));
    }
    let mut master = rng_from_seed(cfg.seed);
    let mut out = Vec::with_capacity(cfg.count);
    for index in 0..cfg.count {
        let seed: u64 = master.random();
        let class = cfg.classes[index % cfg.classes.len()];
        let mut rng = rng_from_seed(seed);
        let order = rng.random_range(cfg.min_order..=cfg.max_order);
        let domain = if rng.random::<f64>() < cfg.discrete_fraction {
            Domain::Discrete
        } else {
            Domain::Continuous
        };
        let system = generate_system(&mut rng, class, order, domain)?;
        out.push(CorpusEntry {
            index,
            name: format!("sys_{index:04}"),
            class,
            seed,
            system,
        });
    }
    Ok(out)
}

fn normal(rng: &mut CorpusRng) -> f64 {
    rng.sample(StandardNormal)
}

fn gaussian(rng: &mut CorpusRng, r: usize, c: usize) -> Matrix {
    Matrix::from_fn(r, c, |_, _| normal(rng))
}

fn io_sizes(rng: &mut CorpusRng) -> (usize, usize) {
    let m = if rng.random::<f64>() < 0.2 { 2 } else { 1 };
    let p = if rng.random::<f64>() < 0.2 { 2 } else { 1 };
    (m, p)
}

fn direct_term(rng: &mut CorpusRng, p: usize, m: usize) -> Matrix {
    if rng.random::<f64>() < 0.3 {
        Matrix::from_fn(p, m, |_, _| rng.random_range(0.0..0.3))
    } else {
        Matrix::zeros(p, m)
    }
}

/// Random orthogonal matrix (QR of a Gaussian, sign-fixed).
pub fn random_orthogonal(rng: &mut CorpusRng, n: usize) -> Matrix {
    let g = gaussian(rng, n, n);
    let qr = QR::new(g);
    let mut q = qr.q();
    let r = qr.r();
    for j in 0..n {
        if r[(j, j)] < 0.0 {
            let col = -q.column(j);
            q.set_column(j, &col);
        }
    }
    q
}

/// `U·diag(s)·Vᵀ` with log-uniform singular values and condition ≤ `max_cond`.
pub fn random_similarity(rng: &mut CorpusRng, n: usize, max_cond: f64) -> Matrix {
    let u = random_orthogonal(rng, n);
    let v = random_orthogonal(rng, n);
    let span = max_cond.max(1.0).ln();
    let s = Vector::from_fn(n, |_, _| (rng.random::<f64>() * span).exp());
    let smax = s.max();
    let s = s / smax.sqrt();
    u * Matrix::from_diagonal(&s) * v.transpose()
}

fn random_pd(rng: &mut CorpusRng, d: usize, floor: f64) -> Matrix {
    let g = gaussian(rng, d, d);
    (&g * g.transpose()) / d.max(1) as f64 + Matrix::identity(d, d) * floor
}

fn sqrt_pd(m: &Matrix) -> Result<(Matrix, Matrix)> {
    let e = sym_eig(m)?;
    let s = e.values.map(|v| v.max(0.0).sqrt());
    let si = s.map(|v| 1.0 / v);
    let q = &e.vectors;
    Ok((
        q * Matrix::from_diagonal(&s) * q.transpose(),
        q * Matrix::from_diagonal(&si) * q.transpose(),
    ))
}

fn metzler(rng: &mut CorpusRng, n: usize, domain: Domain) -> Result<StateSpace> {
    let (m, p) = io_sizes(rng);
    let density = rng.random_range(0.3..0.9);
    let mut a = Matrix::from_fn(n, n, |i, j| {
        if i != j && rng.random::<f64>() < density {
            rng.random_range(0.0..1.0)
        } else {
            0.0
        }
    });
    match domain {
        Domain::Continuous => {
            for i in 0..n {
                let off: f64 = a.row(i).iter().sum();
                a[(i, i)] = -off - rng.random_range(0.1..2.0);
            }
        }
        Domain::Discrete => {
            for i in 0..n {
                a[(i, i)] = rng.random_range(0.0..1.0);
            }
            let rho = eigenvalues(&a)?.iter().map(|z| z.norm()).fold(0.0, f64::max);
            let target = rng.random_range(0.3..0.95);
            if rho > 0.0 {
                a *= target / rho;
            }
        }
    }
    let nonneg = |rng: &mut CorpusRng, r: usize, c: usize| {
        Matrix::from_fn(r, c, |_, _| {
            if rng.random::<f64>() < 0.7 {
                rng.random_range(0.0..1.0)
            } else {
                0.0
            }
        })
    };
    let mut b = nonneg(rng, n, m);
    for j in 0..m {
        if b.column(j).iter().all(|v| *v == 0.0) {
            b[(rng.random_range(0..n), j)] = rng.random_range(0.1..1.0);
        }
    }
    let mut c = nonneg(rng, p, n);
    for i in 0..p {
        if c.row(i).iter().all(|v| *v == 0.0) {
            c[(i, rng.random_range(0..n))] = rng.random_range(0.1..1.0);
        }
    }
    let d = direct_term(rng, p, m);
    StateSpace::new(a, b, c, d, domain)
}

fn stable_generic(rng: &mut CorpusRng, n: usize, domain: Domain) -> Result<StateSpace> {
    let (m, p) = io_sizes(rng);
    let g = gaussian(rng, n, n) / (n as f64).sqrt();
    let eigs = eigenvalues(&g)?;
    let a = match domain {
        Domain::Continuous => {
            let alpha = eigs.iter().map(|z| z.re).fold(f64::NEG_INFINITY, f64::max);
            &g - Matrix::identity(n, n) * (alpha + rng.random_range(0.05..1.0))
        }
        Domain::Discrete => {
            let rho = eigs.iter().map(|z| z.norm()).fold(0.0, f64::max).max(1e-9);
            &g * (rng.random_range(0.3..0.95) / rho)
        }
    };
    let b = gaussian(rng, n, m);
    let c = gaussian(rng, p, n);
    let d = direct_term(rng, p, m);
    StateSpace::new(a, b, c, d, domain)
}

fn oscillatory(rng: &mut CorpusRng, n: usize, domain: Domain) -> Result<StateSpace> {
    let (m, p) = io_sizes(rng);
    let complex_dominant = n >= 2 && rng.random::<f64>() < 0.5;
    let mut a = Matrix::zeros(n, n);
    let (lead_re, lead_mod) = match domain {
        Domain::Continuous => (-rng.random_range(0.1..1.0), 0.0),
        Domain::Discrete => (0.0, rng.random_range(0.4..0.95)),
    };
    let mut k = 0;
    let mut first = true;
    while k < n {
        let want_pair = n - k >= 2 && (if first { complex_dominant } else { rng.random::<f64>() < 0.7 });
        let is_first = first;
        first = false;
        let scale = if is_first { 1.0 } else { rng.random_range(0.2..0.9) };
        match domain {
            Domain::Continuous => {
                let sigma = if is_first { lead_re } else { lead_re - rng.random_range(0.1..2.0) };
                if want_pair {
                    let w = rng.random_range(0.5..5.0);
                    a[(k, k)] = sigma;
                    a[(k + 1, k + 1)] = sigma;
                    a[(k, k + 1)] = w;
                    a[(k + 1, k)] = -w;
                    k += 2;
                } else {
                    a[(k, k)] = sigma;
                    k += 1;
                }
            }
            Domain::Discrete => {
                let r = lead_mod * scale;
                if want_pair {
                    let th: f64 = rng.random_range(0.3..2.5);
                    a[(k, k)] = r * th.cos();
                    a[(k + 1, k + 1)] = r * th.cos();
                    a[(k, k + 1)] = -r * th.sin();
                    a[(k + 1, k)] = r * th.sin();
                    k += 2;
                } else {
                    let sign = if is_first || rng.random::<f64>() < 0.7 { 1.0 } else { -1.0 };
                    a[(k, k)] = sign * r;
                    k += 1;
                }
            }
        }
    }
    // lean towards a positive dominant residue so some instances are positive
    let mut b = gaussian(rng, n, m) * 0.5;
    let mut c = gaussian(rng, p, n) * 0.5;
    for j in 0..m {
        b[(0, j)] = b[(0, j)].abs() + 0.5;
    }
    for i in 0..p {
        c[(i, 0)] = c[(i, 0)].abs() + 0.5;
    }
    let d = direct_term(rng, p, m);
    let modal = StateSpace::new(a, b, c, d, domain)?;
    let t = random_similarity(rng, n, 1e2);
    similarity_transform(&modal, &t)
}

/// Strictly cone-invariant system built in deflated coordinates and then
/// hidden by a random similarity.
fn cone_invariant(rng: &mut CorpusRng, n: usize, domain: Domain) -> Result<StateSpace> {
    let (m, p) = io_sizes(rng);
    let d = n - 1;
    let lambda1 = match domain {
        Domain::Continuous => -rng.random_range(0.1..1.5),
        Domain::Discrete => rng.random_range(0.3..0.95),
    };
    let p1 = random_pd(rng, d, 0.2);
    let p1_inv = inverse(&p1)?;
    let a2 = match domain {
        Domain::Continuous => {
            let s = random_pd(rng, d, 0.1);
            let g = gaussian(rng, d, d);
            let k = (&g - g.transpose()) * 0.5;
            // P1·X = −S + K makes XᵀP1 + P1X = −2S
            Matrix::identity(d, d) * lambda1 + &p1_inv * (k - s)
        }
        Domain::Discrete => {
            let (h, h_inv) = sqrt_pd(&p1)?;
            let g = gaussian(rng, d, d);
            let gn = g.norm().max(1e-12);
            let rho = rng.random_range(0.3..0.9);
            h_inv * (g * (lambda1 * rho / gn)) * h
        }
    };
    let mut bd = Matrix::zeros(n, m);
    for j in 0..m {
        let b0 = rng.random_range(0.2..1.5);
        let g = gaussian(rng, d, 1);
        let q = (g.transpose() * &p1 * &g)[(0, 0)].max(1e-12);
        let frac: f64 = rng.random_range(0.0..0.8);
        let b2 = g * (b0 * (frac / q).sqrt());
        bd[(0, j)] = b0;
        bd.view_mut((1, j), (d, 1)).copy_from(&b2);
    }
    let mut cd = Matrix::zeros(p, n);
    for i in 0..p {
        let c0 = rng.random_range(0.2..1.5);
        let g = gaussian(rng, 1, d);
        let q = (&g * &p1_inv * g.transpose())[(0, 0)].max(1e-12);
        let frac: f64 = rng.random_range(0.0..0.8);
        let c2 = g * (c0 * (frac / q).sqrt());
        cd[(i, 0)] = c0;
        cd.view_mut((i, 1), (1, d)).copy_from(&c2);
    }
    let mut ad = Matrix::zeros(n, n);
    ad[(0, 0)] = lambda1;
    ad.view_mut((1, 1), (d, d)).copy_from(&a2);
    let dd = direct_term(rng, p, m);
    let deflated = StateSpace::new(ad, bd, cd, dd, domain)?;
    let t = random_similarity(rng, n, 1e2);
    similarity_transform(&deflated, &t)
}

/// Adds `extra` stable states strictly dominated by the existing spectrum that
/// are unreachable (`unobservable = false`) or unobservable, then applies a
/// random similarity.
pub fn pad_nonminimal(
    rng: &mut CorpusRng,
    sys: &StateSpace,
    extra: usize,
    unobservable: bool,
) -> Result<StateSpace> {
    let n = sys.order();
    if n == 0 {
        return Err(Error::Precondition("cannot pad an order-0 model".into()));
    }
    let (m, p) = (sys.inputs(), sys.outputs());
    let eigs = eigenvalues(sys.a())?;
    let np = n + extra;
    let mut a = Matrix::zeros(np, np);
    a.view_mut((0, 0), (n, n)).copy_from(sys.a());
    match sys.domain() {
        Domain::Continuous => {
            let alpha = eigs.iter().map(|z| z.re).fold(f64::NEG_INFINITY, f64::max);
            for k in 0..extra {
                a[(n + k, n + k)] = alpha - rng.random_range(0.2..2.0) * (1.0 + alpha.abs());
            }
        }
        Domain::Discrete => {
            let rho = eigs.iter().map(|z| z.norm()).fold(0.0, f64::max);
            for k in 0..extra {
                a[(n + k, n + k)] = rho * rng.random_range(-0.8..0.8);
            }
        }
    }
    let coupling = gaussian(rng, n, extra) * 0.5;
    let mut b = Matrix::zeros(np, m);
    b.view_mut((0, 0), (n, m)).copy_from(sys.b());
    let mut c = Matrix::zeros(p, np);
    c.view_mut((0, 0), (p, n)).copy_from(sys.c());
    if unobservable {
        a.view_mut((n, 0), (extra, n)).copy_from(&coupling.transpose());
        b.view_mut((n, 0), (extra, m)).copy_from(&gaussian(rng, extra, m));
    } else {
        a.view_mut((0, n), (n, extra)).copy_from(&coupling);
        c.view_mut((0, n), (p, extra)).copy_from(&gaussian(rng, p, extra));
    }
    let padded = StateSpace::new(a, b, c, sys.d().clone(), sys.domain())?;
    let t = random_similarity(rng, np, 1e2);
    similarity_transform(&padded, &t)
}

/// One system of the given class and order.
pub fn generate_system(rng: &mut CorpusRng, class: SystemClass, n: usize, domain: Domain) -> Result<StateSpace> {
    if n == 0 {
        return Err(Error::Precondition("order must be positive".into()));
    }
    match class {
        SystemClass::Metzler => metzler(rng, n, domain),
        SystemClass::StableGeneric => stable_generic(rng, n, domain),
        SystemClass::Oscillatory => oscillatory(rng, n, domain),
        SystemClass::ConeInvariant => {
            if n == 1 {
                metzler(rng, 1, domain)
            } else {
                cone_invariant(rng, n, domain)
            }
        }
        SystemClass::PaddedNonminimal => {
            if n == 1 {
                return metzler(rng, 1, domain);
            }
            let extra = rng.random_range(1..=3usize).min(n - 1);
            let base_order = n - extra;
            let base = if base_order >= 2 && rng.random::<f64>() < 0.5 {
                cone_invariant(rng, base_order, domain)?
            } else {
                metzler(rng, base_order, domain)?
            };
            let unobservable = rng.random::<f64>() < 0.5;
            pad_nonminimal(rng, &base, extra, unobservable)
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::cone::polyhedral_internal_positivity;
    use crate::lti::minimal_realization;
    use crate::numkernel::condition_estimate;

    #[test]
    fn generation_is_deterministic() {
        let cfg = CorpusConfig {
            count: 12,
            seed: 7,
            ..Default::default()
        };
        let a = generate(&cfg).unwrap();
        let b = generate(&cfg).unwrap();
        for (x, y) in a.iter().zip(&b) {
            assert_eq!(x.system.a(), y.system.a());
            assert_eq!(x.system.c(), y.system.c());
            assert_eq!(x.class, y.class);
        }
    }

    #[test]
    fn metzler_class_is_internally_positive_and_stable() {
        let mut rng = rng_from_seed(3);
        for n in 1..8 {
            for domain in [Domain::Continuous, Domain::Discrete] {
                let s = generate_system(&mut rng, SystemClass::Metzler, n, domain).unwrap();
                assert!(polyhedral_internal_positivity(&s, 1e-12));
                assert!(s.is_stable().unwrap());
            }
        }
    }

    #[test]
    fn similarity_condition_bounded() {
        let mut rng = rng_from_seed(11);
        for n in 2..7 {
            let t = random_similarity(&mut rng, n, 1e3);
            assert!(condition_estimate(&t) <= 1e3 * n as f64);
        }
    }

    #[test]
    fn padding_is_nonminimal() {
        let mut rng = rng_from_seed(5);
        let base = generate_system(&mut rng, SystemClass::Metzler, 3, Domain::Continuous).unwrap();
        let base_min = minimal_realization(&base, 1e-9).unwrap().order();
        for unobs in [false, true] {
            let padded = pad_nonminimal(&mut rng, &base, 2, unobs).unwrap();
            assert_eq!(padded.order(), 5);
            assert_eq!(minimal_realization(&padded, 1e-9).unwrap().order(), base_min);
        }
    }

    #[test]
    fn class_names_round_trip() {
        for c in SystemClass::ALL {
            assert_eq!(c.as_str().parse::<SystemClass>().unwrap(), c);
        }
        assert!("bogus".parse::<SystemClass>().is_err());
    }
}
