//! State feedback `u = F·x` that makes the closed loop `(A+BF, B, C, D)`
//! carry the cone certificate.
//!
//! The joint problem in the cone and the gain is bilinear, so the search
//! alternates: certify the current closed loop; if that fails, freeze the
//! least-violating cone and solve an LMI for a gain update; blend the update
//! in with backtracking and keep it only if the certificate violation drops.
//! Alternative real pole placements are tried when the gain step stalls.

use num_complex::Complex64;
use rand::Rng;

use crate::certify::{
    adaptive_horizon, certify_soc, discrete_horizon, precheck, solve_certificate_sdp, Certificate, CertifyOptions,
    CertifyOutcome, FalsifyOptions, Precheck,
};
use crate::cone::EllipsoidalCone;
use crate::corpus::rng_from_seed;
use crate::error::{Error, Result};
use crate::lti::{dominant_decomposition, step_response, DominantOutcome, StateSpace};
use crate::numkernel::{eigenvalues, min_eigenvalue, rank, solve_linear, symmetrize, Domain, Matrix, ABS_FLOOR};
use crate::sdp::{self, AffineMat, SdpOptions, SdpProblem};

#[derive(Debug, Clone)]
pub struct SynthOptions {
    pub max_rounds: usize,
    /// Continuous initial poles are `−pole_scale·(1, 2, …, n)`.
    pub pole_scale: f64,
    pub require_stability: bool,
    /// Entrywise bound on `F`.
    pub effort_bound: Option<f64>,
    /// Accept `F = 0` when the open loop already qualifies.
    pub try_open_loop: bool,
    pub certify: CertifyOptions,
    /// Seed for the input mixing used by multi-input pole placement.
    pub seed: u64,
    /// Grid size of the step-response check.
    pub step_points: usize,
}

impl Default for SynthOptions {
    fn default() -> Self {
        Self {
            max_rounds: 25,
            pole_scale: 1.0,
            require_stability: true,
            effort_bound: None,
            try_open_loop: true,
            certify: CertifyOptions::default(),
            seed: 0,
            step_points: 2000,
        }
    }
}

#[derive(Debug, Clone)]
pub struct SynthResult {
    pub gain: Matrix,
    pub closed_loop: StateSpace,
    pub certificate: Certificate,
    pub rounds: usize,
    /// Spectral abscissa (continuous) or spectral radius (discrete) of `A+BF`.
    pub spectral_abscissa: f64,
}

#[derive(Debug, Clone)]
pub struct SynthFailure {
    pub rounds: usize,
    /// Certificate violation after every round (`+∞` when no cone can be posed).
    pub violation_trace: Vec<f64>,
    pub last_gain: Matrix,
    pub detail: String,
}

#[derive(Debug, Clone)]
pub enum SynthOutcome {
    Success(Box<SynthResult>),
    Failed(SynthFailure),
}

impl SynthOutcome {
    pub fn result(&self) -> Option<&SynthResult> {
        match self {
            SynthOutcome::Success(r) => Some(r),
            SynthOutcome::Failed(_) => None,
        }
    }
}

/// Rank of `[B, AB, …, Aⁿ⁻¹B]`.
pub fn controllability_rank(a: &Matrix, b: &Matrix) -> usize {
    let n = a.nrows();
    let m = b.ncols();
    let mut k = Matrix::zeros(n, n * m);
    let mut blk = b.clone();
    for i in 0..n {
        k.view_mut((0, i * m), (n, m)).copy_from(&blk);
        blk = a * blk;
    }
    let scale = k.norm().max(ABS_FLOOR);
    rank(&k, 1e-10 * scale)
}

fn char_poly_at(a: &Matrix, poles: &[Root]) -> Matrix {
    let n = a.nrows();
    let id = Matrix::identity(n, n);
    let mut phi = id.clone();
    for p in poles {
        phi = match *p {
            Root::Real(r) => &phi * (a - &id * r),
            Root::Pair(z) => &phi * (a * a - a * (2.0 * z.re) + &id * z.norm_sqr()),
        };
    }
    phi
}

/// A closed-loop pole: real, or a complex-conjugate pair given by one member.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum Root {
    Real(f64),
    Pair(Complex64),
}

impl Root {
    fn degree(&self) -> usize {
        match self {
            Root::Real(_) => 1,
            Root::Pair(_) => 2,
        }
    }
}

/// Ackermann's formula for `(A, b)` single input: `f` with `eig(A + b·f) = poles`.
fn ackermann(a: &Matrix, b: &Matrix, poles: &[Root]) -> Result<Matrix> {
    let n = a.nrows();
    let mut ctrb = Matrix::zeros(n, n);
    let mut col = b.clone();
    for i in 0..n {
        ctrb.set_column(i, &col.column(0));
        col = a * col;
    }
    let mut en = Matrix::zeros(1, n);
    en[(0, n - 1)] = 1.0;
    // eₙᵀ·𝒞⁻¹ = solve(𝒞ᵀ, eₙ)ᵀ
    let row = solve_linear(&ctrb.transpose(), &en.transpose())?.transpose();
    Ok(-(row * char_poly_at(a, poles)))
}

/// Real pole placement. Multi-input systems are reduced to a single input
/// through a mixing vector `g` (unit vectors first, then seeded random ones)
/// after an optional seeded pre-feedback that makes `A` cyclic.
pub fn place_poles(a: &Matrix, b: &Matrix, poles: &[f64], seed: u64) -> Result<Matrix> {
    let roots: Vec<Root> = poles.iter().map(|&p| Root::Real(p)).collect();
    place_roots(a, b, &roots, seed)
}

/// Pole placement with complex pairs allowed.
pub fn place_roots(a: &Matrix, b: &Matrix, poles: &[Root], seed: u64) -> Result<Matrix> {
    let (n, m) = (a.nrows(), b.ncols());
    let deg: usize = poles.iter().map(Root::degree).sum();
    if deg != n {
        return Err(Error::ShapeMismatch(format!("{deg} poles for order {n}")));
    }
    let r = controllability_rank(a, b);
    if r < n {
        return Err(Error::Uncontrollable { rank: r, n });
    }
    if m == 1 {
        return ackermann(a, b, poles);
    }
    let mut rng = rng_from_seed(seed);
    let scale = a.norm().max(1.0) / b.norm().max(ABS_FLOOR);
    for attempt in 0..(m + 20) {
        let pre = if attempt < m + 10 {
            Matrix::zeros(m, n)
        } else {
            Matrix::from_fn(m, n, |_, _| rng.random_range(-1.0..1.0) * scale)
        };
        let g = if attempt < m {
            let mut g = Matrix::zeros(m, 1);
            g[(attempt, 0)] = 1.0;
            g
        } else {
            Matrix::from_fn(m, 1, |_, _| rng.random_range(-1.0..1.0))
        };
        let a0 = a + b * &pre;
        let bg = b * &g;
        if controllability_rank(&a0, &bg) < n {
            continue;
        }
        let f = ackermann(&a0, &bg, poles)?;
        return Ok(pre + g * f);
    }
    Err(Error::NumericalBreakdown("no single-input reduction found for pole placement".into()))
}

fn initial_poles(n: usize, domain: Domain, scale: f64, spread: f64) -> Vec<f64> {
    match domain {
        Domain::Continuous => (0..n).map(|k| -scale * (1.0 + spread * k as f64)).collect(),
        Domain::Discrete => {
            // spread 1: n/(n+1), …, 1/(n+1), equally spaced in (0, 1);
            // a larger scale compresses toward 0
            let top = discrete_top(n) / scale.max(1.0);
            (0..n)
                .map(|k| top * ((n - k) as f64 / n as f64).powf(spread))
                .collect()
        }
    }
}

fn discrete_top(n: usize) -> f64 {
    n as f64 / (n as f64 + 1.0)
}

fn closed_loop(sys: &StateSpace, f: &Matrix) -> Result<StateSpace> {
    sys.with_a(sys.a() + sys.b() * f)
}

/// Certificate violation of a closed loop: `−t*` of the exact max-slack
/// certificate SDP, a fixed penalty above any SDP value for sign failures,
/// and `+∞` when no cone can be posed.
struct Measure {
    value: f64,
    cone: Option<(EllipsoidalCone, f64)>,
}

const SIGN_PENALTY: f64 = 1e3;

/// Numerical failures on a candidate rank it last instead of ending the search.
fn measure(cl: &StateSpace, opts: &SynthOptions) -> Result<Measure> {
    Ok(measure_inner(cl, opts).unwrap_or(Measure {
        value: f64::INFINITY,
        cone: None,
    }))
}

fn measure_inner(cl: &StateSpace, opts: &SynthOptions) -> Result<Measure> {
    let worst = Measure {
        value: f64::INFINITY,
        cone: None,
    };
    if opts.require_stability && !cl.is_stable()? {
        return Ok(worst);
    }
    if cl.order() == 1 {
        let ok = certify_soc(cl, &opts.certify).is_certified();
        return Ok(Measure {
            value: if ok { -1.0 } else { f64::INFINITY },
            cone: None,
        });
    }
    let dec = match precheck(cl, opts.certify.verify_tol)? {
        Precheck::Ready(d) => d,
        Precheck::Reject { .. } => {
            // sign failures: rank by how negative the dominant residue product is
            return Ok(match dominant_decomposition(cl)? {
                DominantOutcome::Simple(d) => {
                    let prod = (&d.c0 * d.b0.transpose()).min();
                    let scale = (d.c0.norm() * d.b0.norm()).max(ABS_FLOOR);
                    Measure {
                        value: SIGN_PENALTY * (1.0 - prod / scale),
                        cone: None,
                    }
                }
                DominantOutcome::NotSimpleReal(_) => worst,
            });
        }
    };
    let sdp_opts = SdpOptions {
        exact_slack: true,
        ..opts.certify.sdp.clone()
    };
    let att = solve_certificate_sdp(&dec, &sdp_opts)?;
    let slack = att.solution.slack;
    if !slack.is_finite() {
        return Ok(Measure {
            value: SIGN_PENALTY,
            cone: None,
        });
    }
    // the least-violating P1 may be slightly indefinite
    let p1 = symmetrize(&att.p1);
    let lmin = min_eigenvalue(&p1)?;
    let shift = (1e-6 * p1.norm().max(1.0) - lmin).max(0.0);
    let k = p1.nrows();
    let p1 = p1 + Matrix::identity(k, k) * shift;
    let cone = EllipsoidalCone::from_deflated(1.0, &p1, &dec.t).ok().map(|c| (c, att.rate));
    Ok(Measure { value: -slack, cone })
}

/// Gain update `ΔF` maximizing the invariance slack of the frozen cone:
/// `−(MᵀP + PM − ρP) ⪰ t·I` with `M = A + B(F + ΔF)` (continuous), or the
/// first-order expansion of `MᵀPM − ρP` with `ρ ≥ 0` (discrete).
fn gain_step(sys: &StateSpace, f: &Matrix, cone: &EllipsoidalCone, trust: f64, opts: &SynthOptions) -> Result<Option<Matrix>> {
    let (n, m) = (sys.order(), sys.inputs());
    let p = cone.p();
    let mk = sys.a() + sys.b() * f;
    let mut prob = SdpProblem::new();
    let df = prob.add_mat(m, n);
    let rho = prob.add_scalar();
    let dfe = AffineMat::mat(&df);
    let bdf = dfe.left(sys.b());
    let (lhs, scale) = match sys.domain() {
        Domain::Continuous => {
            let base = p * &mk;
            let lin = bdf.left(p).plus_transpose();
            (
                lin.add_constant(&(base.transpose() + &base)),
                p.norm() * (mk.norm() + 1.0),
            )
        }
        Domain::Discrete => {
            let base = mk.transpose() * p * &mk;
            let lin = bdf.left(&(mk.transpose() * p)).plus_transpose();
            prob.add_bounds(rho, Some(0.0), None);
            (lin.add_constant(&base), p.norm() * (mk.norm() + 1.0).powi(2))
        }
    };
    let rho_p = AffineMat {
        constant: Matrix::zeros(n, n),
        terms: [(rho, p.clone())].into_iter().collect(),
    };
    prob.add_lmi("invariance", lhs.sub(&rho_p).scale(-1.0 / scale.max(ABS_FLOOR)));
    for i in 0..m {
        for j in 0..n {
            let k = df.index(i, j);
            let (mut lo, mut hi) = (-trust, trust);
            if let Some(e) = opts.effort_bound {
                lo = lo.max(-e - f[(i, j)]);
                hi = hi.min(e - f[(i, j)]);
            }
            if lo >= hi {
                return Ok(None);
            }
            prob.add_bounds(k, Some(lo), Some(hi));
        }
    }
    let sol = sdp::solve(
        &prob,
        &SdpOptions {
            exact_slack: true,
            ..opts.certify.sdp.clone()
        },
    )?;
    if !sol.slack.is_finite() {
        return Ok(None);
    }
    Ok(Some(df.value(&sol.x)))
}

/// Step-response observables: the most negative forward difference and the
/// largest excess over the final value, both relative to the peak.
#[derive(Debug, Clone, Copy)]
pub struct StepDefects {
    pub undershoot: f64,
    pub overshoot: f64,
}

pub fn step_defects(sys: &StateSpace, points: usize) -> Result<StepDefects> {
    let fo = FalsifyOptions::default();
    let horizon = match sys.domain() {
        Domain::Continuous => adaptive_horizon(sys, &fo),
        Domain::Discrete => discrete_horizon(sys, &fo) as f64,
    };
    let points = match sys.domain() {
        Domain::Continuous => points,
        Domain::Discrete => horizon as usize + 1,
    };
    let series = step_response(sys, horizon, points)?;
    let peak = series.peak().max(ABS_FLOOR);
    let n = sys.order();
    let dc = if n == 0 {
        Some(sys.d().clone())
    } else {
        let shift = match sys.domain() {
            Domain::Continuous => -sys.a().clone(),
            Domain::Discrete => Matrix::identity(n, n) - sys.a(),
        };
        solve_linear(&shift, sys.b()).ok().map(|x| sys.c() * x + sys.d())
    };
    let mut under = 0.0_f64;
    let mut over = 0.0_f64;
    for w in series.values.windows(2) {
        under = under.max((&w[0] - &w[1]).max());
    }
    if let Some(dc) = dc {
        for v in &series.values {
            over = over.max((v - &dc).max());
        }
    }
    Ok(StepDefects {
        undershoot: under / peak,
        overshoot: over / peak,
    })
}

fn accept(sys: &StateSpace, f: &Matrix, rounds: usize, opts: &SynthOptions) -> Result<Option<SynthResult>> {
    Ok(accept_inner(sys, f, rounds, opts).unwrap_or(None))
}

fn accept_inner(sys: &StateSpace, f: &Matrix, rounds: usize, opts: &SynthOptions) -> Result<Option<SynthResult>> {
    let cl = closed_loop(sys, f)?;
    if opts.require_stability && !cl.is_stable()? {
        return Ok(None);
    }
    let CertifyOutcome::Certified(cert) = certify_soc(&cl, &opts.certify) else {
        return Ok(None);
    };
    let defects = step_defects(&cl, opts.step_points)?;
    if defects.undershoot > 1e-6 || defects.overshoot > 1e-6 {
        return Ok(None);
    }
    Ok(Some(SynthResult {
        gain: f.clone(),
        spectral_abscissa: cl.stability_margin()?,
        closed_loop: cl,
        certificate: *cert,
        rounds,
    }))
}

fn within_effort(f: &Matrix, opts: &SynthOptions) -> bool {
    opts.effort_bound.is_none_or(|e| f.amax() <= e * (1.0 + 1e-12))
}

/// Alternating cone/gain search.
pub fn synthesize_feedback(sys: &StateSpace, opts: &SynthOptions) -> Result<SynthOutcome> {
    let (n, m) = (sys.order(), sys.inputs());
    if n == 0 {
        return Err(Error::Precondition("static systems have no state to feed back".into()));
    }
    let r = controllability_rank(sys.a(), sys.b());
    if r < n {
        return Err(Error::Uncontrollable { rank: r, n });
    }

    let zero = Matrix::zeros(m, n);
    if opts.try_open_loop {
        if let Some(res) = accept(sys, &zero, 0, opts)? {
            return Ok(SynthOutcome::Success(Box::new(res)));
        }
    }

    if let Some(reason) = feedback_obstruction(sys, opts.require_stability)? {
        return Ok(SynthOutcome::Failed(SynthFailure {
            rounds: 0,
            violation_trace: Vec::new(),
            last_gain: zero,
            detail: format!("{reason}; no state feedback gives an externally positive loop"),
        }));
    }
    let zeros = if sys.inputs() == 1 && sys.outputs() == 1 {
        Some(siso_zeros(sys)?)
    } else {
        None
    };

    // round 0: the plain real placement, then placements that cancel or
    // dominate the stable zeros; the least violating one seeds the search
    let mut starts = vec![initial_poles(n, sys.domain(), opts.pole_scale, 1.0)
        .into_iter()
        .map(Root::Real)
        .collect::<Vec<_>>()];
    if let Some(z) = &zeros {
        starts.extend(zero_aware_roots(z, n, sys.domain(), opts.pole_scale));
    }
    let mut best: Option<(Matrix, Measure)> = None;
    for roots in &starts {
        let Ok(cand) = place_roots(sys.a(), sys.b(), roots, opts.seed) else {
            continue;
        };
        if !within_effort(&cand, opts) {
            continue;
        }
        if let Some(res) = accept(sys, &cand, 0, opts)? {
            return Ok(SynthOutcome::Success(Box::new(res)));
        }
        let meas = measure(&closed_loop(sys, &cand)?, opts)?;
        if best.as_ref().is_none_or(|(_, b)| meas.value < b.value) {
            best = Some((cand, meas));
        }
    }
    let (mut f, mut current) = match best {
        Some(b) => b,
        // every placement is too aggressive for the effort bound
        None => {
            let meas = measure(&closed_loop(sys, &zero)?, opts)?;
            (zero.clone(), meas)
        }
    };
    let mut trace = vec![current.value];
    let mut trust = f.amax().max(1.0);
    let mut pole_tries = pole_candidates(n, sys.domain(), opts.pole_scale).into_iter();

    for round in 1..=opts.max_rounds {
        // (1) cone step
        if let Some(res) = accept(sys, &f, round, opts)? {
            return Ok(SynthOutcome::Success(Box::new(res)));
        }
        // (2) gain step on the frozen cone, with a backtracked blend
        let mut improved = false;
        for _ in 0..3 {
            let Some((cone, _rate)) = &current.cone else { break };
            let Ok(Some(df)) = gain_step(sys, &f, cone, trust, opts) else { break };
            let mut alpha = 1.0;
            for _ in 0..8 {
                let cand = &f + &df * alpha;
                if within_effort(&cand, opts) {
                    let meas = measure(&closed_loop(sys, &cand)?, opts)?;
                    if meas.value < current.value - 1e-9 * (1.0 + current.value.abs()) {
                        f = cand;
                        current = meas;
                        improved = true;
                        break;
                    }
                }
                alpha *= 0.5;
            }
            if improved {
                trust *= 2.0;
                break;
            }
            trust *= 0.25;
        }
        // (3) alternative pole placements once the gain step stalls
        if !improved {
            for poles in pole_tries.by_ref() {
                let Ok(cand) = place_poles(sys.a(), sys.b(), &poles, opts.seed) else {
                    continue;
                };
                if !within_effort(&cand, opts) {
                    continue;
                }
                if let Some(res) = accept(sys, &cand, round, opts)? {
                    return Ok(SynthOutcome::Success(Box::new(res)));
                }
                let meas = measure(&closed_loop(sys, &cand)?, opts)?;
                if meas.value < current.value {
                    f = cand;
                    current = meas;
                    trust = f.amax().max(1.0);
                    improved = true;
                    break;
                }
            }
        }
        trace.push(current.value);
        if !improved {
            return Ok(SynthOutcome::Failed(SynthFailure {
                rounds: round,
                violation_trace: trace,
                last_gain: f,
                detail: "no gain update reduced the certificate violation".into(),
            }));
        }
    }
    if let Some(res) = accept(sys, &f, opts.max_rounds, opts)? {
        return Ok(SynthOutcome::Success(Box::new(res)));
    }
    Ok(SynthOutcome::Failed(SynthFailure {
        rounds: opts.max_rounds,
        violation_trace: trace,
        last_gain: f,
        detail: "round limit reached".into(),
    }))
}

/// Zeros of a single-input single-output system: the roots of
/// `D·χ_A + χ_{A−BC} − χ_A`, where `χ_M` is the characteristic polynomial.
/// State feedback leaves them in place.
pub fn siso_zeros(sys: &StateSpace) -> Result<Vec<Complex64>> {
    if sys.inputs() != 1 || sys.outputs() != 1 {
        return Err(Error::Precondition("zeros are computed for single-input single-output systems".into()));
    }
    let d = sys.d()[(0, 0)];
    let chi_a = char_poly(&eigenvalues(sys.a())?);
    let chi_bc = char_poly(&eigenvalues(&(sys.a() - sys.b() * sys.c()))?);
    let num: Vec<f64> = chi_a.iter().zip(&chi_bc).map(|(x, y)| d * x + y - x).collect();
    let big = num.iter().fold(0.0_f64, |m, c| m.max(c.abs()));
    let Some(lead) = num.iter().position(|c| c.abs() > 1e-10 * big.max(ABS_FLOOR)) else {
        return Ok(Vec::new());
    };
    let num = &num[lead..];
    let deg = num.len() - 1;
    if deg == 0 {
        return Ok(Vec::new());
    }
    let mut comp = Matrix::zeros(deg, deg);
    for j in 0..deg {
        comp[(0, j)] = -num[j + 1] / num[0];
    }
    for i in 1..deg {
        comp[(i, i - 1)] = 1.0;
    }
    eigenvalues(&comp)
}

/// Coefficients of `∏(s − λ)`, leading first.
fn char_poly(roots: &[Complex64]) -> Vec<f64> {
    let mut c = vec![Complex64::new(1.0, 0.0)];
    for &r in roots {
        let mut next = c.clone();
        next.push(Complex64::new(0.0, 0.0));
        for (k, ck) in c.iter().enumerate() {
            next[k + 1] -= r * ck;
        }
        c = next;
    }
    c.into_iter().map(|z| z.re).collect()
}

fn is_real(z: Complex64) -> bool {
    z.im.abs() <= 1e-9 * (1.0 + z.re.abs())
}

/// A reason no state feedback can make the loop externally positive.
/// Feedback leaves `D`, the zeros and the first nonzero Markov parameter of
/// a single-input single-output system unchanged, so each of these tests
/// rules out every gain:
/// - a negative entry of `D`;
/// - a negative first nonzero Markov parameter (the response starts negative);
/// - with stability required, a simple real zero `z ≥ 0` (discrete `z ≥ 1`):
///   the transfer function changes sign there, inside the region `s > λ1`
///   where the transform of a nonnegative response must be nonnegative.
pub fn feedback_obstruction(sys: &StateSpace, require_stability: bool) -> Result<Option<String>> {
    if let Some(dmin) = sys.d().iter().copied().reduce(f64::min) {
        if dmin < 0.0 {
            return Ok(Some(format!("negative feedthrough {dmin:.6e}")));
        }
    }
    if sys.inputs() != 1 || sys.outputs() != 1 {
        return Ok(None);
    }
    if sys.d()[(0, 0)] == 0.0 {
        let (a, b, c) = (sys.a(), sys.b(), sys.c());
        let na = a.norm().max(1.0);
        let mut ab = b.clone();
        let mut bound = b.norm() * c.norm();
        for k in 0..sys.order() {
            let mk = (c * &ab)[(0, 0)];
            if mk.abs() > 1e-10 * bound {
                if mk < 0.0 {
                    return Ok(Some(format!("first nonzero Markov parameter C·A^{k}·B = {mk:.6e} is negative")));
                }
                break;
            }
            ab = a * ab;
            bound *= na;
        }
    }
    if !require_stability {
        return Ok(None);
    }
    let edge = match sys.domain() {
        Domain::Continuous => 0.0,
        Domain::Discrete => 1.0,
    };
    let zeros = siso_zeros(sys)?;
    let real: Vec<f64> = zeros.iter().filter(|z| is_real(**z)).map(|z| z.re).collect();
    for &z in real.iter().filter(|&&z| z >= edge) {
        // a numerically split double zero does not change sign
        let twin = real
            .iter()
            .filter(|&&w| (w - z).abs() <= 1e-6 * (1.0 + z.abs()))
            .count();
        if twin % 2 == 1 {
            return Ok(Some(format!(
                "real zero at {z:.6} lies right of every stable dominant pole"
            )));
        }
    }
    Ok(None)
}

/// Pole sets built from the stable zeros. The first cancels each of them
/// exactly; the second puts a pole just right of each real zero, which
/// makes every factor `(s − z)/(s − p)` a unit impulse plus a nonnegative
/// exponential. The remaining real poles sit right of every cancelled or
/// paired zero so the dominant mode stays real and simple.
fn zero_aware_roots(zeros: &[Complex64], n: usize, domain: Domain, scale: f64) -> Vec<Vec<Root>> {
    let stable = |z: &Complex64| match domain {
        Domain::Continuous => z.re < 0.0,
        Domain::Discrete => z.norm() < 1.0,
    };
    let mut zs: Vec<Complex64> = zeros.iter().copied().filter(stable).filter(|z| is_real(*z) || z.im > 0.0).collect();
    // rightmost first, so the budget of n − 1 cancelled poles drops the leftmost zeros
    zs.sort_by(|a, b| b.re.total_cmp(&a.re));
    let mut out = Vec::new();
    for near in [false, true] {
        let mut roots = Vec::new();
        let mut deg = 0;
        let mut reach = f64::NEG_INFINITY;
        for &z in &zs {
            let root = if is_real(z) {
                let p = match (near, domain) {
                    (false, _) => z.re,
                    (true, Domain::Continuous) => 0.9 * z.re,
                    (true, Domain::Discrete) => z.re.max(0.0) + 0.1 * (1.0 - z.re.max(0.0)),
                };
                Root::Real(p)
            } else {
                Root::Pair(z)
            };
            if deg + root.degree() > n - 1 {
                continue;
            }
            deg += root.degree();
            reach = reach.max(match (domain, root) {
                (Domain::Continuous, Root::Real(p)) => p,
                (Domain::Continuous, Root::Pair(z)) => z.re,
                (Domain::Discrete, Root::Real(p)) => p.abs(),
                (Domain::Discrete, Root::Pair(z)) => z.norm(),
            });
            roots.push(root);
        }
        if roots.is_empty() {
            continue;
        }
        let free = n - deg;
        let lead = match domain {
            Domain::Continuous => {
                if reach < -scale {
                    -scale
                } else {
                    0.5 * reach
                }
            }
            Domain::Discrete => {
                let top = discrete_top(n);
                if reach < top {
                    top
                } else {
                    0.5 * (1.0 + reach)
                }
            }
        };
        for k in 0..free {
            roots.push(Root::Real(match domain {
                Domain::Continuous => lead - scale * k as f64,
                Domain::Discrete => lead * (free - k) as f64 / free as f64,
            }));
        }
        out.push(roots);
    }
    out
}

/// Placements tried by the fallback: scaled, linearly spread and
/// geometrically spread variants of the initial real poles.
fn pole_candidates(n: usize, domain: Domain, scale: f64) -> Vec<Vec<f64>> {
    let mut out = Vec::new();
    for s in [1.0, 2.0, 0.5, 4.0, 0.25] {
        for ratio in [3.0_f64, 5.0] {
            out.push(match domain {
                Domain::Continuous => (0..n).map(|k| -scale * s * ratio.powi(k as i32)).collect(),
                Domain::Discrete => (0..n)
                    .map(|k| discrete_top(n) / (scale * s).max(1.0) / ratio.powi(k as i32))
                    .collect(),
            });
        }
        for spread in [0.5, 2.0, 4.0, 0.25] {
            out.push(initial_poles(n, domain, scale * s, spread));
        }
    }
    out
}
