//! Second-order-cone certificates of external positivity.
//!
//! In deflated coordinates `x = T·(ξ₀, ξ₂)` with `T⁻¹AT = blkdiag(λ₁, A₂)` the
//! cone is `p0·ξ₀² ≥ ξ₂ᵀP1ξ₂, ξ₀ ≥ 0` with `p0 = 1`. Cone invariance, input
//! columns inside the cone and output rows inside the dual cone are all affine
//! in `P1`, so the search is a small SDP.

use crate::cone::{invariance_residual, polyhedral_internal_positivity, EllipsoidalCone};
use crate::error::{Error, Result};
use crate::lti::{dominant_decomposition, DominantDecomposition, DominantOutcome, NotSimpleReal, StateSpace};
use crate::numkernel::{
    eigenvalues, expm, inverse, max_eigenvalue, min_eigenvalue, solve_lyapunov, sym_eig, symmetrize, Domain,
    Matrix, Vector, ABS_FLOOR,
};
use crate::sdp::{self, AffineMat, SdpOptions, SdpProblem, SdpSolution, SdpStatus, SymVar};

/// Relative size below which a dominant residue counts as zero.
const RESIDUE_ZERO: f64 = 1e-10;

/// Smallest ratio of square-rooted Hankel values accepted when balancing ξ₂.
const BALANCE_MIN_RATIO: f64 = 1e-8;

#[derive(Debug, Clone)]
pub struct FalsifyOptions {
    /// Cap on the continuous-time horizon.
    pub max_horizon: f64,
    /// Cap on the number of discrete steps.
    pub max_steps: usize,
    /// Uniform grid size over the horizon.
    pub points: usize,
    /// Absolute refutation threshold.
    pub refute_tol: f64,
    /// Relative guard (times the peak response).
    pub refute_rel: f64,
}

impl Default for FalsifyOptions {
    fn default() -> Self {
        Self {
            max_horizon: 500.0,
            max_steps: 5000,
            points: 2000,
            refute_tol: 1e-9,
            refute_rel: 1e-12,
        }
    }
}

#[derive(Debug, Clone)]
pub struct CertifyOptions {
    pub sdp: SdpOptions,
    /// Verification tolerance (ten times the solver tolerance).
    pub verify_tol: f64,
    /// Fallback search over the invariance rate in full coordinates.
    pub rate_search: bool,
    /// Run the sampling falsifier on every non-certified system.
    pub falsify: bool,
    pub falsify_opts: FalsifyOptions,
}

impl Default for CertifyOptions {
    fn default() -> Self {
        // only the sign of the maximal slack matters here
        let sdp = SdpOptions {
            exact_slack: false,
            ..SdpOptions::default()
        };
        Self {
            verify_tol: 10.0 * sdp.feas_tol,
            sdp,
            rate_search: false,
            falsify: true,
            falsify_opts: FalsifyOptions::default(),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Reason {
    ComplexDominant,
    RepeatedDominant,
    NegativeDominantDiscrete,
    NegativeDominantResidue,
    SdpInfeasible,
    SdpMarginal,
    NegativeDirectTerm,
}

impl Reason {
    pub fn as_str(self) -> &'static str {
        match self {
            Reason::ComplexDominant => "ComplexDominant",
            Reason::RepeatedDominant => "RepeatedDominant",
            Reason::NegativeDominantDiscrete => "NegativeDominantDiscrete",
            Reason::NegativeDominantResidue => "NegativeDominantResidue",
            Reason::SdpInfeasible => "SdpInfeasible",
            Reason::SdpMarginal => "SdpMarginal",
            Reason::NegativeDirectTerm => "NegativeDirectTerm",
        }
    }
}

impl std::fmt::Display for Reason {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(self.as_str())
    }
}

/// A negative sample of the impulse response.
#[derive(Debug, Clone, PartialEq)]
pub struct Counterexample {
    /// Time (continuous) or step index (discrete).
    pub time: f64,
    pub output: usize,
    pub input: usize,
    pub value: f64,
    /// `value / peak`.
    pub relative: f64,
}

#[derive(Debug, Clone)]
pub struct Certificate {
    pub cone: EllipsoidalCone,
    /// `2λ₁` (continuous) or `λ₁²` (discrete) unless a rate search chose less.
    pub rate: f64,
    pub p0: f64,
    pub p1: Matrix,
    /// Named residuals from the independent re-check; all ≥ `−verify_tol` pass.
    pub residuals: Vec<(String, f64)>,
    pub decomposition: DominantDecomposition,
    /// Phase-I slack of the SDP (infinite for the scalar rule).
    pub slack: f64,
}

#[derive(Debug, Clone)]
pub enum CertifyOutcome {
    Certified(Box<Certificate>),
    NotCertified { reason: Reason, detail: String },
    Refuted(Counterexample),
}

impl CertifyOutcome {
    pub fn is_certified(&self) -> bool {
        matches!(self, CertifyOutcome::Certified(_))
    }

    pub fn is_refuted(&self) -> bool {
        matches!(self, CertifyOutcome::Refuted(_))
    }

    pub fn certificate(&self) -> Option<&Certificate> {
        match self {
            CertifyOutcome::Certified(c) => Some(c),
            _ => None,
        }
    }

    pub fn reason(&self) -> Option<Reason> {
        match self {
            CertifyOutcome::NotCertified { reason, .. } => Some(*reason),
            _ => None,
        }
    }

    pub fn label(&self) -> &'static str {
        match self {
            CertifyOutcome::Certified(_) => "Certified",
            CertifyOutcome::NotCertified { .. } => "NotCertified",
            CertifyOutcome::Refuted(_) => "Refuted",
        }
    }
}

/// Result of independent certificate re-checking.
#[derive(Debug, Clone)]
pub struct VerificationReport {
    pub residuals: Vec<(String, f64)>,
    pub passed: bool,
    pub worst: Option<(String, f64)>,
}

/// Outcome of the structural checks that precede the SDP.
#[derive(Debug, Clone)]
pub enum Precheck {
    Ready(DominantDecomposition),
    Reject { reason: Reason, detail: String },
}

fn min_entry(m: &Matrix) -> f64 {
    m.iter().copied().fold(f64::INFINITY, f64::min)
}

fn residue_scale(sys: &StateSpace) -> f64 {
    (sys.b().norm() * sys.c().norm()).max(sys.d().norm()).max(ABS_FLOOR)
}

/// One-state stand-in for an order-0 model: same `D`, zero dynamics coupling.
fn lift_order_zero(sys: &StateSpace) -> Result<StateSpace> {
    let a = match sys.domain() {
        Domain::Continuous => -1.0,
        Domain::Discrete => 0.0,
    };
    StateSpace::new(
        Matrix::from_element(1, 1, a),
        Matrix::zeros(1, sys.inputs()),
        Matrix::zeros(sys.outputs(), 1),
        sys.d().clone(),
        sys.domain(),
    )
}

/// D sign, dominant-mode structure and residue signs.
pub fn precheck(sys: &StateSpace, tol: f64) -> Result<Precheck> {
    let dmin = min_entry(sys.d());
    if !sys.d().is_empty() && dmin < -tol * residue_scale(sys) {
        return Ok(Precheck::Reject {
            reason: Reason::NegativeDirectTerm,
            detail: format!("D has entry {dmin:.3e}"),
        });
    }
    let dec = match dominant_decomposition(sys)? {
        DominantOutcome::Simple(d) => d,
        DominantOutcome::NotSimpleReal(NotSimpleReal::ComplexPair { re, im, .. }) => {
            return Ok(Precheck::Reject {
                reason: Reason::ComplexDominant,
                detail: format!("dominant pair {re:.6} ± {im:.6}i"),
            })
        }
        DominantOutcome::NotSimpleReal(NotSimpleReal::Repeated { lambda, gap }) => {
            return Ok(Precheck::Reject {
                reason: Reason::RepeatedDominant,
                detail: format!("dominant eigenvalue {lambda:.6} with gap {gap:.3e}"),
            })
        }
    };
    let b0_scale = dec.b0.amax().max(dec.b2.norm()).max(ABS_FLOOR);
    let c0_scale = dec.c0.amax().max(dec.c2.norm()).max(ABS_FLOOR);
    let bmin = dec.b0.min();
    let cmin = dec.c0.min();
    let coupled = (dec.b0.amax() > 0.0) && (dec.c0.amax() > 0.0);
    if dec.negative_dominant_discrete() && coupled {
        return Ok(Precheck::Reject {
            reason: Reason::NegativeDominantDiscrete,
            detail: format!("dominant eigenvalue {:.6} is negative", dec.lambda1),
        });
    }
    if bmin < -tol * b0_scale || cmin < -tol * c0_scale {
        return Ok(Precheck::Reject {
            reason: Reason::NegativeDominantResidue,
            detail: format!("min b0 = {bmin:.3e}, min c0 = {cmin:.3e}"),
        });
    }
    Ok(Precheck::Ready(dec))
}

/// Normalized certificate SDP in the single variable `P1`.
pub struct CertificateSdp {
    pub problem: SdpProblem,
    pub p1: SymVar,
    pub rate: f64,
}

/// Pinned rate: `2λ₁` (continuous) or `λ₁²` (discrete).
pub fn pinned_rate(dec: &DominantDecomposition) -> f64 {
    match dec.domain {
        Domain::Continuous => 2.0 * dec.lambda1,
        Domain::Discrete => dec.lambda1 * dec.lambda1,
    }
}

pub(crate) fn invariance_scale(dec: &DominantDecomposition) -> f64 {
    let base = dec.a2.norm() + dec.lambda1.abs();
    match dec.domain {
        Domain::Continuous => base,
        Domain::Discrete => base * base,
    }
    .max(ABS_FLOOR)
}

/// `−(A₂ᵀP1 + P1A₂ − ρP1)` or `−(A₂ᵀP1A₂ − ρP1)` as an affine expression.
pub fn deflated_invariance(dec: &DominantDecomposition, p1: &AffineMat, rate: f64) -> AffineMat {
    let lhs = match dec.domain {
        Domain::Continuous => p1.left(&dec.a2.transpose()).plus_transpose(),
        Domain::Discrete => p1.left(&dec.a2.transpose()).right(&dec.a2),
    };
    lhs.sub(&p1.scale(rate)).scale(-1.0)
}

/// Why the input or output conditions are infeasible before any solve.
fn degenerate_residues(dec: &DominantDecomposition) -> Option<String> {
    for j in 0..dec.b0.len() {
        let col_scale = dec.b0[j].abs().max(dec.b2.column(j).norm());
        if dec.b0[j].abs() <= RESIDUE_ZERO * col_scale && dec.b2.column(j).norm() > RESIDUE_ZERO * col_scale {
            return Some(format!("input column {j} has no dominant component"));
        }
    }
    for i in 0..dec.c0.len() {
        let row_scale = dec.c0[i].abs().max(dec.c2.row(i).norm());
        if dec.c0[i].abs() <= RESIDUE_ZERO * row_scale && dec.c2.row(i).norm() > RESIDUE_ZERO * row_scale {
            return Some(format!("output row {i} has no dominant component"));
        }
    }
    None
}

/// Input and output conditions, normalized so each has unit constant part.
pub fn add_residue_constraints(prob: &mut SdpProblem, dec: &DominantDecomposition, p1: &AffineMat) {
    let d = dec.a2.nrows();
    for j in 0..dec.b0.len() {
        let b0 = dec.b0[j];
        if b0.abs() <= RESIDUE_ZERO * b0.abs().max(dec.b2.column(j).norm()) || b0 == 0.0 {
            continue;
        }
        let b2 = Matrix::from_iterator(d, 1, dec.b2.column(j).iter().map(|v| v / b0));
        // 1 − b̃ᵀP1b̃ ≥ 0
        let quad = p1.left(&b2.transpose()).right(&b2).scale(-1.0);
        prob.add_lmi(
            format!("input[{j}]"),
            quad.add_constant(&Matrix::from_element(1, 1, 1.0)),
        );
    }
    for i in 0..dec.c0.len() {
        let c0 = dec.c0[i];
        if c0.abs() <= RESIDUE_ZERO * c0.abs().max(dec.c2.row(i).norm()) || c0 == 0.0 {
            continue;
        }
        let c2 = Matrix::from_iterator(d, 1, dec.c2.row(i).iter().map(|v| v / c0));
        let lmi = AffineMat::blocks(
            &[
                vec![Some(p1.clone()), Some(AffineMat::constant(c2.clone()))],
                vec![
                    Some(AffineMat::constant(c2.transpose())),
                    Some(AffineMat::identity(1)),
                ],
            ],
            &[d, 1],
            &[d, 1],
        );
        prob.add_lmi(format!("output[{i}]"), lmi);
    }
}

/// Same decomposition with ξ₂ in balanced coordinates of the shifted
/// subsystem `(A₂ − λ₁I, B₂/b0, C₂/c0)` (`A₂/|λ₁|` in discrete time).
///
/// The certificate SDP is feasible or not independently of the ξ₂ basis, but
/// its attainable slack is not; balancing gives every similar realization
/// nearly the same SDP. `None` if the subsystem is too close to non-minimal.
pub fn balanced_decomposition(dec: &DominantDecomposition) -> Option<DominantDecomposition> {
    let d = dec.a2.nrows();
    if d == 0 {
        return None;
    }
    let shifted = match dec.domain {
        Domain::Continuous => &dec.a2 - Matrix::identity(d, d) * dec.lambda1,
        Domain::Discrete if dec.lambda1 != 0.0 => &dec.a2 / dec.lambda1.abs(),
        Domain::Discrete => return None,
    };
    let inputs: Vec<Vector> = (0..dec.b0.len())
        .filter(|&j| dec.b0[j].abs() > RESIDUE_ZERO * dec.b0[j].abs().max(dec.b2.column(j).norm()))
        .map(|j| dec.b2.column(j) / dec.b0[j])
        .collect();
    let outputs: Vec<Vector> = (0..dec.c0.len())
        .filter(|&i| dec.c0[i].abs() > RESIDUE_ZERO * dec.c0[i].abs().max(dec.c2.row(i).norm()))
        .map(|i| dec.c2.row(i).transpose() / dec.c0[i])
        .collect();
    if inputs.is_empty() || outputs.is_empty() {
        return None;
    }
    let b = Matrix::from_columns(&inputs);
    let c = Matrix::from_columns(&outputs);
    let wc = symmetrize(&solve_lyapunov(&shifted.transpose(), &(&b * b.transpose()), dec.domain).ok()?);
    let wo = symmetrize(&solve_lyapunov(&shifted, &(&c * c.transpose()), dec.domain).ok()?);
    let ec = sym_eig(&wc).ok()?;
    let root = &ec.vectors * Matrix::from_diagonal(&ec.values.map(|v| v.max(0.0).sqrt()));
    let em = sym_eig(&symmetrize(&(root.transpose() * wo * &root))).ok()?;
    // σ^{1/2} for Hankel values σ
    let quarter = em.values.map(|v| v.max(0.0).sqrt().sqrt());
    if !(quarter.min() > BALANCE_MIN_RATIO * quarter.max()) {
        return None;
    }
    let s = root * em.vectors * Matrix::from_diagonal(&quarter.map(|x| 1.0 / x));
    let s_inv = inverse(&s).ok()?;
    let n = d + 1;
    let mut big = Matrix::identity(n, n);
    big.view_mut((1, 1), (d, d)).copy_from(&s);
    let mut big_inv = Matrix::identity(n, n);
    big_inv.view_mut((1, 1), (d, d)).copy_from(&s_inv);
    Some(DominantDecomposition {
        t: &dec.t * big,
        t_inv: big_inv * &dec.t_inv,
        a2: &s_inv * &dec.a2 * &s,
        b2: &s_inv * &dec.b2,
        c2: &dec.c2 * &s,
        ..dec.clone()
    })
}

/// Builds the certificate SDP at the pinned rate.
pub fn certificate_sdp(dec: &DominantDecomposition) -> CertificateSdp {
    let d = dec.a2.nrows();
    let mut problem = SdpProblem::new();
    let p1 = problem.add_sym(d);
    let p1e = AffineMat::sym(&p1);
    let rate = pinned_rate(dec);
    problem.add_lmi("P1", p1e.clone());
    problem.add_lmi(
        "invariance",
        deflated_invariance(dec, &p1e, rate).scale(1.0 / invariance_scale(dec)),
    );
    add_residue_constraints(&mut problem, dec, &p1e);
    CertificateSdp { problem, p1, rate }
}

/// Certificate SDP with the invariance condition in original coordinates at rate `ρ`.
fn full_coordinate_sdp(sys: &StateSpace, dec: &DominantDecomposition, rate: f64) -> CertificateSdp {
    let n = dec.order();
    let d = n - 1;
    let mut problem = SdpProblem::new();
    let p1 = problem.add_sym(d);
    let p1e = AffineMat::sym(&p1);
    let blk = AffineMat::blocks(
        &[
            vec![Some(AffineMat::constant(Matrix::from_element(1, 1, -1.0))), None],
            vec![None, Some(p1e.clone())],
        ],
        &[1, d],
        &[1, d],
    );
    let p = blk.left(&dec.t_inv.transpose()).right(&dec.t_inv);
    let a = sys.a();
    let lhs = match dec.domain {
        Domain::Continuous => p.right(a).plus_transpose(),
        Domain::Discrete => p.left(&a.transpose()).right(a),
    };
    let scale = invariance_scale(dec) * dec.t_inv.norm().powi(2);
    problem.add_lmi("P1", p1e.clone());
    problem.add_lmi("invariance", lhs.sub(&p.scale(rate)).scale(-1.0 / scale));
    add_residue_constraints(&mut problem, dec, &p1e);
    CertificateSdp { problem, p1, rate }
}

/// SDP attempt on a prechecked system, with the least-violating `P1`.
#[derive(Debug, Clone)]
pub struct SdpAttempt {
    pub solution: SdpSolution,
    pub p1: Matrix,
    pub rate: f64,
}

fn infeasible_attempt(d: usize, rate: f64, why: String) -> SdpAttempt {
    SdpAttempt {
        solution: SdpSolution {
            status: SdpStatus::Infeasible,
            x: Vector::zeros(0),
            slack: f64::NEG_INFINITY,
            objective: None,
            iterations: 0,
            residuals: Vec::new(),
            diagnostics: Some(why),
        },
        p1: Matrix::identity(d, d),
        rate,
    }
}

/// Solves the pinned-rate certificate SDP (max-slack feasibility mode).
pub fn solve_certificate_sdp(dec: &DominantDecomposition, opts: &SdpOptions) -> Result<SdpAttempt> {
    let d = dec.a2.nrows();
    if let Some(why) = degenerate_residues(dec) {
        return Ok(infeasible_attempt(d, pinned_rate(dec), why));
    }
    let cs = certificate_sdp(dec);
    let solution = sdp::solve(&cs.problem, opts)?;
    let p1 = cs.p1.value(&solution.x);
    Ok(SdpAttempt {
        solution,
        p1,
        rate: cs.rate,
    })
}

fn rate_search(sys: &StateSpace, dec: &DominantDecomposition, opts: &SdpOptions) -> Result<Option<SdpAttempt>> {
    let pinned = pinned_rate(dec);
    let width = match dec.domain {
        Domain::Continuous => dec.gap.min(1.0 + pinned.abs()),
        Domain::Discrete => (pinned - (dec.lambda1.abs() - dec.gap).max(0.0).powi(2)).min(pinned),
    };
    if !(width > 0.0) || !width.is_finite() {
        return Ok(None);
    }
    let opts = &SdpOptions {
        exact_slack: true,
        ..opts.clone()
    };
    // golden-section search for the rate with the largest slack
    let eval = |rate: f64| -> Result<SdpAttempt> {
        let cs = full_coordinate_sdp(sys, dec, rate);
        let solution = sdp::solve(&cs.problem, opts)?;
        let p1 = cs.p1.value(&solution.x);
        Ok(SdpAttempt { solution, p1, rate })
    };
    let phi = 0.5 * (5f64.sqrt() - 1.0);
    let (mut lo, mut hi) = (pinned - width, pinned);
    let mut best: Option<SdpAttempt> = None;
    let keep = |att: SdpAttempt, best: &mut Option<SdpAttempt>| {
        let s = att.solution.slack;
        if best.as_ref().map(|b| s > b.solution.slack).unwrap_or(true) {
            *best = Some(att);
        }
        s
    };
    let mut x1 = hi - phi * (hi - lo);
    let mut x2 = lo + phi * (hi - lo);
    let mut f1 = keep(eval(x1)?, &mut best);
    let mut f2 = keep(eval(x2)?, &mut best);
    for _ in 0..24 {
        if best.as_ref().is_some_and(|b| b.solution.is_feasible()) {
            break;
        }
        if f1 < f2 {
            lo = x1;
            x1 = x2;
            f1 = f2;
            x2 = lo + phi * (hi - lo);
            f2 = keep(eval(x2)?, &mut best);
        } else {
            hi = x2;
            x2 = x1;
            f2 = f1;
            x1 = hi - phi * (hi - lo);
            f1 = keep(eval(x1)?, &mut best);
        }
    }
    Ok(best)
}

/// Independent re-check of every certificate condition with numkernel only.
pub fn verify_certificate(sys: &StateSpace, cert: &Certificate, tol: f64) -> Result<VerificationReport> {
    let dec = &cert.decomposition;
    let n = dec.order();
    let lifted;
    let sys = if sys.order() == 0 {
        lifted = lift_order_zero(sys)?;
        &lifted
    } else {
        sys
    };
    if sys.order() != n || cert.p1.shape() != (n - 1, n - 1) {
        return Err(Error::ShapeMismatch(format!(
            "certificate for order {n} applied to order {}",
            sys.order()
        )));
    }
    let mut res: Vec<(String, f64)> = Vec::new();
    let p1 = symmetrize(&cert.p1);
    let dmax = sys.d().amax().max(residue_scale(sys));
    for ((i, j), v) in sys.d().iter().enumerate().map(|(k, v)| ((k % sys.outputs(), k / sys.outputs()), v)) {
        res.push((format!("direct[{i},{j}]"), v / dmax));
    }

    if n == 1 {
        // scalar rule: h = C·B·λ₁^k or C·B·e^{λ₁t}
        let cb = sys.c() * sys.b();
        let scale = residue_scale(sys);
        res.push(("markov".into(), min_entry(&cb).min(0.0) / scale));
        if sys.domain() == Domain::Discrete && cb.amax() > tol * scale {
            res.push(("dominant_sign".into(), dec.lambda1.min(0.0) / dec.lambda1.abs().max(1.0)));
        }
    } else {
        let p1n = p1.norm().max(ABS_FLOOR);
        if sys.domain() == Domain::Discrete {
            res.push((
                "dominant_sign".into(),
                dec.lambda1.min(0.0) / dec.lambda1.abs().max(dec.a2.norm()).max(ABS_FLOOR),
            ));
        }
        res.push(("P1".into(), min_eigenvalue(&p1)? / p1n));
        let pinned = pinned_rate(dec);
        res.push((
            "rate".into(),
            (pinned - cert.rate).min(0.0) / invariance_scale(dec),
        ));
        let inv = match dec.domain {
            Domain::Continuous => dec.a2.transpose() * &p1 + &p1 * &dec.a2 - &p1 * cert.rate,
            Domain::Discrete => dec.a2.transpose() * &p1 * &dec.a2 - &p1 * cert.rate,
        };
        res.push((
            "invariance".into(),
            -max_eigenvalue(&symmetrize(&inv))? / (invariance_scale(dec) * p1n),
        ));
        for j in 0..dec.b0.len() {
            let b2 = dec.b2.column(j);
            let quad = b2.dot(&(&p1 * b2));
            let scale = (dec.b0[j] * dec.b0[j] + b2.norm_squared() * p1n).max(ABS_FLOOR);
            res.push((format!("input[{j}]"), (dec.b0[j] * dec.b0[j] - quad) / scale));
            let s = dec.b0[j].abs().max(b2.norm()).max(ABS_FLOOR);
            res.push((format!("input_sign[{j}]"), dec.b0[j].min(0.0) / s));
        }
        for i in 0..dec.c0.len() {
            let c2 = dec.c2.row(i);
            let d = n - 1;
            let mut m = Matrix::zeros(n, n);
            m.view_mut((0, 0), (d, d)).copy_from(&p1);
            m.view_mut((0, d), (d, 1)).copy_from(&c2.transpose());
            m.view_mut((d, 0), (1, d)).copy_from(&c2);
            m[(d, d)] = dec.c0[i] * dec.c0[i];
            let scale = m.norm().max(ABS_FLOOR);
            res.push((format!("output[{i}]"), min_eigenvalue(&m)? / scale));
            let s = dec.c0[i].abs().max(c2.norm()).max(ABS_FLOOR);
            res.push((format!("output_sign[{i}]"), dec.c0[i].min(0.0) / s));
        }

        // the same facts in original coordinates
        let cone = &cert.cone;
        let pn = cone.p().norm().max(ABS_FLOOR);
        let pin = cone.p_inv().norm().max(ABS_FLOOR);
        for j in 0..sys.inputs() {
            let x: Vector = sys.b().column(j).into_owned();
            let xn = x.norm();
            let r = if xn == 0.0 {
                0.0
            } else {
                (-cone.form(&x) / (xn * xn * pn)).min(cone.orientation(&x) / (xn * pn))
            };
            res.push((format!("cone_input[{j}]"), r));
        }
        for i in 0..sys.outputs() {
            let y: Vector = sys.c().row(i).transpose();
            let yn = y.norm();
            let r = if yn == 0.0 {
                0.0
            } else {
                (-y.dot(&(cone.p_inv() * &y)) / (yn * yn * pin)).min(cone.axis().dot(&y) / yn)
            };
            res.push((format!("cone_output[{i}]"), r));
        }
        let r = invariance_residual(cone, sys.a(), cert.rate, sys.domain());
        let a_scale = match sys.domain() {
            Domain::Continuous => sys.a().norm() + cert.rate.abs(),
            Domain::Discrete => sys.a().norm().powi(2) + cert.rate.abs(),
        }
        .max(ABS_FLOOR);
        res.push(("cone_invariance".into(), -max_eigenvalue(&r)? / (a_scale * pn)));
    }

    let worst = res
        .iter()
        .min_by(|a, b| a.1.total_cmp(&b.1))
        .cloned();
    let passed = res.iter().all(|(_, v)| v.is_finite() && *v >= -tol);
    Ok(VerificationReport {
        residuals: res,
        passed,
        worst,
    })
}

pub(crate) fn assemble(
    sys: &StateSpace,
    dec: DominantDecomposition,
    p1: Matrix,
    rate: f64,
    slack: f64,
    tol: f64,
) -> Result<std::result::Result<Certificate, String>> {
    let p1 = symmetrize(&p1);
    let cone = match EllipsoidalCone::from_deflated(1.0, &p1, &dec.t) {
        Ok(c) => c,
        Err(e) => return Ok(Err(format!("cone assembly failed: {e}"))),
    };
    let mut cert = Certificate {
        cone,
        rate,
        p0: 1.0,
        p1,
        residuals: Vec::new(),
        decomposition: dec,
        slack,
    };
    let report = verify_certificate(sys, &cert, tol)?;
    cert.residuals = report.residuals;
    if report.passed {
        Ok(Ok(cert))
    } else {
        let (name, v) = report.worst.unwrap_or_default();
        Ok(Err(format!("verification failed on {name} ({v:.3e})")))
    }
}

fn not_certified(
    sys: &StateSpace,
    reason: Reason,
    detail: String,
    opts: &CertifyOptions,
) -> CertifyOutcome {
    if opts.falsify {
        if let Some(cx) = falsify_by_sampling(sys, &opts.falsify_opts) {
            return CertifyOutcome::Refuted(cx);
        }
    }
    CertifyOutcome::NotCertified { reason, detail }
}

/// Main entry point: certify, otherwise try to refute.
pub fn certify_soc(sys: &StateSpace, opts: &CertifyOptions) -> CertifyOutcome {
    match certify_inner(sys, opts) {
        Ok(o) => o,
        Err(e) => not_certified(sys, Reason::SdpMarginal, format!("numerical failure: {e}"), opts),
    }
}

fn certify_inner(sys: &StateSpace, opts: &CertifyOptions) -> Result<CertifyOutcome> {
    let lifted;
    let work = if sys.order() == 0 {
        lifted = lift_order_zero(sys)?;
        &lifted
    } else {
        sys
    };
    let tol = opts.verify_tol;
    let dec = match precheck(work, tol)? {
        Precheck::Ready(d) => d,
        Precheck::Reject { reason, detail } => return Ok(not_certified(sys, reason, detail, opts)),
    };

    if work.order() == 1 {
        let cb = work.c() * work.b();
        let scale = residue_scale(work);
        if min_entry(&cb) < -tol * scale {
            return Ok(not_certified(
                sys,
                Reason::NegativeDominantResidue,
                "C·B has a negative entry".into(),
                opts,
            ));
        }
        let rate = pinned_rate(&dec);
        return Ok(match assemble(work, dec, Matrix::zeros(0, 0), rate, f64::INFINITY, tol)? {
            Ok(c) => CertifyOutcome::Certified(Box::new(c)),
            Err(detail) => not_certified(sys, Reason::SdpMarginal, detail, opts),
        });
    }

    // balanced ξ₂ first, then the coordinates the Schur form produced
    let candidates: Vec<DominantDecomposition> = balanced_decomposition(&dec).into_iter().chain([dec]).collect();
    let mut outcome = None;
    for dec in &candidates {
        let attempt = solve_certificate_sdp(dec, &opts.sdp)?;
        let mut status = attempt.solution.status;
        let mut detail = attempt
            .solution
            .diagnostics
            .clone()
            .unwrap_or_else(|| format!("max slack {:.3e}", attempt.solution.slack));
        if status != SdpStatus::Infeasible {
            // Feasible points are always re-verified; Marginal points are accepted
            // only if they pass the same verification.
            match assemble(work, dec.clone(), attempt.p1.clone(), attempt.rate, attempt.solution.slack, tol)? {
                Ok(c) => return Ok(CertifyOutcome::Certified(Box::new(c))),
                Err(why) => {
                    status = SdpStatus::Marginal;
                    detail = why;
                }
            }
        }
        outcome.get_or_insert((status, detail));
    }
    let (status, detail) = outcome.expect("at least one decomposition");
    let dec = &candidates[0];
    if opts.rate_search && work.order() > 1 {
        if let Some(att) = rate_search(work, dec, &opts.sdp)? {
            if att.solution.status != SdpStatus::Infeasible {
                if let Ok(c) = assemble(work, dec.clone(), att.p1, att.rate, att.solution.slack, tol)? {
                    return Ok(CertifyOutcome::Certified(Box::new(c)));
                }
            }
        }
    }
    let reason = if status == SdpStatus::Infeasible {
        Reason::SdpInfeasible
    } else {
        Reason::SdpMarginal
    };
    Ok(not_certified(sys, reason, detail, opts))
}

/// Nonnegative-orthant invariance (Metzler / nonnegative `A`, `B`, `C`, `D`).
pub fn certify_internal(sys: &StateSpace) -> bool {
    polyhedral_internal_positivity(sys, crate::cone::DEFAULT_TOL)
}

fn impulse_at(sys: &StateSpace, t: f64, o: usize, i: usize) -> f64 {
    match expm(&(sys.a() * t)) {
        Ok(e) => (sys.c().row(o) * e * sys.b().column(i))[(0, 0)],
        Err(_) => f64::NAN,
    }
}

fn golden_min(f: impl Fn(f64) -> f64, mut lo: f64, mut hi: f64) -> (f64, f64) {
    let phi = 0.5 * (5f64.sqrt() - 1.0);
    let mut x1 = hi - phi * (hi - lo);
    let mut x2 = lo + phi * (hi - lo);
    let mut f1 = f(x1);
    let mut f2 = f(x2);
    for _ in 0..60 {
        if (hi - lo) <= 1e-12 * hi.abs().max(1.0) {
            break;
        }
        if f1 < f2 {
            hi = x2;
            x2 = x1;
            f2 = f1;
            x1 = hi - phi * (hi - lo);
            f1 = f(x1);
        } else {
            lo = x1;
            x1 = x2;
            f1 = f2;
            x2 = lo + phi * (hi - lo);
            f2 = f(x2);
        }
    }
    if f1 < f2 {
        (x1, f1)
    } else {
        (x2, f2)
    }
}

/// Continuous horizon: ten time constants of the slower of the decay rate and
/// the dominance gap, capped.
pub fn adaptive_horizon(sys: &StateSpace, opts: &FalsifyOptions) -> f64 {
    let a_norm = sys.a().norm();
    let floor = if a_norm > 0.0 { 20.0 / a_norm } else { opts.max_horizon };
    let Ok(eigs) = eigenvalues(sys.a()) else {
        return opts.max_horizon;
    };
    if eigs.is_empty() {
        return floor.min(opts.max_horizon);
    }
    let alpha = eigs.iter().map(|z| z.re).fold(f64::NEG_INFINITY, f64::max);
    let tol = 1e-9 * a_norm.max(ABS_FLOOR);
    let next = eigs
        .iter()
        .map(|z| z.re)
        .filter(|re| *re < alpha - tol)
        .fold(f64::NEG_INFINITY, f64::max);
    let gap = alpha - next;
    let slow = gap.min(alpha.abs());
    let horizon = if slow > 0.0 { 10.0 / slow } else { f64::INFINITY };
    horizon.max(floor).min(opts.max_horizon)
}

pub fn discrete_horizon(sys: &StateSpace, opts: &FalsifyOptions) -> usize {
    let n = sys.order();
    let min_steps = n + 20;
    let Ok(eigs) = eigenvalues(sys.a()) else {
        return opts.max_steps;
    };
    let rho = eigs.iter().map(|z| z.norm()).fold(0.0, f64::max);
    if rho <= ABS_FLOOR {
        return min_steps.min(opts.max_steps.max(min_steps));
    }
    let next = eigs
        .iter()
        .map(|z| z.norm())
        .filter(|m| *m < rho * (1.0 - 1e-9))
        .fold(0.0, f64::max);
    let log_gap = if next > 0.0 { (rho / next).ln() } else { f64::INFINITY };
    let slow = log_gap.min(rho.ln().abs());
    let k = if slow > 0.0 { (10.0 / slow).ceil() } else { f64::INFINITY };
    if k.is_finite() {
        (k as usize).clamp(min_steps, opts.max_steps.max(min_steps))
    } else {
        opts.max_steps.max(min_steps)
    }
}

/// Spectral abscissa (continuous) or log spectral radius (discrete), the
/// exponential envelope rate of the impulse response.
fn envelope_rate(sys: &StateSpace) -> f64 {
    let Ok(eigs) = eigenvalues(sys.a()) else {
        return 0.0;
    };
    let r = match sys.domain() {
        Domain::Continuous => eigs.iter().map(|z| z.re).fold(f64::NEG_INFINITY, f64::max),
        Domain::Discrete => eigs.iter().map(|z| z.norm()).fold(0.0, f64::max).ln(),
    };
    if r.is_finite() {
        r
    } else {
        0.0
    }
}

struct Sample {
    time: f64,
    output: usize,
    input: usize,
    value: f64,
    /// `e^{−rt}·value`, the value relative to the decay envelope.
    scaled: f64,
}

/// Searches the sampled impulse response for a strictly negative value.
///
/// Samples are ranked, and local minima refined, on the envelope-compensated
/// response `e^{−rt}·h(t)` so a late dip of a slowly decaying mode is not
/// masked by larger early values; the reported value is the raw `h(t)`.
pub fn falsify_by_sampling(sys: &StateSpace, opts: &FalsifyOptions) -> Option<Counterexample> {
    let (p, m) = (sys.outputs(), sys.inputs());
    let mut samples: Vec<Sample> = Vec::new();
    let mut peak = sys.d().amax();
    let rate = if sys.order() > 0 { envelope_rate(sys) } else { 0.0 };
    let weight = |t: f64| (-rate * t).exp().min(1e300);
    let mut cluster = 0.5;
    for o in 0..p {
        for i in 0..m {
            let v = sys.d()[(o, i)];
            samples.push(Sample { time: 0.0, output: o, input: i, value: v, scaled: v });
        }
    }

    if sys.order() > 0 {
        match sys.domain() {
            Domain::Discrete => {
                let steps = discrete_horizon(sys, opts);
                let mut x = sys.b().clone();
                for k in 1..=steps {
                    let h = sys.c() * &x;
                    let w = weight(k as f64);
                    for o in 0..p {
                        for i in 0..m {
                            let v = h[(o, i)];
                            peak = peak.max(v.abs());
                            samples.push(Sample { time: k as f64, output: o, input: i, value: v, scaled: v * w });
                        }
                    }
                    x = sys.a() * x;
                    if !x.iter().all(|v| v.is_finite()) {
                        break;
                    }
                }
            }
            Domain::Continuous => {
                let horizon = adaptive_horizon(sys, opts);
                let a_norm = sys.a().norm();
                let window = if a_norm > 0.0 { (10.0 / a_norm).min(horizon) } else { horizon };
                let points = opts.points.max(16);
                let grids = [(horizon, points), (window, (points / 4).max(16))];
                cluster = 2.0 * horizon / (points - 1) as f64;
                for (h_end, np) in grids {
                    let Ok(series) = crate::lti::impulse_response(sys, h_end, np) else {
                        continue;
                    };
                    peak = peak.max(series.peak());
                    for o in 0..p {
                        for i in 0..m {
                            let ch: Vec<f64> = series
                                .channel(o, i)
                                .iter()
                                .zip(&series.times)
                                .map(|(v, t)| v * weight(*t))
                                .collect();
                            for k in 0..ch.len() {
                                let g = ch[k];
                                let t = series.times[k];
                                samples.push(Sample { time: t, output: o, input: i, value: series.values[k][(o, i)], scaled: g });
                                let left = if k > 0 { ch[k - 1] } else { f64::INFINITY };
                                let right = if k + 1 < ch.len() { ch[k + 1] } else { f64::INFINITY };
                                if g < 0.0 && g <= left && g <= right {
                                    let lo = series.times[k.saturating_sub(1)];
                                    let hi = series.times[(k + 1).min(ch.len() - 1)];
                                    if hi > lo {
                                        let (tr, gr) = golden_min(|t| impulse_at(sys, t, o, i) * weight(t), lo, hi);
                                        let v = impulse_at(sys, tr, o, i);
                                        samples.push(Sample { time: tr, output: o, input: i, value: v, scaled: gr });
                                    }
                                }
                            }
                        }
                    }
                }
            }
        }
    }

    let threshold = opts.refute_tol + opts.refute_rel * peak;
    let negative: Vec<Sample> = samples
        .into_iter()
        .filter(|s| s.value.is_finite() && s.scaled.is_finite() && s.value < -threshold)
        .collect();
    let lowest = negative.iter().map(|s| s.scaled).fold(f64::INFINITY, f64::min);
    // periodic responses have equal envelope minima; report the earliest one
    let first = negative
        .iter()
        .filter(|s| s.scaled <= lowest + 1e-6 * lowest.abs())
        .map(|s| s.time)
        .fold(f64::INFINITY, f64::min);
    let best = negative
        .into_iter()
        .filter(|s| s.time <= first + cluster)
        .min_by(|a, b| a.scaled.total_cmp(&b.scaled))?;
    Some(Counterexample {
        time: best.time,
        output: best.output,
        input: best.input,
        value: best.value,
        relative: best.value / peak.max(ABS_FLOOR),
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_abs_diff_eq;

    fn ct(a: &[f64], n: usize, b: &[f64], c: &[f64], d: f64) -> StateSpace {
        StateSpace::new(
            Matrix::from_row_slice(n, n, a),
            Matrix::from_column_slice(n, 1, b),
            Matrix::from_row_slice(1, n, c),
            Matrix::from_element(1, 1, d),
            Domain::Continuous,
        )
        .unwrap()
    }

    #[test]
    fn scalar_rule() {
        let sys = ct(&[-1.0], 1, &[1.0], &[1.0], 0.0);
        let out = certify_soc(&sys, &CertifyOptions::default());
        assert!(out.is_certified(), "{out:?}");
        let neg = ct(&[-1.0], 1, &[1.0], &[-1.0], 0.0);
        assert!(neg.order() == 1);
        assert!(certify_soc(&neg, &CertifyOptions::default()).is_refuted());
    }

    #[test]
    fn two_state_certified() {
        let sys = ct(&[-2.0, 1.0, 1.0, -2.0], 2, &[1.0, 0.0], &[0.0, 1.0], 0.0);
        let out = certify_soc(&sys, &CertifyOptions::default());
        let cert = out.certificate().expect("certified");
        assert_abs_diff_eq!(cert.rate, -2.0, epsilon = 1e-9);
        // the only feasible P1 is 1 for this realization's normalization
        assert_abs_diff_eq!(cert.p1[(0, 0)], 1.0, epsilon = 1e-4);
        assert!(cert.residuals.iter().all(|(_, v)| *v >= -1e-6));
    }

    #[test]
    fn oscillatory_refuted_near_half_pi() {
        let sys = ct(&[-1.0, -2.0, 2.0, -1.0], 2, &[1.0, 0.0], &[1.0, 0.0], 0.0);
        match certify_soc(&sys, &CertifyOptions::default()) {
            CertifyOutcome::Refuted(cx) => {
                assert_abs_diff_eq!(cx.time, std::f64::consts::FRAC_PI_2, epsilon = 1e-4);
                assert_abs_diff_eq!(cx.value, -(-std::f64::consts::FRAC_PI_2).exp(), epsilon = 1e-7);
            }
            other => panic!("expected refutation, got {other:?}"),
        }
    }

    #[test]
    fn corrupted_certificate_fails_verification() {
        let sys = ct(
            &[-1.0, 0.0, 0.0, 0.0, -2.0, 0.5, 0.0, 0.0, -3.0],
            3,
            &[1.0, 0.3, 0.2],
            &[1.0, 0.2, 0.1],
            0.0,
        );
        let out = certify_soc(&sys, &CertifyOptions::default());
        let mut cert = out.certificate().expect("certified").clone();
        cert.p1[(0, 0)] = -cert.p1[(0, 0)];
        let rep = verify_certificate(&sys, &cert, 1e-6).unwrap();
        assert!(!rep.passed);
    }

    #[test]
    fn negative_direct_term_refuted_at_zero() {
        let sys = ct(&[-1.0, 0.0, 0.0, -2.0], 2, &[1.0, 1.0], &[1.0, 1.0], -1.0);
        let cx = falsify_by_sampling(&sys, &FalsifyOptions::default()).unwrap();
        assert_eq!(cx.time, 0.0);
        assert_eq!(cx.value, -1.0);
    }

    #[test]
    fn certified_example_not_falsified() {
        let sys = ct(&[-2.0, 1.0, 1.0, -2.0], 2, &[1.0, 0.0], &[0.0, 1.0], 0.0);
        assert!(falsify_by_sampling(&sys, &FalsifyOptions::default()).is_none());
    }

    #[test]
    fn complex_dominant_reason() {
        // e^{-t}(cos 2t) plus a large positive slow term keeps h positive
        let sys = ct(
            &[-1.0, -2.0, 0.0, 2.0, -1.0, 0.0, 0.0, 0.0, -3.0],
            3,
            &[0.1, 0.0, 1.0],
            &[1.0, 0.0, 1.0],
            0.0,
        );
        let out = certify_soc(
            &sys,
            &CertifyOptions {
                falsify: false,
                ..Default::default()
            },
        );
        assert_eq!(out.reason(), Some(Reason::ComplexDominant));
    }

    #[test]
    fn order_zero_uses_direct_term() {
        let sys = StateSpace::new(
            Matrix::zeros(0, 0),
            Matrix::zeros(0, 1),
            Matrix::zeros(1, 0),
            Matrix::from_element(1, 1, 2.0),
            Domain::Continuous,
        )
        .unwrap();
        assert!(certify_soc(&sys, &CertifyOptions::default()).is_certified());
        let neg = sys.with_d(Matrix::from_element(1, 1, -2.0)).unwrap();
        assert!(certify_soc(&neg, &CertifyOptions::default()).is_refuted());
    }

    #[test]
    fn discrete_positive_system() {
        let sys = StateSpace::new(
            Matrix::from_row_slice(2, 2, &[0.5, 0.1, 0.0, 0.2]),
            Matrix::from_column_slice(2, 1, &[1.0, 1.0]),
            Matrix::from_row_slice(1, 2, &[1.0, 0.5]),
            Matrix::zeros(1, 1),
            Domain::Discrete,
        )
        .unwrap();
        assert!(certify_internal(&sys));
        assert!(certify_soc(&sys, &CertifyOptions::default()).is_certified());
    }

    #[test]
    fn rate_search_still_certifies() {
        let sys = ct(
            &[-1.0, 0.0, 0.0, 0.0, -2.0, 0.5, 0.0, 0.0, -3.0],
            3,
            &[1.0, 0.3, 0.2],
            &[1.0, 0.2, 0.1],
            0.0,
        );
        let dec = match precheck(&sys, 1e-6).unwrap() {
            Precheck::Ready(d) => d,
            _ => panic!(),
        };
        let att = rate_search(&sys, &dec, &SdpOptions::default()).unwrap().unwrap();
        assert!(att.solution.is_feasible());
        assert!(att.rate < 2.0 * dec.lambda1 + 1e-12);
    }
}
