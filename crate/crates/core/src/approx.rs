//! Externally positive approximation: move `B`, `C` and `D` as little as
//! possible (Frobenius distance in the original coordinates) until the
//! second-order cone certificate holds. `A` is never modified.
//!
//! Each half-step is a convex SDP. The output step alternates between
//!
//! * a joint solve in `(P1, Ĉ2)` with the dominant residues `c0` fixed, and
//! * a solve over the whole row `Ĉ` with `P1` fixed, where the output
//!   condition becomes a second-order cone constraint `‖P1^{-1/2}Ĉ2ᵀ‖ ≤ ĉ0`.
//!
//! The input step is the output step applied to the dual system
//! `(Aᵀ, Cᵀ, Bᵀ, Dᵀ)`, whose impulse response is `hᵀ`.

use crate::certify::{
    certify_soc, deflated_invariance, invariance_scale, pinned_rate, Certificate, CertifyOptions, CertifyOutcome,
};
use crate::error::{Error, Result};
use crate::lti::{dominant_decomposition, DominantDecomposition, DominantOutcome, StateSpace};
use crate::numkernel::{Domain, Matrix, Vector, ABS_FLOOR};
use crate::sdp::{self, AffineMat, SdpOptions, SdpProblem, SdpStatus};

const RESIDUE_ZERO: f64 = 1e-10;

#[derive(Debug, Clone)]
pub struct ApproxOptions {
    pub sdp: SdpOptions,
    pub certify: CertifyOptions,
    /// Every certificate condition is tightened by this much (normalized units)
    /// so the returned system is certified with room to spare.
    pub margin: f64,
    /// Output/input rounds of the alternating mode.
    pub max_rounds: usize,
    /// Joint/row-wise sweeps inside one half-step.
    pub inner_rounds: usize,
    /// Stop once a round decreases the distance by less than this.
    pub decrease_tol: f64,
    /// Weight of `trace(P1)` added to the distance objective.
    pub trace_weight: f64,
}

impl Default for ApproxOptions {
    fn default() -> Self {
        Self {
            // P1 may grow without bound in unexcited directions; a smaller
            // ball keeps the Newton systems well conditioned
            sdp: SdpOptions {
                radius: 1e4,
                ..SdpOptions::default()
            },
            certify: CertifyOptions::default(),
            margin: 2e-7,
            max_rounds: 10,
            inner_rounds: 20,
            decrease_tol: 1e-8,
            trace_weight: 1e-9,
        }
    }
}

/// Frobenius norms of the parameter changes.
#[derive(Debug, Clone, Copy, Default, PartialEq)]
pub struct Distance {
    pub b: f64,
    pub c: f64,
    pub d: f64,
    pub total: f64,
}

impl Distance {
    pub fn between(orig: &StateSpace, new: &StateSpace) -> Self {
        let b = (new.b() - orig.b()).norm();
        let c = (new.c() - orig.c()).norm();
        let d = (new.d() - orig.d()).norm();
        Self {
            b,
            c,
            d,
            total: (b * b + c * c + d * d).sqrt(),
        }
    }
}

#[derive(Debug, Clone)]
pub struct ApproxResult {
    pub system: StateSpace,
    pub certificate: Certificate,
    pub distance: Distance,
    /// Number of convex solves.
    pub iterations: usize,
    /// Total distance after every accepted step.
    pub objective_trace: Vec<f64>,
}

/// Closest certified `Ĉ` with `A`, `B` fixed.
pub fn approximate_output(sys: &StateSpace, opts: &ApproxOptions) -> Result<ApproxResult> {
    run(sys, opts, Mode::Output)
}

/// Closest certified `B̂` with `A`, `C` fixed.
pub fn approximate_input(sys: &StateSpace, opts: &ApproxOptions) -> Result<ApproxResult> {
    run(sys, opts, Mode::Input)
}

/// Alternates output and input steps, each measured against the original system.
pub fn approximate_alternating(sys: &StateSpace, opts: &ApproxOptions) -> Result<ApproxResult> {
    run(sys, opts, Mode::Alternating)
}

#[derive(Debug, Clone, Copy, PartialEq)]
enum Mode {
    Output,
    Input,
    Alternating,
}

fn dual(sys: &StateSpace) -> Result<StateSpace> {
    StateSpace::new(
        sys.a().transpose(),
        sys.c().transpose(),
        sys.b().transpose(),
        sys.d().transpose(),
        sys.domain(),
    )
}

fn simple_decomposition(sys: &StateSpace) -> Result<DominantDecomposition> {
    match dominant_decomposition(sys)? {
        DominantOutcome::Simple(d) => Ok(d),
        DominantOutcome::NotSimpleReal(why) => Err(Error::Precondition(format!(
            "dominant eigenvalue is not simple and real: {why:?}"
        ))),
    }
}

/// Sets wrong-signed dominant output residues to zero (`ΔC = Δc₀·vᵀ-dual`).
fn clip_output_residues(sys: &StateSpace) -> Result<StateSpace> {
    if sys.order() == 0 {
        return Ok(sys.clone());
    }
    let dec = simple_decomposition(sys)?;
    let mut cd = sys.c() * &dec.t;
    for i in 0..cd.nrows() {
        if cd[(i, 0)] < 0.0 {
            cd[(i, 0)] = 0.0;
        }
    }
    sys.with_c(cd * &dec.t_inv)
}

fn clip_input_residues(sys: &StateSpace) -> Result<StateSpace> {
    let d = clip_output_residues(&dual(sys)?)?;
    sys.with_b(d.c().transpose())
}

fn clip_direct(sys: &StateSpace) -> Result<StateSpace> {
    sys.with_d(sys.d().map(|v| v.max(0.0)))
}

fn run(sys: &StateSpace, opts: &ApproxOptions, mode: Mode) -> Result<ApproxResult> {
    if let CertifyOutcome::Certified(cert) = certify_soc(sys, &opts.certify) {
        return Ok(ApproxResult {
            system: sys.clone(),
            certificate: *cert,
            distance: Distance::default(),
            iterations: 0,
            objective_trace: vec![0.0],
        });
    }
    if sys.order() == 0 {
        // a static gain only needs D ≥ 0
        let system = clip_direct(sys)?;
        return finish(sys, system, 0, vec![], opts);
    }

    let mut current = clip_direct(sys)?;
    current = match mode {
        Mode::Output => clip_output_residues(&current)?,
        Mode::Input => clip_input_residues(&current)?,
        Mode::Alternating => clip_input_residues(&clip_output_residues(&current)?)?,
    };
    let mut solves = 0;
    let mut trace = Vec::new();

    match mode {
        Mode::Output => {
            let (c, steps) = improve_output(&current, sys.c(), opts)?;
            solves += steps.solves;
            current = current.with_c(c)?;
            push_trace(&mut trace, sys, &current, &steps.distances, Side::Output);
        }
        Mode::Input => {
            let (b, steps) = improve_output(&dual(&current)?, &sys.b().transpose(), opts)?;
            solves += steps.solves;
            current = current.with_b(b.transpose())?;
            push_trace(&mut trace, sys, &current, &steps.distances, Side::Input);
        }
        Mode::Alternating => {
            // the first half-step must reach a certified system from one side
            let mut last_side = Side::Output;
            match improve_output(&current, sys.c(), opts) {
                Ok((c, steps)) => {
                    solves += steps.solves;
                    current = current.with_c(c)?;
                    push_trace(&mut trace, sys, &current, &steps.distances, Side::Output);
                }
                Err(first) => {
                    let (b, steps) = improve_output(&dual(&current)?, &sys.b().transpose(), opts).map_err(|_| first)?;
                    solves += steps.solves;
                    current = current.with_b(b.transpose())?;
                    push_trace(&mut trace, sys, &current, &steps.distances, Side::Input);
                    last_side = Side::Input;
                }
            }
            let mut last = Distance::between(sys, &current).total;
            for _ in 0..opts.max_rounds {
                // each half-step starts from a certified point, so it cannot lose ground
                let side_order = match last_side {
                    Side::Output => [Side::Input, Side::Output],
                    Side::Input => [Side::Output, Side::Input],
                };
                for side in side_order {
                    last_side = side;
                    let step = match side {
                        Side::Output => improve_output(&current, sys.c(), opts)
                            .and_then(|(c, st)| Ok((current.with_c(c)?, st))),
                        Side::Input => improve_output(&dual(&current)?, &sys.b().transpose(), opts)
                            .and_then(|(b, st)| Ok((current.with_b(b.transpose())?, st))),
                    };
                    let Ok((candidate, st)) = step else { continue };
                    solves += st.solves;
                    let dist = Distance::between(sys, &candidate).total;
                    if dist <= Distance::between(sys, &current).total {
                        current = candidate;
                        push_trace(&mut trace, sys, &current, &st.distances, side);
                    }
                }
                let now = Distance::between(sys, &current).total;
                if last - now < opts.decrease_tol {
                    break;
                }
                last = now;
            }
        }
    }
    finish(sys, current, solves, trace, opts)
}

#[derive(Debug, Clone, Copy)]
enum Side {
    Output,
    Input,
}

/// Records the total distance for every accepted inner step, keeping the
/// trace nonincreasing.
fn push_trace(trace: &mut Vec<f64>, orig: &StateSpace, current: &StateSpace, side_dist: &[f64], side: Side) {
    let full = Distance::between(orig, current);
    let fixed = match side {
        Side::Output => full.b * full.b + full.d * full.d,
        Side::Input => full.c * full.c + full.d * full.d,
    };
    for &s in side_dist {
        let total = (fixed + s * s).sqrt();
        if trace.last().is_none_or(|&l| total <= l) {
            trace.push(total);
        }
    }
    if trace.last().is_none_or(|&l| full.total <= l) {
        trace.push(full.total);
    }
}

fn finish(
    orig: &StateSpace,
    system: StateSpace,
    iterations: usize,
    mut objective_trace: Vec<f64>,
    opts: &ApproxOptions,
) -> Result<ApproxResult> {
    let certificate = match certify_soc(&system, &opts.certify) {
        CertifyOutcome::Certified(c) => *c,
        other => {
            return Err(Error::NumericalBreakdown(format!(
                "approximation did not certify: {}",
                other.label()
            )))
        }
    };
    let distance = Distance::between(orig, &system);
    if objective_trace.is_empty() {
        objective_trace.push(distance.total);
    }
    Ok(ApproxResult {
        system,
        certificate,
        distance,
        iterations,
        objective_trace,
    })
}

struct Steps {
    /// `‖Ĉ − C_ref‖` after every accepted inner step.
    distances: Vec<f64>,
    solves: usize,
}

/// Output half-step: the best certified `Ĉ` found for `sys` (with its `A`,
/// `B` fixed), measured against `c_ref`.
fn improve_output(sys: &StateSpace, c_ref: &Matrix, opts: &ApproxOptions) -> Result<(Matrix, Steps)> {
    let dec = simple_decomposition(sys)?;
    if dec.negative_dominant_discrete() {
        return Err(Error::Precondition("discrete dominant eigenvalue is negative".into()));
    }
    let b_scale = dec.b0.amax().max(dec.b2.norm()).max(ABS_FLOOR);
    if dec.b0.iter().any(|&v| v < -RESIDUE_ZERO * b_scale) {
        return Err(Error::Precondition(
            "dominant input residues have mixed signs; B is held fixed".into(),
        ));
    }
    let n = dec.order();
    if n == 1 {
        // ĉ0 ≥ 0 is the whole condition
        let v = dec.t[(0, 0)];
        let c = c_ref.map(|x| (x * v).max(0.0) / v);
        let dist = (&c - c_ref).norm();
        return Ok((
            c,
            Steps {
                distances: vec![dist],
                solves: 0,
            },
        ));
    }
    if let Some(block) = infeasible_block(&dec) {
        return Err(Error::InfeasibleEvenAfterRelaxation(block));
    }

    let c0: Vec<f64> = (sys.c() * &dec.t).column(0).iter().map(|v| v.max(0.0)).collect();
    let mut solves = 1;
    let Some((mut p1, mut best)) = joint_step(&dec, &c0, c_ref, opts)? else {
        return Err(Error::InfeasibleEvenAfterRelaxation(
            "invariance and input conditions admit no P1 with the required margin".into(),
        ));
    };
    let mut best_dist = (&best - c_ref).norm();
    let mut distances = vec![best_dist];
    for _ in 0..opts.inner_rounds {
        let before = best_dist;
        solves += 1;
        if let Some(c) = row_step(&dec, &p1, c_ref, opts)? {
            let d = (&c - c_ref).norm();
            if d < best_dist {
                best = c;
                best_dist = d;
                distances.push(d);
            }
        }
        let c0: Vec<f64> = (&best * &dec.t).column(0).iter().map(|v| v.max(0.0)).collect();
        solves += 1;
        if let Ok(Some((p, c))) = joint_step(&dec, &c0, c_ref, opts) {
            let d = (&c - c_ref).norm();
            if d < best_dist {
                best = c;
                best_dist = d;
                p1 = p;
                distances.push(d);
            }
        }
        if before - best_dist <= 1e-10 * (1.0 + best_dist) {
            break;
        }
    }
    Ok((
        best,
        Steps {
            distances,
            solves,
        },
    ))
}

/// An input column with no dominant component but a nonzero remainder cannot
/// be fixed by moving `C`.
fn infeasible_block(dec: &DominantDecomposition) -> Option<String> {
    for j in 0..dec.b0.len() {
        let scale = dec.b0[j].abs().max(dec.b2.column(j).norm());
        if dec.b0[j] <= RESIDUE_ZERO * scale && dec.b2.column(j).norm() > RESIDUE_ZERO * scale {
            return Some(format!("input[{j}]: column has no dominant component"));
        }
    }
    None
}

fn tightened(expr: AffineMat, m: f64) -> AffineMat {
    let k = expr.shape().0;
    expr.add_constant(&(Matrix::identity(k, k) * -m))
}

/// Invariance, positivity and input conditions on `P1`, tightened by `m`.
fn add_state_conditions(prob: &mut SdpProblem, dec: &DominantDecomposition, p1: &AffineMat, m: f64) {
    let d = dec.a2.nrows();
    prob.add_lmi("P1", tightened(p1.clone(), m));
    prob.add_lmi(
        "invariance",
        tightened(
            deflated_invariance(dec, p1, pinned_rate(dec)).scale(1.0 / invariance_scale(dec)),
            m,
        ),
    );
    for j in 0..dec.b0.len() {
        let b0 = dec.b0[j];
        if b0 <= RESIDUE_ZERO * b0.abs().max(dec.b2.column(j).norm()) {
            continue;
        }
        let b2 = Matrix::from_iterator(d, 1, dec.b2.column(j).iter().map(|v| v / b0));
        let quad = p1.left(&b2.transpose()).right(&b2).scale(-1.0);
        prob.add_lmi(
            format!("input[{j}]"),
            quad.add_constant(&Matrix::from_element(1, 1, 1.0 - m)),
        );
    }
}

fn unit(k: usize, i: usize) -> Matrix {
    let mut e = Matrix::zeros(k, 1);
    e[(i, 0)] = 1.0;
    e
}

/// Joint convex step in `(P1, Ĉ2)` with `c0` fixed.
fn joint_step(
    dec: &DominantDecomposition,
    c0: &[f64],
    c_ref: &Matrix,
    opts: &ApproxOptions,
) -> Result<Option<(Matrix, Matrix)>> {
    let n = dec.order();
    let d = n - 1;
    let p = c0.len();
    let m = opts.margin;
    let w = dec.t_inv.rows(1, d).into_owned();
    let t0 = dec.t_inv.rows(0, 1).into_owned();

    let mut prob = SdpProblem::new();
    let tau = prob.add_scalar();
    let p1v = prob.add_sym(d);
    let p1 = AffineMat::sym(&p1v);
    add_state_conditions(&mut prob, dec, &p1, m);

    let c0_scale = c0.iter().fold(0.0_f64, |a, v| a.max(v.abs())).max(ABS_FLOOR);
    let mut err = AffineMat::constant(-c_ref.clone());
    let mut rows = Vec::with_capacity(p);
    for (i, &c0i) in c0.iter().enumerate() {
        let e = unit(p, i);
        err = err.add_constant(&(&e * &t0 * c0i));
        if c0i <= RESIDUE_ZERO * c0_scale {
            rows.push(None);
            continue;
        }
        let x = prob.add_mat(1, d);
        let xe = AffineMat::mat(&x);
        err = err.add(&xe.right(&w).left(&e));
        let ct = xe.transpose().scale(1.0 / c0i);
        let lmi = AffineMat::blocks(
            &[
                vec![Some(p1.clone()), Some(ct.clone())],
                vec![Some(ct.transpose()), Some(AffineMat::identity(1))],
            ],
            &[d, 1],
            &[d, 1],
        );
        prob.add_lmi(format!("output[{i}]"), tightened(lmi, m));
        rows.push(Some(x));
    }
    prob.add_lmi("distance", AffineMat::soc(&AffineMat::scalar(tau), &err.vec()));
    let mut c = Vector::zeros(prob.num_vars());
    c[tau] = 1.0;
    // P1 is unbounded in directions the inputs do not excite; a tiny trace
    // penalty keeps the optimum (and the Newton systems) bounded
    for i in 0..d {
        c[p1v.index(i, i)] = opts.trace_weight;
    }
    prob.set_objective(c);

    let sol = sdp::solve(&prob, &opts.sdp)?;
    match sol.status {
        SdpStatus::Feasible => {}
        SdpStatus::Infeasible => return Ok(None),
        SdpStatus::Marginal => {
            return Err(Error::NumericalBreakdown(format!(
                "output step: {}",
                sol.diagnostics.unwrap_or_else(|| "marginal".into())
            )))
        }
    }
    let mut cd = Matrix::zeros(p, n);
    for i in 0..p {
        cd[(i, 0)] = c0[i];
        if let Some(x) = &rows[i] {
            cd.view_mut((i, 1), (1, d)).copy_from(&x.value(&sol.x));
        }
    }
    Ok(Some((p1v.value(&sol.x), cd * &dec.t_inv)))
}

/// Row-wise convex step with `P1` fixed: `‖L⁻¹Ĉ2ᵢᵀ‖ ≤ √(1−m)·ĉ0ᵢ` where
/// `LLᵀ = P1 − m·I`, which is the tightened output LMI.
fn row_step(dec: &DominantDecomposition, p1: &Matrix, c_ref: &Matrix, opts: &ApproxOptions) -> Result<Option<Matrix>> {
    let n = dec.order();
    let d = n - 1;
    let p = c_ref.nrows();
    let m = opts.margin;
    let shifted = p1 - Matrix::identity(d, d) * m;
    let Some(chol) = nalgebra::Cholesky::new(crate::numkernel::symmetrize(&shifted)) else {
        return Ok(None);
    };
    let l_inv = match chol.l().try_inverse() {
        Some(li) if li.iter().all(|v| v.is_finite()) => li,
        _ => return Ok(None),
    };
    let shrink = (1.0 - m).sqrt();

    let mut prob = SdpProblem::new();
    let tau = prob.add_scalar();
    let g = prob.add_mat(p, n);
    let ge = AffineMat::mat(&g);
    let mut tail = Matrix::zeros(n, d);
    tail.view_mut((1, 0), (d, d)).copy_from(&Matrix::identity(d, d));
    let head = unit(n, 0);
    for i in 0..p {
        let row = ge.left(&unit(p, i).transpose());
        let gamma = row.right(&head).scale(shrink);
        let y = row.right(&tail).transpose().left(&l_inv);
        prob.add_lmi(format!("output[{i}]"), AffineMat::soc(&gamma, &y));
    }
    let err = ge.right(&dec.t_inv).add_constant(&-c_ref);
    prob.add_lmi("distance", AffineMat::soc(&AffineMat::scalar(tau), &err.vec()));
    let mut c = Vector::zeros(prob.num_vars());
    c[tau] = 1.0;
    prob.set_objective(c);

    let sol = sdp::solve(&prob, &opts.sdp)?;
    if sol.status != SdpStatus::Feasible {
        return Ok(None);
    }
    Ok(Some(g.value(&sol.x) * &dec.t_inv))
}

/// Impulse-fit helper for identification experiments: least-squares `C`
/// for known `A`, `B` from sampled impulse data `h(tₖ)` (continuous) or
/// Markov parameters (discrete, `tₖ` taken as step indices).
pub fn fit_output_matrix(a: &Matrix, b: &Matrix, domain: Domain, times: &[f64], samples: &[Matrix]) -> Result<Matrix> {
    let n = a.nrows();
    let m = b.ncols();
    if times.len() != samples.len() || samples.is_empty() {
        return Err(Error::ShapeMismatch("one sample per time is required".into()));
    }
    let p = samples[0].nrows();
    // rows of the regression: (e^{At}B)ᵀ per input column
    let mut reg = Matrix::zeros(times.len() * m, n);
    let mut rhs = Matrix::zeros(times.len() * m, p);
    for (k, (&t, h)) in times.iter().zip(samples).enumerate() {
        let phi = match domain {
            Domain::Continuous => crate::numkernel::expm(&(a * t))? * b,
            Domain::Discrete => a.pow(t.round() as u32 - 1) * b,
        };
        for j in 0..m {
            reg.set_row(k * m + j, &phi.column(j).transpose());
            rhs.set_row(k * m + j, &h.column(j).transpose());
        }
    }
    let svd = reg.svd(true, true);
    let sol = svd
        .solve(&rhs, 1e-12 * svd.singular_values.amax())
        .map_err(|e| Error::NumericalBreakdown(e.into()))?;
    Ok(sol.transpose())
}

#[cfg(test)]
mod tests {
    use super::*;

    fn two_state(c: [f64; 2]) -> StateSpace {
        StateSpace::new(
            Matrix::from_row_slice(2, 2, &[-2.0, 1.0, 1.0, -2.0]),
            Matrix::from_row_slice(2, 1, &[1.0, 0.0]),
            Matrix::from_row_slice(1, 2, &c),
            Matrix::zeros(1, 1),
            Domain::Continuous,
        )
        .unwrap()
    }

    #[test]
    fn certified_input_is_unchanged() {
        let sys = two_state([0.0, 1.0]);
        let r = approximate_output(&sys, &ApproxOptions::default()).unwrap();
        assert_eq!(r.distance.total, 0.0);
        assert_eq!(r.system.c(), sys.c());
    }

    #[test]
    fn perturbed_output_within_witness_bound() {
        let sys = two_state([-0.05, 1.0]);
        let r = approximate_output(&sys, &ApproxOptions::default()).unwrap();
        assert!(r.distance.total <= 0.05 + 1e-6, "{:?}", r.distance);
        assert!(r.distance.b == 0.0 && r.distance.d == 0.0);
        assert!(r.objective_trace.windows(2).all(|w| w[1] <= w[0] + 1e-9));
    }

    #[test]
    fn negative_direct_term_is_clipped() {
        let sys = two_state([0.0, 1.0]).with_d(Matrix::from_element(1, 1, -0.1)).unwrap();
        let r = approximate_output(&sys, &ApproxOptions::default()).unwrap();
        assert_eq!(r.system.d()[(0, 0)], 0.0);
        assert!((r.distance.d - 0.1).abs() < 1e-15);
        assert!(r.distance.total >= 0.1);
    }

    #[test]
    fn zero_input_stays_zero() {
        let sys = two_state([0.0, 1.0]).with_b(Matrix::zeros(2, 1)).unwrap();
        let r = approximate_input(&sys, &ApproxOptions::default()).unwrap();
        assert_eq!(r.distance.total, 0.0);
        assert_eq!(r.system.b().norm(), 0.0);
    }

    #[test]
    fn perturbed_input_within_witness_bound() {
        // B′ = (1, −0.05): h(0⁺) = C·B′ < 0
        let sys = two_state([0.0, 1.0]).with_b(Matrix::from_row_slice(2, 1, &[1.0, -0.05])).unwrap();
        let r = approximate_input(&sys, &ApproxOptions::default()).unwrap();
        assert!(r.distance.total <= 0.05 + 1e-6, "{:?}", r.distance);
        assert_eq!(r.distance.c, 0.0);
    }

    #[test]
    fn alternating_within_sum_of_perturbations() {
        let sys = two_state([-0.03, 1.0]).with_b(Matrix::from_row_slice(2, 1, &[1.0, -0.04])).unwrap();
        let r = approximate_alternating(&sys, &ApproxOptions::default()).unwrap();
        assert!(r.distance.total <= 0.07 + 1e-6, "{:?}", r.distance);
        assert!(r.objective_trace.windows(2).all(|w| w[1] <= w[0] + 1e-9));
    }

    #[test]
    fn result_is_idempotent() {
        let sys = two_state([-0.05, 1.0]);
        let opts = ApproxOptions::default();
        let r = approximate_output(&sys, &opts).unwrap();
        let again = approximate_output(&r.system, &opts).unwrap();
        assert!(again.distance.total <= 1e-8);
    }

    #[test]
    fn fit_recovers_exact_output_matrix() {
        let sys = two_state([0.3, 0.7]);
        let times: Vec<f64> = (0..20).map(|k| 0.2 * k as f64).collect();
        let samples: Vec<Matrix> = times
            .iter()
            .map(|&t| sys.c() * crate::numkernel::expm(&(sys.a() * t)).unwrap() * sys.b())
            .collect();
        let c = fit_output_matrix(sys.a(), sys.b(), Domain::Continuous, &times, &samples).unwrap();
        assert!((c - sys.c()).norm() < 1e-9);
    }
}
