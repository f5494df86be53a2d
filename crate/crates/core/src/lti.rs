//! State-space models, time responses, minimal realization and the
//! dominant-mode deflation the certificate is posed in.

use crate::error::{Error, Result};
use crate::numkernel::{
    self, check_finite, complete_orthonormal_basis, expm, real_schur_dominant, solve_linear,
    DominantBlock, Domain, Matrix, Vector, ABS_FLOOR,
};

/// Condition bound accepted for similarity transforms.
pub const SIMILARITY_MAX_COND: f64 = 1e10;

/// Relative dominance margin below which the dominant mode is treated as non-simple.
pub const GAP_TOL: f64 = 1e-6;

/// `(A, B, C, D)` together with its time domain.
///
/// An order-0 model (empty `A`) is allowed and represents the static gain `D`.
#[derive(Debug, Clone, PartialEq)]
pub struct StateSpace {
    a: Matrix,
    b: Matrix,
    c: Matrix,
    d: Matrix,
    domain: Domain,
}

impl StateSpace {
    pub fn new(a: Matrix, b: Matrix, c: Matrix, d: Matrix, domain: Domain) -> Result<Self> {
        let n = a.nrows();
        if !a.is_square() {
            return Err(Error::ShapeMismatch(format!(
                "A must be square, got {}x{}",
                a.nrows(),
                a.ncols()
            )));
        }
        let (m, p) = (b.ncols(), c.nrows());
        if m == 0 || p == 0 {
            return Err(Error::ShapeMismatch(
                "at least one input and one output are required".into(),
            ));
        }
        if b.nrows() != n {
            return Err(Error::ShapeMismatch(format!("B has {} rows, expected {n}", b.nrows())));
        }
        if c.ncols() != n {
            return Err(Error::ShapeMismatch(format!("C has {} columns, expected {n}", c.ncols())));
        }
        if d.shape() != (p, m) {
            return Err(Error::ShapeMismatch(format!(
                "D is {}x{}, expected {p}x{m}",
                d.nrows(),
                d.ncols()
            )));
        }
        for mat in [&a, &b, &c, &d] {
            check_finite(mat)?;
        }
        Ok(Self { a, b, c, d, domain })
    }

    /// Single-input single-output convenience constructor from row-major slices.
    pub fn siso(a: &[f64], b: &[f64], c: &[f64], d: f64, domain: Domain) -> Result<Self> {
        let n = b.len();
        if a.len() != n * n || c.len() != n {
            return Err(Error::ShapeMismatch("inconsistent SISO slices".into()));
        }
        Self::new(
            Matrix::from_row_slice(n, n, a),
            Matrix::from_column_slice(n, 1, b),
            Matrix::from_row_slice(1, n, c),
            Matrix::from_element(1, 1, d),
            domain,
        )
    }

    pub fn a(&self) -> &Matrix {
        &self.a
    }
    pub fn b(&self) -> &Matrix {
        &self.b
    }
    pub fn c(&self) -> &Matrix {
        &self.c
    }
    pub fn d(&self) -> &Matrix {
        &self.d
    }
    pub fn domain(&self) -> Domain {
        self.domain
    }
    pub fn order(&self) -> usize {
        self.a.nrows()
    }
    pub fn inputs(&self) -> usize {
        self.b.ncols()
    }
    pub fn outputs(&self) -> usize {
        self.c.nrows()
    }

    pub fn with_b(&self, b: Matrix) -> Result<Self> {
        Self::new(self.a.clone(), b, self.c.clone(), self.d.clone(), self.domain)
    }
    pub fn with_c(&self, c: Matrix) -> Result<Self> {
        Self::new(self.a.clone(), self.b.clone(), c, self.d.clone(), self.domain)
    }
    pub fn with_d(&self, d: Matrix) -> Result<Self> {
        Self::new(self.a.clone(), self.b.clone(), self.c.clone(), d, self.domain)
    }
    pub fn with_a(&self, a: Matrix) -> Result<Self> {
        Self::new(a, self.b.clone(), self.c.clone(), self.d.clone(), self.domain)
    }

    /// Largest real part (continuous) or spectral radius (discrete) of `A`.
    pub fn stability_margin(&self) -> Result<f64> {
        let eigs = numkernel::eigenvalues(&self.a)?;
        let ord = self.domain.ordering();
        Ok(eigs
            .iter()
            .map(|z| ord.key(*z))
            .fold(f64::NEG_INFINITY, f64::max))
    }

    pub fn is_stable(&self) -> Result<bool> {
        let margin = self.stability_margin()?;
        Ok(match self.domain {
            Domain::Continuous => margin < 0.0,
            Domain::Discrete => margin < 1.0,
        })
    }

    /// Markov parameter `C·Aᵏ·B`.
    pub fn markov(&self, k: usize) -> Matrix {
        let mut x = self.b.clone();
        for _ in 0..k {
            x = &self.a * x;
        }
        &self.c * x
    }
}

/// Sampled impulse or step response.
#[derive(Debug, Clone)]
pub struct ResponseSeries {
    pub times: Vec<f64>,
    pub values: Vec<Matrix>,
    /// Direct feedthrough `D`; for continuous impulse responses it is the
    /// weight of the Dirac term and is not included in `values`.
    pub direct: Matrix,
}

impl ResponseSeries {
    /// Largest entry magnitude over all samples and the direct term.
    pub fn peak(&self) -> f64 {
        self.values
            .iter()
            .chain(std::iter::once(&self.direct))
            .flat_map(|m| m.iter())
            .fold(0.0_f64, |acc, v| acc.max(v.abs()))
    }

    /// Smallest sampled entry (excluding the direct term).
    pub fn min_value(&self) -> f64 {
        self.values
            .iter()
            .flat_map(|m| m.iter())
            .fold(f64::INFINITY, |acc, v| acc.min(*v))
    }

    /// Series of one channel.
    pub fn channel(&self, output: usize, input: usize) -> Vec<f64> {
        self.values.iter().map(|m| m[(output, input)]).collect()
    }
}

fn response_grid(horizon: f64, num_points: usize) -> Result<Vec<f64>> {
    if !(horizon > 0.0) || !horizon.is_finite() {
        return Err(Error::Precondition("horizon must be positive".into()));
    }
    if num_points < 2 {
        return Err(Error::Precondition("at least two sample points are required".into()));
    }
    let dt = horizon / (num_points - 1) as f64;
    Ok((0..num_points).map(|k| k as f64 * dt).collect())
}

fn discrete_steps(horizon: f64, num_points: usize) -> Result<usize> {
    if !(horizon > 0.0) || num_points < 2 {
        return Err(Error::Precondition(
            "horizon must be positive and at least two points requested".into(),
        ));
    }
    Ok((num_points - 1).min(horizon.floor().max(1.0) as usize))
}

/// Impulse response samples.
///
/// Continuous: `C·e^{A t}·B` on a uniform grid over `[0, horizon]` (the `t = 0`
/// sample is the `0⁺` limit `C·B`). Discrete: `h(0) = D`, `h(k) = C·A^{k-1}·B`
/// for `k = 0..=min(num_points-1, horizon)`.
pub fn impulse_response(sys: &StateSpace, horizon: f64, num_points: usize) -> Result<ResponseSeries> {
    let n = sys.order();
    match sys.domain() {
        Domain::Continuous => {
            let times = response_grid(horizon, num_points)?;
            let dt = times[1] - times[0];
            let phi = expm(&(sys.a() * dt))?;
            let mut x = sys.b().clone();
            let mut values = Vec::with_capacity(times.len());
            for _ in 0..times.len() {
                values.push(if n == 0 {
                    Matrix::zeros(sys.outputs(), sys.inputs())
                } else {
                    sys.c() * &x
                });
                x = &phi * x;
            }
            Ok(ResponseSeries {
                times,
                values,
                direct: sys.d().clone(),
            })
        }
        Domain::Discrete => {
            let steps = discrete_steps(horizon, num_points)?;
            let mut values = Vec::with_capacity(steps + 1);
            values.push(sys.d().clone());
            let mut x = sys.b().clone();
            for _ in 1..=steps {
                values.push(sys.c() * &x);
                x = sys.a() * x;
            }
            Ok(ResponseSeries {
                times: (0..=steps).map(|k| k as f64).collect(),
                values,
                direct: sys.d().clone(),
            })
        }
    }
}

/// Unit-step response samples (includes `D`).
///
/// The continuous case integrates exactly on the grid through the augmented
/// exponential `exp([[A, B], [0, 0]]·Δt)`.
pub fn step_response(sys: &StateSpace, horizon: f64, num_points: usize) -> Result<ResponseSeries> {
    let (n, m, p) = (sys.order(), sys.inputs(), sys.outputs());
    match sys.domain() {
        Domain::Continuous => {
            let times = response_grid(horizon, num_points)?;
            let dt = times[1] - times[0];
            let mut aug = Matrix::zeros(n + m, n + m);
            aug.view_mut((0, 0), (n, n)).copy_from(&(sys.a() * dt));
            aug.view_mut((0, n), (n, m)).copy_from(&(sys.b() * dt));
            let e = expm(&aug)?;
            let phi = e.view((0, 0), (n, n)).into_owned();
            let gamma = e.view((0, n), (n, m)).into_owned();
            let mut x = Matrix::zeros(n, m);
            let mut values = Vec::with_capacity(times.len());
            for _ in 0..times.len() {
                values.push(if n == 0 {
                    sys.d().clone()
                } else {
                    sys.c() * &x + sys.d()
                });
                x = &phi * x + &gamma;
            }
            Ok(ResponseSeries {
                times,
                values,
                direct: sys.d().clone(),
            })
        }
        Domain::Discrete => {
            let steps = discrete_steps(horizon, num_points)?;
            let mut values = Vec::with_capacity(steps + 1);
            let mut acc = sys.d().clone();
            values.push(acc.clone());
            let mut x = sys.b().clone();
            for _ in 1..=steps {
                acc += if n == 0 { Matrix::zeros(p, m) } else { sys.c() * &x };
                values.push(acc.clone());
                x = sys.a() * x;
            }
            Ok(ResponseSeries {
                times: (0..=steps).map(|k| k as f64).collect(),
                values,
                direct: sys.d().clone(),
            })
        }
    }
}

/// `(T⁻¹AT, T⁻¹B, CT, D)`.
pub fn similarity_transform(sys: &StateSpace, t: &Matrix) -> Result<StateSpace> {
    let n = sys.order();
    if t.shape() != (n, n) {
        return Err(Error::ShapeMismatch(format!(
            "transform is {}x{}, expected {n}x{n}",
            t.nrows(),
            t.ncols()
        )));
    }
    let t_inv = numkernel::inverse_with_bound(t, SIMILARITY_MAX_COND)?;
    StateSpace::new(
        &t_inv * sys.a() * t,
        &t_inv * sys.b(),
        sys.c() * t,
        sys.d().clone(),
        sys.domain(),
    )
}

/// Orthonormal basis of the reachable subspace of `(A, B)` by a staircase of
/// rank-revealing QRs; directions below `tol` (relative) are dropped.
pub fn reachable_basis(a: &Matrix, b: &Matrix, tol: f64) -> Matrix {
    let n = a.nrows();
    let mut basis = Matrix::zeros(n, 0);
    let mut candidates = b.clone();
    let mut threshold = (tol * b.norm()).max(ABS_FLOOR);
    while basis.ncols() < n && candidates.ncols() > 0 {
        // project out the current basis twice for orthogonality
        for _ in 0..2 {
            if basis.ncols() > 0 {
                let proj = &basis * (basis.transpose() * &candidates);
                candidates -= proj;
            }
        }
        let fresh = numkernel::range_basis(&candidates, threshold);
        let k = fresh.ncols().min(n - basis.ncols());
        if k == 0 {
            break;
        }
        let start = basis.ncols();
        basis = basis.insert_columns(start, k, 0.0);
        basis.columns_mut(start, k).copy_from(&fresh.columns(0, k));
        candidates = a * fresh.columns(0, k);
        threshold = (tol * a.norm()).max(ABS_FLOOR);
    }
    basis
}

/// Minimal realization via the controllability then observability staircase.
pub fn minimal_realization(sys: &StateSpace, tol: f64) -> Result<StateSpace> {
    let qc = reachable_basis(sys.a(), sys.b(), tol);
    let ar = qc.transpose() * sys.a() * &qc;
    let br = qc.transpose() * sys.b();
    let cr = sys.c() * &qc;
    let qo = reachable_basis(&ar.transpose(), &cr.transpose(), tol);
    StateSpace::new(
        qo.transpose() * &ar * &qo,
        qo.transpose() * br,
        cr * &qo,
        sys.d().clone(),
        sys.domain(),
    )
}

/// Hankel singular values (descending) from the Gramians of a stable system.
pub fn hankel_singular_values(sys: &StateSpace) -> Result<Vec<f64>> {
    let n = sys.order();
    if n == 0 {
        return Ok(Vec::new());
    }
    if !sys.is_stable()? {
        return Err(Error::Precondition("Gramians need a stable system".into()));
    }
    let at = sys.a().transpose();
    let wc = numkernel::solve_lyapunov(&at, &(sys.b() * sys.b().transpose()), sys.domain())?;
    let wo = numkernel::solve_lyapunov(sys.a(), &(sys.c().transpose() * sys.c()), sys.domain())?;
    let ec = numkernel::sym_eig(&wc)?;
    let root = &ec.vectors
        * Matrix::from_diagonal(&ec.values.map(|v| v.max(0.0).sqrt()))
        * ec.vectors.transpose();
    let m = numkernel::symmetrize(&(&root * wo * &root));
    let ev = numkernel::sym_eig(&m)?;
    let mut hsv: Vec<f64> = ev.values.iter().map(|v| v.max(0.0).sqrt()).collect();
    hsv.sort_by(|x, y| y.total_cmp(x));
    Ok(hsv)
}

/// Minimal order implied by the Hankel singular values above `tol·σ₁` (stable systems).
pub fn hankel_order(sys: &StateSpace, tol: f64) -> Result<usize> {
    let hsv = hankel_singular_values(sys)?;
    let top = hsv.first().copied().unwrap_or(0.0);
    if top <= ABS_FLOOR {
        return Ok(0);
    }
    Ok(hsv.iter().filter(|&&s| s > tol * top).count())
}

/// Coordinates `x = T·(ξ₀, ξ₂)` that split off a simple real dominant mode:
/// `T⁻¹AT = blkdiag(λ₁, A₂)`.
#[derive(Debug, Clone)]
pub struct DominantDecomposition {
    pub lambda1: f64,
    pub v: Vector,
    pub t: Matrix,
    pub t_inv: Matrix,
    pub a2: Matrix,
    pub b0: Vector,
    pub b2: Matrix,
    pub c0: Vector,
    pub c2: Matrix,
    pub gap: f64,
    pub domain: Domain,
}

impl DominantDecomposition {
    pub fn order(&self) -> usize {
        self.t.nrows()
    }

    /// Discrete systems with `λ₁ < 0` cannot carry the certificate.
    pub fn negative_dominant_discrete(&self) -> bool {
        self.domain == Domain::Discrete && self.lambda1 < 0.0
    }

    /// `‖T⁻¹AT − blkdiag(λ₁, A₂)‖`.
    pub fn block_residual(&self, a: &Matrix) -> f64 {
        let n = self.order();
        let mut target = Matrix::zeros(n, n);
        target[(0, 0)] = self.lambda1;
        if n > 1 {
            target.view_mut((1, 1), (n - 1, n - 1)).copy_from(&self.a2);
        }
        (&self.t_inv * a * &self.t - target).norm()
    }
}

/// Why a dominant mode cannot be split off.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum NotSimpleReal {
    ComplexPair { re: f64, im: f64, gap: f64 },
    Repeated { lambda: f64, gap: f64 },
}

#[derive(Debug, Clone)]
pub enum DominantOutcome {
    Simple(DominantDecomposition),
    NotSimpleReal(NotSimpleReal),
}

fn max_abs_index(v: &Vector) -> Option<usize> {
    v.iter()
        .enumerate()
        .max_by(|x, y| x.1.abs().total_cmp(&y.1.abs()))
        .map(|(i, _)| i)
}

/// Dominant-mode deflation with block-diagonal (not just triangular) coordinates.
///
/// The first column of `T` is the dominant right eigenvector `v`; the remaining
/// columns are an orthonormal basis of the orthogonal complement of the left
/// eigenvector. `v` is signed so the largest-magnitude entry of `b₀` is
/// nonnegative (falling back to `c₀` when `b₀` vanishes).
pub fn dominant_decomposition(sys: &StateSpace) -> Result<DominantOutcome> {
    let n = sys.order();
    if n == 0 {
        return Err(Error::Precondition("order-0 model has no dominant mode".into()));
    }
    let a = sys.a();
    let sd = real_schur_dominant(a, sys.domain().ordering())?;
    let spectral = sd
        .eigenvalues
        .iter()
        .map(|z| z.norm())
        .fold(0.0_f64, f64::max)
        .max(ABS_FLOOR);
    let gap_tol = (GAP_TOL * spectral).max(ABS_FLOOR);
    let lambda1 = match sd.dominant {
        DominantBlock::ComplexPair { re, im } => {
            return Ok(DominantOutcome::NotSimpleReal(NotSimpleReal::ComplexPair {
                re,
                im,
                gap: sd.gap,
            }))
        }
        DominantBlock::Real(l) => l,
    };
    if sd.gap <= gap_tol {
        return Ok(DominantOutcome::NotSimpleReal(NotSimpleReal::Repeated {
            lambda: lambda1,
            gap: sd.gap,
        }));
    }

    let mut v: Vector = sd.t.column(0).into_owned();
    // left eigenvector in Schur coordinates: z = (1, y), (S22 - λ1 I)ᵀ y = -s12ᵀ
    let w: Vector = if n == 1 {
        Vector::from_element(1, 1.0)
    } else {
        let s12 = sd.s.view((0, 1), (1, n - 1)).transpose();
        let s22 = sd.s.view((1, 1), (n - 1, n - 1)).into_owned();
        let lhs = (s22 - Matrix::identity(n - 1, n - 1) * lambda1).transpose();
        let y = solve_linear(&lhs, &(-s12))?;
        let mut z = Vector::zeros(n);
        z[0] = 1.0;
        z.rows_mut(1, n - 1).copy_from(&y.column(0));
        let w = &sd.t * z;
        &w / w.norm()
    };
    let complement = complete_orthonormal_basis(&Matrix::from_column_slice(n, 1, w.as_slice()));
    let wbasis = complement.columns(1, n - 1).into_owned();

    let mut t = Matrix::zeros(n, n);
    let mut t_inv = Matrix::zeros(n, n);
    let fill = |t: &mut Matrix, t_inv: &mut Matrix, v: &Vector| {
        let wv = w.dot(v);
        t.set_column(0, v);
        t.columns_mut(1, n - 1).copy_from(&wbasis);
        let first = w.transpose() / wv;
        t_inv.set_row(0, &first);
        if n > 1 {
            let rest = wbasis.transpose() - (wbasis.transpose() * v) * &first;
            t_inv.rows_mut(1, n - 1).copy_from(&rest);
        }
    };
    fill(&mut t, &mut t_inv, &v);

    let b0_row = t_inv.row(0) * sys.b();
    let c0_col = sys.c() * &v;
    let b_scale = sys.b().norm() * t_inv.row(0).norm();
    let b_zero = b0_row.iter().all(|x| x.abs() <= 1e-12 * b_scale.max(ABS_FLOOR));
    let flip = if !b_zero {
        let b0v = b0_row.transpose();
        max_abs_index(&b0v).map(|i| b0v[i] < 0.0).unwrap_or(false)
    } else {
        max_abs_index(&c0_col).map(|i| c0_col[i] < 0.0).unwrap_or(false)
    };
    if flip {
        v = -v;
        fill(&mut t, &mut t_inv, &v);
    }

    let b_all = &t_inv * sys.b();
    let c_all = sys.c() * &t;
    let a2 = if n > 1 {
        t_inv.rows(1, n - 1) * a * &wbasis
    } else {
        Matrix::zeros(0, 0)
    };
    let b0 = b_all.row(0).transpose();
    let b2 = b_all.rows(1, n - 1).into_owned();
    let c0: Vector = c_all.column(0).into_owned();
    let c2 = c_all.columns(1, n - 1).into_owned();

    Ok(DominantOutcome::Simple(DominantDecomposition {
        lambda1,
        v,
        t,
        t_inv,
        a2,
        b0,
        b2,
        c0,
        c2,
        gap: sd.gap,
        domain: sys.domain(),
    }))
}
