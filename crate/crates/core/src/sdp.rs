//! Small dense semidefinite programming backend.
//!
//! Problems are affine LMIs `Fᵢ(x) = Fᵢ₀ + Σₖ xₖ·Fᵢₖ ⪰ 0` over a scalar
//! variable vector `x` kept inside the ball `‖x‖ ≤ R`. Feasibility is decided
//! by maximizing a common slack `t` with `Fᵢ(x) − t·I ⪰ 0` (phase I); a linear
//! objective is then minimized from the phase-I point by a log-det barrier
//! path-following method with damped Newton steps (phase II).

use std::collections::BTreeMap;
use std::fmt::Write as _;

use crate::error::{Error, Result};
use crate::numkernel::{min_eigenvalue, symmetrize, Matrix, Vector, ABS_FLOOR};

/// Solver knobs. Defaults follow the documented feasibility conventions.
#[derive(Debug, Clone)]
pub struct SdpOptions {
    /// Radius of the regularization ball on the variables.
    pub radius: f64,
    /// Slack threshold separating Feasible / Marginal / Infeasible.
    pub feas_tol: f64,
    /// Relative duality-gap target of phase II.
    pub gap_tol: f64,
    /// Duality-gap target of phase I, relative to `1 + |t|`.
    pub slack_gap_tol: f64,
    /// Every LMI is tightened to `Fᵢ(x) ⪰ margin·I`.
    pub margin: f64,
    pub max_newton: usize,
    /// Barrier parameter growth per outer iteration.
    pub mu: f64,
    /// Drive phase I to the maximal slack instead of stopping once the sign
    /// of `t*` is settled.
    pub exact_slack: bool,
}

impl Default for SdpOptions {
    fn default() -> Self {
        Self {
            radius: 1e6,
            feas_tol: 1e-7,
            gap_tol: 1e-8,
            slack_gap_tol: 1e-9,
            margin: 0.0,
            max_newton: 2000,
            mu: 12.0,
            exact_slack: true,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum SdpStatus {
    Feasible,
    Infeasible,
    Marginal,
}

#[derive(Debug, Clone)]
pub struct SdpSolution {
    pub status: SdpStatus,
    pub x: Vector,
    /// Achieved phase-I slack `t*`.
    pub slack: f64,
    pub objective: Option<f64>,
    pub iterations: usize,
    /// Minimum eigenvalue of every constraint at `x`, by name.
    pub residuals: Vec<(String, f64)>,
    pub diagnostics: Option<String>,
}

impl SdpSolution {
    pub fn is_feasible(&self) -> bool {
        self.status == SdpStatus::Feasible
    }
}

/// Handle for a symmetric matrix variable stored as its upper triangle.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct SymVar {
    pub dim: usize,
    pub offset: usize,
}

impl SymVar {
    pub fn len(&self) -> usize {
        self.dim * (self.dim + 1) / 2
    }

    pub fn is_empty(&self) -> bool {
        self.dim == 0
    }

    /// Scalar index of entry `(i, j)`.
    pub fn index(&self, i: usize, j: usize) -> usize {
        let (i, j) = if i <= j { (i, j) } else { (j, i) };
        // row-major upper triangle: row i starts after i·d − i(i−1)/2 entries
        self.offset + i * self.dim - i * i.saturating_sub(1) / 2 + (j - i)
    }

    pub fn value(&self, x: &Vector) -> Matrix {
        let mut m = Matrix::zeros(self.dim, self.dim);
        for i in 0..self.dim {
            for j in i..self.dim {
                let v = x[self.index(i, j)];
                m[(i, j)] = v;
                m[(j, i)] = v;
            }
        }
        m
    }

    /// Writes a symmetric matrix into the variable slots of `x`.
    pub fn store(&self, m: &Matrix, x: &mut Vector) {
        for i in 0..self.dim {
            for j in i..self.dim {
                x[self.index(i, j)] = 0.5 * (m[(i, j)] + m[(j, i)]);
            }
        }
    }
}

/// Handle for a general (rows×cols) matrix variable, column-major.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct MatVar {
    pub rows: usize,
    pub cols: usize,
    pub offset: usize,
}

impl MatVar {
    pub fn index(&self, i: usize, j: usize) -> usize {
        self.offset + j * self.rows + i
    }

    pub fn value(&self, x: &Vector) -> Matrix {
        Matrix::from_fn(self.rows, self.cols, |i, j| x[self.index(i, j)])
    }

    pub fn store(&self, m: &Matrix, x: &mut Vector) {
        for j in 0..self.cols {
            for i in 0..self.rows {
                x[self.index(i, j)] = m[(i, j)];
            }
        }
    }
}

/// Affine matrix expression `M₀ + Σₖ xₖ·Mₖ`.
#[derive(Debug, Clone)]
pub struct AffineMat {
    pub constant: Matrix,
    pub terms: BTreeMap<usize, Matrix>,
}

impl AffineMat {
    pub fn constant(m: Matrix) -> Self {
        Self {
            constant: m,
            terms: BTreeMap::new(),
        }
    }

    pub fn zeros(rows: usize, cols: usize) -> Self {
        Self::constant(Matrix::zeros(rows, cols))
    }

    pub fn identity(n: usize) -> Self {
        Self::constant(Matrix::identity(n, n))
    }

    pub fn sym(var: &SymVar) -> Self {
        let d = var.dim;
        let mut terms = BTreeMap::new();
        for i in 0..d {
            for j in i..d {
                let mut e = Matrix::zeros(d, d);
                e[(i, j)] = 1.0;
                e[(j, i)] = 1.0;
                terms.insert(var.index(i, j), e);
            }
        }
        Self {
            constant: Matrix::zeros(d, d),
            terms,
        }
    }

    pub fn mat(var: &MatVar) -> Self {
        let mut terms = BTreeMap::new();
        for j in 0..var.cols {
            for i in 0..var.rows {
                let mut e = Matrix::zeros(var.rows, var.cols);
                e[(i, j)] = 1.0;
                terms.insert(var.index(i, j), e);
            }
        }
        Self {
            constant: Matrix::zeros(var.rows, var.cols),
            terms,
        }
    }

    /// Scalar variable `x_k` as a 1×1 expression.
    pub fn scalar(index: usize) -> Self {
        let mut terms = BTreeMap::new();
        terms.insert(index, Matrix::from_element(1, 1, 1.0));
        Self {
            constant: Matrix::zeros(1, 1),
            terms,
        }
    }

    pub fn shape(&self) -> (usize, usize) {
        self.constant.shape()
    }

    fn map(&self, f: impl Fn(&Matrix) -> Matrix) -> Self {
        Self {
            constant: f(&self.constant),
            terms: self
                .terms
                .iter()
                .map(|(k, m)| (*k, f(m)))
                .filter(|(_, m)| m.iter().any(|v| *v != 0.0))
                .collect(),
        }
    }

    pub fn transpose(&self) -> Self {
        self.map(|m| m.transpose())
    }

    pub fn scale(&self, s: f64) -> Self {
        self.map(|m| m * s)
    }

    /// `L · self`.
    pub fn left(&self, l: &Matrix) -> Self {
        self.map(|m| l * m)
    }

    /// `self · R`.
    pub fn right(&self, r: &Matrix) -> Self {
        self.map(|m| m * r)
    }

    pub fn add(&self, other: &AffineMat) -> Self {
        assert_eq!(self.shape(), other.shape(), "affine shapes differ");
        let mut out = self.clone();
        out.constant += &other.constant;
        for (k, m) in &other.terms {
            out.terms
                .entry(*k)
                .and_modify(|e| *e += m)
                .or_insert_with(|| m.clone());
        }
        out
    }

    pub fn sub(&self, other: &AffineMat) -> Self {
        self.add(&other.scale(-1.0))
    }

    pub fn add_constant(&self, m: &Matrix) -> Self {
        let mut out = self.clone();
        out.constant += m;
        out
    }

    /// `(self + selfᵀ)` — symmetric part times two.
    pub fn plus_transpose(&self) -> Self {
        self.add(&self.transpose())
    }

    /// Assembles a block matrix; `None` entries are zero blocks.
    pub fn blocks(grid: &[Vec<Option<AffineMat>>], row_dims: &[usize], col_dims: &[usize]) -> Self {
        let rows: usize = row_dims.iter().sum();
        let cols: usize = col_dims.iter().sum();
        let mut out = AffineMat::zeros(rows, cols);
        let mut r0 = 0;
        for (bi, row) in grid.iter().enumerate() {
            let mut c0 = 0;
            for (bj, cell) in row.iter().enumerate() {
                if let Some(block) = cell {
                    assert_eq!(block.shape(), (row_dims[bi], col_dims[bj]), "block shape");
                    out.constant
                        .view_mut((r0, c0), block.shape())
                        .copy_from(&block.constant);
                    for (k, m) in &block.terms {
                        let e = out
                            .terms
                            .entry(*k)
                            .or_insert_with(|| Matrix::zeros(rows, cols));
                        e.view_mut((r0, c0), m.shape()).copy_from(m);
                    }
                }
                c0 += col_dims[bj];
            }
            r0 += row_dims[bi];
        }
        out
    }

    /// Column-major stacking into a single column.
    pub fn vec(&self) -> Self {
        let flat = |m: &Matrix| Matrix::from_column_slice(m.len(), 1, m.as_slice());
        Self {
            constant: flat(&self.constant),
            terms: self.terms.iter().map(|(k, m)| (*k, flat(m))).collect(),
        }
    }

    /// `[[t·I, e], [eᵀ, t]]`, which is PSD iff `‖e‖ ≤ t` (`t` is 1×1, `e` a column).
    pub fn soc(t: &AffineMat, e: &AffineMat) -> Self {
        let k = e.shape().0;
        let eye = Matrix::identity(k, k);
        let t_eye = Self {
            constant: &eye * t.constant[(0, 0)],
            terms: t.terms.iter().map(|(i, m)| (*i, &eye * m[(0, 0)])).collect(),
        };
        Self::blocks(
            &[
                vec![Some(t_eye), Some(e.clone())],
                vec![Some(e.transpose()), Some(t.clone())],
            ],
            &[k, 1],
            &[k, 1],
        )
    }

    pub fn eval(&self, x: &Vector) -> Matrix {
        let mut m = self.constant.clone();
        for (k, c) in &self.terms {
            m += c * x[*k];
        }
        m
    }
}

/// Named LMI `F(x) ⪰ 0`.
#[derive(Debug, Clone)]
pub struct Lmi {
    pub name: String,
    pub expr: AffineMat,
}

#[derive(Debug, Clone, Default)]
pub struct SdpProblem {
    num_vars: usize,
    constraints: Vec<Lmi>,
    objective: Option<Vector>,
}

impl SdpProblem {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn num_vars(&self) -> usize {
        self.num_vars
    }

    pub fn constraints(&self) -> &[Lmi] {
        &self.constraints
    }

    pub fn add_scalar(&mut self) -> usize {
        self.num_vars += 1;
        self.num_vars - 1
    }

    pub fn add_sym(&mut self, dim: usize) -> SymVar {
        let v = SymVar {
            dim,
            offset: self.num_vars,
        };
        self.num_vars += v.len();
        v
    }

    pub fn add_mat(&mut self, rows: usize, cols: usize) -> MatVar {
        let v = MatVar {
            rows,
            cols,
            offset: self.num_vars,
        };
        self.num_vars += rows * cols;
        v
    }

    /// Adds `expr ⪰ 0`; the expression is symmetrized.
    pub fn add_lmi(&mut self, name: impl Into<String>, expr: AffineMat) {
        let (r, c) = expr.shape();
        assert_eq!(r, c, "LMI must be square");
        if r == 0 {
            return;
        }
        let expr = expr.map(symmetrize);
        assert!(
            expr.terms.keys().all(|&k| k < self.num_vars),
            "LMI references undeclared variable"
        );
        self.constraints.push(Lmi {
            name: name.into(),
            expr,
        });
    }

    /// `lo ≤ x_k ≤ hi` as 1×1 constraints.
    pub fn add_bounds(&mut self, k: usize, lo: Option<f64>, hi: Option<f64>) {
        if let Some(lo) = lo {
            self.add_lmi(
                format!("lower[{k}]"),
                AffineMat::scalar(k).add_constant(&Matrix::from_element(1, 1, -lo)),
            );
        }
        if let Some(hi) = hi {
            self.add_lmi(
                format!("upper[{k}]"),
                AffineMat::scalar(k)
                    .scale(-1.0)
                    .add_constant(&Matrix::from_element(1, 1, hi)),
            );
        }
    }

    /// Linear objective to minimize; absent means pure feasibility.
    pub fn set_objective(&mut self, c: Vector) {
        assert_eq!(c.len(), self.num_vars, "objective length");
        self.objective = Some(c);
    }

    pub fn objective(&self) -> Option<&Vector> {
        self.objective.as_ref()
    }

    /// Minimum eigenvalue of each constraint at `x`.
    pub fn residuals(&self, x: &Vector) -> Vec<(String, f64)> {
        self.constraints
            .iter()
            .map(|c| {
                let m = symmetrize(&c.expr.eval(x));
                (c.name.clone(), min_eigenvalue(&m).unwrap_or(f64::NEG_INFINITY))
            })
            .collect()
    }

    /// Plain-text dump for cross-checking against external solvers.
    ///
    /// ```text
    /// sdp v1
    /// vars <k>
    /// objective <c_1 … c_k> | objective none
    /// lmi <name> dim <d>
    /// const
    /// <d rows>
    /// coef <var index>
    /// <d rows>
    /// end
    /// ```
    pub fn to_text(&self) -> String {
        let mut s = String::new();
        let _ = writeln!(s, "sdp v1");
        let _ = writeln!(s, "vars {}", self.num_vars);
        match &self.objective {
            Some(c) => {
                let parts: Vec<String> = c.iter().map(|v| format!("{v:e}")).collect();
                let _ = writeln!(s, "objective {}", parts.join(" "));
            }
            None => {
                let _ = writeln!(s, "objective none");
            }
        }
        let write_mat = |s: &mut String, m: &Matrix| {
            for r in m.row_iter() {
                let parts: Vec<String> = r.iter().map(|v| format!("{v:e}")).collect();
                let _ = writeln!(s, "{}", parts.join(" "));
            }
        };
        for c in &self.constraints {
            let _ = writeln!(s, "lmi {} dim {}", c.name.replace(' ', "_"), c.expr.shape().0);
            let _ = writeln!(s, "const");
            write_mat(&mut s, &c.expr.constant);
            for (k, m) in &c.expr.terms {
                let _ = writeln!(s, "coef {k}");
                write_mat(&mut s, m);
            }
            let _ = writeln!(s, "end");
        }
        s
    }

    fn data_scale(&self) -> f64 {
        self.constraints
            .iter()
            .map(|c| {
                c.expr
                    .terms
                    .values()
                    .map(|m| m.norm())
                    .chain(std::iter::once(c.expr.constant.norm()))
                    .fold(0.0, f64::max)
            })
            .fold(0.0, f64::max)
            .max(ABS_FLOOR)
    }
}

/// `‖M‖`-relative PSD test on a symmetric matrix.
pub fn psd_check(m: &Matrix, tol: f64) -> Result<bool> {
    let scale = m.norm();
    let lmin = min_eigenvalue(m)?;
    Ok(lmin >= -(tol * scale).max(0.0))
}

// ---------------------------------------------------------------------------
// barrier machinery

struct Barrier<'a> {
    lmis: Vec<&'a AffineMat>,
    /// shift applied to every constraint: F(x) − shift_coef·t·I − margin·I
    slack_var: Option<usize>,
    margin: f64,
    ball_vars: usize,
    radius: f64,
    dim: usize,
}

impl<'a> Barrier<'a> {
    fn eval_lmi(&self, i: usize, z: &Vector) -> Matrix {
        let mut m = self.lmis[i].eval(z);
        let n = m.nrows();
        let shift = self.margin + self.slack_var.map(|k| z[k]).unwrap_or(0.0);
        for d in 0..n {
            m[(d, d)] -= shift;
        }
        m
    }

    fn ball_gap(&self, z: &Vector) -> f64 {
        let r2: f64 = z.rows(0, self.ball_vars).norm_squared();
        self.radius * self.radius - r2
    }

    /// Barrier value, `None` outside the domain.
    fn value(&self, z: &Vector) -> Option<f64> {
        let g = self.ball_gap(z);
        if !(g > 0.0) {
            return None;
        }
        let mut f = -g.ln();
        for i in 0..self.lmis.len() {
            let m = self.eval_lmi(i, z);
            let chol = nalgebra::Cholesky::new(m)?;
            let ld: f64 = chol.l_dirty().diagonal().iter().map(|v| v.ln()).sum();
            if !ld.is_finite() {
                return None;
            }
            f -= 2.0 * ld;
        }
        Some(f)
    }

    /// Gradient and Hessian of the barrier at an interior point.
    fn derivatives(&self, z: &Vector) -> Option<(Vector, Matrix)> {
        let n = self.dim;
        let mut g = Vector::zeros(n);
        let mut h = Matrix::zeros(n, n);
        let gap = self.ball_gap(z);
        for k in 0..self.ball_vars {
            g[k] += 2.0 * z[k] / gap;
            h[(k, k)] += 2.0 / gap;
        }
        for k in 0..self.ball_vars {
            for l in 0..self.ball_vars {
                h[(k, l)] += 4.0 * z[k] * z[l] / (gap * gap);
            }
        }
        for i in 0..self.lmis.len() {
            let m = self.eval_lmi(i, z);
            let d = m.nrows();
            let chol = nalgebra::Cholesky::new(m)?;
            let l = chol.l();
            let mut idx: Vec<usize> = Vec::new();
            let mut scaled: Vec<Matrix> = Vec::new();
            let mut push = |k: usize, coef: &Matrix| {
                // L⁻¹·F·L⁻ᵀ
                let y = l.solve_lower_triangular(coef)?;
                let w = l.solve_lower_triangular(&y.transpose())?;
                idx.push(k);
                scaled.push(w);
                Some(())
            };
            for (k, coef) in &self.lmis[i].terms {
                push(*k, coef)?;
            }
            if let Some(sv) = self.slack_var {
                push(sv, &(-Matrix::identity(d, d)))?;
            }
            for (a, &ka) in idx.iter().enumerate() {
                g[ka] -= scaled[a].trace();
                for (b, &kb) in idx.iter().enumerate().skip(a) {
                    let v = scaled[a].dot(&scaled[b].transpose());
                    h[(ka, kb)] += v;
                    if a != b {
                        h[(kb, ka)] += v;
                    }
                }
            }
        }
        Some((g, h))
    }

    fn nu(&self) -> f64 {
        self.lmis
            .iter()
            .map(|m| m.shape().0 as f64)
            .sum::<f64>()
            + 2.0
    }
}

/// Solves `H·d = rhs` with symmetric Jacobi scaling; flat directions (only
/// held by the ball) and stiff ones differ by many orders of magnitude.
fn newton_direction(h: &Matrix, rhs: &Vector) -> Option<Vector> {
    let n = h.nrows();
    let scale = Vector::from_fn(n, |i, _| {
        let d = h[(i, i)];
        if d > 0.0 && d.is_finite() {
            1.0 / d.sqrt()
        } else {
            1.0
        }
    });
    let hs = Matrix::from_fn(n, n, |i, j| h[(i, j)] * scale[i] * scale[j]);
    let rs = rhs.component_mul(&scale);
    let mut reg = 0.0;
    for _ in 0..12 {
        let mut hr = hs.clone();
        for i in 0..n {
            hr[(i, i)] += reg;
        }
        if let Some(ch) = nalgebra::Cholesky::new(hr) {
            let d = ch.solve(&rs);
            if d.iter().all(|v| v.is_finite()) {
                return Some(d.component_mul(&scale));
            }
        }
        reg = if reg == 0.0 { 1e-14 } else { reg * 100.0 };
    }
    None
}

struct PathResult {
    z: Vector,
    newton_steps: usize,
    converged: bool,
}

/// Minimizes `cᵀz` over the barrier domain by path following.
fn path_follow(
    barrier: &Barrier,
    c: &Vector,
    mut z: Vector,
    gap_target: impl Fn(f64) -> f64,
    opts: &SdpOptions,
    stop: impl Fn(&Vector, f64, bool) -> bool,
) -> Result<PathResult> {
    let nu = barrier.nu();
    let mut steps = 0usize;
    // initial weight balances objective against the barrier gradient
    let (g0, _) = barrier
        .derivatives(&z)
        .ok_or_else(|| Error::NumericalBreakdown("starting point is not interior".into()))?;
    let mut s = (g0.norm() / c.norm().max(ABS_FLOOR)).clamp(1e-8, 1e8);
    loop {
        // centering
        let mut inner = 0usize;
        loop {
            if steps >= opts.max_newton {
                return Ok(PathResult {
                    z,
                    newton_steps: steps,
                    converged: false,
                });
            }
            let (g, h) = barrier
                .derivatives(&z)
                .ok_or_else(|| Error::NumericalBreakdown("left the barrier domain".into()))?;
            let grad = c * s + g;
            let dir = newton_direction(&h, &(-&grad))
                .ok_or_else(|| Error::NumericalBreakdown("Newton system is singular".into()))?;
            let decrement = -grad.dot(&dir);
            steps += 1;
            inner += 1;
            // λ²/2 bounds the centering error in barrier units; on badly
            // conditioned problems the Newton direction is too inexact to
            // reach 1e-8, and a point inside the quadratic region (λ² ≤ 0.1)
            // is centered enough to move on
            if decrement.abs() <= 1e-8 || (inner >= 30 && decrement.abs() <= 0.1) {
                break;
            }
            // compare increments: s·cᵀz can dwarf the barrier by many digits
            let b0 = barrier.value(&z).unwrap_or(f64::INFINITY);
            let slope = s * c.dot(&dir);
            let mut alpha = if decrement.sqrt() > 0.5 {
                1.0 / (1.0 + decrement.sqrt())
            } else {
                1.0
            };
            let mut moved = false;
            for _ in 0..60 {
                let trial = &z + &dir * alpha;
                if let Some(fb) = barrier.value(&trial) {
                    if alpha * slope + (fb - b0) <= -0.25 * alpha * decrement {
                        z = trial;
                        moved = true;
                        break;
                    }
                }
                alpha *= 0.5;
            }
            if stop(&z, s, false) {
                return Ok(PathResult {
                    z,
                    newton_steps: steps,
                    converged: true,
                });
            }
            if !moved {
                // no further progress representable; treat as centered
                break;
            }
        }
        let obj = c.dot(&z);
        if nu / s <= gap_target(obj) || stop(&z, s, true) {
            return Ok(PathResult {
                z,
                newton_steps: steps,
                converged: true,
            });
        }
        s *= opts.mu;
        if !s.is_finite() || s > 1e300 {
            return Ok(PathResult {
                z,
                newton_steps: steps,
                converged: false,
            });
        }
    }
}

struct SlackResult {
    x: Vector,
    t: f64,
    steps: usize,
    converged: bool,
}

fn max_slack(prob: &SdpProblem, opts: &SdpOptions, radius: f64) -> Result<SlackResult> {
    let nx = prob.num_vars;
    let lmis: Vec<&AffineMat> = prob.constraints.iter().map(|c| &c.expr).collect();
    let barrier = Barrier {
        lmis,
        slack_var: Some(nx),
        margin: opts.margin,
        ball_vars: nx,
        radius,
        dim: nx + 1,
    };
    let mut z = Vector::zeros(nx + 1);
    let start = prob
        .constraints
        .iter()
        .map(|c| min_eigenvalue(&symmetrize(&c.expr.constant)))
        .collect::<Result<Vec<_>>>()?
        .into_iter()
        .fold(f64::INFINITY, f64::min)
        - opts.margin;
    z[nx] = start - prob.data_scale().max(1.0);
    let mut c = Vector::zeros(nx + 1);
    c[nx] = -1.0;
    let tol = opts.slack_gap_tol;
    let nu = barrier.nu();
    let settled = |z: &Vector, s: f64, centered: bool| {
        if opts.exact_slack {
            return false;
        }
        // clearly feasible, or a centered point whose gap bound is clearly negative
        z[nx] > 1e3 * opts.feas_tol || (centered && z[nx] + 2.0 * nu / s < -opts.feas_tol)
    };
    let res = path_follow(&barrier, &c, z, |obj| tol * (1.0 + obj.abs()), opts, settled)?;
    Ok(SlackResult {
        x: res.z.rows(0, nx).into_owned(),
        t: res.z[nx],
        steps: res.newton_steps,
        converged: res.converged,
    })
}

/// Solves the problem in feasibility mode (no objective) or optimization mode.
pub fn solve(prob: &SdpProblem, opts: &SdpOptions) -> Result<SdpSolution> {
    let nx = prob.num_vars;
    if prob.constraints.is_empty() {
        let x = Vector::zeros(nx);
        let objective = prob.objective.as_ref().map(|c| c.dot(&x));
        return Ok(SdpSolution {
            status: SdpStatus::Feasible,
            x,
            slack: f64::INFINITY,
            objective,
            iterations: 0,
            residuals: Vec::new(),
            diagnostics: None,
        });
    }

    // phase II only needs an interior start; a maximal slack would push
    // homogeneous problems to the ball boundary
    let phase1_opts = SdpOptions {
        exact_slack: opts.exact_slack && prob.objective.is_none(),
        ..opts.clone()
    };
    let first = max_slack(prob, &phase1_opts, opts.radius)?;
    let (mut x, mut slack, mut iterations) = (first.x, first.t, first.steps);
    let mut diagnostics = None;
    let mut status = if slack > opts.feas_tol {
        SdpStatus::Feasible
    } else if slack < -opts.feas_tol && first.converged {
        SdpStatus::Infeasible
    } else {
        if !first.converged {
            diagnostics = Some("iteration limit reached in phase I".to_string());
        }
        SdpStatus::Marginal
    };

    if status == SdpStatus::Infeasible && x.norm() >= 0.99 * opts.radius {
        // the ball may be what cuts the slack; retry with a larger ball
        let retry = max_slack(prob, &phase1_opts, 10.0 * opts.radius)?;
        let (x2, s2) = (retry.x, retry.t);
        iterations += retry.steps;
        if s2 > opts.feas_tol {
            status = SdpStatus::Feasible;
            x = x2;
            slack = s2;
        } else if (s2 - slack).abs() > 1e-3 * slack.abs() + opts.feas_tol {
            status = SdpStatus::Marginal;
            diagnostics = Some(format!(
                "slack sensitive to regularization radius ({slack:.3e} -> {s2:.3e})"
            ));
            x = x2;
            slack = s2;
        }
    }

    let mut objective = None;
    if let (Some(c), SdpStatus::Feasible) = (prob.objective.as_ref(), status) {
        let lmis: Vec<&AffineMat> = prob.constraints.iter().map(|c| &c.expr).collect();
        let barrier = Barrier {
            lmis,
            slack_var: None,
            margin: opts.margin,
            ball_vars: nx,
            radius: opts.radius,
            dim: nx,
        };
        let gap_tol = opts.gap_tol;
        // a path that stalls at one barrier growth rate usually converges at
        // another, so retry from the same interior start before giving up
        let mut res = None;
        for mu in [opts.mu, opts.mu / 3.0, opts.mu * 2.5] {
            let tried = SdpOptions { mu, ..opts.clone() };
            let r = path_follow(&barrier, c, x.clone(), |obj| gap_tol * (1.0 + obj.abs()), &tried, |_, _, _| {
                false
            })?;
            iterations += r.newton_steps;
            let done = r.converged;
            res = Some(r);
            if done {
                break;
            }
        }
        let res = res.expect("at least one phase II attempt");
        if !res.converged {
            status = SdpStatus::Marginal;
            diagnostics = Some("iteration limit reached in phase II".into());
        }
        x = res.z;
        objective = Some(c.dot(&x));
    }

    let residuals = prob.residuals(&x);
    if status == SdpStatus::Feasible {
        // unconditional re-verification of the returned point
        for (lmi, (name, lmin)) in prob.constraints.iter().zip(&residuals) {
            let scale = lmi.expr.eval(&x).norm().max(1.0);
            if *lmin < opts.margin - 1e-7 * scale {
                status = SdpStatus::Marginal;
                diagnostics = Some(format!("re-verification failed on {name}: {lmin:.3e}"));
            }
        }
    }

    Ok(SdpSolution {
        status,
        x,
        slack,
        objective,
        iterations,
        residuals,
        diagnostics,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_abs_diff_eq;

    fn m(r: usize, c: usize, v: &[f64]) -> Matrix {
        Matrix::from_row_slice(r, c, v)
    }

    #[test]
    fn symvar_indexing_is_dense() {
        let mut p = SdpProblem::new();
        let _ = p.add_scalar();
        let s = p.add_sym(3);
        let mut seen: Vec<usize> = (0..3).flat_map(|i| (i..3).map(move |j| (i, j))).map(|(i, j)| s.index(i, j)).collect();
        seen.sort();
        assert_eq!(seen, (1..7).collect::<Vec<_>>());
        assert_eq!(s.index(2, 0), s.index(0, 2));
    }

    #[test]
    fn constant_negative_constraint_is_infeasible() {
        let mut p = SdpProblem::new();
        p.add_lmi("neg", AffineMat::constant(m(1, 1, &[-1.0])));
        let sol = solve(&p, &SdpOptions::default()).unwrap();
        assert_eq!(sol.status, SdpStatus::Infeasible);
        assert_abs_diff_eq!(sol.slack, -1.0, epsilon = 1e-8);
    }

    #[test]
    fn max_slack_centered_at_zero() {
        let mut p = SdpProblem::new();
        let x = p.add_scalar();
        let mut off = AffineMat::scalar(x);
        off = AffineMat::blocks(
            &[vec![None, Some(off.clone())], vec![Some(off), None]],
            &[1, 1],
            &[1, 1],
        );
        p.add_lmi("pair", off.add_constant(&Matrix::identity(2, 2)));
        let sol = solve(&p, &SdpOptions::default()).unwrap();
        assert_eq!(sol.status, SdpStatus::Feasible);
        assert_abs_diff_eq!(sol.slack, 1.0, epsilon = 1e-8);
        assert!(sol.x[0].abs() < 1e-6);
    }

    #[test]
    fn minimize_diagonal_variable() {
        let mut p = SdpProblem::new();
        // [[x, 1], [1, x]] ⪰ 0 gives x ≥ 1
        let x = p.add_scalar();
        let diag = AffineMat {
            constant: m(2, 2, &[0.0, 1.0, 1.0, 0.0]),
            terms: [(x, Matrix::identity(2, 2))].into_iter().collect(),
        };
        p.add_lmi("lmi", diag);
        p.set_objective(Vector::from_element(1, 1.0));
        let sol = solve(&p, &SdpOptions::default()).unwrap();
        assert_eq!(sol.status, SdpStatus::Feasible);
        assert_abs_diff_eq!(sol.objective.unwrap(), 1.0, epsilon = 1e-6);
    }

    #[test]
    fn scaling_data_keeps_classification() {
        for k in [1.0, 1e3] {
            let mut p = SdpProblem::new();
            p.add_lmi("neg", AffineMat::constant(m(1, 1, &[-k])));
            assert_eq!(solve(&p, &SdpOptions::default()).unwrap().status, SdpStatus::Infeasible);

            let mut p = SdpProblem::new();
            let x = p.add_scalar();
            let off = AffineMat::scalar(x).scale(k);
            let pair = AffineMat::blocks(
                &[vec![None, Some(off.clone())], vec![Some(off), None]],
                &[1, 1],
                &[1, 1],
            );
            p.add_lmi("pair", pair.add_constant(&(Matrix::identity(2, 2) * k)));
            assert_eq!(solve(&p, &SdpOptions::default()).unwrap().status, SdpStatus::Feasible);
        }
    }

    #[test]
    fn psd_check_examples() {
        assert!(psd_check(&Matrix::identity(3, 3), 1e-9).unwrap());
        assert!(!psd_check(&m(2, 2, &[1.0, 0.0, 0.0, -1.0]), 1e-9).unwrap());
        assert!(psd_check(&Matrix::zeros(2, 2), 1e-9).unwrap());
    }

    #[test]
    fn bounds_and_objective() {
        // minimize -x subject to x <= 2.5, x >= -1
        let mut p = SdpProblem::new();
        let x = p.add_scalar();
        p.add_bounds(x, Some(-1.0), Some(2.5));
        p.set_objective(Vector::from_element(1, -1.0));
        let sol = solve(&p, &SdpOptions::default()).unwrap();
        assert_abs_diff_eq!(sol.x[0], 2.5, epsilon = 1e-6);
    }

    #[test]
    fn text_dump_mentions_every_constraint() {
        let mut p = SdpProblem::new();
        let s = p.add_sym(2);
        p.add_lmi("P pos", AffineMat::sym(&s));
        p.add_lmi("neg", AffineMat::constant(m(1, 1, &[-1.0])));
        let txt = p.to_text();
        assert!(txt.starts_with("sdp v1\nvars 3\nobjective none\n"));
        assert!(txt.contains("lmi P_pos dim 2"));
        assert_eq!(txt.matches("\nend").count(), 2);
    }
}
