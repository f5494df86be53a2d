//! Ellipsoidal (second-order) and polyhedral cones.
//!
//! `K(P, u) = { x : xᵀPx ≤ 0, −uᵀPx ≥ 0 }` where `P` has exactly one negative
//! eigenvalue and `uᵀPu < 0`. The second condition picks the nappe of the
//! quadratic cone that contains the axis `u`; it is invariant under congruence.
//! The dual cone is `{ y : yᵀP⁻¹y ≤ 0, uᵀy ≥ 0 }`.

use crate::error::{Error, Result};
use crate::lti::StateSpace;
use crate::numkernel::{
    inertia_of, inverse_with_bound, min_eigenvalue, symmetrize, Domain, Inertia, Matrix, Vector,
    ABS_FLOOR,
};

/// Default scale-relative membership tolerance.
pub const DEFAULT_TOL: f64 = 1e-9;

const TRANSFORM_MAX_COND: f64 = 1e12;

#[derive(Debug, Clone, PartialEq)]
pub struct EllipsoidalCone {
    p: Matrix,
    p_inv: Matrix,
    u: Vector,
}

impl EllipsoidalCone {
    /// Validates inertia `(n−1, 1, 0)` and that `u` is strictly inside.
    pub fn new(p: Matrix, u: Vector) -> Result<Self> {
        let n = p.nrows();
        if !p.is_square() || u.len() != n || n == 0 {
            return Err(Error::ShapeMismatch(format!(
                "cone matrix {}x{} with axis of length {}",
                p.nrows(),
                p.ncols(),
                u.len()
            )));
        }
        let p = symmetrize(&p);
        let inertia = inertia_of(&p, DEFAULT_TOL)?;
        if inertia
            != (Inertia {
                n_pos: n - 1,
                n_neg: 1,
                n_zero: 0,
            })
        {
            return Err(Error::Precondition(format!(
                "cone matrix inertia must be ({}, 1, 0), got ({}, {}, {})",
                n - 1,
                inertia.n_pos,
                inertia.n_neg,
                inertia.n_zero
            )));
        }
        let unorm = u.norm();
        if unorm == 0.0 {
            return Err(Error::Precondition("cone axis must be nonzero".into()));
        }
        let u = u / unorm;
        if u.dot(&(&p * &u)) >= 0.0 {
            return Err(Error::Precondition("axis is not interior (uᵀPu ≥ 0)".into()));
        }
        let p_inv = inverse_with_bound(&p, f64::INFINITY).map(|m| symmetrize(&m))?;
        Ok(Self { p, p_inv, u })
    }

    /// `diag(1, …, 1, −1)` with axis `e_n`.
    pub fn lorentz(n: usize) -> Self {
        let mut d = Vector::from_element(n, 1.0);
        d[n - 1] = -1.0;
        let mut u = Vector::zeros(n);
        u[n - 1] = 1.0;
        Self::new(Matrix::from_diagonal(&d), u).expect("Lorentz cone is valid")
    }

    /// `P = T⁻ᵀ·blkdiag(−p0, P1)·T⁻¹` with axis the first column of `T`.
    pub fn from_deflated(p0: f64, p1: &Matrix, t: &Matrix) -> Result<Self> {
        let n = t.nrows();
        if !t.is_square() || p1.shape() != (n - 1, n - 1) {
            return Err(Error::ShapeMismatch(format!(
                "deflated block {}x{} does not fit transform {}x{}",
                p1.nrows(),
                p1.ncols(),
                t.nrows(),
                t.ncols()
            )));
        }
        if !(p0 > 0.0) {
            return Err(Error::Precondition("p0 must be positive".into()));
        }
        if n > 1 && !(min_eigenvalue(p1)? > 0.0) {
            return Err(Error::Precondition("P1 must be positive definite".into()));
        }
        let t_inv = inverse_with_bound(t, TRANSFORM_MAX_COND)?;
        let mut blk = Matrix::zeros(n, n);
        blk[(0, 0)] = -p0;
        let mut blk_inv = Matrix::zeros(n, n);
        blk_inv[(0, 0)] = -1.0 / p0;
        if n > 1 {
            blk.view_mut((1, 1), (n - 1, n - 1)).copy_from(p1);
            let p1_inv = inverse_with_bound(p1, f64::INFINITY)?;
            blk_inv.view_mut((1, 1), (n - 1, n - 1)).copy_from(&p1_inv);
        }
        let p = symmetrize(&(t_inv.transpose() * blk * &t_inv));
        let p_inv = symmetrize(&(t * blk_inv * t.transpose()));
        let axis: Vector = t.column(0).into_owned();
        let u = &axis / axis.norm();
        Ok(Self { p, p_inv, u })
    }

    pub fn p(&self) -> &Matrix {
        &self.p
    }
    pub fn p_inv(&self) -> &Matrix {
        &self.p_inv
    }
    pub fn axis(&self) -> &Vector {
        &self.u
    }
    pub fn dim(&self) -> usize {
        self.u.len()
    }

    pub fn inertia(&self) -> Result<Inertia> {
        inertia_of(&self.p, DEFAULT_TOL)
    }

    /// Quadratic form `xᵀPx`.
    pub fn form(&self, x: &Vector) -> f64 {
        x.dot(&(&self.p * x))
    }

    /// Orientation `−uᵀPx` (nonnegative on the axis nappe).
    pub fn orientation(&self, x: &Vector) -> f64 {
        -self.u.dot(&(&self.p * x))
    }

    pub fn contains(&self, x: &Vector, tol: f64) -> bool {
        let pn = self.p.norm();
        let xn = x.norm();
        self.form(x) <= (tol * xn * xn * pn).max(0.0)
            && self.orientation(x) >= -(tol * xn * pn).max(0.0)
    }

    pub fn dual_contains(&self, y: &Vector, tol: f64) -> bool {
        let pn = self.p_inv.norm();
        let yn = y.norm();
        y.dot(&(&self.p_inv * y)) <= (tol * yn * yn * pn).max(0.0)
            && self.u.dot(y) >= -(tol * yn).max(0.0)
    }

    /// Cone `T⁻¹·K` in the coordinates `ξ = T⁻¹x`: matrix `TᵀPT`, axis `T⁻¹u`.
    pub fn transformed(&self, t: &Matrix) -> Result<Self> {
        let t_inv = inverse_with_bound(t, TRANSFORM_MAX_COND)?;
        let p = symmetrize(&(t.transpose() * &self.p * t));
        let p_inv = symmetrize(&(&t_inv * &self.p_inv * t_inv.transpose()));
        let axis = &t_inv * &self.u;
        let u = &axis / axis.norm();
        Ok(Self { p, p_inv, u })
    }
}

/// `AᵀP + PA − rate·P` (continuous) or `AᵀPA − rate·P` (discrete).
///
/// `R ⪯ 0` gives `e^{At}K ⊆ K` (continuous); in discrete time it gives
/// `AK ⊆ ±K` and the caller also needs the axis orientation to be kept.
pub fn invariance_residual(k: &EllipsoidalCone, a: &Matrix, rate: f64, domain: Domain) -> Matrix {
    let p = k.p();
    let r = match domain {
        Domain::Continuous => a.transpose() * p + p * a - p * rate,
        Domain::Discrete => a.transpose() * p * a - p * rate,
    };
    symmetrize(&r)
}

/// Finitely generated cone `{ Σ αᵢ gᵢ : αᵢ ≥ 0 }`.
#[derive(Debug, Clone)]
pub struct PolyhedralCone {
    generators: Matrix,
}

impl PolyhedralCone {
    pub fn new(generators: Vec<Vector>) -> Result<Self> {
        let n = generators.first().map(|g| g.len()).unwrap_or(0);
        if generators.is_empty() || generators.iter().any(|g| g.len() != n) {
            return Err(Error::ShapeMismatch("generators must share one dimension".into()));
        }
        if generators.iter().all(|g| g.norm() == 0.0) {
            return Err(Error::Precondition("at least one nonzero generator required".into()));
        }
        Ok(Self {
            generators: Matrix::from_columns(&generators),
        })
    }

    pub fn nonnegative_orthant(n: usize) -> Self {
        Self {
            generators: Matrix::identity(n, n),
        }
    }

    pub fn generators(&self) -> &Matrix {
        &self.generators
    }

    /// Membership by nonnegative least squares: `x ∈ K` iff `min_{α≥0} ‖Gα − x‖` vanishes.
    pub fn contains(&self, x: &Vector, tol: f64) -> bool {
        let alpha = nnls(&self.generators, x);
        let resid = (&self.generators * alpha - x).norm();
        resid <= (tol * x.norm().max(1.0)).max(ABS_FLOOR)
    }
}

/// Lawson–Hanson active-set nonnegative least squares.
pub fn nnls(g: &Matrix, x: &Vector) -> Vector {
    let k = g.ncols();
    let mut alpha = Vector::zeros(k);
    let mut passive = vec![false; k];
    let tol = 1e-12 * (g.norm() * x.norm()).max(ABS_FLOOR);
    for _ in 0..(3 * k + 10) {
        let w = g.transpose() * (x - g * &alpha);
        let candidate = (0..k)
            .filter(|&j| !passive[j] && w[j] > tol)
            .max_by(|&i, &j| w[i].total_cmp(&w[j]));
        let Some(j) = candidate else { break };
        passive[j] = true;
        loop {
            let idx: Vec<usize> = (0..k).filter(|&i| passive[i]).collect();
            let sub = Matrix::from_columns(&idx.iter().map(|&i| g.column(i)).collect::<Vec<_>>());
            let z_sub = match sub.clone().svd(true, true).solve(x, 1e-14) {
                Ok(z) => z,
                Err(_) => return alpha,
            };
            if z_sub.iter().all(|&v| v > 0.0) {
                for (pos, &i) in idx.iter().enumerate() {
                    alpha[i] = z_sub[pos];
                }
                break;
            }
            let mut step = 1.0_f64;
            for (pos, &i) in idx.iter().enumerate() {
                if z_sub[pos] <= 0.0 {
                    let denom = alpha[i] - z_sub[pos];
                    if denom > 0.0 {
                        step = step.min(alpha[i] / denom);
                    }
                }
            }
            for (pos, &i) in idx.iter().enumerate() {
                alpha[i] += step * (z_sub[pos] - alpha[i]);
                if alpha[i] <= tol.min(1e-15) {
                    alpha[i] = 0.0;
                    passive[i] = false;
                }
            }
            if !passive.iter().any(|&b| b) {
                break;
            }
        }
    }
    alpha
}

/// Orthant invariance of the given realization: Metzler `A` (continuous) or
/// nonnegative `A` (discrete) together with nonnegative `B`, `C`, `D`.
pub fn polyhedral_internal_positivity(sys: &StateSpace, tol: f64) -> bool {
    let floor = |m: &Matrix| -(tol * m.amax()).max(ABS_FLOOR);
    let a = sys.a();
    let a_ok = match sys.domain() {
        Domain::Continuous => {
            let f = floor(a);
            (0..a.nrows()).all(|i| (0..a.ncols()).all(|j| i == j || a[(i, j)] >= f))
        }
        Domain::Discrete => {
            let f = floor(a);
            a.iter().all(|&v| v >= f)
        }
    };
    a_ok && [sys.b(), sys.c(), sys.d()].iter().all(|m| {
        let f = floor(m);
        m.iter().all(|&v| v >= f)
    })
}
