//! Problem data: the descriptor triple `(F, A, H)`, the noise ellipsoid and
//! the quadratic forms measuring noise energy.

use crate::error::{Error, Result};
use crate::matspace::{kernel_basis, min_sym_eigenvalue, symmetrize, Mat, Tol, Vector};
use crate::simulate::{Quadrature, TrajectoryGrid};

fn check_finite(m: &Mat, what: &str) -> Result<()> {
    if m.iter().all(|x| x.is_finite()) {
        Ok(())
    } else {
        Err(Error::NotFinite(what.to_string()))
    }
}

/// `d(Fx)/dt = Ax + f`, `y = Hx + eta`.
#[derive(Debug, Clone, PartialEq)]
pub struct DaeTriple {
    f: Mat,
    a: Mat,
    h: Mat,
}

impl DaeTriple {
    pub fn new(f: Mat, a: Mat, h: Mat) -> Result<Self> {
        if f.shape() != a.shape() {
            return Err(Error::Dimension(format!(
                "F is {}x{} but A is {}x{}",
                f.nrows(),
                f.ncols(),
                a.nrows(),
                a.ncols()
            )));
        }
        if h.ncols() != f.ncols() {
            return Err(Error::Dimension(format!(
                "H has {} columns, F has {}",
                h.ncols(),
                f.ncols()
            )));
        }
        if f.nrows() == 0 || f.ncols() == 0 || h.nrows() == 0 {
            return Err(Error::Dimension("empty F, A or H".into()));
        }
        check_finite(&f, "F")?;
        check_finite(&a, "A")?;
        check_finite(&h, "H")?;
        Ok(DaeTriple { f, a, h })
    }

    pub fn f(&self) -> &Mat {
        &self.f
    }

    pub fn a(&self) -> &Mat {
        &self.a
    }

    pub fn h(&self) -> &Mat {
        &self.h
    }

    /// Number of equations.
    pub fn m(&self) -> usize {
        self.f.nrows()
    }

    /// Number of unknowns.
    pub fn n(&self) -> usize {
        self.f.ncols()
    }

    /// Number of outputs.
    pub fn p(&self) -> usize {
        self.h.nrows()
    }
}

/// The adjoint system `d(F^T q)/dt = A^T q - H^T u` with state `q` in
/// `R^m` and input `u` in `R^p`.
///
/// `H^T` acts on the input rather than the state, so this is kept apart from
/// [`DaeTriple`] whose third matrix is an output map.
#[derive(Debug, Clone, PartialEq)]
pub struct DualDae {
    pub ft: Mat,
    pub at: Mat,
    pub ht: Mat,
}

impl DualDae {
    pub fn state_dim(&self) -> usize {
        self.ft.ncols()
    }

    pub fn input_dim(&self) -> usize {
        self.ht.ncols()
    }

    /// Transposes back to the primal triple.
    pub fn dual(&self) -> DaeTriple {
        DaeTriple {
            f: self.ft.transpose(),
            a: self.at.transpose(),
            h: self.ht.transpose(),
        }
    }

    /// Running residual `F^T q(t) - F^T q(0) - int_0^t (A^T q - H^T u)`,
    /// reported as its largest norm over the grid.
    pub fn residual(&self, q: &TrajectoryGrid, u: &TrajectoryGrid) -> Result<f64> {
        if !q.same_grid(u) {
            return Err(Error::GridMismatch("dual state and input grids differ".into()));
        }
        let rhs = q
            .samples()
            .iter()
            .zip(u.samples())
            .map(|(qk, uk)| &self.at * qk - &self.ht * uk)
            .collect();
        let rhs = TrajectoryGrid::new(q.t0(), q.dt(), rhs)?.cumulative();
        let ftq0 = &self.ft * q.sample(0);
        Ok(q.samples()
            .iter()
            .zip(rhs.samples())
            .map(|(qk, ik)| (&self.ft * qk - &ftq0 - ik).norm())
            .fold(0.0, f64::max))
    }
}

pub fn dual_triple(d: &DaeTriple) -> DualDae {
    DualDae {
        ft: d.f.transpose(),
        at: d.a.transpose(),
        ht: d.h.transpose(),
    }
}

/// Noise ellipsoid weights `(Q0, Q, R)`, all symmetric positive definite.
#[derive(Debug, Clone, PartialEq)]
pub struct WeightSpec {
    q0: Mat,
    q: Mat,
    r: Mat,
}

fn check_spd(m: &Mat, what: &str) -> Result<()> {
    if !m.is_square() || m.nrows() == 0 {
        return Err(Error::Dimension(format!("{what} must be square and non-empty")));
    }
    check_finite(m, what)?;
    let norm = m.norm();
    if (m - m.transpose()).norm() > 1e-12 * norm {
        return Err(Error::NotSymmetric(what.to_string()));
    }
    let trace = m.trace();
    if !(trace > 0.0) || min_sym_eigenvalue(m) <= 1e-12 * trace {
        return Err(Error::NotPositiveDefinite(what.to_string()));
    }
    Ok(())
}

impl WeightSpec {
    pub fn new(q0: Mat, q: Mat, r: Mat) -> Result<Self> {
        check_spd(&q0, "Q0")?;
        check_spd(&q, "Q")?;
        check_spd(&r, "R")?;
        if q0.nrows() != q.nrows() {
            return Err(Error::Dimension(format!(
                "Q0 is {0}x{0} but Q is {1}x{1}",
                q0.nrows(),
                q.nrows()
            )));
        }
        Ok(WeightSpec { q0, q, r })
    }

    pub fn identity(m: usize, p: usize) -> Self {
        WeightSpec {
            q0: Mat::identity(m, m),
            q: Mat::identity(m, m),
            r: Mat::identity(p, p),
        }
    }

    pub fn check_against(&self, d: &DaeTriple) -> Result<()> {
        if self.q.nrows() != d.m() || self.r.nrows() != d.p() {
            return Err(Error::Dimension(format!(
                "weights sized for m={}, p={} but the triple has m={}, p={}",
                self.q.nrows(),
                self.r.nrows(),
                d.m(),
                d.p()
            )));
        }
        Ok(())
    }

    pub fn q0(&self) -> &Mat {
        &self.q0
    }

    pub fn q(&self) -> &Mat {
        &self.q
    }

    pub fn r(&self) -> &Mat {
        &self.r
    }
}

/// The functional `x -> l^T F x`.
#[derive(Debug, Clone, PartialEq)]
pub struct Functional {
    ell: Vector,
}

impl Functional {
    pub fn new(ell: Vector) -> Result<Self> {
        if ell.is_empty() || !ell.iter().all(|x| x.is_finite()) {
            return Err(Error::InvalidArgument("functional must be finite and non-empty".into()));
        }
        Ok(Functional { ell })
    }

    /// Unit vector `e_index` in `R^m` (`index` is zero-based).
    pub fn unit(m: usize, index: usize) -> Result<Self> {
        if index >= m {
            return Err(Error::InvalidArgument(format!(
                "functional index {} out of range 1..={m}",
                index + 1
            )));
        }
        let mut ell = Vector::zeros(m);
        ell[index] = 1.0;
        Ok(Functional { ell })
    }

    pub fn ell(&self) -> &Vector {
        &self.ell
    }

    pub fn check_against(&self, d: &DaeTriple) -> Result<()> {
        if self.ell.len() != d.m() {
            return Err(Error::Dimension(format!(
                "functional has length {}, expected m = {}",
                self.ell.len(),
                d.m()
            )));
        }
        Ok(())
    }

    /// `l^T F x`.
    pub fn apply(&self, d: &DaeTriple, x: &Vector) -> f64 {
        self.ell.dot(&(d.f() * x))
    }
}

/// A sampled solution `(x, f, y, eta)` of the DAE.
#[derive(Debug, Clone, PartialEq)]
pub struct SolutionTuple {
    pub x: TrajectoryGrid,
    pub f: TrajectoryGrid,
    pub y: TrajectoryGrid,
    pub eta: TrajectoryGrid,
}

impl SolutionTuple {
    pub fn new(
        x: TrajectoryGrid,
        f: TrajectoryGrid,
        y: TrajectoryGrid,
        eta: TrajectoryGrid,
    ) -> Result<Self> {
        if !(x.same_grid(&f) && x.same_grid(&y) && x.same_grid(&eta)) {
            return Err(Error::GridMismatch("solution components on different grids".into()));
        }
        Ok(SolutionTuple { x, f, y, eta })
    }

    /// Largest violation of `Fx(t) = Fx(0) + int_0^t (Ax + f)` and of
    /// `y = Hx + eta` over the grid, relative to the size of `Fx`.
    pub fn residual(&self, d: &DaeTriple) -> Result<f64> {
        if self.x.dim() != d.n() || self.f.dim() != d.m() || self.y.dim() != d.p() {
            return Err(Error::Dimension("solution does not match the triple".into()));
        }
        let rhs = self
            .x
            .samples()
            .iter()
            .zip(self.f.samples())
            .map(|(xk, fk)| d.a() * xk + fk)
            .collect();
        let integral = TrajectoryGrid::new(self.x.t0(), self.x.dt(), rhs)?.cumulative();
        let fx0 = d.f() * self.x.sample(0);
        let mut scale: f64 = 1.0;
        let mut worst: f64 = 0.0;
        for k in 0..self.x.len() {
            let fx = d.f() * self.x.sample(k);
            scale = scale.max(fx.norm());
            worst = worst.max((&fx - &fx0 - integral.sample(k)).norm());
            let out = d.h() * self.x.sample(k) + self.eta.sample(k) - self.y.sample(k);
            worst = worst.max(out.norm());
        }
        Ok(worst / scale)
    }

    pub fn validate(&self, d: &DaeTriple, tol: f64) -> Result<()> {
        let r = self.residual(d)?;
        if r > tol {
            return Err(Error::InvalidArgument(format!(
                "solution residual {r:.3e} exceeds {tol:.1e}"
            )));
        }
        Ok(())
    }

    pub fn scaled(&self, alpha: f64) -> Self {
        SolutionTuple {
            x: self.x.scaled(alpha),
            f: self.f.scaled(alpha),
            y: self.y.scaled(alpha),
            eta: self.eta.scaled(alpha),
        }
    }
}

/// `x0^T S0 x0 + int_0^t1 (f^T S1 f + eta^T S2 eta) dt`.
#[allow(clippy::too_many_arguments)]
pub fn quadratic_cost(
    x0: &Vector,
    s0: &Mat,
    f: &TrajectoryGrid,
    s1: &Mat,
    eta: &TrajectoryGrid,
    s2: &Mat,
    t1: f64,
    rule: Quadrature,
) -> Result<f64> {
    if x0.len() != s0.nrows() || f.dim() != s1.nrows() || eta.dim() != s2.nrows() {
        return Err(Error::Dimension("weights do not match signal sizes".into()));
    }
    let head = x0.dot(&(s0 * x0));
    let fi = f.integrate(t1, rule, |_, v| v.dot(&(s1 * v)))?;
    let ei = eta.integrate(t1, rule, |_, v| v.dot(&(s2 * v)))?;
    Ok(head + fi + ei)
}

/// Energy of the uncertain data `(Fx(0), f, eta)` on `[0, t1]`.
pub fn rho(
    x0: &Vector,
    f: &TrajectoryGrid,
    eta: &TrajectoryGrid,
    t1: f64,
    w: &WeightSpec,
) -> Result<f64> {
    quadratic_cost(x0, &w.q0, f, &w.q, eta, &w.r, t1, Quadrature::Trapezoid)
}

/// Terminal weight of the dual cost: the quadratic form
/// `v -> min { w^T Q0^-1 w : F^T w = F^T v }`.
pub fn qbar0(f: &Mat, q0: &Mat, tol: &Tol) -> Result<Mat> {
    let m = f.nrows();
    if q0.shape() != (m, m) {
        return Err(Error::Dimension(format!(
            "Q0 must be {m}x{m}, got {}x{}",
            q0.nrows(),
            q0.ncols()
        )));
    }
    let q0inv = q0
        .clone()
        .try_inverse()
        .filter(|x| x.iter().all(|v| v.is_finite()))
        .ok_or_else(|| Error::NotPositiveDefinite("Q0 (not invertible)".into()))?;
    // Minimise over w = v + Z c with Z an orthonormal basis of ker F^T.
    let z = kernel_basis(&f.transpose(), tol)?.into_basis();
    if z.ncols() == 0 {
        return Ok(symmetrize(&q0inv));
    }
    if z.ncols() == m {
        return Ok(Mat::zeros(m, m));
    }
    let qz = &q0inv * &z;
    let core = (z.transpose() * &qz)
        .cholesky()
        .ok_or_else(|| Error::NotPositiveDefinite("Q0 restricted to ker F^T".into()))?
        .inverse();
    Ok(symmetrize(&(&q0inv - &qz * core * qz.transpose())))
}
