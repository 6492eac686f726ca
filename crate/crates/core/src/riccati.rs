//! Differential and algebraic Riccati equations of the dual LQ problem
//!
//! ```text
//! P' = A^T P + P A - K^T (D^T S D) K + C^T S C,
//! K  = (D^T S D)^-1 (B^T P + D^T S C)       (K = 0 when D = 0)
//! ```
//!
//! with `S = diag(Q^-1, R^-1)`.

use nalgebra::Complex;

use crate::dae::WeightSpec;
use crate::error::{Error, Result};
use crate::matspace::{block_diag, min_sym_eigenvalue, symmetrize, Mat, Tol};
use crate::reduction::{AssocLti, StabLti};
use crate::spectral::{complex_schur_c, solve_lyapunov, spectral_abscissa, CMat};

/// `diag(Q^-1, R^-1)`.
pub fn weight_matrix_s(w: &WeightSpec) -> Result<Mat> {
    let inv = |m: &Mat, what: &str| {
        m.clone()
            .cholesky()
            .map(|c| symmetrize(&c.inverse()))
            .ok_or_else(|| Error::NotPositiveDefinite(what.to_string()))
    };
    Ok(block_diag(&inv(w.q(), "Q")?, &inv(w.r(), "R")?))
}

/// Coefficients of the Riccati equations for `x' = A x + B g`,
/// `z = C x + D g` with output weight `S`.
#[derive(Debug, Clone)]
pub struct RiccatiData {
    a: Mat,
    b: Mat,
    /// `C^T S C`
    qc: Mat,
    /// `C^T S D`
    cross: Mat,
    /// `D^T S D`, `None` on the degenerate branch `D = 0`.
    r: Option<Mat>,
    rinv: Option<Mat>,
}

impl RiccatiData {
    pub fn new(a: &Mat, b: &Mat, c: &Mat, d: &Mat, s: &Mat, tol: &Tol) -> Result<Self> {
        let n = a.nrows();
        let k = b.ncols();
        if a.ncols() != n
            || b.nrows() != n
            || c.ncols() != n
            || d.nrows() != c.nrows()
            || d.ncols() != k
            || s.shape() != (c.nrows(), c.nrows())
        {
            return Err(Error::Dimension("Riccati coefficient shapes disagree".into()));
        }
        let qc = symmetrize(&(c.transpose() * s * c));
        let cross = c.transpose() * s * d;
        let (r, rinv) = if d.norm() <= tol.abs_floor {
            (None, None)
        } else {
            let r = symmetrize(&(d.transpose() * s * d));
            let rn = r.norm();
            if min_sym_eigenvalue(&r) <= 1e-13 * rn {
                return Err(Error::SingularGain);
            }
            let rinv = r.clone().cholesky().ok_or(Error::SingularGain)?.inverse();
            (Some(r), Some(symmetrize(&rinv)))
        };
        Ok(RiccatiData {
            a: a.clone(),
            b: b.clone(),
            qc,
            cross,
            r,
            rinv,
        })
    }

    pub fn dim(&self) -> usize {
        self.a.nrows()
    }

    pub fn inputs(&self) -> usize {
        self.b.ncols()
    }

    pub fn is_degenerate(&self) -> bool {
        self.r.is_none()
    }

    pub fn gain(&self, p: &Mat) -> Mat {
        match &self.rinv {
            Some(rinv) => rinv * (self.b.transpose() * p + self.cross.transpose()),
            None => Mat::zeros(self.inputs(), self.dim()),
        }
    }

    /// Right-hand side of the differential equation (also the algebraic
    /// residual when evaluated at a stationary point).
    pub fn rhs(&self, p: &Mat) -> Mat {
        let mut out = self.a.transpose() * p + p * &self.a + &self.qc;
        if let Some(r) = &self.r {
            let k = self.gain(p);
            out -= k.transpose() * r * k;
        }
        out
    }

    pub fn closed_loop(&self, p: &Mat) -> Mat {
        &self.a - &self.b * self.gain(p)
    }
}

/// Sampled solution of the differential Riccati equation on `[0, t1]`.
#[derive(Debug, Clone)]
pub struct DreSolution {
    pub dt: f64,
    pub p: Vec<Mat>,
    pub pdot: Vec<Mat>,
    pub k: Vec<Mat>,
    /// Gains at every RK4 sub-step. Interval `i` is split into an even
    /// number of sub-steps, so it holds an odd count of gains running from
    /// `k[i]` to `k[i + 1]`.
    pub fine_k: Vec<Vec<Mat>>,
    data: RiccatiData,
}

impl DreSolution {
    pub fn steps(&self) -> usize {
        self.p.len() - 1
    }

    pub fn t1(&self) -> f64 {
        self.dt * self.steps() as f64
    }

    pub fn data(&self) -> &RiccatiData {
        &self.data
    }

    pub fn last(&self) -> &Mat {
        self.p.last().expect("non-empty DRE solution")
    }

    /// `P(t)` by cubic Hermite interpolation of the stored `(P, P')`.
    pub fn p_at(&self, t: f64) -> Mat {
        let n = self.steps();
        let x = (t / self.dt).clamp(0.0, n as f64);
        let i = (x.floor() as usize).min(n.saturating_sub(1));
        let s = x - i as f64;
        if n == 0 || s <= 0.0 {
            return self.p[i].clone();
        }
        if s >= 1.0 {
            return self.p[i + 1].clone();
        }
        let (s2, s3) = (s * s, s * s * s);
        let h00 = 2.0 * s3 - 3.0 * s2 + 1.0;
        let h10 = s3 - 2.0 * s2 + s;
        let h01 = -2.0 * s3 + 3.0 * s2;
        let h11 = s3 - s2;
        &self.p[i] * h00
            + &self.pdot[i] * (h10 * self.dt)
            + &self.p[i + 1] * h01
            + &self.pdot[i + 1] * (h11 * self.dt)
    }

    pub fn gain_at(&self, t: f64) -> Mat {
        self.data.gain(&self.p_at(t))
    }

    /// Largest symmetry defect and most negative eigenvalue (relative to
    /// `||P||`) over the stored samples.
    pub fn psd_report(&self) -> (f64, f64) {
        let mut asym: f64 = 0.0;
        let mut neg: f64 = 0.0;
        for p in &self.p {
            let nrm = p.norm().max(f64::MIN_POSITIVE);
            asym = asym.max((p - p.transpose()).amax());
            neg = neg.min(min_sym_eigenvalue(p) / nrm);
        }
        (asym, neg)
    }
}

/// Number of RK4 sub-steps keeping `h * ||A - B K||` inside the stability
/// region for the linearized flow `X -> Acl^T X + X Acl`.
fn substeps_for(acl: &Mat, h: f64) -> usize {
    let rate = 2.0 * acl.norm();
    ((rate * h / 2.0).ceil() as usize).max(1)
}

/// Integrates the differential Riccati equation from `p0` over `[0, t1]`.
pub fn solve_dre_with(data: RiccatiData, p0: &Mat, t1: f64, steps: usize) -> Result<DreSolution> {
    if !(t1 > 0.0) || steps < 2 {
        return Err(Error::InvalidArgument(format!(
            "DRE needs t1 > 0 and at least 2 steps (got {t1}, {steps})"
        )));
    }
    let n = data.dim();
    if p0.shape() != (n, n) {
        return Err(Error::Dimension(format!("P(0) must be {n}x{n}")));
    }
    let dt = t1 / steps as f64;
    let mut p = p0.clone();
    let mut ps = Vec::with_capacity(steps + 1);
    let mut pdots = Vec::with_capacity(steps + 1);
    let mut ks = Vec::with_capacity(steps + 1);
    ps.push(p.clone());
    pdots.push(data.rhs(&p));
    ks.push(data.gain(&p));
    let mut fine_k = Vec::with_capacity(steps);
    for _ in 0..steps {
        // The sub-step count follows the closed loop, which stiffens as P
        // grows. It is kept even so that consumers can take RK4 steps of
        // twice the length with every stage on a stored gain.
        let mut sub = substeps_for(&data.closed_loop(&p), dt);
        sub += sub % 2;
        let h = dt / sub as f64;
        let mut gains = Vec::with_capacity(sub + 1);
        gains.push(data.gain(&p));
        for _ in 0..sub {
            let k1 = data.rhs(&p);
            let k2 = data.rhs(&(&p + &k1 * (0.5 * h)));
            let k3 = data.rhs(&(&p + &k2 * (0.5 * h)));
            let k4 = data.rhs(&(&p + &k3 * h));
            p += (k1 + k2 * 2.0 + k3 * 2.0 + k4) * (h / 6.0);
            p = symmetrize(&p);
            gains.push(data.gain(&p));
        }
        fine_k.push(gains);
        if !p.iter().all(|x| x.is_finite()) {
            return Err(Error::NotFinite("differential Riccati solution".into()));
        }
        pdots.push(data.rhs(&p));
        ks.push(data.gain(&p));
        ps.push(p.clone());
    }
    Ok(DreSolution {
        dt,
        p: ps,
        pdot: pdots,
        k: ks,
        fine_k,
        data,
    })
}

/// DRE of an associated LTI system with `P(0) = Cs^T Qbar0 Cs`.
pub fn solve_dre(
    s: &AssocLti,
    w: &WeightSpec,
    qbar0: &Mat,
    t1: f64,
    steps: usize,
    tol: &Tol,
) -> Result<DreSolution> {
    let sw = weight_matrix_s(w)?;
    let data = RiccatiData::new(&s.aa, &s.ba, &s.ca, &s.da, &sw, tol)?;
    if qbar0.shape() != (s.cs.nrows(), s.cs.nrows()) {
        return Err(Error::Dimension("Qbar0 does not match the state map".into()));
    }
    let p0 = symmetrize(&(s.cs.transpose() * qbar0 * &s.cs));
    solve_dre_with(data, &p0, t1, steps)
}

/// Stabilizing solution of the algebraic Riccati equation.
#[derive(Debug, Clone)]
pub struct CareSolution {
    pub p: Mat,
    pub k: Mat,
    /// Frobenius norm of the equation residual at `p`.
    pub residual: f64,
    /// Largest real part of the spectrum of `A - B K`.
    pub closed_loop_abscissa: f64,
}

impl CareSolution {
    pub fn residual_ok(&self) -> bool {
        let pn = self.p.norm();
        self.residual <= 1e-8 * (1.0 + pn * pn)
    }
}

pub fn solve_care(g: &StabLti, w: &WeightSpec, tol: &Tol) -> Result<CareSolution> {
    let sw = weight_matrix_s(w)?;
    let data = RiccatiData::new(&g.ag, &g.bg, &g.cg, &g.dg, &sw, tol)?;
    solve_care_with(&data)
}

pub fn solve_care_with(data: &RiccatiData) -> Result<CareSolution> {
    let l = data.dim();
    if l == 0 {
        return Ok(CareSolution {
            p: Mat::zeros(0, 0),
            k: Mat::zeros(data.inputs(), 0),
            residual: 0.0,
            closed_loop_abscissa: f64::NEG_INFINITY,
        });
    }
    let p = match (&data.r, &data.rinv) {
        (None, _) | (_, None) => {
            if spectral_abscissa(&data.a)? >= 0.0 {
                return Err(Error::NoStabilizingSolution(
                    "the uncontrolled dual system is not Hurwitz, so the Lyapunov branch has no \
                     stabilizing solution"
                        .into(),
                ));
            }
            solve_lyapunov(&data.a, &data.qc)?
        }
        (Some(_), Some(rinv)) => {
            let p = hamiltonian_solution(data, rinv)?;
            newton_refine(data, &p, 8)?
        }
    };
    finish_care(data, p)
}

fn finish_care(data: &RiccatiData, p: Mat) -> Result<CareSolution> {
    let k = data.gain(&p);
    let residual = data.rhs(&p).norm();
    let closed_loop_abscissa = spectral_abscissa(&data.closed_loop(&p))?;
    if closed_loop_abscissa >= 0.0 {
        return Err(Error::NoStabilizingSolution(format!(
            "closed loop has an eigenvalue with real part {closed_loop_abscissa:.3e}"
        )));
    }
    Ok(CareSolution {
        p,
        k,
        residual,
        closed_loop_abscissa,
    })
}

/// Stable invariant subspace `[U1; U2]` of the Hamiltonian
/// `[[Ab, -B R^-1 B^T], [-Qb, -Ab^T]]`, then `P = U2 U1^-1`.
fn hamiltonian_solution(data: &RiccatiData, rinv: &Mat) -> Result<Mat> {
    let l = data.dim();
    let a_bar = &data.a - &data.b * rinv * data.cross.transpose();
    let q_bar = symmetrize(&(&data.qc - &data.cross * rinv * data.cross.transpose()));
    let g = symmetrize(&(&data.b * rinv * data.b.transpose()));
    let mut ham = Mat::zeros(2 * l, 2 * l);
    ham.view_mut((0, 0), (l, l)).copy_from(&a_bar);
    ham.view_mut((0, l), (l, l)).copy_from(&(-g));
    ham.view_mut((l, 0), (l, l)).copy_from(&(-q_bar));
    ham.view_mut((l, l), (l, l)).copy_from(&(-a_bar.transpose()));

    let mut schur = complex_schur_c(ham.map(|x| Complex::new(x, 0.0)))?;
    let scale = ham.norm().max(1.0);
    let stable = schur.reorder(|z| z.re < -1e-12 * scale);
    if stable != l {
        return Err(Error::NoStabilizingSolution(format!(
            "Hamiltonian has {stable} stable eigenvalues, expected {l} (eigenvalues on or near \
             the imaginary axis)"
        )));
    }
    let u1: CMat = schur.q.view((0, 0), (l, l)).into_owned();
    let u2: CMat = schur.q.view((l, 0), (l, l)).into_owned();
    // P = U2 U1^-1, i.e. P^T = U1^-T U2^T.
    let lu = u1.transpose().lu();
    let pt = lu.solve(&u2.transpose()).ok_or_else(|| {
        Error::NoStabilizingSolution("stable invariant subspace is not a graph".into())
    })?;
    let p = pt.transpose().map(|z| z.re);
    if !p.iter().all(|x| x.is_finite()) {
        return Err(Error::NoStabilizingSolution("non-finite Riccati solution".into()));
    }
    Ok(symmetrize(&p))
}

/// Newton-Kleinman iterations from `p0`, keeping an iterate only when it
/// lowers the residual.
pub fn newton_refine(data: &RiccatiData, p0: &Mat, max_iter: usize) -> Result<Mat> {
    let Some(r) = &data.r else {
        return Ok(p0.clone());
    };
    let mut best = p0.clone();
    let mut best_res = data.rhs(&best).norm();
    let mut p = p0.clone();
    for _ in 0..max_iter {
        let k = data.gain(&p);
        let acl = &data.a - &data.b * &k;
        if spectral_abscissa(&acl)? >= 0.0 {
            break;
        }
        let ktn = k.transpose() * data.cross.transpose();
        let w = &data.qc + k.transpose() * r * &k - &ktn - ktn.transpose();
        let next = match solve_lyapunov(&acl, &symmetrize(&w)) {
            Ok(x) => x,
            Err(_) => break,
        };
        let res = data.rhs(&next).norm();
        p = next;
        if res < best_res {
            best_res = res;
            best = p.clone();
        } else {
            break;
        }
    }
    Ok(best)
}
