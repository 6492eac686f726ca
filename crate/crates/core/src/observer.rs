//! Finite- and infinite-horizon minimax observers for `l^T F x`, the optimal
//! adjoint trajectories that certify their error bounds, and the error
//! dynamics of the infinite-horizon observer.

use crate::dae::{qbar0, quadratic_cost, DaeTriple, Functional, WeightSpec};
use crate::error::{Error, Result};
use crate::matspace::{vstack, Mat, Tol, Vector};
use crate::reduction::{
    assoc_lti, is_l_detectable_with, is_l_impulse_observable_with, stab_assoc_lti, AssocLti,
    StabLti,
};
use crate::riccati::{solve_care, solve_dre, weight_matrix_s, CareSolution, DreSolution};
use crate::simulate::{rk4_substepped, GridSpec, Quadrature, TrajectoryGrid};

/// RK4 sub-steps per grid interval so that `h * ||a||` stays well inside the
/// stability interval.
fn substeps(a: &Mat, dt: f64) -> usize {
    ((a.norm() * dt / 2.0).ceil() as usize).max(1)
}

/// Optimal estimator of `l^T F x(t1)` from outputs on `[0, t1]`.
#[derive(Debug, Clone)]
pub struct FiniteHorizonObserver {
    pub assoc: AssocLti,
    pub dre: DreSolution,
    pub ell: Functional,
    pub t1: f64,
    /// Worst-case squared estimation error.
    pub sigma: f64,
    /// `M F^T l`, the initial state of the optimal adjoint trajectory.
    pub v0: Vector,
    pub qbar0: Mat,
}

impl FiniteHorizonObserver {
    /// `l^T F M^T P(t1) M F^T l` recomputed from the stored parts.
    pub fn sigma_from_parts(&self, d: &DaeTriple) -> f64 {
        let v = &self.assoc.state_map * (d.f().transpose() * self.ell.ell());
        v.dot(&(self.dre.last() * &v))
    }
}

/// Advances `x` across one Riccati interval starting at `t0` with RK4 steps
/// of length `2h`, where `h` is the spacing of `gains`. Every stage then sits
/// on a stored gain, so the schedule is never interpolated; interpolating
/// across a fast initial transient of `P` can overshoot by orders of
/// magnitude.
fn sweep_interval<G>(x: &mut Vector, t0: f64, h: f64, gains: &[&Mat], rhs: G)
where
    G: Fn(f64, &Mat, &Vector) -> Vector,
{
    for j in (0..gains.len() - 1).step_by(2) {
        let t = t0 + j as f64 * h;
        let k1 = rhs(t, gains[j], x);
        let k2 = rhs(t + h, gains[j + 1], &(&*x + &k1 * h));
        let k3 = rhs(t + h, gains[j + 1], &(&*x + &k2 * h));
        let k4 = rhs(t + 2.0 * h, gains[j + 2], &(&*x + &k3 * (2.0 * h)));
        *x += (k1 + k2 * 2.0 + k3 * 2.0 + k4) * (h / 3.0);
    }
}

pub fn design_finite(
    d: &DaeTriple,
    w: &WeightSpec,
    ell: &Functional,
    t1: f64,
    steps: usize,
    tol: &Tol,
) -> Result<FiniteHorizonObserver> {
    w.check_against(d)?;
    ell.check_against(d)?;
    let assoc = assoc_lti(d, tol)?;
    if !is_l_impulse_observable_with(d, &assoc, ell, tol)? {
        return Err(Error::NotImpulseObservable);
    }
    let qb = qbar0(d.f(), w.q0(), tol)?;
    let dre = solve_dre(&assoc, w, &qb, t1, steps, tol)?;
    let v0 = &assoc.state_map * (d.f().transpose() * ell.ell());
    let sigma = v0.dot(&(dre.last() * &v0));
    Ok(FiniteHorizonObserver {
        assoc,
        dre,
        ell: ell.clone(),
        t1,
        sigma,
        v0,
        qbar0: qb,
    })
}

fn check_covers(y: &TrajectoryGrid, t1: f64, p: usize) -> Result<()> {
    if y.dim() != p {
        return Err(Error::Dimension(format!(
            "output signal has dimension {}, expected {p}",
            y.dim()
        )));
    }
    if y.t0().abs() > 1e-12 * y.dt() || y.end_time() < t1 - 1e-9 * y.dt().max(t1) {
        return Err(Error::GridMismatch(format!(
            "output grid [{}, {}] does not cover [0, {t1}]",
            y.t0(),
            y.end_time()
        )));
    }
    Ok(())
}

/// Estimate of `l^T F x(t1)`: integrates
/// `r' = (Aa - Ba K(t))^T r + (Cu - Du K(t))^T y` from `r(0) = 0` on the
/// Riccati grid and returns `v0^T r(t1)`.
pub fn run_finite(obs: &FiniteHorizonObserver, y: &TrajectoryGrid) -> Result<f64> {
    check_covers(y, obs.t1, obs.assoc.cu.nrows())?;
    let n_hat = obs.assoc.n_hat();
    if n_hat == 0 {
        return Ok(0.0);
    }
    let s = &obs.assoc;
    let dt = obs.dre.dt;
    let mut r = Vector::zeros(n_hat);
    for (i, fine) in obs.dre.fine_k.iter().enumerate() {
        let gains: Vec<&Mat> = fine.iter().collect();
        let h = dt / (gains.len() - 1) as f64;
        sweep_interval(&mut r, i as f64 * dt, h, &gains, |t, k, r| {
            (&s.aa - &s.ba * k).transpose() * r + (&s.cu - &s.du * k).transpose() * y.at(t)
        });
    }
    Ok(obs.v0.dot(&r))
}

/// Sampled solution `(q, u)` of the adjoint DAE.
#[derive(Debug, Clone)]
pub struct DualTrajectory {
    pub q: TrajectoryGrid,
    pub u: TrajectoryGrid,
}

/// Optimal adjoint pair: `v' = (Aa - Ba K(t1 - s)) v`, `v(0) = M F^T l`,
/// `q* = (Cs - Ds K(t1 - s)) v`, `u* = (Cu - Du K(t1 - s)) v`.
pub fn optimal_dual_trajectory_finite(obs: &FiniteHorizonObserver) -> Result<DualTrajectory> {
    let grid = GridSpec::new(0.0, obs.dre.dt, obs.dre.steps())?;
    let m = obs.assoc.cs.nrows();
    let p = obs.assoc.cu.nrows();
    if obs.assoc.n_hat() == 0 {
        return Ok(DualTrajectory {
            q: TrajectoryGrid::zeros(m, grid),
            u: TrajectoryGrid::zeros(p, grid),
        });
    }
    // s = t1 - t runs the Riccati intervals backwards.
    let sa = &obs.assoc;
    let steps = obs.dre.steps();
    let mut v = obs.v0.clone();
    let mut vs = Vec::with_capacity(steps + 1);
    vs.push(v.clone());
    for fine in obs.dre.fine_k.iter().rev() {
        let gains: Vec<&Mat> = fine.iter().rev().collect();
        let h = obs.dre.dt / (gains.len() - 1) as f64;
        sweep_interval(&mut v, 0.0, h, &gains, |_, k, v| (&sa.aa - &sa.ba * k) * v);
        vs.push(v.clone());
    }
    let out = |idx: usize, c: &Mat, d: &Mat| c * &vs[idx] - d * (&obs.dre.k[steps - idx] * &vs[idx]);
    let q = TrajectoryGrid::new(0.0, grid.dt, (0..=steps).map(|i| out(i, &sa.cs, &sa.ds)).collect())?;
    let u = TrajectoryGrid::new(0.0, grid.dt, (0..=steps).map(|i| out(i, &sa.cu, &sa.du)).collect())?;
    Ok(DualTrajectory { q, u })
}

/// `q(t1)^T Qbar0 q(t1) + int_0^t1 (q^T Q^-1 q + u^T R^-1 u)`.
pub fn dual_cost_j(traj: &DualTrajectory, w: &WeightSpec, qbar0: &Mat, t1: f64) -> Result<f64> {
    dual_cost_j_with(traj, w, qbar0, t1, Quadrature::Trapezoid)
}

pub fn dual_cost_j_with(
    traj: &DualTrajectory,
    w: &WeightSpec,
    qbar0: &Mat,
    t1: f64,
    rule: Quadrature,
) -> Result<f64> {
    let s = weight_matrix_s(w)?;
    let m = w.q().nrows();
    let p = w.r().nrows();
    let qinv = s.view((0, 0), (m, m)).into_owned();
    let rinv = s.view((m, m), (p, p)).into_owned();
    let qt1 = traj.q.at(t1);
    quadratic_cost(&qt1, qbar0, &traj.q, &qinv, &traj.u, &rinv, t1, rule)
}

/// `r' = Ao r + Bo y`, estimates `Co r`.
#[derive(Debug, Clone)]
pub struct ObserverLti {
    pub ao: Mat,
    pub bo: Mat,
    pub co: Mat,
    /// Worst-case squared error per functional (row of `co`).
    pub sigma: Vec<f64>,
}

/// Everything produced while designing an infinite-horizon observer.
#[derive(Debug, Clone)]
pub struct InfiniteDesign {
    pub assoc: AssocLti,
    pub stab: StabLti,
    pub care: CareSolution,
    pub ells: Vec<Functional>,
    pub observer: ObserverLti,
}

impl InfiniteDesign {
    /// `Mg F^T l`.
    pub fn v0(&self, d: &DaeTriple, ell: &Functional) -> Vector {
        &self.stab.state_map * (d.f().transpose() * ell.ell())
    }

    /// `Ag - Bg K`.
    pub fn closed_loop(&self) -> Mat {
        &self.stab.ag - &self.stab.bg * &self.care.k
    }

    /// Slowest decay time `1 / |max Re eig(Ao)|`.
    pub fn time_constant(&self) -> f64 {
        1.0 / self.care.closed_loop_abscissa.abs()
    }
}

pub fn design_infinite(
    d: &DaeTriple,
    w: &WeightSpec,
    ells: &[Functional],
    tol: &Tol,
) -> Result<ObserverLti> {
    Ok(design_infinite_full(d, w, ells, tol)?.observer)
}

pub fn design_infinite_full(
    d: &DaeTriple,
    w: &WeightSpec,
    ells: &[Functional],
    tol: &Tol,
) -> Result<InfiniteDesign> {
    w.check_against(d)?;
    if ells.is_empty() {
        return Err(Error::InvalidArgument("no functionals requested".into()));
    }
    let assoc = assoc_lti(d, tol)?;
    let stab = stab_assoc_lti(&assoc, tol)?;
    for (i, ell) in ells.iter().enumerate() {
        ell.check_against(d)?;
        if !is_l_detectable_with(d, &assoc, &stab, ell, tol)? {
            return Err(Error::NotDetectable { index: i + 1 });
        }
    }
    let care = solve_care(&stab, w, tol)?;
    let k = &care.k;
    let ao = (&stab.ag - &stab.bg * k).transpose();
    let bo = (&stab.cg_u - &stab.dg_u * k).transpose();
    let l = stab.dim();
    let mut co = Mat::zeros(ells.len(), l);
    let mut sigma = Vec::with_capacity(ells.len());
    for (i, ell) in ells.iter().enumerate() {
        let v0 = &stab.state_map * (d.f().transpose() * ell.ell());
        co.row_mut(i).copy_from(&v0.transpose());
        sigma.push(v0.dot(&(&care.p * &v0)));
    }
    Ok(InfiniteDesign {
        observer: ObserverLti { ao, bo, co, sigma },
        assoc,
        stab,
        care,
        ells: ells.to_vec(),
    })
}

/// Runs `r' = Ao r + Bo y(t)` from `r(0) = 0` on the grid of `y` and
/// returns `Co r(t_k)`.
pub fn run_infinite(obs: &ObserverLti, y: &TrajectoryGrid) -> Result<TrajectoryGrid> {
    if y.dim() != obs.bo.ncols() {
        return Err(Error::Dimension(format!(
            "output signal has dimension {}, observer expects {}",
            y.dim(),
            obs.bo.ncols()
        )));
    }
    let l = obs.ao.nrows();
    let field = |t: f64, r: &Vector| &obs.ao * r + &obs.bo * y.at(t);
    let r = rk4_substepped(&field, &Vector::zeros(l), y.spec(), substeps(&obs.ao, y.dt()))?;
    r.map(|_, rk| &obs.co * rk)
}

/// Optimal adjoint pair on `[0, horizon]`: `v' = (Ag - Bg K) v`,
/// `v(0) = Mg F^T l`, `(q*, u*) = (Cg - Dg K) v`.
pub fn optimal_dual_trajectory_infinite(
    design: &InfiniteDesign,
    d: &DaeTriple,
    ell: &Functional,
    grid: GridSpec,
) -> Result<DualTrajectory> {
    let stab = &design.stab;
    let k = &design.care.k;
    let acl = design.closed_loop();
    let out = &stab.cg - &stab.dg * k;
    let m = stab.cg_s.nrows();
    let p = stab.cg_u.nrows();
    let v0 = design.v0(d, ell);
    let field = |_: f64, v: &Vector| &acl * v;
    let v = rk4_substepped(&field, &v0, grid, substeps(&acl, grid.dt))?;
    let q = v.map(|_, vk| (&out * vk).rows(0, m).into_owned())?;
    let u = v.map(|_, vk| (&out * vk).rows(m, p).into_owned())?;
    Ok(DualTrajectory { q, u })
}

/// Error `e = l^T F x - estimate` of the infinite-horizon observer driven by
/// the data `(Fx(0), f, eta)`:
/// `r' = Ao r + (Cg - Dg K)^T [f; -eta]`, `r(0) = (Cg - Dg K)^T [Fx(0); 0]`,
/// `e = l^T F Mg^T r`.
pub fn error_dynamics(
    design: &InfiniteDesign,
    d: &DaeTriple,
    ell: &Functional,
    x0f: &Vector,
    f: &TrajectoryGrid,
    eta: &TrajectoryGrid,
) -> Result<TrajectoryGrid> {
    if !f.same_grid(eta) {
        return Err(Error::GridMismatch("f and eta must share a grid".into()));
    }
    let stab = &design.stab;
    let m = stab.cg_s.nrows();
    let p = stab.cg_u.nrows();
    if x0f.len() != m || f.dim() != m || eta.dim() != p {
        return Err(Error::Dimension("error dynamics inputs do not match the triple".into()));
    }
    let bf = (&stab.cg - &stab.dg * &design.care.k).transpose();
    let ao = design.closed_loop().transpose();
    let co = design.v0(d, ell);
    let r0 = &bf * vstack(&[&Mat::from_column_slice(m, 1, x0f.as_slice()), &Mat::zeros(p, 1)]);
    let r0 = r0.column(0).into_owned();
    let field = |t: f64, r: &Vector| {
        let fe = vstack(&[&Mat::from_column_slice(m, 1, f.at(t).as_slice()), &(-Mat::from_column_slice(p, 1, eta.at(t).as_slice()))]);
        &ao * r + (&bf * fe).column(0)
    };
    let r = rk4_substepped(&field, &r0, f.spec(), substeps(&ao, f.dt()))?;
    r.map(|_, rk| Vector::from_element(1, co.dot(rk)))
}

/// Bound `sup |Co e^{Ao t} r0| + int_0^inf ||Co e^{Ao s} Bf|| ds * sup ||w||`
/// on the error for disturbances `w = [f; -eta]` with sup-norm `w_sup`.
///
/// Both terms are evaluated on `[0, horizon]` with RK4 on `steps` intervals;
/// choose the horizon past the decay of `e^{Ao t}`.
pub fn error_gain_bound(
    design: &InfiniteDesign,
    d: &DaeTriple,
    ell: &Functional,
    x0f: &Vector,
    w_sup: f64,
    horizon: f64,
    steps: usize,
) -> Result<f64> {
    let stab = &design.stab;
    let m = stab.cg_s.nrows();
    let p = stab.cg_u.nrows();
    let bf = (&stab.cg - &stab.dg * &design.care.k).transpose();
    let ao = design.closed_loop().transpose();
    let co = design.v0(d, ell);
    let grid = GridSpec::on_interval(horizon, steps)?;
    let sub = substeps(&ao, grid.dt);
    // Rows of the impulse response: Co e^{Ao s} Bf = (Bf^T e^{Ao^T s} Co^T)^T.
    let field = |_: f64, z: &Vector| ao.transpose() * z;
    let z = rk4_substepped(&field, &co, grid, sub)?;
    let l1 = z.integrate_all(Quadrature::Simpson, |_, zk| (bf.transpose() * zk).norm());
    let mut x0 = Vector::zeros(m + p);
    x0.rows_mut(0, m).copy_from(x0f);
    let r0 = &bf * x0;
    let free_sup = z
        .samples()
        .iter()
        .map(|zk| zk.dot(&r0).abs())
        .fold(0.0, f64::max);
    Ok(free_sup + l1 * w_sup)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::simulate::GridSpec;

    fn scalar(x: f64) -> Mat {
        Mat::from_element(1, 1, x)
    }

    fn scalar_problem(a: f64) -> (DaeTriple, WeightSpec) {
        let d = DaeTriple::new(scalar(1.0), scalar(a), scalar(1.0)).unwrap();
        let w = WeightSpec::new(scalar(2.0), scalar(0.5), scalar(4.0)).unwrap();
        (d, w)
    }

    #[test]
    fn zero_functional_has_zero_error() {
        let d = DaeTriple::new(
            Mat::from_row_slice(2, 2, &[1.0, 0.0, 0.0, 0.0]),
            Mat::from_row_slice(2, 2, &[-1.0, 0.0, 0.0, 1.0]),
            Mat::from_row_slice(1, 2, &[1.0, 1.0]),
        )
        .unwrap();
        let w = WeightSpec::identity(2, 1);
        let ell = Functional::unit(2, 1).unwrap();
        let tol = Tol::default();
        let obs = design_finite(&d, &w, &ell, 1.0, 50, &tol).unwrap();
        assert_eq!(obs.sigma, 0.0);
        let y = TrajectoryGrid::from_fn(GridSpec::on_interval(1.0, 50).unwrap(), |t| {
            Vector::from_element(1, t.sin())
        })
        .unwrap();
        assert_eq!(run_finite(&obs, &y).unwrap(), 0.0);
    }

    #[test]
    fn scalar_finite_sigma_matches_closed_form() {
        let a = 0.3;
        let (d, w) = scalar_problem(a);
        let tol = Tol::default();
        let ell = Functional::unit(1, 0).unwrap();
        let t1 = 1.5;
        let obs = design_finite(&d, &w, &ell, t1, 400, &tol).unwrap();
        // P' = -r P^2 + 2 a P + 1/q, P(0) = 1/q0 with (q0, q, r) = (2, 0.5, 4).
        let (q0, q, r) = (2.0, 0.5, 4.0);
        let dd = (a * a + r / q).sqrt();
        let (pp, pm) = ((a + dd) / r, (a - dd) / r);
        let p0 = 1.0 / q0;
        let e = (-2.0 * dd * t1).exp();
        let exact = (pp * (p0 - pm) - pm * (p0 - pp) * e) / ((p0 - pm) - (p0 - pp) * e);
        assert!((obs.sigma - exact).abs() < 1e-9 * exact, "{} vs {exact}", obs.sigma);
        assert!((obs.sigma_from_parts(&d) - obs.sigma).abs() <= 1e-12 * obs.sigma);
    }

    #[test]
    fn finite_estimate_is_linear_and_matches_dual_quadrature() {
        let (d, w) = scalar_problem(-0.4);
        let tol = Tol::default();
        let ell = Functional::unit(1, 0).unwrap();
        let obs = design_finite(&d, &w, &ell, 1.0, 200, &tol).unwrap();
        let grid = GridSpec::on_interval(1.0, 200).unwrap();
        let y1 = TrajectoryGrid::from_fn(grid, |t| Vector::from_element(1, (3.0 * t).cos())).unwrap();
        let y2 = TrajectoryGrid::from_fn(grid, |t| Vector::from_element(1, t * t)).unwrap();
        let e1 = run_finite(&obs, &y1).unwrap();
        let e2 = run_finite(&obs, &y2).unwrap();
        let e12 = run_finite(&obs, &y1.combine(2.0, &y2, -0.5).unwrap()).unwrap();
        assert!((e12 - (2.0 * e1 - 0.5 * e2)).abs() < 1e-12);

        let dual = optimal_dual_trajectory_finite(&obs).unwrap();
        let rev = dual.u.reversed();
        let direct = y1
            .integrate_all(Quadrature::Simpson, |t, yk| {
                let k = ((t / grid.dt).round()) as usize;
                yk.dot(rev.sample(k))
            });
        assert!((direct - e1).abs() < 1e-7 * e1.abs().max(1.0), "{direct} vs {e1}");
    }

    #[test]
    fn finite_duality_on_scalar() {
        let (d, w) = scalar_problem(0.8);
        let tol = Tol::default();
        let ell = Functional::new(Vector::from_element(1, 1.7)).unwrap();
        let obs = design_finite(&d, &w, &ell, 2.0, 2000, &tol).unwrap();
        let dual = optimal_dual_trajectory_finite(&obs).unwrap();
        let j = dual_cost_j(&dual, &w, &obs.qbar0, 2.0).unwrap();
        assert!((j - obs.sigma).abs() < 1e-4 * obs.sigma, "{j} vs {}", obs.sigma);
        let j = dual_cost_j_with(&dual, &w, &obs.qbar0, 2.0, Quadrature::Simpson).unwrap();
        assert!((j - obs.sigma).abs() < 1e-8 * obs.sigma, "{j} vs {}", obs.sigma);
        let dd = crate::dae::dual_triple(&d);
        assert!(dd.residual(&dual.q, &dual.u).unwrap() < 1e-8);
        assert!((dual.q.sample(0)[0] - 1.7).abs() < 1e-12);
    }

    #[test]
    fn scalar_infinite_matches_closed_form() {
        let a = -0.7;
        let (d, w) = scalar_problem(a);
        let tol = Tol::default();
        let ell = Functional::unit(1, 0).unwrap();
        let obs = design_infinite(&d, &w, &[ell], &tol).unwrap();
        let (q, r) = (0.5, 4.0);
        let dd = (a * a + r / q).sqrt();
        let pp = (a + dd) / r;
        assert!((obs.ao[(0, 0)] + dd).abs() < 1e-10);
        assert!((obs.sigma[0] - pp).abs() < 1e-10 * pp);
        assert!((obs.co[(0, 0)] * obs.bo[(0, 0)] - r * pp).abs() < 1e-10);
    }

    #[test]
    fn undetectable_functional_is_named() {
        let d = DaeTriple::new(scalar(1.0), scalar(1.0), scalar(0.0)).unwrap();
        let w = WeightSpec::identity(1, 1);
        let ell = Functional::unit(1, 0).unwrap();
        assert!(matches!(
            design_infinite(&d, &w, &[ell], &Tol::default()),
            Err(Error::NotDetectable { index: 1 })
        ));
    }
}
