//! Heat equation on [-1, 1] recast as a DAE in the Legendre-difference basis
//! `phi_k = P_{k+1} - P_k`, with an exact two-mode truth and an
//! infinite-horizon observer for the leading coordinates.

use std::f64::consts::PI;

use crate::dae::{DaeTriple, Functional, WeightSpec};
use crate::error::{Error, Result};
use crate::matspace::{rank, vstack, Mat, Tol, Vector};
use crate::observer::{design_infinite_full, run_infinite, InfiniteDesign};
use crate::reduction::is_l_detectable_with;
use crate::simulate::{rk4_substepped, GridSpec, Quadrature, TrajectoryGrid};

#[derive(Debug, Clone)]
pub struct HeatConfig {
    /// Modal truncation.
    pub n: usize,
    /// Number of estimated coordinates.
    pub nu: usize,
    pub n1: usize,
    pub n2: usize,
    /// Thermal diffusivity.
    pub c: f64,
    pub horizon: f64,
    pub steps: usize,
    /// Initial-state weight; identity when `None`.
    pub q0: Option<Mat>,
}

impl Default for HeatConfig {
    fn default() -> Self {
        HeatConfig {
            n: 40,
            nu: 10,
            n1: 30,
            n2: 31,
            c: 0.033,
            horizon: 5.0,
            steps: 5000,
            q0: None,
        }
    }
}

impl HeatConfig {
    pub fn validate(&self) -> Result<()> {
        if self.nu == 0 || self.nu > self.n {
            return Err(Error::InvalidArgument(format!(
                "need 1 <= Nu <= N, got Nu = {}, N = {}",
                self.nu, self.n
            )));
        }
        if self.n1 == self.n2 {
            return Err(Error::InvalidArgument("output modes n1 and n2 must differ".into()));
        }
        if !(self.c > 0.0 && self.c.is_finite()) {
            return Err(Error::InvalidArgument("diffusivity must be positive".into()));
        }
        if !(self.horizon > 0.0 && self.horizon.is_finite()) || self.steps < 2 {
            return Err(Error::InvalidArgument("horizon must be positive and steps >= 2".into()));
        }
        Ok(())
    }

    /// Rows of `F` and `A`: `2N + Nu`.
    pub fn m(&self) -> usize {
        2 * self.n + self.nu
    }

    /// Columns: `2N`.
    pub fn state_dim(&self) -> usize {
        2 * self.n
    }

    pub fn modes(&self) -> [usize; 2] {
        [self.n1, self.n2]
    }

    /// `Q = diag(1e-5 I_Nu, 1e-3 I_{N-Nu}, 1e-3 I_N, 0.1 I_Nu)`, `R = 400 I_2`.
    pub fn weights(&self) -> Result<WeightSpec> {
        let (n, nu) = (self.n, self.nu);
        let mut q = Vec::with_capacity(self.m());
        q.extend(std::iter::repeat_n(1e-5, nu));
        q.extend(std::iter::repeat_n(1e-3, n - nu));
        q.extend(std::iter::repeat_n(1e-3, n));
        q.extend(std::iter::repeat_n(0.1, nu));
        let q = Mat::from_diagonal(&Vector::from_vec(q));
        let r = Mat::identity(2, 2) * 400.0;
        let q0 = self.q0.clone().unwrap_or_else(|| Mat::identity(self.m(), self.m()));
        WeightSpec::new(q0, q, r)
    }
}

/// `P_k(x)` by the three-term recurrence.
pub fn legendre_eval(k: usize, x: f64) -> f64 {
    legendre_with_derivatives(k, x).0
}

/// `(P_k(x), P_k'(x), P_k''(x))`, using
/// `P_{j+1}' = P_{j-1}' + (2j+1) P_j` and the same identity differentiated,
/// which stay finite at the endpoints.
pub fn legendre_with_derivatives(k: usize, x: f64) -> (f64, f64, f64) {
    let (mut p0, mut d0, mut s0) = (1.0, 0.0, 0.0);
    if k == 0 {
        return (p0, d0, s0);
    }
    let (mut p1, mut d1, mut s1) = (x, 1.0, 0.0);
    for j in 1..k {
        let jf = j as f64;
        let p2 = ((2.0 * jf + 1.0) * x * p1 - jf * p0) / (jf + 1.0);
        let d2 = d0 + (2.0 * jf + 1.0) * p1;
        let s2 = s0 + (2.0 * jf + 1.0) * d1;
        (p0, d0, s0) = (p1, d1, s1);
        (p1, d1, s1) = (p2, d2, s2);
    }
    (p1, d1, s1)
}

/// Gauss-Legendre nodes and weights on [-1, 1], exact for polynomials of
/// degree `2 n - 1`.
pub fn gauss_legendre(n: usize) -> (Vec<f64>, Vec<f64>) {
    let mut nodes = vec![0.0; n];
    let mut weights = vec![0.0; n];
    let nf = n as f64;
    for i in 0..n.div_ceil(2) {
        let mut x = (PI * (i as f64 + 0.75) / (nf + 0.5)).cos();
        let mut dp = 1.0;
        for _ in 0..100 {
            let (p, d, _) = legendre_with_derivatives(n, x);
            dp = d;
            let dx = p / d;
            x -= dx;
            if dx.abs() <= 1e-16 * x.abs().max(1.0) {
                break;
            }
        }
        let (_, d, _) = legendre_with_derivatives(n, x);
        if d.is_finite() {
            dp = d;
        }
        let w = 2.0 / ((1.0 - x * x) * dp * dp);
        nodes[i] = -x;
        nodes[n - 1 - i] = x;
        weights[i] = w;
        weights[n - 1 - i] = w;
    }
    if n % 2 == 1 {
        nodes[n / 2] = 0.0;
    }
    (nodes, weights)
}

/// `phi_k = P_{k+1} - P_k` with first and second derivatives.
fn basis(k: usize, x: f64) -> (f64, f64, f64) {
    let (a, da, sa) = legendre_with_derivatives(k + 1, x);
    let (b, db, sb) = legendre_with_derivatives(k, x);
    (a - b, da - db, sa - sb)
}

/// Value of `sum_k coef[k-1] phi_k(x)`.
pub fn synthesize(coef: &Vector, x: f64) -> f64 {
    coef.iter()
        .enumerate()
        .map(|(i, c)| c * basis(i + 1, x).0)
        .sum()
}

#[derive(Debug, Clone)]
pub struct HeatMatrices {
    /// Gram matrix `<phi_i, phi_j>`.
    pub mhat: Mat,
    /// `diag((2i+1)/2)`.
    pub lambda: Mat,
    /// `Lambda * Gram`.
    pub m: Mat,
    /// `<A phi_i, phi_j>` in row `i`, column `j`, with `A v = -c v''`.
    pub astiff: Mat,
    /// Row `r` holds `<sin(pi n_r x), phi_k>`.
    pub c: Mat,
}

/// Analytic Gram matrix: tridiagonal with `2/(2i+3) + 2/(2i+1)` on the
/// diagonal and `-2/(2i+3)` beside it.
pub fn gram_analytic(n: usize) -> Mat {
    let mut g = Mat::zeros(n, n);
    for i in 1..=n {
        let fi = i as f64;
        g[(i - 1, i - 1)] = 2.0 / (2.0 * fi + 3.0) + 2.0 / (2.0 * fi + 1.0);
        if i < n {
            let off = -2.0 / (2.0 * fi + 3.0);
            g[(i - 1, i)] = off;
            g[(i, i - 1)] = off;
        }
    }
    g
}

/// Projections `<g, phi_k>`, `k = 1..n`, by Gauss-Legendre quadrature.
pub fn project<G: Fn(f64) -> f64>(n: usize, g: G, nodes: &[f64], weights: &[f64]) -> Vector {
    let mut out = Vector::zeros(n);
    for (&x, &w) in nodes.iter().zip(weights) {
        let gx = g(x) * w;
        for k in 1..=n {
            out[k - 1] += gx * basis(k, x).0;
        }
    }
    out
}

fn quadrature_order(n: usize) -> usize {
    (2 * n + 20).max(256)
}

pub fn build_matrices(cfg: &HeatConfig) -> Result<HeatMatrices> {
    cfg.validate()?;
    let n = cfg.n;
    let (nodes, weights) = gauss_legendre(quadrature_order(n));
    let mhat = gram_analytic(n);
    let lambda = Mat::from_diagonal(&Vector::from_fn(n, |i, _| (2.0 * (i + 1) as f64 + 1.0) / 2.0));
    let m = &lambda * &mhat;

    let mut vals = Mat::zeros(n, nodes.len());
    let mut second = Mat::zeros(n, nodes.len());
    for (q, &x) in nodes.iter().enumerate() {
        for k in 1..=n {
            let (v, _, s) = basis(k, x);
            vals[(k - 1, q)] = v;
            second[(k - 1, q)] = s;
        }
    }
    let wdiag = Mat::from_diagonal(&Vector::from_vec(weights.clone()));
    let astiff = (&second * &wdiag * vals.transpose()) * (-cfg.c);

    let mut c = Mat::zeros(2, n);
    for (r, &mode) in cfg.modes().iter().enumerate() {
        let proj = project(n, |x| (PI * mode as f64 * x).sin(), &nodes, &weights);
        c.row_mut(r).copy_from(&proj.transpose());
    }
    Ok(HeatMatrices { mhat, lambda, m, astiff, c })
}

/// `F = [M 0; 0 0; 0 0]`, `A = [Lambda A_N, Lambda; I 0; 0 [I_Nu 0]]`,
/// `H = [C_N 0]`.
pub fn assemble_from(cfg: &HeatConfig, mats: &HeatMatrices) -> Result<(DaeTriple, WeightSpec)> {
    let (n, nu) = (cfg.n, cfg.nu);
    let (m, cols) = (cfg.m(), cfg.state_dim());
    let mut f = Mat::zeros(m, cols);
    f.view_mut((0, 0), (n, n)).copy_from(&mats.m);
    let mut a = Mat::zeros(m, cols);
    a.view_mut((0, 0), (n, n)).copy_from(&(&mats.lambda * &mats.astiff));
    a.view_mut((0, n), (n, n)).copy_from(&mats.lambda);
    a.view_mut((n, 0), (n, n)).fill_with_identity();
    for i in 0..nu {
        a[(2 * n + i, n + i)] = 1.0;
    }
    let mut h = Mat::zeros(2, cols);
    h.view_mut((0, 0), (2, n)).copy_from(&mats.c);
    Ok((DaeTriple::new(f, a, h)?, cfg.weights()?))
}

pub fn assemble_dae(cfg: &HeatConfig) -> Result<(DaeTriple, WeightSpec)> {
    assemble_from(cfg, &build_matrices(cfg)?)
}

/// `rank [F; A; H]`.
pub fn stacked_rank(d: &DaeTriple, tol: &Tol) -> Result<usize> {
    rank(&vstack(&[d.f(), d.a(), d.h()]), tol)
}

fn mode_rate(cfg: &HeatConfig, mode: usize) -> f64 {
    cfg.c * (mode as f64).powi(2) * PI * PI
}

pub fn input_signal(t: f64) -> [f64; 2] {
    [10.0 * (5.0 * t).cos(), 10.0 * (3.0 * t).sin()]
}

pub fn noise_signal(cfg: &HeatConfig, t: f64) -> f64 {
    0.01 * (-0.001 * PI * PI * cfg.c * t).exp() * (100.0 * t).cos()
}

pub const INITIAL_AMPLITUDE: f64 = 0.2;

/// Exact modal solution `V = z1 sin(pi n1 x) + z2 sin(pi n2 x)`.
#[derive(Debug, Clone)]
pub struct HeatTruth {
    pub z: TrajectoryGrid,
    pub fx: TrajectoryGrid,
    pub y: TrajectoryGrid,
}

/// Integrates `z_i' = -c n_i^2 pi^2 z_i + u_i` and maps the result to
/// `F x = sum_i z_i Lambda P_N(sin(pi n_i x))` and `y = z + w`.
pub fn exact_truth_with<U, W>(
    cfg: &HeatConfig,
    mats: &HeatMatrices,
    grid: GridSpec,
    z0: [f64; 2],
    u: U,
    w: W,
) -> Result<HeatTruth>
where
    U: Fn(f64) -> [f64; 2],
    W: Fn(f64) -> f64,
{
    let rates = cfg.modes().map(|k| mode_rate(cfg, k));
    let field = |t: f64, z: &Vector| {
        let ut = u(t);
        Vector::from_vec(vec![-rates[0] * z[0] + ut[0], -rates[1] * z[1] + ut[1]])
    };
    // Keep rate * h <= 0.01 on the stiff modes.
    let sub = ((rates[0].max(rates[1]) * grid.dt) / 0.01).ceil().max(1.0) as usize;
    let z = rk4_substepped(&field, &Vector::from_vec(z0.to_vec()), grid, sub)?;

    let m = cfg.m();
    let lc = &mats.lambda * mats.c.transpose();
    let fx = z.map(|_, zk| {
        let mut out = Vector::zeros(m);
        out.rows_mut(0, cfg.n).copy_from(&(&lc * zk));
        out
    })?;
    let y = z.map(|t, zk| zk.add_scalar(w(t)))?;
    Ok(HeatTruth { z, fx, y })
}

pub fn exact_truth(cfg: &HeatConfig, mats: &HeatMatrices, grid: GridSpec) -> Result<HeatTruth> {
    exact_truth_with(
        cfg,
        mats,
        grid,
        [INITIAL_AMPLITUDE; 2],
        input_signal,
        |t| noise_signal(cfg, t),
    )
}

/// Temperature field `V(t)(x)` synthesized from estimated `F x` coordinates.
#[derive(Debug, Clone)]
pub struct Reconstruction {
    /// Basis coefficients `M_Nu^{-1} O(t)` per time sample.
    pub coef: TrajectoryGrid,
}

impl Reconstruction {
    pub fn value(&self, t: f64, x: f64) -> f64 {
        synthesize(&self.coef.at(t), x)
    }

    pub fn trace(&self, x: f64) -> Vec<f64> {
        self.coef.samples().iter().map(|c| synthesize(c, x)).collect()
    }
}

pub fn reconstruct(estimates: &TrajectoryGrid, cfg: &HeatConfig, mats: &HeatMatrices) -> Result<Reconstruction> {
    let nu = cfg.nu;
    if estimates.dim() != nu {
        return Err(Error::Dimension(format!(
            "reconstruction needs {nu} estimated coordinates, got {}",
            estimates.dim()
        )));
    }
    let block = mats.m.view((0, 0), (nu, nu)).into_owned();
    let lu = block.lu();
    let coef = estimates.map(|_, o| lu.solve(o).unwrap_or_else(|| Vector::zeros(nu)))?;
    Ok(Reconstruction { coef })
}

/// Observation point used in the reconstruction trace.
pub const PROBE_POINT: f64 = -0.25;

/// Everything the demo computes, with traces on the simulation grid.
#[derive(Debug, Clone)]
pub struct HeatReport {
    pub stacked_rank: usize,
    pub state_dim: usize,
    /// Detectability of `e_1 .. e_{Nu+1}`.
    pub detectable: Vec<bool>,
    pub design: InfiniteDesign,
    pub truth: HeatTruth,
    pub estimates: TrajectoryGrid,
    /// Reconstructed temperature at [`PROBE_POINT`].
    pub recon_trace: Vec<f64>,
    /// True temperature at [`PROBE_POINT`].
    pub true_trace: Vec<f64>,
    /// True temperature projected on the first `Nu` basis functions, at
    /// [`PROBE_POINT`].
    pub projected_trace: Vec<f64>,
}

impl HeatReport {
    pub fn sigma(&self) -> &[f64] {
        &self.design.observer.sigma
    }

    /// `e_i(t) = l_i^T F x_true(t) - estimate_i(t)`, `i` zero-based.
    pub fn error_trace(&self, i: usize) -> Vec<f64> {
        self.truth
            .fx
            .samples()
            .iter()
            .zip(self.estimates.samples())
            .map(|(fx, est)| fx[i] - est[i])
            .collect()
    }

    /// `||e_i||_L2 / ||l_i^T F x_true||_L2` over the horizon.
    pub fn relative_tracking_error(&self, i: usize) -> f64 {
        let truth: Vec<f64> = self.truth.fx.samples().iter().map(|fx| fx[i]).collect();
        relative_l2(&self.error_trace(i), &truth, self.truth.fx.dt())
    }

    /// Relative L2 distance of the reconstruction trace from the projected
    /// truth at [`PROBE_POINT`].
    pub fn reconstruction_error(&self) -> f64 {
        let diff: Vec<f64> = self
            .recon_trace
            .iter()
            .zip(&self.projected_trace)
            .map(|(a, b)| a - b)
            .collect();
        relative_l2(&diff, &self.projected_trace, self.truth.fx.dt())
    }

    /// L2 norm of the reconstruction trace over the horizon.
    pub fn reconstruction_norm(&self) -> f64 {
        l2(&self.recon_trace, self.truth.fx.dt())
    }
}

fn l2(v: &[f64], dt: f64) -> f64 {
    let g = TrajectoryGrid::new(0.0, dt, v.iter().map(|&x| Vector::from_element(1, x * x)).collect());
    match g {
        Ok(g) => g.integrate_all(Quadrature::Trapezoid, |_, s| s[0]).sqrt(),
        Err(_) => 0.0,
    }
}

fn relative_l2(diff: &[f64], reference: &[f64], dt: f64) -> f64 {
    l2(diff, dt) / l2(reference, dt).max(f64::MIN_POSITIVE)
}

/// Assemble, check, design, simulate, estimate, reconstruct.
pub fn run_demo(cfg: &HeatConfig, tol: &Tol) -> Result<HeatReport> {
    cfg.validate()?;
    let mats = build_matrices(cfg)?;
    let (d, w) = assemble_from(cfg, &mats)?;
    let stacked = stacked_rank(&d, tol)?;

    let m = cfg.m();
    let ells = (0..cfg.nu)
        .map(|i| Functional::unit(m, i))
        .collect::<Result<Vec<_>>>()?;
    let design = design_infinite_full(&d, &w, &ells, tol)?;
    let mut detectable = vec![true; cfg.nu];
    let extra = Functional::unit(m, cfg.nu)?;
    detectable.push(is_l_detectable_with(&d, &design.assoc, &design.stab, &extra, tol)?);

    let grid = GridSpec::on_interval(cfg.horizon, cfg.steps)?;
    let truth = exact_truth(cfg, &mats, grid)?;
    let estimates = run_infinite(&design.observer, &truth.y)?;
    let recon = reconstruct(&estimates, cfg, &mats)?;
    let recon_trace = recon.trace(PROBE_POINT);

    let profile = cfg.modes().map(|k| (PI * k as f64 * PROBE_POINT).sin());
    let true_trace = truth.z.samples().iter().map(|z| z[0] * profile[0] + z[1] * profile[1]).collect();
    // Projection onto phi_1..phi_Nu: coefficients Gram_Nu^{-1} P_Nu V.
    let gram_nu = mats.mhat.view((0, 0), (cfg.nu, cfg.nu)).into_owned();
    let pv = mats.c.columns(0, cfg.nu).transpose();
    let modal_coef = gram_nu
        .lu()
        .solve(&pv)
        .ok_or_else(|| Error::Decomposition("singular Gram block".into()))?;
    let modal_at_probe = modal_coef.column_iter().map(|c| synthesize(&c.into_owned(), PROBE_POINT)).collect::<Vec<_>>();
    let projected_trace = truth
        .z
        .samples()
        .iter()
        .map(|z| z[0] * modal_at_probe[0] + z[1] * modal_at_probe[1])
        .collect();

    Ok(HeatReport {
        stacked_rank: stacked,
        state_dim: d.n(),
        detectable,
        design,
        truth,
        estimates,
        recon_trace,
        true_trace,
        projected_trace,
    })
}
