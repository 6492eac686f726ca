use nalgebra::Complex;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use super::{assoc_lti, stab_assoc_lti, AssocLti, StabLti};
use crate::dae::{DaeTriple, Functional};
use crate::error::{Error, Result};
use crate::matspace::{contains, image_basis, rank, vstack, Mat, Tol};
use crate::spectral::{complex_schur_c, CMat, C64};

/// Whether `F^T l` can be reached as `F^T q(0)` by some solution of the
/// adjoint DAE, i.e. `F^T l in im(F^T Cs)`.
pub fn is_l_impulse_observable(d: &DaeTriple, ell: &Functional, tol: &Tol) -> Result<bool> {
    let s = assoc_lti(d, tol)?;
    is_l_impulse_observable_with(d, &s, ell, tol)
}

pub fn is_l_impulse_observable_with(
    d: &DaeTriple,
    s: &AssocLti,
    ell: &Functional,
    tol: &Tol,
) -> Result<bool> {
    ell.check_against(d)?;
    let ft = d.f().transpose();
    let target = &ft * ell.ell();
    if s.n_hat() == 0 {
        return Ok(target.norm() <= tol.rank_rtol * ell.ell().norm().max(1.0));
    }
    let reachable = image_basis(&(&ft * &s.cs), tol)?;
    contains(&reachable, &target, tol)
}

/// Impulse observability plus `M F^T l in Vg`: the adjoint trajectory
/// starting at `F^T l` can be steered so that `F^T q(t) -> 0`.
pub fn is_l_detectable(d: &DaeTriple, ell: &Functional, tol: &Tol) -> Result<bool> {
    let s = assoc_lti(d, tol)?;
    let g = stab_assoc_lti(&s, tol)?;
    is_l_detectable_with(d, &s, &g, ell, tol)
}

pub fn is_l_detectable_with(
    d: &DaeTriple,
    s: &AssocLti,
    g: &StabLti,
    ell: &Functional,
    tol: &Tol,
) -> Result<bool> {
    if !is_l_impulse_observable_with(d, s, ell, tol)? {
        return Ok(false);
    }
    if s.n_hat() == 0 {
        return Ok(true);
    }
    let v0 = &s.state_map * (d.f().transpose() * ell.ell());
    contains(&g.vg, &v0, tol)
}

/// Outcome of the stacked-rank test for impulse observability of every
/// functional.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum RankCheck {
    Holds,
    Fails,
    /// `rank [F; A; H] < n`, so the test says nothing.
    Inapplicable,
}

impl RankCheck {
    pub fn holds(self) -> bool {
        self == RankCheck::Holds
    }
}

/// `rank [F A; 0 H; 0 F] = n + rank F`, valid when `rank [F; A; H] = n`.
pub fn impulse_obs_rank_check(d: &DaeTriple, tol: &Tol) -> Result<RankCheck> {
    let (m, n, p) = (d.m(), d.n(), d.p());
    let stacked = vstack(&[d.f(), d.a(), d.h()]);
    if rank(&stacked, tol)? != n {
        return Ok(RankCheck::Inapplicable);
    }
    let mut big = Mat::zeros(2 * m + p, 2 * n);
    big.view_mut((0, 0), (m, n)).copy_from(d.f());
    big.view_mut((0, n), (m, n)).copy_from(d.a());
    big.view_mut((m, n), (p, n)).copy_from(d.h());
    big.view_mut((m + p, n), (m, n)).copy_from(d.f());
    let lhs = rank(&big, tol)?;
    Ok(if lhs == n + rank(d.f(), tol)? {
        RankCheck::Holds
    } else {
        RankCheck::Fails
    })
}

pub const DEFAULT_PROBE_SEED: u64 = 0x5eed_0f_c0ffee;
const PROBES: usize = 8;
/// A candidate is a genuine rank drop when the normal-rank-th singular value
/// there is this much smaller than at every nearby point. Compares the
/// pencil against itself, so it is insensitive to the overall conditioning.
const DROP_CONTRAST: f64 = 1e-3;
/// Radius of the comparison points, relative to `max(1, |lambda|)`.
const CONTRAST_RADIUS: f64 = 1e-2;

/// Hautus-type test: `rank [lambda F - A; H]` equals the normal rank of
/// the pencil for every `Re lambda >= -stab_margin`.
pub fn detectability_hautus_check(d: &DaeTriple, tol: &Tol) -> Result<bool> {
    detectability_hautus_check_seeded(d, tol, DEFAULT_PROBE_SEED)
}

pub fn detectability_hautus_check_seeded(d: &DaeTriple, tol: &Tol, seed: u64) -> Result<bool> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let (m, n, p) = (d.m(), d.n(), d.p());
    // s E - B = [s F - A; H]
    let e = vstack(&[d.f(), &Mat::zeros(p, n)]).map(|x| C64::new(x, 0.0));
    let b = vstack(&[d.a(), &(-d.h())]).map(|x| C64::new(x, 0.0));
    let scale = (d.f().norm() + d.a().norm() + d.h().norm()).max(1.0);
    let pencil = |s: C64| e.map(|x| x * s) - &b;

    let mut normal_rank = 0;
    for _ in 0..PROBES {
        let s = random_point(&mut rng, scale);
        normal_rank = normal_rank.max(complex_rank(&pencil(s), tol)?);
    }
    if normal_rank == 0 {
        return Ok(true);
    }

    // Generic compression to a regular square pencil of size normal_rank.
    let w = random_orthonormal(&mut rng, m + p, normal_rank)?;
    let v = random_orthonormal(&mut rng, n, normal_rank)?;
    let ec = w.adjoint() * &e * &v;
    let bc = w.adjoint() * &b * &v;

    // Shift-and-invert: X = (s0 Ec - Bc)^-1 Ec has eigenvalues mu with
    // lambda = s0 - 1/mu for the finite eigenvalues of the pencil.
    let mut candidates = Vec::new();
    for _ in 0..PROBES {
        let s0 = random_point(&mut rng, scale);
        let shifted = ec.map(|x| x * s0) - &bc;
        let Some(inv) = shifted.clone().try_inverse() else {
            continue;
        };
        let x = inv * &ec;
        let schur = complex_schur_c(x)?;
        let xnorm = schur.t.norm().max(1e-300);
        for mu in schur.eigenvalues() {
            if mu.norm() > 1e-12 * xnorm {
                candidates.push(s0 - mu.inv());
            }
        }
        break;
    }

    for lambda in candidates {
        if lambda.re < -tol.stab_margin {
            continue;
        }
        let kth_at = |s: C64| -> Result<(f64, f64)> {
            let sv = complex_singular_values(&pencil(s))?;
            let top = sv.first().copied().unwrap_or(0.0);
            Ok((top, sv.get(normal_rank - 1).copied().unwrap_or(0.0)))
        };
        let (top, here) = kth_at(lambda)?;
        let radius = CONTRAST_RADIUS * lambda.norm().max(1.0);
        let mut nearby = f64::INFINITY;
        for j in 0..4 {
            let angle = std::f64::consts::FRAC_PI_2 * j as f64 + 0.3;
            nearby = nearby.min(kth_at(lambda + C64::from_polar(radius, angle))?.1);
        }
        // A neighborhood that is itself numerically rank deficient means the
        // candidate sits at an infinite eigenvalue.
        if nearby <= tol.rank_rtol * top {
            continue;
        }
        if here <= DROP_CONTRAST * nearby {
            return Ok(false);
        }
    }
    Ok(true)
}

fn random_point(rng: &mut ChaCha8Rng, scale: f64) -> C64 {
    Complex::new(rng.random_range(-1.0..1.0) * scale, rng.random_range(-1.0..1.0) * scale)
}

fn random_orthonormal(rng: &mut ChaCha8Rng, rows: usize, cols: usize) -> Result<CMat> {
    let g = CMat::from_fn(rows, cols, |_, _| {
        Complex::new(rng.random_range(-1.0..1.0), rng.random_range(-1.0..1.0))
    });
    let qr = g.qr();
    Ok(qr.q().columns(0, cols).into_owned())
}

fn complex_singular_values(m: &CMat) -> Result<Vec<f64>> {
    if m.nrows() == 0 || m.ncols() == 0 {
        return Ok(Vec::new());
    }
    let svd = nalgebra::linalg::SVD::try_new(m.clone(), false, false, f64::EPSILON, 0)
        .ok_or_else(|| Error::Decomposition("complex SVD did not converge".into()))?;
    let mut sv: Vec<f64> = svd.singular_values.iter().copied().collect();
    sv.sort_by(|a, b| b.total_cmp(a));
    Ok(sv)
}

fn complex_rank(m: &CMat, tol: &Tol) -> Result<usize> {
    let sv = complex_singular_values(m)?;
    let smax = sv.first().copied().unwrap_or(0.0);
    let cut = (tol.rank_rtol * smax).max(tol.abs_floor);
    Ok(sv.iter().filter(|&&s| s > cut).count())
}
