//! Dense matrix and subspace primitives.
//!
//! Every subspace is carried as an orthonormal column basis. Rank decisions go
//! through a single [`Tol`] so the recursions in the reduction stage make the
//! same cut at every call site.

use nalgebra::{DMatrix, DVector};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

pub type Mat = DMatrix<f64>;
pub type Vector = DVector<f64>;

/// Numerical cutoffs used for rank and stability decisions.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Tol {
    /// Relative singular-value cutoff.
    pub rank_rtol: f64,
    /// Absolute singular-value cutoff.
    pub abs_floor: f64,
    /// Eigenvalues with real part below `-stab_margin` count as stable.
    pub stab_margin: f64,
}

impl Default for Tol {
    fn default() -> Self {
        Tol {
            rank_rtol: 1e-10,
            abs_floor: 1e-12,
            stab_margin: 1e-9,
        }
    }
}

impl Tol {
    pub fn new(rank_rtol: f64, abs_floor: f64) -> Result<Self> {
        if !(rank_rtol > 0.0) || !(abs_floor >= 0.0) {
            return Err(Error::InvalidArgument(format!(
                "tolerances must satisfy rank_rtol > 0, abs_floor >= 0 (got {rank_rtol}, {abs_floor})"
            )));
        }
        Ok(Tol {
            rank_rtol,
            abs_floor,
            ..Tol::default()
        })
    }

    fn cutoff(&self, sigma_max: f64, scale: f64) -> f64 {
        (self.rank_rtol * sigma_max.max(scale)).max(self.abs_floor)
    }
}

/// Full singular value decomposition together with the numerical rank.
#[derive(Debug, Clone)]
pub struct SvdRank {
    pub rank: usize,
    /// Orthogonal, `rows x rows`.
    pub u: Mat,
    /// Singular values in descending order, `min(rows, cols)` of them.
    pub sigma: Vec<f64>,
    /// Orthogonal, `cols x cols`.
    pub v: Mat,
}

/// A linear subspace of `R^ambient_dim` given by an orthonormal basis.
#[derive(Debug, Clone, PartialEq)]
pub struct Subspace {
    ambient_dim: usize,
    basis: Mat,
}

impl Subspace {
    pub fn zero(ambient_dim: usize) -> Self {
        Subspace {
            ambient_dim,
            basis: Mat::zeros(ambient_dim, 0),
        }
    }

    pub fn full(ambient_dim: usize) -> Self {
        Subspace {
            ambient_dim,
            basis: Mat::identity(ambient_dim, ambient_dim),
        }
    }

    /// Span of the columns of `m`, orthonormalized.
    pub fn span_of(m: &Mat, tol: &Tol) -> Result<Self> {
        image_basis(m, tol)
    }

    /// Wraps a basis already known to be orthonormal.
    pub(crate) fn from_orthonormal(basis: Mat) -> Self {
        Subspace {
            ambient_dim: basis.nrows(),
            basis,
        }
    }

    pub fn ambient_dim(&self) -> usize {
        self.ambient_dim
    }

    pub fn dim(&self) -> usize {
        self.basis.ncols()
    }

    pub fn basis(&self) -> &Mat {
        &self.basis
    }

    pub fn into_basis(self) -> Mat {
        self.basis
    }

    /// Orthogonal projector onto the subspace.
    pub fn projector(&self) -> Mat {
        &self.basis * self.basis.transpose()
    }

    /// Removes the component of `v` lying in the subspace.
    pub fn reject(&self, v: &Vector) -> Vector {
        v - &self.basis * (self.basis.transpose() * v)
    }

    /// Column-wise [`Subspace::reject`].
    pub fn reject_mat(&self, m: &Mat) -> Mat {
        m - &self.basis * (self.basis.transpose() * m)
    }

    pub fn orthogonal_complement(&self) -> Subspace {
        Subspace::from_orthonormal(orthonormal_complement(&self.basis))
    }

    /// Frobenius norm of the projector difference; zero iff the spans agree.
    pub fn distance(&self, other: &Subspace) -> f64 {
        (self.projector() - other.projector()).norm()
    }
}

fn check_finite(m: &Mat, what: &str) -> Result<()> {
    if m.iter().all(|x| x.is_finite()) {
        Ok(())
    } else {
        Err(Error::NotFinite(what.to_string()))
    }
}

/// Thin SVD with singular values sorted in descending order.
pub(crate) fn thin_svd(m: &Mat) -> Result<(Mat, Vec<f64>, Mat)> {
    let (r, c) = m.shape();
    let k = r.min(c);
    if k == 0 {
        return Ok((Mat::zeros(r, 0), Vec::new(), Mat::zeros(c, 0)));
    }
    check_finite(m, "svd input")?;
    let svd = nalgebra::linalg::SVD::try_new(m.clone(), true, true, f64::EPSILON, 0)
        .ok_or_else(|| Error::Decomposition(format!("SVD of {r}x{c} matrix did not converge")))?;
    let u = svd.u.expect("requested U");
    let v_t = svd.v_t.expect("requested V^T");
    let mut order: Vec<usize> = (0..k).collect();
    order.sort_by(|&a, &b| svd.singular_values[b].total_cmp(&svd.singular_values[a]));
    let sigma: Vec<f64> = order.iter().map(|&i| svd.singular_values[i]).collect();
    let u_sorted = Mat::from_fn(r, k, |i, j| u[(i, order[j])]);
    let v_sorted = Mat::from_fn(c, k, |i, j| v_t[(order[j], i)]);
    // nalgebra's 2x2 bidiagonal step occasionally returns a factorization
    // that does not reproduce its input (seen on nearly rank-one 2x2
    // projectors). Verify, and fall back to one-sided Jacobi.
    let scale = m.norm().max(f64::MIN_POSITIVE);
    let recon = &u_sorted * Mat::from_diagonal(&Vector::from_vec(sigma.clone())) * v_sorted.transpose();
    let ortho = (u_sorted.transpose() * &u_sorted - Mat::identity(k, k)).amax()
        + (v_sorted.transpose() * &v_sorted - Mat::identity(k, k)).amax();
    if (recon - m).amax() <= 1e-12 * scale * (r + c) as f64 && ortho <= 1e-12 * (r + c) as f64 {
        return Ok((u_sorted, sigma, v_sorted));
    }
    Ok(jacobi_svd(m))
}

/// One-sided (Hestenes) Jacobi SVD, thin and sorted descending.
fn jacobi_svd(m: &Mat) -> (Mat, Vec<f64>, Mat) {
    if m.nrows() < m.ncols() {
        let (u, s, v) = jacobi_svd(&m.transpose());
        return (v, s, u);
    }
    let c = m.ncols();
    let mut a = m.clone();
    let mut v = Mat::identity(c, c);
    for _sweep in 0..80 {
        let mut rotated = false;
        for p in 0..c {
            for q in p + 1..c {
                let alpha = a.column(p).norm_squared();
                let beta = a.column(q).norm_squared();
                let gamma = a.column(p).dot(&a.column(q));
                if gamma.abs() <= f64::EPSILON * (alpha * beta).sqrt() || gamma == 0.0 {
                    continue;
                }
                rotated = true;
                let zeta = (beta - alpha) / (2.0 * gamma);
                let t = zeta.signum() / (zeta.abs() + (1.0 + zeta * zeta).sqrt());
                let t = if zeta == 0.0 { 1.0 } else { t };
                let cs = 1.0 / (1.0 + t * t).sqrt();
                let sn = cs * t;
                for target in [&mut a, &mut v] {
                    for i in 0..target.nrows() {
                        let (x, y) = (target[(i, p)], target[(i, q)]);
                        target[(i, p)] = cs * x - sn * y;
                        target[(i, q)] = sn * x + cs * y;
                    }
                }
            }
        }
        if !rotated {
            break;
        }
    }
    let norms: Vec<f64> = (0..c).map(|j| a.column(j).norm()).collect();
    let mut order: Vec<usize> = (0..c).collect();
    order.sort_by(|&x, &y| norms[y].total_cmp(&norms[x]));
    let sigma: Vec<f64> = order.iter().map(|&j| norms[j]).collect();
    let v_sorted = Mat::from_fn(c, c, |i, j| v[(i, order[j])]);
    let smax = sigma[0];
    let live = sigma.iter().take_while(|&&s| s > f64::EPSILON * smax && s > 0.0).count();
    let mut u = Mat::zeros(m.nrows(), c);
    for j in 0..live {
        u.set_column(j, &(a.column(order[j]) / sigma[j]));
    }
    // Complete with the coordinate vector of largest residual each time,
    // orthogonalized twice.
    for filled in live..c {
        let basis = u.columns(0, filled).into_owned();
        let residual = |e: usize| {
            let mut x = Vector::zeros(m.nrows());
            x[e] = 1.0;
            for _ in 0..2 {
                x -= &basis * (basis.transpose() * &x);
            }
            x
        };
        let best = (0..m.nrows())
            .map(residual)
            .max_by(|x, y| x.norm().total_cmp(&y.norm()))
            .expect("nonempty");
        let nb = best.norm();
        u.set_column(filled, &(best / nb));
    }
    (u, sigma, v_sorted)
}

fn count_above(sigma: &[f64], tol: &Tol, scale: f64) -> usize {
    let smax = sigma.first().copied().unwrap_or(0.0);
    let cut = tol.cutoff(smax, scale);
    sigma.iter().take_while(|&&s| s > cut).count()
}

/// Orthonormal basis of the orthogonal complement of the span of the
/// orthonormal columns `q`.
pub(crate) fn orthonormal_complement(q: &Mat) -> Mat {
    let n = q.nrows();
    let k = q.ncols();
    if k == 0 {
        return Mat::identity(n, n);
    }
    if k >= n {
        return Mat::zeros(n, 0);
    }
    let rejector = Mat::identity(n, n) - q * q.transpose();
    // Singular values of the rejector are 1 (n-k times) and 0 (k times).
    let (u, _, _) = thin_svd(&rejector).expect("SVD of an orthogonal projector");
    u.columns(0, n - k).into_owned()
}

/// Singular value decomposition with the numerical rank under `tol`.
pub fn svd_rank(m: &Mat, tol: &Tol) -> Result<SvdRank> {
    let (r, c) = m.shape();
    let (u_thin, sigma, v_thin) = thin_svd(m)?;
    let rank = count_above(&sigma, tol, 0.0);
    let complete = |q: Mat, n: usize| {
        let mut full = Mat::zeros(n, n);
        full.columns_mut(0, q.ncols()).copy_from(&q);
        let rest = orthonormal_complement(&q);
        full.columns_mut(q.ncols(), rest.ncols()).copy_from(&rest);
        full
    };
    Ok(SvdRank {
        rank,
        u: complete(u_thin, r),
        sigma,
        v: complete(v_thin, c),
    })
}

pub fn rank(m: &Mat, tol: &Tol) -> Result<usize> {
    let (_, sigma, _) = thin_svd(m)?;
    Ok(count_above(&sigma, tol, 0.0))
}

/// Moore-Penrose pseudoinverse with the rank cut of `tol`.
pub fn pinv(m: &Mat, tol: &Tol) -> Result<Mat> {
    let (u, sigma, v) = thin_svd(m)?;
    let rk = count_above(&sigma, tol, 0.0);
    let mut out = Mat::zeros(m.ncols(), m.nrows());
    for i in 0..rk {
        out += (v.column(i) / sigma[i]) * u.column(i).transpose();
    }
    Ok(out)
}

pub(crate) fn kernel_with_scale(m: &Mat, tol: &Tol, scale: f64) -> Result<Subspace> {
    let (r, c) = m.shape();
    if r == 0 || c == 0 {
        return Ok(Subspace::full(c));
    }
    let (_, sigma, v) = thin_svd(m)?;
    let rk = count_above(&sigma, tol, scale);
    let row_space = v.columns(0, rk).into_owned();
    Ok(Subspace::from_orthonormal(orthonormal_complement(&row_space)))
}

/// Orthonormal basis of `{x : m x = 0}`.
pub fn kernel_basis(m: &Mat, tol: &Tol) -> Result<Subspace> {
    kernel_with_scale(m, tol, 0.0)
}

pub(crate) fn image_with_scale(m: &Mat, tol: &Tol, scale: f64) -> Result<Subspace> {
    let (u, sigma, _) = thin_svd(m)?;
    let rk = count_above(&sigma, tol, scale);
    Ok(Subspace::from_orthonormal(u.columns(0, rk).into_owned()))
}

/// Orthonormal basis of the column space of `m`.
pub fn image_basis(m: &Mat, tol: &Tol) -> Result<Subspace> {
    image_with_scale(m, tol, 0.0)
}

/// Intersection of two subspaces of the same ambient space.
pub fn intersect(s1: &Subspace, s2: &Subspace, tol: &Tol) -> Result<Subspace> {
    if s1.ambient_dim != s2.ambient_dim {
        return Err(Error::Dimension(format!(
            "intersect: ambient dimensions {} and {}",
            s1.ambient_dim, s2.ambient_dim
        )));
    }
    if s1.dim() == 0 || s2.dim() == 0 {
        return Ok(Subspace::zero(s1.ambient_dim));
    }
    // x = B1 a lies in S2 iff (I - P2) B1 a = 0; singular values are the
    // sines of the principal angles, so the natural scale is 1.
    let b1 = &s1.basis;
    let b2 = &s2.basis;
    let residual = b1 - b2 * (b2.transpose() * b1);
    let coeffs = kernel_with_scale(&residual, tol, 1.0)?;
    Ok(Subspace::from_orthonormal(b1 * coeffs.basis()))
}

/// Preimage `{x : m x in s}`.
pub fn preimage(m: &Mat, s: &Subspace, tol: &Tol) -> Result<Subspace> {
    if s.ambient_dim != m.nrows() {
        return Err(Error::Dimension(format!(
            "preimage: matrix has {} rows, subspace lives in R^{}",
            m.nrows(),
            s.ambient_dim
        )));
    }
    let b = &s.basis;
    let residual = m - b * (b.transpose() * m);
    kernel_with_scale(&residual, tol, m.norm())
}

/// Membership test `||(I - P_S) v|| <= rank_rtol * max(1, ||v||)`.
pub fn contains(s: &Subspace, v: &Vector, tol: &Tol) -> Result<bool> {
    if v.len() != s.ambient_dim {
        return Err(Error::Dimension(format!(
            "contains: vector of length {} against R^{}",
            v.len(),
            s.ambient_dim
        )));
    }
    Ok(s.reject(v).norm() <= tol.rank_rtol * v.norm().max(1.0))
}

pub fn symmetrize(m: &Mat) -> Mat {
    (m + m.transpose()) * 0.5
}

/// Smallest eigenvalue of a symmetric matrix (`+inf` for an empty one).
pub fn min_sym_eigenvalue(m: &Mat) -> f64 {
    if m.nrows() == 0 {
        return f64::INFINITY;
    }
    symmetrize(m)
        .symmetric_eigenvalues()
        .iter()
        .copied()
        .fold(f64::INFINITY, f64::min)
}

/// `[a, b]`
pub fn hstack(blocks: &[&Mat]) -> Mat {
    let rows = blocks.first().map_or(0, |b| b.nrows());
    let cols = blocks.iter().map(|b| b.ncols()).sum();
    let mut out = Mat::zeros(rows, cols);
    let mut at = 0;
    for b in blocks {
        assert_eq!(b.nrows(), rows, "hstack row mismatch");
        out.columns_mut(at, b.ncols()).copy_from(*b);
        at += b.ncols();
    }
    out
}

/// `[a; b]`
pub fn vstack(blocks: &[&Mat]) -> Mat {
    let cols = blocks.first().map_or(0, |b| b.ncols());
    let rows = blocks.iter().map(|b| b.nrows()).sum();
    let mut out = Mat::zeros(rows, cols);
    let mut at = 0;
    for b in blocks {
        assert_eq!(b.ncols(), cols, "vstack column mismatch");
        out.rows_mut(at, b.nrows()).copy_from(*b);
        at += b.nrows();
    }
    out
}

pub fn block_diag(a: &Mat, b: &Mat) -> Mat {
    let mut out = Mat::zeros(a.nrows() + b.nrows(), a.ncols() + b.ncols());
    out.view_mut((0, 0), a.shape()).copy_from(a);
    out.view_mut((a.nrows(), a.ncols()), b.shape()).copy_from(b);
    out
}
