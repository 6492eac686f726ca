//! Complex Schur machinery: eigenvalues, ordered Schur forms, stable
//! invariant subspaces and the Lyapunov solver built on them.

use nalgebra::{Complex, DMatrix};

use crate::error::{Error, Result};
use crate::matspace::{image_basis, symmetrize, thin_svd, Mat, Subspace, Tol};

pub type C64 = Complex<f64>;
pub type CMat = DMatrix<C64>;

/// `a = q t q^H` with `q` unitary and `t` upper triangular.
#[derive(Debug, Clone)]
pub struct ComplexSchur {
    pub q: CMat,
    pub t: CMat,
}

fn to_complex(a: &Mat) -> CMat {
    a.map(|x| C64::new(x, 0.0))
}

pub fn complex_schur(a: &Mat) -> Result<ComplexSchur> {
    let n = a.nrows();
    if n != a.ncols() {
        return Err(Error::Dimension(format!("schur of {}x{} matrix", n, a.ncols())));
    }
    if n == 0 {
        return Ok(ComplexSchur {
            q: CMat::zeros(0, 0),
            t: CMat::zeros(0, 0),
        });
    }
    if !a.iter().all(|x| x.is_finite()) {
        return Err(Error::NotFinite("schur input".into()));
    }
    complex_schur_c(to_complex(a))
}

pub(crate) fn complex_schur_c(a: CMat) -> Result<ComplexSchur> {
    let n = a.nrows();
    if n == 0 {
        return Ok(ComplexSchur { q: a.clone(), t: a });
    }
    let (q, mut t) = a
        .try_schur(f64::EPSILON, 0)
        .ok_or_else(|| Error::Decomposition(format!("Schur form of {n}x{n} matrix")))?
        .unpack();
    for j in 0..n {
        for i in (j + 1)..n {
            t[(i, j)] = C64::new(0.0, 0.0);
        }
    }
    Ok(ComplexSchur { q, t })
}

impl ComplexSchur {
    pub fn eigenvalues(&self) -> Vec<C64> {
        (0..self.t.nrows()).map(|i| self.t[(i, i)]).collect()
    }

    /// Exchanges the diagonal entries `k` and `k + 1` by a unitary rotation.
    fn swap(&mut self, k: usize) {
        let a = self.t[(k, k)];
        let b = self.t[(k + 1, k + 1)];
        let c = self.t[(k, k + 1)];
        // Eigenvector of the 2x2 block for eigenvalue b.
        let (x1, x2) = (c, b - a);
        let nrm = (x1.norm_sqr() + x2.norm_sqr()).sqrt();
        if nrm == 0.0 {
            return;
        }
        let (x1, x2) = (x1 / nrm, x2 / nrm);
        let z = CMat::from_row_slice(2, 2, &[x1, -x2.conj(), x2, x1.conj()]);
        let zh = z.adjoint();
        let n = self.t.nrows();
        let rows = &zh * self.t.view((k, 0), (2, n));
        self.t.view_mut((k, 0), (2, n)).copy_from(&rows);
        let cols = self.t.view((0, k), (n, 2)) * &z;
        self.t.view_mut((0, k), (n, 2)).copy_from(&cols);
        let qc = self.q.view((0, k), (n, 2)) * &z;
        self.q.view_mut((0, k), (n, 2)).copy_from(&qc);
        self.t[(k + 1, k)] = C64::new(0.0, 0.0);
    }

    /// Moves the eigenvalues accepted by `select` to the leading block and
    /// returns how many there are.
    pub fn reorder<F: Fn(C64) -> bool>(&mut self, select: F) -> usize {
        let n = self.t.nrows();
        let mut placed = 0;
        for j in 0..n {
            if select(self.t[(j, j)]) {
                for k in (placed..j).rev() {
                    self.swap(k);
                }
                placed += 1;
            }
        }
        placed
    }
}

pub fn eigenvalues(a: &Mat) -> Result<Vec<C64>> {
    Ok(complex_schur(a)?.eigenvalues())
}

/// Largest real part of the spectrum (`-inf` for an empty matrix).
pub fn spectral_abscissa(a: &Mat) -> Result<f64> {
    Ok(eigenvalues(a)?
        .iter()
        .map(|l| l.re)
        .fold(f64::NEG_INFINITY, f64::max))
}

pub fn is_hurwitz(a: &Mat) -> Result<bool> {
    Ok(spectral_abscissa(a)? < 0.0)
}

/// Largest `a`-invariant subspace on which every eigenvalue has real part
/// below `-tol.stab_margin`, as a real orthonormal basis.
pub fn stable_invariant_subspace(a: &Mat, tol: &Tol) -> Result<Subspace> {
    let n = a.nrows();
    let mut schur = complex_schur(a)?;
    let margin = tol.stab_margin;
    let k = schur.reorder(|l| l.re < -margin);
    if k == 0 {
        return Ok(Subspace::zero(n));
    }
    let qk = schur.q.columns(0, k);
    // The subspace is closed under conjugation, so real and imaginary parts
    // of its complex basis span it with exactly k real dimensions.
    let mut ri = Mat::zeros(n, 2 * k);
    for j in 0..k {
        for i in 0..n {
            ri[(i, j)] = qk[(i, j)].re;
            ri[(i, k + j)] = qk[(i, j)].im;
        }
    }
    let span = image_basis(&ri, tol)?;
    if span.dim() == k {
        return Ok(span);
    }
    let (u, _, _) = thin_svd(&ri)?;
    Ok(Subspace::from_orthonormal(u.columns(0, k).into_owned()))
}

/// Solves `a^T x + x a + w = 0` for symmetric `w` (Bartels-Stewart on the
/// complex Schur form of `a`).
pub fn solve_lyapunov(a: &Mat, w: &Mat) -> Result<Mat> {
    let n = a.nrows();
    if w.shape() != (n, n) {
        return Err(Error::Dimension(format!(
            "lyapunov: a is {n}x{n}, w is {}x{}",
            w.nrows(),
            w.ncols()
        )));
    }
    if n == 0 {
        return Ok(Mat::zeros(0, 0));
    }
    let ComplexSchur { q, t } = complex_schur(a)?;
    let c = -(q.adjoint() * to_complex(w) * &q);
    let scale = t.iter().map(|z| z.norm()).fold(0.0, f64::max).max(1.0);
    let mut y = CMat::zeros(n, n);
    for j in 0..n {
        let mut rhs: Vec<C64> = (0..n).map(|r| c[(r, j)]).collect();
        for i in 0..j {
            let tij = t[(i, j)];
            for (r, val) in rhs.iter_mut().enumerate() {
                *val -= y[(r, i)] * tij;
            }
        }
        let tjj = t[(j, j)];
        for r in 0..n {
            let mut acc = rhs[r];
            for s in 0..r {
                acc -= t[(s, r)].conj() * y[(s, j)];
            }
            let diag = t[(r, r)].conj() + tjj;
            if diag.norm() <= 1e-14 * scale {
                return Err(Error::NoStabilizingSolution(
                    "Lyapunov operator is singular (eigenvalues symmetric about the imaginary axis)"
                        .into(),
                ));
            }
            y[(r, j)] = acc / diag;
        }
    }
    let x = &q * y * q.adjoint();
    Ok(symmetrize(&x.map(|z| z.re)))
}
