use crate::error::{Error, Result};
use crate::matspace::{image_with_scale, kernel_with_scale, pinv, vstack, Mat, Subspace, Tol};

/// Largest output-nulling controlled invariant subspace of
/// `x' = Ã x + G u`, `0 = C̃ x + D̃ u`, together with a friend `F̃`
/// such that `(Ã + G F̃) V ⊆ V` and `(C̃ + D̃ F̃) V = 0`.
///
/// The recursion is `V_0 = R^s`,
/// `V_{j+1} = { x in V_j : exists u, Ã x + G u in V_j, C̃ x + D̃ u = 0 }`.
pub fn vstar(
    atil: &Mat,
    g: &Mat,
    ctil: &Mat,
    dtil: &Mat,
    tol: &Tol,
) -> Result<(Subspace, Mat)> {
    let s = atil.nrows();
    let q = g.ncols();
    if atil.ncols() != s
        || g.nrows() != s
        || ctil.ncols() != s
        || dtil.nrows() != ctil.nrows()
        || dtil.ncols() != q
    {
        return Err(Error::Dimension(format!(
            "vstar: Ã {}x{}, G {}x{}, C̃ {}x{}, D̃ {}x{}",
            atil.nrows(),
            atil.ncols(),
            g.nrows(),
            g.ncols(),
            ctil.nrows(),
            ctil.ncols(),
            dtil.nrows(),
            dtil.ncols()
        )));
    }
    // One scale for every rank decision so that the cut does not drift as
    // the subspace shrinks.
    let state_scale = atil.norm() + ctil.norm();
    let input_scale = g.norm() + dtil.norm();

    let mut v = Subspace::full(s);
    loop {
        if v.dim() == 0 {
            break;
        }
        let (n, mu) = step_matrices(&v, atil, g, ctil, dtil);
        let y = image_with_scale(&mu, tol, input_scale)?;
        let yb = y.basis();
        let nv = &n * v.basis();
        let residual = &nv - yb * (yb.transpose() * &nv);
        let coeffs = kernel_with_scale(&residual, tol, state_scale)?;
        if coeffs.dim() == v.dim() {
            break;
        }
        v = Subspace::from_orthonormal(v.basis() * coeffs.basis());
    }

    let friend = if v.dim() == 0 || q == 0 {
        Mat::zeros(q, s)
    } else {
        let (n, mu) = step_matrices(&v, atil, g, ctil, dtil);
        let mut cut = *tol;
        // pinv's cut is relative to the largest singular value; align it with
        // the scale used for the image above.
        let smax = crate::matspace::thin_svd(&mu)?.1.first().copied().unwrap_or(0.0);
        if smax > 0.0 {
            cut.rank_rtol = tol.rank_rtol * (input_scale / smax).max(1.0);
        }
        let vb = v.basis();
        -(pinv(&mu, &cut)? * n * vb * vb.transpose())
    };
    Ok((v, friend))
}

/// `[W^T Ã; C̃]` and `[W^T G; D̃]` with `W` spanning the complement of `v`.
fn step_matrices(v: &Subspace, atil: &Mat, g: &Mat, ctil: &Mat, dtil: &Mat) -> (Mat, Mat) {
    let w = v.orthogonal_complement();
    let wt = w.basis().transpose();
    let n = vstack(&[&(&wt * atil), ctil]);
    let mu = vstack(&[&(&wt * g), dtil]);
    (n, mu)
}
