//! Reduction of the adjoint DAE `d(F^T q)/dt = A^T q - H^T u` to an ordinary
//! LTI system whose input-state-output behavior parameterizes all of its
//! solutions, plus the stabilizable part of that system.

mod checks;
mod vstar;

pub use checks::{
    detectability_hautus_check, detectability_hautus_check_seeded, impulse_obs_rank_check,
    DEFAULT_PROBE_SEED,
    is_l_detectable, is_l_detectable_with, is_l_impulse_observable,
    is_l_impulse_observable_with, RankCheck,
};
pub use vstar::vstar;

use crate::dae::DaeTriple;
use crate::error::Result;
use crate::matspace::{
    block_diag, hstack, image_basis, image_with_scale, intersect, kernel_basis, pinv, preimage,
    rank, svd_rank, vstack, Mat, Subspace, Tol,
};
use crate::spectral::stable_invariant_subspace;

/// LTI system `z' = Aa z + Ba g`, `(q, u) = Ca z + Da g` whose trajectories
/// are exactly the solutions of the adjoint DAE.
#[derive(Debug, Clone)]
pub struct AssocLti {
    pub aa: Mat,
    pub ba: Mat,
    pub ca: Mat,
    pub da: Mat,
    pub cs: Mat,
    pub cu: Mat,
    pub ds: Mat,
    pub du: Mat,
    /// `(F^T Cs)^+`, mapping `F^T q` back to the state `z`.
    pub state_map: Mat,
}

impl AssocLti {
    pub fn n_hat(&self) -> usize {
        self.aa.nrows()
    }

    pub fn inputs(&self) -> usize {
        self.ba.ncols()
    }

    /// True when the input channel is the placeholder zero column.
    pub fn is_degenerate(&self, tol: &Tol) -> bool {
        self.da.norm() <= tol.abs_floor
    }
}

/// Measured defects of the defining properties of an [`AssocLti`].
#[derive(Debug, Clone, Copy)]
pub struct AssocReport {
    /// `max |F^T Ds|`.
    pub ft_ds: f64,
    pub rank_ft_cs: usize,
    pub n_hat: usize,
    /// Either `k = 1` with `[Da; Ba] = 0`, or `Da` has full column rank.
    pub dichotomy: bool,
}

impl AssocReport {
    pub fn holds(&self) -> bool {
        self.ft_ds <= 1e-10 && self.rank_ft_cs == self.n_hat && self.dichotomy
    }
}

pub fn assoc_report(d: &DaeTriple, s: &AssocLti, tol: &Tol) -> Result<AssocReport> {
    let ft = d.f().transpose();
    let ft_ds = if s.ds.ncols() == 0 { 0.0 } else { (&ft * &s.ds).amax() };
    let rank_ft_cs = if s.n_hat() == 0 { 0 } else { rank(&(&ft * &s.cs), tol)? };
    let k = s.inputs();
    let zero_channel = k == 1 && s.da.amax() <= tol.abs_floor && s.ba.amax() <= tol.abs_floor;
    let full_rank = rank(&s.da, tol)? == k;
    Ok(AssocReport {
        ft_ds,
        rank_ft_cs,
        n_hat: s.n_hat(),
        dichotomy: zero_channel || full_rank,
    })
}

pub fn assoc_lti(d: &DaeTriple, tol: &Tol) -> Result<AssocLti> {
    let (m, n, p) = (d.m(), d.n(), d.p());
    let ft = d.f().transpose();

    // F^T = U diag(sigma) V^T, then S F^T T = [I_r 0; 0 0].
    let svd = svd_rank(&ft, tol)?;
    let r = svd.rank;
    let mut s_scale = vec![1.0; n];
    let mut t_scale = vec![1.0; m];
    for i in 0..r {
        let w = 1.0 / svd.sigma[i].sqrt();
        s_scale[i] = w;
        t_scale[i] = w;
    }
    let s = Mat::from_diagonal(&nalgebra::DVector::from_vec(s_scale)) * svd.u.transpose();
    let t = &svd.v * Mat::from_diagonal(&nalgebra::DVector::from_vec(t_scale));

    let sat = &s * d.a().transpose() * &t;
    let sht = &s * d.h().transpose();
    let atil = sat.view((0, 0), (r, r)).into_owned();
    let a12 = sat.view((0, r), (r, m - r)).into_owned();
    let a21 = sat.view((r, 0), (n - r, r)).into_owned();
    let a22 = sat.view((r, r), (n - r, m - r)).into_owned();
    let b1 = -sht.view((0, 0), (r, p)).into_owned();
    let b2 = -sht.view((r, 0), (n - r, p)).into_owned();

    // With q = T [q1; q2] and w = [q2; u]:
    //   q1' = Ã q1 + G w,   0 = C̃ q1 + D̃ w.
    let g = hstack(&[&a12, &b1]);
    let dtil = hstack(&[&a22, &b2]);
    let ctil = a21;
    let kappa = m - r + p;

    let (v, friend) = vstar(&atil, &g, &ctil, &dtil, tol)?;

    let ker_d = kernel_basis(&dtil, tol)?;
    let keeps_v = preimage(&g, &v, tol)?;
    let l_space = intersect(&ker_d, &keeps_v, tol)?;
    let l = if l_space.dim() == 0 {
        Mat::zeros(kappa, 1)
    } else {
        l_space.into_basis()
    };
    let k = l.ncols();

    let tblk = block_diag(&t, &Mat::identity(p, p));
    let cbar = &tblk * vstack(&[&Mat::identity(r, r), &friend]);
    let dbar = &tblk * vstack(&[&Mat::zeros(r, k), &l]);

    let vb = v.basis();
    let aa = vb.transpose() * (&atil + &g * &friend) * vb;
    let ba = vb.transpose() * &g * &l;
    let ca = &cbar * vb;
    let da = dbar;

    let n_hat = vb.ncols();
    let cs = ca.rows(0, m).into_owned();
    let cu = ca.rows(m, p).into_owned();
    let ds = da.rows(0, m).into_owned();
    let du = da.rows(m, p).into_owned();
    let state_map = if n_hat == 0 {
        Mat::zeros(0, n)
    } else {
        pinv(&(&ft * &cs), tol)?
    };

    Ok(AssocLti {
        aa,
        ba,
        ca,
        da,
        cs,
        cu,
        ds,
        du,
        state_map,
    })
}

/// Restriction of an [`AssocLti`] to its stabilizability subspace
/// `Vg = reachable + stable invariant`.
#[derive(Debug, Clone)]
pub struct StabLti {
    pub ag: Mat,
    pub bg: Mat,
    pub cg: Mat,
    pub dg: Mat,
    pub cg_s: Mat,
    pub cg_u: Mat,
    pub dg_s: Mat,
    pub dg_u: Mat,
    pub state_map: Mat,
    /// Orthonormal basis of `Vg` inside the state space of the parent.
    pub vg: Subspace,
}

impl StabLti {
    pub fn dim(&self) -> usize {
        self.ag.nrows()
    }

    pub fn is_degenerate(&self, tol: &Tol) -> bool {
        self.dg.norm() <= tol.abs_floor
    }
}

/// Reachable subspace of `(a, b)` by orthonormal Krylov expansion.
pub fn reachable_subspace(a: &Mat, b: &Mat, tol: &Tol) -> Result<Subspace> {
    let n = a.nrows();
    let mut space = image_basis(b, tol)?;
    let scale = a.norm().max(1.0);
    while space.dim() > 0 && space.dim() < n {
        let next = a * space.basis();
        let grown = image_with_scale(&hstack(&[space.basis(), &next]), tol, scale)?;
        if grown.dim() <= space.dim() {
            break;
        }
        space = grown;
    }
    Ok(space)
}

pub fn stab_assoc_lti(s: &AssocLti, tol: &Tol) -> Result<StabLti> {
    let n_hat = s.n_hat();
    let m = s.cs.nrows();
    let p = s.cu.nrows();
    let reach = reachable_subspace(&s.aa, &s.ba, tol)?;
    let stable = stable_invariant_subspace(&s.aa, tol)?;
    let vg = if n_hat == 0 {
        Subspace::zero(0)
    } else {
        image_with_scale(&hstack(&[reach.basis(), stable.basis()]), tol, 1.0)?
    };
    let vb = vg.basis();
    let ag = vb.transpose() * &s.aa * vb;
    let bg = vb.transpose() * &s.ba;
    let cg = &s.ca * vb;
    let dg = s.da.clone();
    Ok(StabLti {
        cg_s: cg.rows(0, m).into_owned(),
        cg_u: cg.rows(m, p).into_owned(),
        dg_s: dg.rows(0, m).into_owned(),
        dg_u: dg.rows(m, p).into_owned(),
        state_map: vb.transpose() * &s.state_map,
        ag,
        bg,
        cg,
        dg,
        vg,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::spectral::is_hurwitz;

    fn assoc_from(aa: Mat, ba: Mat) -> AssocLti {
        let n = aa.nrows();
        let k = ba.ncols();
        AssocLti {
            ca: Mat::identity(n + 1, n),
            cs: Mat::identity(n, n),
            cu: Mat::zeros(1, n),
            da: Mat::zeros(n + 1, k),
            ds: Mat::zeros(n, k),
            du: Mat::zeros(1, k),
            state_map: Mat::identity(n, n),
            aa,
            ba,
        }
    }

    #[test]
    fn identity_f_keeps_full_state() {
        let d = DaeTriple::new(
            Mat::identity(2, 2),
            Mat::from_row_slice(2, 2, &[0.0, 1.0, -2.0, -3.0]),
            Mat::from_row_slice(1, 2, &[1.0, 0.0]),
        )
        .unwrap();
        let tol = Tol::default();
        let s = assoc_lti(&d, &tol).unwrap();
        assert_eq!(s.n_hat(), 2);
        assert!(assoc_report(&d, &s, &tol).unwrap().holds());
        // Same spectrum as A^T.
        let ev = |m: &Mat| {
            let mut e: Vec<f64> = crate::spectral::eigenvalues(m).unwrap().iter().map(|z| z.re).collect();
            e.sort_by(f64::total_cmp);
            e
        };
        let (e1, e2) = (ev(&s.aa), ev(d.a()));
        for (x, y) in e1.iter().zip(&e2) {
            assert!((x - y).abs() < 1e-10);
        }
    }

    #[test]
    fn stabilizable_part_of_diag() {
        let s = assoc_from(
            Mat::from_diagonal(&nalgebra::DVector::from_vec(vec![1.0, -1.0])),
            Mat::zeros(2, 1),
        );
        let g = stab_assoc_lti(&s, &Tol::default()).unwrap();
        assert_eq!(g.dim(), 1);
        assert!((g.ag[(0, 0)] + 1.0).abs() < 1e-14);
        assert!((g.vg.basis()[(1, 0)].abs() - 1.0).abs() < 1e-14);
    }

    #[test]
    fn hurwitz_or_controllable_keeps_everything() {
        let a = Mat::from_row_slice(2, 2, &[-1.0, 3.0, 0.0, -2.0]);
        let g = stab_assoc_lti(&assoc_from(a.clone(), Mat::zeros(2, 1)), &Tol::default()).unwrap();
        assert_eq!(g.dim(), 2);
        assert!(is_hurwitz(&g.ag).unwrap());

        let a = Mat::from_row_slice(2, 2, &[1.0, 1.0, 0.0, 2.0]);
        let b = Mat::from_row_slice(2, 1, &[0.0, 1.0]);
        let g = stab_assoc_lti(&assoc_from(a, b), &Tol::default()).unwrap();
        assert_eq!(g.dim(), 2);
    }
}
