mod common;

use common::*;
use dae_minimax::dae::{qbar0, DaeTriple, WeightSpec};
use dae_minimax::heatpde::{self, HeatConfig};
use dae_minimax::matspace::Tol;
use dae_minimax::observer::{design_finite, design_infinite};
use dae_minimax::reduction::vstar;
use dae_minimax::simulate::GridSpec;
use num::{One, Zero};
use rand::Rng;

#[test]
fn qbar0_matches_exact_rational_minimum() {
    let tol = Tol::default();
    let mut r = rng(11);
    for case in 0..40 {
        let m = r.random_range(1..=5);
        let n = r.random_range(1..=5);
        let k = r.random_range(1..=m.min(n));
        let b = random_int_mat(&mut r, m, k, 3);
        let c = random_int_mat(&mut r, k, n, 3);
        let (bq, cq) = (to_q(&b), to_q(&c));
        // Skip draws where B or C is rank deficient.
        if q_rank(&bq, k) != k || q_rank(&q_transpose(&cq, k, n), k) != k {
            continue;
        }
        let l = random_int_mat(&mut r, m, m, 2);
        let lq = to_q(&l);
        let mut q0 = q_mul(&lq, &q_transpose(&lq, m, m), m, m);
        for (i, row) in q0.iter_mut().enumerate() {
            row[i] += q_int(1);
        }
        let exact = qbar0_exact(&bq, &q0, m, k);
        let f = int_to_mat(&b, m, k) * int_to_mat(&c, k, n);
        let got = qbar0(&f, &q_to_mat(&q0, m, m), &tol).unwrap();
        let want = q_to_mat(&exact, m, m);
        let scale = q_abs_max(&exact).max(1.0);
        assert!(
            (&got - &want).amax() <= 1e-9 * scale,
            "case {case}: {got} vs {want}, B={b:?} C={c:?} Q0={}", q_to_mat(&q0, m, m)
        );
    }
}

#[test]
fn vstar_dimension_matches_exact_recursion() {
    let tol = Tol::default();
    let mut r = rng(5);
    let mut nontrivial = 0;
    for case in 0..200 {
        let n = r.random_range(1..=4);
        let kappa = r.random_range(0..=3);
        let p = r.random_range(0..=3);
        // Sparse small integers give structured (non-generic) subspaces.
        let mut sparse = |rows: usize, cols: usize| -> Vec<Vec<i64>> {
            (0..rows)
                .map(|_| {
                    (0..cols)
                        .map(|_| if r.random_bool(0.5) { 0 } else { r.random_range(-2..=2) })
                        .collect()
                })
                .collect()
        };
        let (a, g, c, d) = (sparse(n, n), sparse(n, kappa), sparse(p, n), sparse(p, kappa));
        let exact = vstar_dim_exact(&to_q(&a), &to_q(&g), &to_q(&c), &to_q(&d), n);
        let (af, gf, cf, df) = (
            int_to_mat(&a, n, n),
            int_to_mat(&g, n, kappa),
            int_to_mat(&c, p, n),
            int_to_mat(&d, p, kappa),
        );
        let (v, friend) = vstar(&af, &gf, &cf, &df, &tol).unwrap();
        assert_eq!(v.dim(), exact, "case {case}: A={af} G={gf} C={cf} D={df}");
        if exact > 0 && exact < n {
            nontrivial += 1;
        }
        if v.dim() > 0 {
            let vb = v.basis();
            let closed = (&af + &gf * &friend) * vb;
            assert!(v.reject_mat(&closed).amax() < 1e-9, "case {case}: not invariant");
            if p > 0 {
                assert!(((&cf + &df * &friend) * vb).amax() < 1e-9, "case {case}: output not nulled");
            }
        }
    }
    assert!(nontrivial >= 20, "only {nontrivial} proper subspaces exercised");
}

#[test]
fn finite_sigma_matches_scalar_closed_form() {
    let tol = Tol::default();
    for &(a, q0, q, r, t1) in &[
        (0.3, 2.0, 0.5, 4.0, 1.5),
        (-1.2, 0.7, 3.0, 0.25, 2.0),
        (2.0, 1.0, 1.0, 1.0, 0.8),
    ] {
        let d = DaeTriple::new(scalar(1.0), scalar(a), scalar(1.0)).unwrap();
        let w = WeightSpec::new(scalar(q0), scalar(q), scalar(r)).unwrap();
        let ell = unit(1, 0);
        let obs = design_finite(&d, &w, &ell, t1, 800, &tol).unwrap();
        let exact = ScalarRiccati { a, q, r }.p(1.0 / q0, t1);
        assert!((obs.sigma - exact).abs() <= 1e-9 * exact, "a = {a}: {} vs {exact}", obs.sigma);
    }
}

#[test]
fn infinite_design_matches_scalar_stationary_solution() {
    let tol = Tol::default();
    for &(a, q, r) in &[(0.5, 1.0, 2.0), (-0.3, 4.0, 0.5)] {
        let d = DaeTriple::new(scalar(1.0), scalar(a), scalar(1.0)).unwrap();
        let w = WeightSpec::new(scalar(1.0), scalar(q), scalar(r)).unwrap();
        let obs = design_infinite(&d, &w, &[unit(1, 0)], &tol).unwrap();
        let oracle = ScalarRiccati { a, q, r };
        assert!((obs.sigma[0] - oracle.p_plus()).abs() <= 1e-10 * oracle.p_plus());
        assert!((obs.ao[(0, 0)] - oracle.stationary_pole()).abs() <= 1e-10);
    }
}

/// Closed-form modal response to `u1 = 10 cos 5t`, `u2 = 10 sin 3t`.
fn modal_exact(k: f64, z0: f64, t: f64, first: bool) -> f64 {
    let e = (-k * t).exp();
    if first {
        z0 * e + 10.0 * (k * (5.0 * t).cos() + 5.0 * (5.0 * t).sin() - k * e) / (k * k + 25.0)
    } else {
        z0 * e + 10.0 * (k * (3.0 * t).sin() - 3.0 * (3.0 * t).cos() + 3.0 * e) / (k * k + 9.0)
    }
}

#[test]
fn heat_truth_matches_variation_of_constants() {
    let cfg = HeatConfig::default();
    let mats = heatpde::build_matrices(&cfg).unwrap();
    let grid = GridSpec::on_interval(cfg.horizon, 50_000).unwrap();
    let truth = heatpde::exact_truth(&cfg, &mats, grid).unwrap();
    let pi2 = std::f64::consts::PI.powi(2);
    let k1 = cfg.c * (cfg.n1 as f64).powi(2) * pi2;
    let k2 = cfg.c * (cfg.n2 as f64).powi(2) * pi2;
    let mut worst: f64 = 0.0;
    for idx in (0..=50_000).step_by(97) {
        let t = grid.time(idx);
        let w = heatpde::noise_signal(&cfg, t);
        let y = truth.y.sample(idx);
        worst = worst.max((y[0] - modal_exact(k1, 0.2, t, true) - w).abs());
        worst = worst.max((y[1] - modal_exact(k2, 0.2, t, false) - w).abs());
    }
    assert!(worst <= 1e-8, "max deviation {worst:e}");
}

// Exact Legendre coefficients for the stiffness oracle.
fn legendre_coeffs(k: usize) -> Vec<Q> {
    let mut p0 = vec![Q::one()];
    if k == 0 {
        return p0;
    }
    let mut p1 = vec![Q::zero(), Q::one()];
    for j in 1..k {
        let jq = q_int(j as i64);
        let mut next = vec![Q::zero(); j + 2];
        for (i, c) in p1.iter().enumerate() {
            next[i + 1] += c * (q_int(2) * &jq + Q::one());
        }
        for (i, c) in p0.iter().enumerate() {
            next[i] -= c * &jq;
        }
        let denom = jq + Q::one();
        for c in next.iter_mut() {
            *c = &*c / &denom;
        }
        p0 = p1;
        p1 = next;
    }
    p1
}

fn poly_sub(a: &[Q], b: &[Q]) -> Vec<Q> {
    let n = a.len().max(b.len());
    (0..n)
        .map(|i| a.get(i).cloned().unwrap_or_else(Q::zero) - b.get(i).cloned().unwrap_or_else(Q::zero))
        .collect()
}

fn second_derivative(a: &[Q]) -> Vec<Q> {
    (2..a.len()).map(|i| &a[i] * q_int((i * (i - 1)) as i64)).collect()
}

/// `int_{-1}^{1} a(x) b(x) dx` for coefficient vectors.
fn inner(a: &[Q], b: &[Q]) -> Q {
    let mut s = Q::zero();
    for (i, x) in a.iter().enumerate() {
        for (j, y) in b.iter().enumerate() {
            if (i + j) % 2 == 0 {
                s += x * y * (q_int(2) / q_int((i + j + 1) as i64));
            }
        }
    }
    s
}

#[test]
fn stiffness_and_gram_match_exact_polynomial_integrals() {
    let cfg = HeatConfig { n: 8, nu: 3, ..HeatConfig::default() };
    let mats = heatpde::build_matrices(&cfg).unwrap();
    let phi: Vec<Vec<Q>> = (1..=cfg.n)
        .map(|k| poly_sub(&legendre_coeffs(k + 1), &legendre_coeffs(k)))
        .collect();
    for i in 0..cfg.n {
        for j in 0..cfg.n {
            let gram = q_to_f64(&inner(&phi[i], &phi[j]));
            assert!((mats.mhat[(i, j)] - gram).abs() < 1e-13, "Gram ({i},{j})");
            let stiff = -cfg.c * q_to_f64(&inner(&second_derivative(&phi[i]), &phi[j]));
            let scale = stiff.abs().max(1.0);
            assert!((mats.astiff[(i, j)] - stiff).abs() < 1e-11 * scale, "A_N ({i},{j})");
        }
    }
    // Output rows: projections of sin(pi n x) against a fine midpoint sum.
    let fine = 400_000;
    let h = 2.0 / fine as f64;
    for (row, mode) in cfg.modes().iter().enumerate() {
        for k in 0..3 {
            let coef: Vec<f64> = phi[k].iter().map(q_to_f64).collect();
            let val = |x: f64| coef.iter().rev().fold(0.0, |acc, c| acc * x + c);
            let mut s = 0.0;
            for i in 0..fine {
                let x = -1.0 + (i as f64 + 0.5) * h;
                s += (std::f64::consts::PI * *mode as f64 * x).sin() * val(x) * h;
            }
            assert!((mats.c[(row, k)] - s).abs() < 1e-8, "C ({row},{k}): {} vs {s}", mats.c[(row, k)]);
        }
    }
}
