//! Shared generators and independent oracles for the integration suites.
#![allow(dead_code)]

use dae_minimax::dae::{DaeTriple, Functional};
use dae_minimax::matspace::{Mat, Vector};
use num::{BigInt, BigRational, One, Signed, ToPrimitive, Zero};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

pub fn rng(seed: u64) -> ChaCha8Rng {
    ChaCha8Rng::seed_from_u64(seed)
}

pub fn random_mat(rng: &mut ChaCha8Rng, r: usize, c: usize) -> Mat {
    Mat::from_fn(r, c, |_, _| rng.random_range(-1.0..1.0))
}

pub fn random_vec(rng: &mut ChaCha8Rng, n: usize) -> Vector {
    Vector::from_fn(n, |_, _| rng.random_range(-1.0..1.0))
}

/// `B C` with `B` of size `r x k`, `C` of size `k x c`, so generically of
/// rank `min(k, r, c)`.
pub fn random_rank(rng: &mut ChaCha8Rng, r: usize, c: usize, k: usize) -> Mat {
    if k == 0 {
        return Mat::zeros(r, c);
    }
    random_mat(rng, r, k) * random_mat(rng, k, c)
}

/// Random triple with `m, n <= max_mn`, `1 <= p <= max_p`, and `F` of a
/// random rank between 1 and `min(m, n)`.
pub fn random_triple(rng: &mut ChaCha8Rng, max_mn: usize, max_p: usize) -> DaeTriple {
    let m = rng.random_range(1..=max_mn);
    let n = rng.random_range(1..=max_mn);
    let p = rng.random_range(1..=max_p);
    let k = rng.random_range(1..=m.min(n));
    let f = random_rank(rng, m, n, k);
    let a = random_mat(rng, m, n);
    let h = random_mat(rng, p, n);
    DaeTriple::new(f, a, h).unwrap()
}

/// ODE triple `F = I`.
pub fn random_ode(rng: &mut ChaCha8Rng, n: usize, p: usize) -> DaeTriple {
    DaeTriple::new(Mat::identity(n, n), random_mat(rng, n, n), random_mat(rng, p, n)).unwrap()
}

pub fn scalar(x: f64) -> Mat {
    Mat::from_element(1, 1, x)
}

pub fn unit(m: usize, i: usize) -> Functional {
    Functional::unit(m, i).unwrap()
}

/// Scalar Riccati `P' = 2 a P + 1/q - r P^2`, `P(0) = p0`, in closed form.
pub struct ScalarRiccati {
    pub a: f64,
    pub q: f64,
    pub r: f64,
}

impl ScalarRiccati {
    fn d(&self) -> f64 {
        (self.a * self.a + self.r / self.q).sqrt()
    }

    pub fn p_plus(&self) -> f64 {
        (self.a + self.d()) / self.r
    }

    pub fn p_minus(&self) -> f64 {
        (self.a - self.d()) / self.r
    }

    pub fn p(&self, p0: f64, t: f64) -> f64 {
        let (pp, pm) = (self.p_plus(), self.p_minus());
        let e = (-2.0 * self.d() * t).exp();
        (pp * (p0 - pm) - pm * (p0 - pp) * e) / ((p0 - pm) - (p0 - pp) * e)
    }

    /// Closed-loop rate of the stationary observer, `-sqrt(a^2 + r/q)`.
    pub fn stationary_pole(&self) -> f64 {
        -self.d()
    }
}

// ---- exact rational linear algebra ----

pub type Q = BigRational;
pub type QMat = Vec<Vec<Q>>;

pub fn q_int(v: i64) -> Q {
    BigRational::from_integer(BigInt::from(v))
}

pub fn to_q(m: &[Vec<i64>]) -> QMat {
    m.iter().map(|r| r.iter().map(|&x| q_int(x)).collect()).collect()
}

pub fn q_to_f64(x: &Q) -> f64 {
    x.numer().to_f64().unwrap() / x.denom().to_f64().unwrap()
}

pub fn q_to_mat(m: &QMat, rows: usize, cols: usize) -> Mat {
    Mat::from_fn(rows, cols, |i, j| q_to_f64(&m[i][j]))
}

pub fn int_to_mat(m: &[Vec<i64>], rows: usize, cols: usize) -> Mat {
    Mat::from_fn(rows, cols, |i, j| m[i][j] as f64)
}

pub fn q_zeros(r: usize, c: usize) -> QMat {
    vec![vec![Q::zero(); c]; r]
}

pub fn q_mul(a: &QMat, b: &QMat, inner: usize, cols: usize) -> QMat {
    let rows = a.len();
    let mut out = q_zeros(rows, cols);
    for i in 0..rows {
        for j in 0..cols {
            let mut s = Q::zero();
            for k in 0..inner {
                s += &a[i][k] * &b[k][j];
            }
            out[i][j] = s;
        }
    }
    out
}

pub fn q_transpose(a: &QMat, rows: usize, cols: usize) -> QMat {
    (0..cols).map(|j| (0..rows).map(|i| a[i][j].clone()).collect()).collect()
}

/// Reduced row echelon form; returns the pivot columns.
pub fn q_rref(a: &mut QMat, cols: usize) -> Vec<usize> {
    let rows = a.len();
    let mut pivots = Vec::new();
    let mut r = 0;
    for c in 0..cols {
        if r == rows {
            break;
        }
        let Some(p) = (r..rows).find(|&i| !a[i][c].is_zero()) else {
            continue;
        };
        a.swap(r, p);
        let inv = Q::one() / &a[r][c];
        for x in a[r].iter_mut() {
            *x = &*x * &inv;
        }
        for i in 0..rows {
            if i != r && !a[i][c].is_zero() {
                let f = a[i][c].clone();
                for j in 0..cols {
                    let v = &a[r][j] * &f;
                    a[i][j] -= v;
                }
            }
        }
        pivots.push(c);
        r += 1;
    }
    pivots
}

pub fn q_rank(a: &QMat, cols: usize) -> usize {
    let mut b = a.clone();
    q_rref(&mut b, cols).len()
}

/// Kernel basis as columns (`cols x k`).
pub fn q_kernel(a: &QMat, cols: usize) -> QMat {
    let mut b = a.clone();
    let pivots = q_rref(&mut b, cols);
    let free: Vec<usize> = (0..cols).filter(|c| !pivots.contains(c)).collect();
    let mut basis = q_zeros(cols, free.len());
    for (k, &f) in free.iter().enumerate() {
        basis[f][k] = Q::one();
        for (row, &pc) in pivots.iter().enumerate() {
            basis[pc][k] = -b[row][f].clone();
        }
    }
    basis
}

pub fn q_inverse(a: &QMat) -> QMat {
    let n = a.len();
    let mut aug: QMat = a
        .iter()
        .enumerate()
        .map(|(i, r)| {
            let mut row = r.clone();
            row.extend((0..n).map(|j| if i == j { Q::one() } else { Q::zero() }));
            row
        })
        .collect();
    let pivots = q_rref(&mut aug, 2 * n);
    assert_eq!(pivots.len(), n, "singular rational matrix");
    aug.into_iter().map(|r| r[n..].to_vec()).collect()
}

fn hcat(a: &QMat, b: &QMat) -> QMat {
    a.iter().zip(b).map(|(x, y)| x.iter().chain(y).cloned().collect()).collect()
}

fn vcat(a: &QMat, b: &QMat) -> QMat {
    a.iter().chain(b.iter()).cloned().collect()
}

fn cols_of(a: &QMat) -> usize {
    a.first().map_or(0, Vec::len)
}

/// Exact terminal weight: for `F = B C` with `B` of full column rank the
/// minimum of `w^T Q0^-1 w` subject to `F^T w = F^T v` is
/// `v^T B (B^T Q0 B)^-1 B^T v`.
pub fn qbar0_exact(b: &QMat, q0: &QMat, m: usize, k: usize) -> QMat {
    let bt = q_transpose(b, m, k);
    let btq = q_mul(&bt, q0, m, m);
    let core = q_inverse(&q_mul(&btq, b, m, k));
    q_mul(&q_mul(b, &core, k, k), &bt, k, m)
}

/// Dimension of the largest `V` with `[A; C] V ⊂ V x 0 + im [G; D]`, by the
/// exact recursion `V <- V ∩ [A; C]^-1 (V x 0 + im [G; D])`.
pub fn vstar_dim_exact(a: &QMat, g: &QMat, c: &QMat, d: &QMat, n: usize) -> usize {
    let kappa = cols_of(g).max(cols_of(d));
    let p = c.len();
    // Columns spanning V, initially the identity.
    let mut v: QMat = (0..n)
        .map(|i| (0..n).map(|j| if i == j { Q::one() } else { Q::zero() }).collect())
        .collect();
    let ac = vcat(a, c); // (n + p) x n
    let gd = if kappa == 0 { q_zeros(n + p, 0) } else { vcat(g, d) };
    loop {
        let k = cols_of(&v);
        if k == 0 {
            return 0;
        }
        let nv = q_mul(&ac, &v, n, k); // (n+p) x k
        let v0 = vcat(&v, &q_zeros(p, k));
        let target = hcat(&v0, &gd);
        let t_cols = cols_of(&target);
        let neg: QMat = target.iter().map(|r| r.iter().map(|x| -x.clone()).collect()).collect();
        let system = hcat(&nv, &neg);
        let ker = q_kernel(&system, k + t_cols);
        let coeff: QMat = ker[..k].to_vec();
        let new_v = q_mul(&v, &coeff, k, cols_of(&coeff));
        let new_cols = cols_of(&new_v);
        if q_rank(&new_v, new_cols) == k {
            return k;
        }
        // Row space of the transpose gives an independent spanning set.
        let mut t = q_transpose(&new_v, n, new_cols);
        let piv = q_rref(&mut t, n);
        v = q_transpose(&t[..piv.len()].to_vec(), piv.len(), n);
    }
}

pub fn random_int_mat(rng: &mut ChaCha8Rng, r: usize, c: usize, bound: i64) -> Vec<Vec<i64>> {
    (0..r).map(|_| (0..c).map(|_| rng.random_range(-bound..=bound)).collect()).collect()
}

pub fn q_abs_max(a: &QMat) -> f64 {
    a.iter()
        .flat_map(|r| r.iter())
        .map(|x| q_to_f64(&x.abs()))
        .fold(0.0, f64::max)
}

/// Relative L2 size of `v - w` on a uniform grid, by the trapezoid rule.
pub fn relative_l2(diff: &[f64], reference: &[f64], dt: f64) -> f64 {
    let l2 = |v: &[f64]| {
        let n = v.len();
        let mut s = 0.0;
        for (i, x) in v.iter().enumerate() {
            let w = if i == 0 || i + 1 == n { 0.5 } else { 1.0 };
            s += w * x * x;
        }
        (s * dt).sqrt()
    };
    l2(diff) / l2(reference).max(f64::MIN_POSITIVE)
}
