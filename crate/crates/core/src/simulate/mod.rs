//! Sampled signals, fixed-step integration and synthetic DAE solutions.

mod grid;
mod signal;

pub use grid::{GridSpec, Quadrature, TrajectoryGrid};
pub use signal::{sample_signals, SignalSpec, TrigPoly};

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use crate::dae::{rho, DaeTriple, SolutionTuple, WeightSpec};
use crate::error::{Error, Result};
use crate::matspace::{Mat, Vector};

/// Right-hand side of `x' = field(t, x)`.
pub trait VectorField {
    fn eval(&self, t: f64, x: &Vector) -> Vector;
}

impl<F: Fn(f64, &Vector) -> Vector> VectorField for F {
    fn eval(&self, t: f64, x: &Vector) -> Vector {
        self(t, x)
    }
}

/// `x' = M(t) x + g(t)`.
pub struct LinearField<M, G> {
    pub matrix: M,
    pub forcing: G,
}

impl<M, G> VectorField for LinearField<M, G>
where
    M: Fn(f64) -> Mat,
    G: Fn(f64) -> Vector,
{
    fn eval(&self, t: f64, x: &Vector) -> Vector {
        (self.matrix)(t) * x + (self.forcing)(t)
    }
}

/// Constant-coefficient field `x' = a x + g(t)`.
pub fn lti_field<'a, G: Fn(f64) -> Vector + 'a>(a: &'a Mat, g: G) -> impl VectorField + 'a {
    move |t: f64, x: &Vector| a * x + g(t)
}

pub fn rk4_step<V: VectorField + ?Sized>(field: &V, t: f64, x: &Vector, h: f64) -> Vector {
    let k1 = field.eval(t, x);
    let k2 = field.eval(t + 0.5 * h, &(x + &k1 * (0.5 * h)));
    let k3 = field.eval(t + 0.5 * h, &(x + &k2 * (0.5 * h)));
    let k4 = field.eval(t + h, &(x + &k3 * h));
    x + (k1 + k2 * 2.0 + k3 * 2.0 + k4) * (h / 6.0)
}

/// Classical fourth-order Runge-Kutta on a uniform grid.
pub fn rk4<V: VectorField + ?Sized>(field: &V, x0: &Vector, grid: GridSpec) -> Result<TrajectoryGrid> {
    rk4_substepped(field, x0, grid, 1)
}

/// As [`rk4`], taking `sub` equal internal steps per grid interval and
/// recording only grid nodes.
pub fn rk4_substepped<V: VectorField + ?Sized>(
    field: &V,
    x0: &Vector,
    grid: GridSpec,
    sub: usize,
) -> Result<TrajectoryGrid> {
    let sub = sub.max(1);
    let h = grid.dt / sub as f64;
    let mut x = x0.clone();
    let mut samples = Vec::with_capacity(grid.steps + 1);
    samples.push(x.clone());
    for k in 0..grid.steps {
        let tk = grid.time(k);
        for j in 0..sub {
            x = rk4_step(field, tk + j as f64 * h, &x, h);
        }
        samples.push(x.clone());
    }
    TrajectoryGrid::new(grid.t0, grid.dt, samples)
}

/// Builds an exact solution from a smooth state trajectory `x` and output
/// noise `eta`: `f = F x' - A x` and `y = H x + eta`.
pub fn synth_solution_with(
    d: &DaeTriple,
    x: &TrigPoly,
    eta: &TrigPoly,
    grid: GridSpec,
) -> Result<SolutionTuple> {
    if x.dim() != d.n() || eta.dim() != d.p() {
        return Err(Error::Dimension("synthetic signals do not match the triple".into()));
    }
    let xs = TrajectoryGrid::from_fn(grid, |t| x.value(t))?;
    let fs = TrajectoryGrid::from_fn(grid, |t| d.f() * x.derivative(t) - d.a() * x.value(t))?;
    let es = TrajectoryGrid::from_fn(grid, |t| eta.value(t))?;
    let ys = TrajectoryGrid::from_fn(grid, |t| d.h() * x.value(t) + eta.value(t))?;
    SolutionTuple::new(xs, fs, ys, es)
}

/// Seeded random solution with trigonometric state and noise.
pub fn synth_solution(d: &DaeTriple, seed: u64, grid: GridSpec) -> Result<SolutionTuple> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let x = TrigPoly::random(d.n(), 3, 3.0, &mut rng);
    let eta = TrigPoly::random(d.p(), 3, 3.0, &mut rng);
    synth_solution_with(d, &x, &eta, grid)
}

/// Data scaled onto the boundary of the unit noise ellipsoid.
#[derive(Debug, Clone)]
pub struct Admissible {
    pub x0: Vector,
    pub f: TrajectoryGrid,
    pub eta: TrajectoryGrid,
    /// Factor the inputs were multiplied by, `1 / sqrt(rho)`.
    pub factor: f64,
}

pub fn scale_to_admissible(
    x0: &Vector,
    f: &TrajectoryGrid,
    eta: &TrajectoryGrid,
    t1: f64,
    w: &WeightSpec,
) -> Result<Admissible> {
    let r = rho(x0, f, eta, t1, w)?;
    if !(r > 0.0) {
        return Err(Error::InvalidArgument(
            "cannot scale zero data onto the unit ellipsoid".into(),
        ));
    }
    let factor = 1.0 / r.sqrt();
    Ok(Admissible {
        x0: x0 * factor,
        f: f.scaled(factor),
        eta: eta.scaled(factor),
        factor,
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn rk4_constant_and_exponential() {
        let grid = GridSpec::on_interval(1.0, 1000).unwrap();
        let zero = Mat::zeros(2, 2);
        let c = Vector::from_vec(vec![1.5, -2.0]);
        let traj = rk4(&lti_field(&zero, |_| Vector::zeros(2)), &c, grid).unwrap();
        assert_eq!(traj.last(), &c);

        let a = Mat::from_element(1, 1, -1.0);
        let traj = rk4(&lti_field(&a, |_| Vector::zeros(1)), &Vector::from_element(1, 1.0), grid)
            .unwrap();
        assert!((traj.last()[0] - (-1.0f64).exp()).abs() < 1e-8);
    }

    #[test]
    fn rk4_rotation_preserves_norm() {
        let a = Mat::from_row_slice(2, 2, &[0.0, 1.0, -1.0, 0.0]);
        let grid = GridSpec::on_interval(2.0 * std::f64::consts::PI, 2000).unwrap();
        let x0 = Vector::from_vec(vec![1.0, 0.0]);
        let traj = rk4(&lti_field(&a, |_| Vector::zeros(2)), &x0, grid).unwrap();
        for s in traj.samples() {
            assert!((s.norm() - 1.0).abs() < 1e-7);
        }
    }

    #[test]
    fn rk4_is_fourth_order() {
        let a = Mat::from_element(1, 1, -1.0);
        let err = |steps| {
            let g = GridSpec::on_interval(1.0, steps).unwrap();
            let t = rk4(&lti_field(&a, |_| Vector::zeros(1)), &Vector::from_element(1, 1.0), g)
                .unwrap();
            (t.last()[0] - (-1.0f64).exp()).abs()
        };
        let (e1, e2, e3) = (err(10), err(20), err(40));
        for ratio in [e1 / e2, e2 / e3] {
            assert!((ratio - 16.0).abs() < 1.6, "ratio {ratio}");
        }
    }

    #[test]
    fn synthetic_solution_for_ode() {
        let a = Mat::from_element(1, 1, 0.7);
        let one = Mat::identity(1, 1);
        let d = DaeTriple::new(one.clone(), a, one).unwrap();
        let x = TrigPoly {
            offset: Vector::zeros(1),
            freqs: vec![1.0],
            cos_coef: Mat::zeros(1, 1),
            sin_coef: Mat::identity(1, 1),
        };
        let grid = GridSpec::on_interval(2.0, 400).unwrap();
        let s = synth_solution_with(&d, &x, &TrigPoly::zero(1), grid).unwrap();
        for k in [0, 17, 400] {
            let t = grid.time(k);
            assert!((s.f.sample(k)[0] - (t.cos() - 0.7 * t.sin())).abs() < 1e-14);
        }
        assert!(s.residual(&d).unwrap() < 1e-8);
    }

    #[test]
    fn scaling_hits_the_unit_sphere() {
        let d = DaeTriple::new(Mat::identity(2, 2), Mat::identity(2, 2), Mat::identity(1, 2))
            .unwrap();
        let grid = GridSpec::on_interval(1.0, 100).unwrap();
        let s = synth_solution(&d, 9, grid).unwrap();
        let w = WeightSpec::identity(2, 1);
        let x0 = d.f() * s.x.sample(0);
        let adm = scale_to_admissible(&x0, &s.f, &s.eta, 1.0, &w).unwrap();
        let r = rho(&adm.x0, &adm.f, &adm.eta, 1.0, &w).unwrap();
        assert!((r - 1.0).abs() < 1e-12);
        let zero = TrajectoryGrid::zeros(2, grid);
        assert!(scale_to_admissible(&Vector::zeros(2), &zero, &TrajectoryGrid::zeros(1, grid), 1.0, &w)
            .is_err());
    }
}
