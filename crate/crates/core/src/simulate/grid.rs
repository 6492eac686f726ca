use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::matspace::Vector;

/// Uniform time grid `t0, t0 + dt, ..., t0 + steps * dt`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct GridSpec {
    pub t0: f64,
    pub dt: f64,
    pub steps: usize,
}

impl GridSpec {
    pub fn new(t0: f64, dt: f64, steps: usize) -> Result<Self> {
        if !(dt > 0.0) || !dt.is_finite() || !t0.is_finite() {
            return Err(Error::InvalidArgument(format!("grid step must be positive, got {dt}")));
        }
        Ok(GridSpec { t0, dt, steps })
    }

    /// `steps` equal intervals on `[0, horizon]`.
    pub fn on_interval(horizon: f64, steps: usize) -> Result<Self> {
        if !(horizon > 0.0) || steps == 0 {
            return Err(Error::InvalidArgument(format!(
                "need horizon > 0 and steps > 0 (got {horizon}, {steps})"
            )));
        }
        GridSpec::new(0.0, horizon / steps as f64, steps)
    }

    pub fn time(&self, k: usize) -> f64 {
        self.t0 + k as f64 * self.dt
    }

    pub fn end(&self) -> f64 {
        self.time(self.steps)
    }
}

/// Composite quadrature rule on a uniform grid.
#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
pub enum Quadrature {
    #[default]
    Trapezoid,
    Simpson,
}

/// A vector-valued signal sampled on a uniform grid.
#[derive(Debug, Clone, PartialEq)]
pub struct TrajectoryGrid {
    t0: f64,
    dt: f64,
    samples: Vec<Vector>,
}

impl TrajectoryGrid {
    pub fn new(t0: f64, dt: f64, samples: Vec<Vector>) -> Result<Self> {
        GridSpec::new(t0, dt, 0)?;
        let Some(first) = samples.first() else {
            return Err(Error::InvalidArgument("trajectory without samples".into()));
        };
        let dim = first.len();
        for (k, s) in samples.iter().enumerate() {
            if s.len() != dim {
                return Err(Error::Dimension(format!(
                    "sample {k} has dimension {}, expected {dim}",
                    s.len()
                )));
            }
            if !s.iter().all(|x| x.is_finite()) {
                return Err(Error::NotFinite(format!("trajectory sample {k}")));
            }
        }
        Ok(TrajectoryGrid { t0, dt, samples })
    }

    pub fn from_fn<F: FnMut(f64) -> Vector>(grid: GridSpec, mut f: F) -> Result<Self> {
        let samples = (0..=grid.steps).map(|k| f(grid.time(k))).collect();
        TrajectoryGrid::new(grid.t0, grid.dt, samples)
    }

    pub fn zeros(dim: usize, grid: GridSpec) -> Self {
        TrajectoryGrid {
            t0: grid.t0,
            dt: grid.dt,
            samples: vec![Vector::zeros(dim); grid.steps + 1],
        }
    }

    pub fn spec(&self) -> GridSpec {
        GridSpec {
            t0: self.t0,
            dt: self.dt,
            steps: self.samples.len() - 1,
        }
    }

    pub fn t0(&self) -> f64 {
        self.t0
    }

    pub fn dt(&self) -> f64 {
        self.dt
    }

    pub fn len(&self) -> usize {
        self.samples.len()
    }

    pub fn is_empty(&self) -> bool {
        self.samples.is_empty()
    }

    pub fn dim(&self) -> usize {
        self.samples[0].len()
    }

    pub fn time(&self, k: usize) -> f64 {
        self.t0 + k as f64 * self.dt
    }

    pub fn end_time(&self) -> f64 {
        self.time(self.samples.len() - 1)
    }

    pub fn samples(&self) -> &[Vector] {
        &self.samples
    }

    pub fn sample(&self, k: usize) -> &Vector {
        &self.samples[k]
    }

    pub fn last(&self) -> &Vector {
        self.samples.last().expect("non-empty trajectory")
    }

    pub fn component(&self, i: usize) -> Vec<f64> {
        self.samples.iter().map(|s| s[i]).collect()
    }

    pub fn same_grid(&self, other: &TrajectoryGrid) -> bool {
        self.samples.len() == other.samples.len()
            && (self.t0 - other.t0).abs() <= 1e-12 * self.dt
            && (self.dt - other.dt).abs() <= 1e-12 * self.dt
    }

    pub fn map<F: FnMut(f64, &Vector) -> Vector>(&self, mut f: F) -> Result<Self> {
        let samples = self
            .samples
            .iter()
            .enumerate()
            .map(|(k, s)| f(self.time(k), s))
            .collect();
        TrajectoryGrid::new(self.t0, self.dt, samples)
    }

    pub fn scaled(&self, alpha: f64) -> Self {
        TrajectoryGrid {
            t0: self.t0,
            dt: self.dt,
            samples: self.samples.iter().map(|s| s * alpha).collect(),
        }
    }

    /// `alpha * self + beta * other` on a shared grid.
    pub fn combine(&self, alpha: f64, other: &TrajectoryGrid, beta: f64) -> Result<Self> {
        if !self.same_grid(other) || self.dim() != other.dim() {
            return Err(Error::GridMismatch("linear combination of incompatible signals".into()));
        }
        let samples = self
            .samples
            .iter()
            .zip(&other.samples)
            .map(|(a, b)| a * alpha + b * beta)
            .collect();
        Ok(TrajectoryGrid {
            t0: self.t0,
            dt: self.dt,
            samples,
        })
    }

    /// Index reversal `s -> t_end - s`.
    pub fn reversed(&self) -> Self {
        let mut samples = self.samples.clone();
        samples.reverse();
        TrajectoryGrid {
            t0: self.t0,
            dt: self.dt,
            samples,
        }
    }

    /// Value at an arbitrary time by local cubic Lagrange interpolation
    /// (clamped to the grid ends).
    pub fn at(&self, t: f64) -> Vector {
        let n = self.samples.len();
        let x = ((t - self.t0) / self.dt).clamp(0.0, (n - 1) as f64);
        let nearest = x.round();
        if (x - nearest).abs() < 1e-9 {
            return self.samples[nearest as usize].clone();
        }
        let order = (n - 1).min(3);
        let base = (x.floor() as usize).saturating_sub(1).min(n - 1 - order);
        let mut out = Vector::zeros(self.dim());
        for j in base..=base + order {
            let mut w = 1.0;
            for i in base..=base + order {
                if i != j {
                    w *= (x - i as f64) / (j as f64 - i as f64);
                }
            }
            out += &self.samples[j] * w;
        }
        out
    }

    /// Integral of `g(t, sample)` over `[t0, t1]`.
    pub fn integrate<G: Fn(f64, &Vector) -> f64>(
        &self,
        t1: f64,
        rule: Quadrature,
        g: G,
    ) -> Result<f64> {
        let span = t1 - self.t0;
        if span < -1e-12 * self.dt {
            return Err(Error::GridMismatch(format!(
                "integration end {t1} precedes grid start {}",
                self.t0
            )));
        }
        if t1 > self.end_time() + 1e-9 * self.dt.max(t1.abs()) {
            return Err(Error::GridMismatch(format!(
                "grid ends at {} but the horizon is {t1}",
                self.end_time()
            )));
        }
        let raw = span / self.dt;
        let mut full = (raw + 1e-9).floor() as usize;
        full = full.min(self.samples.len() - 1);
        let vals: Vec<f64> = (0..=full).map(|k| g(self.time(k), &self.samples[k])).collect();
        let mut total = composite(&vals, self.dt, rule);
        let rest = t1 - self.time(full);
        if rest > 1e-12 * self.dt {
            let gt = g(t1, &self.at(t1));
            total += 0.5 * rest * (vals[full] + gt);
        }
        Ok(total)
    }

    /// Running integral `t_k -> int_{t0}^{t_k} sample`, fourth-order accurate:
    /// each interval is integrated against the cubic through its four
    /// nearest nodes.
    pub fn cumulative(&self) -> TrajectoryGrid {
        let n = self.samples.len();
        let h = self.dt;
        let mut acc = Vector::zeros(self.dim());
        let mut out = Vec::with_capacity(n);
        out.push(acc.clone());
        let s = &self.samples;
        for k in 0..n - 1 {
            let piece = if n < 4 {
                (&s[k] + &s[k + 1]) * (0.5 * h)
            } else if k == 0 {
                (&s[0] * 9.0 + &s[1] * 19.0 - &s[2] * 5.0 + &s[3]) * (h / 24.0)
            } else if k == n - 2 {
                (&s[k + 1] * 9.0 + &s[k] * 19.0 - &s[k - 1] * 5.0 + &s[k - 2]) * (h / 24.0)
            } else {
                ((&s[k] + &s[k + 1]) * 13.0 - &s[k - 1] - &s[k + 2]) * (h / 24.0)
            };
            acc += piece;
            out.push(acc.clone());
        }
        TrajectoryGrid {
            t0: self.t0,
            dt: self.dt,
            samples: out,
        }
    }

    /// Integral of a scalar function of the sample over the whole grid.
    pub fn integrate_all<G: Fn(f64, &Vector) -> f64>(&self, rule: Quadrature, g: G) -> f64 {
        let vals: Vec<f64> = self
            .samples
            .iter()
            .enumerate()
            .map(|(k, s)| g(self.time(k), s))
            .collect();
        composite(&vals, self.dt, rule)
    }
}

fn composite(vals: &[f64], h: f64, rule: Quadrature) -> f64 {
    let n = vals.len().saturating_sub(1);
    if n == 0 {
        return 0.0;
    }
    let trap = |v: &[f64]| {
        let m = v.len() - 1;
        h * (0.5 * (v[0] + v[m]) + v[1..m].iter().sum::<f64>())
    };
    match rule {
        Quadrature::Trapezoid => trap(vals),
        Quadrature::Simpson if n < 2 => trap(vals),
        Quadrature::Simpson => {
            let simpson = |v: &[f64]| {
                let m = v.len() - 1;
                let mut s = v[0] + v[m];
                for (i, x) in v.iter().enumerate().take(m).skip(1) {
                    s += if i % 2 == 1 { 4.0 * x } else { 2.0 * x };
                }
                s * h / 3.0
            };
            if n % 2 == 0 {
                simpson(vals)
            } else if n >= 3 {
                // Simpson's 3/8 rule on the last three intervals.
                let tail = &vals[n - 3..];
                let three_eighths = 3.0 * h / 8.0 * (tail[0] + 3.0 * tail[1] + 3.0 * tail[2] + tail[3]);
                let head = if n - 3 > 0 { simpson(&vals[..=n - 3]) } else { 0.0 };
                head + three_eighths
            } else {
                trap(vals)
            }
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn scalar_grid(f: impl Fn(f64) -> f64, t1: f64, steps: usize) -> TrajectoryGrid {
        TrajectoryGrid::from_fn(GridSpec::on_interval(t1, steps).unwrap(), |t| {
            Vector::from_element(1, f(t))
        })
        .unwrap()
    }

    #[test]
    fn rejects_bad_grids() {
        assert!(TrajectoryGrid::new(0.0, 0.0, vec![Vector::zeros(1)]).is_err());
        assert!(TrajectoryGrid::new(0.0, 1.0, vec![]).is_err());
        assert!(TrajectoryGrid::new(0.0, 1.0, vec![Vector::zeros(1), Vector::zeros(2)]).is_err());
        assert!(TrajectoryGrid::new(0.0, 1.0, vec![Vector::from_element(1, f64::NAN)]).is_err());
    }

    #[test]
    fn constant_integrates_exactly() {
        let g = scalar_grid(|_| 3.0, 2.0, 7);
        for rule in [Quadrature::Trapezoid, Quadrature::Simpson] {
            let v = g.integrate(2.0, rule, |_, x| x[0]).unwrap();
            assert!((v - 6.0).abs() < 1e-13);
        }
    }

    #[test]
    fn simpson_is_exact_for_cubics() {
        for steps in [6, 7] {
            let g = scalar_grid(|t| t * t * t - t, 1.0, steps);
            let v = g.integrate(1.0, Quadrature::Simpson, |_, x| x[0]).unwrap();
            assert!((v - (0.25 - 0.5)).abs() < 1e-13, "steps {steps}: {v}");
        }
    }

    #[test]
    fn horizon_beyond_grid_is_an_error() {
        let g = scalar_grid(|_| 1.0, 1.0, 10);
        assert!(matches!(
            g.integrate(1.5, Quadrature::Trapezoid, |_, x| x[0]),
            Err(Error::GridMismatch(_))
        ));
        let half = g.integrate(0.55, Quadrature::Trapezoid, |_, x| x[0]).unwrap();
        assert!((half - 0.55).abs() < 1e-12);
    }

    #[test]
    fn running_integral_is_exact_on_cubics() {
        let g = scalar_grid(|t| 4.0 * t * t * t - 3.0 * t * t, 1.0, 9);
        let c = g.cumulative();
        for k in 0..c.len() {
            let t = g.time(k);
            assert!((c.sample(k)[0] - (t.powi(4) - t.powi(3))).abs() < 1e-13);
        }
    }

    #[test]
    fn cubic_interpolation_is_exact_on_cubics() {
        let g = scalar_grid(|t| 2.0 * t * t * t - t + 1.0, 1.0, 10);
        for &t in &[0.03, 0.47, 0.5, 0.99] {
            let exact = 2.0 * t * t * t - t + 1.0;
            assert!((g.at(t)[0] - exact).abs() < 1e-12);
        }
    }
}
