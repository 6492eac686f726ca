use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::matspace::{Mat, Vector};
use crate::simulate::grid::{GridSpec, TrajectoryGrid};

/// Analytic scalar signal.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "kebab-case")]
pub enum SignalSpec {
    Zero,
    Constant { value: f64 },
    /// `amplitude * cos(frequency * t + phase)`
    Sinusoid {
        amplitude: f64,
        frequency: f64,
        #[serde(default)]
        phase: f64,
    },
    /// `amplitude * exp(-decay * t) * cos(frequency * t)`
    ExpCosine {
        amplitude: f64,
        decay: f64,
        frequency: f64,
    },
    /// Samples on a uniform grid starting at `t0`, interpolated between nodes.
    Samples { t0: f64, dt: f64, values: Vec<f64> },
}

impl SignalSpec {
    pub fn validate(&self) -> Result<()> {
        let finite = |xs: &[f64]| xs.iter().all(|x| x.is_finite());
        let ok = match self {
            SignalSpec::Zero => true,
            SignalSpec::Constant { value } => value.is_finite(),
            SignalSpec::Sinusoid {
                amplitude,
                frequency,
                phase,
            } => finite(&[*amplitude, *frequency, *phase]) && *frequency >= 0.0,
            SignalSpec::ExpCosine {
                amplitude,
                decay,
                frequency,
            } => finite(&[*amplitude, *decay, *frequency]) && *frequency >= 0.0,
            SignalSpec::Samples { t0, dt, values } => {
                finite(values) && t0.is_finite() && *dt > 0.0 && !values.is_empty()
            }
        };
        if ok {
            Ok(())
        } else {
            Err(Error::InvalidArgument(format!("bad signal parameters: {self:?}")))
        }
    }

    pub fn value(&self, t: f64) -> f64 {
        match self {
            SignalSpec::Zero => 0.0,
            SignalSpec::Constant { value } => *value,
            SignalSpec::Sinusoid {
                amplitude,
                frequency,
                phase,
            } => amplitude * (frequency * t + phase).cos(),
            SignalSpec::ExpCosine {
                amplitude,
                decay,
                frequency,
            } => amplitude * (-decay * t).exp() * (frequency * t).cos(),
            SignalSpec::Samples { t0, dt, values } => {
                let samples = values.iter().map(|&v| Vector::from_element(1, v)).collect();
                TrajectoryGrid::new(*t0, *dt, samples)
                    .map(|g| g.at(t)[0])
                    .unwrap_or(0.0)
            }
        }
    }
}

/// Samples a vector of scalar signals on a grid.
pub fn sample_signals(specs: &[SignalSpec], grid: GridSpec) -> Result<TrajectoryGrid> {
    for s in specs {
        s.validate()?;
    }
    TrajectoryGrid::from_fn(grid, |t| {
        Vector::from_iterator(specs.len(), specs.iter().map(|s| s.value(t)))
    })
}

/// Vector trigonometric polynomial
/// `c + sum_k a_k cos(w_k t) + b_k sin(w_k t)` with known derivative.
#[derive(Debug, Clone, PartialEq)]
pub struct TrigPoly {
    pub offset: Vector,
    pub freqs: Vec<f64>,
    pub cos_coef: Mat,
    pub sin_coef: Mat,
}

impl TrigPoly {
    pub fn zero(dim: usize) -> Self {
        TrigPoly {
            offset: Vector::zeros(dim),
            freqs: Vec::new(),
            cos_coef: Mat::zeros(dim, 0),
            sin_coef: Mat::zeros(dim, 0),
        }
    }

    /// Random coefficients in `[-1, 1]` and frequencies in `[0.2, max_freq]`.
    pub fn random<R: Rng>(dim: usize, terms: usize, max_freq: f64, rng: &mut R) -> Self {
        let coef = |rng: &mut R| Mat::from_fn(dim, terms, |_, _| rng.random_range(-1.0..1.0));
        let offset = Vector::from_fn(dim, |_, _| rng.random_range(-1.0..1.0));
        let freqs = (0..terms).map(|_| rng.random_range(0.2..max_freq.max(0.3))).collect();
        let cos_coef = coef(rng);
        let sin_coef = coef(rng);
        TrigPoly {
            offset,
            freqs,
            cos_coef,
            sin_coef,
        }
    }

    pub fn dim(&self) -> usize {
        self.offset.len()
    }

    pub fn value(&self, t: f64) -> Vector {
        let mut out = self.offset.clone();
        for (k, w) in self.freqs.iter().enumerate() {
            let (s, c) = (w * t).sin_cos();
            out += self.cos_coef.column(k) * c + self.sin_coef.column(k) * s;
        }
        out
    }

    pub fn derivative(&self, t: f64) -> Vector {
        let mut out = Vector::zeros(self.dim());
        for (k, w) in self.freqs.iter().enumerate() {
            let (s, c) = (w * t).sin_cos();
            out += self.sin_coef.column(k) * (w * c) - self.cos_coef.column(k) * (w * s);
        }
        out
    }
}
