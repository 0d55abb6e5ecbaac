//! Scalar quantities with one-standard-deviation Gaussian uncertainty.
//!
//! Inputs are always treated as independent. First-order propagation is the
//! production path; [`mc_propagate`] is the sampling oracle used to check it.

use std::fmt;

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, StandardNormal};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Default relative step for the central-difference gradient.
pub const DEFAULT_STEP: f64 = 1e-6;
/// Absolute floor on the finite-difference step.
pub const STEP_FLOOR: f64 = 1e-12;
/// Smallest sample count accepted by [`mc_propagate`].
pub const MIN_MC_SAMPLES: usize = 1_000;

/// A value with its one-sigma uncertainty.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "RawUValue")]
pub struct UValue {
    value: f64,
    sigma: f64,
}

#[derive(Deserialize)]
#[serde(deny_unknown_fields)]
struct RawUValue {
    value: f64,
    #[serde(default)]
    sigma: f64,
}

impl TryFrom<RawUValue> for UValue {
    type Error = Error;

    fn try_from(raw: RawUValue) -> Result<Self> {
        UValue::new(raw.value, raw.sigma)
    }
}

impl UValue {
    pub fn new(value: f64, sigma: f64) -> Result<Self> {
        if !value.is_finite() || !sigma.is_finite() {
            return Err(Error::invalid(format!(
                "non-finite uncertain value {value} ± {sigma}"
            )));
        }
        if sigma < 0.0 {
            return Err(Error::invalid(format!("negative sigma {sigma}")));
        }
        Ok(Self { value, sigma })
    }

    /// A value known without uncertainty.
    pub fn exact(value: f64) -> Self {
        Self::new(value, 0.0).expect("exact values must be finite")
    }

    pub fn value(&self) -> f64 {
        self.value
    }

    pub fn sigma(&self) -> f64 {
        self.sigma
    }

    /// sigma / |value|; infinite for a zero value with nonzero sigma.
    pub fn relative(&self) -> f64 {
        if self.sigma == 0.0 {
            0.0
        } else {
            self.sigma / self.value.abs()
        }
    }

    /// Multiply value and sigma by a constant.
    pub fn scale(&self, c: f64) -> Result<Self> {
        Self::new(self.value * c, self.sigma * c.abs())
    }

    /// 0 ± 1.
    pub const fn standard_normal() -> Self {
        Self { value: 0.0, sigma: 1.0 }
    }
}

impl fmt::Display for UValue {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{:e} ± {:e}", self.value, self.sigma)
    }
}

/// Σ cᵢ·vᵢ with sigmas added in quadrature.
pub fn combine_linear(terms: &[(f64, UValue)]) -> Result<UValue> {
    let mut value = 0.0;
    let mut var = 0.0;
    for (c, v) in terms {
        if !c.is_finite() {
            return Err(Error::invalid(format!("non-finite coefficient {c}")));
        }
        value += c * v.value;
        var += (c * v.sigma).powi(2);
    }
    UValue::new(value, var.sqrt())
}

/// a·b with relative errors added in quadrature.
pub fn combine_product(a: UValue, b: UValue) -> Result<UValue> {
    // Written in absolute form so that a zero factor does not produce 0/0.
    let value = a.value * b.value;
    let sigma = ((b.value * a.sigma).powi(2) + (a.value * b.sigma).powi(2)).sqrt();
    UValue::new(value, sigma)
}

/// a/b with relative errors added in quadrature.
pub fn combine_quotient(a: UValue, b: UValue) -> Result<UValue> {
    if b.value == 0.0 {
        return Err(Error::DivisionByZero("quotient denominator is zero".into()));
    }
    let value = a.value / b.value;
    let sigma = ((a.sigma / b.value).powi(2) + (value * b.sigma / b.value).powi(2)).sqrt();
    UValue::new(value, sigma)
}

/// First-order propagation through an arbitrary function of independent inputs.
///
/// The gradient is taken with central differences, step `max(max(|xᵢ|, σᵢ)·step, 1e-12)`.
/// Inputs with zero sigma are not differentiated.
pub fn propagate<F>(f: F, inputs: &[UValue], step: f64) -> Result<UValue>
where
    F: Fn(&[f64]) -> f64,
{
    let means: Vec<f64> = inputs.iter().map(|v| v.value).collect();
    let center = f(&means);
    if !center.is_finite() {
        return Err(Error::Evaluation(format!(
            "function is not finite at the input means ({center})"
        )));
    }
    let mut x = means.clone();
    let mut var = 0.0;
    for (i, input) in inputs.iter().enumerate() {
        if input.sigma == 0.0 {
            continue;
        }
        let h = (means[i].abs().max(input.sigma) * step).max(STEP_FLOOR);
        x[i] = means[i] + h;
        let up = f(&x);
        x[i] = means[i] - h;
        let down = f(&x);
        x[i] = means[i];
        let slope = (up - down) / (2.0 * h);
        if !slope.is_finite() {
            return Err(Error::Evaluation(format!(
                "non-finite derivative with respect to input {i}"
            )));
        }
        var += (slope * input.sigma).powi(2);
    }
    UValue::new(center, var.sqrt())
}

/// Monte-Carlo propagation: sample mean and sample standard deviation of `f`
/// over independent Gaussian draws of every input.
pub fn mc_propagate<F>(f: F, inputs: &[UValue], n_samples: usize, seed: u64) -> Result<UValue>
where
    F: Fn(&[f64]) -> f64,
{
    if n_samples < MIN_MC_SAMPLES {
        return Err(Error::Configuration(format!(
            "Monte-Carlo needs at least {MIN_MC_SAMPLES} samples, got {n_samples}"
        )));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut x = vec![0.0; inputs.len()];
    // Welford accumulation.
    let mut mean = 0.0;
    let mut m2 = 0.0;
    for k in 0..n_samples {
        for (xi, input) in x.iter_mut().zip(inputs) {
            let z: f64 = StandardNormal.sample(&mut rng);
            *xi = input.value + input.sigma * z;
        }
        let y = f(&x);
        if !y.is_finite() {
            return Err(Error::Evaluation(format!(
                "function is not finite at Monte-Carlo sample {k}"
            )));
        }
        let delta = y - mean;
        mean += delta / (k + 1) as f64;
        m2 += delta * (y - mean);
    }
    UValue::new(mean, (m2 / (n_samples - 1) as f64).sqrt())
}

/// A closed-form function of independent uncertain inputs, kept so that the
/// same formula can go through both first-order and sampling propagation.
pub struct Expression<'a> {
    pub inputs: Vec<UValue>,
    f: Box<dyn Fn(&[f64]) -> f64 + Send + Sync + 'a>,
}

impl<'a> Expression<'a> {
    pub fn new(inputs: Vec<UValue>, f: impl Fn(&[f64]) -> f64 + Send + Sync + 'a) -> Self {
        Self { inputs, f: Box::new(f) }
    }

    pub fn eval(&self, x: &[f64]) -> f64 {
        (self.f)(x)
    }

    pub fn first_order(&self) -> Result<UValue> {
        propagate(&self.f, &self.inputs, DEFAULT_STEP)
    }

    pub fn monte_carlo(&self, n_samples: usize, seed: u64) -> Result<UValue> {
        mc_propagate(&self.f, &self.inputs, n_samples, seed)
    }
}
