use serde::{Deserialize, Serialize};

use super::spectrum::XpsSpectrum;
use crate::error::{Error, Result};

pub const DEFAULT_MAX_ITERATIONS: usize = 50;
/// Default tolerance as a fraction of the endpoint intensity span.
pub const DEFAULT_RELATIVE_TOLERANCE: f64 = 1e-6;
/// Samples averaged at each end of the window to fix the anchors.
pub const ENDPOINT_SAMPLES: usize = 3;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ShirleyBackground {
    /// First sample index of the window.
    pub start: usize,
    /// Last sample index of the window (inclusive).
    pub end: usize,
    pub values: Vec<f64>,
    pub low_anchor: f64,
    pub high_anchor: f64,
    pub iterations: usize,
    /// Largest pointwise change in the last iteration.
    pub residual: f64,
}

impl ShirleyBackground {
    /// Wrap a known background over the samples inside `[lo, hi]`.
    pub fn from_values(spectrum: &XpsSpectrum, lo: f64, hi: f64, values: Vec<f64>) -> Result<Self> {
        let (start, end) = spectrum.window(lo, hi)?;
        if values.len() != end + 1 - start {
            return Err(Error::invalid(format!(
                "background has {} values for a {}-sample window",
                values.len(),
                end + 1 - start
            )));
        }
        Ok(Self {
            start,
            end,
            low_anchor: values[0],
            high_anchor: values[values.len() - 1],
            values,
            iterations: 0,
            residual: 0.0,
        })
    }

    /// Background at absolute sample index `i`, if inside the window.
    pub fn at(&self, i: usize) -> Option<f64> {
        (self.start..=self.end).contains(&i).then(|| self.values[i - self.start])
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ShirleyOptions {
    /// Absolute tolerance; `None` means 1e-6 of the endpoint span.
    pub tolerance: Option<f64>,
    pub max_iterations: usize,
}

impl Default for ShirleyOptions {
    fn default() -> Self {
        Self { tolerance: None, max_iterations: DEFAULT_MAX_ITERATIONS }
    }
}

/// Cumulative trapezoid integral starting at zero.
fn cumulative(x: &[f64], y: &[f64]) -> Vec<f64> {
    let mut acc = 0.0;
    let mut out = Vec::with_capacity(x.len());
    out.push(0.0);
    for i in 1..x.len() {
        acc += 0.5 * (x[i] - x[i - 1]) * (y[i] + y[i - 1]);
        out.push(acc);
    }
    out
}

/// Shirley background over `[lo, hi]` eV. The low-binding-energy end is the
/// high-kinetic-energy side, so the background rises with the signal
/// integrated from `lo` upward.
pub fn shirley_background(spectrum: &XpsSpectrum, lo: f64, hi: f64, opts: &ShirleyOptions) -> Result<ShirleyBackground> {
    let (start, end) = spectrum.window(lo, hi)?;
    if end + 1 - start < 2 * ENDPOINT_SAMPLES {
        return Err(Error::invalid("Shirley window too narrow for endpoint averaging"));
    }
    if opts.max_iterations == 0 {
        return Err(Error::Configuration("max_iterations must be at least 1".into()));
    }
    let x = &spectrum.binding_energy()[start..=end];
    let y = &spectrum.intensity()[start..=end];
    let n = x.len();
    let low = y[..ENDPOINT_SAMPLES].iter().sum::<f64>() / ENDPOINT_SAMPLES as f64;
    let high = y[n - ENDPOINT_SAMPLES..].iter().sum::<f64>() / ENDPOINT_SAMPLES as f64;
    let span = high - low;
    let tolerance = opts.tolerance.unwrap_or(DEFAULT_RELATIVE_TOLERANCE * span.abs());

    let mut background = vec![low; n];
    let mut above = vec![0.0; n];
    for iteration in 1..=opts.max_iterations {
        for i in 0..n {
            above[i] = y[i] - background[i];
        }
        let area = cumulative(x, &above);
        let total = area[n - 1];
        let next: Vec<f64> = if span == 0.0 || total == 0.0 {
            vec![low; n]
        } else {
            area.iter().map(|a| low + span * a / total).collect()
        };
        let change = next.iter().zip(&background).map(|(a, b)| (a - b).abs()).fold(0.0, f64::max);
        background = next;
        if change <= tolerance {
            return Ok(ShirleyBackground {
                start,
                end,
                values: background,
                low_anchor: low,
                high_anchor: high,
                iterations: iteration,
                residual: change,
            });
        }
    }
    let residual = {
        for i in 0..n {
            above[i] = y[i] - background[i];
        }
        let area = cumulative(x, &above);
        let total = area[n - 1];
        area.iter()
            .zip(&background)
            .map(|(a, b)| (low + span * a / total - b).abs())
            .fold(0.0, f64::max)
    };
    Err(Error::Convergence {
        message: "Shirley background did not converge".into(),
        iterations: opts.max_iterations,
        residual,
    })
}

/// Forward Shirley construction: the background implied by a known peak
/// signal with anchors `low` and `high`.
pub fn shirley_from_signal(x: &[f64], signal: &[f64], low: f64, high: f64) -> Vec<f64> {
    let area = cumulative(x, signal);
    let total = area[area.len() - 1];
    if total == 0.0 {
        return vec![low; x.len()];
    }
    area.iter().map(|a| low + (high - low) * a / total).collect()
}

#[cfg(test)]
mod tests {
    use super::*;

    fn grid() -> Vec<f64> {
        (0..201).map(|i| 70.0 + i as f64 * 0.05).collect()
    }

    #[test]
    fn flat_is_flat() {
        let s = XpsSpectrum::new(grid(), vec![42.0; 201]).unwrap();
        let b = shirley_background(&s, 70.0, 80.0, &ShirleyOptions::default()).unwrap();
        assert_eq!(b.iterations, 1);
        assert!(b.values.iter().all(|&v| v == 42.0));
    }

    #[test]
    fn pure_step_converges_onto_the_spectrum() {
        // A step carries no peak above the background; the fixed point is
        // the step itself, reached slowly and only up to the samples right
        // after the discontinuity.
        let x = grid();
        let y: Vec<f64> = x.iter().map(|&e| if e < 75.0 { 100.0 } else { 200.0 }).collect();
        let s = XpsSpectrum::new(x.clone(), y.clone()).unwrap();
        assert!(matches!(
            shirley_background(&s, 70.0, 80.0, &ShirleyOptions::default()),
            Err(Error::Convergence { .. })
        ));
        let opts = ShirleyOptions { max_iterations: 2000, ..ShirleyOptions::default() };
        let b = shirley_background(&s, 70.0, 80.0, &opts).unwrap();
        let jump = x.iter().position(|&e| e >= 75.0).unwrap();
        let tol = 1e-6 * 100.0;
        for i in (0..x.len()).filter(|i| !(jump..jump + 8).contains(i)) {
            assert!((b.values[i] - y[i]).abs() <= tol, "sample {i}: {} vs {}", b.values[i], y[i]);
        }
        assert!(b.values.iter().all(|&v| (100.0 - 1e-9..=200.0 + 1e-9).contains(&v)));
    }

    #[test]
    fn self_consistent_gaussian() {
        let x = grid();
        let peak: Vec<f64> = x.iter().map(|e| 500.0 * (-((e - 74.0) / 0.6).powi(2)).exp()).collect();
        let bg = shirley_from_signal(&x, &peak, 50.0, 120.0);
        let y: Vec<f64> = bg.iter().zip(&peak).map(|(b, p)| b + p).collect();
        let s = XpsSpectrum::new(x, y).unwrap();
        let b = shirley_background(&s, 70.0, 80.0, &ShirleyOptions::default()).unwrap();
        for (got, want) in b.values.iter().zip(&bg) {
            assert!((got / want - 1.0).abs() < 5e-3);
        }
        assert!((b.values[0] - b.low_anchor).abs() <= 1e-6 * 70.0);
        assert!((b.values[b.values.len() - 1] - b.high_anchor).abs() <= 1e-6 * 70.0);
    }
}
