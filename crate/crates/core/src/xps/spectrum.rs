use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Minimum number of samples accepted for a spectrum.
pub const MIN_SAMPLES: usize = 16;

/// Half-width of the search window around a calibration reference, eV.
pub const CALIBRATION_WINDOW_EV: f64 = 2.0;

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct SpectrumMetadata {
    pub source: Option<String>,
    /// Median energy step, eV.
    pub step: f64,
    pub scans: Option<u32>,
    /// Shift applied by [`calibrate_energy`], eV.
    pub energy_shift: f64,
    pub calibration_reference: Option<String>,
    /// Divisor applied by [`XpsSpectrum::normalized_by_area`].
    pub normalization: Option<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct XpsSpectrum {
    binding_energy: Vec<f64>,
    intensity: Vec<f64>,
    pub metadata: SpectrumMetadata,
}

impl XpsSpectrum {
    pub fn new(binding_energy: Vec<f64>, intensity: Vec<f64>) -> Result<Self> {
        if binding_energy.len() != intensity.len() {
            return Err(Error::dataset(format!(
                "spectrum has {} energies but {} intensities",
                binding_energy.len(),
                intensity.len()
            )));
        }
        if binding_energy.len() < MIN_SAMPLES {
            return Err(Error::dataset(format!(
                "spectrum needs at least {MIN_SAMPLES} samples, got {}",
                binding_energy.len()
            )));
        }
        if binding_energy.iter().any(|e| !e.is_finite()) {
            return Err(Error::dataset("non-finite binding energy"));
        }
        if let Some(i) = binding_energy.windows(2).position(|w| w[1] <= w[0]) {
            return Err(Error::dataset(format!(
                "binding energy not strictly ascending at sample {}",
                i + 1
            )));
        }
        if let Some(i) = intensity.iter().position(|v| !v.is_finite() || *v < 0.0) {
            return Err(Error::dataset(format!("invalid intensity {} at sample {i}", intensity[i])));
        }
        let mut steps: Vec<f64> = binding_energy.windows(2).map(|w| w[1] - w[0]).collect();
        steps.sort_by(f64::total_cmp);
        let step = steps[steps.len() / 2];
        Ok(Self {
            binding_energy,
            intensity,
            metadata: SpectrumMetadata { step, ..SpectrumMetadata::default() },
        })
    }

    pub fn binding_energy(&self) -> &[f64] {
        &self.binding_energy
    }

    pub fn intensity(&self) -> &[f64] {
        &self.intensity
    }

    pub fn len(&self) -> usize {
        self.binding_energy.len()
    }

    pub fn is_empty(&self) -> bool {
        self.binding_energy.is_empty()
    }

    /// Index range `[start, end]` (inclusive) of samples inside `[lo, hi]`.
    pub fn window(&self, lo: f64, hi: f64) -> Result<(usize, usize)> {
        let e = &self.binding_energy;
        if !(lo < hi) {
            return Err(Error::invalid(format!("empty energy window [{lo}, {hi}]")));
        }
        let tol = 1e-9 * self.metadata.step.max(1e-12);
        if lo < e[0] - tol || hi > e[e.len() - 1] + tol {
            return Err(Error::invalid(format!(
                "window [{lo}, {hi}] eV outside the scan [{}, {}] eV",
                e[0],
                e[e.len() - 1]
            )));
        }
        let start = e.partition_point(|&x| x < lo - tol);
        let end = e.partition_point(|&x| x <= hi + tol) - 1;
        if end < start + 2 {
            return Err(Error::invalid(format!("window [{lo}, {hi}] eV holds fewer than 3 samples")));
        }
        Ok((start, end))
    }

    /// Trapezoidal integral of the intensity over `[lo, hi]`.
    pub fn integrated_intensity(&self, lo: f64, hi: f64) -> Result<f64> {
        let (a, b) = self.window(lo, hi)?;
        Ok(trapezoid(&self.binding_energy[a..=b], &self.intensity[a..=b]))
    }

    /// Copy with the intensity divided by its integral over `[lo, hi]`.
    pub fn normalized_by_area(&self, lo: f64, hi: f64) -> Result<Self> {
        let area = self.integrated_intensity(lo, hi)?;
        if area <= 0.0 {
            return Err(Error::DivisionByZero("spectrum has zero integrated intensity".into()));
        }
        let mut out = self.clone();
        out.intensity.iter_mut().for_each(|v| *v /= area);
        out.metadata.normalization = Some(area);
        Ok(out)
    }

    /// Copy with every binding energy moved by `shift` eV.
    pub fn shifted(&self, shift: f64) -> Self {
        let mut out = self.clone();
        if shift != 0.0 {
            out.binding_energy.iter_mut().for_each(|e| *e += shift);
        }
        out.metadata.energy_shift += shift;
        out
    }
}

pub(crate) fn trapezoid(x: &[f64], y: &[f64]) -> f64 {
    x.windows(2).zip(y.windows(2)).map(|(x, y)| 0.5 * (x[1] - x[0]) * (y[0] + y[1])).sum()
}

/// Locate the reference peak near `reference_energy` and shift the energy
/// axis so its maximum lands there. The maximum is refined by a parabola
/// through the highest sample and its neighbours.
pub fn calibrate_energy(spectrum: &XpsSpectrum, reference_label: &str, reference_energy: f64) -> Result<XpsSpectrum> {
    let e = spectrum.binding_energy();
    let y = spectrum.intensity();
    let lo = e.partition_point(|&x| x < reference_energy - CALIBRATION_WINDOW_EV);
    let hi = e.partition_point(|&x| x <= reference_energy + CALIBRATION_WINDOW_EV);
    let not_found = || {
        Error::Calibration(format!(
            "no {reference_label} peak within ±{CALIBRATION_WINDOW_EV} eV of {reference_energy} eV"
        ))
    };
    if hi < lo + 3 {
        return Err(not_found());
    }
    let i = (lo..hi).fold(lo, |best, k| if y[k] > y[best] { k } else { best });
    if i == 0 || i + 1 >= e.len() || !(y[i] > y[i - 1]) || y[i] < y[i + 1] {
        return Err(not_found());
    }

    let (y0, y1, y2) = (y[i - 1], y[i], y[i + 1]);
    let (h0, h1) = (e[i] - e[i - 1], e[i + 1] - e[i]);
    // Vertex of the parabola through three (possibly unevenly spaced) points.
    let d0 = (y1 - y0) / h0;
    let d1 = (y2 - y1) / h1;
    let curvature = (d1 - d0) / (h0 + h1);
    let mut peak = e[i];
    if curvature < 0.0 {
        let offset = -(d0 * h1 + d1 * h0) / (h0 + h1) / (2.0 * curvature);
        if offset.abs() <= h0.max(h1) {
            peak += offset;
        }
    }

    let mut shift = reference_energy - peak;
    if shift.abs() < 1e-6 * spectrum.metadata.step {
        shift = 0.0;
    }
    let mut out = spectrum.shifted(shift);
    out.metadata.calibration_reference = Some(format!("{reference_label}@{reference_energy}"));
    Ok(out)
}
