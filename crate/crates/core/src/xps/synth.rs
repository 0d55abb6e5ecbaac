use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, StandardNormal};
use serde::{Deserialize, Serialize};

use super::components::PeakComponent;
use super::shirley::shirley_from_signal;
use super::spectrum::XpsSpectrum;
use crate::error::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum BackgroundKind {
    Flat { level: f64 },
    Linear { low: f64, high: f64 },
    /// Shirley step consistent with the component signal.
    Shirley { low: f64, high: f64 },
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum Noise {
    /// Same sigma at every sample, in counts.
    Absolute { sigma: f64 },
    /// Sigma proportional to the noiseless intensity.
    Relative { fraction: f64 },
}

impl Noise {
    pub const NONE: Noise = Noise::Absolute { sigma: 0.0 };

    fn sigma(&self, level: f64) -> f64 {
        match *self {
            Noise::Absolute { sigma } => sigma,
            Noise::Relative { fraction } => fraction * level.abs(),
        }
    }

    fn validate(&self) -> Result<()> {
        let v = match *self {
            Noise::Absolute { sigma } => sigma,
            Noise::Relative { fraction } => fraction,
        };
        if !(v >= 0.0) || !v.is_finite() {
            return Err(Error::invalid("noise level must be finite and non-negative"));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct EnergyGrid {
    pub lo: f64,
    pub hi: f64,
    pub step: f64,
}

impl EnergyGrid {
    pub fn points(&self) -> Result<Vec<f64>> {
        if !(self.step > 0.0 && self.hi > self.lo) {
            return Err(Error::invalid("energy grid needs hi > lo and a positive step"));
        }
        let n = ((self.hi - self.lo) / self.step + 1e-9).floor() as usize + 1;
        Ok((0..n).map(|i| self.lo + i as f64 * self.step).collect())
    }
}

/// Component sum plus background plus seeded Gaussian noise. Intensities are
/// clipped at zero.
pub fn synthesize_spectrum(
    components: &[PeakComponent],
    background: BackgroundKind,
    grid: EnergyGrid,
    noise: Noise,
    seed: u64,
) -> Result<XpsSpectrum> {
    for c in components {
        c.validate()?;
    }
    noise.validate()?;
    let x = grid.points()?;
    let signal: Vec<f64> = x.iter().map(|&e| components.iter().map(|c| c.evaluate(e)).sum()).collect();
    let bg = match background {
        BackgroundKind::Flat { level } => vec![level; x.len()],
        BackgroundKind::Linear { low, high } => {
            let span = x[x.len() - 1] - x[0];
            x.iter().map(|e| low + (high - low) * (e - x[0]) / span).collect()
        }
        BackgroundKind::Shirley { low, high } => shirley_from_signal(&x, &signal, low, high),
    };
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let y = signal
        .iter()
        .zip(&bg)
        .map(|(s, b)| {
            let z: f64 = StandardNormal.sample(&mut rng);
            let clean = s + b;
            (clean + noise.sigma(clean) * z).max(0.0)
        })
        .collect();
    let mut spectrum = XpsSpectrum::new(x, y)?;
    spectrum.metadata.source = Some(format!("synthetic seed {seed}"));
    Ok(spectrum)
}
