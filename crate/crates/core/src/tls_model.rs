//! Power- and temperature-dependent TLS quality factor.
//!
//! ```text
//! Q_TLS(n, T) = Q_TLS,0 · sqrt(1 + n^β2 / (D·T^β1) · tanh(ħω/2k_BT)) / tanh(ħω/2k_BT)
//! 1/Q_int     = 1/Q_TLS(n, T) + 1/Q_other
//! ```
//!
//! Quasiparticle loss is not modelled; points at or above the cutoff
//! temperature are dropped before fitting.

use std::f64::consts::PI;

use nalgebra::DVector;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, StandardNormal};
use serde::{Deserialize, Serialize};

use crate::constants::{HBAR, K_B};
use crate::error::{Error, Result};
use crate::lm::{self, BoxTransform, LmOptions};
use crate::uncert::UValue;

/// Default quasiparticle exclusion temperature, K.
pub const DEFAULT_QP_CUTOFF_K: f64 = 0.120;

/// Parameters of the TLS quality-factor model.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct TlsParams {
    pub q_tls0: UValue,
    /// Saturation scale constant.
    pub d: f64,
    /// Temperature exponent.
    pub beta1: f64,
    /// Photon-number exponent.
    pub beta2: f64,
    pub q_other: f64,
    /// Resonance frequency, Hz.
    pub f0: f64,
}

impl TlsParams {
    pub fn validate(&self) -> Result<()> {
        if self.q_tls0.value() <= 0.0 {
            return Err(Error::invalid("q_tls0 must be positive"));
        }
        if !(self.d > 0.0) || !(self.q_other > 0.0) {
            return Err(Error::invalid("D and q_other must be positive"));
        }
        if !(self.beta2 > 0.0) {
            return Err(Error::invalid("beta2 must be positive"));
        }
        if !self.beta1.is_finite() || !(self.f0 > 0.0) || !self.f0.is_finite() {
            return Err(Error::invalid("beta1 must be finite and f0 positive"));
        }
        Ok(())
    }

    /// Starting point for a fit: D = 1, β1 = β2 = 1, Q_other = 10·max(Q_int),
    /// Q_TLS,0 = min(Q_int).
    pub fn initial_guess(points: &[QPoint], f0: f64) -> Self {
        let max_q = points.iter().map(|p| p.q_int.value()).fold(0.0, f64::max);
        let min_q = points.iter().map(|p| p.q_int.value()).fold(f64::INFINITY, f64::min);
        Self {
            q_tls0: UValue::exact(if min_q.is_finite() { min_q } else { 1e6 }),
            d: 1.0,
            beta1: 1.0,
            beta2: 1.0,
            q_other: 10.0 * max_q.max(1.0),
            f0,
        }
    }
}

/// One (n̄, T, Q_int) measurement.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct QPoint {
    pub n_bar: f64,
    /// Kelvin.
    pub temperature: f64,
    pub q_int: UValue,
}

impl QPoint {
    pub fn validate(&self) -> Result<()> {
        if !(self.temperature > 0.0) || !(self.n_bar >= 0.0) || !(self.q_int.value() > 0.0) {
            return Err(Error::invalid(format!(
                "invalid Q point (n̄ = {}, T = {}, Q = {})",
                self.n_bar,
                self.temperature,
                self.q_int.value()
            )));
        }
        Ok(())
    }
}

/// tanh(ħω / 2k_BT) with ω = 2πf0.
pub fn thermal_factor(f0: f64, temperature: f64) -> Result<f64> {
    if !(temperature > 0.0) {
        return Err(Error::invalid(format!(
            "temperature must be positive, got {temperature}"
        )));
    }
    Ok((HBAR * 2.0 * PI * f0 / (2.0 * K_B * temperature)).tanh())
}

fn q_tls_raw(q0: f64, d: f64, beta1: f64, beta2: f64, f0: f64, n_bar: f64, temperature: f64) -> f64 {
    let th = (HBAR * 2.0 * PI * f0 / (2.0 * K_B * temperature)).tanh();
    let saturation = n_bar.powf(beta2) / (d * temperature.powf(beta1));
    q0 * (1.0 + saturation * th).sqrt() / th
}

/// Q_TLS at photon number `n_bar` and temperature `temperature` (K).
pub fn q_tls(n_bar: f64, temperature: f64, params: &TlsParams) -> Result<f64> {
    if !(n_bar >= 0.0) {
        return Err(Error::invalid(format!("n̄ must be non-negative, got {n_bar}")));
    }
    thermal_factor(params.f0, temperature)?;
    Ok(q_tls_raw(
        params.q_tls0.value(),
        params.d,
        params.beta1,
        params.beta2,
        params.f0,
        n_bar,
        temperature,
    ))
}

/// Internal quality factor including the constant Q_other channel.
pub fn q_int(n_bar: f64, temperature: f64, params: &TlsParams) -> Result<f64> {
    let q = q_tls(n_bar, temperature, params)?;
    Ok(1.0 / (1.0 / q + 1.0 / params.q_other))
}

/// Q_TLS at the requested operating point, sigma scaled from Q_TLS,0.
pub fn rescale_q_tls0(params: &TlsParams, n_bar: f64, temperature: f64) -> Result<UValue> {
    params.validate()?;
    let q = q_tls(n_bar, temperature, params)?;
    let factor = q / params.q_tls0.value();
    UValue::new(q, params.q_tls0.sigma() * factor)
}

/// Mean intracavity photon number from input-line power.
///
/// `n̄ = 2·Q_l²·P / (Q_c·ħ·ω²)` with `1/Q_l = 1/Q_int + 1/Q_c`.
pub fn photon_number(power_dbm: f64, f0: f64, q_int: f64, q_c: f64) -> Result<f64> {
    if !(q_int > 0.0) || !(q_c > 0.0) || !(f0 > 0.0) {
        return Err(Error::invalid("photon number needs positive f0, Q_int and Q_c"));
    }
    let power_w = 1e-3 * 10f64.powf(power_dbm / 10.0);
    let omega = 2.0 * PI * f0;
    let q_l = 1.0 / (1.0 / q_int + 1.0 / q_c);
    Ok(2.0 * q_l * q_l * power_w / (q_c * HBAR * omega * omega))
}

/// Box bounds on the fitted parameters, natural units.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct TlsBounds {
    pub q_tls0: (f64, f64),
    pub d: (f64, f64),
    pub beta1: (f64, f64),
    pub beta2: (f64, f64),
    pub q_other: (f64, f64),
}

impl Default for TlsBounds {
    fn default() -> Self {
        Self {
            q_tls0: (1e2, 1e10),
            d: (1e-8, 1e12),
            beta1: (0.0, 5.0),
            beta2: (1e-3, 3.0),
            q_other: (1e2, 1e12),
        }
    }
}

impl TlsBounds {
    pub fn validate(&self) -> Result<()> {
        let pairs = [
            ("q_tls0", self.q_tls0, true),
            ("d", self.d, true),
            ("beta1", self.beta1, false),
            ("beta2", self.beta2, false),
            ("q_other", self.q_other, true),
        ];
        for (name, (lo, hi), positive) in pairs {
            if !(lo < hi) || !lo.is_finite() || !hi.is_finite() || (positive && lo <= 0.0) {
                return Err(Error::invalid(format!("bad bounds for {name}: [{lo}, {hi}]")));
            }
        }
        Ok(())
    }

    // q_tls0, D and q_other live in log space.
    fn transforms(&self) -> [BoxTransform; 5] {
        [
            BoxTransform::new(self.q_tls0.0.ln(), self.q_tls0.1.ln()),
            BoxTransform::new(self.d.0.ln(), self.d.1.ln()),
            BoxTransform::new(self.beta1.0, self.beta1.1),
            BoxTransform::new(self.beta2.0, self.beta2.1),
            BoxTransform::new(self.q_other.0.ln(), self.q_other.1.ln()),
        ]
    }
}

const PARAM_NAMES: [&str; 5] = ["q_tls0", "d", "beta1", "beta2", "q_other"];
const LOG_SCALED: [bool; 5] = [true, true, false, false, true];

fn to_free(p: [f64; 5], tr: &[BoxTransform; 5]) -> DVector<f64> {
    DVector::from_iterator(
        5,
        (0..5).map(|i| tr[i].to_free(if LOG_SCALED[i] { p[i].ln() } else { p[i] })),
    )
}

fn to_natural(u: &DVector<f64>, tr: &[BoxTransform; 5]) -> [f64; 5] {
    let mut out = [0.0; 5];
    for i in 0..5 {
        let x = tr[i].to_bounded(u[i]);
        out[i] = if LOG_SCALED[i] { x.exp() } else { x };
    }
    out
}

/// Result of a TLS fit.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TlsFit {
    pub params: TlsParams,
    /// Covariance of (q_tls0, D, β1, β2, q_other), natural units.
    pub covariance: Vec<Vec<f64>>,
    pub chi2: f64,
    pub dof: usize,
    pub retained: usize,
    pub excluded: usize,
    pub iterations: usize,
    /// Names of parameters that finished on a bound.
    pub boundary_active: Vec<String>,
}

/// Fit the TLS model to Q_int data by weighted least squares on 1/Q.
///
/// Points with `temperature >= qp_cutoff_temperature` are excluded. The fit
/// is started from `init` and from a fixed grid of (D, β2) seeds; the lowest
/// chi² wins.
pub fn fit_tls(
    points: &[QPoint],
    f0: f64,
    init: &TlsParams,
    bounds: &TlsBounds,
    qp_cutoff_temperature: f64,
) -> Result<TlsFit> {
    bounds.validate()?;
    for p in points {
        p.validate()?;
    }
    let retained: Vec<&QPoint> = points
        .iter()
        .filter(|p| p.temperature < qp_cutoff_temperature)
        .collect();
    if retained.len() < 5 {
        return Err(Error::dataset(format!(
            "TLS fit needs at least 5 points below {qp_cutoff_temperature} K, found {}",
            retained.len()
        )));
    }
    let (lo_n, hi_n) = retained
        .iter()
        .filter(|p| p.n_bar > 0.0)
        .fold((f64::INFINITY, 0.0f64), |(lo, hi), p| (lo.min(p.n_bar), hi.max(p.n_bar)));
    if !(hi_n / lo_n >= 100.0) {
        return Err(Error::dataset(
            "TLS fit needs retained points spanning at least two decades in n̄",
        ));
    }
    if retained.iter().any(|p| p.q_int.sigma() <= 0.0) {
        return Err(Error::dataset("every Q_int needs a positive sigma"));
    }

    // Weighted residuals on 1/Q.
    let data: Vec<(f64, f64, f64, f64)> = retained
        .iter()
        .map(|p| {
            let q = p.q_int.value();
            (p.n_bar, p.temperature, 1.0 / q, p.q_int.sigma() / (q * q))
        })
        .collect();
    let model_residuals = |x: &[f64; 5]| -> Option<DVector<f64>> {
        let r = DVector::from_iterator(
            data.len(),
            data.iter().map(|&(n, t, inv_q, sigma)| {
                let q = q_tls_raw(x[0], x[1], x[2], x[3], f0, n, t);
                (1.0 / q + 1.0 / x[4] - inv_q) / sigma
            }),
        );
        r.iter().all(|v| v.is_finite()).then_some(r)
    };

    let tr = bounds.transforms();
    let clamp = |v: f64, (lo, hi): (f64, f64)| v.clamp(lo, hi);
    let base = [
        clamp(init.q_tls0.value(), bounds.q_tls0),
        clamp(init.d, bounds.d),
        clamp(init.beta1, bounds.beta1),
        clamp(init.beta2, bounds.beta2),
        clamp(init.q_other, bounds.q_other),
    ];
    let mut starts = vec![base];
    for d in [1e-2, 1.0, 1e2, 1e4, 1e6] {
        for beta2 in [0.2, 0.5, 1.0] {
            starts.push([
                base[0],
                clamp(d, bounds.d),
                base[2],
                clamp(beta2, bounds.beta2),
                base[4],
            ]);
        }
    }

    let opts = LmOptions::default();
    let mut best: Option<lm::LmReport> = None;
    let mut first_err = None;
    for start in starts {
        let u0 = to_free(start, &tr);
        match lm::minimize(|u| model_residuals(&to_natural(u, &tr)), u0, &opts) {
            Ok(rep) => {
                if best.as_ref().map_or(true, |b| rep.chi2 < b.chi2) {
                    best = Some(rep);
                }
            }
            Err(e) => {
                first_err.get_or_insert(e);
            }
        }
    }
    let best = match best {
        Some(b) => b,
        None => return Err(first_err.expect("at least one start was attempted")),
    };

    let x = to_natural(&best.params, &tr);
    // Covariance in natural units from a relative-step Jacobian.
    let x_vec = DVector::from_row_slice(&x);
    let scaled = |s: &DVector<f64>| {
        let mut p = [0.0; 5];
        for i in 0..5 {
            p[i] = x[i] * (1.0 + s[i]);
        }
        model_residuals(&p)
    };
    let jac_rel = lm::jacobian(&scaled, &DVector::zeros(5), 1e-6)
        .ok_or_else(|| Error::Evaluation("TLS Jacobian not finite at the optimum".into()))?;
    let cov_rel = lm::covariance(&jac_rel);
    let covariance: Vec<Vec<f64>> = (0..5)
        .map(|i| (0..5).map(|j| cov_rel[(i, j)] * x_vec[i] * x_vec[j]).collect())
        .collect();

    let boundary_active = (0..5)
        .filter(|&i| {
            let v = if LOG_SCALED[i] { x[i].ln() } else { x[i] };
            tr[i].at_bound(v, 1e-6)
        })
        .map(|i| PARAM_NAMES[i].to_string())
        .collect();

    let q_sigma = covariance[0][0].max(0.0).sqrt();
    let params = TlsParams {
        q_tls0: UValue::new(x[0], if q_sigma.is_finite() { q_sigma } else { 0.0 })?,
        d: x[1],
        beta1: x[2],
        beta2: x[3],
        q_other: x[4],
        f0,
    };
    Ok(TlsFit {
        params,
        covariance,
        chi2: best.chi2,
        dof: data.len().saturating_sub(5),
        retained: data.len(),
        excluded: points.len() - data.len(),
        iterations: best.iterations,
        boundary_active,
    })
}

/// Synthetic Q_int grid with relative Gaussian noise on 1/Q. Sigmas are set
/// to the injected noise level (with a 1e-6 floor for noiseless data).
pub fn synthesize_qgrid(
    params: &TlsParams,
    n_bars: &[f64],
    temperatures: &[f64],
    noise_rel: f64,
    seed: u64,
) -> Result<Vec<QPoint>> {
    params.validate()?;
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let rel = noise_rel.max(1e-6);
    let mut out = Vec::with_capacity(n_bars.len() * temperatures.len());
    for &t in temperatures {
        for &n in n_bars {
            let inv = 1.0 / q_int(n, t, params)?;
            let z: f64 = StandardNormal.sample(&mut rng);
            let inv_noisy = inv * (1.0 + noise_rel * z);
            let q = 1.0 / inv_noisy;
            out.push(QPoint { n_bar: n, temperature: t, q_int: UValue::new(q, rel * q)? });
        }
    }
    Ok(out)
}
