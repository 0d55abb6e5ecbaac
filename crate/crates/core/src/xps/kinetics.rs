//! Two-regime oxide growth: linear in time up to a breakpoint, logarithmic
//! afterwards, continuous at the join.

use nalgebra::{Matrix2, Vector2};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::uncert::UValue;

pub const MIN_KINETICS_POINTS: usize = 6;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct KineticsFit {
    /// nm/hour.
    pub k_lin: UValue,
    /// hours.
    pub t_break: f64,
    /// Intercept of d = log_a + log_b·ln t; `None` when no log regime was fitted.
    pub log_a: Option<UValue>,
    pub log_b: Option<UValue>,
    /// Model thickness at the latest measured time, nm.
    pub d_sat: UValue,
    pub chi2: f64,
    /// True when the best breakpoint is the last sample.
    pub log_degenerate: bool,
}

impl KineticsFit {
    pub fn evaluate(&self, t: f64) -> f64 {
        let k = self.k_lin.value();
        match self.log_b {
            Some(b) if t > self.t_break => k * self.t_break + b.value() * (t / self.t_break).ln(),
            _ => k * t,
        }
    }

    /// |left − right| of the two branches at the breakpoint.
    pub fn continuity_gap(&self) -> f64 {
        match (self.log_a, self.log_b) {
            (Some(a), Some(b)) => {
                (self.k_lin.value() * self.t_break - (a.value() + b.value() * self.t_break.ln())).abs()
            }
            _ => 0.0,
        }
    }
}

struct Candidate {
    params: Vector2<f64>,
    cov: Matrix2<f64>,
    chi2: f64,
    t_break: f64,
    log_rows: usize,
}

/// Fit the piecewise model with the breakpoint searched over measured times.
/// Sigmas weight the fit; all-zero sigmas give an unweighted fit whose
/// covariance is scaled by the reduced chi².
pub fn fit_kinetics(times: &[f64], thicknesses: &[UValue]) -> Result<KineticsFit> {
    if times.len() != thicknesses.len() {
        return Err(Error::dataset("times and thicknesses differ in length"));
    }
    if times.len() < MIN_KINETICS_POINTS {
        return Err(Error::dataset(format!(
            "kinetics needs at least {MIN_KINETICS_POINTS} points, got {}",
            times.len()
        )));
    }
    if times.iter().any(|t| !(t.is_finite() && *t >= 0.0)) {
        return Err(Error::dataset("times must be finite and non-negative"));
    }
    let all_exact = thicknesses.iter().all(|d| d.sigma() == 0.0);
    if !all_exact && thicknesses.iter().any(|d| d.sigma() == 0.0) {
        return Err(Error::dataset("thickness sigmas must be all positive or all zero"));
    }
    let mut data: Vec<(f64, f64, f64)> = times
        .iter()
        .zip(thicknesses)
        .map(|(&t, d)| (t, d.value(), if all_exact { 1.0 } else { d.sigma().powi(-2) }))
        .collect();
    data.sort_by(|a, b| a.0.total_cmp(&b.0));

    let mut best: Option<Candidate> = None;
    for (i, &(tb, _, _)) in data.iter().enumerate() {
        let linear_rows = i + 1;
        let log_rows = data.len() - linear_rows;
        if tb <= 0.0 || linear_rows < 2 || log_rows == 1 {
            continue;
        }
        if let Some(c) = solve_candidate(&data, tb, log_rows) {
            if c.params[0] > 0.0 && best.as_ref().map_or(true, |b| c.chi2 < b.chi2) {
                best = Some(c);
            }
        }
    }
    let c = best.ok_or_else(|| Error::dataset("no breakpoint gives a positive linear rate"))?;

    let dof = data.len().saturating_sub(if c.log_rows == 0 { 1 } else { 2 }).max(1);
    let cov = if all_exact { c.cov * (c.chi2 / dof as f64) } else { c.cov };
    let (k, b) = (c.params[0], c.params[1]);
    let tb = c.t_break;
    let t_last = data[data.len() - 1].0;
    let k_lin = UValue::new(k, cov[(0, 0)].max(0.0).sqrt())?;
    if c.log_rows == 0 {
        return Ok(KineticsFit {
            k_lin,
            t_break: tb,
            log_a: None,
            log_b: None,
            d_sat: k_lin.scale(t_last)?,
            chi2: c.chi2,
            log_degenerate: true,
        });
    }
    // log_a = k·tb − b·ln tb; d(t_last) = k·tb + b·ln(t_last/tb).
    let ga = Vector2::new(tb, -tb.ln());
    let gd = Vector2::new(tb, (t_last / tb).ln());
    let var = |g: &Vector2<f64>| (g.transpose() * cov * g)[(0, 0)].max(0.0).sqrt();
    Ok(KineticsFit {
        k_lin,
        t_break: tb,
        log_a: Some(UValue::new(k * tb - b * tb.ln(), var(&ga))?),
        log_b: Some(UValue::new(b, cov[(1, 1)].max(0.0).sqrt())?),
        d_sat: UValue::new(k * tb + b * (t_last / tb).ln(), var(&gd))?,
        chi2: c.chi2,
        log_degenerate: false,
    })
}

fn solve_candidate(data: &[(f64, f64, f64)], tb: f64, log_rows: usize) -> Option<Candidate> {
    let row = |t: f64| if t <= tb { Vector2::new(t, 0.0) } else { Vector2::new(tb, (t / tb).ln()) };
    let mut normal = Matrix2::zeros();
    let mut rhs = Vector2::zeros();
    for &(t, d, w) in data {
        let a = row(t);
        normal += w * a * a.transpose();
        rhs += w * d * a;
    }
    let (params, cov) = if log_rows == 0 {
        if normal[(0, 0)] <= 0.0 {
            return None;
        }
        let k = rhs[0] / normal[(0, 0)];
        let mut cov = Matrix2::zeros();
        cov[(0, 0)] = 1.0 / normal[(0, 0)];
        (Vector2::new(k, 0.0), cov)
    } else {
        let cov = normal.try_inverse()?;
        (cov * rhs, cov)
    };
    let chi2 = data.iter().map(|&(t, d, w)| w * (d - row(t).dot(&params)).powi(2)).sum();
    Some(Candidate { params, cov, chi2, t_break: tb, log_rows })
}
