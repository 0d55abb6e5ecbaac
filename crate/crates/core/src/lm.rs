//! Levenberg–Marquardt minimisation of a sum of squared residuals.
//!
//! Jacobians are taken by central differences. Callers that need bounds
//! map their parameters through a transform before handing them here.

use nalgebra::{DMatrix, DVector};

use crate::error::{Error, Result};

#[derive(Debug, Clone, Copy)]
pub struct LmOptions {
    pub max_iterations: usize,
    /// Relative decrease of chi² below which the fit is considered converged.
    pub ftol: f64,
    /// Relative step size below which the fit is considered converged.
    pub xtol: f64,
    /// Infinity norm of the scaled gradient below which the fit is converged.
    pub gtol: f64,
    pub initial_lambda: f64,
    /// Relative finite-difference step.
    pub fd_step: f64,
}

impl Default for LmOptions {
    fn default() -> Self {
        Self {
            max_iterations: 500,
            ftol: 1e-15,
            xtol: 1e-13,
            gtol: 1e-14,
            initial_lambda: 1e-3,
            fd_step: 1e-6,
        }
    }
}

#[derive(Debug, Clone)]
pub struct LmReport {
    pub params: DVector<f64>,
    pub residuals: DVector<f64>,
    pub chi2: f64,
    pub iterations: usize,
}

/// Central-difference Jacobian of `f` at `x`.
pub fn jacobian<F>(f: &F, x: &DVector<f64>, step: f64) -> Option<DMatrix<f64>>
where
    F: Fn(&DVector<f64>) -> Option<DVector<f64>>,
{
    let mut xp = x.clone();
    let mut columns = Vec::with_capacity(x.len());
    for j in 0..x.len() {
        let h = step * x[j].abs().max(1.0);
        xp[j] = x[j] + h;
        let up = f(&xp)?;
        xp[j] = x[j] - h;
        let down = f(&xp)?;
        xp[j] = x[j];
        columns.push((up - down) / (2.0 * h));
    }
    let m = columns.first().map_or(0, |c| c.len());
    let mut jac = DMatrix::zeros(m, x.len());
    for (j, col) in columns.into_iter().enumerate() {
        jac.set_column(j, &col);
    }
    if jac.iter().all(|v| v.is_finite()) {
        Some(jac)
    } else {
        None
    }
}

/// Minimise `Σ rᵢ(x)²` starting from `x0`. `residuals` returns `None` when the
/// model cannot be evaluated at a trial point; such steps are rejected.
pub fn minimize<F>(residuals: F, x0: DVector<f64>, opts: &LmOptions) -> Result<LmReport>
where
    F: Fn(&DVector<f64>) -> Option<DVector<f64>>,
{
    let mut x = x0;
    let mut r = residuals(&x)
        .filter(|r| r.iter().all(|v| v.is_finite()))
        .ok_or_else(|| Error::Evaluation("residuals not finite at the starting point".into()))?;
    let mut chi2 = r.norm_squared();
    let mut lambda = opts.initial_lambda;
    let n = x.len();

    for iteration in 1..=opts.max_iterations {
        let jac = jacobian(&residuals, &x, opts.fd_step).ok_or_else(|| {
            Error::Evaluation("Jacobian not finite at the current point".into())
        })?;
        let jtj = jac.transpose() * &jac;
        let grad = jac.transpose() * &r;
        let diag: Vec<f64> = (0..n).map(|i| jtj[(i, i)].max(1e-300)).collect();

        let scaled_grad = (0..n)
            .map(|i| grad[i].abs() / (diag[i] * chi2.max(1e-300)).sqrt())
            .fold(0.0, f64::max);
        if scaled_grad < opts.gtol || chi2 == 0.0 {
            return Ok(LmReport { params: x, residuals: r, chi2, iterations: iteration });
        }

        loop {
            let mut a = jtj.clone();
            for i in 0..n {
                a[(i, i)] += lambda * diag[i];
            }
            let step = a.cholesky().map(|c| c.solve(&(-&grad)));
            if let Some(delta) = step {
                let trial = &x + &delta;
                let trial_r = residuals(&trial).filter(|r| r.iter().all(|v| v.is_finite()));
                if let Some(trial_r) = trial_r {
                    let trial_chi2 = trial_r.norm_squared();
                    if trial_chi2 <= chi2 {
                        let decrease = chi2 - trial_chi2;
                        let small_step = delta.norm() <= opts.xtol * (x.norm() + opts.xtol);
                        x = trial;
                        r = trial_r;
                        chi2 = trial_chi2;
                        lambda = (lambda / 10.0).max(1e-15);
                        if decrease <= opts.ftol * chi2 || small_step {
                            return Ok(LmReport { params: x, residuals: r, chi2, iterations: iteration });
                        }
                        break;
                    }
                }
            }
            lambda *= 10.0;
            if lambda > 1e16 {
                // No downhill step exists at any damping: a stationary point.
                return Ok(LmReport { params: x, residuals: r, chi2, iterations: iteration });
            }
        }
    }
    Err(Error::Convergence {
        message: "Levenberg-Marquardt iteration cap reached".into(),
        iterations: opts.max_iterations,
        residual: chi2,
    })
}

/// `(JᵀJ)⁻¹`, falling back to the pseudo-inverse for rank-deficient Jacobians.
pub fn covariance(jac: &DMatrix<f64>) -> DMatrix<f64> {
    let jtj = jac.transpose() * jac;
    match jtj.clone().cholesky() {
        Some(c) => c.inverse(),
        None => jtj
            .pseudo_inverse(1e-14)
            .unwrap_or_else(|_| DMatrix::from_element(jac.ncols(), jac.ncols(), f64::NAN)),
    }
}

/// Logistic map of an unbounded variable onto `(lo, hi)`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub(crate) struct BoxTransform {
    pub lo: f64,
    pub hi: f64,
}

impl BoxTransform {
    pub fn new(lo: f64, hi: f64) -> Self {
        Self { lo, hi }
    }

    pub fn to_bounded(&self, u: f64) -> f64 {
        self.lo + (self.hi - self.lo) / (1.0 + (-u).exp())
    }

    pub fn to_free(&self, x: f64) -> f64 {
        let span = self.hi - self.lo;
        let p = ((x - self.lo) / span).clamp(1e-9, 1.0 - 1e-9);
        (p / (1.0 - p)).ln()
    }

    /// True when `x` sits within `rel` of either bound, relative to the span.
    pub fn at_bound(&self, x: f64, rel: f64) -> bool {
        let span = self.hi - self.lo;
        (x - self.lo) <= rel * span || (self.hi - x) <= rel * span
    }
}
