use serde::{Deserialize, Serialize};

use super::components::ComponentsFit;
use crate::error::{Error, Result};
use crate::uncert::{combine_linear, Expression, UValue};

/// Inelastic mean free paths and atomic densities for the overlayer
/// thickness estimate.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct StrohmeierConstants {
    /// nm.
    pub lambda_m: f64,
    /// nm.
    pub lambda_ox: f64,
    /// Metal atoms per unit volume in the metal.
    pub n_m: f64,
    /// Metal atoms per unit volume in the oxide, same units as `n_m`.
    pub n_ox: f64,
    /// Emission angle from the surface, degrees.
    pub theta_deg: f64,
}

impl StrohmeierConstants {
    /// Commonly used Al/Al2O3 values for Al2p with Al Kα excitation
    /// (densities in atoms/cm³).
    pub fn aluminum_literature() -> Self {
        Self { lambda_m: 2.6, lambda_ox: 2.8, n_m: 6.026e22, n_ox: 4.017e22, theta_deg: 90.0 }
    }

    pub fn validate(&self) -> Result<()> {
        for (name, v) in [
            ("lambda_m", self.lambda_m),
            ("lambda_ox", self.lambda_ox),
            ("n_m", self.n_m),
            ("n_ox", self.n_ox),
        ] {
            if !(v > 0.0) || !v.is_finite() {
                return Err(Error::invalid(format!("strohmeier.{name} must be positive")));
            }
        }
        if !(self.theta_deg > 0.0 && self.theta_deg <= 90.0) {
            return Err(Error::invalid("strohmeier.theta_deg must lie in (0, 90]"));
        }
        Ok(())
    }

    fn gain(&self) -> f64 {
        (self.n_m / self.n_ox) * (self.lambda_m / self.lambda_ox)
    }

    fn depth(&self) -> f64 {
        self.lambda_ox * self.theta_deg.to_radians().sin()
    }
}

pub fn strohmeier_expression<'a>(i_ox: UValue, i_m: UValue, c: &StrohmeierConstants) -> Expression<'a> {
    let (gain, depth) = (c.gain(), c.depth());
    Expression::new(vec![i_ox, i_m], move |x| depth * (gain * x[0] / x[1]).ln_1p())
}

/// Oxide thickness (nm) from oxide and metal peak areas.
pub fn strohmeier_thickness(i_ox: UValue, i_m: UValue, constants: &StrohmeierConstants) -> Result<UValue> {
    constants.validate()?;
    if i_m.value() == 0.0 {
        return Err(Error::DivisionByZero("metal intensity is zero".into()));
    }
    if i_m.value() < 0.0 || i_ox.value() < 0.0 {
        return Err(Error::invalid("peak intensities must be non-negative"));
    }
    strohmeier_expression(i_ox, i_m, constants).first_order()
}

/// Oxide and metal intensities from a component fit: components whose
/// label is in `metal_labels` count as metal, the rest as oxide.
pub fn split_intensities(fit: &ComponentsFit, metal_labels: &[&str]) -> Result<(UValue, UValue)> {
    let (metal, oxide): (Vec<_>, Vec<_>) =
        fit.components.iter().partition(|c| metal_labels.contains(&c.label.as_str()));
    if metal.is_empty() {
        return Err(Error::invalid(format!("no metal component among {metal_labels:?}")));
    }
    let sum = |v: &[&super::components::ComponentFit]| {
        combine_linear(&v.iter().map(|c| (1.0, c.total_area)).collect::<Vec<_>>())
    };
    Ok((sum(&oxide)?, sum(&metal)?))
}

/// Thickness straight from a component fit.
pub fn thickness_from_fit(fit: &ComponentsFit, metal_labels: &[&str], constants: &StrohmeierConstants) -> Result<UValue> {
    let (i_ox, i_m) = split_intensities(fit, metal_labels)?;
    strohmeier_thickness(i_ox, i_m, constants)
}

/// I_ox/I_m that yields thickness `d` nm.
pub fn intensity_ratio_for_thickness(d: f64, constants: &StrohmeierConstants) -> Result<f64> {
    constants.validate()?;
    if !(d >= 0.0) {
        return Err(Error::invalid("thickness must be non-negative"));
    }
    Ok((d / constants.depth()).exp_m1() / constants.gain())
}
