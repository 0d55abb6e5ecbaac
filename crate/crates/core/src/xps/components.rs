use std::f64::consts::{LN_2, PI};

use nalgebra::{DMatrix, DVector};
use serde::{Deserialize, Serialize};

use super::shirley::ShirleyBackground;
use super::spectrum::XpsSpectrum;
use crate::constants::{AL2P_AREA_RATIO, AL2P_SPLITTING_EV};
use crate::error::{Error, Result};
use crate::lm::{self, BoxTransform, LmOptions};
use crate::uncert::UValue;

/// Largest model accepted; heights are solved by exhaustive active sets.
pub const MAX_COMPONENTS: usize = 10;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum LineShape {
    Lorentzian,
    Gaussian,
}

impl LineShape {
    /// Unit-height profile.
    pub fn profile(self, x: f64, center: f64, fwhm: f64) -> f64 {
        let u = (x - center) / fwhm;
        match self {
            LineShape::Gaussian => (-4.0 * LN_2 * u * u).exp(),
            LineShape::Lorentzian => 1.0 / (1.0 + 4.0 * u * u),
        }
    }

    /// Area of a unit-height profile of width `fwhm`.
    pub fn area_factor(self, fwhm: f64) -> f64 {
        match self {
            LineShape::Gaussian => fwhm * (PI / (4.0 * LN_2)).sqrt(),
            LineShape::Lorentzian => PI * fwhm / 2.0,
        }
    }
}

/// Spin-orbit partner rule: a second line at `+splitting` eV carrying
/// `1/ratio` of the main line's area with the same shape and width.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Doublet {
    pub splitting: f64,
    pub ratio: f64,
}

impl Default for Doublet {
    fn default() -> Self {
        Self { splitting: AL2P_SPLITTING_EV, ratio: AL2P_AREA_RATIO }
    }
}

/// A line with known parameters, used for synthesis.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PeakComponent {
    pub label: String,
    pub shape: LineShape,
    pub center: f64,
    pub fwhm: f64,
    /// Area of the main (3/2) line.
    pub area: f64,
    pub doublet: Option<Doublet>,
}

impl PeakComponent {
    pub fn validate(&self) -> Result<()> {
        if !(self.fwhm > 0.0) {
            return Err(Error::invalid(format!("{}: fwhm must be positive", self.label)));
        }
        if !(self.area >= 0.0) {
            return Err(Error::invalid(format!("{}: area must be non-negative", self.label)));
        }
        if let Some(d) = self.doublet {
            if !(d.ratio > 0.0) {
                return Err(Error::invalid(format!("{}: doublet ratio must be positive", self.label)));
            }
        }
        Ok(())
    }

    pub fn height(&self) -> f64 {
        self.area / self.shape.area_factor(self.fwhm)
    }

    pub fn evaluate(&self, x: f64) -> f64 {
        self.height() * unit_basis(self.shape, self.doublet, x, self.center, self.fwhm)
    }
}

fn unit_basis(shape: LineShape, doublet: Option<Doublet>, x: f64, center: f64, fwhm: f64) -> f64 {
    let main = shape.profile(x, center, fwhm);
    match doublet {
        Some(d) => main + shape.profile(x, center + d.splitting, fwhm) / d.ratio,
        None => main,
    }
}

/// Fit template: starting values plus the box each nonlinear parameter may
/// move in.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ComponentTemplate {
    pub label: String,
    pub shape: LineShape,
    pub center: f64,
    /// Half-width of the allowed center range, eV.
    pub center_window: f64,
    pub fwhm: f64,
    pub fwhm_min: f64,
    pub fwhm_max: f64,
    #[serde(default)]
    pub doublet: Option<Doublet>,
}

impl ComponentTemplate {
    pub fn validate(&self) -> Result<()> {
        if !(self.center_window > 0.0) {
            return Err(Error::invalid(format!("{}: center window must be nonempty", self.label)));
        }
        if !(self.fwhm_min > 0.0 && self.fwhm_min < self.fwhm_max) {
            return Err(Error::invalid(format!("{}: fwhm bounds must satisfy 0 < min < max", self.label)));
        }
        if !(self.fwhm > self.fwhm_min && self.fwhm < self.fwhm_max) {
            return Err(Error::invalid(format!("{}: starting fwhm outside its bounds", self.label)));
        }
        Ok(())
    }

    fn center_box(&self) -> BoxTransform {
        BoxTransform::new(self.center - self.center_window, self.center + self.center_window)
    }

    fn fwhm_box(&self) -> BoxTransform {
        BoxTransform::new(self.fwhm_min, self.fwhm_max)
    }
}

/// Al2p model: metallic Lorentzian plus interface and 3+ Gaussians, all
/// spin-orbit doublets. Centers are of the 3/2 lines.
pub fn al2p_templates(al0: f64, al_int: f64, al3: f64) -> Vec<ComponentTemplate> {
    let doublet = Some(Doublet::default());
    vec![
        ComponentTemplate {
            label: "Al0".into(),
            shape: LineShape::Lorentzian,
            center: al0,
            center_window: 0.2,
            fwhm: 0.4,
            fwhm_min: 0.05,
            fwhm_max: 2.0,
            doublet,
        },
        ComponentTemplate {
            label: "Al_int".into(),
            shape: LineShape::Gaussian,
            center: al_int,
            center_window: 0.2,
            fwhm: 1.0,
            fwhm_min: 0.1,
            fwhm_max: 3.0,
            doublet,
        },
        ComponentTemplate {
            label: "Al3+".into(),
            shape: LineShape::Gaussian,
            center: al3,
            center_window: 0.5,
            fwhm: 1.4,
            fwhm_min: 0.1,
            fwhm_max: 3.5,
            doublet,
        },
    ]
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct PartnerLine {
    pub center: UValue,
    pub area: UValue,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ComponentFit {
    pub label: String,
    pub shape: LineShape,
    pub height: UValue,
    pub center: UValue,
    pub fwhm: UValue,
    /// Area of the main line.
    pub area: UValue,
    pub partner: Option<PartnerLine>,
    /// Main line plus partner.
    pub total_area: UValue,
    pub boundary_active: bool,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ComponentsFit {
    pub components: Vec<ComponentFit>,
    /// Parameter order: (height, center, fwhm) per component.
    pub covariance: Vec<Vec<f64>>,
    pub chi2: f64,
    pub dof: usize,
    pub iterations: usize,
}

impl ComponentsFit {
    pub fn component(&self, label: &str) -> Option<&ComponentFit> {
        self.components.iter().find(|c| c.label == label)
    }

    pub fn warnings(&self) -> Vec<String> {
        self.components
            .iter()
            .filter(|c| c.boundary_active)
            .map(|c| format!("{}: parameter at a constraint bound", c.label))
            .collect()
    }
}

/// Non-negative weighted least squares by enumerating active sets. Exact for
/// the handful of columns a line-shape model has.
fn nnls(basis: &DMatrix<f64>, y: &DVector<f64>) -> DVector<f64> {
    let k = basis.ncols();
    let mut best = DVector::zeros(k);
    let mut best_chi2 = y.norm_squared();
    for mask in 1u32..(1 << k) {
        let cols: Vec<usize> = (0..k).filter(|j| mask & (1 << j) != 0).collect();
        let sub = basis.select_columns(&cols);
        let Some(chol) = (sub.transpose() * &sub).cholesky() else { continue };
        let h = chol.solve(&(sub.transpose() * y));
        if h.iter().any(|v| *v < 0.0 || !v.is_finite()) {
            continue;
        }
        let chi2 = (y - &sub * &h).norm_squared();
        if chi2 < best_chi2 {
            best_chi2 = chi2;
            best = DVector::zeros(k);
            for (c, j) in cols.iter().enumerate() {
                best[*j] = h[c];
            }
        }
    }
    best
}

struct Problem<'a> {
    x: &'a [f64],
    /// Background-subtracted intensity.
    y: Vec<f64>,
    sqrt_w: Vec<f64>,
    templates: &'a [ComponentTemplate],
}

impl Problem<'_> {
    fn weighted_basis(&self, centers: &[f64], fwhms: &[f64]) -> DMatrix<f64> {
        DMatrix::from_fn(self.x.len(), self.templates.len(), |i, j| {
            let t = &self.templates[j];
            self.sqrt_w[i] * unit_basis(t.shape, t.doublet, self.x[i], centers[j], fwhms[j])
        })
    }

    fn weighted_y(&self) -> DVector<f64> {
        DVector::from_iterator(self.y.len(), self.y.iter().zip(&self.sqrt_w).map(|(y, w)| y * w))
    }

    fn decode(&self, u: &DVector<f64>) -> (Vec<f64>, Vec<f64>) {
        let k = self.templates.len();
        let centers = (0..k).map(|j| self.templates[j].center_box().to_bounded(u[2 * j])).collect();
        let fwhms = (0..k).map(|j| self.templates[j].fwhm_box().to_bounded(u[2 * j + 1])).collect();
        (centers, fwhms)
    }

    /// Residuals with the heights projected out.
    fn projected(&self, u: &DVector<f64>) -> Option<DVector<f64>> {
        let (centers, fwhms) = self.decode(u);
        let basis = self.weighted_basis(&centers, &fwhms);
        let yw = self.weighted_y();
        let h = nnls(&basis, &yw);
        Some(yw - basis * h)
    }

    /// Residuals in the natural parameters (height, center, fwhm per component).
    fn full(&self, p: &DVector<f64>) -> Option<DVector<f64>> {
        let k = self.templates.len();
        let mut r = self.weighted_y();
        for i in 0..self.x.len() {
            let model: f64 = (0..k)
                .map(|j| {
                    let t = &self.templates[j];
                    p[3 * j] * unit_basis(t.shape, t.doublet, self.x[i], p[3 * j + 1], p[3 * j + 2])
                })
                .sum();
            r[i] -= self.sqrt_w[i] * model;
        }
        Some(r)
    }
}

/// Fit line-shape components to the background-subtracted intensity inside
/// the background window. Weights are `1 / max(counts, 1)`; the covariance is
/// scaled by the reduced chi².
pub fn fit_components(
    spectrum: &XpsSpectrum,
    background: &ShirleyBackground,
    templates: &[ComponentTemplate],
) -> Result<ComponentsFit> {
    if templates.is_empty() {
        return Err(Error::invalid("component model is empty"));
    }
    if templates.len() > MAX_COMPONENTS {
        return Err(Error::invalid(format!("at most {MAX_COMPONENTS} components are supported")));
    }
    for t in templates {
        t.validate()?;
    }
    if background.end >= spectrum.len() || background.values.len() != background.end + 1 - background.start {
        return Err(Error::invalid("background does not belong to this spectrum"));
    }
    let range = background.start..=background.end;
    let x = &spectrum.binding_energy()[range.clone()];
    let raw = &spectrum.intensity()[range];
    let k = templates.len();
    let n_params = 3 * k;
    if x.len() <= n_params {
        return Err(Error::dataset("fit window holds too few samples for the model"));
    }
    let problem = Problem {
        x,
        y: raw.iter().zip(&background.values).map(|(y, b)| y - b).collect(),
        sqrt_w: raw.iter().map(|y| 1.0 / y.max(1.0).sqrt()).collect(),
        templates,
    };

    let u0 = DVector::from_iterator(
        2 * k,
        templates.iter().flat_map(|t| [t.center_box().to_free(t.center), t.fwhm_box().to_free(t.fwhm)]),
    );
    let opts = LmOptions::default();
    let report = lm::minimize(|u| problem.projected(u), u0, &opts)?;
    let (centers, fwhms) = problem.decode(&report.params);
    let heights = nnls(&problem.weighted_basis(&centers, &fwhms), &problem.weighted_y());

    let p = DVector::from_iterator(n_params, (0..k).flat_map(|j| [heights[j], centers[j], fwhms[j]]));
    let jac = lm::jacobian(&|p: &DVector<f64>| problem.full(p), &p, opts.fd_step)
        .ok_or_else(|| Error::Evaluation("component Jacobian not finite".into()))?;
    let dof = x.len() - n_params;
    let chi2 = report.chi2;
    let cov = lm::covariance(&jac) * (chi2 / dof as f64);

    let mut components = Vec::with_capacity(k);
    for (j, t) in templates.iter().enumerate() {
        let (ih, ic, iw) = (3 * j, 3 * j + 1, 3 * j + 2);
        let sd = |i: usize| cov[(i, i)].max(0.0).sqrt();
        let factor = t.shape.area_factor(1.0);
        let (h, w) = (heights[j], fwhms[j]);
        let area_var = factor * factor
            * (w * w * cov[(ih, ih)] + h * h * cov[(iw, iw)] + 2.0 * h * w * cov[(ih, iw)]);
        let area = UValue::new(factor * h * w, area_var.max(0.0).sqrt())?;
        let center = UValue::new(centers[j], sd(ic))?;
        let partner = match t.doublet {
            Some(d) => Some(PartnerLine {
                center: UValue::new(centers[j] + d.splitting, sd(ic))?,
                area: area.scale(1.0 / d.ratio)?,
            }),
            None => None,
        };
        let total_area = match t.doublet {
            Some(d) => area.scale(1.0 + 1.0 / d.ratio)?,
            None => area,
        };
        let boundary_active = t.center_box().at_bound(centers[j], 1e-4) || t.fwhm_box().at_bound(w, 1e-4);
        components.push(ComponentFit {
            label: t.label.clone(),
            shape: t.shape,
            height: UValue::new(h, sd(ih))?,
            center,
            fwhm: UValue::new(w, sd(iw))?,
            area,
            partner,
            total_area,
            boundary_active,
        });
    }
    Ok(ComponentsFit {
        components,
        covariance: (0..n_params).map(|i| cov.row(i).iter().copied().collect()).collect(),
        chi2,
        dof,
        iterations: report.iterations,
    })
}
