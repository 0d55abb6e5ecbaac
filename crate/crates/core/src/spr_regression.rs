//! Surface loss tangents from 1/Q_TLS,0 versus metal–substrate participation.
//!
//! The model `1/Q_TLS,0 = p_MS · tan δ` has no intercept, so the primary fit
//! is a weighted regression through the origin. A free-intercept fit is kept
//! as a diagnostic only.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::uncert::UValue;

/// One resonator: participation and inverse TLS quality factor.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SprPoint {
    pub p_ms: f64,
    pub inv_q: UValue,
}

impl SprPoint {
    /// Build from a fitted Q_TLS,0, converting to 1/Q with first-order sigma.
    pub fn from_q(p_ms: f64, q_tls0: UValue) -> Result<Self> {
        let q = q_tls0.value();
        if !(q > 0.0) {
            return Err(Error::invalid(format!("Q_TLS,0 must be positive, got {q}")));
        }
        let point = Self { p_ms, inv_q: UValue::new(1.0 / q, q_tls0.sigma() / (q * q))? };
        point.validate()?;
        Ok(point)
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.p_ms > 0.0) || !self.p_ms.is_finite() {
            return Err(Error::invalid(format!("p_ms must be positive, got {}", self.p_ms)));
        }
        if !(self.inv_q.value() > 0.0) || !(self.inv_q.sigma() > 0.0) {
            return Err(Error::invalid("1/Q and its sigma must be positive"));
        }
        Ok(())
    }
}

/// Points and XPS thicknesses belonging to one surface treatment.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TreatmentDataset {
    pub label: String,
    pub points: Vec<SprPoint>,
    /// Metal–air oxide thickness, nm.
    pub t_ox: UValue,
    /// Hydrocarbon layer thickness, nm.
    pub t_hc: UValue,
}

impl TreatmentDataset {
    pub fn validate(&self) -> Result<()> {
        if self.points.is_empty() {
            return Err(Error::dataset(format!("treatment '{}' has no points", self.label)));
        }
        if self.t_ox.value() < 0.0 || self.t_hc.value() < 0.0 {
            return Err(Error::invalid(format!(
                "treatment '{}' has a negative thickness",
                self.label
            )));
        }
        self.points.iter().try_for_each(SprPoint::validate)
    }

    pub fn fit(&self) -> Result<UValue> {
        self.validate()?;
        fit_through_origin(&self.points)
    }

    /// Concatenate the points of several groups (e.g. two fabrication routes)
    /// into one dataset to be refitted jointly. Thicknesses come from the first.
    pub fn concat(label: impl Into<String>, groups: &[&TreatmentDataset]) -> Result<Self> {
        let first = groups
            .first()
            .ok_or_else(|| Error::dataset("no groups to concatenate"))?;
        Ok(Self {
            label: label.into(),
            points: groups.iter().flat_map(|g| g.points.iter().copied()).collect(),
            t_ox: first.t_ox,
            t_hc: first.t_hc,
        })
    }
}

/// Weighted least-squares slope through the origin, weights 1/σ².
pub fn fit_through_origin(points: &[SprPoint]) -> Result<UValue> {
    if points.is_empty() {
        return Err(Error::dataset("regression needs at least one point"));
    }
    let mut sxy = 0.0;
    let mut sxx = 0.0;
    for p in points {
        p.validate()?;
        let w = 1.0 / (p.inv_q.sigma() * p.inv_q.sigma());
        sxy += w * p.p_ms * p.inv_q.value();
        sxx += w * p.p_ms * p.p_ms;
    }
    UValue::new(sxy / sxx, (1.0 / sxx).sqrt())
}

/// Free-intercept weighted fit, reported alongside the through-origin slope.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct InterceptDiagnostic {
    pub slope: UValue,
    pub intercept: UValue,
}

pub fn intercept_diagnostic(points: &[SprPoint]) -> Result<InterceptDiagnostic> {
    if points.len() < 2 {
        return Err(Error::dataset("intercept fit needs at least two points"));
    }
    let (mut s, mut sx, mut sy, mut sxx, mut sxy) = (0.0, 0.0, 0.0, 0.0, 0.0);
    for p in points {
        p.validate()?;
        let w = 1.0 / (p.inv_q.sigma() * p.inv_q.sigma());
        let (x, y) = (p.p_ms, p.inv_q.value());
        s += w;
        sx += w * x;
        sy += w * y;
        sxx += w * x * x;
        sxy += w * x * y;
    }
    let det = s * sxx - sx * sx;
    if det <= 0.0 || !det.is_finite() {
        return Err(Error::DegenerateSystem(
            "all points share one participation value".into(),
        ));
    }
    Ok(InterceptDiagnostic {
        slope: UValue::new((s * sxy - sx * sy) / det, (s / det).sqrt())?,
        intercept: UValue::new((sxx * sy - sx * sxy) / det, (sxx / det).sqrt())?,
    })
}

/// Inverse-variance weighted mean.
pub fn pool_tangents(values: &[UValue]) -> Result<UValue> {
    if values.is_empty() {
        return Err(Error::dataset("nothing to pool"));
    }
    let mut sw = 0.0;
    let mut swx = 0.0;
    for v in values {
        if v.sigma() == 0.0 {
            return Err(Error::DegenerateSystem(
                "cannot pool a value with zero sigma".into(),
            ));
        }
        let w = 1.0 / (v.sigma() * v.sigma());
        sw += w;
        swx += w * v.value();
    }
    UValue::new(swx / sw, (1.0 / sw).sqrt())
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;
    use proptest::prelude::*;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;
    use rand_distr::{Distribution, StandardNormal};

    fn u(v: f64, s: f64) -> UValue {
        UValue::new(v, s).unwrap()
    }

    fn pt(p: f64, y: f64, s: f64) -> SprPoint {
        SprPoint { p_ms: p, inv_q: u(y, s) }
    }

    #[test]
    fn exact_on_noiseless_line() {
        let pts: Vec<_> = [1e-4, 2e-4, 5e-4, 8e-4]
            .iter()
            .map(|&x| pt(x, 2e-3 * x, 1e-8 * (1.0 + x * 1e3)))
            .collect();
        let r = fit_through_origin(&pts).unwrap();
        assert_relative_eq!(r.value(), 2e-3, max_relative = 1e-14);
    }

    #[test]
    fn single_point_closed_form() {
        let r = fit_through_origin(&[pt(1e-4, 2e-7, 1e-8)]).unwrap();
        assert_relative_eq!(r.value(), 2e-3, max_relative = 1e-12);
        assert_relative_eq!(r.sigma(), 1e-4, max_relative = 1e-12);
    }

    #[test]
    fn errors() {
        assert!(matches!(fit_through_origin(&[]), Err(Error::Dataset(_))));
        assert!(matches!(
            fit_through_origin(&[pt(0.0, 1e-7, 1e-8)]),
            Err(Error::InvalidInput(_))
        ));
        assert!(matches!(
            pool_tangents(&[u(1.0, 0.1), u(2.0, 0.0)]),
            Err(Error::DegenerateSystem(_))
        ));
    }

    #[test]
    fn statistical_coverage() {
        let slope = 3.19e-3;
        let xs: Vec<f64> = (0..20).map(|i| 0.5e-4 + 0.5e-4 * i as f64).collect();
        let mut hits = 0;
        for seed in 0..100 {
            let mut rng = ChaCha8Rng::seed_from_u64(seed);
            let pts: Vec<_> = xs
                .iter()
                .map(|&x| {
                    let y = slope * x;
                    let z: f64 = StandardNormal.sample(&mut rng);
                    pt(x, y * (1.0 + 0.05 * z), 0.05 * y)
                })
                .collect();
            let r = fit_through_origin(&pts).unwrap();
            if (r.value() - slope).abs() <= 2.0 * r.sigma() {
                hits += 1;
            }
        }
        assert!(hits >= 90, "{hits}/100");
    }

    #[test]
    fn intercept_diagnostic_on_offset_line() {
        let pts: Vec<_> = [1e-4, 3e-4, 6e-4].iter().map(|&x| pt(x, 1e-7 + 2e-3 * x, 1e-9)).collect();
        let d = intercept_diagnostic(&pts).unwrap();
        assert_relative_eq!(d.slope.value(), 2e-3, max_relative = 1e-9);
        assert_relative_eq!(d.intercept.value(), 1e-7, max_relative = 1e-6);
    }

    #[test]
    fn pooling() {
        assert_eq!(pool_tangents(&[u(1.2, 0.3)]).unwrap(), u(1.2, 0.3));
        let r = pool_tangents(&[u(1.2, 0.3), u(1.2, 0.3)]).unwrap();
        assert_relative_eq!(r.value(), 1.2, max_relative = 1e-15);
        assert_relative_eq!(r.sigma(), 0.3 / 2f64.sqrt(), max_relative = 1e-15);

        // Four HF chips; closed-form weighted mean by hand.
        let hf = [u(1.86e-3, 0.18e-3), u(1.68e-3, 0.14e-3), u(1.34e-3, 0.07e-3), u(1.95e-3, 0.08e-3)];
        let r = pool_tangents(&hf).unwrap();
        assert!((r.value() - 1.631e-3).abs() < 0.0005e-3);
        assert!((r.sigma() - 0.048e-3).abs() < 0.0005e-3);
    }

    #[test]
    fn concat_refits_jointly() {
        let a = TreatmentDataset {
            label: "wet".into(),
            points: vec![pt(1e-4, 3e-7, 1e-8)],
            t_ox: u(2.69, 0.07),
            t_hc: u(0.52, 0.0),
        };
        let b = TreatmentDataset { label: "liftoff".into(), points: vec![pt(2e-4, 6.2e-7, 2e-8)], ..a.clone() };
        let joint = TreatmentDataset::concat("combined", &[&a, &b]).unwrap();
        assert_eq!(joint.points.len(), 2);
        let r = joint.fit().unwrap();
        assert!(r.value() > 3e-3 && r.value() < 3.1e-3);
    }

    proptest! {
        #[test]
        fn scale_equivariant(
            xs in proptest::collection::vec(1e-5f64..1e-3, 1..12),
            slope in 1e-4f64..1e-2,
            c in 0.1f64..10.0,
        ) {
            let pts: Vec<_> = xs.iter().enumerate()
                .map(|(i, &x)| pt(x, slope * x * (1.0 + 0.01 * (i as f64 - 3.0)), 1e-8 * (1.0 + i as f64)))
                .collect();
            let scaled: Vec<_> = pts.iter().map(|p| SprPoint { p_ms: c * p.p_ms, ..*p }).collect();
            let a = fit_through_origin(&pts).unwrap();
            let b = fit_through_origin(&scaled).unwrap();
            prop_assert!((b.value() * c / a.value() - 1.0).abs() < 1e-12);
            prop_assert!((b.sigma() * c / a.sigma() - 1.0).abs() < 1e-12);
        }

        #[test]
        fn slope_within_ratio_range(
            data in proptest::collection::vec((1e-5f64..1e-3, 1e-8f64..1e-6, 1e-10f64..1e-7), 1..12),
        ) {
            let pts: Vec<_> = data.iter().map(|&(x, y, s)| pt(x, y, s)).collect();
            let r = fit_through_origin(&pts).unwrap().value();
            let ratios = pts.iter().map(|p| p.inv_q.value() / p.p_ms);
            let (lo, hi) = ratios.fold((f64::INFINITY, 0.0f64), |(lo, hi), v| (lo.min(v), hi.max(v)));
            prop_assert!(r >= lo * (1.0 - 1e-12) && r <= hi * (1.0 + 1e-12));
        }

        #[test]
        fn pooled_within_range(vals in proptest::collection::vec((-5.0f64..5.0, 0.01f64..2.0), 1..10)) {
            let us: Vec<_> = vals.iter().map(|&(v, s)| u(v, s)).collect();
            let r = pool_tangents(&us).unwrap().value();
            let lo = vals.iter().map(|v| v.0).fold(f64::INFINITY, f64::min);
            let hi = vals.iter().map(|v| v.0).fold(f64::NEG_INFINITY, f64::max);
            prop_assert!(r >= lo - 1e-12 && r <= hi + 1e-12);
        }
    }
}
