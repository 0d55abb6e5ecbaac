//! Interface loss-tangent system for aluminium resonators.
//!
//! Each treatment's surface tangent decomposes as
//!
//! ```text
//! tan δ_HF        = r_MA·(t_HF/t0)·tan δ_AlOx + M
//! tan δ_HF,aged   = r_MA·(t_aged/t0)·tan δ_AlOx + M
//! tan δ_untreated = r_MA·(t_ox/t0)·tan δ_AlOx + (r_MA + r_SA)·(t_HC/t0)·tan δ_HC + M
//! ```
//!
//! where `r_X = p_X/p_MS` and `M` is the combined, participation-scaled
//! metal–substrate plus substrate–air remainder. The solvers below invert
//! this system one unknown at a time.

use serde::{Deserialize, Serialize};

use crate::constants::{CARBON_AT_PCT_PER_MONOLAYER, CARBON_MONOLAYER_NM, DEFAULT_T0_NM};
use crate::error::{Error, Result};
use crate::uncert::{Expression, UValue};

/// Participation ratios back-solved from published scaled tangents. They are
/// not printed anywhere as simulation output; reports flag them as derived.
pub const DERIVED_R_MA: f64 = 0.105;
pub const DERIVED_R_SA: f64 = 1.15;

/// Participation ratios relative to p_MS and the simulated layer thickness.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ParticipationConfig {
    /// p_MA / p_MS.
    pub r_ma: UValue,
    /// p_SA / p_MS.
    pub r_sa: UValue,
    /// Simulated interface thickness, nm.
    pub t0: f64,
}

impl ParticipationConfig {
    pub fn derived_defaults() -> Self {
        Self {
            r_ma: UValue::exact(DERIVED_R_MA),
            r_sa: UValue::exact(DERIVED_R_SA),
            t0: DEFAULT_T0_NM,
        }
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.r_ma.value() > 0.0) {
            return Err(Error::invalid("participation.r_ma must be positive"));
        }
        if !(self.r_sa.value() > 0.0) {
            return Err(Error::invalid("participation.r_sa must be positive"));
        }
        if !(self.t0 > 0.0) || !self.t0.is_finite() {
            return Err(Error::invalid("participation.t0 must be positive"));
        }
        Ok(())
    }
}

/// A solver output whose central value came from a subtraction and may be
/// negative when the inputs are mutually inconsistent.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Flagged {
    pub value: UValue,
    pub negative_central: bool,
}

impl Flagged {
    fn from(value: UValue) -> Self {
        Self { value, negative_central: value.value() < 0.0 }
    }
}

/// Expression for the intrinsic AlOx tangent from fresh and aged HF-treated
/// devices. Inputs: tan_hf, tan_aged, t_hf, t_aged, r_ma.
pub fn alox_expression<'a>(
    tan_hf: UValue,
    tan_hf90: UValue,
    t_hf: UValue,
    t_hf90: UValue,
    cfg: &ParticipationConfig,
) -> Expression<'a> {
    let t0 = cfg.t0;
    Expression::new(vec![tan_hf, tan_hf90, t_hf, t_hf90, cfg.r_ma], move |x| {
        (1.0 / x[4]) * (x[1] - x[0]) * t0 / (x[3] - x[2])
    })
}

pub fn solve_alox(
    tan_hf: UValue,
    tan_hf90: UValue,
    t_hf: UValue,
    t_hf90: UValue,
    cfg: &ParticipationConfig,
) -> Result<Flagged> {
    cfg.validate()?;
    if !(t_hf90.value() > t_hf.value()) {
        return Err(Error::DegenerateSystem(format!(
            "aged oxide ({} nm) must be thicker than fresh oxide ({} nm)",
            t_hf90.value(),
            t_hf.value()
        )));
    }
    alox_expression(tan_hf, tan_hf90, t_hf, t_hf90, cfg)
        .first_order()
        .map(Flagged::from)
}

/// Expression for the MS+SA remainder. Inputs: tan_hf, tan_alox, t_hf, r_ma.
pub fn ms_sa_expression<'a>(
    tan_hf: UValue,
    tan_alox: UValue,
    t_hf: UValue,
    cfg: &ParticipationConfig,
) -> Expression<'a> {
    let t0 = cfg.t0;
    Expression::new(vec![tan_hf, tan_alox, t_hf, cfg.r_ma], move |x| {
        x[0] - x[1] * x[3] * (x[2] / t0)
    })
}

/// Combined, participation-scaled MS plus SA contribution left after removing
/// the oxide term from the HF-treated tangent.
pub fn solve_ms_sa(
    tan_hf: UValue,
    tan_alox: UValue,
    t_hf: UValue,
    cfg: &ParticipationConfig,
) -> Result<Flagged> {
    cfg.validate()?;
    if t_hf.value() < 0.0 {
        return Err(Error::invalid("oxide thickness must be non-negative"));
    }
    ms_sa_expression(tan_hf, tan_alox, t_hf, cfg)
        .first_order()
        .map(Flagged::from)
}

/// Expression for the fabrication-residue tangent. Inputs: tan_untreated,
/// tan_alox, ms_sa, t_untreated_ox, t_hc, r_ma, r_sa.
pub fn hc_expression<'a>(
    tan_untreated: UValue,
    tan_alox: UValue,
    ms_sa: UValue,
    t_untreated_ox: UValue,
    t_hc: UValue,
    cfg: &ParticipationConfig,
) -> Expression<'a> {
    let t0 = cfg.t0;
    Expression::new(
        vec![tan_untreated, tan_alox, ms_sa, t_untreated_ox, t_hc, cfg.r_ma, cfg.r_sa],
        move |x| (t0 / x[4]) * (1.0 / (x[5] + x[6])) * (x[0] - x[5] * (x[3] / t0) * x[1] - x[2]),
    )
}

pub fn solve_hc(
    tan_untreated: UValue,
    tan_alox: UValue,
    ms_sa: UValue,
    t_untreated_ox: UValue,
    t_hc: UValue,
    cfg: &ParticipationConfig,
) -> Result<Flagged> {
    cfg.validate()?;
    if t_hc.value() == 0.0 {
        return Err(Error::DivisionByZero("hydrocarbon thickness is zero".into()));
    }
    if t_hc.value() < 0.0 {
        return Err(Error::invalid("hydrocarbon thickness must be positive"));
    }
    hc_expression(tan_untreated, tan_alox, ms_sa, t_untreated_ox, t_hc, cfg)
        .first_order()
        .map(Flagged::from)
}

/// Hydrocarbon thickness (nm) from XPS carbon atomic percent.
pub fn carbon_thickness(at_pct_carbon: f64) -> Result<f64> {
    if !(0.0..=100.0).contains(&at_pct_carbon) {
        return Err(Error::invalid(format!(
            "carbon atomic percent must be in [0, 100], got {at_pct_carbon}"
        )));
    }
    Ok(at_pct_carbon / CARBON_AT_PCT_PER_MONOLAYER * CARBON_MONOLAYER_NM)
}

/// Percent shares of the untreated surface tangent.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct BudgetFractions {
    pub alox: UValue,
    pub hydrocarbon: UValue,
    pub ms_sa: UValue,
    /// Factor applied to make the central values sum to 100.
    pub renormalization: f64,
}

impl BudgetFractions {
    pub fn entries(&self) -> [(&'static str, UValue); 3] {
        [("alox", self.alox), ("hydrocarbon", self.hydrocarbon), ("ms_sa", self.ms_sa)]
    }
}

/// Per-component expressions of the share (percent) of the untreated tangent.
/// Inputs: tan_untreated, tan_alox, tan_hc, ms_sa, t_ox, t_hc, r_ma, r_sa.
pub fn fraction_expressions<'a>(
    tan_untreated: UValue,
    tan_alox: UValue,
    tan_hc: UValue,
    ms_sa: UValue,
    t_untreated_ox: UValue,
    t_hc: UValue,
    cfg: &ParticipationConfig,
) -> [Expression<'a>; 3] {
    let t0 = cfg.t0;
    let inputs = vec![tan_untreated, tan_alox, tan_hc, ms_sa, t_untreated_ox, t_hc, cfg.r_ma, cfg.r_sa];
    [
        Expression::new(inputs.clone(), move |x| x[6] * (x[4] / t0) * x[1] / x[0] * 100.0),
        Expression::new(inputs.clone(), move |x| (x[6] + x[7]) * (x[5] / t0) * x[2] / x[0] * 100.0),
        Expression::new(inputs, move |x| x[3] / x[0] * 100.0),
    ]
}

pub fn budget_fractions(
    tan_untreated: UValue,
    tan_alox: UValue,
    tan_hc: UValue,
    ms_sa: UValue,
    t_untreated_ox: UValue,
    t_hc: UValue,
    cfg: &ParticipationConfig,
) -> Result<BudgetFractions> {
    cfg.validate()?;
    if tan_untreated.value() == 0.0 {
        return Err(Error::DivisionByZero("untreated tangent is zero".into()));
    }
    let exprs = fraction_expressions(tan_untreated, tan_alox, tan_hc, ms_sa, t_untreated_ox, t_hc, cfg);
    let raw = exprs
        .iter()
        .map(Expression::first_order)
        .collect::<Result<Vec<_>>>()?;
    let total: f64 = raw.iter().map(UValue::value).sum();
    if total == 0.0 || !total.is_finite() {
        return Err(Error::DivisionByZero("budget terms sum to zero".into()));
    }
    let factor = 100.0 / total;
    let scaled = raw
        .iter()
        .map(|v| v.scale(factor))
        .collect::<Result<Vec<_>>>()?;
    Ok(BudgetFractions {
        alox: scaled[0],
        hydrocarbon: scaled[1],
        ms_sa: scaled[2],
        renormalization: factor,
    })
}

/// Measured inputs to the full linear-absorption (or n̄ = 1) ladder.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct BudgetInputs {
    pub tan_hf: UValue,
    pub tan_hf_aged: UValue,
    pub tan_untreated: UValue,
    pub t_hf: UValue,
    pub t_hf_aged: UValue,
    pub t_untreated_ox: UValue,
    pub t_hc: UValue,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct BudgetResult {
    pub tan_alox: Flagged,
    pub tan_ms_sa: Flagged,
    pub tan_hc: Flagged,
    pub fractions: BudgetFractions,
}

impl BudgetResult {
    pub fn warnings(&self) -> Vec<String> {
        [("tan_alox", self.tan_alox), ("tan_ms_sa", self.tan_ms_sa), ("tan_hc", self.tan_hc)]
            .iter()
            .filter(|(_, f)| f.negative_central)
            .map(|(name, f)| format!("{name} has a negative central value ({:e}); inputs are inconsistent", f.value.value()))
            .collect()
    }
}

/// Solve for the AlOx, MS+SA and hydrocarbon tangents in sequence, then the
/// fractional budget of the untreated surface.
pub fn solve_budget(inputs: &BudgetInputs, cfg: &ParticipationConfig) -> Result<BudgetResult> {
    let tan_alox = solve_alox(inputs.tan_hf, inputs.tan_hf_aged, inputs.t_hf, inputs.t_hf_aged, cfg)?;
    let tan_ms_sa = solve_ms_sa(inputs.tan_hf, tan_alox.value, inputs.t_hf, cfg)?;
    let tan_hc = solve_hc(
        inputs.tan_untreated,
        tan_alox.value,
        tan_ms_sa.value,
        inputs.t_untreated_ox,
        inputs.t_hc,
        cfg,
    )?;
    let fractions = budget_fractions(
        inputs.tan_untreated,
        tan_alox.value,
        tan_hc.value,
        tan_ms_sa.value,
        inputs.t_untreated_ox,
        inputs.t_hc,
        cfg,
    )?;
    Ok(BudgetResult { tan_alox, tan_ms_sa, tan_hc, fractions })
}

/// Surface tangents implied by chosen interface tangents: the forward model
/// the solvers invert. Returns (tan_hf, tan_hf_aged, tan_untreated).
pub fn forward_model(
    tan_alox: f64,
    tan_hc: f64,
    ms_sa: f64,
    thicknesses: (f64, f64, f64, f64),
    cfg: &ParticipationConfig,
) -> (f64, f64, f64) {
    let (t_hf, t_aged, t_ox, t_hc) = thicknesses;
    let r_ma = cfg.r_ma.value();
    let r_sa = cfg.r_sa.value();
    let oxide = |t: f64| r_ma * (t / cfg.t0) * tan_alox;
    (
        oxide(t_hf) + ms_sa,
        oxide(t_aged) + ms_sa,
        oxide(t_ox) + (r_ma + r_sa) * (t_hc / cfg.t0) * tan_hc + ms_sa,
    )
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;
    use proptest::prelude::*;

    fn u(v: f64, s: f64) -> UValue {
        UValue::new(v, s).unwrap()
    }

    fn cfg() -> ParticipationConfig {
        ParticipationConfig::derived_defaults()
    }

    #[test]
    fn alox_published_inputs() {
        let r = solve_alox(u(1.77e-3, 0.08e-3), u(2.51e-3, 0.29e-3), u(1.90, 0.05), u(3.11, 0.09), &cfg())
            .unwrap();
        // (1/0.105)·0.74e-3·3/1.21
        assert_relative_eq!(r.value.value(), 0.74e-3 * 3.0 / 1.21 / 0.105, max_relative = 1e-12);
        assert!((r.value.value() / 1.74e-2 - 1.0).abs() < 0.01);
        assert!(!r.negative_central);
    }

    #[test]
    fn alox_edge_cases() {
        let r = solve_alox(u(2e-3, 1e-4), u(2e-3, 1e-4), u(1.9, 0.0), u(3.1, 0.0), &cfg()).unwrap();
        assert_eq!(r.value.value(), 0.0);

        let base = solve_alox(u(1.77e-3, 0.0), u(2.51e-3, 0.0), u(1.9, 0.0), u(3.11, 0.0), &cfg()).unwrap();
        let doubled = ParticipationConfig { r_ma: UValue::exact(2.0 * DERIVED_R_MA), ..cfg() };
        let half = solve_alox(u(1.77e-3, 0.0), u(2.51e-3, 0.0), u(1.9, 0.0), u(3.11, 0.0), &doubled).unwrap();
        assert_eq!(half.value.value(), base.value.value() / 2.0);

        assert!(matches!(
            solve_alox(u(1e-3, 0.0), u(2e-3, 0.0), u(2.0, 0.0), u(2.0, 0.0), &cfg()),
            Err(Error::DegenerateSystem(_))
        ));
    }

    #[test]
    fn ms_sa_cases() {
        let r = solve_ms_sa(u(1.77e-3, 0.08e-3), u(1.74e-2, 0.7e-2), u(1.90, 0.05), &cfg()).unwrap();
        assert!((r.value.value() - 6.1e-4).abs() < 0.05e-4);
        let r = solve_ms_sa(u(1.77e-3, 0.08e-3), u(0.0, 0.0), u(1.90, 0.05), &cfg()).unwrap();
        assert_eq!(r.value.value(), 1.77e-3);
        let r = solve_ms_sa(u(1.77e-3, 0.08e-3), u(1.74e-2, 0.7e-2), u(0.0, 0.0), &cfg()).unwrap();
        assert_eq!(r.value.value(), 1.77e-3);

        let r = solve_ms_sa(u(1e-4, 0.0), u(1.74e-2, 0.0), u(1.9, 0.0), &cfg()).unwrap();
        assert!(r.negative_central);
    }

    #[test]
    fn hc_cases() {
        let r = solve_hc(u(3.19e-3, 0.22e-3), u(1.74e-2, 0.7e-2), u(6.19e-4, 4.96e-4), u(2.69, 0.07), u(0.52, 0.0), &cfg())
            .unwrap();
        assert!((r.value.value() - 4.2e-3).abs() < 0.1e-3, "{}", r.value);
        assert!((r.value.value() - 3.89e-3).abs() < 1.12e-3);

        // Untreated tangent equal to the subtracted terms.
        let sub = DERIVED_R_MA * (2.69 / 3.0) * 1.74e-2 + 6.19e-4;
        let r = solve_hc(u(sub, 0.0), u(1.74e-2, 0.0), u(6.19e-4, 0.0), u(2.69, 0.0), u(0.52, 0.0), &cfg()).unwrap();
        assert!(r.value.value().abs() < 1e-15);

        let full = solve_hc(u(3.19e-3, 0.0), u(1.74e-2, 0.0), u(6.19e-4, 0.0), u(2.69, 0.0), u(0.52, 0.0), &cfg()).unwrap();
        let half = solve_hc(u(3.19e-3, 0.0), u(1.74e-2, 0.0), u(6.19e-4, 0.0), u(2.69, 0.0), u(0.26, 0.0), &cfg()).unwrap();
        assert_relative_eq!(half.value.value(), 2.0 * full.value.value(), max_relative = 1e-15);

        assert!(matches!(
            solve_hc(u(3.19e-3, 0.0), u(1.74e-2, 0.0), u(6.19e-4, 0.0), u(2.69, 0.0), u(0.0, 0.0), &cfg()),
            Err(Error::DivisionByZero(_))
        ));
    }

    #[test]
    fn carbon_monolayers() {
        assert_eq!(carbon_thickness(7.6).unwrap(), 0.5);
        assert_eq!(carbon_thickness(0.0).unwrap(), 0.0);
        assert!((carbon_thickness(7.904).unwrap() - 0.52).abs() < 1e-12);
        assert!(carbon_thickness(-1.0).is_err());
        assert!(carbon_thickness(100.1).is_err());
    }

    #[test]
    fn fractions_published_inputs() {
        let inputs = BudgetInputs {
            tan_hf: u(1.77e-3, 0.08e-3),
            tan_hf_aged: u(2.51e-3, 0.29e-3),
            tan_untreated: u(3.19e-3, 0.22e-3),
            t_hf: u(1.90, 0.05),
            t_hf_aged: u(3.11, 0.09),
            t_untreated_ox: u(2.69, 0.07),
            t_hc: u(0.52, 0.0),
        };
        let r = solve_budget(&inputs, &cfg()).unwrap();
        let f = r.fractions;
        assert!((f.alox.value() - 52.4).abs() < 3.0);
        assert!((f.hydrocarbon.value() - 27.7).abs() < 3.0);
        assert!((f.ms_sa.value() - 19.8).abs() < 3.0);
        let sum = f.alox.value() + f.hydrocarbon.value() + f.ms_sa.value();
        assert!((sum - 100.0).abs() < 1e-12);
        // Hydrocarbon was solved from the same untreated tangent.
        assert!((f.renormalization - 1.0).abs() < 1e-12);
        assert!(r.warnings().is_empty());
    }

    #[test]
    fn single_component_takes_everything() {
        let f = budget_fractions(u(2e-3, 1e-4), u(0.0, 0.0), u(0.0, 0.0), u(1.5e-3, 1e-4), u(2.69, 0.0), u(0.52, 0.0), &cfg())
            .unwrap();
        assert_eq!(f.ms_sa.value(), 100.0);
        assert_eq!(f.alox.value(), 0.0);
        assert_eq!(f.hydrocarbon.value(), 0.0);
        assert!(matches!(
            budget_fractions(u(0.0, 0.0), u(1.0, 0.0), u(1.0, 0.0), u(1.0, 0.0), u(1.0, 0.0), u(1.0, 0.0), &cfg()),
            Err(Error::DivisionByZero(_))
        ));
    }

    proptest! {
        #[test]
        fn solvers_invert_forward_model(
            alox in 1e-4f64..5e-2, hc in 1e-4f64..1e-2, ms in 1e-5f64..2e-3,
            t_hf in 0.5f64..2.5, dt in 0.3f64..2.0, t_ox in 1.0f64..4.0, t_hc in 0.1f64..2.0,
        ) {
            let c = cfg();
            let (a, b, un) = forward_model(alox, hc, ms, (t_hf, t_hf + dt, t_ox, t_hc), &c);
            let inputs = BudgetInputs {
                tan_hf: u(a, 0.0), tan_hf_aged: u(b, 0.0), tan_untreated: u(un, 0.0),
                t_hf: u(t_hf, 0.0), t_hf_aged: u(t_hf + dt, 0.0),
                t_untreated_ox: u(t_ox, 0.0), t_hc: u(t_hc, 0.0),
            };
            let r = solve_budget(&inputs, &c).unwrap();
            prop_assert!((r.tan_alox.value.value() / alox - 1.0).abs() < 1e-9);
            prop_assert!((r.tan_ms_sa.value.value() / ms - 1.0).abs() < 1e-8);
            prop_assert!((r.tan_hc.value.value() / hc - 1.0).abs() < 1e-8);
            let f = r.fractions;
            prop_assert!((f.alox.value() + f.hydrocarbon.value() + f.ms_sa.value() - 100.0).abs() < 1e-9);
        }

        #[test]
        fn solvers_homogeneous_in_tangents(k in 0.1f64..10.0) {
            let c = cfg();
            let a = solve_alox(u(1.77e-3, 0.0), u(2.51e-3, 0.0), u(1.9, 0.0), u(3.11, 0.0), &c).unwrap().value.value();
            let ak = solve_alox(u(k * 1.77e-3, 0.0), u(k * 2.51e-3, 0.0), u(1.9, 0.0), u(3.11, 0.0), &c).unwrap().value.value();
            prop_assert!((ak / (k * a) - 1.0).abs() < 1e-12);
            let m = solve_ms_sa(u(1.77e-3, 0.0), u(a, 0.0), u(1.9, 0.0), &c).unwrap().value.value();
            let mk = solve_ms_sa(u(k * 1.77e-3, 0.0), u(k * a, 0.0), u(1.9, 0.0), &c).unwrap().value.value();
            prop_assert!((mk / (k * m) - 1.0).abs() < 1e-9);
            let h = solve_hc(u(3.19e-3, 0.0), u(a, 0.0), u(m, 0.0), u(2.69, 0.0), u(0.52, 0.0), &c).unwrap().value.value();
            let hk = solve_hc(u(k * 3.19e-3, 0.0), u(k * a, 0.0), u(k * m, 0.0), u(2.69, 0.0), u(0.52, 0.0), &c).unwrap().value.value();
            prop_assert!((hk / (k * h) - 1.0).abs() < 1e-9);
        }
    }
}
