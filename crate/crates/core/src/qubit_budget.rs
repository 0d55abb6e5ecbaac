//! Transmon quality-factor prediction from interface loss tangents.
//!
//! Surface loss is the sum of the capacitor-pad term and the two junction-lead
//! terms. The tunnel barrier itself is kept out of the surface sum and enters
//! only through a capacitance-weighted term, with the junction modelled as a
//! parallel-plate capacitor.

use serde::{Deserialize, Serialize};

use crate::constants::EPSILON_0;
use crate::error::{Error, Result};
use crate::uncert::{combine_linear, Expression, UValue};

const UNIT_NORMAL: UValue = UValue::standard_normal();

/// Default relative permittivity of the AlOx barrier.
pub const DEFAULT_EPS_R: f64 = 9.0;

/// How the width and length uncertainties of the junction combine.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum EdgeCorrelation {
    /// Both edges move together (one uncertain side length).
    #[default]
    Correlated,
    /// Width and length are independent inputs.
    Independent,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct JunctionGeometry {
    /// nm.
    pub width: UValue,
    /// nm.
    pub length: UValue,
    /// nm.
    pub barrier_thickness: UValue,
    pub eps_r: f64,
    #[serde(default)]
    pub edges: EdgeCorrelation,
}

impl JunctionGeometry {
    pub fn validate(&self) -> Result<()> {
        if !(self.width.value() > 0.0) || !(self.length.value() > 0.0) {
            return Err(Error::invalid("junction width and length must be positive"));
        }
        if self.barrier_thickness.value() < 0.0 {
            return Err(Error::invalid("barrier thickness must be positive"));
        }
        if !(self.eps_r > 0.0) {
            return Err(Error::invalid("eps_r must be positive"));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct QubitGeometry {
    pub p_capacitor: f64,
    pub p_ms_leads: f64,
    pub p_ma_leads: f64,
    /// fF.
    pub c_shunt: f64,
    pub junction: JunctionGeometry,
}

impl QubitGeometry {
    pub fn validate(&self) -> Result<()> {
        for (name, v) in [
            ("p_capacitor", self.p_capacitor),
            ("p_ms_leads", self.p_ms_leads),
            ("p_ma_leads", self.p_ma_leads),
            ("c_shunt", self.c_shunt),
        ] {
            if !(v > 0.0) || !v.is_finite() {
                return Err(Error::invalid(format!("qubit.{name} must be positive")));
            }
        }
        self.junction.validate()
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Regime {
    LinearAbsorption,
    SinglePhoton,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct TangentSet {
    pub tan_capacitor: UValue,
    pub tan_alox_leads: UValue,
    pub tan_ms_leads: UValue,
    pub regime: Regime,
}

impl TangentSet {
    pub fn validate(&self) -> Result<()> {
        if self.tan_capacitor.value() < 0.0
            || self.tan_alox_leads.value() < 0.0
            || self.tan_ms_leads.value() < 0.0
        {
            return Err(Error::invalid("loss tangents must be non-negative"));
        }
        Ok(())
    }

    fn inputs(&self) -> Vec<UValue> {
        vec![self.tan_capacitor, self.tan_alox_leads, self.tan_ms_leads]
    }
}

/// Surface-limited 1/Q.
pub fn predict_inv_q(geom: &QubitGeometry, tangents: &TangentSet) -> Result<UValue> {
    geom.validate()?;
    tangents.validate()?;
    combine_linear(&[
        (geom.p_capacitor, tangents.tan_capacitor),
        (geom.p_ma_leads, tangents.tan_alox_leads),
        (geom.p_ms_leads, tangents.tan_ms_leads),
    ])
}

/// Q = 1/(1/Q) with first-order sigma.
pub fn quality_factor(inv_q: UValue) -> Result<UValue> {
    if inv_q.value() == 0.0 {
        return Err(Error::DivisionByZero("1/Q is zero".into()));
    }
    let q = 1.0 / inv_q.value();
    UValue::new(q, inv_q.sigma() * q * q)
}

/// Q as a function of the three tangents.
pub fn q_expression<'a>(geom: &QubitGeometry, tangents: &TangentSet) -> Expression<'a> {
    let (pc, pa, pm) = (geom.p_capacitor, geom.p_ma_leads, geom.p_ms_leads);
    Expression::new(tangents.inputs(), move |x| 1.0 / (pc * x[0] + pa * x[1] + pm * x[2]))
}

/// Capacitor-pad and junction-lead shares (percent) of the surface loss.
pub fn fraction_expressions<'a>(geom: &QubitGeometry, tangents: &TangentSet) -> [Expression<'a>; 2] {
    let (pc, pa, pm) = (geom.p_capacitor, geom.p_ma_leads, geom.p_ms_leads);
    [
        Expression::new(tangents.inputs(), move |x| {
            100.0 * pc * x[0] / (pc * x[0] + pa * x[1] + pm * x[2])
        }),
        Expression::new(tangents.inputs(), move |x| {
            100.0 * (pa * x[1] + pm * x[2]) / (pc * x[0] + pa * x[1] + pm * x[2])
        }),
    ]
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SurfaceFractions {
    pub capacitor_pct: UValue,
    pub junction_leads_pct: UValue,
}

pub fn surface_fractions(geom: &QubitGeometry, tangents: &TangentSet) -> Result<SurfaceFractions> {
    let total = predict_inv_q(geom, tangents)?;
    if total.value() <= 0.0 {
        return Err(Error::DivisionByZero("total surface loss is zero".into()));
    }
    let [cap, leads] = fraction_expressions(geom, tangents);
    Ok(SurfaceFractions {
        capacitor_pct: cap.first_order()?,
        junction_leads_pct: leads.first_order()?,
    })
}

/// Parallel-plate capacitance (fF) as an expression of the uncertain
/// dimensions. With correlated edges a single unit-normal driver moves width
/// and length together.
pub fn capacitance_expression<'a>(junction: &JunctionGeometry) -> Expression<'a> {
    // nm·nm/nm → 1e-9 m; F → fF is 1e15.
    let k = EPSILON_0 * junction.eps_r * 1e6;
    match junction.edges {
        EdgeCorrelation::Independent => Expression::new(
            vec![junction.width, junction.length, junction.barrier_thickness],
            move |x| k * x[0] * x[1] / x[2],
        ),
        EdgeCorrelation::Correlated => {
            let (w, sw) = (junction.width.value(), junction.width.sigma());
            let (l, sl) = (junction.length.value(), junction.length.sigma());
            Expression::new(
                vec![UNIT_NORMAL, junction.barrier_thickness],
                move |x| k * (w + sw * x[0]) * (l + sl * x[0]) / x[1],
            )
        }
    }
}

/// Junction capacitance in fF.
pub fn junction_capacitance(junction: &JunctionGeometry) -> Result<UValue> {
    junction.validate()?;
    if junction.barrier_thickness.value() == 0.0 {
        return Err(Error::DivisionByZero("barrier thickness is zero".into()));
    }
    capacitance_expression(junction).first_order()
}

pub fn energy_fraction_expression<'a>(c_jj: UValue, c_shunt: f64) -> Expression<'a> {
    Expression::new(vec![c_jj], move |x| x[0] / (x[0] + c_shunt))
}

/// Fraction (0..1) of the mode energy stored in the junction.
pub fn junction_energy_fraction(c_jj: UValue, c_shunt: f64) -> Result<UValue> {
    if !(c_shunt > 0.0) {
        return Err(Error::invalid("c_shunt must be positive"));
    }
    energy_fraction_expression(c_jj, c_shunt).first_order()
}

/// Barrier tangent from a measured Q. Inputs: q_measured, inv_q_surfaces, c_jj.
pub fn barrier_expression<'a>(
    q_measured: UValue,
    inv_q_surfaces: UValue,
    c_jj: UValue,
    c_shunt: f64,
) -> Expression<'a> {
    Expression::new(vec![q_measured, inv_q_surfaces, c_jj], move |x| {
        let f = x[2] / (x[2] + c_shunt);
        (1.0 / x[0] - (1.0 - f) * x[1]) / f
    })
}

/// Energy-fraction-weighted barrier contribution to 1/Q.
pub fn scaled_barrier_expression<'a>(
    q_measured: UValue,
    inv_q_surfaces: UValue,
    c_jj: UValue,
    c_shunt: f64,
) -> Expression<'a> {
    Expression::new(vec![q_measured, inv_q_surfaces, c_jj], move |x| {
        let f = x[2] / (x[2] + c_shunt);
        1.0 / x[0] - (1.0 - f) * x[1]
    })
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct BarrierSolution {
    pub tan_barrier: UValue,
    pub energy_fraction: UValue,
    /// energy_fraction · tan_barrier.
    pub scaled_contribution: UValue,
    /// 1 / scaled_contribution; `None` when the barrier term is not positive.
    pub limiting_q: Option<UValue>,
}

pub fn solve_barrier_tangent(
    q_measured: UValue,
    inv_q_surfaces: UValue,
    c_jj: UValue,
    c_shunt: f64,
) -> Result<BarrierSolution> {
    if !(q_measured.value() > 0.0) {
        return Err(Error::invalid("measured Q must be positive"));
    }
    if !(c_shunt > 0.0) {
        return Err(Error::invalid("c_shunt must be positive"));
    }
    if c_jj.value() == 0.0 {
        return Err(Error::DegenerateSystem("junction capacitance is zero".into()));
    }
    let tan_barrier = barrier_expression(q_measured, inv_q_surfaces, c_jj, c_shunt).first_order()?;
    let scaled = scaled_barrier_expression(q_measured, inv_q_surfaces, c_jj, c_shunt).first_order()?;
    Ok(BarrierSolution {
        tan_barrier,
        energy_fraction: junction_energy_fraction(c_jj, c_shunt)?,
        scaled_contribution: scaled,
        limiting_q: (scaled.value() > 0.0).then(|| quality_factor(scaled)).transpose()?,
    })
}

/// Shares (percent) of the measured 1/Q: capacitor pads, junction leads, barrier.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ThreeWayBudget {
    pub capacitor_pct: UValue,
    pub leads_pct: UValue,
    pub barrier_pct: UValue,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct BarrierBudget {
    pub c_jj: UValue,
    pub inv_q_surfaces: UValue,
    pub solution: BarrierSolution,
    pub shares: ThreeWayBudget,
}

/// Full barrier analysis: junction capacitance, surface prediction, barrier
/// solve and the three-way split of the measured loss.
pub fn barrier_budget(
    geom: &QubitGeometry,
    tangents: &TangentSet,
    q_measured: UValue,
) -> Result<BarrierBudget> {
    let c_jj = junction_capacitance(&geom.junction)?;
    let inv_q_surfaces = predict_inv_q(geom, tangents)?;
    let solution = solve_barrier_tangent(q_measured, inv_q_surfaces, c_jj, geom.c_shunt)?;

    let (pc, pa, pm, cs) = (geom.p_capacitor, geom.p_ma_leads, geom.p_ms_leads, geom.c_shunt);
    let inputs = vec![q_measured, tangents.tan_capacitor, tangents.tan_alox_leads, tangents.tan_ms_leads, c_jj];
    let surface_weight = move |x: &[f64]| cs / (cs + x[4]) * x[0] * 100.0;
    let cap = Expression::new(inputs.clone(), move |x| surface_weight(x) * pc * x[1]);
    let leads = Expression::new(inputs.clone(), move |x| surface_weight(x) * (pa * x[2] + pm * x[3]));
    let barrier = Expression::new(inputs, move |x| {
        100.0 - surface_weight(x) * (pc * x[1] + pa * x[2] + pm * x[3])
    });
    Ok(BarrierBudget {
        c_jj,
        inv_q_surfaces,
        solution,
        shares: ThreeWayBudget {
            capacitor_pct: cap.first_order()?,
            leads_pct: leads.first_order()?,
            barrier_pct: barrier.first_order()?,
        },
    })
}
