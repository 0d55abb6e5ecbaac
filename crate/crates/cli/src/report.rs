//! Report document: per-stage results, provenance and warnings.

use std::collections::BTreeMap;
use std::path::Path;

use serde::{Deserialize, Serialize};

use qlb_core::loss_budget::{BudgetInputs, BudgetResult, ParticipationConfig};
use qlb_core::qubit_budget::{BarrierBudget, QubitGeometry, SurfaceFractions, TangentSet};
use qlb_core::spr_regression::SprPoint;
use qlb_core::xps::{ComponentsFit, KineticsFit, StrohmeierConstants};
use qlb_core::UValue;

use crate::error::{CliError, Result};

pub const SCHEMA_VERSION: &str = "1.0.0";

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Report {
    pub schema_version: String,
    pub provenance: Provenance,
    pub stages: Stages,
    pub warnings: Vec<String>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Software {
    pub name: String,
    pub version: String,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Provenance {
    pub software: Software,
    pub config_sha256: String,
    pub seed: u64,
    pub stages_run: Vec<String>,
    pub defaults_used: Vec<String>,
    pub derived_flags: Vec<String>,
    pub constants: BTreeMap<String, f64>,
    pub participation: ParticipationConfig,
    pub strohmeier: StrohmeierConstants,
    pub monte_carlo_samples: usize,
    /// Seconds since the Unix epoch; the only field that varies between runs.
    pub timestamp_unix: u64,
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Stages {
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub tls_fit: Option<Vec<TlsEntry>>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub spr_fit: Option<Vec<SprEntry>>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub budget: Option<BudgetStage>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub qubit: Option<QubitStage>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub xps_fit: Option<Vec<XpsEntry>>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub kinetics: Option<KineticsStage>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct TlsEntry {
    pub label: String,
    pub treatment: String,
    pub p_ms: f64,
    pub f0_hz: f64,
    pub q_tls0: UValue,
    pub d: UValue,
    pub beta1: UValue,
    pub beta2: UValue,
    pub q_other: UValue,
    pub rescaled_n_bar: f64,
    pub rescaled_temperature_k: f64,
    /// Q_TLS at the rescaling point.
    pub q_tls_rescaled: UValue,
    pub chi2: f64,
    pub dof: usize,
    pub retained: usize,
    pub excluded: usize,
    pub iterations: usize,
    pub boundary_active: Vec<String>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SprEntry {
    pub treatment: String,
    pub points: Vec<SprPoint>,
    pub tan_delta: UValue,
    /// Free-intercept diagnostic fit, present with two or more points.
    pub diagnostic_slope: Option<UValue>,
    pub diagnostic_intercept: Option<UValue>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct McCheck {
    pub quantity: String,
    pub first_order: UValue,
    pub monte_carlo: UValue,
    /// First-order sigma over Monte-Carlo sigma.
    pub sigma_ratio: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Ladder {
    /// Where the treatment tangents came from: "config" or "spr-fit".
    pub tangent_source: String,
    pub inputs: BudgetInputs,
    pub result: BudgetResult,
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    pub monte_carlo: Vec<McCheck>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct BudgetStage {
    pub hf: String,
    pub hf_aged: String,
    pub untreated: String,
    /// Interfaces lumped into `tan_ms_sa`: metal-substrate plus substrate-air.
    pub remainder_interfaces: String,
    pub linear: Ladder,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub single_photon: Option<Ladder>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct QubitPrediction {
    pub tangents: TangentSet,
    /// Source of each lead tangent: "config" or "budget".
    pub tangent_sources: BTreeMap<String, String>,
    pub inv_q: UValue,
    pub q: UValue,
    pub fractions: SurfaceFractions,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct BarrierReport {
    pub q_measured: UValue,
    pub regime: String,
    pub budget: BarrierBudget,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct QubitStage {
    pub geometry: QubitGeometry,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub linear: Option<QubitPrediction>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub single_photon: Option<QubitPrediction>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub barrier: Option<BarrierReport>,
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    pub monte_carlo: Vec<McCheck>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ShirleySummary {
    pub low_anchor: f64,
    pub high_anchor: f64,
    pub iterations: usize,
    pub residual: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct XpsEntry {
    pub label: String,
    pub file: String,
    pub energy_shift_ev: f64,
    pub window_ev: (f64, f64),
    pub shirley: ShirleySummary,
    pub fit: ComponentsFit,
    pub i_oxide: UValue,
    pub i_metal: UValue,
    pub thickness_nm: UValue,
    pub strohmeier: StrohmeierConstants,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct KineticsPoint {
    pub time_hours: f64,
    pub thickness_nm: UValue,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct KineticsStage {
    pub file: String,
    pub points: Vec<KineticsPoint>,
    pub fit: KineticsFit,
}

impl Report {
    pub fn to_json(&self) -> String {
        let mut s = serde_json::to_string_pretty(self).expect("report serializes");
        s.push('\n');
        s
    }

    pub fn from_json(text: &str) -> std::result::Result<Self, serde_json::Error> {
        serde_json::from_str(text)
    }

    pub fn load(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path).map_err(|e| CliError::io(path, e))?;
        Self::from_json(&text).map_err(|e| CliError::dataset(path, e.to_string()))
    }

    pub fn write(&self, path: &Path) -> Result<()> {
        std::fs::write(path, self.to_json()).map_err(|e| CliError::io(path, e))
    }
}

/// Schema bundled with the binary.
pub const REPORT_SCHEMA: &str = include_str!("../schema/report.schema.json");
