//! TOML analysis configuration: parsing, validation and default tracking.

use std::collections::BTreeMap;
use std::path::{Path, PathBuf};

use serde::Deserialize;
use sha2::{Digest, Sha256};

use qlb_core::loss_budget::{ParticipationConfig, DERIVED_R_MA, DERIVED_R_SA};
use qlb_core::qubit_budget::{EdgeCorrelation, JunctionGeometry, QubitGeometry, DEFAULT_EPS_R};
use qlb_core::tls_model::{TlsBounds, DEFAULT_QP_CUTOFF_K};
use qlb_core::xps::{al2p_templates, ComponentTemplate, StrohmeierConstants};
use qlb_core::{constants, UValue};

use crate::error::{CliError, Result};

/// A number or a `{ value, sigma }` table.
#[derive(Debug, Clone, Copy, Deserialize)]
#[serde(untagged)]
enum Quantity {
    Exact(f64),
    Uncertain(UValue),
}

impl Quantity {
    fn get(self) -> UValue {
        match self {
            Quantity::Exact(v) => UValue::exact(v),
            Quantity::Uncertain(u) => u,
        }
    }
}

#[derive(Debug, Deserialize)]
#[serde(deny_unknown_fields)]
struct RawConfig {
    participation: Option<RawParticipation>,
    tls: Option<RawTls>,
    #[serde(default)]
    treatments: BTreeMap<String, RawTreatment>,
    budget: Option<RawBudget>,
    qubit: Option<RawQubit>,
    strohmeier: Option<StrohmeierConstants>,
    xps: Option<RawXps>,
    kinetics: Option<RawKinetics>,
    propagation: Option<RawPropagation>,
}

#[derive(Debug, Deserialize)]
#[serde(deny_unknown_fields)]
struct RawParticipation {
    r_ma: Option<Quantity>,
    r_sa: Option<Quantity>,
    t0: Option<f64>,
}

#[derive(Debug, Deserialize)]
#[serde(deny_unknown_fields)]
struct RawTls {
    f0_hz: Option<f64>,
    qp_cutoff_k: Option<f64>,
    rescale_n_bar: Option<f64>,
    rescale_temperature_k: Option<f64>,
    bounds: Option<TlsBounds>,
    #[serde(default)]
    resonators: Vec<RawResonator>,
}

#[derive(Debug, Deserialize)]
#[serde(deny_unknown_fields)]
struct RawResonator {
    label: String,
    treatment: String,
    p_ms: f64,
    f0_hz: Option<f64>,
    qgrid: PathBuf,
}

#[derive(Debug, Deserialize)]
#[serde(deny_unknown_fields)]
struct RawTreatment {
    t_ox: Quantity,
    t_hc: Option<Quantity>,
    carbon_at_pct: Option<Quantity>,
    tan_delta: Option<Quantity>,
    tan_delta_n1: Option<Quantity>,
    resonators: Option<PathBuf>,
}

#[derive(Debug, Deserialize)]
#[serde(deny_unknown_fields)]
struct RawBudget {
    hf: String,
    hf_aged: String,
    untreated: String,
}

#[derive(Debug, Deserialize)]
#[serde(deny_unknown_fields)]
struct RawQubit {
    p_capacitor: f64,
    p_ms_leads: f64,
    p_ma_leads: f64,
    c_shunt_ff: f64,
    q_measured: Option<Quantity>,
    junction: RawJunction,
    linear: Option<RawTangents>,
    single_photon: Option<RawTangents>,
}

#[derive(Debug, Deserialize)]
#[serde(deny_unknown_fields)]
struct RawJunction {
    width_nm: Quantity,
    length_nm: Quantity,
    barrier_nm: Quantity,
    eps_r: Option<f64>,
    edges: Option<EdgeCorrelation>,
}

#[derive(Debug, Deserialize)]
#[serde(deny_unknown_fields)]
struct RawTangents {
    tan_capacitor: Quantity,
    tan_alox_leads: Option<Quantity>,
    tan_ms_leads: Option<Quantity>,
}

#[derive(Debug, Deserialize)]
#[serde(deny_unknown_fields)]
struct RawXps {
    #[serde(default)]
    spectra: Vec<RawSpectrum>,
    window_ev: Option<(f64, f64)>,
    reference_label: Option<String>,
    reference_ev: Option<f64>,
    centers: Option<RawCenters>,
    templates: Option<Vec<ComponentTemplate>>,
    metal_labels: Option<Vec<String>>,
    shirley_max_iterations: Option<usize>,
}

#[derive(Debug, Deserialize)]
#[serde(deny_unknown_fields)]
struct RawCenters {
    al0: f64,
    al_int: f64,
    al3: f64,
}

#[derive(Debug, Deserialize)]
#[serde(deny_unknown_fields)]
struct RawSpectrum {
    label: String,
    file: PathBuf,
}

#[derive(Debug, Deserialize)]
#[serde(deny_unknown_fields)]
struct RawKinetics {
    file: PathBuf,
}

#[derive(Debug, Deserialize)]
#[serde(deny_unknown_fields)]
struct RawPropagation {
    monte_carlo_samples: usize,
}

#[derive(Debug, Clone)]
pub struct TlsConfig {
    pub qp_cutoff_k: f64,
    pub rescale_n_bar: f64,
    pub rescale_temperature_k: f64,
    pub bounds: TlsBounds,
    pub resonators: Vec<ResonatorSpec>,
}

#[derive(Debug, Clone)]
pub struct ResonatorSpec {
    pub label: String,
    pub treatment: String,
    pub p_ms: f64,
    pub f0_hz: f64,
    pub qgrid: PathBuf,
}

#[derive(Debug, Clone)]
pub struct Treatment {
    pub t_ox: UValue,
    pub t_hc: Option<UValue>,
    pub tan_delta: Option<UValue>,
    pub tan_delta_n1: Option<UValue>,
    pub resonators: Option<PathBuf>,
}

#[derive(Debug, Clone)]
pub struct BudgetRoles {
    pub hf: String,
    pub hf_aged: String,
    pub untreated: String,
}

#[derive(Debug, Clone, Copy)]
pub struct TangentSpec {
    pub tan_capacitor: UValue,
    pub tan_alox_leads: Option<UValue>,
    pub tan_ms_leads: Option<UValue>,
}

#[derive(Debug, Clone)]
pub struct QubitConfig {
    pub geometry: QubitGeometry,
    pub q_measured: Option<UValue>,
    pub linear: Option<TangentSpec>,
    pub single_photon: Option<TangentSpec>,
}

#[derive(Debug, Clone)]
pub struct XpsConfig {
    pub spectra: Vec<(String, PathBuf)>,
    pub window_ev: (f64, f64),
    pub reference: Option<(String, f64)>,
    pub templates: Vec<ComponentTemplate>,
    pub metal_labels: Vec<String>,
    pub shirley_max_iterations: usize,
}

#[derive(Debug, Clone)]
pub struct AnalysisConfig {
    pub source: Option<PathBuf>,
    pub sha256: String,
    pub participation: ParticipationConfig,
    pub tls: Option<TlsConfig>,
    pub treatments: BTreeMap<String, Treatment>,
    pub budget: Option<BudgetRoles>,
    pub qubit: Option<QubitConfig>,
    pub strohmeier: StrohmeierConstants,
    pub xps: Option<XpsConfig>,
    pub kinetics: Option<PathBuf>,
    pub monte_carlo_samples: usize,
    /// Keys whose values were filled in by the program.
    pub defaults_used: Vec<String>,
    /// Values that are derived rather than published.
    pub derived_flags: Vec<String>,
}

fn cfg_err(key: &str, msg: impl std::fmt::Display) -> CliError {
    CliError::Config(format!("{key}: {msg}"))
}

fn check(key: &str, result: qlb_core::Result<()>) -> Result<()> {
    result.map_err(|e| cfg_err(key, e))
}

fn positive(key: &str, v: f64) -> Result<f64> {
    if v > 0.0 && v.is_finite() {
        Ok(v)
    } else {
        Err(cfg_err(key, format!("must be positive, got {v}")))
    }
}

struct Resolver<'a> {
    base: &'a Path,
    defaults: Vec<String>,
}

impl Resolver<'_> {
    fn or_default<T>(&mut self, key: &str, v: Option<T>, default: T) -> T {
        v.unwrap_or_else(|| {
            self.defaults.push(key.to_string());
            default
        })
    }

    fn file(&self, key: &str, p: &Path) -> Result<PathBuf> {
        let full = if p.is_absolute() { p.to_path_buf() } else { self.base.join(p) };
        if !full.is_file() {
            return Err(cfg_err(key, format!("file not found: {}", full.display())));
        }
        Ok(full)
    }
}

impl AnalysisConfig {
    pub fn load(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path)
            .map_err(|e| cfg_err("config", format!("cannot read {}: {e}", path.display())))?;
        let base = path.parent().unwrap_or(Path::new("."));
        let mut cfg = Self::parse(&text, base)?;
        cfg.source = Some(path.to_path_buf());
        Ok(cfg)
    }

    /// Parse config text; relative file paths resolve against `base`.
    pub fn parse(text: &str, base: &Path) -> Result<Self> {
        let value: toml::Table = toml::from_str(text).map_err(|e| CliError::Config(e.to_string()))?;
        let raw: RawConfig = serde_path_to_error::deserialize(toml::Value::Table(value)).map_err(|e| {
            let path = e.path().to_string();
            CliError::Config(if path == "." { e.inner().to_string() } else { format!("{path}: {}", e.inner()) })
        })?;
        let digest = Sha256::digest(text.as_bytes());
        let sha256 = digest.iter().map(|b| format!("{b:02x}")).collect();
        let mut r = Resolver { base, defaults: Vec::new() };

        let participation = {
            let p = raw.participation.as_ref();
            let uses_budget = raw.budget.is_some();
            let track = |key: &str, v: Option<Quantity>, d: f64, r: &mut Resolver| match v {
                Some(q) => q.get(),
                None if uses_budget => r.or_default(key, None, UValue::exact(d)),
                None => UValue::exact(d),
            };
            let r_ma = track("participation.r_ma", p.and_then(|p| p.r_ma), DERIVED_R_MA, &mut r);
            let r_sa = track("participation.r_sa", p.and_then(|p| p.r_sa), DERIVED_R_SA, &mut r);
            let t0 = track("participation.t0", p.and_then(|p| p.t0.map(Quantity::Exact)), constants::DEFAULT_T0_NM, &mut r)
                .value();
            let cfg = ParticipationConfig { r_ma, r_sa, t0 };
            cfg.validate().map_err(|e| CliError::Config(e.to_string().replace("invalid input: ", "")))?;
            cfg
        };
        let mut derived_flags = Vec::new();
        if raw.budget.is_some() {
            if participation.r_ma.value() == DERIVED_R_MA {
                derived_flags.push(format!(
                    "participation.r_ma = {DERIVED_R_MA} is derived by back-solving published budget results, not published"
                ));
            }
            if participation.r_sa.value() == DERIVED_R_SA {
                derived_flags.push(format!(
                    "participation.r_sa = {DERIVED_R_SA} is derived by back-solving published budget results, not published"
                ));
            }
        }

        let mut treatments = BTreeMap::new();
        for (label, t) in &raw.treatments {
            let key = format!("treatments.{label}");
            let t_ox = t.t_ox.get();
            if t_ox.value() < 0.0 {
                return Err(cfg_err(&format!("{key}.t_ox"), "must be non-negative"));
            }
            let t_hc = match (t.t_hc, t.carbon_at_pct) {
                (Some(_), Some(_)) => {
                    return Err(cfg_err(&key, "give either t_hc or carbon_at_pct, not both"));
                }
                (Some(h), None) => Some(h.get()),
                (None, Some(c)) => {
                    let c = c.get();
                    let key = format!("{key}.carbon_at_pct");
                    let value = qlb_core::loss_budget::carbon_thickness(c.value()).map_err(|e| cfg_err(&key, e))?;
                    let per_pct = constants::CARBON_MONOLAYER_NM / constants::CARBON_AT_PCT_PER_MONOLAYER;
                    Some(UValue::new(value, c.sigma() * per_pct).map_err(|e| cfg_err(&key, e))?)
                }
                (None, None) => None,
            };
            let resonators = match &t.resonators {
                Some(p) => Some(r.file(&format!("{key}.resonators"), p)?),
                None => None,
            };
            treatments.insert(
                label.clone(),
                Treatment {
                    t_ox,
                    t_hc,
                    tan_delta: t.tan_delta.map(Quantity::get),
                    tan_delta_n1: t.tan_delta_n1.map(Quantity::get),
                    resonators,
                },
            );
        }

        let tls = match &raw.tls {
            None => None,
            Some(t) => {
                let qp_cutoff_k = r.or_default("tls.qp_cutoff_k", t.qp_cutoff_k, DEFAULT_QP_CUTOFF_K);
                positive("tls.qp_cutoff_k", qp_cutoff_k)?;
                let rescale_n_bar = r.or_default("tls.rescale_n_bar", t.rescale_n_bar, 1.0);
                if !(rescale_n_bar >= 0.0) {
                    return Err(cfg_err("tls.rescale_n_bar", "must be non-negative"));
                }
                let rescale_temperature_k = r.or_default("tls.rescale_temperature_k", t.rescale_temperature_k, 0.010);
                positive("tls.rescale_temperature_k", rescale_temperature_k)?;
                let bounds = r.or_default("tls.bounds", t.bounds, TlsBounds::default());
                check("tls.bounds", bounds.validate())?;
                let mut resonators = Vec::new();
                for (i, res) in t.resonators.iter().enumerate() {
                    let key = format!("tls.resonators[{i}]");
                    let f0_hz = res.f0_hz.or(t.f0_hz).ok_or_else(|| cfg_err("tls.f0_hz", "required for resonator fits"))?;
                    positive(&format!("{key}.f0_hz"), f0_hz)?;
                    positive(&format!("{key}.p_ms"), res.p_ms)?;
                    if !raw.treatments.contains_key(&res.treatment) {
                        return Err(cfg_err(&format!("{key}.treatment"), format!("unknown treatment '{}'", res.treatment)));
                    }
                    resonators.push(ResonatorSpec {
                        label: res.label.clone(),
                        treatment: res.treatment.clone(),
                        p_ms: res.p_ms,
                        f0_hz,
                        qgrid: r.file(&format!("{key}.qgrid"), &res.qgrid)?,
                    });
                }
                Some(TlsConfig { qp_cutoff_k, rescale_n_bar, rescale_temperature_k, bounds, resonators })
            }
        };

        let budget = match &raw.budget {
            None => None,
            Some(b) => {
                for (role, label) in [("hf", &b.hf), ("hf_aged", &b.hf_aged), ("untreated", &b.untreated)] {
                    if !treatments.contains_key(label) {
                        return Err(cfg_err(&format!("budget.{role}"), format!("unknown treatment '{label}'")));
                    }
                }
                if treatments[&b.untreated].t_hc.is_none() {
                    return Err(cfg_err(
                        &format!("treatments.{}.t_hc", b.untreated),
                        "the untreated treatment needs t_hc or carbon_at_pct",
                    ));
                }
                Some(BudgetRoles { hf: b.hf.clone(), hf_aged: b.hf_aged.clone(), untreated: b.untreated.clone() })
            }
        };

        let qubit = match &raw.qubit {
            None => None,
            Some(q) => {
                let j = &q.junction;
                let junction = JunctionGeometry {
                    width: j.width_nm.get(),
                    length: j.length_nm.get(),
                    barrier_thickness: j.barrier_nm.get(),
                    eps_r: r.or_default("qubit.junction.eps_r", j.eps_r, DEFAULT_EPS_R),
                    edges: r.or_default("qubit.junction.edges", j.edges, EdgeCorrelation::Correlated),
                };
                let geometry = QubitGeometry {
                    p_capacitor: q.p_capacitor,
                    p_ms_leads: q.p_ms_leads,
                    p_ma_leads: q.p_ma_leads,
                    c_shunt: q.c_shunt_ff,
                    junction,
                };
                check("qubit", geometry.validate())?;
                let tangents = |t: &Option<RawTangents>| {
                    t.as_ref().map(|t| TangentSpec {
                        tan_capacitor: t.tan_capacitor.get(),
                        tan_alox_leads: t.tan_alox_leads.map(Quantity::get),
                        tan_ms_leads: t.tan_ms_leads.map(Quantity::get),
                    })
                };
                let q_measured = q.q_measured.map(Quantity::get);
                if let Some(qm) = q_measured {
                    positive("qubit.q_measured", qm.value())?;
                }
                Some(QubitConfig {
                    geometry,
                    q_measured,
                    linear: tangents(&q.linear),
                    single_photon: tangents(&q.single_photon),
                })
            }
        };

        let strohmeier = match raw.strohmeier {
            Some(s) => s,
            None if raw.xps.is_some() => {
                r.defaults.push("strohmeier".into());
                StrohmeierConstants::aluminum_literature()
            }
            None => StrohmeierConstants::aluminum_literature(),
        };
        check("strohmeier", strohmeier.validate())?;

        let xps = match &raw.xps {
            None => None,
            Some(x) => {
                let window_ev = r.or_default("xps.window_ev", x.window_ev, (70.0, 80.0));
                if !(window_ev.0 < window_ev.1) {
                    return Err(cfg_err("xps.window_ev", "lower edge must be below the upper edge"));
                }
                let reference_label = r.or_default("xps.reference_label", x.reference_label.clone(), "Al0".into());
                let reference_ev = r.or_default("xps.reference_ev", x.reference_ev, 72.6);
                let templates = match (&x.templates, &x.centers) {
                    (Some(_), Some(_)) => return Err(cfg_err("xps", "give either templates or centers, not both")),
                    (Some(t), None) => t.clone(),
                    (None, Some(c)) => al2p_templates(c.al0, c.al_int, c.al3),
                    (None, None) => {
                        r.defaults.push("xps.centers".into());
                        al2p_templates(72.6, 74.0, 75.6)
                    }
                };
                for (i, t) in templates.iter().enumerate() {
                    check(&format!("xps.templates[{i}]"), t.validate())?;
                }
                let metal_labels = r.or_default("xps.metal_labels", x.metal_labels.clone(), vec!["Al0".to_string()]);
                if !metal_labels.iter().any(|m| templates.iter().any(|t| &t.label == m)) {
                    return Err(cfg_err("xps.metal_labels", "no template carries a metal label"));
                }
                let shirley_max_iterations = r.or_default(
                    "xps.shirley_max_iterations",
                    x.shirley_max_iterations,
                    qlb_core::xps::shirley::DEFAULT_MAX_ITERATIONS,
                );
                let mut spectra = Vec::new();
                for (i, s) in x.spectra.iter().enumerate() {
                    spectra.push((s.label.clone(), r.file(&format!("xps.spectra[{i}].file"), &s.file)?));
                }
                Some(XpsConfig {
                    spectra,
                    window_ev,
                    reference: Some((reference_label, reference_ev)),
                    templates,
                    metal_labels,
                    shirley_max_iterations,
                })
            }
        };

        let kinetics = match &raw.kinetics {
            Some(k) => Some(r.file("kinetics.file", &k.file)?),
            None => None,
        };
        let monte_carlo_samples = raw.propagation.map_or(0, |p| p.monte_carlo_samples);
        if monte_carlo_samples != 0 && monte_carlo_samples < qlb_core::uncert::MIN_MC_SAMPLES {
            return Err(cfg_err(
                "propagation.monte_carlo_samples",
                format!("must be 0 or at least {}", qlb_core::uncert::MIN_MC_SAMPLES),
            ));
        }

        Ok(Self {
            source: None,
            sha256,
            participation,
            tls,
            treatments,
            budget,
            qubit,
            strohmeier,
            xps,
            kinetics,
            monte_carlo_samples,
            defaults_used: r.defaults,
            derived_flags,
        })
    }
}
