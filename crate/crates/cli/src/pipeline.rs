//! Stage orchestration: runs the requested stages and their prerequisites,
//! then assembles one report.

use std::collections::BTreeMap;
use std::time::{SystemTime, UNIX_EPOCH};

use qlb_core::loss_budget::{self, BudgetInputs};
use qlb_core::qubit_budget::{self, Regime, TangentSet};
use qlb_core::spr_regression::{fit_through_origin, intercept_diagnostic, SprPoint};
use qlb_core::tls_model::{fit_tls, rescale_q_tls0, TlsParams};
use qlb_core::uncert::Expression;
use qlb_core::xps::{
    calibrate_energy, fit_components, fit_kinetics, shirley_background, split_intensities, strohmeier_thickness,
    ShirleyOptions,
};
use qlb_core::{constants, UValue};

use crate::config::{AnalysisConfig, TangentSpec};
use crate::error::{CliError, Result, StageContext};
use crate::ingest;
use crate::report::*;

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub enum Stage {
    TlsFit,
    SprFit,
    Budget,
    Qubit,
    XpsFit,
    Kinetics,
}

impl Stage {
    pub const ALL: [Stage; 6] = [Stage::TlsFit, Stage::SprFit, Stage::Budget, Stage::Qubit, Stage::XpsFit, Stage::Kinetics];

    pub fn name(self) -> &'static str {
        match self {
            Stage::TlsFit => "tls-fit",
            Stage::SprFit => "spr-fit",
            Stage::Budget => "budget",
            Stage::Qubit => "qubit",
            Stage::XpsFit => "xps-fit",
            Stage::Kinetics => "kinetics",
        }
    }
}

pub struct Pipeline<'a> {
    config: &'a AnalysisConfig,
    seed: u64,
    stages: Stages,
    warnings: Vec<String>,
    ran: Vec<Stage>,
}

fn file_name(path: &std::path::Path) -> String {
    path.file_name().map_or_else(|| path.display().to_string(), |n| n.to_string_lossy().into_owned())
}

fn sigma_of(cov: &[Vec<f64>], i: usize) -> f64 {
    cov.get(i).and_then(|r| r.get(i)).map_or(0.0, |v| v.max(0.0).sqrt())
}

fn timestamp() -> u64 {
    if let Some(v) = std::env::var("SOURCE_DATE_EPOCH").ok().and_then(|s| s.trim().parse().ok()) {
        return v;
    }
    SystemTime::now().duration_since(UNIX_EPOCH).map_or(0, |d| d.as_secs())
}

impl<'a> Pipeline<'a> {
    pub fn new(config: &'a AnalysisConfig, seed: u64) -> Self {
        Self { config, seed, stages: Stages::default(), warnings: Vec::new(), ran: Vec::new() }
    }

    /// Stages with enough configuration to run.
    pub fn configured_stages(config: &AnalysisConfig) -> Vec<Stage> {
        let mut out = Vec::new();
        if config.tls.as_ref().is_some_and(|t| !t.resonators.is_empty()) {
            out.push(Stage::TlsFit);
        }
        if config.tls.as_ref().is_some_and(|t| !t.resonators.is_empty())
            || config.treatments.values().any(|t| t.resonators.is_some())
        {
            out.push(Stage::SprFit);
        }
        if config.budget.is_some() {
            out.push(Stage::Budget);
        }
        if config.qubit.is_some() {
            out.push(Stage::Qubit);
        }
        if config.xps.is_some() {
            out.push(Stage::XpsFit);
        }
        if config.kinetics.is_some() {
            out.push(Stage::Kinetics);
        }
        out
    }

    /// Run `requested` plus whatever they depend on, in pipeline order.
    pub fn run(mut self, requested: &[Stage]) -> Result<Report> {
        for &stage in requested {
            self.ensure(stage)?;
        }
        Ok(self.finish())
    }

    fn ensure(&mut self, stage: Stage) -> Result<()> {
        if self.ran.contains(&stage) {
            return Ok(());
        }
        match stage {
            Stage::TlsFit => self.tls_fit()?,
            Stage::SprFit => {
                if self.config.tls.as_ref().is_some_and(|t| !t.resonators.is_empty()) {
                    self.ensure(Stage::TlsFit)?;
                }
                self.spr_fit()?
            }
            Stage::Budget => {
                if self.budget_needs_spr() {
                    self.ensure(Stage::SprFit)?;
                }
                self.budget()?
            }
            Stage::Qubit => {
                if self.qubit_needs_budget() {
                    self.ensure(Stage::Budget)?;
                }
                self.qubit()?
            }
            Stage::XpsFit => self.xps_fit()?,
            Stage::Kinetics => self.kinetics()?,
        }
        self.ran.push(stage);
        Ok(())
    }

    fn finish(mut self) -> Report {
        let cfg = self.config;
        self.ran.sort();
        Report {
            schema_version: SCHEMA_VERSION.into(),
            provenance: Provenance {
                software: Software { name: env!("CARGO_PKG_NAME").into(), version: env!("CARGO_PKG_VERSION").into() },
                config_sha256: cfg.sha256.clone(),
                seed: self.seed,
                stages_run: self.ran.iter().map(|s| s.name().to_string()).collect(),
                defaults_used: cfg.defaults_used.clone(),
                derived_flags: cfg.derived_flags.clone(),
                constants: constants::table().into_iter().map(|(k, v)| (k.to_string(), v)).collect(),
                participation: cfg.participation,
                strohmeier: cfg.strohmeier,
                monte_carlo_samples: cfg.monte_carlo_samples,
                timestamp_unix: timestamp(),
            },
            stages: self.stages,
            warnings: self.warnings,
        }
    }

    fn tls_fit(&mut self) -> Result<()> {
        const STAGE: &str = "tls-fit";
        let tls = self
            .config
            .tls
            .as_ref()
            .filter(|t| !t.resonators.is_empty())
            .ok_or_else(|| CliError::Config("tls.resonators: the tls-fit stage needs at least one resonator".into()))?;
        let grids = tls
            .resonators
            .iter()
            .map(|r| ingest::read_qgrid(&r.qgrid))
            .collect::<Result<Vec<_>>>()?;
        // Resonators are independent; fit them on scoped threads.
        let fits: Vec<Result<TlsEntry>> = std::thread::scope(|s| {
            let handles: Vec<_> = tls
                .resonators
                .iter()
                .zip(&grids)
                .map(|(res, points)| {
                    s.spawn(move || {
                        let input = res.qgrid.display().to_string();
                        let init = TlsParams::initial_guess(points, res.f0_hz);
                        let fit = fit_tls(points, res.f0_hz, &init, &tls.bounds, tls.qp_cutoff_k).stage_input(STAGE, &input)?;
                        let rescaled = rescale_q_tls0(&fit.params, tls.rescale_n_bar, tls.rescale_temperature_k)
                            .stage_input(STAGE, &input)?;
                        let c = &fit.covariance;
                        let p = &fit.params;
                        let u = |v: f64, i: usize| UValue::new(v, sigma_of(c, i)).stage_input(STAGE, &input);
                        Ok(TlsEntry {
                            label: res.label.clone(),
                            treatment: res.treatment.clone(),
                            p_ms: res.p_ms,
                            f0_hz: res.f0_hz,
                            q_tls0: p.q_tls0,
                            d: u(p.d, 1)?,
                            beta1: u(p.beta1, 2)?,
                            beta2: u(p.beta2, 3)?,
                            q_other: u(p.q_other, 4)?,
                            rescaled_n_bar: tls.rescale_n_bar,
                            rescaled_temperature_k: tls.rescale_temperature_k,
                            q_tls_rescaled: rescaled,
                            chi2: fit.chi2,
                            dof: fit.dof,
                            retained: fit.retained,
                            excluded: fit.excluded,
                            iterations: fit.iterations,
                            boundary_active: fit.boundary_active,
                        })
                    })
                })
                .collect();
            handles.into_iter().map(|h| h.join().expect("fit thread panicked")).collect()
        });
        let mut entries = Vec::with_capacity(fits.len());
        for fit in fits {
            let e = fit?;
            for name in &e.boundary_active {
                self.warnings.push(format!("tls-fit {}: {name} finished on a bound", e.label));
            }
            entries.push(e);
        }
        self.stages.tls_fit = Some(entries);
        Ok(())
    }

    fn spr_fit(&mut self) -> Result<()> {
        const STAGE: &str = "spr-fit";
        let mut groups: BTreeMap<String, Vec<SprPoint>> = BTreeMap::new();
        for (label, t) in &self.config.treatments {
            if let Some(path) = &t.resonators {
                for (i, row) in ingest::read_resonators(path)?.iter().enumerate() {
                    if !self.config.treatments.contains_key(&row.treatment) {
                        return Err(CliError::dataset(
                            path,
                            format!("row {}: unknown treatment '{}'", i + 1, row.treatment),
                        ));
                    }
                    let q = UValue::new(row.q_tls0, row.sigma_q)
                        .and_then(|q| SprPoint::from_q(row.p_ms, q))
                        .map_err(|e| CliError::dataset(path, format!("row {}: {e}", i + 1)))?;
                    groups.entry(row.treatment.clone()).or_default().push(q);
                }
                groups.entry(label.clone()).or_default();
            }
        }
        if let Some(entries) = &self.stages.tls_fit {
            for e in entries {
                let point = SprPoint::from_q(e.p_ms, e.q_tls0).stage_input(STAGE, &e.label)?;
                groups.entry(e.treatment.clone()).or_default().push(point);
            }
        }
        if groups.is_empty() {
            return Err(CliError::Config(
                "spr-fit needs treatments.<label>.resonators files or tls.resonators".into(),
            ));
        }
        let mut out = Vec::new();
        for (treatment, points) in groups {
            if points.is_empty() {
                continue;
            }
            let tan_delta = fit_through_origin(&points).stage_input(STAGE, &treatment)?;
            let (slope, intercept) = match intercept_diagnostic(&points) {
                Ok(d) => (Some(d.slope), Some(d.intercept)),
                Err(_) => (None, None),
            };
            out.push(SprEntry { treatment, points, tan_delta, diagnostic_slope: slope, diagnostic_intercept: intercept });
        }
        self.stages.spr_fit = Some(out);
        Ok(())
    }

    fn budget_needs_spr(&self) -> bool {
        let Some(roles) = &self.config.budget else { return false };
        [&roles.hf, &roles.hf_aged, &roles.untreated]
            .iter()
            .any(|l| self.config.treatments[*l as &String].tan_delta.is_none())
    }

    fn fitted_tangent(&self, label: &str) -> Option<UValue> {
        self.stages.spr_fit.as_ref()?.iter().find(|e| e.treatment == label).map(|e| e.tan_delta)
    }

    fn budget(&mut self) -> Result<()> {
        const STAGE: &str = "budget";
        let cfg = self.config;
        let roles = cfg
            .budget
            .as_ref()
            .ok_or_else(|| CliError::Config("budget: section required for the budget stage".into()))?;
        let t = |l: &String| &cfg.treatments[l];
        let mut source = "config";
        let mut linear_tan = Vec::new();
        for label in [&roles.hf, &roles.hf_aged, &roles.untreated] {
            let v = match t(label).tan_delta {
                Some(v) => v,
                None => {
                    source = "spr-fit";
                    self.fitted_tangent(label).ok_or_else(|| {
                        CliError::Config(format!(
                            "treatments.{label}.tan_delta: not given and no resonator data for this treatment"
                        ))
                    })?
                }
            };
            linear_tan.push(v);
        }
        let t_hc = t(&roles.untreated).t_hc.expect("checked at load");
        let inputs_for = |tans: &[UValue]| BudgetInputs {
            tan_hf: tans[0],
            tan_hf_aged: tans[1],
            tan_untreated: tans[2],
            t_hf: t(&roles.hf).t_ox,
            t_hf_aged: t(&roles.hf_aged).t_ox,
            t_untreated_ox: t(&roles.untreated).t_ox,
            t_hc,
        };
        let linear = self.ladder(STAGE, "linear", source, inputs_for(&linear_tan))?;
        let n1: Option<Vec<UValue>> =
            [&roles.hf, &roles.hf_aged, &roles.untreated].iter().map(|l| t(l).tan_delta_n1).collect();
        let single_photon = match n1 {
            Some(tans) => Some(self.ladder(STAGE, "single-photon", "config", inputs_for(&tans))?),
            None => None,
        };
        self.stages.budget = Some(BudgetStage {
            hf: roles.hf.clone(),
            hf_aged: roles.hf_aged.clone(),
            untreated: roles.untreated.clone(),
            remainder_interfaces: "MS+SA".to_owned(),
            linear,
            single_photon,
        });
        Ok(())
    }

    fn ladder(&mut self, stage: &'static str, name: &str, source: &str, inputs: BudgetInputs) -> Result<Ladder> {
        let p = &self.config.participation;
        let result = loss_budget::solve_budget(&inputs, p).stage_input(stage, name)?;
        for w in result.warnings() {
            self.warnings.push(format!("budget {name}: {w}"));
        }
        let mut monte_carlo = Vec::new();
        if self.config.monte_carlo_samples > 0 {
            let i = &inputs;
            let checks = [
                ("tan_alox", loss_budget::alox_expression(i.tan_hf, i.tan_hf_aged, i.t_hf, i.t_hf_aged, p)),
                ("tan_ms_sa", loss_budget::ms_sa_expression(i.tan_hf, result.tan_alox.value, i.t_hf, p)),
                (
                    "tan_hc",
                    loss_budget::hc_expression(
                        i.tan_untreated,
                        result.tan_alox.value,
                        result.tan_ms_sa.value,
                        i.t_untreated_ox,
                        i.t_hc,
                        p,
                    ),
                ),
            ];
            for (q, e) in checks {
                monte_carlo.push(self.mc_check(stage, &format!("{name}.{q}"), &e)?);
            }
        }
        Ok(Ladder { tangent_source: source.into(), inputs, result, monte_carlo })
    }

    fn mc_check(&self, stage: &'static str, quantity: &str, e: &Expression) -> Result<McCheck> {
        let first_order = e.first_order().stage_input(stage, quantity)?;
        let monte_carlo = e.monte_carlo(self.config.monte_carlo_samples, self.seed).stage_input(stage, quantity)?;
        let sigma_ratio = if monte_carlo.sigma() > 0.0 { first_order.sigma() / monte_carlo.sigma() } else { 1.0 };
        Ok(McCheck { quantity: quantity.into(), first_order, monte_carlo, sigma_ratio })
    }

    fn qubit_needs_budget(&self) -> bool {
        let Some(q) = &self.config.qubit else { return false };
        [q.linear, q.single_photon]
            .iter()
            .flatten()
            .any(|t| t.tan_alox_leads.is_none() || t.tan_ms_leads.is_none())
    }

    fn tangents(&self, spec: &TangentSpec, regime: Regime) -> Result<(TangentSet, BTreeMap<String, String>)> {
        let ladder = self.stages.budget.as_ref().and_then(|b| match regime {
            Regime::LinearAbsorption => Some(&b.linear),
            Regime::SinglePhoton => b.single_photon.as_ref(),
        });
        let key = match regime {
            Regime::LinearAbsorption => "linear",
            Regime::SinglePhoton => "single_photon",
        };
        let mut sources = BTreeMap::new();
        let mut pick = |name: &str, given: Option<UValue>, from_budget: Option<UValue>| -> Result<UValue> {
            match (given, from_budget) {
                (Some(v), _) => {
                    sources.insert(name.to_string(), "config".to_string());
                    Ok(v)
                }
                (None, Some(v)) => {
                    sources.insert(name.to_string(), "budget".to_string());
                    Ok(v)
                }
                (None, None) => Err(CliError::Config(format!(
                    "qubit.{key}.{name}: not given and no matching budget ladder"
                ))),
            }
        };
        let tan_alox_leads = pick("tan_alox_leads", spec.tan_alox_leads, ladder.map(|l| l.result.tan_alox.value))?;
        let tan_ms_leads = pick("tan_ms_leads", spec.tan_ms_leads, ladder.map(|l| l.result.tan_ms_sa.value))?;
        Ok((TangentSet { tan_capacitor: spec.tan_capacitor, tan_alox_leads, tan_ms_leads, regime }, sources))
    }

    fn qubit(&mut self) -> Result<()> {
        const STAGE: &str = "qubit";
        let q = self
            .config
            .qubit
            .as_ref()
            .ok_or_else(|| CliError::Config("qubit: section required for the qubit stage".into()))?;
        let geom = q.geometry;
        let predict = |spec: Option<TangentSpec>, regime: Regime, me: &Self| -> Result<Option<QubitPrediction>> {
            let Some(spec) = spec else { return Ok(None) };
            let (tangents, tangent_sources) = me.tangents(&spec, regime)?;
            let inv_q = qubit_budget::predict_inv_q(&geom, &tangents).stage(STAGE)?;
            let qf = qubit_budget::quality_factor(inv_q).stage(STAGE)?;
            let fractions = qubit_budget::surface_fractions(&geom, &tangents).stage(STAGE)?;
            Ok(Some(QubitPrediction { tangents, tangent_sources, inv_q, q: qf, fractions }))
        };
        let linear = predict(q.linear, Regime::LinearAbsorption, self)?;
        let single_photon = predict(q.single_photon, Regime::SinglePhoton, self)?;

        let barrier_tangents = single_photon.as_ref().or(linear.as_ref()).map(|p| p.tangents);
        let barrier = match (q.q_measured, barrier_tangents) {
            (Some(qm), Some(t)) => {
                let budget = qubit_budget::barrier_budget(&geom, &t, qm).stage_input(STAGE, "barrier")?;
                if budget.solution.tan_barrier.value() < 0.0 {
                    self.warnings.push(format!(
                        "qubit barrier: negative barrier tangent ({:e}); surfaces over-explain the measured loss",
                        budget.solution.tan_barrier.value()
                    ));
                }
                let regime = match t.regime {
                    Regime::LinearAbsorption => "linear-absorption",
                    Regime::SinglePhoton => "single-photon",
                };
                Some(BarrierReport { q_measured: qm, regime: regime.into(), budget })
            }
            (Some(_), None) => {
                return Err(CliError::Config("qubit.q_measured: needs a linear or single_photon tangent set".into()));
            }
            (None, _) => None,
        };

        let mut monte_carlo = Vec::new();
        if self.config.monte_carlo_samples > 0 {
            for (name, p) in [("linear", &linear), ("single_photon", &single_photon)] {
                if let Some(p) = p {
                    monte_carlo.push(self.mc_check(STAGE, &format!("{name}.q"), &qubit_budget::q_expression(&geom, &p.tangents))?);
                }
            }
            monte_carlo.push(self.mc_check(STAGE, "c_jj", &qubit_budget::capacitance_expression(&geom.junction))?);
            if let Some(b) = &barrier {
                let bb = &b.budget;
                let e = qubit_budget::barrier_expression(b.q_measured, bb.inv_q_surfaces, bb.c_jj, geom.c_shunt);
                monte_carlo.push(self.mc_check(STAGE, "tan_barrier", &e)?);
            }
        }
        self.stages.qubit = Some(QubitStage { geometry: geom, linear, single_photon, barrier, monte_carlo });
        Ok(())
    }

    fn xps_fit(&mut self) -> Result<()> {
        const STAGE: &str = "xps-fit";
        let x = self
            .config
            .xps
            .as_ref()
            .ok_or_else(|| CliError::Config("xps: section required for the xps-fit stage".into()))?;
        if x.spectra.is_empty() {
            return Err(CliError::Config("xps.spectra: the xps-fit stage needs at least one spectrum".into()));
        }
        let strohmeier = self.config.strohmeier;
        let metal: Vec<&str> = x.metal_labels.iter().map(String::as_str).collect();
        let spectra = x
            .spectra
            .iter()
            .map(|(_, path)| ingest::read_spectrum(path))
            .collect::<Result<Vec<_>>>()?;
        let results: Vec<Result<XpsEntry>> = std::thread::scope(|s| {
            let handles: Vec<_> = x
                .spectra
                .iter()
                .zip(spectra)
                .map(|((label, path), raw)| {
                    let metal = &metal;
                    s.spawn(move || {
                        let input = path.display().to_string();
                        let spectrum = match &x.reference {
                            Some((name, energy)) => calibrate_energy(&raw, name, *energy).stage_input(STAGE, &input)?,
                            None => raw,
                        };
                        let opts = ShirleyOptions { max_iterations: x.shirley_max_iterations, ..ShirleyOptions::default() };
                        let bg = shirley_background(&spectrum, x.window_ev.0, x.window_ev.1, &opts)
                            .stage_input(STAGE, &input)?;
                        let fit = fit_components(&spectrum, &bg, &x.templates).stage_input(STAGE, &input)?;
                        let (i_ox, i_m) = split_intensities(&fit, metal).stage_input(STAGE, &input)?;
                        let thickness = strohmeier_thickness(i_ox, i_m, &strohmeier).stage_input(STAGE, &input)?;
                        Ok(XpsEntry {
                            label: label.clone(),
                            file: file_name(path),
                            energy_shift_ev: spectrum.metadata.energy_shift,
                            window_ev: x.window_ev,
                            shirley: ShirleySummary {
                                low_anchor: bg.low_anchor,
                                high_anchor: bg.high_anchor,
                                iterations: bg.iterations,
                                residual: bg.residual,
                            },
                            fit,
                            i_oxide: i_ox,
                            i_metal: i_m,
                            thickness_nm: thickness,
                            strohmeier,
                        })
                    })
                })
                .collect();
            handles.into_iter().map(|h| h.join().expect("xps thread panicked")).collect()
        });
        let mut entries = Vec::new();
        for r in results {
            let e = r?;
            for w in e.fit.warnings() {
                self.warnings.push(format!("xps-fit {}: {w}", e.label));
            }
            entries.push(e);
        }
        self.stages.xps_fit = Some(entries);
        Ok(())
    }

    fn kinetics(&mut self) -> Result<()> {
        const STAGE: &str = "kinetics";
        let path = self
            .config
            .kinetics
            .as_ref()
            .ok_or_else(|| CliError::Config("kinetics: section required for the kinetics stage".into()))?;
        let (times, thickness) = ingest::read_kinetics(path)?;
        let fit = fit_kinetics(&times, &thickness).stage_input(STAGE, &path.display().to_string())?;
        if fit.log_degenerate {
            self.warnings.push("kinetics: no logarithmic regime found; growth is linear over the data".into());
        }
        let points = times
            .iter()
            .zip(&thickness)
            .map(|(&t, &d)| KineticsPoint { time_hours: t, thickness_nm: d })
            .collect();
        self.stages.kinetics = Some(KineticsStage { file: file_name(path), points, fit });
        Ok(())
    }
}
