//! CSV readers for resonator points, Q grids, kinetics series and spectra.

use std::path::Path;

use serde::de::DeserializeOwned;
use serde::Deserialize;

use qlb_core::tls_model::QPoint;
use qlb_core::xps::XpsSpectrum;
use qlb_core::UValue;

use crate::error::{CliError, Result};

#[derive(Debug, Clone, Deserialize)]
pub struct ResonatorRow {
    pub treatment: String,
    pub p_ms: f64,
    pub q_tls0: f64,
    pub sigma_q: f64,
}

#[derive(Debug, Deserialize)]
struct QGridRow {
    n_bar: f64,
    #[serde(rename = "temperature_K")]
    temperature_k: f64,
    q_int: f64,
    sigma: f64,
}

#[derive(Debug, Deserialize)]
struct KineticsRow {
    time_hours: f64,
    thickness_nm: f64,
    sigma_nm: f64,
}

#[derive(Debug, Deserialize)]
struct SpectrumRow {
    #[serde(rename = "binding_energy_eV")]
    binding_energy_ev: f64,
    counts: f64,
}

fn read_rows<T: DeserializeOwned>(path: &Path, required: &[&str]) -> Result<Vec<T>> {
    let file = std::fs::File::open(path).map_err(|e| CliError::io(path, e))?;
    let mut reader = csv::ReaderBuilder::new().trim(csv::Trim::All).comment(Some(b'#')).from_reader(file);
    let headers = reader.headers().map_err(|e| CliError::dataset(path, e.to_string()))?.clone();
    let missing: Vec<&str> = required.iter().copied().filter(|h| !headers.iter().any(|c| c == *h)).collect();
    if !missing.is_empty() {
        return Err(CliError::dataset(path, format!("missing required columns: {}", missing.join(", "))));
    }
    let mut rows = Vec::new();
    for (i, record) in reader.deserialize().enumerate() {
        rows.push(record.map_err(|e: csv::Error| CliError::dataset(path, format!("row {}: {e}", i + 1)))?);
    }
    Ok(rows)
}

fn uvalue(path: &Path, row: usize, value: f64, sigma: f64) -> Result<UValue> {
    UValue::new(value, sigma).map_err(|e| CliError::dataset(path, format!("row {row}: {e}")))
}

pub fn read_resonators(path: &Path) -> Result<Vec<ResonatorRow>> {
    let rows: Vec<ResonatorRow> = read_rows(path, &["treatment", "p_ms", "q_tls0", "sigma_q"])?;
    if rows.is_empty() {
        return Err(CliError::dataset(path, "no resonator rows"));
    }
    Ok(rows)
}

pub fn read_qgrid(path: &Path) -> Result<Vec<QPoint>> {
    let rows: Vec<QGridRow> = read_rows(path, &["n_bar", "temperature_K", "q_int", "sigma"])?;
    if rows.is_empty() {
        return Err(CliError::dataset(path, "no Q-grid rows"));
    }
    rows.iter()
        .enumerate()
        .map(|(i, r)| {
            Ok(QPoint { n_bar: r.n_bar, temperature: r.temperature_k, q_int: uvalue(path, i + 1, r.q_int, r.sigma)? })
        })
        .collect()
}

pub fn read_kinetics(path: &Path) -> Result<(Vec<f64>, Vec<UValue>)> {
    let rows: Vec<KineticsRow> = read_rows(path, &["time_hours", "thickness_nm", "sigma_nm"])?;
    let mut times = Vec::with_capacity(rows.len());
    let mut thickness = Vec::with_capacity(rows.len());
    for (i, r) in rows.iter().enumerate() {
        times.push(r.time_hours);
        thickness.push(uvalue(path, i + 1, r.thickness_nm, r.sigma_nm)?);
    }
    Ok((times, thickness))
}

pub fn read_spectrum(path: &Path) -> Result<XpsSpectrum> {
    let rows: Vec<SpectrumRow> = read_rows(path, &["binding_energy_eV", "counts"])?;
    if rows.is_empty() {
        return Err(CliError::dataset(path, "spectrum is empty"));
    }
    let (be, counts) = rows.iter().map(|r| (r.binding_energy_ev, r.counts)).unzip();
    XpsSpectrum::new(be, counts).map_err(|e| CliError::dataset(path, e.to_string()))
}
