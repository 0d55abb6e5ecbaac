//! Tabular plot data derived from a report.

use std::path::{Path, PathBuf};

use serde::Serialize;

use crate::error::{CliError, Result};
use crate::report::Report;

/// Samples of each fitted curve.
pub const CURVE_SAMPLES: usize = 50;

#[derive(Debug, Serialize)]
struct SprRow<'a> {
    treatment: &'a str,
    kind: &'static str,
    p_ms: f64,
    inv_q: f64,
    sigma: f64,
}

#[derive(Debug, Serialize)]
struct KineticsRow {
    kind: &'static str,
    time_hours: f64,
    thickness_nm: f64,
    sigma_nm: f64,
}

fn write_rows<T: Serialize>(path: &Path, rows: &[T]) -> Result<()> {
    let mut w = csv::Writer::from_path(path).map_err(|e| match e.into_kind() {
        csv::ErrorKind::Io(io) => CliError::io(path, io),
        other => CliError::dataset(path, format!("{other:?}")),
    })?;
    for r in rows {
        w.serialize(r).map_err(|e| CliError::dataset(path, e.to_string()))?;
    }
    w.flush().map_err(|e| CliError::io(path, e))
}

/// Write `spr.csv` and `kinetics.csv` for whichever stages are present.
pub fn write_plot_csv(report: &Report, dir: &Path) -> Result<Vec<PathBuf>> {
    let mut written = Vec::new();
    if let Some(entries) = &report.stages.spr_fit {
        let mut rows = Vec::new();
        for e in entries {
            for p in &e.points {
                rows.push(SprRow {
                    treatment: &e.treatment,
                    kind: "point",
                    p_ms: p.p_ms,
                    inv_q: p.inv_q.value(),
                    sigma: p.inv_q.sigma(),
                });
            }
            let top = e.points.iter().map(|p| p.p_ms).fold(0.0, f64::max) * 1.1;
            for i in 0..CURVE_SAMPLES {
                let x = top * i as f64 / (CURVE_SAMPLES - 1) as f64;
                rows.push(SprRow {
                    treatment: &e.treatment,
                    kind: "fit",
                    p_ms: x,
                    inv_q: e.tan_delta.value() * x,
                    sigma: e.tan_delta.sigma() * x,
                });
            }
        }
        let path = dir.join("spr.csv");
        write_rows(&path, &rows)?;
        written.push(path);
    }
    if let Some(k) = &report.stages.kinetics {
        let mut rows: Vec<KineticsRow> = k
            .points
            .iter()
            .map(|p| KineticsRow {
                kind: "point",
                time_hours: p.time_hours,
                thickness_nm: p.thickness_nm.value(),
                sigma_nm: p.thickness_nm.sigma(),
            })
            .collect();
        let top = k.points.iter().map(|p| p.time_hours).fold(0.0, f64::max);
        for i in 0..CURVE_SAMPLES {
            let t = top * i as f64 / (CURVE_SAMPLES - 1) as f64;
            rows.push(KineticsRow { kind: "fit", time_hours: t, thickness_nm: k.fit.evaluate(t), sigma_nm: 0.0 });
        }
        let path = dir.join("kinetics.csv");
        write_rows(&path, &rows)?;
        written.push(path);
    }
    Ok(written)
}
