//! Writes the synthetic demo dataset used by `configs/synthetic.toml`.
//!
//! Usage: `cargo run -p qlb-cli --example make_synthetic [OUT_DIR]`
//! (default `data/synthetic`).

use std::error::Error;
use std::path::{Path, PathBuf};

use qlb_core::tls_model::{synthesize_qgrid, TlsParams};
use qlb_core::xps::{
    intensity_ratio_for_thickness, synthesize_spectrum, BackgroundKind, Doublet, EnergyGrid, LineShape, Noise,
    PeakComponent, StrohmeierConstants,
};
use qlb_core::UValue;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Normal};

const F0: f64 = 5.0e9;
const P_MS: [f64; 3] = [1.2e-4, 2.0e-4, 3.2e-4];
/// Linear-absorption tangent per treatment.
const TREATMENTS: [(&str, f64); 3] = [("hf_2h", 1.77e-3), ("hf_90d", 2.51e-3), ("untreated", 3.19e-3)];

fn write_csv(path: &Path, header: &[&str], rows: impl IntoIterator<Item = Vec<f64>>, prefix: Option<&str>) -> Result<(), Box<dyn Error>> {
    let mut w = csv::Writer::from_path(path)?;
    w.write_record(header)?;
    for row in rows {
        let mut rec: Vec<String> = prefix.map(|p| vec![p.to_string()]).unwrap_or_default();
        rec.extend(row.iter().map(|v| format!("{v:e}")));
        w.write_record(&rec)?;
    }
    w.flush()?;
    Ok(())
}

fn qgrids(dir: &Path) -> Result<(), Box<dyn Error>> {
    let n_bars: Vec<f64> = (0..16).map(|i| 10f64.powf(-1.0 + 7.0 * i as f64 / 15.0)).collect();
    let temps: Vec<f64> = (0..8).map(|i| 0.010 + 0.020 * i as f64).collect();
    let mut seed = 100;
    for (label, tan) in TREATMENTS {
        for (i, p) in P_MS.iter().enumerate() {
            let truth = TlsParams {
                q_tls0: UValue::exact(1.0 / (p * tan)),
                d: 1.0e3,
                beta1: 1.2,
                beta2: 0.4,
                q_other: 2.0e7,
                f0: F0,
            };
            let pts = synthesize_qgrid(&truth, &n_bars, &temps, 0.01, seed)?;
            seed += 1;
            let rows = pts.iter().map(|q| vec![q.n_bar, q.temperature, q.q_int.value(), q.q_int.sigma()]);
            write_csv(&dir.join(format!("qgrid_{label}_{i}.csv")), &["n_bar", "temperature_K", "q_int", "sigma"], rows, None)?;
        }
    }
    Ok(())
}

/// Two extra untreated resonators given directly as Q_TLS,0.
fn resonators(dir: &Path) -> Result<(), Box<dyn Error>> {
    let mut rng = ChaCha8Rng::seed_from_u64(7);
    let tan = TREATMENTS[2].1;
    let rows = [1.6e-4, 2.6e-4].map(|p: f64| {
        let q = 1.0 / (p * tan);
        let z: f64 = Normal::new(0.0, 0.02).unwrap().sample(&mut rng);
        vec![p, q * (1.0 + z), 0.02 * q]
    });
    write_csv(&dir.join("resonators_untreated.csv"), &["treatment", "p_ms", "q_tls0", "sigma_q"], rows, Some("untreated"))
}

fn spectra(dir: &Path) -> Result<(), Box<dyn Error>> {
    let c = StrohmeierConstants::aluminum_literature();
    let d2 = Some(Doublet::default());
    let grid = EnergyGrid { lo: 68.0, hi: 82.0, step: 0.05 };
    for (label, d, seed) in [("hf_2h", 1.90, 11), ("untreated", 2.69, 12)] {
        let metal = 1000.0;
        let oxide = intensity_ratio_for_thickness(d, &c)? * metal;
        let peak = |label: &str, shape, center, fwhm, total: f64| PeakComponent {
            label: label.into(),
            shape,
            center,
            fwhm,
            area: total / 1.5,
            doublet: d2,
        };
        let comps = [
            peak("Al0", LineShape::Lorentzian, 72.6, 0.35, metal),
            peak("Al_int", LineShape::Gaussian, 74.0, 1.0, 0.3 * oxide),
            peak("Al3+", LineShape::Gaussian, 75.7, 1.4, 0.7 * oxide),
        ];
        let s = synthesize_spectrum(&comps, BackgroundKind::Shirley { low: 80.0, high: 260.0 }, grid, Noise::Relative { fraction: 0.01 }, seed)?;
        let rows = s.binding_energy().iter().zip(s.intensity()).map(|(e, y)| vec![*e, *y]);
        write_csv(&dir.join(format!("al2p_{label}.csv")), &["binding_energy_eV", "counts"], rows, None)?;
    }
    Ok(())
}

fn kinetics(dir: &Path) -> Result<(), Box<dyn Error>> {
    let (k, tb, b) = (2.3 / 24.0, 24.0, 0.2175);
    let times = [2.0, 4.0, 8.0, 12.0, 16.0, 20.0, 24.0, 48.0, 96.0, 150.0, 240.0, 360.0, 480.0, 600.0];
    let mut rng = ChaCha8Rng::seed_from_u64(13);
    let rows = times.map(|t: f64| {
        let d = if t <= tb { k * t } else { k * tb + b * (t / tb).ln() };
        let z: f64 = Normal::new(0.0, 0.02).unwrap().sample(&mut rng);
        vec![t, d * (1.0 + z), 0.02 * d]
    });
    write_csv(&dir.join("kinetics.csv"), &["time_hours", "thickness_nm", "sigma_nm"], rows, None)
}

fn main() -> Result<(), Box<dyn Error>> {
    let dir = std::env::args().nth(1).map_or_else(|| PathBuf::from("data/synthetic"), PathBuf::from);
    std::fs::create_dir_all(&dir)?;
    qgrids(&dir)?;
    resonators(&dir)?;
    spectra(&dir)?;
    kinetics(&dir)?;
    println!("wrote synthetic dataset to {}", dir.display());
    Ok(())
}
