//! Physical constants (CODATA 2018) and fixed conversion factors.

/// Reduced Planck constant, J·s.
pub const HBAR: f64 = 1.054_571_817e-34;
/// Boltzmann constant, J/K.
pub const K_B: f64 = 1.380_649e-23;
/// Vacuum permittivity, F/m.
pub const EPSILON_0: f64 = 8.854_187_812_8e-12;

/// Atomic percent of carbon corresponding to one hydrocarbon monolayer.
pub const CARBON_AT_PCT_PER_MONOLAYER: f64 = 7.6;
/// Thickness of one hydrocarbon monolayer, nm.
pub const CARBON_MONOLAYER_NM: f64 = 0.5;

/// Al2p spin-orbit splitting, eV.
pub const AL2P_SPLITTING_EV: f64 = 0.44;
/// Area ratio of the 3/2 to the 1/2 spin-orbit component.
pub const AL2P_AREA_RATIO: f64 = 2.0;

/// Simulated interface thickness used to normalise oxide and residue layers, nm.
pub const DEFAULT_T0_NM: f64 = 3.0;

/// Named constants table, emitted into report provenance.
pub fn table() -> Vec<(&'static str, f64)> {
    vec![
        ("hbar_J_s", HBAR),
        ("k_B_J_per_K", K_B),
        ("epsilon_0_F_per_m", EPSILON_0),
        ("carbon_at_pct_per_monolayer", CARBON_AT_PCT_PER_MONOLAYER),
        ("carbon_monolayer_nm", CARBON_MONOLAYER_NM),
        ("al2p_splitting_eV", AL2P_SPLITTING_EV),
        ("al2p_area_ratio", AL2P_AREA_RATIO),
        ("t0_nm", DEFAULT_T0_NM),
    ]
}
