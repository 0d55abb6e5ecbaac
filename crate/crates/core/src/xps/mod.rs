//! Al2p photoemission analysis: calibration, Shirley background, doublet
//! line-shape fitting, overlayer thickness and oxide growth kinetics.

pub mod components;
pub mod kinetics;
pub mod shirley;
pub mod spectrum;
pub mod strohmeier;
pub mod synth;

pub use components::{
    al2p_templates, fit_components, ComponentFit, ComponentTemplate, ComponentsFit, Doublet, LineShape, PeakComponent,
};
pub use kinetics::{fit_kinetics, KineticsFit};
pub use shirley::{shirley_background, ShirleyBackground, ShirleyOptions};
pub use spectrum::{calibrate_energy, SpectrumMetadata, XpsSpectrum};
pub use strohmeier::{
    intensity_ratio_for_thickness, split_intensities, strohmeier_thickness, thickness_from_fit, StrohmeierConstants,
};
pub use synth::{synthesize_spectrum, BackgroundKind, EnergyGrid, Noise};
