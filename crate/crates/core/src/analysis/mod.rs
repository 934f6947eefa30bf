//! Channel statistics from path sets, regression of the LSP model, the
//! resimulation loop and table comparison.

pub mod compare;
pub mod extract;
pub mod fit;
pub mod resim;

pub use compare::{compare, Comparison, ComparisonReport, Tolerances};
pub use extract::{
    angular_spread, angular_spread_of, delay_spread_of, extract, extract_all, k_factor, rms_delay_spread, AngleKind,
    AngularSpreadMethod,
};
pub use fit::{fill_shadow_fading, fit_multilinear, fit_scenario, CovariateRanges, FitResult};
pub use resim::{resimulate, resimulate_link, ResimOptions};
