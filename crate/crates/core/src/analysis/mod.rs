//! Error norms, correlation diagnostics and bound calculators.

pub mod bounds;
pub mod correlation;
pub mod norm;

pub use bounds::{
    minor_inequality_holds, error_bound_shape, bias_bound, BoundOptions, BoundReport, HypothesisFlags,
    InnerExponent,
};
pub use correlation::{
    block_conditional_measure, block_corr_measure, conditional_measure, corr_coefficient,
    corr_measure, CorrReport,
};
pub use norm::{
    bias_profile, monte_carlo_errors, rms_norm_estimate, spatial_spread, window_average,
    ErrorReport, LocalMeasure,
};
