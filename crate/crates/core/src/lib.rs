//! Multiclass Matthews correlation coefficients with asymptotic inference.
//!
//! Three multiclass MCCs are computed from an `r x r` confusion table:
//! the macro average of one-vs-rest MCCs, the pooled micro average (an
//! affine function of accuracy) and the covariance-form micro average.
//! Each comes with a delta-method variance under multinomial sampling and
//! Wald or Fisher-z intervals; paired designs (two classifiers scored on the
//! same subjects) get intervals for the difference of their metrics. The
//! [`simulation`] module checks interval coverage by Monte Carlo.

pub mod cli;
pub mod error;
mod gradient;
pub mod io;
pub mod metrics;
pub mod normal;
pub mod paired;
pub mod simulation;
pub mod single;
pub mod table;

pub use error::{MccError, Result};
pub use metrics::{binary_mcc, estimate, macro_mcc, micro_mcc, micro_star_mcc};
pub use single::{
    asymptotic_variance, fisher_z_ci, grad_macro, grad_micro, grad_micro_star, single_inference,
    wald_ci, CiMethod, Gradient2, IntervalEstimate,
};
pub use table::{classwise_rates, normalize_counts, ConfusionCounts2, MetricKind, ProbTable2};
pub use paired::{
    diff_g_ci, diff_variance, diff_wald_ci, marginalize, normalize_joint, paired_cov_block,
    paired_inference, JointCounts3, Method, PairedCovBlock, PairedEstimate, ProbTable3,
};
pub use simulation::{
    builtin_scenarios, coverage_report, run_coverage, sample_multinomial, CoverageConfig,
    CoverageResult, DegeneracyPolicy, Scenario,
};
