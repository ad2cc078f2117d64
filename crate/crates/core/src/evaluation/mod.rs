//! Splits, cross-validation, error metrics, baselines, significance tests,
//! receptive-field characterization and the report bundle.

mod evaluate;
mod metrics;
mod receptive;
mod report;
mod split;
pub mod stats;

pub use evaluate::{
    cross_validate, evaluate, test_metrics, Comparison, CrossValidation, CvSummary, EvalReport, FoldResult, Summary,
    TestMetrics, NET_NAMES,
};
pub use metrics::{
    error_vs_force_profile, localization_error, rg_force_baseline, rg_loc_baseline, ErrorMap, ErrorProfile, ProfileBin,
    PROFILE_RANGE_N,
};
pub use receptive::{receptive_field_report, ReceptiveFieldReport};
pub use report::{write_receptive, write_report};
pub use split::{make_split, SplitPlan};
pub use stats::{cohens_d, linear_fit, median_iqr, percentile, wilcoxon_signed_rank, LinearFit, WilcoxonResult};
