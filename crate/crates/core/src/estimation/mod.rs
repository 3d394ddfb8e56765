//! Calibration from price data: moment formulas, method-of-moments fitting, the GBM
//! baseline, and bootstrap Kolmogorov–Smirnov goodness of fit.

mod fit;
mod ks;
mod moments;
mod prices;
mod report;

pub use fit::{
    fit_gbm, fit_method_of_moments, nelder_mead, GbmParams, IntensityMode, MertonFit, Minimum, MomentConfig, MomentFit,
    ReturnSeries, MIN_CALIBRATION_LEN,
};
pub use ks::{bootstrap_ks_test, fitted_path, gbm_cdf, ks_statistic, ks_two_sample, merton_cdf, FittedModel, KsReport, MIN_BOOTSTRAP};
pub use moments::{k_statistics, mean_variance, merton_cumulants, theoretical_mean_return};
pub use prices::{
    aligned_returns, assemble_market, common_jump_split, sample_correlation, Aggregation, JumpSplit, PriceTable,
    EXTREME_MADS,
};
pub use report::{gbm_report, merton_report, FitReport, FittedParams};
