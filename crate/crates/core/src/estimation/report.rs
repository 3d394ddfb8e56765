use serde::Serialize;

use crate::error::Result;
use crate::model::MarketParams;

use super::fit::{fit_gbm, fit_method_of_moments, GbmParams, MomentConfig, ReturnSeries};
use super::ks::{bootstrap_ks_test, FittedModel};
use super::moments::k_statistics;

#[derive(Debug, Clone, PartialEq, Serialize)]
#[serde(untagged)]
pub enum FittedParams {
    Merton(MarketParams),
    Gbm(GbmParams),
}

/// Calibrated parameters (per observation interval) with goodness of fit.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct FitReport {
    pub asset: String,
    pub model: String,
    pub params: FittedParams,
    pub period_length: f64,
    pub ks_stat: f64,
    pub p_value: f64,
    pub n_boot: usize,
    /// `sample − model` cumulants of orders 1–4.
    pub moment_residuals: Vec<f64>,
    pub converged: bool,
    pub iterations: usize,
}

/// Method-of-moments Merton fit plus its bootstrap KS test; also returns the fitted model.
pub fn merton_report(series: &ReturnSeries, cfg: &MomentConfig, n_boot: usize, seed: u64) -> Result<(FitReport, FittedModel)> {
    let fit = fit_method_of_moments(series, cfg)?;
    let model = FittedModel::Merton(fit.params, *cfg);
    let ks = bootstrap_ks_test(&series.log_returns, &model, n_boot, seed)?;
    let report = FitReport {
        asset: series.asset.clone(),
        model: ks.model,
        params: FittedParams::Merton(fit.params.to_market()),
        period_length: series.period_length,
        ks_stat: ks.statistic,
        p_value: ks.p_value,
        n_boot,
        moment_residuals: fit.residuals.to_vec(),
        converged: fit.converged,
        iterations: fit.iterations,
    };
    Ok((report, model))
}

pub fn gbm_report(series: &ReturnSeries, n_boot: usize, seed: u64) -> Result<(FitReport, FittedModel)> {
    let g = fit_gbm(&series.log_returns)?;
    let model = FittedModel::Gbm(g);
    let ks = bootstrap_ks_test(&series.log_returns, &model, n_boot, seed)?;
    let k = k_statistics(&series.log_returns)?;
    let model_k = [g.mean_log_return(), g.gamma * g.gamma, 0.0, 0.0];
    let report = FitReport {
        asset: series.asset.clone(),
        model: ks.model,
        params: FittedParams::Gbm(g),
        period_length: series.period_length,
        ks_stat: ks.statistic,
        p_value: ks.p_value,
        n_boot,
        moment_residuals: k.iter().zip(model_k).map(|(a, b)| a - b).collect(),
        converged: true,
        iterations: 0,
    };
    Ok((report, model))
}
