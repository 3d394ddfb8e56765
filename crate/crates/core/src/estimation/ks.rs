use serde::Serialize;

use crate::error::{Error, Result};
use crate::numerics::normal_cdf;
use crate::parallel;
use crate::simulation::{mix_seed, PoissonSampler, RngStream};

use super::fit::{fit_gbm, fit_method_of_moments, GbmParams, MertonFit, MomentConfig, ReturnSeries};

pub const MIN_BOOTSTRAP: usize = 200;
const POISSON_TAIL: f64 = 1e-14;
const BOOTSTRAP_SALT: u64 = 0x6b73_626f_6f74;

/// Model fitted to a return series; knows how to refit itself to a new sample.
#[derive(Debug, Clone, PartialEq)]
pub enum FittedModel {
    Gbm(GbmParams),
    Merton(MertonFit, MomentConfig),
}

impl FittedModel {
    pub fn name(&self) -> &'static str {
        match self {
            FittedModel::Gbm(_) => "gbm",
            FittedModel::Merton(..) => "merton",
        }
    }

    pub fn cdf(&self, y: f64) -> f64 {
        match self {
            FittedModel::Gbm(g) => gbm_cdf(g, y),
            FittedModel::Merton(m, _) => merton_cdf(m, y),
        }
    }

    /// One log return per observation.
    pub fn sample_one(&self, rng: &mut RngStream, poisson: &PoissonSampler) -> f64 {
        match self {
            FittedModel::Gbm(g) => g.mean_log_return() + g.gamma * rng.standard_normal(),
            FittedModel::Merton(m, _) => {
                let mut y = m.diffusive_mean() + m.sigma2.sqrt() * rng.standard_normal();
                let sd = m.jump.std_dev();
                for _ in 0..poisson.sample(rng) {
                    y += m.jump.mean + sd * rng.standard_normal();
                }
                y
            }
        }
    }

    pub fn sample(&self, n: usize, rng: &mut RngStream) -> Vec<f64> {
        let poisson = PoissonSampler::new(match self {
            FittedModel::Merton(m, _) => m.intensity,
            FittedModel::Gbm(_) => 0.0,
        });
        (0..n).map(|_| self.sample_one(rng, &poisson)).collect()
    }

    /// Re-estimates the same model family on `y`.
    pub fn refit(&self, y: Vec<f64>) -> Result<FittedModel> {
        match self {
            FittedModel::Gbm(_) => Ok(FittedModel::Gbm(fit_gbm(&y)?)),
            FittedModel::Merton(_, cfg) => {
                let series = ReturnSeries::new("bootstrap", y, 1.0)?;
                Ok(FittedModel::Merton(fit_method_of_moments(&series, cfg)?.params, *cfg))
            }
        }
    }
}

pub fn gbm_cdf(g: &GbmParams, y: f64) -> f64 {
    normal_cdf((y - g.mean_log_return()) / g.gamma)
}

/// Poisson mixture of normals, truncated once the remaining Poisson mass is below 1e-14.
pub fn merton_cdf(m: &MertonFit, y: f64) -> f64 {
    let base = m.diffusive_mean();
    let lambda = m.intensity;
    if lambda == 0.0 {
        return normal_cdf((y - base) / m.sigma2.sqrt());
    }
    let cap = (lambda + 40.0 * lambda.sqrt() + 50.0) as u64;
    let (mut acc, mut mass) = (0.0, 0.0);
    for n in 0..=cap {
        let nf = n as f64;
        let w = (-lambda + nf * lambda.ln() - libm::lgamma(nf + 1.0)).exp();
        let sd = (m.sigma2 + nf * m.jump.variance).sqrt();
        acc += w * normal_cdf((y - base - nf * m.jump.mean) / sd);
        mass += w;
        if 1.0 - mass < POISSON_TAIL && nf > lambda {
            break;
        }
    }
    acc.clamp(0.0, 1.0)
}

/// One-sample Kolmogorov–Smirnov statistic `sup |F_n − F|`.
pub fn ks_statistic(data: &[f64], cdf: impl Fn(f64) -> f64) -> Result<f64> {
    if data.is_empty() {
        return Err(Error::EmptyDistribution);
    }
    let mut sorted = data.to_vec();
    sorted.sort_by(f64::total_cmp);
    let n = sorted.len() as f64;
    Ok(sorted.iter().enumerate().fold(0.0, |d, (i, &x)| {
        let f = cdf(x);
        d.max((i as f64 + 1.0) / n - f).max(f - i as f64 / n)
    }))
}

/// Two-sample Kolmogorov–Smirnov distance `sup |F_a − F_b|`.
pub fn ks_two_sample(a: &[f64], b: &[f64]) -> Result<f64> {
    if a.is_empty() || b.is_empty() {
        return Err(Error::EmptyDistribution);
    }
    let mut a = a.to_vec();
    let mut b = b.to_vec();
    a.sort_by(f64::total_cmp);
    b.sort_by(f64::total_cmp);
    let (na, nb) = (a.len() as f64, b.len() as f64);
    let (mut i, mut j, mut d) = (0usize, 0usize, 0.0f64);
    while i < a.len() && j < b.len() {
        let x = a[i].min(b[j]);
        while i < a.len() && a[i] <= x {
            i += 1;
        }
        while j < b.len() && b[j] <= x {
            j += 1;
        }
        d = d.max((i as f64 / na - j as f64 / nb).abs());
    }
    Ok(d)
}

/// Parametric-bootstrap goodness-of-fit result.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct KsReport {
    pub model: String,
    pub statistic: f64,
    pub p_value: f64,
    pub n_boot: usize,
}

/// KS test with estimated parameters: replicas are simulated from `fitted`, refitted, and
/// their statistics compared with the observed one. `p = #{D_b ≥ D} / n_boot`.
pub fn bootstrap_ks_test(series: &[f64], fitted: &FittedModel, n_boot: usize, seed: u64) -> Result<KsReport> {
    if n_boot < MIN_BOOTSTRAP {
        return Err(Error::Input(format!("bootstrap needs at least {MIN_BOOTSTRAP} replicas, got {n_boot}")));
    }
    let statistic = ks_statistic(series, |y| fitted.cdf(y))?;
    let n = series.len();
    let base = mix_seed(seed, BOOTSTRAP_SALT);
    let replicas = parallel::try_map_indexed(n_boot, |b| {
        let mut rng = RngStream::new(base, b as u64);
        let y = fitted.sample(n, &mut rng);
        let refit = fitted.refit(y.clone())?;
        ks_statistic(&y, |v| refit.cdf(v))
    })?;
    let exceed = replicas.iter().filter(|&&d| d >= statistic).count();
    Ok(KsReport { model: fitted.name().into(), statistic, p_value: exceed as f64 / n_boot as f64, n_boot })
}

/// Price path `P_0 = start`, `P_k = P_{k−1} e^{Y_k}` driven by the fitted law.
pub fn fitted_path(start: f64, model: &FittedModel, n: usize, seed: u64) -> Result<Vec<f64>> {
    if !(start > 0.0 && start.is_finite()) {
        return Err(Error::Input(format!("start price must be positive, got {start}")));
    }
    let mut rng = RngStream::new(seed, 0);
    let returns = model.sample(n, &mut rng);
    let mut path = Vec::with_capacity(n + 1);
    path.push(start);
    let mut p = start;
    for y in returns {
        p *= y.exp();
        path.push(p);
    }
    Ok(path)
}
