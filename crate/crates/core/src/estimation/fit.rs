use serde::Serialize;

use crate::error::{Error, Result};
use crate::model::{JumpLaw, MarketParams};
use crate::numerics::SymMatrix;

use super::moments::{k_statistics, mean_variance};

pub const MIN_CALIBRATION_LEN: usize = 30;

/// Log returns of one asset sampled at a fixed observation frequency.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ReturnSeries {
    pub asset: String,
    pub log_returns: Vec<f64>,
    /// Length of one observation interval as a fraction of the rebalance period.
    pub period_length: f64,
}

impl ReturnSeries {
    pub fn new(asset: impl Into<String>, log_returns: Vec<f64>, period_length: f64) -> Result<Self> {
        if log_returns.iter().any(|r| !r.is_finite()) {
            return Err(Error::Input("log returns must be finite".into()));
        }
        if !(period_length > 0.0 && period_length.is_finite()) {
            return Err(Error::Input(format!("period length must be positive, got {period_length}")));
        }
        Ok(Self { asset: asset.into(), log_returns, period_length })
    }

    pub fn len(&self) -> usize {
        self.log_returns.len()
    }

    pub fn is_empty(&self) -> bool {
        self.log_returns.is_empty()
    }
}

/// `𝒴 = κ − γ²/2 + γ ΔB` per observation.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct GbmParams {
    pub kappa: f64,
    pub gamma: f64,
}

impl GbmParams {
    pub fn mean_log_return(&self) -> f64 {
        self.kappa - 0.5 * self.gamma * self.gamma
    }
}

fn is_constant(x: &[f64]) -> bool {
    x.iter().all(|&v| v == x[0])
}

/// `γ̂² = ` unbiased sample variance, `κ̂ = ` sample mean `+ γ̂²/2`.
pub fn fit_gbm(series: &[f64]) -> Result<GbmParams> {
    let (mean, var) = mean_variance(series)?;
    if is_constant(series) || !(var > 0.0) {
        return Err(Error::DegenerateData("log returns have zero variance".into()));
    }
    Ok(GbmParams { kappa: mean + 0.5 * var, gamma: var.sqrt() })
}

/// Univariate Merton law of one asset's log return per observation:
/// `Y = rate + drift − σ²/2 − Λ h + σ ΔB + Σ_{k ≤ N} Z_k`, `N ~ Poisson(Λ)`, `Z ~ jump`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct MertonFit {
    pub rate: f64,
    pub drift: f64,
    pub sigma2: f64,
    pub jump: JumpLaw,
    pub intensity: f64,
}

impl MertonFit {
    /// Mean of the continuous part, `κ_1 − Λ μ_Z`.
    pub fn diffusive_mean(&self) -> f64 {
        self.rate + self.drift - 0.5 * self.sigma2 - self.intensity * (self.jump.mgf_at_1() - 1.0)
    }

    pub fn cumulants(&self) -> [f64; 4] {
        let l = self.intensity;
        [
            self.diffusive_mean() + l * self.jump.raw_moment(1),
            self.sigma2 + l * self.jump.raw_moment(2),
            l * self.jump.raw_moment(3),
            l * self.jump.raw_moment(4),
        ]
    }

    /// Same law over `factor` observation intervals (cumulants scale linearly).
    pub fn scaled(&self, factor: f64) -> Self {
        Self {
            rate: self.rate * factor,
            drift: self.drift * factor,
            sigma2: self.sigma2 * factor,
            jump: self.jump,
            intensity: self.intensity * factor,
        }
    }

    /// One-asset market with all jumps idiosyncratic.
    pub fn to_market(&self) -> MarketParams {
        MarketParams {
            m: 1,
            r: self.rate,
            mu: vec![self.drift],
            sigma: SymMatrix::diagonal(&[self.sigma2]),
            lambda_common: 0.0,
            lambda_idio: vec![self.intensity],
            common_jumps: vec![JumpLaw::none()],
            idio_jumps: vec![self.jump],
        }
    }
}

/// How the jump intensity enters the moment fit.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum IntensityMode {
    /// Total intensity is estimated with the other parameters.
    Free,
    /// Total intensity per observation held at the given value.
    FixedTotal(f64),
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct MomentConfig {
    pub intensity: IntensityMode,
    /// Holds the jump variance fixed when set.
    pub jump_variance: Option<f64>,
    /// Risk-free rate per observation, used to separate `r` from the drift.
    pub rate: f64,
    pub max_iter: usize,
}

impl Default for MomentConfig {
    fn default() -> Self {
        Self { intensity: IntensityMode::Free, jump_variance: None, rate: 0.0, max_iter: 500 }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct MomentFit {
    pub params: MertonFit,
    pub sample_cumulants: [f64; 4],
    /// `sample − model` for cumulants of orders 1–4.
    pub residuals: [f64; 4],
    pub iterations: usize,
    /// False when the direct search hit its iteration cap (the best point is still returned).
    pub converged: bool,
}

/// Result of a derivative-free minimization.
#[derive(Debug, Clone, PartialEq)]
pub struct Minimum {
    pub x: Vec<f64>,
    pub f: f64,
    pub iterations: usize,
    pub converged: bool,
}

/// Nelder–Mead simplex search with standard coefficients.
pub fn nelder_mead(f: impl Fn(&[f64]) -> f64, x0: &[f64], step: f64, max_iter: usize) -> Minimum {
    let n = x0.len();
    let eval = |x: &[f64]| {
        let v = f(x);
        if v.is_nan() { f64::INFINITY } else { v }
    };
    let mut simplex: Vec<(Vec<f64>, f64)> = Vec::with_capacity(n + 1);
    simplex.push((x0.to_vec(), eval(x0)));
    for i in 0..n {
        let mut x = x0.to_vec();
        x[i] += if x[i].abs() > 1e-8 { step * x[i].abs().max(1.0) } else { step };
        let fx = eval(&x);
        simplex.push((x, fx));
    }
    let mut iterations = 0;
    let mut converged = false;
    while iterations < max_iter {
        simplex.sort_by(|a, b| a.1.total_cmp(&b.1));
        let (best, worst) = (simplex[0].1, simplex[n].1);
        let spread = worst - best;
        let size = simplex[1..]
            .iter()
            .map(|(x, _)| x.iter().zip(&simplex[0].0).map(|(a, b)| (a - b).abs()).fold(0.0, f64::max))
            .fold(0.0, f64::max);
        if spread <= 1e-14 * best.abs() + 1e-300 || size < 1e-12 {
            converged = true;
            break;
        }
        iterations += 1;
        let centroid: Vec<f64> = (0..n).map(|k| simplex[..n].iter().map(|(x, _)| x[k]).sum::<f64>() / n as f64).collect();
        let along = |t: f64| -> Vec<f64> { (0..n).map(|k| centroid[k] + t * (simplex[n].0[k] - centroid[k])).collect() };
        let xr = along(-1.0);
        let fr = eval(&xr);
        if fr < simplex[0].1 {
            let xe = along(-2.0);
            let fe = eval(&xe);
            simplex[n] = if fe < fr { (xe, fe) } else { (xr, fr) };
        } else if fr < simplex[n - 1].1 {
            simplex[n] = (xr, fr);
        } else {
            let (xc, fc) = if fr < simplex[n].1 {
                let xc = along(-0.5);
                let fc = eval(&xc);
                (xc, fc)
            } else {
                let xc = along(0.5);
                let fc = eval(&xc);
                (xc, fc)
            };
            if fc < fr.min(simplex[n].1) {
                simplex[n] = (xc, fc);
            } else {
                let x_best = simplex[0].0.clone();
                for (x, fx) in simplex[1..].iter_mut() {
                    for k in 0..n {
                        x[k] = x_best[k] + 0.5 * (x[k] - x_best[k]);
                    }
                    *fx = eval(x);
                }
            }
        }
    }
    simplex.sort_by(|a, b| a.1.total_cmp(&b.1));
    let (x, f) = simplex.swap_remove(0);
    Minimum { x, f, iterations, converged }
}

/// Free coordinates of the search: log diffusion variance, jump mean, and (when free)
/// log jump variance and log intensity.
struct Layout {
    intensity: Option<f64>,
    jump_variance: Option<f64>,
}

impl Layout {
    fn decode(&self, theta: &[f64]) -> (f64, f64, f64, f64) {
        let sigma2 = theta[0].exp();
        let mu_z = theta[1];
        let mut k = 2;
        let var_z = match self.jump_variance {
            Some(v) => v,
            None => {
                k += 1;
                theta[k - 1].exp()
            }
        };
        let lambda = match self.intensity {
            Some(l) => l,
            None => theta[k].exp(),
        };
        (sigma2, mu_z, var_z, lambda)
    }

    fn encode(&self, sigma2: f64, mu_z: f64, var_z: f64, lambda: f64) -> Vec<f64> {
        let mut theta = vec![sigma2.ln(), mu_z];
        if self.jump_variance.is_none() {
            theta.push(var_z.ln());
        }
        if self.intensity.is_none() {
            theta.push(lambda.ln());
        }
        theta
    }
}

fn build(rate: f64, k1: f64, sigma2: f64, mu_z: f64, var_z: f64, lambda: f64) -> MertonFit {
    let jump = JumpLaw::normal(mu_z, var_z);
    // Solve κ1 = rate + drift − σ²/2 − Λh + Λμ_Z for the drift.
    let drift = k1 - rate + 0.5 * sigma2 + lambda * (jump.mgf_at_1() - 1.0) - lambda * mu_z;
    MertonFit { rate, drift, sigma2, jump, intensity: lambda }
}

/// Matches sample cumulants of orders 1–4 (equal weights) by direct search.
pub fn fit_method_of_moments(series: &ReturnSeries, cfg: &MomentConfig) -> Result<MomentFit> {
    let n = series.len();
    if n < MIN_CALIBRATION_LEN {
        return Err(Error::Input(format!(
            "{}: {n} returns, at least {MIN_CALIBRATION_LEN} are needed for calibration",
            series.asset
        )));
    }
    let k = k_statistics(&series.log_returns)?;
    if is_constant(&series.log_returns) || !(k[1] > 0.0) {
        return Err(Error::DegenerateData(format!("{}: log returns have zero variance", series.asset)));
    }
    let fixed_lambda = match cfg.intensity {
        IntensityMode::Free => None,
        IntensityMode::FixedTotal(l) if l >= 0.0 && l.is_finite() => Some(l),
        IntensityMode::FixedTotal(l) => return Err(Error::InvalidParams(format!("intensity {l} must be >= 0"))),
    };
    if let Some(v) = cfg.jump_variance {
        if !(v > 0.0) {
            return Err(Error::InvalidParams(format!("fixed jump variance {v} must be positive")));
        }
    }

    let finish = |params: MertonFit, iterations: usize, converged: bool| {
        let model = params.cumulants();
        let residuals = [k[0] - model[0], k[1] - model[1], k[2] - model[2], k[3] - model[3]];
        MomentFit { params, sample_cumulants: k, residuals, iterations, converged }
    };

    if fixed_lambda == Some(0.0) {
        let var_z = cfg.jump_variance.unwrap_or(0.0);
        return Ok(finish(build(cfg.rate, k[0], k[1], 0.0, var_z, 0.0), 0, true));
    }

    // Starting point: jumps carry 30% of the variance; intensity from excess kurtosis.
    let jump_share = 0.3 * k[1];
    let lambda0 = fixed_lambda.unwrap_or_else(|| {
        if k[3] > 0.0 { (3.0 * jump_share * jump_share / k[3]).clamp(1e-4, 1e3) } else { 0.1 }
    });
    let second0 = cfg.jump_variance.map_or(jump_share / lambda0, |v| v + (jump_share / lambda0 - v).max(0.0));
    let mut mu0 = k[2] / (3.0 * lambda0 * second0);
    let cap = 0.9 * second0.sqrt();
    mu0 = mu0.clamp(-cap, cap);
    let var0 = cfg.jump_variance.unwrap_or(second0 - mu0 * mu0);
    let sigma0 = (k[1] - lambda0 * (mu0 * mu0 + var0)).max(0.1 * k[1]);

    let layout = Layout { intensity: fixed_lambda, jump_variance: cfg.jump_variance };
    let objective = |theta: &[f64]| {
        let (s2, mz, vz, l) = layout.decode(theta);
        if !(s2.is_finite() && vz.is_finite() && l.is_finite()) {
            return f64::INFINITY;
        }
        let m = build(cfg.rate, k[0], s2, mz, vz, l).cumulants();
        (1..4).map(|i| (k[i] - m[i]).powi(2)).sum::<f64>() + (k[0] - m[0]).powi(2)
    };
    let start = layout.encode(sigma0, mu0, var0, lambda0);
    let min = nelder_mead(objective, &start, 0.25, cfg.max_iter);
    let (s2, mz, vz, l) = layout.decode(&min.x);
    Ok(finish(build(cfg.rate, k[0], s2, mz, vz, l), min.iterations, min.converged))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::simulation::{log_return_series, RngStream};

    fn series(y: Vec<f64>) -> ReturnSeries {
        ReturnSeries::new("TEST", y, 1.0).unwrap()
    }

    fn normals(n: usize, mean: f64, sd: f64, seed: u64) -> Vec<f64> {
        let mut rng = RngStream::new(seed, 0);
        (0..n).map(|_| mean + sd * rng.standard_normal()).collect()
    }

    #[test]
    fn nelder_mead_rosenbrock() {
        let f = |x: &[f64]| (1.0 - x[0]).powi(2) + 100.0 * (x[1] - x[0] * x[0]).powi(2);
        let m = nelder_mead(f, &[-1.2, 1.0], 0.5, 2000);
        assert!(m.converged);
        assert!((m.x[0] - 1.0).abs() < 1e-5 && (m.x[1] - 1.0).abs() < 1e-5);
        let capped = nelder_mead(f, &[-1.2, 1.0], 0.5, 5);
        assert!(!capped.converged);
        assert_eq!(capped.iterations, 5);
    }

    #[test]
    fn gbm_fit_recovers_parameters() {
        let (kappa, gamma) = (0.1, 0.2);
        let y = normals(100_000, kappa - 0.5 * gamma * gamma, gamma, 8);
        let g = fit_gbm(&y).unwrap();
        assert!((g.kappa - kappa).abs() < 0.05 * kappa);
        assert!((g.gamma - gamma).abs() < 0.05 * gamma);
        let (mean, var) = mean_variance(&y).unwrap();
        assert!((mean - g.mean_log_return()).abs() < 1e-12);
        assert!((mean - (kappa - 0.5 * gamma * gamma)).abs() < 4.0 * (var / y.len() as f64).sqrt());
    }

    #[test]
    fn gbm_refit_loop_is_stable() {
        let g = fit_gbm(&normals(50_000, 0.01, 0.3, 9)).unwrap();
        let again = fit_gbm(&normals(50_000, g.mean_log_return(), g.gamma, 10)).unwrap();
        assert!((again.gamma - g.gamma).abs() < 4.0 * g.gamma / (2.0 * 50_000f64).sqrt());
        assert!((again.kappa - g.kappa).abs() < 4.0 * g.gamma / 50_000f64.sqrt() + 0.01);
    }

    #[test]
    fn constant_returns_are_degenerate() {
        assert!(matches!(fit_gbm(&[0.01; 40]), Err(Error::DegenerateData(_))));
        let cfg = MomentConfig::default();
        assert!(matches!(fit_method_of_moments(&series(vec![0.01; 40]), &cfg), Err(Error::DegenerateData(_))));
    }

    #[test]
    fn short_series_rejected() {
        let cfg = MomentConfig::default();
        assert!(matches!(fit_method_of_moments(&series(normals(29, 0.0, 1.0, 1)), &cfg), Err(Error::Input(_))));
    }

    #[test]
    fn zero_intensity_matches_sample_variance() {
        let y = normals(5_000, 0.02, 0.15, 11);
        let cfg = MomentConfig { intensity: IntensityMode::FixedTotal(0.0), ..Default::default() };
        let fit = fit_method_of_moments(&series(y.clone()), &cfg).unwrap();
        let g = fit_gbm(&y).unwrap();
        assert!((fit.params.sigma2 - g.gamma * g.gamma).abs() < 1e-10);
        assert!((fit.params.cumulants()[0] - mean_variance(&y).unwrap().0).abs() < 1e-12);
    }

    #[test]
    fn jump_direction_is_recovered() {
        for mean_jump in [-0.15, 0.15] {
            let truth = MertonFit { rate: 0.0, drift: 0.0, sigma2: 0.01, jump: JumpLaw::normal(mean_jump, 0.002), intensity: 0.2 };
            let mut rng = RngStream::new(12, 0);
            let y = log_return_series(&truth.to_market(), &[1.0], 20_000, &mut rng).unwrap();
            let cfg = MomentConfig { intensity: IntensityMode::FixedTotal(0.2), ..Default::default() };
            let fit = fit_method_of_moments(&series(y), &cfg).unwrap();
            assert_eq!(fit.params.jump.mean.signum(), mean_jump.signum());
            assert!(fit.residuals.iter().all(|r| r.abs() < 1e-6), "{:?}", fit.residuals);
        }
    }

    #[test]
    fn exact_cumulants_are_reproduced() {
        let truth = MertonFit { rate: 0.001, drift: 0.002, sigma2: 0.02, jump: JumpLaw::normal(-0.05, 0.01), intensity: 0.3 };
        let fit = build(truth.rate, truth.cumulants()[0], truth.sigma2, truth.jump.mean, truth.jump.variance, truth.intensity);
        assert!((fit.drift - truth.drift).abs() < 1e-15);
        let scaled = truth.scaled(21.0);
        for (a, b) in scaled.cumulants().iter().zip(truth.cumulants()) {
            assert!((a - 21.0 * b).abs() < 1e-12);
        }
    }
}
