use std::io::Write;

use serde::Serialize;

use crate::error::{Error, Result};
use crate::model::{MarketParams, PortfolioSpec};
use crate::parallel;

use super::rng::RngStream;
use super::shock::{PeriodShock, ReturnEvaluator, ShockSampler};

/// Monte Carlo sample of terminal wealth `W_τ`.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct WealthDistribution {
    pub samples: Vec<f64>,
    pub n_paths: usize,
    /// FNV-1a hash of the serialized market and portfolio, as 16 hex digits.
    pub spec_hash: String,
    pub seed: u64,
}

impl WealthDistribution {
    pub fn mean(&self) -> f64 {
        self.samples.iter().sum::<f64>() / self.samples.len() as f64
    }

    /// Unbiased sample variance; shifted by the first sample so a constant sample gives exactly 0.
    pub fn variance(&self) -> f64 {
        let n = self.samples.len();
        if n < 2 {
            return 0.0;
        }
        let shift = self.samples[0];
        let (s1, s2) = self
            .samples
            .iter()
            .fold((0.0, 0.0), |(a, b), w| (a + (w - shift), b + (w - shift).powi(2)));
        ((s2 - s1 * s1 / n as f64) / (n - 1) as f64).max(0.0)
    }

    /// Standard error of the sample mean.
    pub fn std_error(&self) -> f64 {
        (self.variance() / self.samples.len() as f64).sqrt()
    }

    /// Writes `path,wealth` CSV.
    pub fn write_csv<W: Write>(&self, out: W) -> Result<()> {
        let mut w = csv::Writer::from_writer(out);
        let io = |e: csv::Error| Error::Input(format!("writing CSV: {e}"));
        w.write_record(["path", "wealth"]).map_err(io)?;
        for (i, s) in self.samples.iter().enumerate() {
            w.write_record([i.to_string(), format!("{s:.17e}")]).map_err(io)?;
        }
        w.flush().map_err(|e| Error::Input(format!("writing CSV: {e}")))?;
        Ok(())
    }
}

/// Provenance hash of a market/portfolio pair.
pub fn spec_hash(mp: &MarketParams, ps: &PortfolioSpec) -> String {
    let text = serde_json::to_string(&(mp, ps)).expect("params serialize");
    let mut h: u64 = 0xcbf2_9ce4_8422_2325;
    for b in text.bytes() {
        h ^= b as u64;
        h = h.wrapping_mul(0x0000_0100_0000_01b3);
    }
    format!("{h:016x}")
}

fn check_inputs(mp: &MarketParams, ps: &PortfolioSpec) -> Result<()> {
    mp.validate()?;
    ps.validate(mp.m)
}

/// Draws the `τ` period shocks of one path.
pub fn sample_shocks(sampler: &mut ShockSampler, horizon: usize, rng: &mut RngStream) -> Vec<PeriodShock> {
    (0..horizon).map(|_| sampler.sample(rng)).collect()
}

/// `W_0 = α_0`, `W_t = W_{t−1} e^{Y_t} + α_t` with `α_τ = 0`.
pub fn terminal_wealth_recursive(mp: &MarketParams, ps: &PortfolioSpec, shocks: &[PeriodShock]) -> Result<f64> {
    let eval = ReturnEvaluator::new(mp, &ps.weights)?;
    recursive_with(&eval, &ps.endowments, shocks)
}

fn recursive_with(eval: &ReturnEvaluator, alphas: &[f64], shocks: &[PeriodShock]) -> Result<f64> {
    if shocks.len() != alphas.len() {
        return Err(Error::DimensionMismatch(format!(
            "{} shocks for horizon {}",
            shocks.len(),
            alphas.len()
        )));
    }
    let mut w = alphas[0];
    for (t, shock) in shocks.iter().enumerate() {
        let next_alpha = alphas.get(t + 1).copied().unwrap_or(0.0);
        w = w * eval.log_return(shock)?.exp() + next_alpha;
    }
    Ok(w)
}

/// `W_τ = Σ_t α_t exp(S_t + V_t)`, with the Gaussian part `S_t` and the jump part `V_t`
/// accumulated separately over periods `t+1 ..= τ`.
pub fn terminal_wealth_direct(mp: &MarketParams, ps: &PortfolioSpec, shocks: &[PeriodShock]) -> Result<f64> {
    let eval = ReturnEvaluator::new(mp, &ps.weights)?;
    let tau = ps.endowments.len();
    if shocks.len() != tau {
        return Err(Error::DimensionMismatch(format!("{} shocks for horizon {tau}", shocks.len())));
    }
    let parts = shocks.iter().map(|s| eval.parts(s)).collect::<Result<Vec<_>>>()?;
    let mut total = 0.0;
    for (t, alpha) in ps.endowments.iter().enumerate() {
        let later = &parts[t..];
        let s_t: f64 = later.len() as f64 * later.first().map_or(0.0, |p| p.drift)
            + later.iter().map(|p| p.diffusion).sum::<f64>();
        let v_t: f64 = later.iter().map(|p| p.jumps).sum();
        total += alpha * (s_t + v_t).exp();
    }
    Ok(total)
}

/// Samples `n_paths` terminal wealths; path `i` draws from stream `i`.
pub fn simulate_terminal_wealth(
    mp: &MarketParams,
    ps: &PortfolioSpec,
    n_paths: usize,
    seed: u64,
) -> Result<WealthDistribution> {
    if n_paths == 0 {
        return Err(Error::Input("n_paths must be at least 1".into()));
    }
    check_inputs(mp, ps)?;
    let eval = ReturnEvaluator::new(mp, &ps.weights)?;
    let sampler = ShockSampler::new(mp)?;
    let alphas = &ps.endowments;
    let samples = parallel::try_map_indexed(n_paths, |i| {
        let mut sampler = sampler.clone();
        let mut rng = RngStream::new(seed, i as u64);
        let mut shock = PeriodShock::default();
        let mut w = alphas[0];
        for t in 0..alphas.len() {
            sampler.sample_into(&mut rng, &mut shock);
            let next_alpha = alphas.get(t + 1).copied().unwrap_or(0.0);
            w = w * eval.log_return(&shock)?.exp() + next_alpha;
        }
        Ok(w)
    })?;
    if let Some(i) = samples.iter().position(|w| !w.is_finite()) {
        return Err(Error::Domain(format!("path {i} produced non-finite wealth")));
    }
    Ok(WealthDistribution { samples, n_paths, spec_hash: spec_hash(mp, ps), seed })
}

/// Samples of the one-period log return `Y(x)`; path `i` draws from stream `i`.
pub fn simulate_log_returns(mp: &MarketParams, x: &[f64], n: usize, seed: u64) -> Result<Vec<f64>> {
    mp.validate()?;
    let eval = ReturnEvaluator::new(mp, x)?;
    let sampler = ShockSampler::new(mp)?;
    parallel::try_map_indexed(n, |i| {
        let mut sampler = sampler.clone();
        let mut rng = RngStream::new(seed, i as u64);
        eval.log_return(&sampler.sample(&mut rng))
    })
}

/// Draws a single sequence of `n` i.i.d. period log returns from one stream.
pub fn log_return_series(mp: &MarketParams, x: &[f64], n: usize, rng: &mut RngStream) -> Result<Vec<f64>> {
    let eval = ReturnEvaluator::new(mp, x)?;
    let mut sampler = ShockSampler::new(mp)?;
    let mut shock = PeriodShock::default();
    (0..n)
        .map(|_| {
            sampler.sample_into(rng, &mut shock);
            eval.log_return(&shock)
        })
        .collect()
}
