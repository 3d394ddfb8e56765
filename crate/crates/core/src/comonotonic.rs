//! Comonotonic lower bound `W^L` of terminal wealth, its first-order Taylor form `W'^L`,
//! and the closed-form CVaR of `W'^L`.
//!
//! With `e_t(z) = z √(xᵀΣx) c4_t + c3_t + c2_t`,
//! `W^L = Σ α_t e^{e_t(z)}` and `W'^L = Σ α_t (1 + e_t(z)) = c5 + c6 ex − c7 QF + c8 z √QF`,
//! where `ex = (μ − r1)ᵀx`, `QF = xᵀΣx` and `z ~ N(0, 1)`.

use serde::Serialize;

use crate::error::{Error, Result};
use crate::model::{self, MarketParams, PortfolioSpec};
use crate::numerics;
use crate::parallel;
use crate::risk;
use crate::simulation::RngStream;

/// Endowment-weighted `min(τ−t, τ−l)` kernel.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ScheduleKernel {
    pub tau: usize,
    pub alphas: Vec<f64>,
    pub min_matrix: Vec<Vec<f64>>,
    /// `Σ_{k,l} α_k α_l min(τ−k, τ−l)`.
    pub quad_sum: f64,
    /// `Σ_l α_l min(τ−t, τ−l)` per `t`.
    pub row_sums: Vec<f64>,
}

impl ScheduleKernel {
    /// `τ − t` for each `t`.
    pub fn remaining(&self) -> impl Iterator<Item = f64> + '_ {
        (0..self.tau).map(move |t| (self.tau - t) as f64)
    }
}

pub fn schedule_kernel(alphas: &[f64]) -> Result<ScheduleKernel> {
    let tau = alphas.len();
    if tau == 0 {
        return Err(Error::DegenerateSchedule);
    }
    let min_matrix: Vec<Vec<f64>> = (0..tau)
        .map(|t| (0..tau).map(|l| (tau - t.max(l)) as f64).collect())
        .collect();
    let row_sums: Vec<f64> = min_matrix.iter().map(|row| numerics::dot(row, alphas)).collect();
    let quad_sum = numerics::dot(&row_sums, alphas);
    Ok(ScheduleKernel { tau, alphas: alphas.to_vec(), min_matrix, quad_sum, row_sums })
}

/// `c4_t = row_sums[t] / √quad_sum`.
pub fn c4_t(kernel: &ScheduleKernel) -> Result<Vec<f64>> {
    if !(kernel.quad_sum > 0.0) {
        return Err(Error::DegenerateSchedule);
    }
    let s = kernel.quad_sum.sqrt();
    Ok(kernel.row_sums.iter().map(|r| r / s).collect())
}

/// Correlations `r_t = row_sums[t] / √((τ−t) quad_sum)` between `V_t` and `Λ`.
pub fn r_t(kernel: &ScheduleKernel) -> Result<Vec<f64>> {
    if !(kernel.quad_sum > 0.0) {
        return Err(Error::DegenerateSchedule);
    }
    Ok(kernel
        .row_sums
        .iter()
        .zip(kernel.remaining())
        .map(|(r, rem)| r / (rem * kernel.quad_sum).sqrt())
        .collect())
}

/// Per-period jump contribution `λ(Π_j M_{Z*_{j,0}}(1) − 1) + Σ_j λ_j (M_{Z*_{j,1}}(1) − 1)`
/// evaluated with exposures `x_jump`. Sources with zero intensity are skipped, so any
/// exposure is accepted in a jump-free market.
pub fn jump_drift(mp: &MarketParams, x_jump: &[f64]) -> Result<f64> {
    if x_jump.len() != mp.m {
        return Err(Error::DimensionMismatch(format!("weights length {} != m = {}", x_jump.len(), mp.m)));
    }
    let mut out = 0.0;
    if mp.lambda_common > 0.0 {
        let mut prod = 1.0;
        for (law, xj) in mp.common_jumps.iter().zip(x_jump) {
            prod *= model::star_mgf_at_1(law, *xj)?;
        }
        out += mp.lambda_common * (prod - 1.0);
    }
    for j in 0..mp.m {
        if mp.lambda_idio[j] > 0.0 {
            out += mp.lambda_idio[j] * (model::star_mgf_at_1(&mp.idio_jumps[j], x_jump[j])? - 1.0);
        }
    }
    Ok(out)
}

/// `c2_t = (τ−t) (r + jump_drift(x))`.
pub fn c2_t(mp: &MarketParams, x: &[f64], kernel: &ScheduleKernel) -> Result<Vec<f64>> {
    let per_period = mp.r + jump_drift(mp, x)?;
    Ok(kernel.remaining().map(|rem| rem * per_period).collect())
}

/// `c3_t = (τ−t)(μ − r1)ᵀx − ½ xᵀΣx · row_sums[t]² / quad_sum`.
pub fn c3_t(mp: &MarketParams, x: &[f64], kernel: &ScheduleKernel) -> Vec<f64> {
    let ex = numerics::dot(&model::excess_drift(mp), x);
    let qf = mp.sigma.quad_form(x);
    kernel
        .row_sums
        .iter()
        .zip(kernel.remaining())
        .map(|(rs, rem)| {
            let var_share = if kernel.quad_sum > 0.0 { rs * rs / kernel.quad_sum } else { 0.0 };
            rem * ex - 0.5 * qf * var_share
        })
        .collect()
}

/// All constants of the bound for one `(market, weights, schedule, p)`.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct BoundConstants {
    pub tau: usize,
    pub alphas: Vec<f64>,
    pub p: f64,
    pub weights: Vec<f64>,
    /// Exposures used inside the jump mgfs of `c2` (equal to `weights` unless overridden).
    pub jump_weights: Vec<f64>,
    /// `(μ − r1)ᵀx`.
    pub excess_return: f64,
    /// `xᵀΣx`.
    pub quad_form: f64,
    pub c2: Vec<f64>,
    pub c3: Vec<f64>,
    pub c4: Vec<f64>,
    pub c5: f64,
    pub c6: f64,
    pub c7: f64,
    pub c8: f64,
    pub c9: f64,
    pub sigma_lambda: f64,
    pub r_t: Vec<f64>,
    pub kernel: ScheduleKernel,
}

impl BoundConstants {
    pub fn new(mp: &MarketParams, ps: &PortfolioSpec, p: f64) -> Result<Self> {
        Self::with_jump_weights(mp, ps, &ps.weights, p)
    }

    /// Constants whose jump mgfs use `jump_weights` instead of the portfolio weights.
    pub fn with_jump_weights(mp: &MarketParams, ps: &PortfolioSpec, jump_weights: &[f64], p: f64) -> Result<Self> {
        mp.validate()?;
        ps.validate(mp.m)?;
        let x = &ps.weights;
        let kernel = schedule_kernel(&ps.endowments)?;
        let c4 = c4_t(&kernel)?;
        let r_t = r_t(&kernel)?;
        let c2 = c2_t(mp, jump_weights, &kernel)?;
        let c3 = c3_t(mp, x, &kernel);
        let alphas = &kernel.alphas;
        let c5 = alphas.iter().zip(&c2).map(|(a, c)| a * (1.0 + c)).sum();
        let c6 = alphas.iter().zip(kernel.remaining()).map(|(a, rem)| a * rem).sum();
        let c7 = alphas
            .iter()
            .zip(&kernel.row_sums)
            .map(|(a, rs)| a * rs * rs)
            .sum::<f64>()
            / (2.0 * kernel.quad_sum);
        let c8 = numerics::dot(alphas, &c4);
        let c9 = c8 * risk::normal_cvar_neg_z(p)?;
        let quad_form = mp.sigma.quad_form(x);
        Ok(Self {
            tau: kernel.tau,
            alphas: alphas.clone(),
            p,
            weights: x.clone(),
            jump_weights: jump_weights.to_vec(),
            excess_return: numerics::dot(&model::excess_drift(mp), x),
            quad_form,
            c2,
            c3,
            c4,
            c5,
            c6,
            c7,
            c8,
            c9,
            sigma_lambda: (quad_form * kernel.quad_sum).sqrt(),
            r_t,
            kernel,
        })
    }

    /// Exponent `e_t(z)` of summand `t`.
    pub fn exponent(&self, t: usize, z: f64) -> f64 {
        z * self.quad_form.sqrt() * self.c4[t] + self.c3[t] + self.c2[t]
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("constants serialize")
    }
}

/// `W^L(z) = Σ α_t exp(z √QF c4_t + c3_t + c2_t)`.
pub fn lower_bound_sample(c: &BoundConstants, z: f64) -> f64 {
    c.alphas.iter().enumerate().map(|(t, a)| a * c.exponent(t, z).exp()).sum()
}

/// `W'^L(z) = c5 + c6 ex − c7 QF + c8 z √QF`.
pub fn taylor_lower_bound_sample(c: &BoundConstants, z: f64) -> f64 {
    expected_taylor_bound(c) + c.c8 * z * c.quad_form.sqrt()
}

/// `E[W'^L] = c5 + c6 ex − c7 QF`.
pub fn expected_taylor_bound(c: &BoundConstants) -> f64 {
    c.c5 + c.c6 * c.excess_return - c.c7 * c.quad_form
}

/// `CVaR_{1−p}(−W'^L) = −c5 − c6 ex + c7 QF + c9 √QF`.
pub fn cvar_taylor_bound(c: &BoundConstants) -> f64 {
    -c.c5 - c.c6 * c.excess_return + c.c7 * c.quad_form + c.c9 * c.quad_form.sqrt()
}

/// `CLVaR_p(W'^L) = −CVaR_{1−p}(−W'^L)`.
pub fn clvar_taylor_bound(c: &BoundConstants) -> f64 {
    -cvar_taylor_bound(c)
}

/// `VaR_p(W'^L) = W'^L(Φ⁻¹(p))`.
pub fn var_taylor_bound(c: &BoundConstants) -> Result<f64> {
    Ok(taylor_lower_bound_sample(c, numerics::std_normal_quantile(c.p)?))
}

/// `E[W^L] = Σ α_t e^{c2_t + (τ−t) ex}`, which equals `E[W_τ]`.
pub fn expected_lower_bound(c: &BoundConstants) -> f64 {
    c.alphas
        .iter()
        .zip(&c.c2)
        .zip(c.kernel.remaining())
        .map(|((a, c2), rem)| a * (c2 + rem * c.excess_return).exp())
        .sum()
}

/// `VaR_p(W^L) = W^L(Φ⁻¹(p))`; `W^L` is increasing in `z`.
pub fn var_lower_bound(c: &BoundConstants) -> Result<f64> {
    Ok(lower_bound_sample(c, numerics::std_normal_quantile(c.p)?))
}

/// `CLVaR_p(W^L) = Σ α_t e^{c3_t + c2_t + a_t²/2} Φ(Φ⁻¹(p) − a_t) / p` with `a_t = √QF c4_t`.
pub fn clvar_lower_bound(c: &BoundConstants) -> Result<f64> {
    let zp = numerics::std_normal_quantile(c.p)?;
    let s = c.quad_form.sqrt();
    Ok(c.alphas
        .iter()
        .enumerate()
        .map(|(t, a)| {
            let at = s * c.c4[t];
            a * (c.c3[t] + c.c2[t] + 0.5 * at * at).exp() * numerics::normal_cdf(zp - at)
        })
        .sum::<f64>()
        / c.p)
}

/// Draws `n` values of `z ~ N(0, 1)`; draw `i` uses stream `i`.
pub fn sample_z(n: usize, seed: u64) -> Vec<f64> {
    parallel::map_indexed(n, |i| RngStream::new(seed, i as u64).standard_normal())
}
