use crate::error::{Error, Result};
use crate::model::{self, JumpLaw, MarketParams};
use crate::numerics::{self, LowerTriangular};

use super::rng::{PoissonSampler, RngStream};

/// All randomness driving one rebalance period.
#[derive(Debug, Clone, PartialEq, Default)]
pub struct PeriodShock {
    /// Correlated standard-normal Brownian increments (unit variance, correlation ρ).
    pub brownian: Vec<f64>,
    pub n_common: u32,
    pub n_idio: Vec<u32>,
    /// `n_common` rows of `m` log-jumps `Z_{k,j,0}`.
    pub common_jump_logs: Vec<Vec<f64>>,
    /// Per-asset lists of idiosyncratic log-jumps `Z_{k,j,1}`.
    pub idio_jump_logs: Vec<Vec<f64>>,
}

impl PeriodShock {
    /// Shock with no jumps and the given Brownian increments.
    pub fn diffusive(brownian: Vec<f64>) -> Self {
        let m = brownian.len();
        Self {
            brownian,
            n_common: 0,
            n_idio: vec![0; m],
            common_jump_logs: Vec::new(),
            idio_jump_logs: vec![Vec::new(); m],
        }
    }
}

/// Precomputed sampling state for a market: Cholesky factor of ρ and Poisson samplers.
#[derive(Debug, Clone)]
pub struct ShockSampler {
    m: usize,
    chol_rho: LowerTriangular,
    common: PoissonSampler,
    idio: Vec<PoissonSampler>,
    common_laws: Vec<JumpLaw>,
    idio_laws: Vec<JumpLaw>,
    /// Per-period horizon; 1.0 for a full rebalance period.
    dt: f64,
    scratch: Vec<f64>,
}

impl ShockSampler {
    pub fn new(mp: &MarketParams) -> Result<Self> {
        Self::with_step(mp, 1.0)
    }

    /// Sampler for a sub-interval of length `dt` periods (intensities scaled by `dt`;
    /// Brownian increments remain standardized).
    pub fn with_step(mp: &MarketParams, dt: f64) -> Result<Self> {
        let chol_rho = numerics::cholesky(&mp.sigma.correlation()?)?;
        Ok(Self {
            m: mp.m,
            chol_rho,
            common: PoissonSampler::new(mp.lambda_common * dt),
            idio: mp.lambda_idio.iter().map(|l| PoissonSampler::new(l * dt)).collect(),
            common_laws: mp.common_jumps.clone(),
            idio_laws: mp.idio_jumps.clone(),
            dt,
            scratch: vec![0.0; mp.m],
        })
    }

    pub fn dt(&self) -> f64 {
        self.dt
    }

    pub fn sample(&mut self, rng: &mut RngStream) -> PeriodShock {
        let mut shock = PeriodShock::default();
        self.sample_into(rng, &mut shock);
        shock
    }

    /// Fills `shock` in place. Draw order: Brownian, common count and jumps, then per asset
    /// its idiosyncratic count and jumps.
    pub fn sample_into(&mut self, rng: &mut RngStream, shock: &mut PeriodShock) {
        let m = self.m;
        for g in self.scratch.iter_mut() {
            *g = rng.standard_normal();
        }
        shock.brownian.resize(m, 0.0);
        self.chol_rho.mul_vec_into(&self.scratch, &mut shock.brownian);

        shock.n_common = self.common.sample(rng);
        shock.common_jump_logs.resize_with(shock.n_common as usize, Vec::new);
        for row in shock.common_jump_logs.iter_mut() {
            row.clear();
            row.extend(self.common_laws.iter().map(|law| draw_jump(law, rng)));
        }

        shock.n_idio.resize(m, 0);
        shock.idio_jump_logs.resize_with(m, Vec::new);
        for j in 0..m {
            let n = self.idio[j].sample(rng);
            shock.n_idio[j] = n;
            let list = &mut shock.idio_jump_logs[j];
            list.clear();
            list.extend((0..n).map(|_| draw_jump(&self.idio_laws[j], rng)));
        }
    }
}

#[inline]
fn draw_jump(law: &JumpLaw, rng: &mut RngStream) -> f64 {
    law.mean + law.std_dev() * rng.standard_normal()
}

/// Draws one period shock (convenience wrapper building a fresh sampler).
pub fn sample_period_shock(mp: &MarketParams, rng: &mut RngStream) -> Result<PeriodShock> {
    Ok(ShockSampler::new(mp)?.sample(rng))
}

/// `Z* = log(1 + x (e^z − 1))`; fails when the argument is not positive.
#[inline]
pub fn star_log_jump(xj: f64, z: f64, asset: usize) -> Result<f64> {
    let rel = xj * z.exp_m1();
    if rel <= -1.0 {
        return Err(Error::InvalidWeight(format!(
            "asset {asset}: 1 + x(e^z - 1) = {} <= 0 for x = {xj}, z = {z}",
            1.0 + rel
        )));
    }
    Ok(rel.ln_1p())
}

/// Components of one period's log return, kept apart for the direct-sum wealth identity.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct LogReturnParts {
    /// `μ(x) − xᵀΣx / 2`.
    pub drift: f64,
    /// `Σ_j x_j σ_j ΔB'_j`, distributed `N(0, xᵀΣx)`.
    pub diffusion: f64,
    /// Sum of star-transformed common and idiosyncratic jumps.
    pub jumps: f64,
}

impl LogReturnParts {
    pub fn total(&self) -> f64 {
        self.drift + self.diffusion + self.jumps
    }
}

/// Evaluates `Y_t(x)` for fixed market and weights.
#[derive(Debug, Clone)]
pub struct ReturnEvaluator {
    weights: Vec<f64>,
    scaled: Vec<f64>,
    drift: f64,
    quad_form: f64,
}

impl ReturnEvaluator {
    pub fn new(mp: &MarketParams, x: &[f64]) -> Result<Self> {
        if x.len() != mp.m {
            return Err(Error::DimensionMismatch(format!(
                "weights length {} != m = {}",
                x.len(),
                mp.m
            )));
        }
        let quad_form = mp.sigma.quad_form(x);
        let vols = mp.vols();
        Ok(Self {
            weights: x.to_vec(),
            scaled: x.iter().zip(&vols).map(|(w, s)| w * s).collect(),
            drift: model::portfolio_drift(mp, x) - 0.5 * quad_form,
            quad_form,
        })
    }

    pub fn quad_form(&self) -> f64 {
        self.quad_form
    }

    pub fn parts(&self, shock: &PeriodShock) -> Result<LogReturnParts> {
        let diffusion = numerics::dot(&self.scaled, &shock.brownian);
        let mut jumps = 0.0;
        for row in &shock.common_jump_logs {
            for (j, z) in row.iter().enumerate() {
                jumps += star_log_jump(self.weights[j], *z, j)?;
            }
        }
        for (j, list) in shock.idio_jump_logs.iter().enumerate() {
            for z in list {
                jumps += star_log_jump(self.weights[j], *z, j)?;
            }
        }
        Ok(LogReturnParts { drift: self.drift, diffusion, jumps })
    }

    pub fn log_return(&self, shock: &PeriodShock) -> Result<f64> {
        Ok(self.parts(shock)?.total())
    }
}

/// One-period log return `Y_t(x)` of the constant-mix portfolio.
pub fn period_log_return(mp: &MarketParams, x: &[f64], shock: &PeriodShock) -> Result<f64> {
    ReturnEvaluator::new(mp, x)?.log_return(shock)
}
