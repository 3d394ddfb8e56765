use crate::error::{Error, Result};
use crate::model::{self, MarketParams};

use super::rng::RngStream;
use super::shock::{PeriodShock, ShockSampler};

pub const MIN_EULER_STEPS: usize = 100;

/// Euler–Maruyama integrator of the portfolio SDE over one period.
///
/// Each substep multiplies by `1 + μ(x)dt + Σ x_j σ_j ΔB_j`, then by
/// `1 + Σ_j x_j (e^{Z_j} − 1)` per common jump and `1 + x_j (e^Z − 1)` per idiosyncratic
/// jump, with exact compound-Poisson jump counts on each substep.
#[derive(Debug, Clone)]
pub struct EulerIntegrator {
    sampler: ShockSampler,
    weights: Vec<f64>,
    scaled: Vec<f64>,
    drift_dt: f64,
    sqrt_dt: f64,
    steps: usize,
}

impl EulerIntegrator {
    pub fn new(mp: &MarketParams, x: &[f64], steps_per_period: usize) -> Result<Self> {
        if steps_per_period < MIN_EULER_STEPS {
            return Err(Error::StepTooCoarse(steps_per_period));
        }
        if x.len() != mp.m {
            return Err(Error::DimensionMismatch(format!("weights length {} != m = {}", x.len(), mp.m)));
        }
        let dt = 1.0 / steps_per_period as f64;
        Ok(Self {
            sampler: ShockSampler::with_step(mp, dt)?,
            weights: x.to_vec(),
            scaled: x.iter().zip(mp.vols()).map(|(w, s)| w * s).collect(),
            drift_dt: model::portfolio_drift(mp, x) * dt,
            sqrt_dt: dt.sqrt(),
            steps: steps_per_period,
        })
    }

    /// One-period gross return `P(1)/P(0)`.
    pub fn gross_return(&mut self, rng: &mut RngStream) -> Result<f64> {
        let mut p = 1.0;
        let mut shock = PeriodShock::default();
        for _ in 0..self.steps {
            self.sampler.sample_into(rng, &mut shock);
            let diff: f64 = self.scaled.iter().zip(&shock.brownian).map(|(s, b)| s * b).sum();
            p *= 1.0 + self.drift_dt + diff * self.sqrt_dt;
            for row in &shock.common_jump_logs {
                let rel: f64 = row.iter().zip(&self.weights).map(|(z, w)| w * z.exp_m1()).sum();
                p *= 1.0 + rel;
            }
            for (list, w) in shock.idio_jump_logs.iter().zip(&self.weights) {
                for z in list {
                    p *= 1.0 + w * z.exp_m1();
                }
            }
        }
        if !(p > 0.0) {
            return Err(Error::Domain(format!("Euler path left the positive half-line: {p}")));
        }
        Ok(p)
    }
}

/// One-period gross portfolio return by Euler–Maruyama with `steps_per_period` substeps.
pub fn euler_maruyama_price(mp: &MarketParams, x: &[f64], steps_per_period: usize, rng: &mut RngStream) -> Result<f64> {
    EulerIntegrator::new(mp, x, steps_per_period)?.gross_return(rng)
}
