//! Empirical VaR, CVaR and CLVaR under strict-inequality tail conventions.

use crate::error::{Error, Result};
use crate::numerics;

/// Samples sorted ascending.
#[derive(Debug, Clone, PartialEq)]
pub struct EmpiricalDist {
    sorted: Vec<f64>,
}

impl EmpiricalDist {
    pub fn new(mut samples: Vec<f64>) -> Result<Self> {
        if samples.is_empty() {
            return Err(Error::EmptyDistribution);
        }
        if samples.iter().any(|s| s.is_nan()) {
            return Err(Error::Domain("samples contain NaN".into()));
        }
        samples.sort_by(f64::total_cmp);
        Ok(Self { sorted: samples })
    }

    pub fn from_slice(samples: &[f64]) -> Result<Self> {
        Self::new(samples.to_vec())
    }

    pub fn sorted_samples(&self) -> &[f64] {
        &self.sorted
    }

    pub fn n(&self) -> usize {
        self.sorted.len()
    }

    /// Distribution of `−X`.
    pub fn negated(&self) -> Self {
        Self { sorted: self.sorted.iter().rev().map(|s| -s).collect() }
    }

    pub fn mean(&self) -> f64 {
        self.sorted.iter().sum::<f64>() / self.n() as f64
    }
}

/// What to return when a conditional tail is empty (heavy ties at VaR).
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum TailPolicy {
    #[default]
    Strict,
    /// Substitute VaR itself for an empty tail.
    VarFallback,
}

fn check_p(p: f64) -> Result<()> {
    if p > 0.0 && p < 1.0 {
        Ok(())
    } else {
        Err(Error::Domain(format!("probability {p} outside (0, 1)")))
    }
}

/// Index `⌈n p⌉ − 1` of the left-continuous empirical quantile; `n p` within rounding of an
/// integer counts as that integer.
pub fn quantile_index(n: usize, p: f64) -> usize {
    let np = n as f64 * p;
    let nearest = np.round();
    let k = if (np - nearest).abs() <= 1e-9 * nearest.max(1.0) { nearest } else { np.ceil() };
    (k as usize).clamp(1, n) - 1
}

/// `inf{x : F_n(x) ≥ p}`.
pub fn var_p(d: &EmpiricalDist, p: f64) -> Result<f64> {
    check_p(p)?;
    Ok(d.sorted[quantile_index(d.n(), p)])
}

/// `E[X | X > VaR_p]`.
pub fn cvar_p(d: &EmpiricalDist, p: f64) -> Result<f64> {
    let v = var_p(d, p)?;
    let start = d.sorted.partition_point(|s| *s <= v);
    tail_mean(&d.sorted[start..])
}

/// `E[X | X < VaR_p]`.
pub fn clvar_p(d: &EmpiricalDist, p: f64) -> Result<f64> {
    let v = var_p(d, p)?;
    let end = d.sorted.partition_point(|s| *s < v);
    tail_mean(&d.sorted[..end])
}

pub fn cvar_p_with(d: &EmpiricalDist, p: f64, policy: TailPolicy) -> Result<f64> {
    fallback(cvar_p(d, p), d, p, policy)
}

pub fn clvar_p_with(d: &EmpiricalDist, p: f64, policy: TailPolicy) -> Result<f64> {
    fallback(clvar_p(d, p), d, p, policy)
}

fn fallback(res: Result<f64>, d: &EmpiricalDist, p: f64, policy: TailPolicy) -> Result<f64> {
    match (res, policy) {
        (Err(Error::EmptyTail), TailPolicy::VarFallback) => var_p(d, p),
        (other, _) => other,
    }
}

fn tail_mean(tail: &[f64]) -> Result<f64> {
    if tail.is_empty() {
        return Err(Error::EmptyTail);
    }
    Ok(tail.iter().sum::<f64>() / tail.len() as f64)
}

/// `CVaR_{1−p}(−Z) = φ(Φ⁻¹(p)) / p` for standard normal `Z`.
pub fn normal_cvar_neg_z(p: f64) -> Result<f64> {
    check_p(p)?;
    Ok(numerics::normal_pdf(numerics::std_normal_quantile(p)?) / p)
}

/// Comonotonic sum `S = Σ F_j⁻¹(U)` on the grid `U = (i + ½)/n`; returns
/// `(VaR_p(S), Σ_j VaR_p(X_j))`.
pub fn comonotonic_var_additivity_check(
    margins: &[&dyn Fn(f64) -> f64],
    p: f64,
    grid: usize,
) -> Result<(f64, f64)> {
    if grid == 0 || margins.is_empty() {
        return Err(Error::EmptyDistribution);
    }
    let u: Vec<f64> = (0..grid).map(|i| (i as f64 + 0.5) / grid as f64).collect();
    let sum: Vec<f64> = u.iter().map(|ui| margins.iter().map(|q| q(*ui)).sum()).collect();
    let lhs = var_p(&EmpiricalDist::new(sum)?, p)?;
    let mut rhs = 0.0;
    for q in margins {
        rhs += var_p(&EmpiricalDist::new(u.iter().map(|ui| q(*ui)).collect())?, p)?;
    }
    Ok((lhs, rhs))
}
