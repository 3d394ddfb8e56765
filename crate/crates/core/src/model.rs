//! Market and portfolio parameterization for the (m+1)-asset jump-diffusion market.
//!
//! Time is measured in rebalance periods throughout: every rate, variance and
//! intensity here is "per period".

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::numerics::{self, SymMatrix};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum JumpKind {
    /// Log-jump `Z ~ N(mean, variance)`, i.e. lognormal multiplicative jumps.
    #[default]
    Normal,
}

/// Law of a log-jump size `Z`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct JumpLaw {
    pub mean: f64,
    pub variance: f64,
    #[serde(default)]
    pub kind: JumpKind,
}

impl JumpLaw {
    pub fn normal(mean: f64, variance: f64) -> Self {
        Self { mean, variance, kind: JumpKind::Normal }
    }

    /// The degenerate law `Z ≡ 0`.
    pub fn none() -> Self {
        Self::normal(0.0, 0.0)
    }

    pub fn validate(&self) -> Result<()> {
        if !self.mean.is_finite() || !self.variance.is_finite() || self.variance < 0.0 {
            return Err(Error::InvalidParams(format!(
                "jump law needs finite mean and non-negative variance, got ({}, {})",
                self.mean, self.variance
            )));
        }
        if !self.mgf_at_1().is_finite() {
            return Err(Error::InvalidParams("jump law E[e^Z] is not finite".into()));
        }
        Ok(())
    }

    /// `E[e^Z]`.
    pub fn mgf_at_1(&self) -> f64 {
        (self.mean + 0.5 * self.variance).exp()
    }

    pub fn std_dev(&self) -> f64 {
        self.variance.sqrt()
    }

    /// Raw moment `E[Z^n]` for `n <= 4`.
    pub fn raw_moment(&self, n: u32) -> f64 {
        let (m, v) = (self.mean, self.variance);
        match n {
            0 => 1.0,
            1 => m,
            2 => m * m + v,
            3 => m.powi(3) + 3.0 * m * v,
            4 => m.powi(4) + 6.0 * m * m * v + 3.0 * v * v,
            _ => panic!("raw moments above order 4 are not provided"),
        }
    }
}

/// `h = E[e^Z] − 1`, the mean relative price jump.
pub fn mean_jump_excess(law: &JumpLaw) -> f64 {
    (law.mean + 0.5 * law.variance).exp_m1()
}

/// Full parameterization of the market: one risk-free asset and `m` risky assets.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MarketParams {
    pub m: usize,
    /// Risk-free rate per period.
    pub r: f64,
    /// GBM drifts `μ_j` (before the risk-free rate and jump compensators are added).
    pub mu: Vec<f64>,
    /// Per-period covariance `σ_i σ_j ρ_ij` of the Brownian parts.
    pub sigma: SymMatrix,
    pub lambda_common: f64,
    pub lambda_idio: Vec<f64>,
    pub common_jumps: Vec<JumpLaw>,
    pub idio_jumps: Vec<JumpLaw>,
}

impl MarketParams {
    pub fn validate(&self) -> Result<()> {
        let m = self.m;
        if m == 0 {
            return Err(Error::InvalidParams("m must be at least 1".into()));
        }
        let lens = [
            ("mu", self.mu.len()),
            ("sigma", self.sigma.dim()),
            ("lambda_idio", self.lambda_idio.len()),
            ("common_jumps", self.common_jumps.len()),
            ("idio_jumps", self.idio_jumps.len()),
        ];
        for (name, len) in lens {
            if len != m {
                return Err(Error::InvalidParams(format!("{name} has length {len}, expected m = {m}")));
            }
        }
        if !self.r.is_finite() || self.mu.iter().any(|v| !v.is_finite()) {
            return Err(Error::InvalidParams("r and mu must be finite".into()));
        }
        if !(self.lambda_common >= 0.0 && self.lambda_common.is_finite()) {
            return Err(Error::InvalidParams("lambda_common must be finite and >= 0".into()));
        }
        if let Some(j) = self.lambda_idio.iter().position(|l| !(*l >= 0.0 && l.is_finite())) {
            return Err(Error::InvalidParams(format!("lambda_idio[{j}] must be finite and >= 0")));
        }
        if let Some(j) = self.sigma.diag().iter().position(|d| !(*d > 0.0)) {
            return Err(Error::InvalidParams(format!("sigma[{j}][{j}] must be positive")));
        }
        for law in self.common_jumps.iter().chain(&self.idio_jumps) {
            law.validate()?;
        }
        numerics::cholesky(&self.sigma)?;
        Ok(())
    }

    /// Same market with every jump intensity set to zero.
    pub fn without_jumps(&self) -> Self {
        let mut out = self.clone();
        out.lambda_common = 0.0;
        out.lambda_idio.iter_mut().for_each(|l| *l = 0.0);
        out
    }

    pub fn vols(&self) -> Vec<f64> {
        self.sigma.diag().iter().map(|v| v.sqrt()).collect()
    }
}

/// Total drift vector `μ` with components `r + μ_j − λ h_{j,0} − λ_j h_{j,1}`.
pub fn drift_vector(mp: &MarketParams) -> Vec<f64> {
    (0..mp.m)
        .map(|j| {
            mp.r + mp.mu[j]
                - mp.lambda_common * mean_jump_excess(&mp.common_jumps[j])
                - mp.lambda_idio[j] * mean_jump_excess(&mp.idio_jumps[j])
        })
        .collect()
}

/// Excess drift `μ − r1`.
pub fn excess_drift(mp: &MarketParams) -> Vec<f64> {
    drift_vector(mp).into_iter().map(|d| d - mp.r).collect()
}

/// Portfolio drift `μ(x) = (μ − r1)ᵀx + r`.
pub fn portfolio_drift(mp: &MarketParams, x: &[f64]) -> f64 {
    numerics::dot(&excess_drift(mp), x) + mp.r
}

/// `M_{Z*}(1) = E[e^{Z*}] = 1 + x_j h` for the star-transformed jump `e^{Z*} − 1 = x_j (e^Z − 1)`.
///
/// Only exposures in `[0, 1]` keep `1 + x_j (e^Z − 1)` positive for every normal jump.
pub fn star_mgf_at_1(law: &JumpLaw, xj: f64) -> Result<f64> {
    if !(0.0..=1.0).contains(&xj) {
        return Err(Error::InvalidWeight(format!(
            "exposure {xj} outside [0, 1] leaves log(1 + x(e^Z - 1)) undefined"
        )));
    }
    Ok(1.0 + xj * mean_jump_excess(law))
}

/// Constant-mix portfolio: weights per risky asset and the endowment schedule.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PortfolioSpec {
    pub weights: Vec<f64>,
    /// `α_0 .. α_{τ−1}`.
    pub endowments: Vec<f64>,
    pub horizon: usize,
}

impl PortfolioSpec {
    pub fn new(weights: Vec<f64>, endowments: Vec<f64>) -> Self {
        let horizon = endowments.len();
        Self { weights, endowments, horizon }
    }

    pub fn validate(&self, m: usize) -> Result<()> {
        if self.weights.len() != m {
            return Err(Error::InvalidParams(format!(
                "weights has length {}, expected m = {m}",
                self.weights.len()
            )));
        }
        if self.horizon == 0 || self.endowments.len() != self.horizon {
            return Err(Error::InvalidParams(format!(
                "endowments must have length horizon = {} (got {})",
                self.horizon,
                self.endowments.len()
            )));
        }
        if self.endowments.iter().any(|a| !(*a >= 0.0 && a.is_finite())) {
            return Err(Error::InvalidParams("endowments must be finite and >= 0".into()));
        }
        if self.weights.iter().any(|w| !w.is_finite()) {
            return Err(Error::InvalidParams("weights must be finite".into()));
        }
        Ok(())
    }

    pub fn risk_free_fraction(&self) -> f64 {
        1.0 - self.weights.iter().sum::<f64>()
    }

    pub fn total_endowment(&self) -> f64 {
        self.endowments.iter().sum()
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub enum WealthFloor {
    /// Absolute floor `K`.
    Absolute(f64),
    /// Stop-loss rate `k*`; the floor is derived from the endowment schedule.
    StopLoss(f64),
}

/// Risk budget for the CLVaR-constrained problem.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct RiskBudget {
    pub p: f64,
    pub floor: WealthFloor,
    /// Upper bound on `μ(x)`; `None` means uncapped.
    pub c0: Option<f64>,
}

impl RiskBudget {
    pub fn validate(&self) -> Result<()> {
        if !(self.p > 0.0 && self.p < 0.5) {
            return Err(Error::InvalidParams(format!("p must lie in (0, 0.5), got {}", self.p)));
        }
        match self.floor {
            WealthFloor::StopLoss(k) if !(0.0..=1.0).contains(&k) => {
                Err(Error::InvalidParams(format!("k_star must lie in [0, 1], got {k}")))
            }
            WealthFloor::Absolute(k) if !k.is_finite() => {
                Err(Error::InvalidParams("K must be finite".into()))
            }
            _ => Ok(()),
        }
    }
}

/// On-disk parameter document: market fields plus optional portfolio and risk budget.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ParamsDocument {
    #[serde(flatten)]
    pub market: MarketParams,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub weights: Option<Vec<f64>>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub endowments: Option<Vec<f64>>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub horizon: Option<usize>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub p: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub k_star: Option<f64>,
    #[serde(rename = "K", default, skip_serializing_if = "Option::is_none")]
    pub k_floor: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub c0: Option<f64>,
}

#[derive(Deserialize)]
struct DocumentFields {
    #[serde(default)]
    weights: Option<Vec<f64>>,
    #[serde(default)]
    endowments: Option<Vec<f64>>,
    #[serde(default)]
    horizon: Option<usize>,
    #[serde(default)]
    p: Option<f64>,
    #[serde(default)]
    k_star: Option<f64>,
    #[serde(rename = "K", default)]
    k_floor: Option<f64>,
    #[serde(default)]
    c0: Option<f64>,
}

impl ParamsDocument {
    pub fn from_market(market: MarketParams) -> Self {
        Self {
            market,
            weights: None,
            endowments: None,
            horizon: None,
            p: None,
            k_star: None,
            k_floor: None,
            c0: None,
        }
    }

    pub fn from_json(text: &str) -> Result<Self> {
        let located = |e: serde_json::Error| Error::Input(format!("params JSON line {} column {}: {e}", e.line(), e.column()));
        // Flattened deserialization reports errors at the end of input, so market and
        // document fields are parsed separately to keep line numbers exact.
        let market: MarketParams = serde_json::from_str(text).map_err(located)?;
        let extras: DocumentFields = serde_json::from_str(text).map_err(located)?;
        market.validate()?;
        if extras.k_star.is_some() && extras.k_floor.is_some() {
            return Err(Error::InvalidParams("provide only one of k_star and K".into()));
        }
        Ok(Self {
            market,
            weights: extras.weights,
            endowments: extras.endowments,
            horizon: extras.horizon,
            p: extras.p,
            k_star: extras.k_star,
            k_floor: extras.k_floor,
            c0: extras.c0,
        })
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("params document serializes")
    }

    /// Portfolio with `horizon` defaulting to the endowment count.
    pub fn portfolio(&self) -> Result<PortfolioSpec> {
        let weights = self
            .weights
            .clone()
            .ok_or_else(|| Error::InvalidParams("document has no weights".into()))?;
        let endowments = self
            .endowments
            .clone()
            .ok_or_else(|| Error::InvalidParams("document has no endowments".into()))?;
        let horizon = self.horizon.unwrap_or(endowments.len());
        let ps = PortfolioSpec { weights, endowments, horizon };
        ps.validate(self.market.m)?;
        Ok(ps)
    }

    pub fn risk_budget(&self) -> Result<RiskBudget> {
        let p = self.p.ok_or_else(|| Error::InvalidParams("document has no p".into()))?;
        let floor = match (self.k_star, self.k_floor) {
            (Some(k), None) => WealthFloor::StopLoss(k),
            (None, Some(k)) => WealthFloor::Absolute(k),
            (None, None) => WealthFloor::StopLoss(0.0),
            (Some(_), Some(_)) => {
                return Err(Error::InvalidParams("provide only one of k_star and K".into()))
            }
        };
        let rb = RiskBudget { p, floor, c0: self.c0 };
        rb.validate()?;
        Ok(rb)
    }
}

/// Preset parameter sets used by the worked examples and the test-suite.
pub mod presets {
    use super::*;

    /// Univariate bound-accuracy set: τ = 1, r = 0.03, μ₁ = λ = λ₁ = σ₁² = 0.5,
    /// every log-jump `N(0.1, 0.1)`.
    pub fn univariate_market() -> MarketParams {
        MarketParams {
            m: 1,
            r: 0.03,
            mu: vec![0.5],
            sigma: SymMatrix::diagonal(&[0.5]),
            lambda_common: 0.5,
            lambda_idio: vec![0.5],
            common_jumps: vec![JumpLaw::normal(0.1, 0.1)],
            idio_jumps: vec![JumpLaw::normal(0.1, 0.1)],
        }
    }

    /// Three-asset simulated market with strongly correlated diffusions.
    pub fn three_asset_market() -> MarketParams {
        let laws: Vec<JumpLaw> = [(0.041, 0.063), (0.042, 0.062), (0.043, 0.061)]
            .iter()
            .map(|&(m, v)| JumpLaw::normal(m, v))
            .collect();
        MarketParams {
            m: 3,
            r: 0.03,
            mu: vec![1.5; 3],
            sigma: SymMatrix::from_rows(vec![
                vec![1.3689, 1.3455, 1.3501],
                vec![1.3455, 1.3689, 1.3501],
                vec![1.3501, 1.3501, 1.3877],
            ])
            .expect("static matrix is symmetric"),
            lambda_common: 0.9,
            lambda_idio: vec![0.82, 0.8, 0.81],
            common_jumps: laws.clone(),
            idio_jumps: laws,
        }
    }

    /// Reference optimal weights for `k* = 0.5` on [`three_asset_market`].
    pub const THREE_ASSET_ROW1_WEIGHTS: [f64; 3] = [0.3375, 0.3622, 0.2920];
}

#[cfg(test)]
mod tests {
    use super::presets::*;
    use super::*;
    use proptest::prelude::*;
    use rand::SeedableRng;
    use rand_distr::{Distribution, Normal};

    #[test]
    fn mean_jump_excess_values() {
        assert_eq!(mean_jump_excess(&JumpLaw::none()), 0.0);
        let h = mean_jump_excess(&JumpLaw::normal(0.1, 0.1));
        assert!((h - (0.15f64.exp() - 1.0)).abs() < 1e-15);
        assert!((h - 0.161_834).abs() < 1e-6);
        let h1 = mean_jump_excess(&JumpLaw::normal(0.041, 0.063));
        assert!((h1 - 0.075_193).abs() < 1e-6);
    }

    #[test]
    fn mean_jump_excess_monte_carlo() {
        let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(11);
        let n = Normal::new(0.1, 0.1f64.sqrt()).unwrap();
        let draws = 1_000_000;
        let (mut s, mut s2) = (0.0, 0.0);
        for _ in 0..draws {
            let v = n.sample(&mut rng).exp_m1();
            s += v;
            s2 += v * v;
        }
        let mean = s / draws as f64;
        let se = ((s2 / draws as f64 - mean * mean) / draws as f64).sqrt();
        assert!((mean - mean_jump_excess(&JumpLaw::normal(0.1, 0.1))).abs() < 4.0 * se);
    }

    #[test]
    fn drift_vector_cases() {
        let mp = three_asset_market();
        let d = drift_vector(&mp);
        let h = mean_jump_excess(&JumpLaw::normal(0.041, 0.063));
        let expected = 0.03 + 1.5 - 0.9 * h - 0.82 * h;
        assert!((d[0] - expected).abs() < 1e-14);
        assert!((d[0] - 1.400_67).abs() < 1e-5);

        let free = mp.without_jumps();
        for (j, v) in drift_vector(&free).iter().enumerate() {
            assert_eq!(*v, free.r + free.mu[j]);
        }

        let mut comp = univariate_market();
        let h = mean_jump_excess(&comp.common_jumps[0]);
        comp.mu[0] = comp.lambda_common * h + comp.lambda_idio[0] * h;
        assert!((drift_vector(&comp)[0] - comp.r).abs() < 1e-15);
    }

    #[test]
    fn portfolio_drift_cases() {
        let mp = three_asset_market();
        assert_eq!(portfolio_drift(&mp, &[0.0; 3]), mp.r);
        let d = drift_vector(&mp);
        for j in 0..3 {
            let mut e = [0.0; 3];
            e[j] = 1.0;
            assert!((portfolio_drift(&mp, &e) - d[j]).abs() < 1e-14);
        }
        let x = THREE_ASSET_ROW1_WEIGHTS;
        let mut manual = mp.r;
        for j in 0..3 {
            manual += (d[j] - mp.r) * x[j];
        }
        assert!((portfolio_drift(&mp, &x) - manual).abs() < 1e-14);
    }

    #[test]
    fn star_mgf_cases() {
        let law = JumpLaw::normal(0.1, 0.1);
        assert_eq!(star_mgf_at_1(&law, 0.0).unwrap(), 1.0);
        assert!((star_mgf_at_1(&law, 1.0).unwrap() - law.mgf_at_1()).abs() < 1e-15);
        assert!((star_mgf_at_1(&law, 0.5).unwrap() - 1.080_917).abs() < 1e-6);
        assert!(matches!(star_mgf_at_1(&law, 1.2), Err(Error::InvalidWeight(_))));
        assert!(matches!(star_mgf_at_1(&law, -0.1), Err(Error::InvalidWeight(_))));
    }

    #[test]
    fn star_mgf_monte_carlo() {
        let law = JumpLaw::normal(0.1, 0.1);
        let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(3);
        let n = Normal::new(0.1, 0.1f64.sqrt()).unwrap();
        let draws = 500_000;
        let vals: Vec<f64> = (0..draws).map(|_| 1.0 + 0.5 * n.sample(&mut rng).exp_m1()).collect();
        let mean = vals.iter().sum::<f64>() / draws as f64;
        let var = vals.iter().map(|v| (v - mean).powi(2)).sum::<f64>() / draws as f64;
        let se = (var / draws as f64).sqrt();
        assert!((mean - star_mgf_at_1(&law, 0.5).unwrap()).abs() < 4.0 * se);
    }

    #[test]
    fn validation_catches_bad_params() {
        let mut mp = three_asset_market();
        mp.lambda_idio.pop();
        assert!(mp.validate().is_err());
        let mut mp = three_asset_market();
        mp.lambda_common = -1.0;
        assert!(mp.validate().is_err());
        let mut mp = univariate_market();
        mp.idio_jumps[0].variance = -0.1;
        assert!(mp.validate().is_err());
        assert!(three_asset_market().validate().is_ok());
    }

    #[test]
    fn json_document_field_names() {
        let mut doc = ParamsDocument::from_market(univariate_market());
        doc.weights = Some(vec![1.0]);
        doc.endowments = Some(vec![1.0]);
        doc.horizon = Some(1);
        doc.p = Some(0.05);
        doc.k_floor = Some(0.5);
        doc.c0 = Some(2.0);
        let text = doc.to_json();
        let value: serde_json::Value = serde_json::from_str(&text).unwrap();
        for key in [
            "m", "r", "mu", "sigma", "lambda_common", "lambda_idio", "common_jumps", "idio_jumps",
            "weights", "endowments", "horizon", "p", "K", "c0",
        ] {
            assert!(value.get(key).is_some(), "missing {key}");
        }
        assert_eq!(ParamsDocument::from_json(&text).unwrap(), doc);
        let rb = doc.risk_budget().unwrap();
        assert_eq!(rb.floor, WealthFloor::Absolute(0.5));
    }

    #[test]
    fn json_errors_carry_location() {
        let err = ParamsDocument::from_json("{\n  \"m\": 1,\n  \"r\": }").unwrap_err();
        match err {
            Error::Input(msg) => assert!(msg.contains("line 3"), "{msg}"),
            other => panic!("unexpected {other:?}"),
        }
    }

    proptest! {
        #[test]
        fn mean_jump_excess_monotone(m in -1.0f64..1.0, v in 0.0f64..1.0, dm in 0.001f64..0.5, dv in 0.001f64..0.5) {
            let base = mean_jump_excess(&JumpLaw::normal(m, v));
            prop_assert!(mean_jump_excess(&JumpLaw::normal(m + dm, v)) > base);
            prop_assert!(mean_jump_excess(&JumpLaw::normal(m, v + dv)) > base);
        }

        #[test]
        fn portfolio_drift_affine(x in prop::collection::vec(-2.0f64..2.0, 3), y in prop::collection::vec(-2.0f64..2.0, 3),
                                  a in -3.0f64..3.0, b in -3.0f64..3.0) {
            let mp = three_asset_market();
            let comb: Vec<f64> = x.iter().zip(&y).map(|(u, v)| a * u + b * v).collect();
            let lhs = portfolio_drift(&mp, &comb) - mp.r;
            let rhs = a * (portfolio_drift(&mp, &x) - mp.r) + b * (portfolio_drift(&mp, &y) - mp.r);
            prop_assert!((lhs - rhs).abs() < 1e-12);
        }

        #[test]
        fn star_mgf_linear(x in 0.0f64..1.0, y in 0.0f64..1.0) {
            let law = JumpLaw::normal(0.041, 0.063);
            let fx = star_mgf_at_1(&law, x).unwrap() - 1.0;
            let fy = star_mgf_at_1(&law, y).unwrap() - 1.0;
            if y > 0.0 {
                prop_assert!((fx * y - fy * x).abs() < 1e-14);
            }
        }
    }
}
