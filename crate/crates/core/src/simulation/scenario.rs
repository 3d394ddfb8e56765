use std::collections::BTreeSet;
use std::fmt;
use std::io::Write;
use std::str::FromStr;

use serde::Serialize;

use crate::error::{Error, Result};
use crate::model::{self, MarketParams};

use super::rng::{mix_seed, RngStream};
use super::shock::{PeriodShock, ShockSampler};

/// Which jump sources are active in a scenario.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum ScenarioKind {
    None,
    CommonOnly,
    IdioOnly,
    Both,
}

impl ScenarioKind {
    pub const ALL: [ScenarioKind; 4] = [Self::None, Self::CommonOnly, Self::IdioOnly, Self::Both];

    pub fn as_str(self) -> &'static str {
        match self {
            Self::None => "none",
            Self::CommonOnly => "common_only",
            Self::IdioOnly => "idio_only",
            Self::Both => "both",
        }
    }

    /// Market with the intensities this scenario switches off set to zero.
    pub fn apply(self, mp: &MarketParams) -> MarketParams {
        let mut out = mp.clone();
        if matches!(self, Self::None | Self::IdioOnly) {
            out.lambda_common = 0.0;
        }
        if matches!(self, Self::None | Self::CommonOnly) {
            out.lambda_idio.iter_mut().for_each(|l| *l = 0.0);
        }
        out
    }
}

impl fmt::Display for ScenarioKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for ScenarioKind {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        Self::ALL
            .into_iter()
            .find(|k| k.as_str() == s)
            .ok_or_else(|| Error::Input(format!("unknown scenario kind '{s}' (none|common_only|idio_only|both)")))
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct ScenarioConfig {
    pub kind: ScenarioKind,
    /// Number of rebalance periods covered.
    pub horizon: usize,
    /// Grid points per period (e.g. trading days per period).
    pub steps_per_period: usize,
    pub n_paths: usize,
    pub seed: u64,
    pub initial_price: f64,
}

/// Price paths of every asset on a uniform grid; index 0 is the initial price.
#[derive(Debug, Clone, PartialEq)]
pub struct ScenarioPath {
    /// `prices[asset][step]`.
    pub prices: Vec<Vec<f64>>,
    /// `jumps[asset][step]`: jumps (common plus idiosyncratic) landing in `(step−1, step]`.
    pub jumps: Vec<Vec<u32>>,
    /// Steps at which the common process jumped.
    pub common_steps: BTreeSet<usize>,
}

impl ScenarioPath {
    pub fn jump_steps(&self, asset: usize) -> BTreeSet<usize> {
        self.jumps[asset].iter().enumerate().filter(|(_, n)| **n > 0).map(|(s, _)| s).collect()
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct ScenarioPaths {
    pub kind: ScenarioKind,
    pub steps_per_period: usize,
    pub paths: Vec<ScenarioPath>,
}

impl ScenarioPaths {
    /// Writes `path,period,asset,price,jumps`; `period` is the time in periods at the grid point.
    pub fn write_csv<W: Write>(&self, out: W) -> Result<()> {
        let io = |e: csv::Error| Error::Input(format!("writing CSV: {e}"));
        let mut w = csv::Writer::from_writer(out);
        w.write_record(["path", "period", "asset", "price", "jumps"]).map_err(io)?;
        for (p, path) in self.paths.iter().enumerate() {
            let n_steps = path.prices.first().map_or(0, Vec::len);
            for step in 0..n_steps {
                let t = step as f64 / self.steps_per_period as f64;
                for (a, series) in path.prices.iter().enumerate() {
                    w.write_record([
                        p.to_string(),
                        format!("{t:.6}"),
                        (a + 1).to_string(),
                        format!("{:.10}", series[step]),
                        path.jumps[a][step].to_string(),
                    ])
                    .map_err(io)?;
                }
            }
        }
        w.flush().map_err(|e| Error::Input(format!("writing CSV: {e}")))?;
        Ok(())
    }
}

/// Per-asset price paths under exact sampling on a `1/steps_per_period` grid.
pub fn scenario_paths(mp: &MarketParams, cfg: &ScenarioConfig) -> Result<ScenarioPaths> {
    if cfg.steps_per_period == 0 || cfg.horizon == 0 || cfg.n_paths == 0 {
        return Err(Error::Input("horizon, steps per period and path count must be positive".into()));
    }
    if !(cfg.initial_price > 0.0) {
        return Err(Error::Input("initial price must be positive".into()));
    }
    let market = cfg.kind.apply(mp);
    market.validate()?;
    let dt = 1.0 / cfg.steps_per_period as f64;
    let vols = market.vols();
    let drift: Vec<f64> = model::drift_vector(&market)
        .iter()
        .zip(&vols)
        .map(|(mu, s)| (mu - 0.5 * s * s) * dt)
        .collect();
    let sqrt_dt = dt.sqrt();
    let n_steps = cfg.horizon * cfg.steps_per_period;
    let stream_seed = mix_seed(cfg.seed, cfg.kind as u64);
    let mut sampler = ShockSampler::with_step(&market, dt)?;

    let paths = (0..cfg.n_paths)
        .map(|p| {
            let mut rng = RngStream::new(stream_seed, p as u64);
            let mut shock = PeriodShock::default();
            let mut log_p = vec![cfg.initial_price.ln(); market.m];
            let mut prices = vec![vec![cfg.initial_price]; market.m];
            let mut jumps = vec![vec![0u32]; market.m];
            let mut common_steps = BTreeSet::new();
            for step in 1..=n_steps {
                sampler.sample_into(&mut rng, &mut shock);
                if shock.n_common > 0 {
                    common_steps.insert(step);
                }
                for j in 0..market.m {
                    let mut lp = drift[j] + vols[j] * sqrt_dt * shock.brownian[j];
                    lp += shock.common_jump_logs.iter().map(|row| row[j]).sum::<f64>();
                    lp += shock.idio_jump_logs[j].iter().sum::<f64>();
                    log_p[j] += lp;
                    prices[j].push(log_p[j].exp());
                    jumps[j].push(shock.n_common + shock.n_idio[j]);
                }
            }
            ScenarioPath { prices, jumps, common_steps }
        })
        .collect();
    Ok(ScenarioPaths { kind: cfg.kind, steps_per_period: cfg.steps_per_period, paths })
}

/// Checks the jump-time structure each scenario kind implies.
pub fn verify_jump_taxonomy(paths: &ScenarioPaths) -> std::result::Result<(), String> {
    for (p, path) in paths.paths.iter().enumerate() {
        let m = path.prices.len();
        for a in 0..m {
            let own = path.jump_steps(a);
            let ok = match paths.kind {
                ScenarioKind::None => own.is_empty() && path.common_steps.is_empty(),
                ScenarioKind::CommonOnly => own == path.common_steps,
                ScenarioKind::IdioOnly => path.common_steps.is_empty(),
                ScenarioKind::Both => own.is_superset(&path.common_steps),
            };
            if !ok {
                return Err(format!("path {p}, asset {}: jump times inconsistent with {}", a + 1, paths.kind));
            }
        }
    }
    Ok(())
}
