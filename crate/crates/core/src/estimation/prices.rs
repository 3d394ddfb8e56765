use std::collections::{BTreeMap, BTreeSet};
use std::io::Read;
use std::str::FromStr;

use chrono::{Datelike, NaiveDate};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::model::{JumpLaw, MarketParams};
use crate::numerics::SymMatrix;

use super::fit::MertonFit;

/// Threshold, in median absolute deviations, for an "extreme" return.
pub const EXTREME_MADS: f64 = 3.0;

#[derive(Debug, Deserialize)]
struct Row {
    date: String,
    ticker: String,
    close: f64,
}

/// Closing prices per ticker, sorted by date.
#[derive(Debug, Clone, PartialEq, Default)]
pub struct PriceTable {
    series: BTreeMap<String, Vec<(NaiveDate, f64)>>,
}

impl PriceTable {
    /// Reads `date,ticker,close` rows with ISO-8601 dates.
    pub fn from_csv<R: Read>(reader: R) -> Result<Self> {
        let mut rdr = csv::ReaderBuilder::new().trim(csv::Trim::All).from_reader(reader);
        let headers = rdr.headers().map_err(|e| Error::Input(format!("price CSV header: {e}")))?.clone();
        for col in ["date", "ticker", "close"] {
            if !headers.iter().any(|h| h == col) {
                return Err(Error::Input(format!("price CSV is missing column `{col}`")));
            }
        }
        let mut series: BTreeMap<String, BTreeMap<NaiveDate, f64>> = BTreeMap::new();
        for (i, rec) in rdr.deserialize::<Row>().enumerate() {
            let line = i + 2;
            let row = rec.map_err(|e| Error::Input(format!("price CSV line {line}: {e}")))?;
            let date = NaiveDate::parse_from_str(&row.date, "%Y-%m-%d")
                .map_err(|e| Error::Input(format!("price CSV line {line}: date `{}`: {e}", row.date)))?;
            if !(row.close > 0.0 && row.close.is_finite()) {
                return Err(Error::Input(format!("price CSV line {line}: close must be positive, got {}", row.close)));
            }
            if series.entry(row.ticker.clone()).or_default().insert(date, row.close).is_some() {
                return Err(Error::Input(format!("price CSV line {line}: duplicate {} on {date}", row.ticker)));
            }
        }
        if series.is_empty() {
            return Err(Error::Input("price CSV has no rows".into()));
        }
        Ok(Self { series: series.into_iter().map(|(t, s)| (t, s.into_iter().collect())).collect() })
    }

    pub fn insert(&mut self, ticker: &str, prices: Vec<(NaiveDate, f64)>) {
        let mut prices = prices;
        prices.sort_by_key(|p| p.0);
        self.series.insert(ticker.to_string(), prices);
    }

    pub fn tickers(&self) -> Vec<&str> {
        self.series.keys().map(String::as_str).collect()
    }

    pub fn prices(&self, ticker: &str) -> Result<&[(NaiveDate, f64)]> {
        self.series
            .get(ticker)
            .map(Vec::as_slice)
            .ok_or_else(|| Error::Input(format!("unknown ticker `{ticker}`")))
    }

    /// Prices at the sampling used for returns: every observation, or each month's last close.
    pub fn sampled(&self, ticker: &str, aggregation: Aggregation) -> Result<Vec<(NaiveDate, f64)>> {
        let prices = self.prices(ticker)?;
        Ok(match aggregation {
            Aggregation::Observation => prices.to_vec(),
            Aggregation::Monthly => {
                let mut last: BTreeMap<(i32, u32), (NaiveDate, f64)> = BTreeMap::new();
                for &(d, p) in prices {
                    last.insert((d.year(), d.month()), (d, p));
                }
                last.into_values().collect()
            }
        })
    }

    /// Log returns between adjacent sampled prices, dated at the later one.
    pub fn returns(&self, ticker: &str, aggregation: Aggregation) -> Result<Vec<(NaiveDate, f64)>> {
        let sampled = self.sampled(ticker, aggregation)?;
        Ok(sampled.windows(2).map(|w| (w[1].0, (w[1].1 / w[0].1).ln())).collect())
    }
}

/// Sampling of returns before fitting.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum Aggregation {
    /// Every adjacent pair of observations; cumulants are scaled linearly to the period.
    Observation,
    /// Calendar-month end closes; one return per rebalance period.
    Monthly,
}

impl FromStr for Aggregation {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "none" | "observation" | "daily" => Ok(Aggregation::Observation),
            "monthly" | "month" => Ok(Aggregation::Monthly),
            other => Err(Error::Input(format!("unknown aggregation `{other}` (use none or monthly)"))),
        }
    }
}

fn median(v: &mut [f64]) -> f64 {
    v.sort_by(f64::total_cmp);
    let n = v.len();
    if n % 2 == 1 { v[n / 2] } else { 0.5 * (v[n / 2 - 1] + v[n / 2]) }
}

/// Split of per-asset total intensities into common and idiosyncratic parts.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct JumpSplit {
    /// Dates on which every asset has a return.
    pub n_aligned: usize,
    /// Extreme returns per asset on aligned dates.
    pub extreme_counts: Vec<usize>,
    /// Aligned dates on which at least two assets are extreme.
    pub common_dates: Vec<NaiveDate>,
    /// Per observation.
    pub lambda_common: f64,
    pub lambda_total: Vec<f64>,
    pub lambda_idio: Vec<f64>,
}

/// Dates where all assets report a return.
pub fn aligned_returns(returns: &[Vec<(NaiveDate, f64)>]) -> (Vec<NaiveDate>, Vec<Vec<f64>>) {
    let mut common: Option<BTreeSet<NaiveDate>> = None;
    for r in returns {
        let dates: BTreeSet<NaiveDate> = r.iter().map(|p| p.0).collect();
        common = Some(match common {
            None => dates,
            Some(c) => c.intersection(&dates).copied().collect(),
        });
    }
    let dates: Vec<NaiveDate> = common.unwrap_or_default().into_iter().collect();
    let cols = returns
        .iter()
        .map(|r| {
            let by_date: BTreeMap<NaiveDate, f64> = r.iter().copied().collect();
            dates.iter().map(|d| by_date[d]).collect()
        })
        .collect();
    (dates, cols)
}

/// A date is a common-jump date when at least two assets return more than
/// [`EXTREME_MADS`] median absolute deviations away from their median.
/// `λ_common` is the fraction of such dates, capped at the smallest total intensity.
pub fn common_jump_split(returns: &[Vec<(NaiveDate, f64)>], lambda_total: &[f64]) -> Result<JumpSplit> {
    if returns.len() != lambda_total.len() {
        return Err(Error::DimensionMismatch(format!(
            "{} return series but {} intensities",
            returns.len(),
            lambda_total.len()
        )));
    }
    let (dates, cols) = aligned_returns(returns);
    let flags: Vec<Vec<bool>> = cols
        .iter()
        .map(|c| {
            if c.is_empty() {
                return Vec::new();
            }
            let med = median(&mut c.clone());
            let mad = median(&mut c.iter().map(|v| (v - med).abs()).collect::<Vec<_>>());
            c.iter().map(|v| mad > 0.0 && (v - med).abs() > EXTREME_MADS * mad).collect()
        })
        .collect();
    let extreme_counts = flags.iter().map(|f| f.iter().filter(|&&b| b).count()).collect();
    let common_dates: Vec<NaiveDate> = if returns.len() < 2 {
        Vec::new()
    } else {
        dates.iter().enumerate().filter(|&(i, _)| flags.iter().filter(|f| f[i]).count() >= 2).map(|(_, d)| *d).collect()
    };
    let min_total = lambda_total.iter().copied().fold(f64::INFINITY, f64::min);
    let lambda_common = if dates.is_empty() || returns.len() < 2 {
        0.0
    } else {
        (common_dates.len() as f64 / dates.len() as f64).min(min_total).max(0.0)
    };
    Ok(JumpSplit {
        n_aligned: dates.len(),
        extreme_counts,
        common_dates,
        lambda_common,
        lambda_total: lambda_total.to_vec(),
        lambda_idio: lambda_total.iter().map(|l| (l - lambda_common).max(0.0)).collect(),
    })
}

/// Sample correlation matrix of equally long columns.
pub fn sample_correlation(cols: &[Vec<f64>]) -> Result<SymMatrix> {
    let m = cols.len();
    let n = cols.first().map_or(0, Vec::len);
    if n < 2 || cols.iter().any(|c| c.len() != n) {
        return Err(Error::DegenerateData("correlation needs at least two aligned returns".into()));
    }
    let centered: Vec<Vec<f64>> = cols
        .iter()
        .map(|c| {
            let mean = c.iter().sum::<f64>() / n as f64;
            c.iter().map(|v| v - mean).collect()
        })
        .collect();
    let norms: Vec<f64> = centered.iter().map(|c| c.iter().map(|v| v * v).sum::<f64>().sqrt()).collect();
    if norms.contains(&0.0) {
        return Err(Error::DegenerateData("an asset has zero return variance".into()));
    }
    let rows = (0..m)
        .map(|i| {
            (0..m)
                .map(|j| {
                    if i == j {
                        1.0
                    } else {
                        centered[i].iter().zip(&centered[j]).map(|(a, b)| a * b).sum::<f64>() / (norms[i] * norms[j])
                    }
                })
                .collect()
        })
        .collect();
    SymMatrix::from_rows(rows)
}

/// Multi-asset market in rebalance-period units from per-asset fits (per observation),
/// their intensity split, and the return correlation. Each asset's jump law serves for
/// both its common and its idiosyncratic jumps.
pub fn assemble_market(fits: &[MertonFit], split: &JumpSplit, corr: &SymMatrix, obs_per_period: f64) -> Result<MarketParams> {
    let m = fits.len();
    if m == 0 || corr.dim() != m || split.lambda_idio.len() != m {
        return Err(Error::DimensionMismatch(format!("{m} fits, correlation of dim {}", corr.dim())));
    }
    let scaled: Vec<MertonFit> = fits.iter().map(|f| f.scaled(obs_per_period)).collect();
    let vols: Vec<f64> = scaled.iter().map(|f| f.sigma2.sqrt()).collect();
    let rows = (0..m).map(|i| (0..m).map(|j| corr.get(i, j) * vols[i] * vols[j]).collect()).collect();
    let mp = MarketParams {
        m,
        r: scaled[0].rate,
        mu: scaled.iter().map(|f| f.drift).collect(),
        sigma: SymMatrix::from_rows(rows)?,
        lambda_common: split.lambda_common * obs_per_period,
        lambda_idio: split.lambda_idio.iter().map(|l| l * obs_per_period).collect(),
        common_jumps: scaled.iter().map(|f| if split.lambda_common > 0.0 { f.jump } else { JumpLaw::none() }).collect(),
        idio_jumps: scaled.iter().map(|f| f.jump).collect(),
    };
    mp.validate().map_err(|e| Error::DegenerateData(format!("assembled market is invalid: {e}")))?;
    Ok(mp)
}
