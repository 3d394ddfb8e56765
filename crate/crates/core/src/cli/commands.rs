use std::fs::{self, File};
use std::io::{BufReader, Write};

use serde::Serialize;

use crate::comonotonic::{self, BoundConstants};
use crate::error::{Error, Result};
use crate::estimation::{
    aligned_returns, assemble_market, common_jump_split, fitted_path, gbm_report, merton_report, sample_correlation,
    Aggregation, FitReport, FittedModel, IntensityMode, JumpSplit, MertonFit, MomentConfig, PriceTable, ReturnSeries,
};
use crate::model::{presets, MarketParams, ParamsDocument, PortfolioSpec, RiskBudget, WealthFloor};
use crate::numerics::SymMatrix;
use crate::optimizer::{self, OptimizationResult, ReferenceWeights, SweepRow};
use crate::risk::{self, EmpiricalDist, TailPolicy};
use crate::simulation::{self, mix_seed, ScenarioConfig, ScenarioKind};

use super::{create, read_params, with_output, BoundsArgs, ConstantsArgs, FitArgs, Format, Mode, OptimizeArgs, SimulateArgs, MIN_PATHS};

const DEFAULT_K_STARS: [f64; 5] = [0.5, 0.6, 0.7, 0.8, 0.9];

fn csv_err(e: csv::Error) -> Error {
    Error::Input(format!("writing CSV: {e}"))
}

fn json_out<T: Serialize + ?Sized>(value: &T, w: &mut dyn Write) -> Result<()> {
    serde_json::to_writer_pretty(&mut *w, value).map_err(|e| Error::Input(format!("writing JSON: {e}")))?;
    writeln!(w).map_err(|e| Error::Input(format!("writing JSON: {e}")))
}

fn check_paths(n: usize) -> Result<()> {
    if n < MIN_PATHS {
        return Err(Error::Input(format!("n_paths must be at least {MIN_PATHS}, got {n}")));
    }
    Ok(())
}

fn portfolio(doc: &ParamsDocument, weights: Option<&Vec<f64>>) -> Result<PortfolioSpec> {
    match weights {
        None => doc.portfolio(),
        Some(w) => {
            let endowments = doc
                .endowments
                .clone()
                .ok_or_else(|| Error::InvalidParams("document has no endowments".into()))?;
            let horizon = doc.horizon.unwrap_or(endowments.len());
            let ps = PortfolioSpec { weights: w.clone(), endowments, horizon };
            ps.validate(doc.market.m)?;
            Ok(ps)
        }
    }
}

pub fn simulate(a: &SimulateArgs) -> Result<()> {
    let doc = read_params(&a.params)?;
    if a.common.format == Format::Json {
        return Err(Error::Input("simulate writes CSV only".into()));
    }
    let horizon = a.horizon.or(doc.horizon).or(doc.endowments.as_ref().map(Vec::len)).unwrap_or(1);
    let kinds: Vec<ScenarioKind> = a.kind.map_or_else(|| ScenarioKind::ALL.to_vec(), |k| vec![k]);
    if kinds.len() > 1 && a.out_dir.is_none() {
        return Err(Error::Input("simulating several kinds needs --out-dir (or pick one with --kind)".into()));
    }
    if let Some(dir) = &a.out_dir {
        fs::create_dir_all(dir).map_err(|e| Error::Input(format!("{}: {e}", dir.display())))?;
    }
    for kind in kinds {
        let cfg = ScenarioConfig {
            kind,
            horizon,
            steps_per_period: a.steps_per_period,
            n_paths: a.n_paths,
            seed: a.common.seed,
            initial_price: a.initial_price,
        };
        let paths = simulation::scenario_paths(&doc.market, &cfg)?;
        if a.verify {
            simulation::verify_jump_taxonomy(&paths).map_err(|e| Error::Domain(format!("{kind}: {e}")))?;
            eprintln!("{kind}: jump taxonomy verified");
        }
        match &a.out_dir {
            Some(dir) => {
                let mut w = create(&dir.join(format!("scenario_{kind}.csv")))?;
                paths.write_csv(&mut w)?;
            }
            None => with_output(a.common.out.as_deref(), |w| paths.write_csv(w))?,
        }
    }
    Ok(())
}

/// `start:end:step` or a comma list; every value in `(0, 1)`.
pub fn parse_p_grid(spec: &str) -> Result<Vec<f64>> {
    let bad = || Error::Input(format!("invalid p-grid `{spec}` (use start:end:step or a comma list)"));
    let num = |s: &str| s.trim().parse::<f64>().map_err(|_| bad());
    let grid: Vec<f64> = if spec.contains(':') {
        let parts: Vec<&str> = spec.split(':').collect();
        if parts.len() != 3 {
            return Err(bad());
        }
        let (start, end, step) = (num(parts[0])?, num(parts[1])?, num(parts[2])?);
        if !(step > 0.0) || end < start {
            return Err(bad());
        }
        let n = ((end - start) / step + 1e-9).floor() as usize + 1;
        (0..n).map(|i| ((start + i as f64 * step) * 1e12).round() / 1e12).collect()
    } else {
        spec.split(',').map(num).collect::<Result<_>>()?
    };
    if grid.is_empty() || grid.iter().any(|p| !(*p > 0.0 && *p < 1.0)) {
        return Err(Error::Input(format!("p-grid `{spec}` must contain probabilities in (0, 1)")));
    }
    Ok(grid)
}

#[derive(Debug, Serialize)]
struct BoundsRow {
    p: f64,
    var_mc: f64,
    clvar_mc: f64,
    var_bound: f64,
    clvar_bound: f64,
}

pub fn bounds(a: &BoundsArgs) -> Result<()> {
    let doc = read_params(&a.params)?;
    let ps = portfolio(&doc, a.weights.as_ref())?;
    let grid = match a.p {
        Some(p) => parse_p_grid(&p.to_string())?,
        None => parse_p_grid(&a.p_grid)?,
    };
    check_paths(a.n_paths)?;
    let mp = &doc.market;
    let dist = simulation::simulate_terminal_wealth(mp, &ps, a.n_paths, a.common.seed)?;
    let ed = EmpiricalDist::new(dist.samples)?;
    let rows = grid
        .iter()
        .map(|&p| {
            let c = BoundConstants::new(mp, &ps, p)?;
            Ok(BoundsRow {
                p,
                var_mc: risk::var_p(&ed, p)?,
                clvar_mc: risk::clvar_p_with(&ed, p, TailPolicy::VarFallback)?,
                var_bound: comonotonic::var_taylor_bound(&c)?,
                clvar_bound: comonotonic::clvar_taylor_bound(&c),
            })
        })
        .collect::<Result<Vec<_>>>()?;
    with_output(a.common.out.as_deref(), |w| match a.common.format {
        Format::Json => json_out(&rows, w),
        Format::Csv => {
            let mut cw = csv::Writer::from_writer(w);
            cw.write_record(["p", "var_mc", "clvar_mc", "var_bound", "clvar_bound"]).map_err(csv_err)?;
            for r in &rows {
                cw.write_record([
                    format!("{}", r.p),
                    format!("{:.10}", r.var_mc),
                    format!("{:.10}", r.clvar_mc),
                    format!("{:.10}", r.var_bound),
                    format!("{:.10}", r.clvar_bound),
                ])
                .map_err(csv_err)?;
            }
            cw.flush().map_err(|e| Error::Input(format!("writing CSV: {e}")))
        }
    })
}

fn tag_floor(label: &str, e: Error) -> Error {
    match e {
        Error::InfeasibleRisk(msg) => Error::InfeasibleRisk(format!("{label}: {msg}")),
        other => other,
    }
}

pub fn optimize(a: &OptimizeArgs) -> Result<()> {
    let doc = read_params(&a.params)?;
    let mp = &doc.market;
    let alphas = doc
        .endowments
        .clone()
        .ok_or_else(|| Error::InvalidParams("document has no endowments".into()))?;
    let p = a.p.or(doc.p).ok_or_else(|| Error::Input("tail probability p is required (--p or document)".into()))?;
    let c0 = a.c0.or(doc.c0);
    let floors: Vec<(f64, WealthFloor)> = match (a.floor, &a.k_star) {
        (Some(k), _) => vec![(k, WealthFloor::Absolute(k))],
        (None, Some(ks)) => ks.iter().map(|&k| (k, WealthFloor::StopLoss(k))).collect(),
        (None, None) => match (doc.k_star, doc.k_floor) {
            (Some(k), _) => vec![(k, WealthFloor::StopLoss(k))],
            (None, Some(k)) => vec![(k, WealthFloor::Absolute(k))],
            (None, None) => DEFAULT_K_STARS.iter().map(|&k| (k, WealthFloor::StopLoss(k))).collect(),
        },
    };
    if floors.windows(2).any(|w| w[1].0 < w[0].0) {
        return Err(Error::Input("k* values must be sorted ascending".into()));
    }
    if a.n_paths > 0 {
        check_paths(a.n_paths)?;
    }
    if *mp == presets::three_asset_market() && a.reference == ReferenceWeights::UnconstrainedOptimum && a.mode == Mode::ClosedForm {
        eprintln!(
            "note: these inputs match the three-asset worked example. Endowments are read as one per \
             period (its four listed ones with three periods are taken as three); the floor sums \
             alpha_(i-1) e^((tau-i+1)r/tau) over i = 1..tau; the reference weights (0.3375, 0.3622, 0.2920) are reproduced with \
             --reference unit (jump mgfs at unit exposure), not the default reference"
        );
    }

    let total_alpha: f64 = alphas.iter().sum();
    let mut rows = Vec::with_capacity(floors.len());
    for (value, floor) in floors {
        let label = match floor {
            WealthFloor::StopLoss(k) => format!("k* = {k}"),
            WealthFloor::Absolute(k) => format!("K = {k}"),
        };
        let rb = RiskBudget { p, floor, c0 };
        let closed = || optimizer::solve_q_closed_form(mp, &alphas, &rb, &a.reference).map_err(|e| tag_floor(&label, e));
        let bisect = || optimizer::solve_q_bisection(mp, &alphas, &rb).map_err(|e| tag_floor(&label, e));
        let (result, bisection): (OptimizationResult, Option<OptimizationResult>) = match (a.mode, a.compare) {
            (_, true) => (closed()?, Some(bisect()?)),
            (Mode::ClosedForm, false) => (closed()?, None),
            (Mode::Bisection, false) => (bisect()?, None),
        };
        let terminal_wealth = if a.n_paths > 0 {
            let ps = PortfolioSpec::new(result.weights.clone(), alphas.clone());
            Some(simulation::simulate_terminal_wealth(mp, &ps, a.n_paths, a.common.seed)?.mean())
        } else {
            None
        };
        eprintln!("{label}: {result}");
        for d in result.diagnostics.iter().chain(bisection.iter().flat_map(|b| b.diagnostics.iter())) {
            eprintln!("  {d}");
        }
        rows.push(SweepRow {
            k_star: value,
            return_pct: terminal_wealth.map(|w| 100.0 * (w - total_alpha) / total_alpha),
            terminal_wealth,
            result,
            bisection,
        });
    }
    with_output(a.common.out.as_deref(), |w| match a.common.format {
        Format::Json => json_out(&rows, w),
        Format::Csv => optimizer::write_sweep_csv(&rows, w),
    })
}

pub fn constants(a: &ConstantsArgs) -> Result<()> {
    let doc = read_params(&a.params)?;
    let ps = portfolio(&doc, a.weights.as_ref())?;
    let p = a.p.or(doc.p).unwrap_or(0.05);
    let c = BoundConstants::new(&doc.market, &ps, p)?;
    with_output(a.out.as_deref(), |w| {
        w.write_all(c.to_json().as_bytes()).and_then(|_| writeln!(w)).map_err(|e| Error::Input(format!("writing JSON: {e}")))
    })
}

#[derive(Debug, Serialize)]
struct AssetFit {
    asset: String,
    n_returns: usize,
    merton: FitReport,
    gbm: FitReport,
}

#[derive(Debug, Serialize)]
struct FitOutput {
    aggregation: Aggregation,
    obs_per_period: f64,
    assets: Vec<AssetFit>,
    split: JumpSplit,
    /// Assembled market in rebalance-period units.
    market: Option<MarketParams>,
}

pub fn fit(a: &FitArgs) -> Result<()> {
    let file = File::open(&a.prices).map_err(|e| Error::Input(format!("{}: {e}", a.prices.display())))?;
    let table = PriceTable::from_csv(BufReader::new(file))?;
    let obs_per_period = match a.aggregate {
        Aggregation::Observation if !(a.period_obs > 0.0 && a.period_obs.is_finite()) => {
            return Err(Error::Input(format!("--period-obs must be positive, got {}", a.period_obs)))
        }
        Aggregation::Observation => a.period_obs,
        Aggregation::Monthly => 1.0,
    };
    let intensity = match a.intensity {
        Some(l) => IntensityMode::FixedTotal(l / obs_per_period),
        None => IntensityMode::Free,
    };
    let cfg = MomentConfig { intensity, rate: a.rate / obs_per_period, ..Default::default() };

    let mut assets = Vec::new();
    let mut fits: Vec<MertonFit> = Vec::new();
    let mut returns = Vec::new();
    let mut overlay = Vec::new();
    for (i, ticker) in table.tickers().into_iter().enumerate() {
        let sampled = table.sampled(ticker, a.aggregate)?;
        let r = table.returns(ticker, a.aggregate)?;
        let series = ReturnSeries::new(ticker, r.iter().map(|x| x.1).collect(), 1.0 / obs_per_period)?;
        let seed = mix_seed(a.seed, i as u64);
        let (merton, merton_model) = merton_report(&series, &cfg, a.n_boot, seed)?;
        let (gbm, gbm_model) = gbm_report(&series, a.n_boot, seed)?;
        if let FittedModel::Merton(f, _) = merton_model {
            fits.push(f);
        }
        let start = sampled[0].1;
        let m_path = fitted_path(start, &merton_model, series.len(), mix_seed(seed, 1))?;
        let g_path = fitted_path(start, &gbm_model, series.len(), mix_seed(seed, 2))?;
        for (k, (date, price)) in sampled.iter().enumerate() {
            overlay.push([date.to_string(), ticker.to_string(), format!("{price}"), format!("{:.10}", m_path[k]), format!("{:.10}", g_path[k])]);
        }
        if !merton.converged {
            eprintln!("warning: {ticker}: moment fit hit the iteration cap; best point reported");
        }
        assets.push(AssetFit { asset: ticker.to_string(), n_returns: series.len(), merton, gbm });
        returns.push(r);
    }

    let totals: Vec<f64> = fits.iter().map(|f| f.intensity).collect();
    let mut split = common_jump_split(&returns, &totals)?;
    if let Some(lc) = a.lambda_common {
        let lc = lc / obs_per_period;
        if !(lc >= 0.0) {
            return Err(Error::Input(format!("--lambda-common must be >= 0, got {lc}")));
        }
        split.lambda_common = lc;
        split.lambda_idio = totals.iter().map(|t| (t - lc).max(0.0)).collect();
    }
    let corr = if fits.len() > 1 { sample_correlation(&aligned_returns(&returns).1) } else { Ok(SymMatrix::identity(1)) };
    let market = match corr.and_then(|c| assemble_market(&fits, &split, &c, obs_per_period)) {
        Ok(mp) => Some(mp),
        Err(e) => {
            eprintln!("warning: no joint market assembled: {e}");
            None
        }
    };

    fs::create_dir_all(&a.out_dir).map_err(|e| Error::Input(format!("{}: {e}", a.out_dir.display())))?;
    let out = FitOutput { aggregation: a.aggregate, obs_per_period, assets, split, market };
    let mut w = create(&a.out_dir.join("fit_report.json"))?;
    json_out(&out, &mut w)?;
    w.flush().map_err(|e| Error::Input(format!("writing JSON: {e}")))?;

    let mut cw = csv::Writer::from_writer(create(&a.out_dir.join("fitted_paths.csv"))?);
    cw.write_record(["date", "ticker", "observed", "merton", "gbm"]).map_err(csv_err)?;
    for rec in &overlay {
        cw.write_record(rec).map_err(csv_err)?;
    }
    cw.flush().map_err(|e| Error::Input(format!("writing CSV: {e}")))?;

    with_output(None, |w| {
        let mut cw = csv::Writer::from_writer(w);
        cw.write_record(["asset", "model", "ks_stat", "p_value"]).map_err(csv_err)?;
        for af in &out.assets {
            for r in [&af.merton, &af.gbm] {
                cw.write_record([r.asset.clone(), r.model.clone(), format!("{:.6}", r.ks_stat), format!("{:.3}", r.p_value)])
                    .map_err(csv_err)?;
            }
        }
        cw.flush().map_err(|e| Error::Input(format!("writing CSV: {e}")))
    })
}
