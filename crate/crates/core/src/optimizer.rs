//! CLVaR-constrained maximization of `E[W'^L]` over constant-mix weights.
//!
//! The optimum lies on the fractional-Kelly ray `x = q x*`, `x* = Σ⁻¹(μ − r1)`. Along it the
//! risk constraint `CLVaR_p(W'^L) ≥ K` is the quadratic `B1 q² + B2 q + B3 ≥ 0` with
//! `B1 = −c7 QF*`, `B2 = c6 QF* − c9 √QF*`, `B3 = c5 − K`, and `q = min{q1, q2, q3}`.

use std::fmt;
use std::io::Write;

use serde::Serialize;

use crate::comonotonic::{self, BoundConstants};
use crate::error::{Error, Result};
use crate::model::{self, MarketParams, PortfolioSpec, RiskBudget, WealthFloor};
use crate::numerics;
use crate::simulation;

/// Relative gap below which two candidate fractions count as tied.
const TIE_TOL: f64 = 1e-12;
/// Bisection stops once the bracket is this narrow.
pub const BISECTION_TOL: f64 = 1e-10;

/// `K = k* Σ_{i=1}^{τ} α_{i−1} e^{(τ−i+1) r / τ}`.
pub fn stop_loss_threshold(k_star: f64, alphas: &[f64], r: f64) -> f64 {
    let tau = alphas.len();
    let tf = tau as f64;
    k_star
        * alphas
            .iter()
            .enumerate()
            .map(|(i, a)| a * ((tf - i as f64) * r / tf).exp())
            .sum::<f64>()
}

/// Wealth floor `K` implied by a risk budget and endowment schedule.
pub fn floor_value(rb: &RiskBudget, alphas: &[f64], r: f64) -> f64 {
    match rb.floor {
        WealthFloor::Absolute(k) => k,
        WealthFloor::StopLoss(k_star) => stop_loss_threshold(k_star, alphas, r),
    }
}

/// `x* = Σ⁻¹(μ − r1)`.
pub fn kelly_direction(mp: &MarketParams) -> Result<Vec<f64>> {
    numerics::solve_spd(&mp.sigma, &model::excess_drift(mp))
}

/// Exposures at which the jump mgfs inside `c5` are evaluated in closed-form mode.
#[derive(Debug, Clone, PartialEq, Default, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum ReferenceWeights {
    /// `q2 x*`, the unconstrained optimum along the Kelly ray.
    #[default]
    UnconstrainedOptimum,
    /// Unit exposure per asset: the mgfs reduce to the raw jump mgfs `e^{μ_Z + σ_Z²/2}`.
    UnitExposure,
    Explicit(Vec<f64>),
}

impl std::str::FromStr for ReferenceWeights {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "optimum" => Ok(Self::UnconstrainedOptimum),
            "unit" => Ok(Self::UnitExposure),
            other => {
                let v = other
                    .split(',')
                    .map(|t| t.trim().parse::<f64>())
                    .collect::<std::result::Result<Vec<_>, _>>()
                    .map_err(|_| Error::Input(format!("reference weights '{other}': expected optimum, unit or a comma list")))?;
                Ok(Self::Explicit(v))
            }
        }
    }
}

/// Candidate that attained the minimum.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum Binding {
    /// `q1`: the CLVaR floor.
    Risk,
    /// `q2`: the unconstrained vertex.
    Unconstrained,
    /// `q3`: the drift cap.
    DriftCap,
    /// All candidates non-positive; the portfolio is fully risk-free.
    RiskFree,
}

impl Binding {
    pub fn label(self) -> &'static str {
        match self {
            Self::Risk => "q1",
            Self::Unconstrained => "q2",
            Self::DriftCap => "q3",
            Self::RiskFree => "q0",
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum SolveMethod {
    ClosedForm,
    Bisection,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct OptimizationResult {
    pub method: SolveMethod,
    pub x_star: Vec<f64>,
    /// `(μ − r1)ᵀ Σ⁻¹ (μ − r1)`.
    pub qf_star: f64,
    /// Larger root of the risk quadratic (`+∞` when the quadratic is vacuous).
    pub q1: f64,
    pub q2: f64,
    /// `(c0 − r)/QF*`; `+∞` without a drift cap.
    pub q3: f64,
    pub q: f64,
    pub weights: Vec<f64>,
    pub binding: Vec<Binding>,
    /// `E[W'^L]` at the solution (constants at the reference exposures in closed-form mode).
    pub objective: f64,
    /// `CVaR_{1−p}(−W'^L)` at the solution, same constants as `objective`.
    pub cvar: f64,
    /// `CVaR_{1−p}(−W'^L)` with every constant re-evaluated at the final weights.
    pub cvar_at_weights: Option<f64>,
    pub k_used: f64,
    /// Exposures used inside the jump mgfs.
    pub jump_reference: Vec<f64>,
    /// Amount by which the re-evaluated constraint is violated, if it is.
    pub constraint_violation: Option<f64>,
    pub diagnostics: Vec<String>,
}

impl OptimizationResult {
    pub fn total(&self) -> f64 {
        self.weights.iter().sum()
    }

    pub fn binding_label(&self) -> String {
        self.binding.iter().map(|b| b.label()).collect::<Vec<_>>().join("+")
    }
}

impl fmt::Display for OptimizationResult {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "q = {:.6} ({}), weights = [", self.q, self.binding_label())?;
        for (i, w) in self.weights.iter().enumerate() {
            if i > 0 {
                f.write_str(", ")?;
            }
            write!(f, "{w:.4}")?;
        }
        write!(f, "], total = {:.4}", self.total())
    }
}

struct Ray {
    x_star: Vec<f64>,
    qf_star: f64,
    q2: f64,
    q3: f64,
    k: f64,
    c6: f64,
    c7: f64,
}

fn ray(mp: &MarketParams, alphas: &[f64], rb: &RiskBudget) -> Result<Ray> {
    mp.validate()?;
    rb.validate()?;
    let kernel = comonotonic::schedule_kernel(alphas)?;
    if !(kernel.quad_sum > 0.0) {
        return Err(Error::DegenerateSchedule);
    }
    let excess = model::excess_drift(mp);
    let x_star = kelly_direction(mp)?;
    let qf_star = numerics::dot(&excess, &x_star);
    let c6: f64 = alphas.iter().zip(kernel.remaining()).map(|(a, rem)| a * rem).sum();
    let c7 = alphas.iter().zip(&kernel.row_sums).map(|(a, rs)| a * rs * rs).sum::<f64>() / (2.0 * kernel.quad_sum);
    let q3 = match rb.c0 {
        None => f64::INFINITY,
        Some(c0) if qf_star > 0.0 => (c0 - mp.r) / qf_star,
        Some(c0) if c0 >= mp.r => f64::INFINITY,
        Some(_) => -1.0,
    };
    Ok(Ray { x_star, qf_star, q2: c6 / (2.0 * c7), q3, k: floor_value(rb, alphas, mp.r), c6, c7 })
}

fn scaled(v: &[f64], q: f64) -> Vec<f64> {
    v.iter().map(|x| q * x).collect()
}

fn constants(mp: &MarketParams, alphas: &[f64], x: &[f64], jump: &[f64], p: f64) -> Result<BoundConstants> {
    let ps = PortfolioSpec::new(x.to_vec(), alphas.to_vec());
    BoundConstants::with_jump_weights(mp, &ps, jump, p)
}

fn minimizers(cands: &[(f64, Binding)]) -> (f64, Vec<Binding>) {
    let q = cands.iter().map(|c| c.0).fold(f64::INFINITY, f64::min);
    let tol = TIE_TOL * q.abs().max(1.0);
    let binding = cands.iter().filter(|c| c.0 - q <= tol).map(|c| c.1).collect();
    (q, binding)
}

/// Evaluates the CLVaR constraint with constants at the final weights and records any violation.
fn verify(mp: &MarketParams, alphas: &[f64], p: f64, k: f64, res: &mut OptimizationResult) {
    match constants(mp, alphas, &res.weights, &res.weights, p) {
        Ok(c) => {
            let cvar = comonotonic::cvar_taylor_bound(&c);
            res.cvar_at_weights = Some(cvar);
            let excess = cvar + k;
            if excess > 1e-9 * (1.0 + k.abs()) {
                res.constraint_violation = Some(excess);
                res.diagnostics.push(format!(
                    "CLVaR floor violated at the final weights by {excess:.6e} once c5 is re-evaluated there"
                ));
            }
        }
        Err(e) => res.diagnostics.push(format!("constraint not re-verifiable at final weights: {e}")),
    }
}

/// Closed-form solution with constants frozen at `reference`.
pub fn solve_q_closed_form(
    mp: &MarketParams,
    alphas: &[f64],
    rb: &RiskBudget,
    reference: &ReferenceWeights,
) -> Result<OptimizationResult> {
    let ray = ray(mp, alphas, rb)?;
    let mut diagnostics = Vec::new();
    let jump_reference = match reference {
        ReferenceWeights::UnconstrainedOptimum => scaled(&ray.x_star, ray.q2),
        ReferenceWeights::UnitExposure => vec![1.0; mp.m],
        ReferenceWeights::Explicit(v) if v.len() == mp.m => v.clone(),
        ReferenceWeights::Explicit(v) => {
            return Err(Error::DimensionMismatch(format!("reference weights length {} != m = {}", v.len(), mp.m)))
        }
    };
    let frozen = constants(mp, alphas, &jump_reference, &jump_reference, rb.p).map_err(|e| match e {
        Error::InvalidWeight(msg) => Error::InvalidWeight(format!(
            "{msg}; reference exposures {jump_reference:?} leave [0, 1] (choose unit or explicit reference weights)"
        )),
        other => other,
    })?;
    let (c5, c9) = (frozen.c5, frozen.c9);
    debug_assert!((frozen.c6 - ray.c6).abs() < 1e-12 && (frozen.c7 - ray.c7).abs() < 1e-12);

    let b1 = -ray.c7 * ray.qf_star;
    let b2 = ray.c6 * ray.qf_star - c9 * ray.qf_star.sqrt();
    let b3 = c5 - ray.k;
    let q1 = if ray.qf_star > 0.0 {
        let disc = b2 * b2 - 4.0 * b1 * b3;
        if disc < 0.0 {
            return Err(Error::InfeasibleRisk(format!(
                "no fraction meets the CLVaR floor K = {:.6}: discriminant {disc:.6e} < 0",
                ray.k
            )));
        }
        let root_hi = (-b2 - disc.sqrt()) / (2.0 * b1);
        let root_lo = (-b2 + disc.sqrt()) / (2.0 * b1);
        if root_lo > 0.0 || root_hi < 0.0 {
            return Err(Error::InfeasibleRisk(format!(
                "CLVaR floor K = {:.6} excludes the risk-free portfolio: feasible q in [{root_lo:.6}, {root_hi:.6}]",
                ray.k
            )));
        }
        root_hi
    } else {
        if b3 < 0.0 {
            return Err(Error::InfeasibleRisk(format!(
                "deterministic wealth c5 = {c5:.6} is below the floor K = {:.6}",
                ray.k
            )));
        }
        diagnostics.push("excess drift is zero: the Kelly direction vanishes".into());
        f64::INFINITY
    };

    let cands = [(q1, Binding::Risk), (ray.q2, Binding::Unconstrained), (ray.q3, Binding::DriftCap)];
    let (mut q, mut binding) = minimizers(&cands);
    if q < 0.0 {
        diagnostics.push(format!("smallest candidate fraction {q:.6} is negative; holding only the risk-free asset"));
        q = 0.0;
        binding = vec![Binding::RiskFree];
    }
    if !q.is_finite() {
        q = 0.0;
    }
    let weights = scaled(&ray.x_star, q);
    let ex = q * ray.qf_star;
    let qf = q * q * ray.qf_star;
    let objective = c5 + ray.c6 * ex - ray.c7 * qf;
    let cvar = -c5 - ray.c6 * ex + ray.c7 * qf + c9 * qf.sqrt();
    let mut res = OptimizationResult {
        method: SolveMethod::ClosedForm,
        x_star: ray.x_star,
        qf_star: ray.qf_star,
        q1,
        q2: ray.q2,
        q3: ray.q3,
        q,
        weights,
        binding,
        objective,
        cvar,
        cvar_at_weights: None,
        k_used: ray.k,
        jump_reference,
        constraint_violation: None,
        diagnostics,
    };
    verify(mp, alphas, rb.p, ray.k, &mut res);
    Ok(res)
}

/// Largest `q ≤ min(q2, q3)` meeting the floor with every constant evaluated at `q x*`.
pub fn solve_q_bisection(mp: &MarketParams, alphas: &[f64], rb: &RiskBudget) -> Result<OptimizationResult> {
    let ray = ray(mp, alphas, rb)?;
    let mut diagnostics = Vec::new();
    let eval = |q: f64| -> Result<BoundConstants> {
        let x = scaled(&ray.x_star, q);
        constants(mp, alphas, &x, &x, rb.p)
    };
    let feasible = |c: &BoundConstants| comonotonic::cvar_taylor_bound(c) <= -ray.k;

    let at_zero = eval(0.0)?;
    if !feasible(&at_zero) {
        return Err(Error::InfeasibleRisk(format!(
            "risk-free wealth {:.6} is below the floor K = {:.6}",
            at_zero.c5, ray.k
        )));
    }
    let mut hi = ray.q2.min(ray.q3);
    if hi < 0.0 {
        diagnostics.push(format!("drift cap gives q3 = {:.6} < 0; holding only the risk-free asset", ray.q3));
        hi = 0.0;
    }
    // The jump mgfs need each exposure q x*_j inside [0, 1].
    let has_jumps = mp.lambda_common > 0.0 || mp.lambda_idio.iter().any(|l| *l > 0.0);
    if has_jumps {
        let cap = ray
            .x_star
            .iter()
            .map(|x| if *x > 0.0 { 1.0 / x } else if *x < 0.0 { 0.0 } else { f64::INFINITY })
            .fold(f64::INFINITY, f64::min);
        if cap < hi {
            diagnostics.push(format!("search capped at q = {cap:.6} to keep exposures in [0, 1]"));
            hi = cap;
        }
    }

    let (q, binding) = if feasible(&eval(hi)?) {
        let b = if (ray.q2 - ray.q3).abs() <= TIE_TOL * hi.abs().max(1.0) {
            vec![Binding::Unconstrained, Binding::DriftCap]
        } else if hi == ray.q2 {
            vec![Binding::Unconstrained]
        } else if hi == ray.q3 {
            vec![Binding::DriftCap]
        } else if hi == 0.0 {
            vec![Binding::RiskFree]
        } else {
            vec![]
        };
        (hi, b)
    } else {
        let (mut lo, mut up) = (0.0, hi);
        while up - lo > BISECTION_TOL {
            let mid = 0.5 * (lo + up);
            if feasible(&eval(mid)?) {
                lo = mid;
            } else {
                up = mid;
            }
        }
        (lo, vec![Binding::Risk])
    };
    let c = eval(q)?;
    let weights = scaled(&ray.x_star, q);
    let mut res = OptimizationResult {
        method: SolveMethod::Bisection,
        x_star: ray.x_star,
        qf_star: ray.qf_star,
        q1: if binding.contains(&Binding::Risk) { q } else { f64::INFINITY },
        q2: ray.q2,
        q3: ray.q3,
        q,
        jump_reference: weights.clone(),
        weights,
        binding,
        objective: comonotonic::expected_taylor_bound(&c),
        cvar: comonotonic::cvar_taylor_bound(&c),
        cvar_at_weights: None,
        k_used: ray.k,
        constraint_violation: None,
        diagnostics,
    };
    verify(mp, alphas, rb.p, ray.k, &mut res);
    Ok(res)
}

#[derive(Debug, Clone, PartialEq)]
pub struct SweepConfig {
    pub reference: ReferenceWeights,
    /// Monte Carlo size for the terminal-wealth column; `None` skips it.
    pub n_paths: Option<usize>,
    pub seed: u64,
    /// Also run bisection and append its fraction and total.
    pub compare_bisection: bool,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct SweepRow {
    pub k_star: f64,
    pub result: OptimizationResult,
    /// `E[W_τ]` by simulation at the chosen weights.
    pub terminal_wealth: Option<f64>,
    /// `(E[W_τ] − Σα) / Σα` in percent.
    pub return_pct: Option<f64>,
    pub bisection: Option<OptimizationResult>,
}

/// One closed-form solution per stop-loss rate in `k_stars`.
pub fn table_sweep(
    mp: &MarketParams,
    alphas: &[f64],
    rb_base: &RiskBudget,
    k_stars: &[f64],
    cfg: &SweepConfig,
) -> Result<Vec<SweepRow>> {
    if k_stars.windows(2).any(|w| w[1] < w[0]) {
        return Err(Error::Input("k* values must be sorted ascending".into()));
    }
    let total_alpha: f64 = alphas.iter().sum();
    k_stars
        .iter()
        .map(|&k_star| {
            let rb = RiskBudget { floor: WealthFloor::StopLoss(k_star), ..*rb_base };
            let result = solve_q_closed_form(mp, alphas, &rb, &cfg.reference)?;
            let terminal_wealth = match cfg.n_paths {
                Some(n) => {
                    let ps = PortfolioSpec::new(result.weights.clone(), alphas.to_vec());
                    Some(simulation::simulate_terminal_wealth(mp, &ps, n, cfg.seed)?.mean())
                }
                None => None,
            };
            let bisection = if cfg.compare_bisection { Some(solve_q_bisection(mp, alphas, &rb)?) } else { None };
            Ok(SweepRow {
                k_star,
                return_pct: terminal_wealth.map(|w| 100.0 * (w - total_alpha) / total_alpha),
                terminal_wealth,
                result,
                bisection,
            })
        })
        .collect()
}

fn fmt_opt(v: Option<f64>) -> String {
    v.map_or_else(String::new, |x| format!("{x:.6}"))
}

fn fmt_q(v: f64) -> String {
    if v.is_finite() {
        format!("{v:.10}")
    } else {
        "inf".into()
    }
}

/// Writes `k_star,x_1..x_m,total,terminal_wealth,return_pct,binding,q1,q2,q3`, followed by
/// `q_bisection,total_bisection` when bisection was run.
pub fn write_sweep_csv<W: Write>(rows: &[SweepRow], out: W) -> Result<()> {
    let io = |e: csv::Error| Error::Input(format!("writing CSV: {e}"));
    let m = rows.first().map_or(0, |r| r.result.weights.len());
    let with_bisect = rows.iter().any(|r| r.bisection.is_some());
    let mut header = vec!["k_star".to_string()];
    header.extend((1..=m).map(|j| format!("x_{j}")));
    header.extend(["total", "terminal_wealth", "return_pct", "binding", "q1", "q2", "q3"].map(String::from));
    if with_bisect {
        header.extend(["q_bisection", "total_bisection"].map(String::from));
    }
    let mut w = csv::Writer::from_writer(out);
    w.write_record(&header).map_err(io)?;
    for row in rows {
        let r = &row.result;
        let mut rec = vec![format!("{}", row.k_star)];
        rec.extend(r.weights.iter().map(|x| format!("{x:.6}")));
        rec.push(format!("{:.6}", r.total()));
        rec.push(fmt_opt(row.terminal_wealth));
        rec.push(fmt_opt(row.return_pct));
        rec.push(r.binding_label());
        rec.extend([fmt_q(r.q1), fmt_q(r.q2), fmt_q(r.q3)]);
        if with_bisect {
            match &row.bisection {
                Some(b) => rec.extend([fmt_q(b.q), format!("{:.6}", b.total())]),
                None => rec.extend([String::new(), String::new()]),
            }
        }
        w.write_record(&rec).map_err(io)?;
    }
    w.flush().map_err(|e| Error::Input(format!("writing CSV: {e}")))?;
    Ok(())
}
