//! Monte Carlo engine: exact per-period sampling, terminal wealth, an Euler oracle and
//! scenario paths.
//!
//! Path `i` of any run draws from `RngStream::new(seed, i)`, so results are identical
//! for every worker count.

mod euler;
mod rng;
mod scenario;
mod shock;
mod wealth;

pub use euler::{euler_maruyama_price, EulerIntegrator, MIN_EULER_STEPS};
pub use rng::{mix_seed, PoissonSampler, RngStream};
pub use scenario::{
    scenario_paths, verify_jump_taxonomy, ScenarioConfig, ScenarioKind, ScenarioPath, ScenarioPaths,
};
pub use shock::{
    period_log_return, sample_period_shock, star_log_jump, LogReturnParts, PeriodShock, ReturnEvaluator,
    ShockSampler,
};
pub use wealth::{
    log_return_series, sample_shocks, simulate_log_returns, simulate_terminal_wealth, spec_hash,
    terminal_wealth_direct, terminal_wealth_recursive, WealthDistribution,
};
