use crate::error::{Error, Result};
use crate::model::{self, MarketParams};

fn check_asset(mp: &MarketParams, j: usize) -> Result<()> {
    if j >= mp.m {
        return Err(Error::DimensionMismatch(format!("asset index {j} out of range for m = {}", mp.m)));
    }
    Ok(())
}

/// `E[Y^j] = r + μ_j − σ_j²/2 − λ h_{j,0} − λ_j h_{j,1} + λ μ_{Z,0} + λ_j μ_{Z,1}`.
pub fn theoretical_mean_return(mp: &MarketParams, j: usize) -> Result<f64> {
    check_asset(mp, j)?;
    let (c, i) = (&mp.common_jumps[j], &mp.idio_jumps[j]);
    Ok(mp.r + mp.mu[j] - 0.5 * mp.sigma.get(j, j)
        - mp.lambda_common * (c.mgf_at_1() - 1.0)
        - mp.lambda_idio[j] * (i.mgf_at_1() - 1.0)
        + mp.lambda_common * c.mean
        + mp.lambda_idio[j] * i.mean)
}

/// Cumulants `κ_1 .. κ_order` (order ≤ 4) of asset `j`'s one-period log return.
///
/// `κ_1` is assembled from the drift vector and the compensated jump means, independently
/// of [`theoretical_mean_return`]; for `n ≥ 2`, `κ_n = σ² 1{n=2} + λ E[Z_0ⁿ] + λ_j E[Z_1ⁿ]`.
pub fn merton_cumulants(mp: &MarketParams, j: usize, order: usize) -> Result<Vec<f64>> {
    check_asset(mp, j)?;
    if !(1..=4).contains(&order) {
        return Err(Error::Domain(format!("cumulant order {order} outside 1..=4")));
    }
    let var = mp.sigma.get(j, j);
    let (lc, li) = (mp.lambda_common, mp.lambda_idio[j]);
    let (c, i) = (&mp.common_jumps[j], &mp.idio_jumps[j]);
    let kappa1 = model::drift_vector(mp)[j] - 0.5 * var + lc * c.raw_moment(1) + li * i.raw_moment(1);
    let mut out = vec![kappa1];
    for n in 2..=order as u32 {
        let gauss = if n == 2 { var } else { 0.0 };
        out.push(gauss + lc * c.raw_moment(n) + li * i.raw_moment(n));
    }
    Ok(out)
}

/// Unbiased k-statistics `k_1 .. k_4` of a sample (needs at least 4 points).
pub fn k_statistics(x: &[f64]) -> Result<[f64; 4]> {
    let n = x.len();
    if n < 4 {
        return Err(Error::DegenerateData(format!("need at least 4 observations for k-statistics, got {n}")));
    }
    let nf = n as f64;
    let mean = x.iter().sum::<f64>() / nf;
    let (mut m2, mut m3, mut m4) = (0.0, 0.0, 0.0);
    for v in x {
        let d = v - mean;
        let d2 = d * d;
        m2 += d2;
        m3 += d2 * d;
        m4 += d2 * d2;
    }
    m2 /= nf;
    m3 /= nf;
    m4 /= nf;
    let k2 = nf * m2 / (nf - 1.0);
    let k3 = nf * nf * m3 / ((nf - 1.0) * (nf - 2.0));
    let k4 = nf * nf * ((nf + 1.0) * m4 - 3.0 * (nf - 1.0) * m2 * m2) / ((nf - 1.0) * (nf - 2.0) * (nf - 3.0));
    Ok([mean, k2, k3, k4])
}

/// Mean and unbiased variance.
pub fn mean_variance(x: &[f64]) -> Result<(f64, f64)> {
    let n = x.len();
    if n < 2 {
        return Err(Error::DegenerateData(format!("need at least 2 observations, got {n}")));
    }
    let mean = x.iter().sum::<f64>() / n as f64;
    let var = x.iter().map(|v| (v - mean).powi(2)).sum::<f64>() / (n - 1) as f64;
    Ok((mean, var))
}
