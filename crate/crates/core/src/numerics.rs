//! Dense SPD linear algebra and standard-normal distribution primitives.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

const SYMMETRY_TOL: f64 = 1e-12;
const PIVOT_REL_TOL: f64 = 1e-12;

/// Square symmetric matrix stored row-major.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "Vec<Vec<f64>>", into = "Vec<Vec<f64>>")]
pub struct SymMatrix {
    dim: usize,
    data: Vec<f64>,
}

impl SymMatrix {
    pub fn from_rows(rows: Vec<Vec<f64>>) -> Result<Self> {
        let dim = rows.len();
        if dim == 0 {
            return Err(Error::DimensionMismatch("matrix must be at least 1x1".into()));
        }
        let mut data = Vec::with_capacity(dim * dim);
        for (i, row) in rows.iter().enumerate() {
            if row.len() != dim {
                return Err(Error::DimensionMismatch(format!(
                    "row {i} has {} entries, expected {dim}",
                    row.len()
                )));
            }
            if row.iter().any(|v| !v.is_finite()) {
                return Err(Error::InvalidParams(format!("row {i} contains a non-finite entry")));
            }
            data.extend_from_slice(row);
        }
        for i in 0..dim {
            for j in 0..i {
                let (a, b) = (data[i * dim + j], data[j * dim + i]);
                if (a - b).abs() > SYMMETRY_TOL {
                    return Err(Error::InvalidParams(format!(
                        "matrix not symmetric at ({i},{j}): {a} vs {b}"
                    )));
                }
            }
        }
        Ok(Self { dim, data })
    }

    pub fn identity(dim: usize) -> Self {
        let mut data = vec![0.0; dim * dim];
        for i in 0..dim {
            data[i * dim + i] = 1.0;
        }
        Self { dim, data }
    }

    pub fn diagonal(diag: &[f64]) -> Self {
        let dim = diag.len();
        let mut data = vec![0.0; dim * dim];
        for (i, d) in diag.iter().enumerate() {
            data[i * dim + i] = *d;
        }
        Self { dim, data }
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    #[inline]
    pub fn get(&self, i: usize, j: usize) -> f64 {
        self.data[i * self.dim + j]
    }

    pub fn diag(&self) -> Vec<f64> {
        (0..self.dim).map(|i| self.get(i, i)).collect()
    }

    pub fn rows(&self) -> Vec<Vec<f64>> {
        self.data.chunks(self.dim).map(<[f64]>::to_vec).collect()
    }

    pub fn mul_vec(&self, v: &[f64]) -> Vec<f64> {
        self.data
            .chunks(self.dim)
            .map(|row| row.iter().zip(v).map(|(a, b)| a * b).sum())
            .collect()
    }

    /// `vᵀ A v`.
    pub fn quad_form(&self, v: &[f64]) -> f64 {
        self.mul_vec(v).iter().zip(v).map(|(a, b)| a * b).sum()
    }

    /// Correlation matrix `A_ij / sqrt(A_ii A_jj)`; requires a positive diagonal.
    pub fn correlation(&self) -> Result<SymMatrix> {
        let sd: Vec<f64> = self.diag().iter().map(|d| d.sqrt()).collect();
        if let Some(i) = sd.iter().position(|s| !(*s > 0.0)) {
            return Err(Error::InvalidParams(format!("diagonal entry {i} must be positive")));
        }
        let n = self.dim;
        let mut data = vec![0.0; n * n];
        for i in 0..n {
            for j in 0..n {
                data[i * n + j] = if i == j { 1.0 } else { self.get(i, j) / (sd[i] * sd[j]) };
            }
        }
        Ok(SymMatrix { dim: n, data })
    }
}

impl TryFrom<Vec<Vec<f64>>> for SymMatrix {
    type Error = Error;
    fn try_from(rows: Vec<Vec<f64>>) -> Result<Self> {
        SymMatrix::from_rows(rows)
    }
}

impl From<SymMatrix> for Vec<Vec<f64>> {
    fn from(m: SymMatrix) -> Self {
        m.rows()
    }
}

/// Lower-triangular Cholesky factor (row-major, upper part zero).
#[derive(Debug, Clone, PartialEq)]
pub struct LowerTriangular {
    dim: usize,
    data: Vec<f64>,
}

impl LowerTriangular {
    pub fn dim(&self) -> usize {
        self.dim
    }

    #[inline]
    pub fn get(&self, i: usize, j: usize) -> f64 {
        self.data[i * self.dim + j]
    }

    /// `L · v`, writing into `out`.
    pub fn mul_vec_into(&self, v: &[f64], out: &mut [f64]) {
        for i in 0..self.dim {
            let row = &self.data[i * self.dim..i * self.dim + i + 1];
            out[i] = row.iter().zip(v).map(|(a, b)| a * b).sum();
        }
    }

    /// `L · Lᵀ`, row-major.
    pub fn reconstruct(&self) -> Vec<Vec<f64>> {
        let n = self.dim;
        (0..n)
            .map(|i| {
                (0..n)
                    .map(|j| (0..=i.min(j)).map(|k| self.get(i, k) * self.get(j, k)).sum())
                    .collect()
            })
            .collect()
    }

    fn forward(&self, b: &[f64]) -> Vec<f64> {
        let n = self.dim;
        let mut y = vec![0.0; n];
        for i in 0..n {
            let s: f64 = (0..i).map(|k| self.get(i, k) * y[k]).sum();
            y[i] = (b[i] - s) / self.get(i, i);
        }
        y
    }

    fn backward(&self, y: &[f64]) -> Vec<f64> {
        let n = self.dim;
        let mut x = vec![0.0; n];
        for i in (0..n).rev() {
            let s: f64 = (i + 1..n).map(|k| self.get(k, i) * x[k]).sum();
            x[i] = (y[i] - s) / self.get(i, i);
        }
        x
    }
}

/// Cholesky factorization. A pivot must exceed `1e-12 · max diagonal` to count as positive.
pub fn cholesky(a: &SymMatrix) -> Result<LowerTriangular> {
    let n = a.dim();
    let scale = a.diag().iter().fold(0.0_f64, |m, d| m.max(d.abs()));
    let tol = PIVOT_REL_TOL * scale.max(f64::MIN_POSITIVE);
    let mut l = vec![0.0; n * n];
    for i in 0..n {
        for j in 0..=i {
            let s: f64 = (0..j).map(|k| l[i * n + k] * l[j * n + k]).sum();
            if i == j {
                let pivot = a.get(i, i) - s;
                if !(pivot > tol) {
                    return Err(Error::NotPositiveDefinite { row: i, pivot });
                }
                l[i * n + i] = pivot.sqrt();
            } else {
                l[i * n + j] = (a.get(i, j) - s) / l[j * n + j];
            }
        }
    }
    Ok(LowerTriangular { dim: n, data: l })
}

/// Solves `A x = b` for symmetric positive definite `A`.
pub fn solve_spd(a: &SymMatrix, b: &[f64]) -> Result<Vec<f64>> {
    if b.len() != a.dim() {
        return Err(Error::DimensionMismatch(format!(
            "right-hand side has length {}, matrix is {}x{}",
            b.len(),
            a.dim(),
            a.dim()
        )));
    }
    let l = cholesky(a)?;
    Ok(l.backward(&l.forward(b)))
}

pub fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

const FRAC_1_SQRT_2PI: f64 = 0.398_942_280_401_432_7;

pub fn normal_pdf(z: f64) -> f64 {
    FRAC_1_SQRT_2PI * (-0.5 * z * z).exp()
}

/// Standard normal CDF via `erfc`, accurate in both tails.
pub fn normal_cdf(z: f64) -> f64 {
    0.5 * libm::erfc(-z / std::f64::consts::SQRT_2)
}

/// Inverse standard normal CDF: Wichura's AS241 rational approximation plus one Newton step.
pub fn std_normal_quantile(p: f64) -> Result<f64> {
    if !(p > 0.0 && p < 1.0) {
        return Err(Error::Domain(format!("quantile probability must lie in (0,1), got {p}")));
    }
    let x = as241(p);
    // One Newton refinement against the erfc-based CDF.
    let step = (normal_cdf(x) - p) / normal_pdf(x);
    Ok(if step.is_finite() { x - step } else { x })
}

fn poly(coef: &[f64], x: f64) -> f64 {
    coef.iter().rev().fold(0.0, |acc, c| acc * x + c)
}

// Coefficients as published.
#[allow(clippy::excessive_precision)]
fn as241(p: f64) -> f64 {
    const A: [f64; 8] = [
        3.387_132_872_796_366_6,
        133.141_667_891_784_38,
        1_971.590_950_306_551_4,
        13_731.693_765_509_461,
        45_921.953_931_549_87,
        67_265.770_927_008_7,
        33_430.575_583_588_13,
        2_509.080_928_730_122_7,
    ];
    const B: [f64; 8] = [
        1.0,
        42.313_330_701_600_91,
        687.187_007_492_057_9,
        5_394.196_021_424_751,
        21_213.794_301_586_597,
        39_307.895_800_092_71,
        28_729.085_735_721_943,
        5_226.495_278_852_854_5,
    ];
    const C: [f64; 8] = [
        1.423_437_110_749_683_6,
        4.630_337_846_156_545_3,
        5.769_497_221_460_691,
        3.647_848_324_763_204_6,
        1.270_458_252_452_368_4,
        0.241_780_725_177_450_6,
        0.022_723_844_989_269_184,
        7.745_450_142_783_414e-4,
    ];
    const D: [f64; 8] = [
        1.0,
        2.053_191_626_637_759,
        1.676_384_830_183_803_8,
        0.689_767_334_985_1,
        0.148_103_976_427_480_07,
        0.015_198_666_563_616_457,
        5.475_938_084_995_345e-4,
        1.050_750_071_644_416_8e-9,
    ];
    const E: [f64; 8] = [
        6.657_904_643_501_103,
        5.463_784_911_164_114,
        1.784_826_539_917_291_3,
        0.296_560_571_828_504_9,
        0.026_532_189_526_576_124,
        0.001_242_660_947_388_078_4,
        2.711_555_568_743_487_6e-5,
        2.010_334_399_292_288_1e-7,
    ];
    const F: [f64; 8] = [
        1.0,
        0.599_832_206_555_887_9,
        0.136_929_880_922_735_8,
        0.014_875_361_290_850_615,
        7.868_691_311_456_133e-4,
        1.846_318_317_510_054_8e-5,
        1.421_511_758_316_446e-7,
        2.044_263_103_389_939_7e-15,
    ];

    let q = p - 0.5;
    if q.abs() <= 0.425 {
        let r = 0.180_625 - q * q;
        return q * poly(&A, r) / poly(&B, r);
    }
    let r = if q < 0.0 { p } else { 1.0 - p };
    let r = (-r.ln()).sqrt();
    let val = if r <= 5.0 {
        let r = r - 1.6;
        poly(&C, r) / poly(&D, r)
    } else {
        let r = r - 5.0;
        poly(&E, r) / poly(&F, r)
    };
    if q < 0.0 {
        -val
    } else {
        val
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    fn example_41_sigma() -> SymMatrix {
        SymMatrix::from_rows(vec![
            vec![1.3689, 1.3455, 1.3501],
            vec![1.3455, 1.3689, 1.3501],
            vec![1.3501, 1.3501, 1.3877],
        ])
        .unwrap()
    }

    /// Bisection on the erfc-based CDF, independent of the rational approximation.
    fn quantile_by_bisection(p: f64) -> f64 {
        let (mut lo, mut hi) = (-40.0, 40.0);
        for _ in 0..200 {
            let mid = 0.5 * (lo + hi);
            if normal_cdf(mid) < p {
                lo = mid;
            } else {
                hi = mid;
            }
        }
        0.5 * (lo + hi)
    }

    #[test]
    fn cholesky_identity() {
        let l = cholesky(&SymMatrix::identity(3)).unwrap();
        for i in 0..3 {
            for j in 0..3 {
                assert_eq!(l.get(i, j), if i == j { 1.0 } else { 0.0 });
            }
        }
    }

    #[test]
    fn cholesky_two_by_two() {
        let a = SymMatrix::from_rows(vec![vec![4.0, 2.0], vec![2.0, 3.0]]).unwrap();
        let l = cholesky(&a).unwrap();
        assert!((l.get(0, 0) - 2.0).abs() < 1e-15);
        assert_eq!(l.get(0, 1), 0.0);
        assert!((l.get(1, 0) - 1.0).abs() < 1e-15);
        assert!((l.get(1, 1) - 2f64.sqrt()).abs() < 1e-15);
    }

    #[test]
    fn cholesky_example_matrix_reconstructs() {
        let a = example_41_sigma();
        let rec = cholesky(&a).unwrap().reconstruct();
        for i in 0..3 {
            for j in 0..3 {
                assert!((rec[i][j] - a.get(i, j)).abs() < 1e-10);
            }
        }
    }

    #[test]
    fn cholesky_rejects_indefinite() {
        let a = SymMatrix::from_rows(vec![vec![1.0, 2.0], vec![2.0, 1.0]]).unwrap();
        assert!(matches!(cholesky(&a), Err(Error::NotPositiveDefinite { row: 1, .. })));
    }

    #[test]
    fn asymmetric_rows_rejected() {
        assert!(SymMatrix::from_rows(vec![vec![1.0, 0.5], vec![0.4, 1.0]]).is_err());
        assert!(SymMatrix::from_rows(vec![vec![1.0, 0.5]]).is_err());
    }

    #[test]
    fn solve_small_systems() {
        assert_eq!(solve_spd(&SymMatrix::identity(2), &[3.0, -1.0]).unwrap(), vec![3.0, -1.0]);
        let d = SymMatrix::diagonal(&[2.0, 4.0]);
        let x = solve_spd(&d, &[2.0, 8.0]).unwrap();
        assert!((x[0] - 1.0).abs() < 1e-15 && (x[1] - 2.0).abs() < 1e-15);
        assert!(solve_spd(&d, &[1.0]).is_err());
    }

    #[test]
    fn solve_example_residual() {
        let a = example_41_sigma();
        let b = [1.370_67, 1.371_26, 1.369_58];
        let x = solve_spd(&a, &b).unwrap();
        let ax = a.mul_vec(&x);
        let bnorm = b.iter().fold(0.0_f64, |m, v| m.max(v.abs()));
        for (u, v) in ax.iter().zip(&b) {
            assert!((u - v).abs() <= 1e-9 * (1.0 + bnorm));
        }
    }

    #[test]
    fn quantile_reference_values() {
        assert_eq!(std_normal_quantile(0.5).unwrap(), 0.0);
        let q05 = std_normal_quantile(0.05).unwrap();
        let q975 = std_normal_quantile(0.975).unwrap();
        assert!((q05 - quantile_by_bisection(0.05)).abs() < 1e-12);
        assert!((q975 - quantile_by_bisection(0.975)).abs() < 1e-12);
        assert!((q05 + 1.644_853_626_951_472_2).abs() < 1e-12);
        assert!((q975 - 1.959_963_984_540_054).abs() < 1e-12);
    }

    #[test]
    fn quantile_cdf_accuracy() {
        for &p in &[1e-12, 1e-8, 1e-4, 0.01, 0.2, 0.5, 0.7, 0.99, 0.999_999] {
            let z = std_normal_quantile(p).unwrap();
            assert!((normal_cdf(z) - p).abs() <= 1e-12, "p={p}");
        }
    }

    #[test]
    fn quantile_domain() {
        for p in [0.0, 1.0, -0.1, f64::NAN] {
            assert!(matches!(std_normal_quantile(p), Err(Error::Domain(_))));
        }
    }

    fn spd_from(entries: &[f64], n: usize) -> SymMatrix {
        // AᵀA + εI
        let mut rows = vec![vec![0.0; n]; n];
        for i in 0..n {
            for j in 0..n {
                rows[i][j] = (0..n).map(|k| entries[k * n + i] * entries[k * n + j]).sum::<f64>();
            }
            rows[i][i] += 0.5;
        }
        for i in 0..n {
            for j in 0..i {
                rows[i][j] = rows[j][i];
            }
        }
        SymMatrix::from_rows(rows).unwrap()
    }

    proptest! {
        #[test]
        fn cholesky_round_trip(n in 1usize..8, seed in prop::collection::vec(-2.0f64..2.0, 64)) {
            let a = spd_from(&seed, n);
            let rec = cholesky(&a).unwrap().reconstruct();
            for i in 0..n {
                for j in 0..n {
                    prop_assert!((rec[i][j] - a.get(i, j)).abs() < 1e-9);
                }
            }
        }

        #[test]
        fn solve_round_trip(n in 1usize..=20, seed in prop::collection::vec(-1.0f64..1.0, 400),
                            b in prop::collection::vec(-5.0f64..5.0, 20)) {
            let a = spd_from(&seed, n);
            let x = solve_spd(&a, &b[..n]).unwrap();
            for (u, v) in a.mul_vec(&x).iter().zip(&b[..n]) {
                prop_assert!((u - v).abs() < 1e-8);
            }
        }

        #[test]
        fn quantile_inverts_cdf(z in -6.0f64..6.0) {
            // Rounding p near 1 costs about ε/φ(z) in z.
            let back = std_normal_quantile(normal_cdf(z)).unwrap();
            prop_assert!((back - z).abs() < 1e-9 + 4.0 * f64::EPSILON / normal_pdf(z));
        }
    }
}
