//! Ridge regression restricted to a support of binary columns.
//!
//! The objective is the unnormalized residual sum of squares plus
//! `lambda2 * ||beta||^2`; the bias is always fitted and, by default, left
//! unpenalized and outside the sparsity count.

use serde::{Deserialize, Serialize};

use crate::binarize::BinDataset;
use crate::error::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct RidgeConfig {
    pub lambda2: f64,
    #[serde(default)]
    pub penalize_bias: bool,
}

impl RidgeConfig {
    pub fn new(lambda2: f64) -> Result<Self> {
        if !(lambda2 >= 0.0 && lambda2.is_finite()) {
            return Err(Error::InvalidArgument(format!("lambda2 must be >= 0, got {lambda2}")));
        }
        Ok(Self {
            lambda2,
            penalize_bias: false,
        })
    }
}

impl Default for RidgeConfig {
    fn default() -> Self {
        Self {
            lambda2: 1e-8,
            penalize_bias: false,
        }
    }
}

/// Coefficients on a sorted support, plus the bias and the objective value.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SupportSolution {
    pub support: Vec<usize>,
    pub beta: Vec<f64>,
    pub bias: f64,
    pub objective: f64,
}

impl SupportSolution {
    pub fn zero() -> Self {
        Self {
            support: Vec::new(),
            beta: Vec::new(),
            bias: 0.0,
            objective: f64::NAN,
        }
    }

    pub fn len(&self) -> usize {
        self.support.len()
    }

    pub fn is_empty(&self) -> bool {
        self.support.is_empty()
    }
}

/// Fitted values `bias + sum_j x_pj beta_j`, summed left to right in support
/// order. Scorecard predictions use the same order, so the two agree exactly.
pub fn fitted_values(data: &BinDataset, support: &[usize], beta: &[f64], bias: f64) -> Vec<f64> {
    let mut fitted = vec![bias; data.n_rows()];
    for (&j, &b) in support.iter().zip(beta) {
        for (f, &x) in fitted.iter_mut().zip(data.matrix.column(j)) {
            if x == 1 {
                *f += b;
            }
        }
    }
    fitted
}

fn penalty(beta: &[f64], bias: f64, config: &RidgeConfig) -> f64 {
    let mut pen = beta.iter().map(|b| b * b).sum::<f64>();
    if config.penalize_bias {
        pen += bias * bias;
    }
    config.lambda2 * pen
}

fn check_support(support: &[usize], dim: usize) -> Result<()> {
    match support.iter().find(|&&j| j >= dim) {
        Some(&index) => Err(Error::IndexOutOfRange { index, dim }),
        None => Ok(()),
    }
}

fn objective_unchecked(
    data: &BinDataset,
    support: &[usize],
    beta: &[f64],
    bias: f64,
    config: &RidgeConfig,
) -> f64 {
    let fitted = fitted_values(data, support, beta, bias);
    let rss: f64 = data
        .target
        .iter()
        .zip(&fitted)
        .map(|(y, f)| (y - f) * (y - f))
        .sum();
    rss + penalty(beta, bias, config)
}

/// Penalized residual sum of squares of `solution` on `data`.
pub fn objective(data: &BinDataset, solution: &SupportSolution, config: &RidgeConfig) -> Result<f64> {
    check_support(&solution.support, data.n_binary())?;
    if solution.beta.len() != solution.support.len() {
        return Err(Error::DimensionMismatch {
            expected: solution.support.len(),
            got: solution.beta.len(),
        });
    }
    Ok(objective_unchecked(
        data,
        &solution.support,
        &solution.beta,
        solution.bias,
        config,
    ))
}

/// In-place Cholesky factorization of a row-major `n x n` SPD matrix; the
/// lower triangle receives `L`. Returns `false` when a pivot is not safely
/// positive relative to the largest diagonal entry.
fn cholesky(a: &mut [f64], n: usize) -> bool {
    let scale = (0..n).map(|i| a[i * n + i]).fold(0.0f64, f64::max);
    let floor = 1e-13 * scale.max(f64::MIN_POSITIVE);
    for j in 0..n {
        let mut d = a[j * n + j];
        for k in 0..j {
            d -= a[j * n + k] * a[j * n + k];
        }
        if !(d > floor) {
            return false;
        }
        let d = d.sqrt();
        a[j * n + j] = d;
        for i in j + 1..n {
            let mut s = a[i * n + j];
            for k in 0..j {
                s -= a[i * n + k] * a[j * n + k];
            }
            a[i * n + j] = s / d;
        }
    }
    true
}

fn cholesky_solve(l: &[f64], n: usize, b: &mut [f64]) {
    for i in 0..n {
        let mut s = b[i];
        for k in 0..i {
            s -= l[i * n + k] * b[k];
        }
        b[i] = s / l[i * n + i];
    }
    for i in (0..n).rev() {
        let mut s = b[i];
        for k in i + 1..n {
            s -= l[k * n + i] * b[k];
        }
        b[i] = s / l[i * n + i];
    }
}

/// Sufficient statistics of a [`BinDataset`] for repeated support solves:
/// column co-occurrence counts, column sums and `X^T y`.
#[derive(Debug, Clone)]
pub struct RidgeProblem<'a> {
    data: &'a BinDataset,
    dim: usize,
    gram: Vec<f64>,
    col_sums: Vec<f64>,
    xty: Vec<f64>,
    y_sum: f64,
}

impl<'a> RidgeProblem<'a> {
    pub fn new(data: &'a BinDataset) -> Self {
        let p = data.n_rows();
        let dim = data.n_binary();
        let words = p.div_ceil(64);
        let bits: Vec<Vec<u64>> = (0..dim)
            .map(|j| {
                let mut w = vec![0u64; words];
                for (i, &x) in data.matrix.column(j).iter().enumerate() {
                    if x == 1 {
                        w[i / 64] |= 1 << (i % 64);
                    }
                }
                w
            })
            .collect();
        let mut gram = vec![0.0; dim * dim];
        for a in 0..dim {
            for b in a..dim {
                let c: u32 = bits[a].iter().zip(&bits[b]).map(|(x, y)| (x & y).count_ones()).sum();
                gram[a * dim + b] = f64::from(c);
                gram[b * dim + a] = f64::from(c);
            }
        }
        let col_sums = (0..dim).map(|j| gram[j * dim + j]).collect();
        let xty = (0..dim)
            .map(|j| {
                data.matrix
                    .column(j)
                    .iter()
                    .zip(&data.target)
                    .filter(|(&x, _)| x == 1)
                    .map(|(_, &y)| y)
                    .sum()
            })
            .collect();
        let y_sum = data.target.iter().sum();
        Self {
            data,
            dim,
            gram,
            col_sums,
            xty,
            y_sum,
        }
    }

    pub fn data(&self) -> &'a BinDataset {
        self.data
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    /// Normal-equation system over `[bias, support...]`, row-major.
    fn system(&self, support: &[usize], config: &RidgeConfig) -> (Vec<f64>, Vec<f64>) {
        let m = support.len() + 1;
        let mut a = vec![0.0; m * m];
        let mut b = vec![0.0; m];
        a[0] = self.data.n_rows() as f64 + if config.penalize_bias { config.lambda2 } else { 0.0 };
        b[0] = self.y_sum;
        for (i, &si) in support.iter().enumerate() {
            a[i + 1] = self.col_sums[si];
            a[(i + 1) * m] = self.col_sums[si];
            b[i + 1] = self.xty[si];
            for (k, &sk) in support.iter().enumerate() {
                a[(i + 1) * m + k + 1] = self.gram[si * self.dim + sk];
            }
            a[(i + 1) * m + i + 1] += config.lambda2;
        }
        (a, b)
    }

    /// Exact ridge minimizer on `support` (sorted and deduplicated first).
    pub fn solve(&self, support: &[usize], config: &RidgeConfig) -> Result<SupportSolution> {
        let mut support = support.to_vec();
        support.sort_unstable();
        support.dedup();
        check_support(&support, self.dim)?;
        let m = support.len() + 1;
        let (mut a, mut b) = self.system(&support, config);
        if !cholesky(&mut a, m) {
            return Err(Error::SingularSupport(support));
        }
        cholesky_solve(&a, m, &mut b);
        let bias = b[0];
        let beta = b[1..].to_vec();
        let objective = objective_unchecked(self.data, &support, &beta, bias, config);
        Ok(SupportSolution {
            support,
            beta,
            bias,
            objective,
        })
    }

    /// Cyclic exact coordinate minimization over the bias and the support
    /// weights, starting from `start`. Stops once the largest coordinate move
    /// in a sweep is below `tol` or after `max_iters` sweeps. When `trace` is
    /// given, the objective after every coordinate update is appended to it.
    pub fn finetune(
        &self,
        start: &SupportSolution,
        config: &RidgeConfig,
        max_iters: usize,
        tol: f64,
        mut trace: Option<&mut Vec<f64>>,
    ) -> Result<SupportSolution> {
        check_support(&start.support, self.dim)?;
        if start.beta.len() != start.support.len() {
            return Err(Error::DimensionMismatch {
                expected: start.support.len(),
                got: start.beta.len(),
            });
        }
        let m = start.support.len() + 1;
        let (a, b) = self.system(&start.support, config);
        let mut x: Vec<f64> = std::iter::once(start.bias).chain(start.beta.iter().copied()).collect();
        for _ in 0..max_iters {
            let mut max_step = 0.0f64;
            for t in 0..m {
                let diag = a[t * m + t];
                if !(diag > 0.0) {
                    continue;
                }
                let off: f64 = (0..m).filter(|&u| u != t).map(|u| a[t * m + u] * x[u]).sum();
                let next = (b[t] - off) / diag;
                max_step = max_step.max((next - x[t]).abs());
                x[t] = next;
                if let Some(tr) = trace.as_deref_mut() {
                    tr.push(objective_unchecked(self.data, &start.support, &x[1..], x[0], config));
                }
            }
            if max_step < tol {
                break;
            }
        }
        let beta = x[1..].to_vec();
        let objective = objective_unchecked(self.data, &start.support, &beta, x[0], config);
        Ok(SupportSolution {
            support: start.support.clone(),
            beta,
            bias: x[0],
            objective,
        })
    }
}

/// One-shot [`RidgeProblem::solve`]. Build a [`RidgeProblem`] instead when
/// solving many supports on the same data.
pub fn ridge_solve(data: &BinDataset, support: &[usize], config: &RidgeConfig) -> Result<SupportSolution> {
    RidgeProblem::new(data).solve(support, config)
}

/// One-shot [`RidgeProblem::finetune`].
pub fn coordinate_finetune(
    data: &BinDataset,
    solution: &SupportSolution,
    config: &RidgeConfig,
    max_iters: usize,
    tol: f64,
) -> Result<SupportSolution> {
    RidgeProblem::new(data).finetune(solution, config, max_iters, tol, None)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::binarize::BinMatrix;
    use approx::assert_abs_diff_eq;

    fn data(rows: &[Vec<u8>], y: &[f64]) -> BinDataset {
        let names = (0..rows[0].len()).map(|j| format!("x{j}")).collect();
        BinDataset::from_binary(BinMatrix::from_rows(rows).unwrap(), names, y.to_vec(), "y").unwrap()
    }

    fn cfg(l: f64) -> RidgeConfig {
        RidgeConfig::new(l).unwrap()
    }

    #[test]
    fn objective_arithmetic() {
        let d = data(&[vec![1], vec![1]], &[1.0, 2.0]);
        let mut sol = SupportSolution {
            support: vec![],
            beta: vec![],
            bias: 0.0,
            objective: 0.0,
        };
        assert_eq!(objective(&d, &sol, &cfg(0.0)).unwrap(), 5.0);
        sol.support = vec![0];
        sol.beta = vec![1.5];
        assert_eq!(objective(&d, &sol, &cfg(0.0)).unwrap(), 0.5);
        assert_eq!(objective(&d, &sol, &cfg(1.0)).unwrap(), 2.75);
        sol.support = vec![3];
        assert!(matches!(
            objective(&d, &sol, &cfg(0.0)),
            Err(Error::IndexOutOfRange { index: 3, dim: 1 })
        ));
    }

    #[test]
    fn empty_support_fits_the_mean() {
        let d = data(&[vec![1], vec![0], vec![1], vec![0]], &[1.0, 2.0, 4.0, 9.0]);
        let sol = ridge_solve(&d, &[], &cfg(1e-8)).unwrap();
        assert_abs_diff_eq!(sol.bias, 4.0, epsilon = 1e-12);
        assert_abs_diff_eq!(sol.objective, 9.0 + 4.0 + 0.0 + 25.0, epsilon = 1e-12);
    }

    #[test]
    fn exact_fit_limit() {
        let d = data(&[vec![1, 0], vec![0, 1], vec![1, 1], vec![0, 0]], &[1.0, 0.0, 1.0, 0.0]);
        let sol = ridge_solve(&d, &[0], &cfg(1e-12)).unwrap();
        assert_abs_diff_eq!(sol.beta[0], 1.0, epsilon = 1e-9);
        assert_abs_diff_eq!(sol.bias, 0.0, epsilon = 1e-9);
        assert_abs_diff_eq!(sol.objective, 0.0, epsilon = 1e-9);
    }

    #[test]
    fn duplicate_columns_without_penalty_are_singular() {
        let d = data(&[vec![1, 1], vec![0, 0], vec![1, 1]], &[1.0, 2.0, 3.0]);
        assert!(matches!(ridge_solve(&d, &[0, 1], &cfg(0.0)), Err(Error::SingularSupport(_))));
        assert!(ridge_solve(&d, &[0, 1], &cfg(1e-3)).is_ok());
    }

    #[test]
    fn support_is_normalized() {
        let d = data(&[vec![1, 0], vec![0, 1], vec![1, 1], vec![0, 0]], &[1.0, 2.0, 3.0, 4.0]);
        let a = ridge_solve(&d, &[1, 0, 1], &cfg(0.1)).unwrap();
        let b = ridge_solve(&d, &[0, 1], &cfg(0.1)).unwrap();
        assert_eq!(a, b);
    }

    #[test]
    fn finetune_fixed_point_and_recovery() {
        let d = data(
            &[vec![1, 0], vec![0, 1], vec![1, 1], vec![0, 0], vec![1, 0]],
            &[1.0, 2.0, 3.5, 0.2, 1.4],
        );
        let c = cfg(0.01);
        let opt = ridge_solve(&d, &[0, 1], &c).unwrap();
        let same = coordinate_finetune(&d, &opt, &c, 1000, 1e-12).unwrap();
        for (a, b) in same.beta.iter().zip(&opt.beta) {
            assert_abs_diff_eq!(a, b, epsilon = 1e-10);
        }
        let mut bumped = opt.clone();
        bumped.beta[1] += 0.5;
        let back = coordinate_finetune(&d, &bumped, &c, 10_000, 1e-12).unwrap();
        for (a, b) in back.beta.iter().zip(&opt.beta) {
            assert_abs_diff_eq!(a, b, epsilon = 1e-8);
        }
        assert_abs_diff_eq!(back.bias, opt.bias, epsilon = 1e-8);
    }

    #[test]
    fn invalid_lambda_rejected() {
        assert!(RidgeConfig::new(-1.0).is_err());
        assert!(RidgeConfig::new(f64::NAN).is_err());
    }
}
