use crate::binarize::BinDataset;
use crate::error::{Error, Result};
use crate::ridge::{RidgeConfig, RidgeProblem, SupportSolution};

pub const DEFAULT_ENUMERATION_BUDGET: u128 = 2_000_000;

/// Binomial coefficient, saturating at `u128::MAX`.
pub fn n_choose_k(n: usize, k: usize) -> u128 {
    if k > n {
        return 0;
    }
    let k = k.min(n - k);
    let mut acc: u128 = 1;
    for i in 0..k {
        acc = match acc.checked_mul((n - i) as u128) {
            Some(v) => v / (i as u128 + 1),
            None => return u128::MAX,
        };
    }
    acc
}

/// Lexicographic successor of a k-combination of `0..n`, in place.
pub(crate) fn next_combination(c: &mut [usize], n: usize) -> bool {
    let k = c.len();
    let mut i = k;
    while i > 0 {
        i -= 1;
        if c[i] < n - k + i {
            c[i] += 1;
            for j in i + 1..k {
                c[j] = c[j - 1] + 1;
            }
            return true;
        }
    }
    false
}

/// Exhaustive search over every support of exactly `k` columns. Ties go to
/// the lexicographically smallest support; singular supports are skipped.
pub fn brute_force(
    data: &BinDataset,
    k: usize,
    ridge: &RidgeConfig,
    budget: u128,
) -> Result<SupportSolution> {
    brute_force_with(&RidgeProblem::new(data), k, ridge, budget)
}

pub fn brute_force_with(
    problem: &RidgeProblem<'_>,
    k: usize,
    ridge: &RidgeConfig,
    budget: u128,
) -> Result<SupportSolution> {
    let dim = problem.dim();
    if k > dim {
        return Err(Error::KTooLarge { k, dim });
    }
    let needed = n_choose_k(dim, k);
    if needed > budget {
        return Err(Error::BudgetExceeded { needed, budget });
    }
    let mut comb: Vec<usize> = (0..k).collect();
    let mut best: Option<SupportSolution> = None;
    loop {
        match problem.solve(&comb, ridge) {
            Ok(s) => {
                if best.as_ref().is_none_or(|b| s.objective < b.objective) {
                    best = Some(s);
                }
            }
            Err(Error::SingularSupport(_)) => {}
            Err(e) => return Err(e),
        }
        if !next_combination(&mut comb, dim) {
            break;
        }
    }
    best.ok_or(Error::SingularSupport(Vec::new()))
}
