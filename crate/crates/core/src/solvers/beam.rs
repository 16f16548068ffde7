use std::cmp::Ordering;
use std::collections::BTreeSet;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::binarize::BinDataset;
use crate::error::{Error, Result};
use crate::ridge::{RidgeConfig, RidgeProblem, SupportSolution};

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct BeamConfig {
    pub beam_width: usize,
    pub k: usize,
    pub finetune_tol: f64,
    pub finetune_iters: usize,
}

impl Default for BeamConfig {
    fn default() -> Self {
        Self {
            beam_width: 10,
            k: 5,
            finetune_tol: 1e-10,
            finetune_iters: 1000,
        }
    }
}

/// Total order on solutions: objective, then lexicographic support.
pub fn cmp_solutions(a: &SupportSolution, b: &SupportSolution) -> Ordering {
    a.objective
        .total_cmp(&b.objective)
        .then_with(|| a.support.cmp(&b.support))
}

/// Solves every support in `supports`, skipping singular ones.
fn solve_all(
    problem: &RidgeProblem<'_>,
    supports: Vec<Vec<usize>>,
    ridge: &RidgeConfig,
) -> Result<Vec<SupportSolution>> {
    let solved: Vec<Result<SupportSolution>> =
        supports.par_iter().map(|s| problem.solve(s, ridge)).collect();
    let mut out = Vec::with_capacity(solved.len());
    for r in solved {
        match r {
            Ok(s) => out.push(s),
            Err(Error::SingularSupport(_)) => {}
            Err(e) => return Err(e),
        }
    }
    Ok(out)
}

/// Beam search for k-sparse ridge regression.
///
/// Level `j` keeps up to `beam_width` distinct supports of size `j`. Each is
/// extended by every unused column, every extension is re-solved exactly, and
/// the best `beam_width` distinct supports move on. The final pool is
/// coordinate-fine-tuned and returned best first.
pub fn beam_search(
    data: &BinDataset,
    config: &BeamConfig,
    ridge: &RidgeConfig,
) -> Result<Vec<SupportSolution>> {
    beam_search_with(&RidgeProblem::new(data), config, ridge)
}

pub fn beam_search_with(
    problem: &RidgeProblem<'_>,
    config: &BeamConfig,
    ridge: &RidgeConfig,
) -> Result<Vec<SupportSolution>> {
    let dim = problem.dim();
    if config.k == 0 || config.beam_width == 0 {
        return Err(Error::InvalidArgument("k and beam width must be at least 1".into()));
    }
    if config.k > dim {
        return Err(Error::KTooLarge { k: config.k, dim });
    }

    let mut beam = vec![problem.solve(&[], ridge)?];
    for _level in 1..=config.k {
        let mut candidates: BTreeSet<Vec<usize>> = BTreeSet::new();
        for sol in &beam {
            for j in (0..dim).filter(|j| sol.support.binary_search(j).is_err()) {
                let mut s = sol.support.clone();
                let pos = s.partition_point(|&x| x < j);
                s.insert(pos, j);
                candidates.insert(s);
            }
        }
        let mut next = solve_all(problem, candidates.into_iter().collect(), ridge)?;
        if next.is_empty() {
            return Err(Error::SingularSupport(beam[0].support.clone()));
        }
        next.sort_by(cmp_solutions);
        next.truncate(config.beam_width);
        beam = next;
    }

    let mut pool = beam
        .par_iter()
        .map(|s| problem.finetune(s, ridge, config.finetune_iters, config.finetune_tol, None))
        .collect::<Result<Vec<_>>>()?;
    pool.sort_by(cmp_solutions);
    Ok(pool)
}
