//! Solvers for the k-sparse ridge problem.

mod beam;
mod bnb;
mod brute;

pub use beam::{beam_search, beam_search_with, cmp_solutions, BeamConfig};
pub use bnb::{bnb_solve, bnb_solve_with, node_lower_bound, BnBResult, BnbConfig, ExploredNode};
pub use brute::{brute_force, brute_force_with, n_choose_k, DEFAULT_ENUMERATION_BUDGET};

use serde::{Deserialize, Serialize};

use crate::binarize::BinDataset;
use crate::error::Result;
use crate::ridge::{RidgeConfig, RidgeProblem, SupportSolution};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum SolverKind {
    Beam,
    Bnb,
}

/// Everything needed to run either solver.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SolverConfig {
    pub solver: SolverKind,
    pub k: usize,
    pub beam_width: usize,
    pub ridge: RidgeConfig,
    pub tolerance: f64,
    pub node_budget: usize,
    pub finetune_tol: f64,
    pub finetune_iters: usize,
}

impl Default for SolverConfig {
    fn default() -> Self {
        Self {
            solver: SolverKind::Beam,
            k: 5,
            beam_width: 10,
            ridge: RidgeConfig::default(),
            tolerance: 1e-9,
            node_budget: 1_000_000,
            finetune_tol: 1e-10,
            finetune_iters: 1000,
        }
    }
}

impl SolverConfig {
    pub fn beam(&self) -> BeamConfig {
        BeamConfig {
            beam_width: self.beam_width,
            k: self.k,
            finetune_tol: self.finetune_tol,
            finetune_iters: self.finetune_iters,
        }
    }

    pub fn bnb(&self) -> BnbConfig {
        BnbConfig {
            k: self.k,
            tolerance: self.tolerance,
            node_budget: self.node_budget,
            record_nodes: false,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SolveOutcome {
    pub solution: SupportSolution,
    /// Only set by branch-and-bound.
    pub certified_optimal: Option<bool>,
    pub nodes_explored: Option<usize>,
    pub gap: Option<f64>,
}

/// Runs the configured solver. Branch-and-bound is seeded with the beam
/// result computed under the same beam settings.
pub fn solve(data: &BinDataset, config: &SolverConfig) -> Result<SolveOutcome> {
    let problem = RidgeProblem::new(data);
    let k = config.k.min(problem.dim());
    let config = SolverConfig { k, ..*config };
    if k == 0 {
        let solution = problem.solve(&[], &config.ridge)?;
        return Ok(SolveOutcome {
            solution,
            certified_optimal: Some(true),
            nodes_explored: Some(0),
            gap: Some(0.0),
        });
    }
    let mut pool = beam_search_with(&problem, &config.beam(), &config.ridge)?;
    let best = pool.swap_remove(0);
    match config.solver {
        SolverKind::Beam => Ok(SolveOutcome {
            solution: best,
            certified_optimal: None,
            nodes_explored: None,
            gap: None,
        }),
        SolverKind::Bnb => {
            let r = bnb_solve_with(&problem, &config.bnb(), &config.ridge, Some(best))?;
            Ok(SolveOutcome {
                solution: r.solution,
                certified_optimal: Some(r.certified_optimal),
                nodes_explored: Some(r.nodes_explored),
                gap: Some(r.gap),
            })
        }
    }
}
