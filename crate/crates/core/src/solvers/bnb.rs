//! Exact branch-and-bound for k-sparse ridge regression.
//!
//! A node fixes a set of columns that must be used and a set that must not.
//! Its lower bound is the ridge optimum over every column not excluded, i.e.
//! the cardinality constraint is dropped. Nodes are explored best-bound first
//! and pruned once their bound reaches the incumbent minus the tolerance.

use std::cmp::Ordering;
use std::collections::BinaryHeap;

use serde::{Deserialize, Serialize};

use super::beam::{beam_search_with, BeamConfig};
use crate::binarize::BinDataset;
use crate::error::{Error, Result};
use crate::ridge::{RidgeConfig, RidgeProblem, SupportSolution};

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct BnbConfig {
    pub k: usize,
    pub tolerance: f64,
    pub node_budget: usize,
    /// Keep a record of every explored node in the result.
    #[serde(default)]
    pub record_nodes: bool,
}

impl BnbConfig {
    pub fn new(k: usize) -> Self {
        Self {
            k,
            tolerance: 1e-9,
            node_budget: 1_000_000,
            record_nodes: false,
        }
    }
}

/// Columns a node must use and must not use, with its bound.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ExploredNode {
    pub forced_in: Vec<usize>,
    pub forced_out: Vec<usize>,
    pub lower_bound: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BnBResult {
    pub solution: SupportSolution,
    pub certified_optimal: bool,
    pub nodes_explored: usize,
    /// Incumbent objective minus the best bound still open, floored at 0.
    pub gap: f64,
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    pub explored: Vec<ExploredNode>,
}

/// Cardinality-relaxed ridge optimum over every column not in `forced_out`.
/// `None` when the relaxed system is singular (only possible with
/// `lambda2 = 0`); zero is then the only bound available.
pub fn node_lower_bound(
    problem: &RidgeProblem<'_>,
    forced_out: &[usize],
    ridge: &RidgeConfig,
) -> Result<Option<SupportSolution>> {
    let allowed: Vec<usize> = (0..problem.dim()).filter(|j| !forced_out.contains(j)).collect();
    match problem.solve(&allowed, ridge) {
        Ok(s) => Ok(Some(s)),
        Err(Error::SingularSupport(_)) => Ok(None),
        Err(e) => Err(e),
    }
}

struct Node {
    forced_in: Vec<usize>,
    excluded: Vec<bool>,
    relaxed: Option<SupportSolution>,
    bound: f64,
    seq: u64,
}

impl Node {
    fn allowed(&self) -> usize {
        self.excluded.iter().filter(|&&x| !x).count()
    }

    fn forced_out(&self) -> Vec<usize> {
        (0..self.excluded.len()).filter(|&j| self.excluded[j]).collect()
    }

    /// |beta| of column `j` in the relaxed solution (0 when unavailable).
    fn weight(&self, j: usize) -> f64 {
        self.relaxed
            .as_ref()
            .and_then(|r| r.support.binary_search(&j).ok().map(|i| r.beta[i].abs()))
            .unwrap_or(0.0)
    }

    /// Undecided columns by descending relaxed |beta|, then ascending index.
    fn ranked_undecided(&self) -> Vec<usize> {
        let mut cols: Vec<usize> = (0..self.excluded.len())
            .filter(|&j| !self.excluded[j] && self.forced_in.binary_search(&j).is_err())
            .collect();
        cols.sort_by(|&a, &b| self.weight(b).total_cmp(&self.weight(a)).then(a.cmp(&b)));
        cols
    }
}

impl PartialEq for Node {
    fn eq(&self, other: &Self) -> bool {
        self.cmp(other) == Ordering::Equal
    }
}

impl Eq for Node {}

impl PartialOrd for Node {
    fn partial_cmp(&self, other: &Self) -> Option<Ordering> {
        Some(self.cmp(other))
    }
}

impl Ord for Node {
    // BinaryHeap is a max-heap: smallest bound first, then earliest created.
    fn cmp(&self, other: &Self) -> Ordering {
        other
            .bound
            .total_cmp(&self.bound)
            .then_with(|| other.seq.cmp(&self.seq))
    }
}

fn relaxed_node(
    problem: &RidgeProblem<'_>,
    forced_in: Vec<usize>,
    excluded: Vec<bool>,
    ridge: &RidgeConfig,
    seq: u64,
) -> Result<Node> {
    let out: Vec<usize> = (0..excluded.len()).filter(|&j| excluded[j]).collect();
    let relaxed = node_lower_bound(problem, &out, ridge)?;
    let bound = relaxed.as_ref().map_or(0.0, |r| r.objective);
    Ok(Node {
        forced_in,
        excluded,
        relaxed,
        bound,
        seq,
    })
}

/// Branch-and-bound over supports of size at most `config.k`. Without an
/// initial incumbent, the best beam-search solution (width 10) seeds it.
pub fn bnb_solve(
    data: &BinDataset,
    config: &BnbConfig,
    ridge: &RidgeConfig,
    initial_incumbent: Option<SupportSolution>,
) -> Result<BnBResult> {
    bnb_solve_with(&RidgeProblem::new(data), config, ridge, initial_incumbent)
}

pub fn bnb_solve_with(
    problem: &RidgeProblem<'_>,
    config: &BnbConfig,
    ridge: &RidgeConfig,
    initial_incumbent: Option<SupportSolution>,
) -> Result<BnBResult> {
    let dim = problem.dim();
    let k = config.k;
    if k == 0 {
        return Err(Error::InvalidArgument("k must be at least 1".into()));
    }
    if k > dim {
        return Err(Error::KTooLarge { k, dim });
    }
    if k == dim {
        let all: Vec<usize> = (0..dim).collect();
        let solution = problem.solve(&all, ridge)?;
        let explored = if config.record_nodes {
            vec![ExploredNode {
                forced_in: Vec::new(),
                forced_out: Vec::new(),
                lower_bound: solution.objective,
            }]
        } else {
            Vec::new()
        };
        return Ok(BnBResult {
            solution,
            certified_optimal: true,
            nodes_explored: 1,
            gap: 0.0,
            explored,
        });
    }

    let mut incumbent = match initial_incumbent {
        Some(s) => {
            if s.support.len() > k {
                return Err(Error::InvalidArgument(format!(
                    "initial incumbent uses {} columns, more than k = {k}",
                    s.support.len()
                )));
            }
            problem.solve(&s.support, ridge)?
        }
        None => {
            let beam = BeamConfig {
                k,
                ..BeamConfig::default()
            };
            beam_search_with(problem, &beam, ridge)?.swap_remove(0)
        }
    };
    fn consider(cand: SupportSolution, inc: &mut SupportSolution) {
        if cand.objective < inc.objective
            || (cand.objective == inc.objective && cand.support < inc.support)
        {
            *inc = cand;
        }
    }
    let solve_feasible = |support: &[usize]| -> Result<Option<SupportSolution>> {
        match problem.solve(support, ridge) {
            Ok(s) => Ok(Some(s)),
            Err(Error::SingularSupport(_)) => Ok(None),
            Err(e) => Err(e),
        }
    };

    let mut seq = 0u64;
    let mut heap = BinaryHeap::new();
    heap.push(relaxed_node(problem, Vec::new(), vec![false; dim], ridge, seq)?);
    let mut nodes_explored = 0usize;
    let mut explored = Vec::new();
    let mut budget_hit = false;

    while let Some(node) = heap.peek() {
        // The root is always expanded so every run explores at least one node.
        if nodes_explored > 0 && node.bound >= incumbent.objective - config.tolerance {
            break;
        }
        if nodes_explored >= config.node_budget {
            budget_hit = true;
            break;
        }
        let node = heap.pop().expect("peeked");
        nodes_explored += 1;
        if config.record_nodes {
            explored.push(ExploredNode {
                forced_in: node.forced_in.clone(),
                forced_out: node.forced_out(),
                lower_bound: node.bound,
            });
        }

        // Relaxation already feasible: the node is solved by it.
        if let Some(relaxed) = &node.relaxed {
            let nonzero: Vec<usize> = relaxed
                .support
                .iter()
                .zip(&relaxed.beta)
                .filter(|(_, b)| b.abs() > 1e-12)
                .map(|(&j, _)| j)
                .collect();
            if node.allowed() <= k || nonzero.len() <= k {
                let exact = if nonzero.len() == relaxed.support.len() {
                    Some(relaxed.clone())
                } else {
                    solve_feasible(&nonzero)?
                };
                if let Some(s) = exact {
                    consider(s, &mut incumbent);
                }
                continue;
            }
        }
        if node.forced_in.len() == k {
            if let Some(s) = solve_feasible(&node.forced_in)? {
                consider(s, &mut incumbent);
            }
            continue;
        }

        let ranked = node.ranked_undecided();
        if ranked.is_empty() {
            continue;
        }
        // Rounding heuristic: complete the forced set with the largest weights.
        let mut guess = node.forced_in.clone();
        guess.extend(ranked.iter().take(k - node.forced_in.len()));
        if let Some(s) = solve_feasible(&guess)? {
            consider(s, &mut incumbent);
        }

        let branch = ranked[0];
        let mut with = node.forced_in.clone();
        let pos = with.partition_point(|&x| x < branch);
        with.insert(pos, branch);
        let mut without = node.excluded.clone();
        without[branch] = true;

        seq += 1;
        let child_out = relaxed_node(problem, node.forced_in.clone(), without, ridge, seq)?;
        seq += 1;
        let child_in = Node {
            forced_in: with,
            excluded: node.excluded,
            relaxed: node.relaxed,
            bound: node.bound,
            seq,
        };
        for child in [child_in, child_out] {
            if child.bound < incumbent.objective - config.tolerance {
                heap.push(child);
            }
        }
    }

    let open_bound = heap.peek().map_or(f64::INFINITY, |n| n.bound);
    let gap = (incumbent.objective - open_bound).max(0.0);
    Ok(BnBResult {
        solution: incumbent,
        certified_optimal: !budget_hit,
        nodes_explored,
        gap,
        explored,
    })
}
