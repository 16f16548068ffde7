//! End-to-end fitting: screen, binarize, solve, and package a score card.

use serde::{Deserialize, Serialize};

use crate::binarize::{binarize, BinDataset, FeatureBinning, XiConfig, XiProvenance};
use crate::error::Result;
use crate::scorecard::{build_scorecard, FitSummary, ScoreCard};
use crate::solvers::{solve, SolveOutcome, SolverConfig, SolverKind};
use crate::tabular::{f_regression_select, standardize, Dataset, SelectionReport};

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct FitConfig {
    pub xi: XiConfig,
    /// Significance level of the univariate screen on continuous features;
    /// `None` keeps every feature.
    pub select_alpha: Option<f64>,
    pub solver: SolverConfig,
    /// Classification threshold stored on the card.
    pub threshold: Option<f64>,
}

impl Default for FitConfig {
    fn default() -> Self {
        Self {
            xi: XiConfig::default(),
            select_alpha: Some(0.05),
            solver: SolverConfig::default(),
            threshold: Some(25.0),
        }
    }
}

#[derive(Debug, Clone)]
pub struct FitResult {
    pub card: ScoreCard,
    pub bin: BinDataset,
    pub selection: Option<SelectionReport>,
    pub outcome: SolveOutcome,
}

/// Binnings for every feature of `schema_source`, taking fitted ones from
/// `fitted` and leaving screened-out features without cuts, so the card
/// accepts rows of the original layout.
fn full_provenance(schema_source: &Dataset, fitted: &XiProvenance) -> XiProvenance {
    XiProvenance {
        config: fitted.config,
        quantile_convention: fitted.quantile_convention.clone(),
        features: schema_source
            .schema
            .iter()
            .map(|f| match fitted.feature_index(&f.name) {
                Some(i) => fitted.features[i].clone(),
                None => FeatureBinning {
                    schema: f.clone(),
                    cuts: Vec::new(),
                    observed_min: None,
                    observed_max: None,
                },
            })
            .collect(),
    }
}

/// Fits a score card on `dataset`. Bins are cut on raw values so conditions
/// read in the original units; the standardization parameters are recorded
/// on the card.
pub fn fit(dataset: &Dataset, config: &FitConfig) -> Result<FitResult> {
    let (_, scaler) = standardize(dataset);
    let (selection, working) = match config.select_alpha {
        Some(alpha) => {
            let report = f_regression_select(dataset, alpha)?;
            let working = dataset.select_features(&report.selected);
            (Some(report), working)
        }
        None => (None, dataset.clone()),
    };
    let bin = binarize(&working, &config.xi)?;
    let outcome = solve(&bin, &config.solver)?;

    let mut card = build_scorecard(&outcome.solution, &bin)?;
    card.xi_provenance = full_provenance(dataset, &bin.provenance);
    card.threshold = config.threshold;
    card.scaler = Some(scaler);
    card.fit = Some(FitSummary {
        solver: match config.solver.solver {
            SolverKind::Beam => "beam",
            SolverKind::Bnb => "bnb",
        }
        .to_string(),
        k: config.solver.k.min(bin.n_binary()),
        lambda2: config.solver.ridge.lambda2,
        objective: outcome.solution.objective,
        certified_optimal: outcome.certified_optimal,
        n_binary_features: bin.n_binary(),
        n_rows: bin.n_rows(),
        screened_out: selection
            .iter()
            .flat_map(|r| r.stats.iter().filter(|s| !s.selected).map(|s| s.feature.clone()))
            .collect(),
    });
    Ok(FitResult {
        card,
        bin,
        selection,
        outcome,
    })
}
