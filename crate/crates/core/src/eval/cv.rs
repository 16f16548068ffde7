//! Stratified cross-validation and the model-size sweep.
//!
//! Every fold refits screening, binning and the solver on its training rows
//! alone. Rows inside a fold are processed in canonical order (target, then
//! cell content), so reports do not depend on the input row order.

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::metrics::{evaluate, MetricsReport};
use crate::error::{Error, Result};
use crate::pipeline::{fit, FitConfig};
use crate::scorecard::ScoreCard;
use crate::solvers::SolverConfig;
use crate::tabular::{stratified_kfold, Dataset, FoldAssignment, PRNG_NAME};

pub const STD_CONVENTION: &str = "population standard deviation over folds";

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct CvConfig {
    pub fit: FitConfig,
    pub n_folds: usize,
    pub strat_bins: usize,
    pub seed: u64,
}

impl Default for CvConfig {
    fn default() -> Self {
        Self {
            fit: FitConfig::default(),
            n_folds: 5,
            strat_bins: 4,
            seed: 0,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MetricSummary {
    pub mae: f64,
    pub pearson_r: Option<f64>,
    pub accuracy: Option<f64>,
    pub f1: Option<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Aggregate {
    pub mean: MetricSummary,
    pub std: MetricSummary,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CvReport {
    pub config: CvConfig,
    pub folds: Vec<MetricsReport>,
    pub aggregate: Aggregate,
    pub prng: String,
    pub seed: u64,
    pub std_convention: String,
}

/// A report plus the per-fold models and the fold assignment behind it.
#[derive(Debug, Clone)]
pub struct CvRun {
    pub report: CvReport,
    pub models: Vec<ScoreCard>,
    pub assignment: FoldAssignment,
}

/// Mean and population std of the defined values; `None` when there are none.
fn mean_std(values: impl Iterator<Item = Option<f64>>) -> (Option<f64>, Option<f64>) {
    let v: Vec<f64> = values.flatten().collect();
    if v.is_empty() {
        return (None, None);
    }
    let n = v.len() as f64;
    let mean = v.iter().sum::<f64>() / n;
    let var = v.iter().map(|x| (x - mean) * (x - mean)).sum::<f64>() / n;
    (Some(mean), Some(var.sqrt()))
}

pub fn aggregate(folds: &[MetricsReport]) -> Aggregate {
    let (mae_m, mae_s) = mean_std(folds.iter().map(|f| Some(f.mae)));
    let (r_m, r_s) = mean_std(folds.iter().map(|f| f.pearson_r));
    let (a_m, a_s) = mean_std(folds.iter().map(|f| f.accuracy));
    let (f_m, f_s) = mean_std(folds.iter().map(|f| f.f1));
    Aggregate {
        mean: MetricSummary {
            mae: mae_m.unwrap_or(f64::NAN),
            pearson_r: r_m,
            accuracy: a_m,
            f1: f_m,
        },
        std: MetricSummary {
            mae: mae_s.unwrap_or(f64::NAN),
            pearson_r: r_s,
            accuracy: a_s,
            f1: f_s,
        },
    }
}

/// Indices sorted by their position in the canonical row order.
fn by_rank(mut idx: Vec<usize>, rank: &[usize]) -> Vec<usize> {
    idx.sort_by_key(|&i| rank[i]);
    idx
}

pub fn cross_validate(dataset: &Dataset, config: &CvConfig) -> Result<CvRun> {
    let assignment = stratified_kfold(dataset, config.n_folds, config.strat_bins, config.seed)?;
    let mut rank = vec![0; dataset.n_rows()];
    for (r, &p) in dataset.canonical_order().iter().enumerate() {
        rank[p] = r;
    }
    let per_fold: Vec<(MetricsReport, ScoreCard)> = (0..config.n_folds)
        .into_par_iter()
        .map(|f| {
            let train_idx = by_rank(assignment.train_indices(f), &rank);
            let test_idx = by_rank(assignment.test_indices(f), &rank);
            if test_idx.is_empty() {
                return Err(Error::InvalidArgument(format!("fold {f} has no rows")));
            }
            let model = fit(&dataset.subset_rows(&train_idx), &config.fit)?.card;
            let test = dataset.subset_rows(&test_idx);
            let pred = model.predict_many(&test.rows)?;
            let metrics = evaluate(&test.target, &pred, config.fit.threshold)?;
            Ok((metrics, model))
        })
        .collect::<Result<_>>()?;
    let (folds, models): (Vec<_>, Vec<_>) = per_fold.into_iter().unzip();
    Ok(CvRun {
        report: CvReport {
            config: *config,
            aggregate: aggregate(&folds),
            folds,
            prng: PRNG_NAME.to_string(),
            seed: config.seed,
            std_convention: STD_CONVENTION.to_string(),
        },
        models,
        assignment,
    })
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SweepRow {
    pub k: usize,
    pub mae: f64,
    pub r: Option<f64>,
    pub accuracy: Option<f64>,
    pub f1: Option<f64>,
    pub std: MetricSummary,
    /// Objective of the model fitted on all rows.
    pub train_objective: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SweepReport {
    pub config: CvConfig,
    pub k_list: Vec<usize>,
    pub rows: Vec<SweepRow>,
    pub prng: String,
    pub seed: u64,
}

impl SweepReport {
    /// Plot-ready table with columns `k,mae,r,accuracy,f1`; undefined values
    /// are left empty.
    pub fn to_csv(&self) -> Result<String> {
        let mut w = csv::Writer::from_writer(Vec::new());
        w.write_record(["k", "mae", "r", "accuracy", "f1"])?;
        let opt = |v: Option<f64>| v.map(|x| x.to_string()).unwrap_or_default();
        for r in &self.rows {
            w.write_record([
                r.k.to_string(),
                r.mae.to_string(),
                opt(r.r),
                opt(r.accuracy),
                opt(r.f1),
            ])?;
        }
        let bytes = w.into_inner().map_err(|e| Error::Io(e.into_error()))?;
        Ok(String::from_utf8(bytes).expect("csv output is UTF-8"))
    }
}

/// One cross-validated fit per `k`, plus the training objective of a fit on
/// all rows.
pub fn sweep_model_size(dataset: &Dataset, k_list: &[usize], config: &CvConfig) -> Result<SweepReport> {
    let mut rows = Vec::with_capacity(k_list.len());
    for &k in k_list {
        let cfg = CvConfig {
            fit: FitConfig {
                solver: SolverConfig { k, ..config.fit.solver },
                ..config.fit
            },
            ..*config
        };
        let full = fit(dataset, &cfg.fit)?;
        if k > full.bin.n_binary() {
            return Err(Error::KTooLarge { k, dim: full.bin.n_binary() });
        }
        let agg = cross_validate(dataset, &cfg)?.report.aggregate;
        rows.push(SweepRow {
            k,
            mae: agg.mean.mae,
            r: agg.mean.pearson_r,
            accuracy: agg.mean.accuracy,
            f1: agg.mean.f1,
            std: agg.std,
            train_objective: full.outcome.solution.objective,
        });
    }
    Ok(SweepReport {
        config: *config,
        k_list: k_list.to_vec(),
        rows,
        prng: PRNG_NAME.to_string(),
        seed: config.seed,
    })
}
