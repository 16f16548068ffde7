//! Tabular regression data: schema, CSV loading, standardization, univariate
//! feature screening and stratified fold assignment.
//!
//! Continuous cells that are empty in the CSV are kept as [`Cell::Missing`] and
//! excluded from every statistic computed here; nothing is imputed.

use std::cmp::Ordering;
use std::collections::{BTreeSet, HashMap, HashSet};
use std::io::{Read, Write};
use std::path::Path;

use rand::Rng;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};
use statrs::distribution::{ContinuousCDF, FisherSnedecor};

use crate::error::{Error, Result};

/// Sentinel category for unseen or missing categorical values.
pub const UNK: &str = "UNK";

/// Name of the PRNG behind every seeded operation in this crate.
pub const PRNG_NAME: &str = "ChaCha8Rng (rand_chacha 0.9, seed_from_u64)";

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum FeatureKind {
    Continuous,
    Categorical,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FeatureSchema {
    pub name: String,
    pub kind: FeatureKind,
    /// Categorical only; always contains [`UNK`].
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    pub categories: Vec<String>,
}

impl FeatureSchema {
    pub fn continuous(name: impl Into<String>) -> Self {
        Self {
            name: name.into(),
            kind: FeatureKind::Continuous,
            categories: Vec::new(),
        }
    }

    /// Builds a categorical schema, deduplicating `categories` and appending
    /// [`UNK`] when absent.
    pub fn categorical<S: AsRef<str>>(name: impl Into<String>, categories: &[S]) -> Self {
        let mut seen = HashSet::new();
        let mut cats: Vec<String> = categories
            .iter()
            .map(|c| c.as_ref().to_string())
            .filter(|c| seen.insert(c.clone()))
            .collect();
        if !cats.iter().any(|c| c == UNK) {
            cats.push(UNK.to_string());
        }
        Self {
            name: name.into(),
            kind: FeatureKind::Categorical,
            categories: cats,
        }
    }
}

/// One feature declaration in a user-supplied schema file.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FeatureSpec {
    pub name: String,
    pub kind: FeatureKind,
    /// Optional fixed category list; inferred from the data when omitted.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub categories: Option<Vec<String>>,
}

/// Schema file: target column plus declared feature kinds.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SchemaSpec {
    pub target: String,
    pub features: Vec<FeatureSpec>,
}

impl SchemaSpec {
    pub fn from_json_path(path: impl AsRef<Path>) -> Result<Self> {
        let text = std::fs::read_to_string(path)?;
        Ok(serde_json::from_str(&text)?)
    }

    /// Schema file describing an in-memory dataset, with explicit category
    /// lists.
    pub fn describe(dataset: &Dataset) -> Self {
        Self {
            target: dataset.target_name.clone(),
            features: dataset
                .schema
                .iter()
                .map(|f| FeatureSpec {
                    name: f.name.clone(),
                    kind: f.kind,
                    categories: (f.kind == FeatureKind::Categorical).then(|| {
                        f.categories.iter().filter(|c| *c != UNK).cloned().collect()
                    }),
                })
                .collect(),
        }
    }

    fn validate(&self) -> Result<()> {
        let mut names = HashSet::new();
        for f in &self.features {
            if !names.insert(f.name.as_str()) {
                return Err(Error::InvalidSchema(format!("duplicate feature `{}`", f.name)));
            }
            if f.name == self.target {
                return Err(Error::InvalidSchema(format!(
                    "`{}` declared as both feature and target",
                    f.name
                )));
            }
            if f.kind == FeatureKind::Continuous && f.categories.is_some() {
                return Err(Error::InvalidSchema(format!(
                    "continuous feature `{}` lists categories",
                    f.name
                )));
            }
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub enum Cell {
    Num(f64),
    Cat(String),
    Missing,
}

impl Cell {
    pub fn as_num(&self) -> Option<f64> {
        match self {
            Cell::Num(v) => Some(*v),
            _ => None,
        }
    }

    pub fn is_missing(&self) -> bool {
        matches!(self, Cell::Missing)
    }
}

fn cmp_cell(a: &Cell, b: &Cell) -> Ordering {
    fn rank(c: &Cell) -> u8 {
        match c {
            Cell::Missing => 0,
            Cell::Num(_) => 1,
            Cell::Cat(_) => 2,
        }
    }
    match (a, b) {
        (Cell::Num(x), Cell::Num(y)) => x.total_cmp(y),
        (Cell::Cat(x), Cell::Cat(y)) => x.cmp(y),
        _ => rank(a).cmp(&rank(b)),
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Dataset {
    pub schema: Vec<FeatureSchema>,
    /// Row-major cells, `rows[p].len() == schema.len()`.
    pub rows: Vec<Vec<Cell>>,
    pub target: Vec<f64>,
    pub target_name: String,
}

impl Dataset {
    pub fn new(
        schema: Vec<FeatureSchema>,
        rows: Vec<Vec<Cell>>,
        target: Vec<f64>,
        target_name: impl Into<String>,
    ) -> Result<Self> {
        if rows.is_empty() {
            return Err(Error::EmptyDataset);
        }
        if rows.len() != target.len() {
            return Err(Error::DimensionMismatch {
                expected: rows.len(),
                got: target.len(),
            });
        }
        let mut names = HashSet::new();
        for f in &schema {
            if !names.insert(f.name.as_str()) {
                return Err(Error::InvalidSchema(format!("duplicate feature `{}`", f.name)));
            }
            if f.kind == FeatureKind::Categorical && f.categories.is_empty() {
                return Err(Error::InvalidSchema(format!(
                    "categorical feature `{}` has no categories",
                    f.name
                )));
            }
        }
        for row in &rows {
            if row.len() != schema.len() {
                return Err(Error::DimensionMismatch {
                    expected: schema.len(),
                    got: row.len(),
                });
            }
        }
        if let Some(p) = target.iter().position(|v| !v.is_finite()) {
            return Err(Error::MissingTarget { row: p });
        }
        Ok(Self {
            schema,
            rows,
            target,
            target_name: target_name.into(),
        })
    }

    pub fn n_rows(&self) -> usize {
        self.rows.len()
    }

    pub fn n_features(&self) -> usize {
        self.schema.len()
    }

    pub fn feature_index(&self, name: &str) -> Option<usize> {
        self.schema.iter().position(|f| f.name == name)
    }

    /// Continuous column `j` with `None` for missing cells.
    pub fn numeric_column(&self, j: usize) -> Vec<Option<f64>> {
        self.rows.iter().map(|r| r[j].as_num()).collect()
    }

    /// Dataset restricted to the given rows, in the given order.
    pub fn subset_rows(&self, indices: &[usize]) -> Dataset {
        Dataset {
            schema: self.schema.clone(),
            rows: indices.iter().map(|&i| self.rows[i].clone()).collect(),
            target: indices.iter().map(|&i| self.target[i]).collect(),
            target_name: self.target_name.clone(),
        }
    }

    /// Dataset restricted to the named features, keeping schema order.
    pub fn select_features(&self, names: &[String]) -> Dataset {
        let keep: HashSet<&str> = names.iter().map(String::as_str).collect();
        let cols: Vec<usize> = (0..self.schema.len())
            .filter(|&j| keep.contains(self.schema[j].name.as_str()))
            .collect();
        Dataset {
            schema: cols.iter().map(|&j| self.schema[j].clone()).collect(),
            rows: self
                .rows
                .iter()
                .map(|r| cols.iter().map(|&j| r[j].clone()).collect())
                .collect(),
            target: self.target.clone(),
            target_name: self.target_name.clone(),
        }
    }

    /// Row order sorted by target, then by cell content. Used wherever an
    /// operation must not depend on the input row order.
    pub fn canonical_order(&self) -> Vec<usize> {
        let mut idx: Vec<usize> = (0..self.n_rows()).collect();
        idx.sort_by(|&a, &b| self.cmp_rows(a, b));
        idx
    }

    fn cmp_rows(&self, a: usize, b: usize) -> Ordering {
        self.target[a].total_cmp(&self.target[b]).then_with(|| {
            self.rows[a]
                .iter()
                .zip(&self.rows[b])
                .map(|(x, y)| cmp_cell(x, y))
                .find(|o| *o != Ordering::Equal)
                .unwrap_or(Ordering::Equal)
        })
    }
}

fn parse_num(raw: &str, row: usize, column: &str) -> Result<Cell> {
    if raw.is_empty() {
        return Ok(Cell::Missing);
    }
    raw.parse::<f64>()
        .ok()
        .filter(|v| v.is_finite())
        .map(Cell::Num)
        .ok_or_else(|| Error::InvalidValue {
            row,
            column: column.to_string(),
            value: raw.to_string(),
        })
}

struct RawTable {
    header: Vec<String>,
    records: Vec<csv::StringRecord>,
}

fn read_raw<R: Read>(reader: R) -> Result<RawTable> {
    let mut rdr = csv::ReaderBuilder::new()
        .has_headers(true)
        .trim(csv::Trim::All)
        .from_reader(reader);
    let header = rdr.headers()?.iter().map(str::to_string).collect();
    let records = rdr.records().collect::<std::result::Result<Vec<_>, _>>()?;
    Ok(RawTable { header, records })
}

fn column_of(header: &[String], name: &str) -> Result<usize> {
    header
        .iter()
        .position(|h| h == name)
        .ok_or_else(|| Error::UnknownColumn(name.to_string()))
}

/// Parses feature cells against a fixed schema. Categorical labels outside the
/// schema's category list become [`UNK`].
fn parse_rows(table: &RawTable, schema: &[FeatureSchema]) -> Result<Vec<Vec<Cell>>> {
    let cols = schema
        .iter()
        .map(|f| column_of(&table.header, &f.name))
        .collect::<Result<Vec<_>>>()?;
    let cat_sets: Vec<HashSet<&str>> = schema
        .iter()
        .map(|f| f.categories.iter().map(String::as_str).collect())
        .collect();
    table
        .records
        .iter()
        .enumerate()
        .map(|(p, rec)| {
            schema
                .iter()
                .zip(&cols)
                .zip(&cat_sets)
                .map(|((f, &c), cats)| {
                    let raw = rec.get(c).unwrap_or("");
                    match f.kind {
                        FeatureKind::Continuous => parse_num(raw, p, &f.name),
                        FeatureKind::Categorical if raw.is_empty() => Ok(Cell::Missing),
                        FeatureKind::Categorical if cats.contains(raw) => {
                            Ok(Cell::Cat(raw.to_string()))
                        }
                        FeatureKind::Categorical => Ok(Cell::Cat(UNK.to_string())),
                    }
                })
                .collect()
        })
        .collect()
}

/// Loads a labelled dataset from CSV according to `spec`. Columns present in
/// the CSV but absent from `spec` are ignored.
pub fn load_dataset<R: Read>(reader: R, spec: &SchemaSpec) -> Result<Dataset> {
    spec.validate()?;
    let table = read_raw(reader)?;
    if table.records.is_empty() {
        return Err(Error::EmptyDataset);
    }
    let target_col = column_of(&table.header, &spec.target)?;

    let mut schema = Vec::with_capacity(spec.features.len());
    for f in &spec.features {
        let col = column_of(&table.header, &f.name)?;
        schema.push(match f.kind {
            FeatureKind::Continuous => FeatureSchema::continuous(&f.name),
            FeatureKind::Categorical => match &f.categories {
                Some(c) if !c.is_empty() => FeatureSchema::categorical(&f.name, c),
                _ => {
                    let observed: BTreeSet<&str> = table
                        .records
                        .iter()
                        .filter_map(|r| r.get(col))
                        .filter(|v| !v.is_empty())
                        .collect();
                    let observed: Vec<&str> = observed.into_iter().collect();
                    FeatureSchema::categorical(&f.name, &observed)
                }
            },
        });
    }

    let rows = parse_rows(&table, &schema)?;
    let target = table
        .records
        .iter()
        .enumerate()
        .map(|(p, rec)| match parse_num(rec.get(target_col).unwrap_or(""), p, &spec.target)? {
            Cell::Num(v) => Ok(v),
            _ => Err(Error::MissingTarget { row: p }),
        })
        .collect::<Result<Vec<_>>>()?;
    Dataset::new(schema, rows, target, spec.target.clone())
}

pub fn load_dataset_path(path: impl AsRef<Path>, spec: &SchemaSpec) -> Result<Dataset> {
    load_dataset(std::fs::File::open(path)?, spec)
}

/// Writes `dataset` as CSV, features first and the target last. Numbers use
/// the shortest representation that parses back to the same value.
pub fn write_dataset<W: Write>(dataset: &Dataset, writer: W) -> Result<()> {
    let mut w = csv::Writer::from_writer(writer);
    let mut header: Vec<&str> = dataset.schema.iter().map(|f| f.name.as_str()).collect();
    header.push(&dataset.target_name);
    w.write_record(&header)?;
    for (row, y) in dataset.rows.iter().zip(&dataset.target) {
        let mut rec: Vec<String> = row
            .iter()
            .map(|c| match c {
                Cell::Num(v) => v.to_string(),
                Cell::Cat(s) => s.clone(),
                Cell::Missing => String::new(),
            })
            .collect();
        rec.push(y.to_string());
        w.write_record(&rec)?;
    }
    w.flush()?;
    Ok(())
}

/// Reads feature rows against an already-fitted schema. The target column is
/// read when `target` is given and present in the header; a present target
/// column must be complete.
pub fn load_rows<R: Read>(
    reader: R,
    schema: &[FeatureSchema],
    target: Option<&str>,
) -> Result<(Vec<Vec<Cell>>, Option<Vec<f64>>)> {
    let table = read_raw(reader)?;
    let rows = parse_rows(&table, schema)?;
    let target = match target.and_then(|t| table.header.iter().position(|h| h == t)) {
        Some(col) => Some(
            table
                .records
                .iter()
                .enumerate()
                .map(|(p, rec)| match parse_num(rec.get(col).unwrap_or(""), p, target.unwrap())? {
                    Cell::Num(v) => Ok(v),
                    _ => Err(Error::MissingTarget { row: p }),
                })
                .collect::<Result<Vec<_>>>()?,
        ),
        None => None,
    };
    Ok((rows, target))
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ScalerEntry {
    pub feature: String,
    pub mean: f64,
    pub std: f64,
    /// Set when the observed standard deviation was zero and clamped to 1.
    pub constant: bool,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ScalerParams {
    /// Standard deviation convention, always `"population"`.
    pub convention: String,
    pub features: Vec<ScalerEntry>,
}

impl ScalerParams {
    fn entries_by_name(&self) -> HashMap<&str, &ScalerEntry> {
        self.features.iter().map(|e| (e.feature.as_str(), e)).collect()
    }

    fn map(&self, dataset: &Dataset, f: impl Fn(f64, &ScalerEntry) -> f64) -> Dataset {
        let by_name = self.entries_by_name();
        let entries: Vec<Option<&ScalerEntry>> = dataset
            .schema
            .iter()
            .map(|s| match s.kind {
                FeatureKind::Continuous => by_name.get(s.name.as_str()).copied(),
                FeatureKind::Categorical => None,
            })
            .collect();
        let mut out = dataset.clone();
        for row in &mut out.rows {
            for (cell, entry) in row.iter_mut().zip(&entries) {
                if let (Cell::Num(v), Some(e)) = (&*cell, entry) {
                    *cell = Cell::Num(f(*v, e));
                }
            }
        }
        out
    }

    pub fn transform(&self, dataset: &Dataset) -> Dataset {
        self.map(dataset, |v, e| (v - e.mean) / e.std)
    }

    pub fn inverse_transform(&self, dataset: &Dataset) -> Dataset {
        self.map(dataset, |v, e| v * e.std + e.mean)
    }
}

/// Centers and scales every continuous feature to mean 0 and population
/// variance 1 over its non-missing cells. Categorical features pass through.
pub fn standardize(dataset: &Dataset) -> (Dataset, ScalerParams) {
    let features = dataset
        .schema
        .iter()
        .enumerate()
        .filter(|(_, f)| f.kind == FeatureKind::Continuous)
        .map(|(j, f)| {
            let vals: Vec<f64> = dataset.numeric_column(j).into_iter().flatten().collect();
            let n = vals.len() as f64;
            let (mean, var) = if vals.is_empty() {
                (0.0, 0.0)
            } else {
                let mean = vals.iter().sum::<f64>() / n;
                let var = vals.iter().map(|v| (v - mean).powi(2)).sum::<f64>() / n;
                (mean, var)
            };
            let std = var.sqrt();
            let constant = !(std > 0.0);
            ScalerEntry {
                feature: f.name.clone(),
                mean,
                std: if constant { 1.0 } else { std },
                constant,
            }
        })
        .collect();
    let params = ScalerParams {
        convention: "population".to_string(),
        features,
    };
    (params.transform(dataset), params)
}

/// Univariate F-test of one continuous feature against the target.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FStat {
    pub feature: String,
    pub n: usize,
    pub r: f64,
    pub f: f64,
    pub p_value: f64,
    pub selected: bool,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub warning: Option<String>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SelectionReport {
    pub alpha: f64,
    pub stats: Vec<FStat>,
    /// Selected feature names in schema order; categorical features always kept.
    pub selected: Vec<String>,
}

fn pearson(xs: &[f64], ys: &[f64]) -> f64 {
    let n = xs.len() as f64;
    let mx = xs.iter().sum::<f64>() / n;
    let my = ys.iter().sum::<f64>() / n;
    let (mut sxy, mut sxx, mut syy) = (0.0, 0.0, 0.0);
    for (x, y) in xs.iter().zip(ys) {
        sxy += (x - mx) * (y - my);
        sxx += (x - mx) * (x - mx);
        syy += (y - my) * (y - my);
    }
    if sxx <= 0.0 || syy <= 0.0 {
        return 0.0;
    }
    (sxy / (sxx.sqrt() * syy.sqrt())).clamp(-1.0, 1.0)
}

/// F statistic and upper-tail p-value for a correlation `r` observed on `n`
/// points under `F(1, n - 2)`.
pub fn f_test(r: f64, n: usize) -> (f64, f64) {
    let df = (n - 2) as f64;
    let r2 = r * r;
    if r2 >= 1.0 {
        return (f64::INFINITY, 0.0);
    }
    let f = df * r2 / (1.0 - r2);
    let dist = FisherSnedecor::new(1.0, df).expect("df > 0");
    (f, dist.sf(f).clamp(0.0, 1.0))
}

/// Screens continuous features by the univariate regression F-test, keeping
/// those with `p < alpha`. Features with fewer than 3 complete pairs are
/// rejected with a warning.
pub fn f_regression_select(dataset: &Dataset, alpha: f64) -> Result<SelectionReport> {
    if !(alpha > 0.0 && alpha < 1.0) {
        return Err(Error::InvalidArgument(format!("alpha must lie in (0, 1), got {alpha}")));
    }
    let mut stats = Vec::new();
    let mut selected = Vec::new();
    for (j, f) in dataset.schema.iter().enumerate() {
        if f.kind == FeatureKind::Categorical {
            selected.push(f.name.clone());
            continue;
        }
        let (xs, ys): (Vec<f64>, Vec<f64>) = dataset
            .numeric_column(j)
            .into_iter()
            .zip(&dataset.target)
            .filter_map(|(x, &y)| x.map(|x| (x, y)))
            .unzip();
        let n = xs.len();
        let stat = if n < 3 {
            FStat {
                feature: f.name.clone(),
                n,
                r: f64::NAN,
                f: f64::NAN,
                p_value: 1.0,
                selected: false,
                warning: Some(format!("only {n} non-missing values; rejected")),
            }
        } else {
            let r = pearson(&xs, &ys);
            let (fstat, p) = f_test(r, n);
            FStat {
                feature: f.name.clone(),
                n,
                r,
                f: fstat,
                p_value: p,
                selected: p < alpha,
                warning: None,
            }
        };
        if stat.selected {
            selected.push(f.name.clone());
        }
        stats.push(stat);
    }
    Ok(SelectionReport {
        alpha,
        stats,
        selected,
    })
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct FoldAssignment {
    pub fold_of_row: Vec<usize>,
    pub n_folds: usize,
    pub seed: u64,
    pub strat_bins: usize,
}

impl FoldAssignment {
    pub fn test_indices(&self, fold: usize) -> Vec<usize> {
        (0..self.fold_of_row.len())
            .filter(|&p| self.fold_of_row[p] == fold)
            .collect()
    }

    pub fn train_indices(&self, fold: usize) -> Vec<usize> {
        (0..self.fold_of_row.len())
            .filter(|&p| self.fold_of_row[p] != fold)
            .collect()
    }

    pub fn fold_sizes(&self) -> Vec<usize> {
        let mut sizes = vec![0; self.n_folds];
        for &f in &self.fold_of_row {
            sizes[f] += 1;
        }
        sizes
    }
}

/// Equal-frequency bin of each row's target, `0..strat_bins`, ranking rows
/// by [`Dataset::canonical_order`].
pub fn target_bins(dataset: &Dataset, strat_bins: usize) -> Vec<usize> {
    let p = dataset.n_rows();
    let mut bins = vec![0; p];
    for (rank, &row) in dataset.canonical_order().iter().enumerate() {
        bins[row] = rank * strat_bins / p;
    }
    bins
}

/// Stratified k-fold assignment. Rows are ranked by target into `strat_bins`
/// equal-frequency bins; each bin is shuffled with the seeded PRNG and dealt
/// round-robin into folds, the deal continuing across bins so overall fold
/// sizes differ by at most one. The assignment depends on row content, not on
/// input row order.
pub fn stratified_kfold(
    dataset: &Dataset,
    n_folds: usize,
    strat_bins: usize,
    seed: u64,
) -> Result<FoldAssignment> {
    if n_folds < 2 {
        return Err(Error::InvalidArgument(format!("n_folds must be >= 2, got {n_folds}")));
    }
    if strat_bins < 1 {
        return Err(Error::InvalidArgument("strat_bins must be >= 1".to_string()));
    }
    let p = dataset.n_rows();
    let order = dataset.canonical_order();
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut fold_of_row = vec![0; p];
    let mut next = 0usize;
    for b in 0..strat_bins {
        let lo = (b * p).div_ceil(strat_bins);
        let hi = ((b + 1) * p).div_ceil(strat_bins);
        let mut members: Vec<usize> = order[lo..hi].to_vec();
        for i in (1..members.len()).rev() {
            let j = rng.random_range(0..=i);
            members.swap(i, j);
        }
        for row in members {
            fold_of_row[row] = next % n_folds;
            next += 1;
        }
    }
    Ok(FoldAssignment {
        fold_of_row,
        n_folds,
        seed,
        strat_bins,
    })
}
