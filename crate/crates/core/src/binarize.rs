//! Discretization of mixed tabular features into binary indicators.
//!
//! Continuous features are cut either by recursive entropy minimization with the
//! MDL stopping rule (Fayyad & Irani) or at the empirical tertiles; categorical
//! features are one-hot encoded with an explicit `UNK` level. Membership tests
//! use open outer bounds so out-of-range values still land in the first or last
//! interval; display strings use the observed minimum and maximum instead.

use std::collections::HashMap;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::tabular::{Cell, Dataset, FeatureKind, FeatureSchema, UNK};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum XiMethod {
    Mdlp,
    Tertile,
}

/// Class labels used to supervise MDLP for a real-valued target.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "type", rename_all = "lowercase")]
pub enum LabelSource {
    /// `1[y > threshold]`.
    Threshold { threshold: f64 },
    /// Number of target quartiles (linear-interpolation quantiles) that `y`
    /// strictly exceeds, in `0..=3`.
    Quartiles,
}

impl LabelSource {
    pub fn labels(&self, y: &[f64]) -> Vec<usize> {
        match *self {
            LabelSource::Threshold { threshold } => {
                y.iter().map(|&v| usize::from(v > threshold)).collect()
            }
            LabelSource::Quartiles => {
                let mut sorted = y.to_vec();
                sorted.sort_by(f64::total_cmp);
                let qs: Vec<f64> = [0.25, 0.5, 0.75]
                    .iter()
                    .map(|&p| quantile_sorted(&sorted, p))
                    .collect();
                y.iter()
                    .map(|&v| qs.iter().filter(|&&q| v > q).count())
                    .collect()
            }
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct XiConfig {
    pub method: XiMethod,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub label_source: Option<LabelSource>,
}

impl XiConfig {
    pub fn mdlp(threshold: f64) -> Self {
        Self {
            method: XiMethod::Mdlp,
            label_source: Some(LabelSource::Threshold { threshold }),
        }
    }

    pub fn tertile() -> Self {
        Self {
            method: XiMethod::Tertile,
            label_source: None,
        }
    }
}

impl Default for XiConfig {
    fn default() -> Self {
        Self::mdlp(25.0)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum ConditionKind {
    Interval,
    Onehot,
}

mod lower_bound {
    use serde::{Deserialize, Deserializer, Serializer};

    pub fn serialize<S: Serializer>(v: &f64, s: S) -> Result<S::Ok, S::Error> {
        if v.is_finite() {
            s.serialize_f64(*v)
        } else {
            s.serialize_none()
        }
    }

    pub fn deserialize<'de, D: Deserializer<'de>>(d: D) -> Result<f64, D::Error> {
        Ok(Option::<f64>::deserialize(d)?.unwrap_or(f64::NEG_INFINITY))
    }
}

mod upper_bound {
    use serde::{Deserialize, Deserializer};

    pub use super::lower_bound::serialize;

    pub fn deserialize<'de, D: Deserializer<'de>>(d: D) -> Result<f64, D::Error> {
        Ok(Option::<f64>::deserialize(d)?.unwrap_or(f64::INFINITY))
    }
}

/// A named binary condition on one raw feature.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BinCondition {
    #[serde(rename = "feature")]
    pub source_feature: String,
    pub kind: ConditionKind,
    /// Inclusive lower bound; `-inf` (JSON `null`) when open.
    #[serde(with = "lower_bound")]
    pub lower: f64,
    /// Exclusive upper bound; `+inf` (JSON `null`) when open.
    #[serde(with = "upper_bound")]
    pub upper: f64,
    pub category: Option<String>,
    pub display: String,
}

impl BinCondition {
    /// Tests the condition against a cell already canonicalized by
    /// [`XiProvenance::canonical_cell`].
    pub fn matches(&self, cell: &Cell) -> bool {
        match self.kind {
            ConditionKind::Interval => match cell {
                Cell::Num(v) => self.lower <= *v && *v < self.upper,
                _ => false,
            },
            ConditionKind::Onehot => {
                let cat = match cell {
                    Cell::Cat(c) => c.as_str(),
                    Cell::Missing => UNK,
                    Cell::Num(_) => return false,
                };
                self.category.as_deref() == Some(cat)
            }
        }
    }
}

/// Two-decimal rendering with trailing zeros trimmed to one decimal place,
/// e.g. `6.0`, `0.73`, `311.46`.
pub fn fmt_bound(v: f64) -> String {
    let mut s = format!("{v:.2}");
    while s.ends_with('0') && !s.ends_with(".0") {
        s.pop();
    }
    if s == "-0.0" {
        s = "0.0".to_string();
    }
    s
}

fn interval_display(name: &str, lo: Option<f64>, hi: Option<f64>, closed_top: bool) -> String {
    let op = if closed_top { "≤" } else { "<" };
    match (lo, hi) {
        (Some(l), Some(h)) => format!("{} ≤ {name} {op} {}", fmt_bound(l), fmt_bound(h)),
        (Some(l), None) => format!("{} ≤ {name}", fmt_bound(l)),
        (None, Some(h)) => format!("{name} {op} {}", fmt_bound(h)),
        (None, None) => format!("{name} present"),
    }
}

/// How one raw feature was binned.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FeatureBinning {
    pub schema: FeatureSchema,
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    pub cuts: Vec<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub observed_min: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub observed_max: Option<f64>,
}

impl FeatureBinning {
    /// Every indicator this feature expands to, before deduplication.
    pub fn conditions(&self) -> Vec<BinCondition> {
        let name = &self.schema.name;
        match self.schema.kind {
            FeatureKind::Categorical => self
                .schema
                .categories
                .iter()
                .map(|c| BinCondition {
                    source_feature: name.clone(),
                    kind: ConditionKind::Onehot,
                    lower: f64::NEG_INFINITY,
                    upper: f64::INFINITY,
                    category: Some(c.clone()),
                    display: format!("{name}={c}"),
                })
                .collect(),
            FeatureKind::Continuous => {
                let mut edges = Vec::with_capacity(self.cuts.len() + 2);
                edges.push(f64::NEG_INFINITY);
                edges.extend(self.cuts.iter().copied());
                edges.push(f64::INFINITY);
                let last = edges.len() - 2;
                edges
                    .windows(2)
                    .enumerate()
                    .map(|(i, w)| {
                        let lo = if i == 0 { self.observed_min } else { Some(w[0]) };
                        let hi = if i == last { self.observed_max } else { Some(w[1]) };
                        BinCondition {
                            source_feature: name.clone(),
                            kind: ConditionKind::Interval,
                            lower: w[0],
                            upper: w[1],
                            category: None,
                            display: interval_display(name, lo, hi, i == last),
                        }
                    })
                    .collect()
            }
        }
    }
}

/// Everything needed to re-binarize raw rows exactly as at fit time.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct XiProvenance {
    /// `None` when the binary matrix was supplied directly.
    pub config: Option<XiConfig>,
    pub quantile_convention: String,
    pub features: Vec<FeatureBinning>,
}

impl XiProvenance {
    pub fn schema(&self) -> Vec<FeatureSchema> {
        self.features.iter().map(|f| f.schema.clone()).collect()
    }

    pub fn feature_index(&self, name: &str) -> Option<usize> {
        self.features.iter().position(|f| f.schema.name == name)
    }

    /// Maps unseen category labels of feature `j` to `UNK`.
    pub fn canonical_cell(&self, j: usize, cell: &Cell) -> Cell {
        let schema = &self.features[j].schema;
        match (schema.kind, cell) {
            (FeatureKind::Categorical, Cell::Cat(c)) if !schema.categories.contains(c) => {
                Cell::Cat(UNK.to_string())
            }
            _ => cell.clone(),
        }
    }

    /// Checks that `row` is aligned with the fitted feature list.
    pub fn check_row(&self, row: &[Cell]) -> Result<()> {
        if row.len() != self.features.len() {
            return Err(Error::SchemaMismatch(format!(
                "row has {} cells, model expects {}",
                row.len(),
                self.features.len()
            )));
        }
        for (f, cell) in self.features.iter().zip(row) {
            let ok = matches!(
                (f.schema.kind, cell),
                (_, Cell::Missing)
                    | (FeatureKind::Continuous, Cell::Num(_))
                    | (FeatureKind::Categorical, Cell::Cat(_))
            );
            if !ok {
                return Err(Error::SchemaMismatch(format!(
                    "feature `{}` expects a {:?} value",
                    f.schema.name, f.schema.kind
                )));
            }
        }
        Ok(())
    }

    /// Evaluates `conditions` on one raw row.
    pub fn encode_row(&self, row: &[Cell], conditions: &[BinCondition]) -> Result<Vec<u8>> {
        self.check_row(row)?;
        conditions
            .iter()
            .map(|c| {
                let j = self.feature_index(&c.source_feature).ok_or_else(|| {
                    Error::SchemaMismatch(format!("unknown feature `{}`", c.source_feature))
                })?;
                Ok(u8::from(c.matches(&self.canonical_cell(j, &row[j]))))
            })
            .collect()
    }
}

/// Dense `P x D` binary matrix stored column-major.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct BinMatrix {
    rows: usize,
    cols: usize,
    data: Vec<u8>,
}

impl BinMatrix {
    pub fn from_columns(rows: usize, columns: Vec<Vec<u8>>) -> Result<Self> {
        let cols = columns.len();
        let mut data = Vec::with_capacity(rows * cols);
        for c in columns {
            if c.len() != rows {
                return Err(Error::DimensionMismatch {
                    expected: rows,
                    got: c.len(),
                });
            }
            if c.iter().any(|&v| v > 1) {
                return Err(Error::InvalidArgument("binary matrix entries must be 0 or 1".into()));
            }
            data.extend(c);
        }
        Ok(Self { rows, cols, data })
    }

    pub fn from_rows(rows: &[Vec<u8>]) -> Result<Self> {
        let p = rows.len();
        let d = rows.first().map_or(0, Vec::len);
        let mut columns = vec![Vec::with_capacity(p); d];
        for r in rows {
            if r.len() != d {
                return Err(Error::DimensionMismatch {
                    expected: d,
                    got: r.len(),
                });
            }
            for (j, &v) in r.iter().enumerate() {
                columns[j].push(v);
            }
        }
        Self::from_columns(p, columns)
    }

    pub fn rows(&self) -> usize {
        self.rows
    }

    pub fn cols(&self) -> usize {
        self.cols
    }

    pub fn get(&self, row: usize, col: usize) -> u8 {
        self.data[col * self.rows + row]
    }

    pub fn column(&self, col: usize) -> &[u8] {
        &self.data[col * self.rows..(col + 1) * self.rows]
    }

    pub fn row(&self, row: usize) -> Vec<u8> {
        (0..self.cols).map(|j| self.get(row, j)).collect()
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DroppedColumn {
    pub display: String,
    pub reason: String,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BinDataset {
    pub matrix: BinMatrix,
    pub conditions: Vec<BinCondition>,
    pub target: Vec<f64>,
    pub target_name: String,
    pub provenance: XiProvenance,
    pub dropped: Vec<DroppedColumn>,
}

impl BinDataset {
    pub fn n_rows(&self) -> usize {
        self.matrix.rows()
    }

    pub fn n_binary(&self) -> usize {
        self.matrix.cols()
    }

    /// Wraps an already-binary matrix. Column `j` becomes the condition
    /// `names[j]=1` on a two-level categorical source feature.
    pub fn from_binary(
        matrix: BinMatrix,
        names: Vec<String>,
        target: Vec<f64>,
        target_name: impl Into<String>,
    ) -> Result<Self> {
        if names.len() != matrix.cols() {
            return Err(Error::DimensionMismatch {
                expected: matrix.cols(),
                got: names.len(),
            });
        }
        if target.len() != matrix.rows() {
            return Err(Error::DimensionMismatch {
                expected: matrix.rows(),
                got: target.len(),
            });
        }
        let features: Vec<FeatureBinning> = names
            .iter()
            .map(|n| FeatureBinning {
                schema: FeatureSchema::categorical(n, &["0", "1"]),
                cuts: Vec::new(),
                observed_min: None,
                observed_max: None,
            })
            .collect();
        let conditions = names
            .iter()
            .map(|n| BinCondition {
                source_feature: n.clone(),
                kind: ConditionKind::Onehot,
                lower: f64::NEG_INFINITY,
                upper: f64::INFINITY,
                category: Some("1".into()),
                display: format!("{n}=1"),
            })
            .collect();
        Ok(Self {
            matrix,
            conditions,
            target,
            target_name: target_name.into(),
            provenance: XiProvenance {
                config: None,
                quantile_convention: QUANTILE_CONVENTION.into(),
                features,
            },
            dropped: Vec::new(),
        })
    }
}

impl BinDataset {
    /// Copy with every column identical to an earlier one removed.
    pub fn dedup_columns(&self) -> BinDataset {
        let mut seen: HashMap<&[u8], usize> = HashMap::new();
        let mut keep = Vec::new();
        let mut dropped = self.dropped.clone();
        for j in 0..self.n_binary() {
            match seen.get(self.matrix.column(j)) {
                Some(&first) => dropped.push(DroppedColumn {
                    display: self.conditions[j].display.clone(),
                    reason: format!("duplicate of `{}`", self.conditions[first].display),
                }),
                None => {
                    seen.insert(self.matrix.column(j), j);
                    keep.push(j);
                }
            }
        }
        let columns = keep.iter().map(|&j| self.matrix.column(j).to_vec()).collect();
        BinDataset {
            matrix: BinMatrix::from_columns(self.n_rows(), columns).expect("columns share row count"),
            conditions: keep.iter().map(|&j| self.conditions[j].clone()).collect(),
            target: self.target.clone(),
            target_name: self.target_name.clone(),
            provenance: self.provenance.clone(),
            dropped,
        }
    }
}

pub const QUANTILE_CONVENTION: &str =
    "linear interpolation on order statistics, h = (n - 1) p";

/// Linear-interpolation quantile of an ascending, non-empty slice.
pub fn quantile_sorted(sorted: &[f64], p: f64) -> f64 {
    let n = sorted.len();
    let h = (n - 1) as f64 * p;
    let lo = h.floor() as usize;
    if lo + 1 >= n {
        return sorted[n - 1];
    }
    sorted[lo] + (h - lo as f64) * (sorted[lo + 1] - sorted[lo])
}

/// Cut points at the 1/3 and 2/3 empirical quantiles. Coinciding cuts are
/// collapsed, and a cut equal to the minimum is dropped because the interval
/// below it would be empty.
pub fn tertile_cuts(values: &[f64]) -> Vec<f64> {
    let mut sorted: Vec<f64> = values.iter().copied().filter(|v| v.is_finite()).collect();
    if sorted.is_empty() {
        return Vec::new();
    }
    sorted.sort_by(f64::total_cmp);
    let min = sorted[0];
    let mut cuts: Vec<f64> = Vec::with_capacity(2);
    for p in [1.0 / 3.0, 2.0 / 3.0] {
        let q = quantile_sorted(&sorted, p);
        if q > min && cuts.last() != Some(&q) {
            cuts.push(q);
        }
    }
    cuts
}

fn entropy(counts: &[usize], n: usize) -> f64 {
    if n == 0 {
        return 0.0;
    }
    let n = n as f64;
    counts
        .iter()
        .filter(|&&c| c > 0)
        .map(|&c| {
            let q = c as f64 / n;
            -q * q.log2()
        })
        .sum()
}

struct MdlpState<'a> {
    values: &'a [f64],
    /// `prefix[i * k + c]` = count of class `c` among the first `i` sorted points.
    prefix: Vec<usize>,
    n_classes: usize,
    /// For each sorted position, the single class of its equal-value group, or
    /// `None` if the group mixes classes.
    group_purity: Vec<Option<usize>>,
}

impl MdlpState<'_> {
    fn counts(&self, lo: usize, hi: usize) -> Vec<usize> {
        let k = self.n_classes;
        (0..k)
            .map(|c| self.prefix[hi * k + c] - self.prefix[lo * k + c])
            .collect()
    }

    fn split(&self, lo: usize, hi: usize, cuts: &mut Vec<f64>) {
        let n = hi - lo;
        if n < 2 {
            return;
        }
        let counts = self.counts(lo, hi);
        let ent = entropy(&counts, n);
        if ent == 0.0 {
            return;
        }

        let mut best: Option<(usize, f64)> = None;
        for i in lo + 1..hi {
            if self.values[i] == self.values[i - 1] {
                continue;
            }
            let (left, right) = (self.group_purity[i - 1], self.group_purity[i]);
            if left.is_some() && left == right {
                continue;
            }
            let e1 = entropy(&self.counts(lo, i), i - lo);
            let e2 = entropy(&self.counts(i, hi), hi - i);
            let weighted = ((i - lo) as f64 * e1 + (hi - i) as f64 * e2) / n as f64;
            if best.is_none_or(|(_, b)| weighted < b) {
                best = Some((i, weighted));
            }
        }
        let Some((i, weighted)) = best else {
            return;
        };

        let c1 = self.counts(lo, i);
        let c2 = self.counts(i, hi);
        let distinct = |c: &[usize]| c.iter().filter(|&&x| x > 0).count() as f64;
        let (k, k1, k2) = (distinct(&counts), distinct(&c1), distinct(&c2));
        let (e1, e2) = (entropy(&c1, i - lo), entropy(&c2, hi - i));
        let gain = ent - weighted;
        let delta = (3f64.powf(k) - 2.0).log2() - (k * ent - k1 * e1 - k2 * e2);
        let threshold = (((n - 1) as f64).log2() + delta) / n as f64;
        if gain > threshold {
            self.split(lo, i, cuts);
            cuts.push(0.5 * (self.values[i - 1] + self.values[i]));
            self.split(i, hi, cuts);
        }
    }
}

/// Recursive minimum-entropy cut points accepted by the MDL criterion,
/// ascending. Candidate cuts are midpoints at class boundary points. Non-finite
/// values are ignored.
pub fn mdlp_cuts(values: &[f64], labels: &[usize]) -> Result<Vec<f64>> {
    if values.len() != labels.len() {
        return Err(Error::DimensionMismatch {
            expected: values.len(),
            got: labels.len(),
        });
    }
    let mut pairs: Vec<(f64, usize)> = values
        .iter()
        .zip(labels)
        .filter(|(v, _)| v.is_finite())
        .map(|(&v, &l)| (v, l))
        .collect();
    pairs.sort_by(|a, b| a.0.total_cmp(&b.0).then(a.1.cmp(&b.1)));
    let n = pairs.len();
    if n < 2 || pairs[0].0 == pairs[n - 1].0 {
        return Ok(Vec::new());
    }

    let n_classes = pairs.iter().map(|p| p.1).max().unwrap_or(0) + 1;
    let mut prefix = vec![0usize; (n + 1) * n_classes];
    for (i, &(_, l)) in pairs.iter().enumerate() {
        let (head, tail) = prefix.split_at_mut((i + 1) * n_classes);
        tail[..n_classes].copy_from_slice(&head[i * n_classes..]);
        tail[l] += 1;
    }
    let mut group_purity = vec![None; n];
    let mut start = 0;
    while start < n {
        let mut end = start + 1;
        while end < n && pairs[end].0 == pairs[start].0 {
            end += 1;
        }
        let first = pairs[start].1;
        let pure = pairs[start..end].iter().all(|p| p.1 == first).then_some(first);
        group_purity[start..end].fill(pure);
        start = end;
    }

    let values: Vec<f64> = pairs.iter().map(|p| p.0).collect();
    let state = MdlpState {
        values: &values,
        prefix,
        n_classes,
        group_purity,
    };
    let mut cuts = Vec::new();
    state.split(0, n, &mut cuts);
    Ok(cuts)
}

/// Binarizes `dataset` with `config`: one interval indicator per bin of every
/// continuous feature and one indicator per category (including `UNK`) of
/// every categorical feature. Constant and duplicate columns are dropped,
/// keeping the first of each duplicate group.
pub fn binarize(dataset: &Dataset, config: &XiConfig) -> Result<BinDataset> {
    let labels = match (config.method, config.label_source) {
        (XiMethod::Mdlp, None) => return Err(Error::MissingLabelSource),
        (XiMethod::Mdlp, Some(src)) => Some(src.labels(&dataset.target)),
        (XiMethod::Tertile, _) => None,
    };

    let mut features = Vec::with_capacity(dataset.n_features());
    for (j, schema) in dataset.schema.iter().enumerate() {
        let binning = match schema.kind {
            FeatureKind::Categorical => FeatureBinning {
                schema: schema.clone(),
                cuts: Vec::new(),
                observed_min: None,
                observed_max: None,
            },
            FeatureKind::Continuous => {
                let col = dataset.numeric_column(j);
                let present: Vec<(f64, usize)> = col
                    .iter()
                    .enumerate()
                    .filter_map(|(p, v)| v.map(|v| (v, p)))
                    .collect();
                let vals: Vec<f64> = present.iter().map(|x| x.0).collect();
                let cuts = match &labels {
                    Some(l) => {
                        let ls: Vec<usize> = present.iter().map(|x| l[x.1]).collect();
                        mdlp_cuts(&vals, &ls)?
                    }
                    None => tertile_cuts(&vals),
                };
                FeatureBinning {
                    schema: schema.clone(),
                    cuts,
                    observed_min: vals.iter().copied().reduce(f64::min),
                    observed_max: vals.iter().copied().reduce(f64::max),
                }
            }
        };
        features.push(binning);
    }
    let provenance = XiProvenance {
        config: Some(*config),
        quantile_convention: QUANTILE_CONVENTION.into(),
        features,
    };

    let mut columns = Vec::new();
    let mut conditions = Vec::new();
    let mut dropped = Vec::new();
    let mut seen: HashMap<Vec<u8>, String> = HashMap::new();
    let canonical: Vec<Vec<Cell>> = dataset
        .rows
        .iter()
        .map(|r| {
            r.iter()
                .enumerate()
                .map(|(j, c)| provenance.canonical_cell(j, c))
                .collect()
        })
        .collect();
    for (j, f) in provenance.features.iter().enumerate() {
        for cond in f.conditions() {
            let col: Vec<u8> = canonical.iter().map(|r| u8::from(cond.matches(&r[j]))).collect();
            let ones = col.iter().filter(|&&v| v == 1).count();
            if ones == 0 || ones == col.len() {
                dropped.push(DroppedColumn {
                    display: cond.display,
                    reason: if ones == 0 { "constant 0" } else { "constant 1" }.into(),
                });
                continue;
            }
            if let Some(first) = seen.get(&col) {
                dropped.push(DroppedColumn {
                    display: cond.display,
                    reason: format!("duplicate of `{first}`"),
                });
                continue;
            }
            seen.insert(col.clone(), cond.display.clone());
            columns.push(col);
            conditions.push(cond);
        }
    }

    Ok(BinDataset {
        matrix: BinMatrix::from_columns(dataset.n_rows(), columns)?,
        conditions,
        target: dataset.target.clone(),
        target_name: dataset.target_name.clone(),
        provenance,
        dropped,
    })
}
