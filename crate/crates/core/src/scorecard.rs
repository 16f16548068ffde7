//! The deployable model: a bias plus real-valued points per binary condition.

use serde::{Deserialize, Serialize};

use crate::binarize::{BinCondition, BinDataset, XiProvenance};
use crate::error::{Error, Result};
use crate::ridge::SupportSolution;
use crate::tabular::{Cell, ScalerParams};

pub const MODEL_VERSION: u32 = 1;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ScoreEntry {
    #[serde(flatten)]
    pub condition: BinCondition,
    pub weight: f64,
}

/// Solver bookkeeping carried alongside a card.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FitSummary {
    pub solver: String,
    pub k: usize,
    pub lambda2: f64,
    pub objective: f64,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub certified_optimal: Option<bool>,
    pub n_binary_features: usize,
    pub n_rows: usize,
    /// Continuous features removed by the univariate screen before binning.
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    pub screened_out: Vec<String>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ScoreCard {
    pub version: u32,
    pub target_name: String,
    pub bias: f64,
    pub entries: Vec<ScoreEntry>,
    pub threshold: Option<f64>,
    pub xi_provenance: XiProvenance,
    pub scaler: Option<ScalerParams>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub fit: Option<FitSummary>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub tool: Option<String>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub run_config: Option<serde_json::Value>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Class {
    Positive,
    Negative,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Format {
    Text,
    Markdown,
    Json,
}

impl std::str::FromStr for Format {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "text" => Ok(Format::Text),
            "markdown" | "md" => Ok(Format::Markdown),
            "json" => Ok(Format::Json),
            other => Err(Error::InvalidArgument(format!("unknown format `{other}`"))),
        }
    }
}

/// Maps each support index of `solution` to its named condition. Zero
/// weights are left out so the entry count equals the number of nonzeros.
pub fn build_scorecard(solution: &SupportSolution, data: &BinDataset) -> Result<ScoreCard> {
    if solution.beta.len() != solution.support.len() {
        return Err(Error::DimensionMismatch {
            expected: solution.support.len(),
            got: solution.beta.len(),
        });
    }
    let entries = solution
        .support
        .iter()
        .zip(&solution.beta)
        .filter(|(_, &w)| w != 0.0)
        .map(|(&j, &weight)| {
            data.conditions
                .get(j)
                .map(|c| ScoreEntry {
                    condition: c.clone(),
                    weight,
                })
                .ok_or(Error::IndexOutOfRange {
                    index: j,
                    dim: data.n_binary(),
                })
        })
        .collect::<Result<Vec<_>>>()?;
    Ok(ScoreCard {
        version: MODEL_VERSION,
        target_name: data.target_name.clone(),
        bias: solution.bias,
        entries,
        threshold: None,
        xi_provenance: data.provenance.clone(),
        scaler: None,
        fit: None,
        tool: None,
        run_config: None,
    })
}

fn fmt_weight(w: f64) -> String {
    let s = format!("{w:.2}");
    if s == "-0.00" {
        "0.00".into()
    } else {
        s
    }
}

impl ScoreCard {
    /// Per-entry activity on one raw row aligned with the fitted features.
    pub fn active(&self, row: &[Cell]) -> Result<Vec<bool>> {
        self.xi_provenance.check_row(row)?;
        self.entries
            .iter()
            .map(|e| {
                let j = self
                    .xi_provenance
                    .feature_index(&e.condition.source_feature)
                    .ok_or_else(|| {
                        Error::SchemaMismatch(format!(
                            "entry refers to unknown feature `{}`",
                            e.condition.source_feature
                        ))
                    })?;
                Ok(e.condition.matches(&self.xi_provenance.canonical_cell(j, &row[j])))
            })
            .collect()
    }

    /// Bias plus the weights of active entries, summed left to right in entry
    /// order.
    pub fn predict(&self, row: &[Cell]) -> Result<f64> {
        let active = self.active(row)?;
        let mut total = self.bias;
        for (e, on) in self.entries.iter().zip(active) {
            if on {
                total += e.weight;
            }
        }
        Ok(total)
    }

    pub fn predict_many(&self, rows: &[Vec<Cell>]) -> Result<Vec<f64>> {
        rows.iter().map(|r| self.predict(r)).collect()
    }

    /// Positive iff the prediction strictly exceeds `threshold`.
    pub fn classify(&self, row: &[Cell], threshold: f64) -> Result<Class> {
        if !threshold.is_finite() {
            return Err(Error::InvalidArgument("threshold must be finite".into()));
        }
        Ok(if self.predict(row)? > threshold {
            Class::Positive
        } else {
            Class::Negative
        })
    }

    /// Every weight replaced by its sign; the bias is kept.
    pub fn unit_round(&self) -> ScoreCard {
        let mut card = self.clone();
        for e in &mut card.entries {
            e.weight = if e.weight > 0.0 {
                1.0
            } else if e.weight < 0.0 {
                -1.0
            } else {
                0.0
            };
        }
        card
    }

    /// Rendered (label, value) rows: bias, one per entry, then the sum line.
    pub fn table_rows(&self) -> Vec<(String, String)> {
        let mut rows = vec![("bias".to_string(), fmt_weight(self.bias))];
        rows.extend(
            self.entries
                .iter()
                .map(|e| (e.condition.display.clone(), fmt_weight(e.weight))),
        );
        rows.push((format!("{}:", self.target_name), "= Σ".to_string()));
        rows
    }

    pub fn render(&self, format: Format) -> String {
        match format {
            Format::Json => self.to_json(),
            Format::Markdown => {
                let rows = self.table_rows();
                let last = rows.len() - 1;
                let mut out = format!("| feature | {} |\n|:--|--:|\n", self.target_name);
                for (i, (label, value)) in rows.into_iter().enumerate() {
                    if i == last {
                        out.push_str(&format!("| **{label}** | {value} |\n"));
                    } else {
                        out.push_str(&format!("| {label} | {value} |\n"));
                    }
                }
                out
            }
            Format::Text => {
                let rows = self.table_rows();
                let width = |s: &str| s.chars().count();
                let lw = rows
                    .iter()
                    .map(|r| width(&r.0))
                    .chain([width("feature")])
                    .max()
                    .unwrap_or(0);
                let vw = rows
                    .iter()
                    .map(|r| width(&r.1))
                    .chain([width(&self.target_name)])
                    .max()
                    .unwrap_or(0);
                let line = |l: &str, v: &str| {
                    format!(
                        "{l}{}  {}{v}\n",
                        " ".repeat(lw - width(l)),
                        " ".repeat(vw - width(v))
                    )
                };
                let rule = format!("{}\n", "-".repeat(lw + 2 + vw));
                let last = rows.len() - 1;
                let mut out = line("feature", &self.target_name);
                out.push_str(&rule);
                for (i, (l, v)) in rows.iter().enumerate() {
                    if i == last {
                        out.push_str(&rule);
                    }
                    out.push_str(&line(l, v));
                }
                out
            }
        }
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("score card serializes")
    }

    pub fn from_json(text: &str) -> Result<Self> {
        let card: ScoreCard = serde_json::from_str(text)?;
        if card.version != MODEL_VERSION {
            return Err(Error::SchemaMismatch(format!(
                "unsupported model version {}",
                card.version
            )));
        }
        Ok(card)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::binarize::{BinMatrix, ConditionKind};

    fn card(weights: &[f64]) -> ScoreCard {
        let names: Vec<String> = (0..weights.len()).map(|j| format!("x{j}")).collect();
        let rows = vec![vec![1u8; weights.len()], vec![0u8; weights.len()]];
        let d = BinDataset::from_binary(BinMatrix::from_rows(&rows).unwrap(), names, vec![1.0, 0.0], "y")
            .unwrap();
        let sol = SupportSolution {
            support: (0..weights.len()).collect(),
            beta: weights.to_vec(),
            bias: 1.5,
            objective: 0.0,
        };
        build_scorecard(&sol, &d).unwrap()
    }

    #[test]
    fn unit_rounding() {
        let u = card(&[2.3, -0.7]).unit_round();
        let w: Vec<f64> = u.entries.iter().map(|e| e.weight).collect();
        assert_eq!(w, vec![1.0, -1.0]);
        assert_eq!(u.bias, 1.5);
    }

    #[test]
    fn zero_weights_are_not_entries() {
        let c = card(&[2.0, 0.0, -1.0]);
        assert_eq!(c.entries.len(), 2);
    }

    #[test]
    fn stale_index_is_rejected() {
        let c = card(&[1.0]);
        let d = BinDataset::from_binary(
            BinMatrix::from_rows(&[vec![1], vec![0]]).unwrap(),
            vec!["a".into()],
            vec![0.0, 1.0],
            "y",
        )
        .unwrap();
        let sol = SupportSolution {
            support: vec![4],
            beta: vec![1.0],
            bias: 0.0,
            objective: 0.0,
        };
        assert!(matches!(build_scorecard(&sol, &d), Err(Error::IndexOutOfRange { index: 4, .. })));
        assert_eq!(c.entries[0].condition.kind, ConditionKind::Onehot);
    }

    #[test]
    fn predict_and_classify_binary_rows() {
        let c = card(&[2.0, -0.5]);
        let on = vec![Cell::Cat("1".into()), Cell::Cat("1".into())];
        let off = vec![Cell::Cat("0".into()), Cell::Missing];
        assert_eq!(c.predict(&on).unwrap(), 3.0);
        assert_eq!(c.predict(&off).unwrap(), 1.5);
        assert_eq!(c.classify(&on, 3.0).unwrap(), Class::Negative);
        assert_eq!(c.classify(&on, 2.9).unwrap(), Class::Positive);
        assert!(c.classify(&on, f64::NAN).is_err());
        assert!(matches!(c.predict(&on[..1]), Err(Error::SchemaMismatch(_))));
        assert!(matches!(
            c.predict(&[Cell::Num(1.0), Cell::Missing]),
            Err(Error::SchemaMismatch(_))
        ));
    }

    #[test]
    fn bias_only_card_renders_two_rows() {
        let c = card(&[]);
        assert_eq!(c.table_rows().len(), 2);
        let text = c.render(Format::Text);
        assert!(text.contains("bias"));
        assert!(text.contains("y:"));
        assert!(text.trim_end().ends_with("= Σ"));
    }

    #[test]
    fn json_round_trip_and_version_check() {
        let c = card(&[0.1 + 0.2, -1.0 / 3.0]);
        let back = ScoreCard::from_json(&c.render(Format::Json)).unwrap();
        assert_eq!(back, c);
        let bumped = c.to_json().replacen("\"version\": 1", "\"version\": 2", 1);
        assert!(ScoreCard::from_json(&bumped).is_err());
    }

    #[test]
    fn markdown_table() {
        let md = card(&[1.25]).render(Format::Markdown);
        assert!(md.starts_with("| feature | y |"));
        assert!(md.contains("| x0=1 | 1.25 |"));
        assert!(md.contains("| **y:** | = Σ |"));
    }
}
