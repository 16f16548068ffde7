//! Personalized linear prediction and top-k feature gating.
//!
//! These are the numeric kernels a training loop would call; producing the
//! embeddings and learning the head or gate weights happens elsewhere.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// `(N+1) x E` embedding matrix; row 0 is the CLS token.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "Vec<Vec<f64>>", into = "Vec<Vec<f64>>")]
pub struct EmbeddingMatrix {
    rows: Vec<Vec<f64>>,
}

impl EmbeddingMatrix {
    pub fn new(rows: Vec<Vec<f64>>) -> Result<Self> {
        let width = rows.first().map(Vec::len).ok_or(Error::EmptyDataset)?;
        if width == 0 {
            return Err(Error::InvalidArgument("embedding dimension must be positive".into()));
        }
        for r in &rows {
            if r.len() != width {
                return Err(Error::DimensionMismatch {
                    expected: width,
                    got: r.len(),
                });
            }
            if r.iter().any(|v| !v.is_finite()) {
                return Err(Error::InvalidArgument("embeddings must be finite".into()));
            }
        }
        Ok(Self { rows })
    }

    pub fn dim(&self) -> usize {
        self.rows[0].len()
    }

    pub fn cls(&self) -> &[f64] {
        &self.rows[0]
    }

    /// Rows 1.., one per feature.
    pub fn feature_rows(&self) -> &[Vec<f64>] {
        &self.rows[1..]
    }

    pub fn n_features(&self) -> usize {
        self.rows.len() - 1
    }
}

impl TryFrom<Vec<Vec<f64>>> for EmbeddingMatrix {
    type Error = Error;

    fn try_from(rows: Vec<Vec<f64>>) -> Result<Self> {
        Self::new(rows)
    }
}

impl From<EmbeddingMatrix> for Vec<Vec<f64>> {
    fn from(m: EmbeddingMatrix) -> Self {
        m.rows
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PersonalWeights {
    pub bias: f64,
    pub weights: Vec<f64>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum GateMode {
    Soft,
    Hard,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GateResult {
    pub scores: Vec<f64>,
    pub tau_k: f64,
    pub soft: Vec<f64>,
    pub hard: Vec<u8>,
    pub k: usize,
    pub tau: f64,
}

impl GateResult {
    pub fn mask(&self, mode: GateMode) -> Vec<f64> {
        match mode {
            GateMode::Soft => self.soft.clone(),
            GateMode::Hard => self.hard.iter().map(|&h| f64::from(h)).collect(),
        }
    }
}

fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

fn check_len(expected: usize, got: usize) -> Result<()> {
    if expected == got {
        Ok(())
    } else {
        Err(Error::DimensionMismatch { expected, got })
    }
}

/// Logistic function, written to avoid overflow for large `|z|`.
pub fn sigmoid(z: f64) -> f64 {
    if z >= 0.0 {
        1.0 / (1.0 + (-z).exp())
    } else {
        let e = z.exp();
        e / (1.0 + e)
    }
}

/// `head_matrix · cls + head_bias`, split into bias and per-feature weights.
pub fn plr_weights(cls: &[f64], head_matrix: &[Vec<f64>], head_bias: &[f64]) -> Result<PersonalWeights> {
    if head_matrix.is_empty() {
        return Err(Error::InvalidArgument("head must have at least the bias row".into()));
    }
    check_len(head_matrix.len(), head_bias.len())?;
    for row in head_matrix {
        check_len(cls.len(), row.len())?;
    }
    let mut out = head_matrix
        .iter()
        .zip(head_bias)
        .map(|(row, b)| dot(row, cls) + b);
    let bias = out.next().expect("non-empty head");
    Ok(PersonalWeights {
        bias,
        weights: out.collect(),
    })
}

pub fn plr_predict(x: &[f64], pw: &PersonalWeights) -> Result<f64> {
    check_len(pw.weights.len(), x.len())?;
    Ok(pw.bias + dot(x, &pw.weights))
}

/// One score per feature row: `W_g` against the row averaged over the
/// embedding positions.
pub fn gate_scores(embeddings: &EmbeddingMatrix, gate_weights: &[f64]) -> Result<Vec<f64>> {
    let e = embeddings.dim();
    check_len(e, gate_weights.len())?;
    Ok(embeddings
        .feature_rows()
        .iter()
        .map(|row| dot(row, gate_weights) / e as f64)
        .collect())
}

/// Top-k gate on precomputed scores. Ties at the k-th score all pass the
/// hard gate.
pub fn gate_from_scores(scores: &[f64], k: usize, tau: f64) -> Result<GateResult> {
    if k == 0 {
        return Err(Error::InvalidArgument("gate k must be at least 1".into()));
    }
    if k > scores.len() {
        return Err(Error::KTooLarge {
            k,
            dim: scores.len(),
        });
    }
    if !(tau > 0.0 && tau.is_finite()) {
        return Err(Error::InvalidArgument(format!("temperature must be positive, got {tau}")));
    }
    if scores.iter().any(|s| !s.is_finite()) {
        return Err(Error::InvalidArgument("gate scores must be finite".into()));
    }
    let mut sorted = scores.to_vec();
    sorted.sort_by(|a, b| b.total_cmp(a));
    let tau_k = sorted[k - 1];
    Ok(GateResult {
        scores: scores.to_vec(),
        tau_k,
        soft: scores.iter().map(|&s| sigmoid((s - tau_k) / tau)).collect(),
        hard: scores.iter().map(|&s| u8::from(s >= tau_k)).collect(),
        k,
        tau,
    })
}

pub fn gate(embeddings: &EmbeddingMatrix, gate_weights: &[f64], k: usize, tau: f64) -> Result<GateResult> {
    gate_from_scores(&gate_scores(embeddings, gate_weights)?, k, tau)
}

/// Diagonal of `dK_s/dS` with `tau_k` held fixed.
pub fn soft_gate_grad(scores: &[f64], tau_k: f64, tau: f64) -> Result<Vec<f64>> {
    if !(tau > 0.0 && tau.is_finite()) {
        return Err(Error::InvalidArgument(format!("temperature must be positive, got {tau}")));
    }
    Ok(scores
        .iter()
        .map(|&s| {
            let g = sigmoid((s - tau_k) / tau);
            g * (1.0 - g) / tau
        })
        .collect())
}

/// `bias + Σ_d K_d x̂_d β_d` with the soft or hard mask.
pub fn prs_predict(x_hat: &[f64], pw: &PersonalWeights, gate: &GateResult, mode: GateMode) -> Result<f64> {
    check_len(pw.weights.len(), x_hat.len())?;
    check_len(gate.scores.len(), x_hat.len())?;
    let mask = gate.mask(mode);
    let mut total = pw.bias;
    for ((m, x), b) in mask.iter().zip(x_hat).zip(&pw.weights) {
        total += m * x * b;
    }
    Ok(total)
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_abs_diff_eq;

    #[test]
    fn plr_examples() {
        let head = vec![vec![0.0, 0.0]; 3];
        let pw = plr_weights(&[0.3, -2.0], &head, &[1.0, 2.0, 3.0]).unwrap();
        assert_eq!(pw, PersonalWeights { bias: 1.0, weights: vec![2.0, 3.0] });

        let head = vec![vec![1.0, 2.0], vec![3.0, 4.0], vec![5.0, 6.0]];
        let pw = plr_weights(&[0.0, 0.0], &head, &[7.0, 8.0, 9.0]).unwrap();
        assert_eq!(pw.bias, 7.0);
        assert_eq!(pw.weights, vec![8.0, 9.0]);
        let pw = plr_weights(&[1.0, -1.0], &head, &[0.5, 0.0, 0.0]).unwrap();
        assert_eq!((pw.bias, pw.weights), (-0.5, vec![-1.0, -1.0]));

        assert!(plr_weights(&[1.0], &head, &[0.0; 3]).is_err());
        assert!(plr_weights(&[1.0, 1.0], &head, &[0.0; 2]).is_err());

        let pw = PersonalWeights { bias: 1.0, weights: vec![2.0, -1.0] };
        assert_eq!(plr_predict(&[3.0, 4.0], &pw).unwrap(), 3.0);
        assert_eq!(plr_predict(&[0.0, 0.0], &pw).unwrap(), 1.0);
        assert!(plr_predict(&[1.0], &pw).is_err());
    }

    #[test]
    fn top2_of_three() {
        let g = gate_from_scores(&[3.0, 1.0, 2.0], 2, 0.1).unwrap();
        assert_eq!(g.tau_k, 2.0);
        assert_eq!(g.hard, vec![1, 0, 1]);
        assert_abs_diff_eq!(g.soft[0], 0.999_954_602_131_297_6, epsilon = 1e-12);
        assert_abs_diff_eq!(g.soft[1], 4.539_786_870_243_442e-5, epsilon = 1e-12);
        assert_eq!(g.soft[2], 0.5);

        let all = gate_from_scores(&[3.0, 1.0, 2.0], 3, 0.1).unwrap();
        assert_eq!(all.hard, vec![1, 1, 1]);
        assert!(gate_from_scores(&[1.0], 0, 0.1).is_err());
        assert!(gate_from_scores(&[1.0], 2, 0.1).is_err());
        assert!(gate_from_scores(&[1.0], 1, 0.0).is_err());
    }

    #[test]
    fn ties_pass_together() {
        let g = gate_from_scores(&[1.0, 1.0, 0.0], 1, 1.0).unwrap();
        assert_eq!(g.hard, vec![1, 1, 0]);
    }

    #[test]
    fn grad_at_threshold() {
        let g = soft_gate_grad(&[2.0, 100.0], 2.0, 0.1).unwrap();
        assert_abs_diff_eq!(g[0], 2.5, epsilon = 1e-12);
        assert!(g[1] < 1e-300);
    }

    #[test]
    fn embedding_scores_average_over_positions() {
        let f = EmbeddingMatrix::new(vec![vec![9.0, 9.0], vec![1.0, 3.0], vec![2.0, 0.0]]).unwrap();
        assert_eq!(f.n_features(), 2);
        let s = gate_scores(&f, &[1.0, 1.0]).unwrap();
        assert_eq!(s, vec![2.0, 1.0]);
        assert!(EmbeddingMatrix::new(vec![vec![1.0], vec![1.0, 2.0]]).is_err());
        assert!(EmbeddingMatrix::new(vec![vec![f64::NAN]]).is_err());
    }

    #[test]
    fn prs_examples() {
        let g = GateResult {
            scores: vec![3.0, 1.0, 2.0],
            tau_k: 2.0,
            soft: vec![0.0; 3],
            hard: vec![1, 0, 1],
            k: 2,
            tau: 0.1,
        };
        let pw = PersonalWeights { bias: 0.0, weights: vec![2.0, 5.0, -1.0] };
        assert_eq!(prs_predict(&[1.0, 1.0, 1.0], &pw, &g, GateMode::Hard).unwrap(), 1.0);

        let soft = gate_from_scores(&[3.0, 1.0, 2.0], 2, 0.1).unwrap();
        let pw = PersonalWeights { bias: 1.0, weights: vec![4.0, 10.0, 6.0] };
        let expect = 1.0 + soft.soft[0] * 4.0 + soft.soft[1] * 10.0 + 0.5 * 6.0;
        assert_eq!(prs_predict(&[1.0; 3], &pw, &soft, GateMode::Soft).unwrap(), expect);
        assert_abs_diff_eq!(expect, 1.0 + 0.999_954_6 * 4.0 + 4.54e-5 * 10.0 + 3.0, epsilon = 1e-5);
    }
}
