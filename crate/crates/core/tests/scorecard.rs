//! Score-card arithmetic, rendering and serialization.

mod common;

use proptest::prelude::*;
use rand::Rng;

use common::rng;
use regscore::binarize::{FeatureBinning, XiProvenance};
use regscore::pipeline::{fit, FitConfig};
use regscore::ridge::fitted_values;
use regscore::scorecard::{Class, Format, ScoreCard, ScoreEntry, MODEL_VERSION};
use regscore::solvers::SolverConfig;
use regscore::tabular::{Cell, Dataset, FeatureSchema};

struct Term {
    name: &'static str,
    cuts: &'static [f64],
    min: f64,
    max: Option<f64>,
    bin: usize,
    weight: f64,
}

const WORKED: [Term; 5] = [
    Term { name: "reveal_score", cuts: &[1.0, 6.0], min: 0.0, max: Some(12.0), bin: 1, weight: -11.23 },
    Term { name: "vmi", cuts: &[0.73], min: 0.2, max: Some(2.87), bin: 1, weight: 8.14 },
    Term { name: "rvef", cuts: &[49.17], min: 12.0, max: Some(82.0), bin: 1, weight: -5.90 },
    Term { name: "systolic_pa_area", cuts: &[311.46, 672.0], min: 150.0, max: Some(1100.0), bin: 1, weight: -8.52 },
    Term { name: "septal_angle_syst", cuts: &[166.0], min: 120.0, max: None, bin: 1, weight: 10.71 },
];

/// Five-condition mPAP card with bias 40.46.
fn worked_card() -> ScoreCard {
    let features: Vec<FeatureBinning> = WORKED
        .iter()
        .map(|s| FeatureBinning {
            schema: FeatureSchema::continuous(s.name),
            cuts: s.cuts.to_vec(),
            observed_min: Some(s.min),
            observed_max: s.max,
        })
        .collect();
    let entries = WORKED
        .iter()
        .zip(&features)
        .map(|(s, f)| ScoreEntry { condition: f.conditions()[s.bin].clone(), weight: s.weight })
        .collect();
    ScoreCard {
        version: MODEL_VERSION,
        target_name: "mPAP [mmHg]".into(),
        bias: 40.46,
        entries,
        threshold: Some(25.0),
        xi_provenance: XiProvenance { config: None, quantile_convention: String::new(), features },
        scaler: None,
        fit: None,
        tool: None,
        run_config: None,
    }
}

fn row(values: [f64; 5]) -> Vec<Cell> {
    values.iter().map(|&v| Cell::Num(v)).collect()
}

#[test]
fn worked_card_arithmetic() {
    let card = worked_card();
    let displays: Vec<&str> = card.entries.iter().map(|e| e.condition.display.as_str()).collect();
    assert_eq!(
        displays,
        [
            "1.0 ≤ reveal_score < 6.0",
            "0.73 ≤ vmi ≤ 2.87",
            "49.17 ≤ rvef ≤ 82.0",
            "311.46 ≤ systolic_pa_area < 672.0",
            "166.0 ≤ septal_angle_syst",
        ]
    );

    let all = row([3.0, 1.5, 60.0, 400.0, 170.0]);
    let pred = card.predict(&all).unwrap();
    assert!((pred - 33.66).abs() < 1e-9, "{pred}");
    assert_eq!(card.active(&all).unwrap(), vec![true; 5]);
    assert_eq!(card.classify(&all, 25.0).unwrap(), Class::Positive);

    let none = row([0.5, 0.5, 30.0, 800.0, 130.0]);
    assert_eq!(card.predict(&none).unwrap(), 40.46);

    let signs: Vec<f64> = card.unit_round().entries.iter().map(|e| e.weight).collect();
    assert_eq!(signs, [-1.0, 1.0, -1.0, -1.0, 1.0]);

    let text = card.render(Format::Text);
    assert!(text.contains("-11.23") && text.contains("10.71") && text.contains("40.46"));
    assert!(text.contains("mPAP [mmHg]:"));
    assert_eq!(card.table_rows().len(), 7);
    let md = card.render(Format::Markdown);
    assert!(md.contains("| 166.0 ≤ septal_angle_syst | 10.71 |"));
}

#[test]
fn boundary_prediction_is_negative() {
    let mut card = worked_card();
    card.bias = 25.0 + 11.23;
    let only_reveal = row([3.0, 0.5, 30.0, 800.0, 130.0]);
    let p = card.predict(&only_reveal).unwrap();
    assert_eq!(card.classify(&only_reveal, p).unwrap(), Class::Negative);
}

fn random_rows(seed: u64, n: usize) -> Vec<Vec<Cell>> {
    let mut r = rng(seed);
    (0..n)
        .map(|_| {
            row([
                r.random_range(0.0..12.0),
                r.random_range(0.2..2.9),
                r.random_range(12.0..82.0),
                r.random_range(150.0..1100.0),
                r.random_range(120.0..190.0),
            ])
        })
        .collect()
}

#[test]
fn json_reload_scores_identically() {
    let card = worked_card();
    let back = ScoreCard::from_json(&card.to_json()).unwrap();
    assert_eq!(back, card);
    let rows = random_rows(1, 100);
    let a: Vec<u64> = card.predict_many(&rows).unwrap().iter().map(|v| v.to_bits()).collect();
    let b: Vec<u64> = back.predict_many(&rows).unwrap().iter().map(|v| v.to_bits()).collect();
    assert_eq!(a, b);
}

#[test]
fn fitted_card_reproduces_training_fit() {
    let mut r = rng(4);
    let schema = vec![FeatureSchema::continuous("a"), FeatureSchema::categorical("b", &["p", "q", "s"])];
    let mut rows = Vec::new();
    let mut y = Vec::new();
    for _ in 0..150 {
        let a = r.random_range(0.0..10.0f64);
        let b = ["p", "q", "s"][r.random_range(0..3)];
        y.push(if a > 6.0 { 30.0 } else { 15.0 } + if b == "q" { 5.0 } else { 0.0 } + r.random_range(-1.0..1.0));
        rows.push(vec![Cell::Num(a), Cell::Cat(b.into())]);
    }
    let data = Dataset::new(schema, rows, y, "y").unwrap();
    let cfg = FitConfig { solver: SolverConfig { k: 3, ..Default::default() }, ..Default::default() };
    let res = fit(&data, &cfg).unwrap();
    let sol = &res.outcome.solution;
    assert_eq!(res.card.entries.len(), sol.beta.iter().filter(|b| **b != 0.0).count());
    let fitted = fitted_values(&res.bin, &sol.support, &sol.beta, sol.bias);
    assert_eq!(res.card.predict_many(&data.rows).unwrap(), fitted);
}

proptest! {
    #[test]
    fn classify_agrees_with_predict(seed in any::<u64>(), t in 0.0f64..80.0) {
        let card = worked_card();
        for row in random_rows(seed, 10) {
            let positive = card.predict(&row).unwrap() > t;
            prop_assert_eq!(card.classify(&row, t).unwrap() == Class::Positive, positive);
        }
    }

    #[test]
    fn prediction_is_bias_plus_active_weights(seed in any::<u64>()) {
        let card = worked_card();
        for row in random_rows(seed, 10) {
            let active = card.active(&row).unwrap();
            let by_condition: f64 = card
                .entries
                .iter()
                .zip(&active)
                .filter(|(_, on)| **on)
                .map(|(e, _)| e.weight)
                .sum();
            prop_assert!((card.predict(&row).unwrap() - card.bias - by_condition).abs() < 1e-12);
            for (e, on) in card.entries.iter().zip(&active) {
                let j = card.xi_provenance.feature_index(&e.condition.source_feature).unwrap();
                prop_assert_eq!(*on, e.condition.matches(&row[j]));
            }
        }
    }
}
