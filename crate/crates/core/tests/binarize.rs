//! Discretization invariants on random mixed-type data.

mod common;

use proptest::prelude::*;
use rand::seq::SliceRandom;
use rand::Rng;

use common::rng;
use regscore::binarize::{binarize, mdlp_cuts, tertile_cuts, XiConfig};
use regscore::tabular::{Cell, Dataset, FeatureSchema, UNK};

fn mixed(seed: u64, n: usize) -> Dataset {
    let mut r = rng(seed);
    let schema = vec![
        FeatureSchema::continuous("a"),
        FeatureSchema::continuous("b"),
        FeatureSchema::categorical("c", &["red", "green", "blue"]),
    ];
    let mut rows = Vec::with_capacity(n);
    let mut y = Vec::with_capacity(n);
    for _ in 0..n {
        let a = r.random_range(0.0..10.0f64);
        let b = (r.random_range(0..6) as f64) * 0.5;
        let c = ["red", "green", "blue"][r.random_range(0..3)];
        let miss = r.random_bool(0.05);
        y.push(4.0 * a + if c == "red" { 10.0 } else { 0.0 } + r.random_range(-2.0..2.0));
        rows.push(vec![
            if miss { Cell::Missing } else { Cell::Num(a) },
            Cell::Num(b),
            if r.random_bool(0.05) { Cell::Missing } else { Cell::Cat(c.into()) },
        ]);
    }
    Dataset::new(schema, rows, y, "y").unwrap()
}

#[test]
fn each_present_cell_lands_in_exactly_one_bin() {
    for seed in 0..5 {
        let data = mixed(seed, 300);
        let bin = binarize(&data, &XiConfig::mdlp(20.0)).unwrap();
        for (j, f) in bin.provenance.features.iter().enumerate() {
            let conds = f.conditions();
            for row in &data.rows {
                let cell = bin.provenance.canonical_cell(j, &row[j]);
                let hits = conds.iter().filter(|c| c.matches(&cell)).count();
                let expected = usize::from(!(cell.is_missing() && f.schema.categories.is_empty()));
                assert_eq!(hits, expected, "feature {} cell {:?}", f.schema.name, row[j]);
            }
        }
    }
}

#[test]
fn missing_categorical_maps_to_unk() {
    let data = mixed(9, 200);
    let bin = binarize(&data, &XiConfig::tertile()).unwrap();
    let j = bin.provenance.feature_index("c").unwrap();
    let unk = bin.provenance.features[j]
        .conditions()
        .into_iter()
        .find(|c| c.category.as_deref() == Some(UNK))
        .unwrap();
    for row in &data.rows {
        let cell = bin.provenance.canonical_cell(j, &row[j]);
        assert_eq!(unk.matches(&cell), row[j].is_missing());
    }
}

#[test]
fn matrix_equals_row_encoding() {
    for config in [XiConfig::mdlp(20.0), XiConfig::tertile()] {
        let data = mixed(3, 250);
        let bin = binarize(&data, &config).unwrap();
        for (p, row) in data.rows.iter().enumerate() {
            let enc = bin.provenance.encode_row(row, &bin.conditions).unwrap();
            assert_eq!(enc, bin.matrix.row(p));
        }
        // no survivor is constant or a copy of another
        for a in 0..bin.n_binary() {
            let ones = bin.matrix.column(a).iter().filter(|&&v| v == 1).count();
            assert!(ones > 0 && ones < bin.n_rows());
            for b in 0..a {
                assert_ne!(bin.matrix.column(a), bin.matrix.column(b));
            }
        }
    }
}

#[test]
fn tertiles_of_one_to_seven() {
    let v: Vec<f64> = (1..=7).map(f64::from).collect();
    let cuts = tertile_cuts(&v);
    assert_eq!(cuts.len(), 2);
    assert!((cuts[0] - 3.0).abs() < 1e-12 && (cuts[1] - 5.0).abs() < 1e-12);
    assert!(tertile_cuts(&[2.0; 9]).is_empty());
}

#[test]
fn mdlp_edge_cases() {
    assert_eq!(mdlp_cuts(&[1.0, 2.0, 3.0, 10.0, 11.0, 12.0], &[0, 0, 0, 1, 1, 1]).unwrap(), vec![6.5]);
    assert!(mdlp_cuts(&[1.0, 2.0, 3.0, 4.0], &[1, 1, 1, 1]).unwrap().is_empty());
    assert!(mdlp_cuts(&[5.0; 8], &[0, 1, 0, 1, 0, 1, 0, 1]).unwrap().is_empty());
    assert!(mdlp_cuts(&[1.0], &[0, 1]).is_err());
}

fn class_sample() -> impl Strategy<Value = (Vec<f64>, Vec<usize>)> {
    prop::collection::vec((0u8..30, 0usize..3), 2..120).prop_map(|v| {
        let values = v.iter().map(|&(x, _)| f64::from(x) * 0.25).collect();
        // label correlated with value so cuts are accepted often
        let labels = v.iter().map(|&(x, l)| if l == 0 { usize::from(x >= 15) } else { l - 1 }).collect();
        (values, labels)
    })
}

proptest! {
    #[test]
    fn mdlp_ignores_input_order((values, labels) in class_sample(), seed in any::<u64>()) {
        let cuts = mdlp_cuts(&values, &labels).unwrap();
        let mut idx: Vec<usize> = (0..values.len()).collect();
        idx.shuffle(&mut rng(seed));
        let v2: Vec<f64> = idx.iter().map(|&i| values[i]).collect();
        let l2: Vec<usize> = idx.iter().map(|&i| labels[i]).collect();
        prop_assert_eq!(cuts, mdlp_cuts(&v2, &l2).unwrap());
    }

    #[test]
    fn mdlp_cuts_are_boundary_midpoints((values, labels) in class_sample()) {
        let cuts = mdlp_cuts(&values, &labels).unwrap();
        let mut distinct = values.clone();
        distinct.sort_by(f64::total_cmp);
        distinct.dedup();
        let classes_at = |v: f64| {
            let mut c: Vec<usize> = values.iter().zip(&labels).filter(|(x, _)| **x == v).map(|(_, l)| *l).collect();
            c.sort_unstable();
            c.dedup();
            c
        };
        prop_assert!(cuts.windows(2).all(|w| w[0] < w[1]));
        for cut in cuts {
            let i = distinct.iter().position(|&v| v > cut).unwrap();
            prop_assert!(i > 0);
            let (lo, hi) = (distinct[i - 1], distinct[i]);
            prop_assert_eq!(cut, 0.5 * (lo + hi));
            let (a, b) = (classes_at(lo), classes_at(hi));
            prop_assert!(!(a.len() == 1 && a == b), "cut {} between two groups of one class", cut);
        }
    }

    #[test]
    fn tertiles_split_the_range(values in prop::collection::vec(-100.0f64..100.0, 1..80)) {
        let cuts = tertile_cuts(&values);
        let min = values.iter().copied().fold(f64::INFINITY, f64::min);
        let max = values.iter().copied().fold(f64::NEG_INFINITY, f64::max);
        prop_assert!(cuts.len() <= 2);
        prop_assert!(cuts.windows(2).all(|w| w[0] < w[1]));
        prop_assert!(cuts.iter().all(|&c| c > min && c <= max));
    }
}
