#![allow(dead_code)]

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use regscore::binarize::{BinDataset, BinMatrix};
use regscore::eval::{synth_generate, SynthSpec};

pub fn rng(seed: u64) -> ChaCha8Rng {
    ChaCha8Rng::seed_from_u64(seed)
}

pub fn bin_data(rows: &[Vec<u8>], y: &[f64]) -> BinDataset {
    let names = (0..rows[0].len()).map(|j| format!("x{j}")).collect();
    BinDataset::from_binary(BinMatrix::from_rows(rows).unwrap(), names, y.to_vec(), "y").unwrap()
}

/// Random 0/1 matrix with a noisy linear target; every column has both
/// values so no column is constant.
pub fn random_data(rng: &mut ChaCha8Rng, p: usize, d: usize) -> BinDataset {
    let mut rows: Vec<Vec<u8>> = (0..p)
        .map(|_| (0..d).map(|_| u8::from(rng.random_bool(0.5))).collect())
        .collect();
    for j in 0..d {
        rows[0][j] = 0;
        rows[1][j] = 1;
    }
    let w: Vec<f64> = (0..d).map(|_| rng.random_range(-3.0..3.0)).collect();
    let y: Vec<f64> = rows
        .iter()
        .map(|r| 1.0 + r.iter().zip(&w).map(|(&x, w)| f64::from(x) * w).sum::<f64>() + rng.random_range(-1.0..1.0))
        .collect();
    bin_data(&rows, &y)
}

pub fn planted(p: usize, d: usize, k: usize, sigma: f64, seed: u64) -> BinDataset {
    synth_generate(&SynthSpec::new(p, d, k, sigma, seed)).unwrap().0
}

/// Every support of size `1..=k` over `d` columns.
pub fn supports_up_to(d: usize, k: usize) -> Vec<Vec<usize>> {
    let mut out = Vec::new();
    for mask in 1u32..(1 << d) {
        if mask.count_ones() as usize <= k {
            out.push((0..d).filter(|&j| mask >> j & 1 == 1).collect());
        }
    }
    out
}
