//! A quick self-check run by `regscore verify`: each solver and kernel is
//! compared against an independent oracle on seeded instances.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::binarize::mdlp_cuts;
use crate::error::Result;
use crate::eval::synth::{synth_generate, SynthSpec};
use crate::personalize::{gate_from_scores, sigmoid, soft_gate_grad};
use crate::ridge::{fitted_values, RidgeConfig, RidgeProblem};
use crate::solvers::{beam_search_with, bnb_solve_with, brute_force_with, BeamConfig, BnbConfig};
use crate::tabular::PRNG_NAME;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct VerifyConfig {
    pub instances: usize,
    pub seed: u64,
}

impl Default for VerifyConfig {
    fn default() -> Self {
        Self { instances: 30, seed: 0 }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CheckResult {
    pub name: String,
    pub passed: bool,
    pub detail: String,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct VerifyReport {
    pub config: VerifyConfig,
    pub prng: String,
    pub checks: Vec<CheckResult>,
}

impl VerifyReport {
    pub fn passed(&self) -> bool {
        self.checks.iter().all(|c| c.passed)
    }
}

fn check(name: &str, failures: usize, total: usize, worst: f64) -> CheckResult {
    CheckResult {
        name: name.to_string(),
        passed: failures == 0,
        detail: format!("{}/{} ok, worst deviation {worst:.3e}", total - failures, total),
    }
}

/// Solver checks on `instances` seeded problems (P=100, D=12, k cycling
/// through 1..=3, noise 0.5), plus fixed-case kernel checks.
pub fn run_suite(config: &VerifyConfig) -> Result<VerifyReport> {
    let ridge = RidgeConfig::default();
    let (mut bnb_fail, mut bnb_worst) = (0, 0.0f64);
    let (mut beam_fail, mut beam_worst) = (0, 0.0f64);
    let (mut kkt_fail, mut kkt_worst) = (0, 0.0f64);
    for i in 0..config.instances {
        let k = 1 + i % 3;
        let spec = SynthSpec::new(100, 12, k, 0.5, config.seed.wrapping_add(i as u64));
        let (data, _) = synth_generate(&spec)?;
        let problem = RidgeProblem::new(&data);
        let exact = brute_force_with(&problem, k, &ridge, u128::MAX)?;
        let bnb = bnb_solve_with(&problem, &BnbConfig::new(k), &ridge, None)?;
        let dev = (bnb.solution.objective - exact.objective).abs();
        bnb_worst = bnb_worst.max(dev);
        if !bnb.certified_optimal || dev > 1e-9 {
            bnb_fail += 1;
        }
        let beam = beam_search_with(&problem, &BeamConfig { k, ..Default::default() }, &ridge)?;
        let slack = exact.objective - beam[0].objective;
        beam_worst = beam_worst.max(slack.max(0.0));
        if slack > 1e-9 {
            beam_fail += 1;
        }

        // Stationarity of the exact ridge solve on the optimal support.
        let fitted = fitted_values(&data, &exact.support, &exact.beta, exact.bias);
        let resid: Vec<f64> = data.target.iter().zip(&fitted).map(|(y, f)| y - f).collect();
        let scale = 1.0 + data.target.iter().map(|y| y.abs()).sum::<f64>();
        let mut worst = resid.iter().sum::<f64>().abs();
        for (&j, &b) in exact.support.iter().zip(&exact.beta) {
            let g: f64 = (0..data.n_rows())
                .filter(|&p| data.matrix.get(p, j) == 1)
                .map(|p| resid[p])
                .sum();
            worst = worst.max((ridge.lambda2 * b - g).abs());
        }
        kkt_worst = kkt_worst.max(worst / scale);
        if worst / scale > 1e-9 {
            kkt_fail += 1;
        }
    }
    let n = config.instances;
    let mut checks = vec![
        check("bnb matches exhaustive enumeration", bnb_fail, n, bnb_worst),
        check("beam never beats the optimum", beam_fail, n, beam_worst),
        check("ridge solves are stationary", kkt_fail, n, kkt_worst),
    ];

    let cuts = mdlp_cuts(&[1.0, 2.0, 3.0, 10.0, 11.0, 12.0], &[0, 0, 0, 1, 1, 1])?;
    checks.push(CheckResult {
        name: "mdlp worked example".into(),
        passed: cuts == [6.5],
        detail: format!("cuts {cuts:?}"),
    });

    let g = gate_from_scores(&[3.0, 1.0, 2.0], 2, 0.1)?;
    let expect = [sigmoid(10.0), sigmoid(-10.0), 0.5];
    let dev = g.soft.iter().zip(expect).map(|(a, b)| (a - b).abs()).fold(0.0, f64::max);
    checks.push(CheckResult {
        name: "top-k gate".into(),
        passed: g.tau_k == 2.0 && g.hard == [1, 0, 1] && dev < 1e-12,
        detail: format!("tau_k {}, hard {:?}", g.tau_k, g.hard),
    });

    let mut rng = ChaCha8Rng::seed_from_u64(config.seed);
    let (mut fd_fail, mut fd_worst) = (0, 0.0f64);
    let h = 1e-4;
    for _ in 0..n.max(1) {
        let scores: Vec<f64> = (0..6).map(|_| rng.random_range(-1.0..1.0)).collect();
        let tau = rng.random_range(0.05..1.0);
        let g = gate_from_scores(&scores, 3, tau)?;
        let grad = soft_gate_grad(&scores, g.tau_k, tau)?;
        for (s, d) in scores.iter().zip(grad) {
            let fd = (sigmoid((s + h - g.tau_k) / tau) - sigmoid((s - h - g.tau_k) / tau)) / (2.0 * h);
            fd_worst = fd_worst.max((fd - d).abs());
        }
        if fd_worst > 1e-5 {
            fd_fail += 1;
        }
    }
    checks.push(check("soft gate gradient vs finite differences", fd_fail, n.max(1), fd_worst));

    Ok(VerifyReport {
        config: *config,
        prng: PRNG_NAME.to_string(),
        checks,
    })
}
