//! Per-stage timing of the planning cycle.

use std::fmt::Write as _;
use std::path::Path;

use crate::scenario::Scenario;
use crate::sim::{run, Pipeline, Timings};

#[derive(Debug, Clone, PartialEq)]
pub struct StageRow {
    pub name: &'static str,
    pub mean_ms: f64,
    pub std_ms: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct BenchTable {
    pub rows: Vec<StageRow>,
    pub trials: usize,
    pub cycles: usize,
}

impl BenchTable {
    pub fn row(&self, name: &str) -> Option<&StageRow> {
        self.rows.iter().find(|r| r.name == name)
    }

    pub fn to_csv(&self) -> String {
        let mut s = String::from("stage,mean_ms,std_ms\n");
        for r in &self.rows {
            let _ = writeln!(s, "{},{:.6},{:.6}", r.name, r.mean_ms, r.std_ms);
        }
        s
    }

    pub fn write_csv(&self, path: &Path) -> std::io::Result<()> {
        std::fs::write(path, self.to_csv())
    }
}

/// Runs the scenario `trials` times with seeds `seed, seed + 1, …` after one
/// untimed warm-up run. Each trial contributes its per-cycle mean; rows report
/// the mean and population standard deviation of those across trials.
pub fn bench(scenario: &Scenario, pipeline: &Pipeline, trials: usize) -> BenchTable {
    let trials = trials.max(1);
    std::hint::black_box(run(scenario, pipeline));
    let mut per_trial: Vec<[f64; 6]> = Vec::with_capacity(trials);
    let mut cycles = 0;
    for i in 0..trials {
        let s = scenario
            .clone()
            .with_seed(scenario.seed.wrapping_add(i as u64));
        let result = run(&s, pipeline);
        let n = result.cycles.len().max(1) as f64;
        cycles += result.cycles.len();
        let mut sums = [0.0; 6];
        for c in &result.cycles {
            for (acc, d) in sums.iter_mut().zip(c.timings.as_array()) {
                *acc += d.as_secs_f64() * 1e3;
            }
        }
        per_trial.push(sums.map(|x| x / n));
    }
    let rows = Timings::STAGES
        .iter()
        .enumerate()
        .map(|(i, name)| {
            let xs: Vec<f64> = per_trial.iter().map(|t| t[i]).collect();
            let mean = xs.iter().sum::<f64>() / xs.len() as f64;
            let var = xs.iter().map(|x| (x - mean).powi(2)).sum::<f64>() / xs.len() as f64;
            StageRow {
                name,
                mean_ms: mean,
                std_ms: var.sqrt(),
            }
        })
        .collect();
    BenchTable {
        rows,
        trials,
        cycles,
    }
}
