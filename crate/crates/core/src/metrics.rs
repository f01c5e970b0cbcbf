//! Evaluation metrics and batch aggregation.

use std::collections::BTreeMap;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::model::{Assignment, Scenario};
use crate::report::RunReport;

/// Jain's fairness index `(sum U)^2 / (n * sum U^2)`.
///
/// Lies in `[1/n, 1]` for nonnegative input; 1 means every user pays the
/// same.
pub fn jain_index(costs: &[f64]) -> Result<f64> {
    if costs.is_empty() {
        return Err(Error::UndefinedJain("no users"));
    }
    let sum: f64 = costs.iter().sum();
    let sq: f64 = costs.iter().map(|c| c * c).sum();
    if sq == 0.0 {
        return Err(Error::UndefinedJain("all costs are zero"));
    }
    Ok(sum * sum / (costs.len() as f64 * sq))
}

/// Fraction of tasks that were offloaded. An empty scenario counts as fully served.
pub fn offloading_ratio(scenario: &Scenario, assignment: &Assignment) -> f64 {
    let total = scenario.total_tasks();
    if total == 0 {
        return 1.0;
    }
    let assigned = scenario.task_ids().filter(|&id| assignment.get(id).is_some()).count();
    assigned as f64 / total as f64
}

/// Aggregates of one algorithm over a batch.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AlgoSummary {
    pub algorithm: String,
    /// Mean over the runs that produced an objective (NaN when none did).
    pub mean_cost: f64,
    /// Population standard deviation over the same runs.
    pub std_cost: f64,
    pub mean_jain: f64,
    pub mean_ratio: f64,
    pub mean_iters: f64,
    /// Runs that contributed to `mean_cost`.
    pub n_costed: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BatchSummary {
    pub n_scenarios: usize,
    pub seeds: Vec<u64>,
    pub algorithms: Vec<AlgoSummary>,
}

fn mean(v: &[f64]) -> f64 {
    if v.is_empty() {
        f64::NAN
    } else {
        v.iter().sum::<f64>() / v.len() as f64
    }
}

fn pop_std(v: &[f64]) -> f64 {
    if v.is_empty() {
        return f64::NAN;
    }
    let m = mean(v);
    (v.iter().map(|x| (x - m) * (x - m)).sum::<f64>() / v.len() as f64).sqrt()
}

/// Aggregates a batch of reports per algorithm.
///
/// Every algorithm in the batch must have been run on the same seed set, one
/// report per seed; reports without a seed count as seed 0.
pub fn summarize(batch: &[RunReport]) -> Result<BatchSummary> {
    if batch.is_empty() {
        return Err(Error::MixedBatch("empty batch".into()));
    }
    let mut groups: BTreeMap<&str, Vec<&RunReport>> = BTreeMap::new();
    let mut order = Vec::new();
    for r in batch {
        let g = groups.entry(r.algorithm.as_str()).or_default();
        if g.is_empty() {
            order.push(r.algorithm.as_str());
        }
        g.push(r);
    }
    let seeds_of = |g: &[&RunReport]| {
        let mut s: Vec<u64> = g.iter().map(|r| r.seed.unwrap_or(0)).collect();
        s.sort_unstable();
        s
    };
    let reference = seeds_of(&groups[order[0]]);
    if reference.windows(2).any(|w| w[0] == w[1]) {
        return Err(Error::MixedBatch(format!("algorithm {} has duplicate seeds", order[0])));
    }
    let mut algorithms = Vec::new();
    for name in &order {
        let g = &groups[name];
        if seeds_of(g) != reference {
            return Err(Error::MixedBatch(format!(
                "algorithm {name} ran on a different seed set than {}",
                order[0]
            )));
        }
        let costs: Vec<f64> = g.iter().filter_map(|r| r.objective).collect();
        let jains: Vec<f64> = g.iter().filter_map(|r| r.jain).collect();
        let ratios: Vec<f64> = g.iter().map(|r| r.offloading_ratio).collect();
        let iters: Vec<f64> = g.iter().map(|r| r.iterations as f64).collect();
        algorithms.push(AlgoSummary {
            algorithm: name.to_string(),
            mean_cost: mean(&costs),
            std_cost: pop_std(&costs),
            mean_jain: mean(&jains),
            mean_ratio: mean(&ratios),
            mean_iters: mean(&iters),
            n_costed: costs.len(),
        });
    }
    Ok(BatchSummary { n_scenarios: reference.len(), seeds: reference, algorithms })
}

pub const CSV_HEADER: &str = "algo,param,mean_cost,std_cost,mean_jain,mean_ratio,mean_iters,n_scenarios,seeds,warning";

/// Compact description of a seed list: `a..b` for a contiguous run,
/// otherwise `;`-separated values.
pub fn format_seeds(seeds: &[u64]) -> String {
    if seeds.is_empty() {
        return String::new();
    }
    let contiguous = seeds.windows(2).all(|w| w[1] == w[0] + 1);
    if contiguous {
        format!("{}..{}", seeds[0], seeds[seeds.len() - 1] + 1)
    } else {
        seeds.iter().map(u64::to_string).collect::<Vec<_>>().join(";")
    }
}

impl AlgoSummary {
    /// One CSV line matching [`CSV_HEADER`], without trailing newline.
    pub fn csv_row(&self, param: f64, n_scenarios: usize, seeds: &[u64], warning: &str) -> String {
        format!(
            "{},{},{},{},{},{},{},{},{},{}",
            self.algorithm,
            param,
            self.mean_cost,
            self.std_cost,
            self.mean_jain,
            self.mean_ratio,
            self.mean_iters,
            n_scenarios,
            format_seeds(seeds),
            warning
        )
    }
}
