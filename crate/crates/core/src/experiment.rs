//! Seeded parameter sweeps producing summary CSV.
//!
//! A sweep varies one generator parameter over a grid. At every grid value it
//! generates one scenario per seed, runs every requested algorithm on it and
//! summarizes per algorithm. Seeds run in parallel; results are collected in
//! seed order, so output is identical for identical input.

use std::fmt;
use std::str::FromStr;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::fairness::{fga_with, FgaConfig};
use crate::greedy::{cga, mga};
use crate::matching::{adma_with, AdmaConfig};
use crate::metrics::{summarize, AlgoSummary, CSV_HEADER};
use crate::model::Scenario;
use crate::oracle::{oracle_report, OracleBudget};
use crate::relaxation::{elr, flr};
use crate::report::RunReport;
use crate::scenario::{generate, GenParams, Interval};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Algorithm {
    Cga,
    Mga,
    Fga,
    Adma,
    Elr,
    Flr,
    Oracle,
}

impl Algorithm {
    pub const ALL: [Algorithm; 7] = [
        Algorithm::Cga,
        Algorithm::Mga,
        Algorithm::Fga,
        Algorithm::Adma,
        Algorithm::Elr,
        Algorithm::Flr,
        Algorithm::Oracle,
    ];

    pub fn name(self) -> &'static str {
        match self {
            Algorithm::Cga => "cga",
            Algorithm::Mga => "mga",
            Algorithm::Fga => "fga",
            Algorithm::Adma => "adma",
            Algorithm::Elr => "elr",
            Algorithm::Flr => "flr",
            Algorithm::Oracle => "oracle",
        }
    }
}

impl fmt::Display for Algorithm {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for Algorithm {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        Self::ALL
            .into_iter()
            .find(|a| a.name() == s)
            .ok_or_else(|| Error::InvalidParameter(format!("unknown algorithm `{s}`")))
    }
}

/// Per-run knobs shared by all algorithms.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct RunOptions {
    pub mga_epsilon: f64,
    pub mga_zeta: f64,
    /// Overrides the FGA constant `Y`.
    pub fga_y: Option<f64>,
    pub oracle_budget: OracleBudget,
}

impl Default for RunOptions {
    fn default() -> Self {
        Self { mga_epsilon: 1.5, mga_zeta: 1.0, fga_y: None, oracle_budget: OracleBudget::default() }
    }
}

/// Runs one algorithm. The seed drives FGA tie-breaks and ADMA delivery
/// order and is recorded in the report.
pub fn run_algorithm(algo: Algorithm, scenario: &Scenario, seed: u64, opts: &RunOptions) -> Result<RunReport> {
    let report = match algo {
        Algorithm::Cga => cga(scenario).1,
        Algorithm::Mga => mga(scenario, opts.mga_epsilon, opts.mga_zeta)?.1,
        Algorithm::Fga => fga_with(scenario, &FgaConfig { seed, y: opts.fga_y })?.1,
        Algorithm::Adma => adma_with(scenario, &AdmaConfig { seed, ..Default::default() }).report,
        Algorithm::Elr => elr(scenario)?,
        Algorithm::Flr => flr(scenario)?,
        Algorithm::Oracle => oracle_report(scenario, opts.oracle_budget, false)?,
    };
    Ok(report.with_seed(seed))
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum SweptParam {
    /// Center of the task demand interval.
    MeanR,
    /// Exact number of tasks per user.
    TasksPerUser,
    NUsers,
    MgaEpsilon,
}

fn default_half_width() -> f64 {
    1.0
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SweepSpec {
    pub algorithms: Vec<Algorithm>,
    pub param: SweptParam,
    pub values: Vec<f64>,
    /// Scenarios per grid value.
    pub seeds: usize,
    #[serde(default)]
    pub first_seed: u64,
    pub base: GenParams,
    /// Half-width of the demand interval when sweeping its center.
    #[serde(default = "default_half_width")]
    pub r_half_width: f64,
    #[serde(default)]
    pub options: RunOptions,
}

impl SweepSpec {
    pub fn validate(&self) -> Result<()> {
        if self.algorithms.is_empty() {
            return Err(Error::InvalidParameter("sweep lists no algorithms".into()));
        }
        if self.values.is_empty() {
            return Err(Error::InvalidParameter("sweep grid is empty".into()));
        }
        if self.seeds == 0 {
            return Err(Error::InvalidParameter("sweep needs at least one seed".into()));
        }
        if let Some(v) = self.values.iter().find(|v| !v.is_finite()) {
            return Err(Error::InvalidParameter(format!("grid value {v} is not finite")));
        }
        self.base.validate()
    }

    pub fn seed_list(&self) -> Vec<u64> {
        (self.first_seed..self.first_seed + self.seeds as u64).collect()
    }

    /// Generator parameters and run options at grid value `v`.
    pub fn at(&self, v: f64) -> Result<(GenParams, RunOptions)> {
        let mut p = self.base.clone();
        let mut o = self.options;
        let count = |v: f64| {
            if v >= 1.0 && v.fract() == 0.0 {
                Ok(v as usize)
            } else {
                Err(Error::InvalidParameter(format!("grid value {v} must be a positive integer")))
            }
        };
        match self.param {
            SweptParam::MeanR => p.r = Interval::around(v, self.r_half_width),
            SweptParam::TasksPerUser => {
                let k = count(v)?;
                p.tasks_per_user = (k, k);
            }
            SweptParam::NUsers => p.n_users = count(v)?,
            SweptParam::MgaEpsilon => o.mga_epsilon = v,
        }
        p.validate()?;
        Ok((p, o))
    }
}

/// Summary of one algorithm at one grid value.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SweepRow {
    pub algorithm: Algorithm,
    pub value: f64,
    pub summary: Option<AlgoSummary>,
    pub n_scenarios: usize,
    pub seeds: Vec<u64>,
    pub warning: String,
}

impl SweepRow {
    pub fn csv_line(&self) -> String {
        match &self.summary {
            Some(s) => s.csv_row(self.value, self.n_scenarios, &self.seeds, &self.warning),
            None => AlgoSummary {
                algorithm: self.algorithm.name().into(),
                mean_cost: f64::NAN,
                std_cost: f64::NAN,
                mean_jain: f64::NAN,
                mean_ratio: f64::NAN,
                mean_iters: f64::NAN,
                n_costed: 0,
            }
            .csv_row(self.value, self.n_scenarios, &self.seeds, &self.warning),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SweepResult {
    pub rows: Vec<SweepRow>,
}

impl SweepResult {
    pub fn to_csv(&self) -> String {
        let mut out = String::from(CSV_HEADER);
        out.push('\n');
        for row in &self.rows {
            out.push_str(&row.csv_line());
            out.push('\n');
        }
        out
    }

    pub fn row(&self, algo: Algorithm, value: f64) -> Option<&SweepRow> {
        self.rows.iter().find(|r| r.algorithm == algo && r.value == value)
    }

    /// Mean cost per grid value for one algorithm, in grid order.
    pub fn series(&self, algo: Algorithm, pick: impl Fn(&AlgoSummary) -> f64) -> Vec<(f64, f64)> {
        self.rows
            .iter()
            .filter(|r| r.algorithm == algo)
            .map(|r| (r.value, r.summary.as_ref().map_or(f64::NAN, &pick)))
            .collect()
    }
}

/// Runs every algorithm on every seed at every grid value.
///
/// An oracle run that exceeds its budget skips the whole grid point for the
/// oracle and leaves a warning instead of numbers.
pub fn run_sweep(spec: &SweepSpec) -> Result<SweepResult> {
    spec.validate()?;
    let seeds = spec.seed_list();
    let mut rows = Vec::new();
    for &v in &spec.values {
        let (params, opts) = spec.at(v)?;
        let per_seed: Vec<Result<Vec<Result<RunReport>>>> = seeds
            .par_iter()
            .map(|&seed| {
                let s = generate(&params, seed)?;
                Ok(spec
                    .algorithms
                    .iter()
                    .map(|&a| run_algorithm(a, &s, seed, &opts).map(RunReport::without_assignment))
                    .collect())
            })
            .collect();
        let mut buckets: Vec<(Vec<RunReport>, usize)> = vec![(Vec::new(), 0); spec.algorithms.len()];
        for runs in per_seed {
            for (k, run) in runs?.into_iter().enumerate() {
                match run {
                    Ok(r) => buckets[k].0.push(r),
                    Err(Error::BudgetExceeded { .. }) => buckets[k].1 += 1,
                    Err(e) => return Err(e),
                }
            }
        }
        for (&algo, (reports, skipped)) in spec.algorithms.iter().zip(buckets) {
            let row = if skipped > 0 {
                SweepRow {
                    algorithm: algo,
                    value: v,
                    summary: None,
                    n_scenarios: seeds.len(),
                    seeds: seeds.clone(),
                    warning: format!("skipped: search space over budget on {skipped} of {} seeds", seeds.len()),
                }
            } else {
                let batch = summarize(&reports)?;
                let summary = batch.algorithms.into_iter().next().expect("one algorithm");
                let warning = if summary.n_costed < batch.n_scenarios {
                    format!("{} of {} runs without a full assignment", batch.n_scenarios - summary.n_costed, batch.n_scenarios)
                } else {
                    String::new()
                };
                SweepRow { algorithm: algo, value: v, summary: Some(summary), n_scenarios: batch.n_scenarios, seeds: batch.seeds, warning }
            };
            rows.push(row);
        }
    }
    let order = |a: Algorithm| spec.algorithms.iter().position(|&b| b == a).unwrap_or(usize::MAX);
    let grid = |v: f64| spec.values.iter().position(|&w| w == v).unwrap_or(usize::MAX);
    rows.sort_by_key(|r| (order(r.algorithm), grid(r.value)));
    Ok(SweepResult { rows })
}

#[cfg(test)]
mod tests {
    use super::*;

    fn spec(algorithms: Vec<Algorithm>, values: Vec<f64>, seeds: usize) -> SweepSpec {
        SweepSpec {
            algorithms,
            param: SweptParam::MeanR,
            values,
            seeds,
            first_seed: 0,
            base: GenParams::small_system(4.0),
            r_half_width: 1.0,
            options: RunOptions::default(),
        }
    }

    #[test]
    fn single_point_single_row() {
        let out = run_sweep(&spec(vec![Algorithm::Cga], vec![2.0], 1)).unwrap();
        assert_eq!(out.rows.len(), 1);
        let csv = out.to_csv();
        assert_eq!(csv.lines().count(), 2);
        assert!(csv.lines().nth(1).unwrap().starts_with("cga,2,"));
    }

    #[test]
    fn csv_is_deterministic() {
        let s = spec(vec![Algorithm::Cga, Algorithm::Fga, Algorithm::Adma, Algorithm::Elr], vec![2.0, 6.0], 8);
        assert_eq!(run_sweep(&s).unwrap().to_csv(), run_sweep(&s).unwrap().to_csv());
    }

    #[test]
    fn rows_follow_algorithm_then_grid_order() {
        let out = run_sweep(&spec(vec![Algorithm::Fga, Algorithm::Cga], vec![3.0, 2.0], 2)).unwrap();
        let keys: Vec<(Algorithm, f64)> = out.rows.iter().map(|r| (r.algorithm, r.value)).collect();
        assert_eq!(
            keys,
            vec![(Algorithm::Fga, 3.0), (Algorithm::Fga, 2.0), (Algorithm::Cga, 3.0), (Algorithm::Cga, 2.0)]
        );
    }

    #[test]
    fn oracle_over_budget_is_skipped_with_warning() {
        let out = run_sweep(&spec(vec![Algorithm::Cga, Algorithm::Oracle], vec![2.0], 2)).unwrap();
        let row = out.row(Algorithm::Oracle, 2.0).unwrap();
        assert!(row.summary.is_none());
        assert!(row.warning.contains("budget"));
        assert!(row.csv_line().contains("NaN"));
    }

    #[test]
    fn integer_grids_are_checked() {
        let mut s = spec(vec![Algorithm::Cga], vec![2.5], 1);
        s.param = SweptParam::NUsers;
        assert!(run_sweep(&s).is_err());
        s.values = vec![];
        assert!(run_sweep(&s).is_err());
    }

    #[test]
    fn algorithm_names_round_trip() {
        for a in Algorithm::ALL {
            assert_eq!(a.name().parse::<Algorithm>().unwrap(), a);
        }
        assert!("nope".parse::<Algorithm>().is_err());
    }

    #[test]
    fn spec_json_defaults() {
        let base = serde_json::to_value(GenParams::small_system(4.0)).unwrap();
        let v = serde_json::json!({"algorithms": ["cga"], "param": "mean_r", "values": [2.0], "seeds": 3, "base": base});
        let s: SweepSpec = serde_json::from_value(v).unwrap();
        assert_eq!(s.options, RunOptions::default());
        assert_eq!(s.seed_list(), vec![0, 1, 2]);
    }
}
