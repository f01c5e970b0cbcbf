use serde::{Deserialize, Serialize};

use crate::metrics;
use crate::model::{self, Assignment, Scenario};
use crate::relaxation::LpStatus;

/// Outcome of one solver run on one scenario.
///
/// Optional fields are filled only by the solvers they apply to: LP bounds
/// set `bound`/`lp_status`, the matching solver sets `rounds`, `proposals`,
/// `messages` and `stable`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RunReport {
    pub algorithm: String,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub seed: Option<u64>,
    /// Total cost; `None` unless every task was offloaded.
    pub objective: Option<f64>,
    /// Largest weighted average user cost; `None` unless every task was offloaded.
    pub op2_objective: Option<f64>,
    /// Cost of each user's offloaded tasks.
    pub per_user_costs: Vec<f64>,
    pub jain: Option<f64>,
    pub offloading_ratio: f64,
    pub iterations: usize,
    pub unassigned: usize,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub bound: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub lp_status: Option<LpStatus>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub rounds: Option<usize>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub proposals: Option<usize>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub messages: Option<usize>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub stable: Option<bool>,
    #[serde(default, skip_serializing_if = "std::ops::Not::not")]
    pub unstable_possible: bool,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub assignment: Option<Assignment>,
}

impl RunReport {
    /// Report for an integral (possibly partial) assignment.
    pub fn for_assignment(algorithm: &str, scenario: &Scenario, assignment: &Assignment, iterations: usize) -> Self {
        let per_user_costs = model::offloaded_user_costs(scenario, assignment);
        let total = scenario.total_tasks();
        let assigned = assignment.assigned_count();
        let complete = assigned == total;
        Self {
            algorithm: algorithm.to_string(),
            seed: None,
            objective: complete.then(|| model::op1_objective(scenario, assignment).ok()).flatten(),
            op2_objective: complete.then(|| model::op2_objective(scenario, assignment).ok()).flatten(),
            jain: metrics::jain_index(&per_user_costs).ok(),
            per_user_costs,
            offloading_ratio: metrics::offloading_ratio(scenario, assignment),
            iterations,
            unassigned: total - assigned,
            bound: None,
            lp_status: None,
            rounds: None,
            proposals: None,
            messages: None,
            stable: None,
            unstable_possible: false,
            assignment: Some(assignment.clone()),
        }
    }

    pub fn with_seed(mut self, seed: u64) -> Self {
        self.seed = Some(seed);
        self
    }

    /// Drops the assignment payload, keeping only the statistics.
    pub fn without_assignment(mut self) -> Self {
        self.assignment = None;
        self
    }
}
