//! Exact solvers by exhaustive search, for small instances.
//!
//! Tasks are visited in id order and paths in `(ap, ecs)` order. A branch is
//! cut when it runs out of resources or when even the cheapest completion
//! cannot beat the incumbent. Only strictly better solutions replace the
//! incumbent, so among equal optima the first one in that order wins.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::model::{self, fits, Assignment, Path, Scenario, TaskId};
use crate::report::RunReport;

/// Cap on the size of the search space `(|B|·|C|)^(number of tasks)`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct OracleBudget {
    pub max_paths: u64,
}

impl OracleBudget {
    pub fn new(max_paths: u64) -> Result<Self> {
        if max_paths == 0 {
            return Err(Error::InvalidParameter("oracle budget must be positive".into()));
        }
        Ok(Self { max_paths })
    }

    /// `(|B|·|C|)^(number of tasks)` as a float, since it overflows quickly.
    pub fn required(scenario: &Scenario) -> f64 {
        ((scenario.n_aps() * scenario.n_ecss()) as f64).powi(scenario.total_tasks() as i32)
    }

    pub fn check(&self, scenario: &Scenario) -> Result<()> {
        let required = Self::required(scenario);
        if required > self.max_paths as f64 {
            return Err(Error::BudgetExceeded { required, budget: self.max_paths });
        }
        Ok(())
    }
}

impl Default for OracleBudget {
    fn default() -> Self {
        Self { max_paths: 10_000_000 }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "status", rename_all = "snake_case")]
pub enum OracleOutcome {
    Optimal { assignment: Assignment, value: f64 },
    Infeasible,
}

impl OracleOutcome {
    pub fn value(&self) -> Option<f64> {
        match self {
            OracleOutcome::Optimal { value, .. } => Some(*value),
            OracleOutcome::Infeasible => None,
        }
    }

    pub fn assignment(&self) -> Option<&Assignment> {
        match self {
            OracleOutcome::Optimal { assignment, .. } => Some(assignment),
            OracleOutcome::Infeasible => None,
        }
    }
}

#[derive(Clone, Copy, PartialEq)]
enum Goal {
    Total,
    MinMax,
}

struct Search<'a> {
    scenario: &'a Scenario,
    goal: Goal,
    ids: Vec<TaskId>,
    /// Finite-cost paths per task, in `(ap, ecs)` order.
    options: Vec<Vec<(Path, f64)>>,
    /// Sum of cheapest path costs over the tasks from position `k` on, per user.
    rest_by_user: Vec<Vec<f64>>,
    q: Vec<u32>,
    r: Vec<f64>,
    user_cost: Vec<f64>,
    current: Vec<Option<Path>>,
    best: Option<(f64, Vec<Option<Path>>)>,
    nodes: u64,
}

impl Search<'_> {
    fn objective(&self, k: usize) -> f64 {
        let users = self.scenario.users();
        match self.goal {
            Goal::Total => self.user_cost.iter().sum::<f64>() + self.rest_by_user[k].iter().sum::<f64>(),
            Goal::MinMax => users
                .iter()
                .enumerate()
                .map(|(i, u)| u.eta * (self.user_cost[i] + self.rest_by_user[k][i]) / u.tasks.len() as f64)
                .fold(f64::NEG_INFINITY, f64::max),
        }
    }

    fn descend(&mut self, k: usize) {
        self.nodes += 1;
        if let Some((best, _)) = &self.best {
            if self.objective(k) >= *best {
                return;
            }
        }
        if k == self.ids.len() {
            let v = self.objective(k);
            self.best = Some((v, self.current.clone()));
            return;
        }
        let id = self.ids[k];
        let demand = self.scenario.users()[id.user].tasks[id.task].r;
        for o in 0..self.options[k].len() {
            let (path, cost) = self.options[k][o];
            if self.q[path.ap] == 0 || !fits(demand, self.r[path.ecs]) {
                continue;
            }
            self.q[path.ap] -= 1;
            self.r[path.ecs] -= demand;
            self.user_cost[id.user] += cost;
            self.current[k] = Some(path);
            self.descend(k + 1);
            self.current[k] = None;
            self.user_cost[id.user] -= cost;
            self.r[path.ecs] += demand;
            self.q[path.ap] += 1;
        }
    }
}

fn solve(scenario: &Scenario, budget: OracleBudget, goal: Goal) -> Result<(OracleOutcome, u64)> {
    budget.check(scenario)?;
    let ids: Vec<TaskId> = scenario.task_ids().collect();
    let options: Vec<Vec<(Path, f64)>> = ids
        .iter()
        .map(|&id| {
            let mut v = Vec::new();
            for m in 0..scenario.n_aps() {
                for n in 0..scenario.n_ecss() {
                    let c = scenario.cost_unchecked(id, m, n);
                    if c.is_finite() {
                        v.push((Path::new(m, n), c));
                    }
                }
            }
            v
        })
        .collect();
    let cheapest: Vec<f64> = options.iter().map(|o| o.iter().map(|p| p.1).fold(f64::INFINITY, f64::min)).collect();
    if cheapest.iter().any(|c| c.is_infinite()) {
        return Ok((OracleOutcome::Infeasible, 0));
    }
    let mut rest_by_user = vec![vec![0.0; scenario.n_users()]; ids.len() + 1];
    for k in (0..ids.len()).rev() {
        rest_by_user[k] = rest_by_user[k + 1].clone();
        rest_by_user[k][ids[k].user] += cheapest[k];
    }
    let mut s = Search {
        scenario,
        goal,
        options,
        rest_by_user,
        q: scenario.aps().iter().map(|a| a.q).collect(),
        r: scenario.ecss().iter().map(|e| e.cap).collect(),
        user_cost: vec![0.0; scenario.n_users()],
        current: vec![None; ids.len()],
        ids,
        best: None,
        nodes: 0,
    };
    s.descend(0);
    let nodes = s.nodes;
    let Some((_, flat)) = s.best else { return Ok((OracleOutcome::Infeasible, nodes)) };
    let mut assignment = Assignment::empty(scenario);
    for (id, p) in s.ids.iter().zip(flat) {
        assignment.set(*id, p);
    }
    // Recompute in task order so the value matches the objective functions exactly.
    let value = match goal {
        Goal::Total => model::op1_objective(scenario, &assignment)?,
        Goal::MinMax => model::op2_objective(scenario, &assignment)?,
    };
    Ok((OracleOutcome::Optimal { assignment, value }, nodes))
}

/// Minimum total cost over all feasible assignments.
pub fn brute_force_op1(scenario: &Scenario, budget: OracleBudget) -> Result<OracleOutcome> {
    solve(scenario, budget, Goal::Total).map(|r| r.0)
}

/// Minimum over feasible assignments of the largest weighted per-user cost.
pub fn brute_force_op2(scenario: &Scenario, budget: OracleBudget) -> Result<OracleOutcome> {
    solve(scenario, budget, Goal::MinMax).map(|r| r.0)
}

/// Runs an oracle and wraps the result as a report (`iterations` counts
/// search nodes). Infeasible instances give a report with every task
/// unassigned.
pub fn oracle_report(scenario: &Scenario, budget: OracleBudget, min_max: bool) -> Result<RunReport> {
    let goal = if min_max { Goal::MinMax } else { Goal::Total };
    let name = if min_max { "oracle_op2" } else { "oracle" };
    let (outcome, nodes) = solve(scenario, budget, goal)?;
    let nodes = nodes as usize;
    Ok(match outcome {
        OracleOutcome::Optimal { assignment, .. } => RunReport::for_assignment(name, scenario, &assignment, nodes),
        OracleOutcome::Infeasible => RunReport::for_assignment(name, scenario, &Assignment::empty(scenario), nodes),
    })
}
