//! Centralized greedy offloading.
//!
//! [`best_path`] picks the cheapest (AP, ECS) pair for one task under the
//! current residual resources: for every AP with a free connection it takes
//! the ECS with the lowest access cost among servers that still fit the task,
//! then keeps the AP with the lowest total cost. With nonnegative weights the
//! cheapest server for a fixed AP is always the lowest-access one, so this
//! two-level scan is exact.
//!
//! [`cga`] repeatedly offloads the globally cheapest pending task. [`mga`]
//! differs only in how each user ranks its own pending tasks, using
//! [`mga_cost`] so that resource-hungry tasks can be deferred.
//!
//! Ties are always broken towards the lowest index.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::model::{fits, Assignment, Path, Scenario, TaskId};
use crate::report::RunReport;

/// The cheapest path for a task, with its true cost.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct PathChoice {
    pub ap: usize,
    pub ecs: usize,
    pub cost: f64,
}

impl PathChoice {
    pub fn path(&self) -> Path {
        Path::new(self.ap, self.ecs)
    }
}

/// Residual resources and task bookkeeping of a running greedy solver.
#[derive(Debug, Clone)]
pub struct SolverState {
    pub step: usize,
    pub residual_q: Vec<u32>,
    pub residual_r: Vec<f64>,
    /// Un-offloaded task indices per user, ascending.
    pub pending: Vec<Vec<usize>>,
    /// Offloaded `(task index, realized cost)` per user, in commit order.
    pub done: Vec<Vec<(usize, f64)>>,
    assignment: Assignment,
}

impl SolverState {
    pub fn new(scenario: &Scenario) -> Self {
        Self {
            step: 0,
            residual_q: scenario.aps().iter().map(|a| a.q).collect(),
            residual_r: scenario.ecss().iter().map(|s| s.cap).collect(),
            pending: scenario.users().iter().map(|u| (0..u.tasks.len()).collect()).collect(),
            done: vec![Vec::new(); scenario.n_users()],
            assignment: Assignment::empty(scenario),
        }
    }

    pub fn is_pending(&self, id: TaskId) -> bool {
        self.pending.get(id.user).is_some_and(|p| p.contains(&id.task))
    }

    pub fn has_pending(&self) -> bool {
        self.pending.iter().any(|p| !p.is_empty())
    }

    pub fn accumulated_cost(&self, user: usize) -> f64 {
        self.done[user].iter().map(|&(_, c)| c).sum()
    }

    pub fn assignment(&self) -> &Assignment {
        &self.assignment
    }

    pub fn into_assignment(self) -> Assignment {
        self.assignment
    }

    /// Offloads `id` along `choice` and advances the step counter.
    ///
    /// # Panics
    /// When `id` is not pending or the path lacks resources.
    pub fn commit(&mut self, scenario: &Scenario, id: TaskId, choice: PathChoice) {
        let r = scenario.users()[id.user].tasks[id.task].r;
        assert!(self.residual_q[choice.ap] >= 1, "AP {} has no free connection", choice.ap);
        assert!(fits(r, self.residual_r[choice.ecs]), "ECS {} cannot host {id}", choice.ecs);
        let pos = self.pending[id.user]
            .iter()
            .position(|&j| j == id.task)
            .unwrap_or_else(|| panic!("{id} is not pending"));
        self.pending[id.user].remove(pos);
        self.residual_q[choice.ap] -= 1;
        self.residual_r[choice.ecs] = (self.residual_r[choice.ecs] - r).max(0.0);
        self.done[id.user].push((id.task, choice.cost));
        self.assignment.set(id, Some(choice.path()));
        self.step += 1;
    }

    /// Stopping rule shared by the greedy solvers: nothing pending, no AP
    /// connection left, or no pending task fits the largest residual server.
    pub fn should_stop(&self, scenario: &Scenario) -> bool {
        if !self.has_pending() || self.residual_q.iter().all(|&q| q == 0) {
            return true;
        }
        let max_r = self.residual_r.iter().copied().fold(f64::NEG_INFINITY, f64::max);
        let min_demand = self
            .pending
            .iter()
            .enumerate()
            .flat_map(|(i, p)| p.iter().map(move |&j| scenario.users()[i].tasks[j].r))
            .fold(f64::INFINITY, f64::min);
        !fits(min_demand, max_r)
    }
}

/// APs with a free connection and ECSs whose residual capacity fits the task.
pub fn accessible_sets(scenario: &Scenario, state: &SolverState, id: TaskId) -> (Vec<usize>, Vec<usize>) {
    let r = scenario.users()[id.user].tasks[id.task].r;
    let aps = (0..scenario.n_aps()).filter(|&m| state.residual_q[m] >= 1).collect();
    let ecss = (0..scenario.n_ecss()).filter(|&n| fits(r, state.residual_r[n])).collect();
    (aps, ecss)
}

/// Cheapest accessible path for `id`, or `None` when no path is left.
pub fn best_path(scenario: &Scenario, state: &SolverState, id: TaskId) -> Option<PathChoice> {
    let (aps, ecss) = accessible_sets(scenario, state, id);
    best_over(scenario, id, &aps, &ecss)
}

pub(crate) fn best_over(scenario: &Scenario, id: TaskId, aps: &[usize], ecss: &[usize]) -> Option<PathChoice> {
    let delta = scenario.delta();
    let mut best: Option<PathChoice> = None;
    for &m in aps {
        let mut n_hat: Option<usize> = None;
        for &n in ecss {
            if delta[m][n].is_finite() && n_hat.is_none_or(|k| delta[m][n] < delta[m][k]) {
                n_hat = Some(n);
            }
        }
        let Some(n) = n_hat else { continue };
        let cost = scenario.cost_unchecked(id, m, n);
        if cost.is_finite() && best.is_none_or(|b| cost < b.cost) {
            best = Some(PathChoice { ap: m, ecs: n, cost });
        }
    }
    best
}

/// Resource-aware ranking cost `u^epsilon * r^zeta`. Both exponents must be
/// at least 1.
pub fn mga_cost(u: f64, r: f64, epsilon: f64, zeta: f64) -> Result<f64> {
    check_exponents(epsilon, zeta)?;
    if !(u >= 0.0) {
        return Err(Error::InvalidParameter(format!("cost u = {u} must be >= 0")));
    }
    if !(r > 0.0) {
        return Err(Error::InvalidParameter(format!("demand r = {r} must be > 0")));
    }
    Ok(u.powf(epsilon) * r.powf(zeta))
}

fn check_exponents(epsilon: f64, zeta: f64) -> Result<()> {
    if !(epsilon >= 1.0) || !epsilon.is_finite() {
        return Err(Error::InvalidParameter(format!("epsilon = {epsilon} must be >= 1")));
    }
    if !(zeta >= 1.0) || !zeta.is_finite() {
        return Err(Error::InvalidParameter(format!("zeta = {zeta} must be >= 1")));
    }
    Ok(())
}

/// Commit log entry, useful for inspecting greedy order.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Commit {
    pub step: usize,
    pub task: TaskId,
    pub choice: PathChoice,
}

/// Greedy engine. `rank` orders a user's own pending tasks; across users the
/// true cost of each user's pick decides.
pub(crate) fn run_greedy<F>(scenario: &Scenario, mut rank: F) -> (SolverState, Vec<Commit>)
where
    F: FnMut(TaskId, &PathChoice) -> f64,
{
    let mut state = SolverState::new(scenario);
    let mut log = Vec::new();
    while !state.should_stop(scenario) {
        let mut global: Option<(TaskId, PathChoice)> = None;
        for (i, pending) in state.pending.iter().enumerate() {
            let mut pick: Option<(f64, TaskId, PathChoice)> = None;
            for &j in pending {
                let id = TaskId::new(i, j);
                if let Some(c) = best_path(scenario, &state, id) {
                    let key = rank(id, &c);
                    if pick.is_none_or(|(k, _, _)| key < k) {
                        pick = Some((key, id, c));
                    }
                }
            }
            if let Some((_, id, c)) = pick {
                if global.is_none_or(|(_, g)| c.cost < g.cost) {
                    global = Some((id, c));
                }
            }
        }
        let Some((id, choice)) = global else { break };
        log.push(Commit { step: state.step, task: id, choice });
        state.commit(scenario, id, choice);
    }
    (state, log)
}

/// Centralized greedy algorithm. Tasks that cannot be placed stay unassigned.
pub fn cga(scenario: &Scenario) -> (Assignment, RunReport) {
    let (assignment, report, _) = cga_traced(scenario);
    (assignment, report)
}

/// [`cga`] plus its commit log.
pub fn cga_traced(scenario: &Scenario) -> (Assignment, RunReport, Vec<Commit>) {
    let (state, log) = run_greedy(scenario, |_, c| c.cost);
    let assignment = state.into_assignment();
    let report = RunReport::for_assignment("cga", scenario, &assignment, log.len());
    (assignment, report, log)
}

/// Modified greedy algorithm: as [`cga`], but each user picks its next task
/// by [`mga_cost`]. The committed path is still the task's cheapest one.
pub fn mga(scenario: &Scenario, epsilon: f64, zeta: f64) -> Result<(Assignment, RunReport)> {
    check_exponents(epsilon, zeta)?;
    let (state, log) = run_greedy(scenario, |id, c| {
        let r = scenario.users()[id.user].tasks[id.task].r;
        c.cost.powf(epsilon) * r.powf(zeta)
    });
    let assignment = state.into_assignment();
    let report = RunReport::for_assignment("mga", scenario, &assignment, log.len());
    Ok((assignment, report))
}
