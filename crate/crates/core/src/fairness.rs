//! Fairness-oriented greedy offloading.
//!
//! Each step serves one user: the one with the lowest priority value
//! `(Y·|S_i|/η_i − cost so far) / pending`. Users that have paid a lot so far
//! therefore get served later, which evens out per-user cost. The served user
//! then offloads its cheapest pending task, as in the plain greedy solver.

use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use crate::error::{Error, Result};
use crate::greedy::{best_path, PathChoice, SolverState};
use crate::model::{Assignment, Scenario, TaskId};
use crate::report::RunReport;

/// Relative tolerance under which two priorities count as tied.
pub const PRIORITY_TIE_TOL: f64 = 1e-12;

/// `max t + max e + max δ` over all finite entries of the scenario.
pub fn default_y(scenario: &Scenario) -> f64 {
    let finite_max = |it: &mut dyn Iterator<Item = f64>| it.filter(|x| x.is_finite()).fold(0.0, f64::max);
    let tasks = || scenario.users().iter().flat_map(|u| u.tasks.iter());
    let t = finite_max(&mut tasks().flat_map(|k| k.t.iter().copied()));
    let e = finite_max(&mut tasks().flat_map(|k| k.e.iter().copied()));
    let d = finite_max(&mut scenario.delta().iter().flat_map(|row| row.iter().copied()));
    t + e + d
}

/// Scheduling priority of `user`; lower is served first.
pub fn priority(scenario: &Scenario, state: &SolverState, user: usize, y: f64) -> Result<f64> {
    let u = scenario.user(user)?;
    let pending = state.pending[user].len();
    if pending == 0 {
        return Err(Error::NoPendingTasks(user));
    }
    Ok((y * u.tasks.len() as f64 / u.eta - state.accumulated_cost(user)) / pending as f64)
}

#[derive(Debug, Clone, Default)]
pub struct FgaConfig {
    /// Seeds the choice among tied users.
    pub seed: u64,
    /// Overrides [`default_y`]. Must be positive.
    pub y: Option<f64>,
}

/// FGA with seed 0 and the default `Y`.
pub fn fga(scenario: &Scenario) -> (Assignment, RunReport) {
    fga_with(scenario, &FgaConfig::default()).expect("default configuration is valid")
}

pub fn fga_with(scenario: &Scenario, config: &FgaConfig) -> Result<(Assignment, RunReport)> {
    let (state, steps) = fga_traced(scenario, config)?;
    let assignment = state.into_assignment();
    let report = RunReport::for_assignment("fga", scenario, &assignment, steps.len());
    Ok((assignment, report))
}

/// Runs FGA and returns the final state plus the committed tasks in order.
pub fn fga_traced(scenario: &Scenario, config: &FgaConfig) -> Result<(SolverState, Vec<TaskId>)> {
    let y = config.y.unwrap_or_else(|| default_y(scenario));
    if !(y.is_finite() && y > 0.0) {
        return Err(Error::InvalidParameter(format!("Y must be positive and finite, got {y}")));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(config.seed);
    let mut state = SolverState::new(scenario);
    let mut log = Vec::new();
    while !state.should_stop(scenario) {
        // Users that can still place something, with their cheapest task.
        let mut candidates: Vec<(usize, f64, TaskId, PathChoice)> = Vec::new();
        for i in 0..scenario.n_users() {
            let mut pick: Option<(TaskId, PathChoice)> = None;
            for &j in &state.pending[i] {
                let id = TaskId::new(i, j);
                if let Some(c) = best_path(scenario, &state, id) {
                    if pick.is_none_or(|(_, p)| c.cost < p.cost) {
                        pick = Some((id, c));
                    }
                }
            }
            if let Some((id, c)) = pick {
                candidates.push((i, priority(scenario, &state, i, y)?, id, c));
            }
        }
        let Some(lowest) = candidates.iter().map(|c| c.1).reduce(f64::min) else { break };
        let tol = PRIORITY_TIE_TOL * lowest.abs().max(1.0);
        let tied: Vec<_> = candidates.iter().filter(|c| c.1 <= lowest + tol).collect();
        let &&(_, _, id, choice) = tied.choose(&mut rng).expect("nonempty");
        state.commit(scenario, id, choice);
        log.push(id);
    }
    Ok((state, log))
}
