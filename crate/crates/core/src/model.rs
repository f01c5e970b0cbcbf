//! Problem instances, offloading costs and constraint checking.
//!
//! A [`Scenario`] holds mobile users (each with one or more tasks), access
//! points with a connection budget, edge servers with a compute budget, and
//! the AP-to-server access-cost matrix. Every index is dense and 0-based.
//!
//! An access cost of `+inf` marks an AP-server link that does not exist. A
//! task delay or energy of `+inf` marks an AP the task cannot reach. Both are
//! written as `null` in JSON. Every solver treats such paths as unavailable.

use std::fmt;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Relative slack used for every capacity comparison.
pub const CAPACITY_TOL: f64 = 1e-9;

/// `true` when `demand` fits into `capacity`, up to [`CAPACITY_TOL`].
#[inline]
pub fn fits(demand: f64, capacity: f64) -> bool {
    demand <= capacity + CAPACITY_TOL * capacity.abs().max(1.0)
}

/// Identifies task `task` of user `user`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
pub struct TaskId {
    pub user: usize,
    pub task: usize,
}

impl TaskId {
    pub const fn new(user: usize, task: usize) -> Self {
        Self { user, task }
    }
}

impl fmt::Display for TaskId {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "s({},{})", self.user, self.task)
    }
}

/// An offloadable task: compute demand plus per-AP delay and energy.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Task {
    pub r: f64,
    #[serde(with = "inf_vec")]
    pub t: Vec<f64>,
    #[serde(with = "inf_vec")]
    pub e: Vec<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MobileUser {
    pub alpha: f64,
    pub beta: f64,
    pub gamma: f64,
    pub eta: f64,
    pub tasks: Vec<Task>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct AccessPoint {
    pub q: u32,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct EdgeServer {
    pub cap: f64,
}

/// Immutable problem instance. Construct with [`Scenario::new`] or by
/// deserializing; both paths run the same validation.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "RawScenario")]
pub struct Scenario {
    users: Vec<MobileUser>,
    aps: Vec<AccessPoint>,
    ecss: Vec<EdgeServer>,
    #[serde(with = "inf_matrix")]
    delta: Vec<Vec<f64>>,
}

#[derive(Deserialize)]
struct RawScenario {
    users: Vec<MobileUser>,
    aps: Vec<AccessPoint>,
    ecss: Vec<EdgeServer>,
    #[serde(with = "inf_matrix")]
    delta: Vec<Vec<f64>>,
}

impl TryFrom<RawScenario> for Scenario {
    type Error = Error;

    fn try_from(raw: RawScenario) -> Result<Self> {
        Scenario::new(raw.users, raw.aps, raw.ecss, raw.delta)
    }
}

fn nonneg_or_inf(x: f64) -> bool {
    x == f64::INFINITY || (x.is_finite() && x >= 0.0)
}

impl Scenario {
    pub fn new(
        users: Vec<MobileUser>,
        aps: Vec<AccessPoint>,
        ecss: Vec<EdgeServer>,
        delta: Vec<Vec<f64>>,
    ) -> Result<Self> {
        let invalid = |msg: String| Err(Error::InvalidScenario(msg));
        if delta.len() != aps.len() {
            return invalid(format!("delta has {} rows, expected {} (one per AP)", delta.len(), aps.len()));
        }
        for (m, row) in delta.iter().enumerate() {
            if row.len() != ecss.len() {
                return invalid(format!("delta[{m}] has {} entries, expected {}", row.len(), ecss.len()));
            }
            if let Some(n) = row.iter().position(|&d| !nonneg_or_inf(d)) {
                return invalid(format!("delta[{m}][{n}] = {} is not a nonnegative cost", row[n]));
            }
        }
        for (n, s) in ecss.iter().enumerate() {
            if !(s.cap.is_finite() && s.cap >= 0.0) {
                return invalid(format!("ecss[{n}].cap = {} must be finite and >= 0", s.cap));
            }
        }
        for (i, u) in users.iter().enumerate() {
            for (name, w) in [("alpha", u.alpha), ("beta", u.beta), ("gamma", u.gamma)] {
                if !(w.is_finite() && w >= 0.0) {
                    return invalid(format!("users[{i}].{name} = {w} must be finite and >= 0"));
                }
            }
            if u.alpha == 0.0 && u.beta == 0.0 && u.gamma == 0.0 {
                return invalid(format!("users[{i}]: alpha, beta and gamma are all zero"));
            }
            if !(u.eta.is_finite() && u.eta > 0.0) {
                return invalid(format!("users[{i}].eta = {} must be > 0", u.eta));
            }
            if u.tasks.is_empty() {
                return invalid(format!("users[{i}].tasks is empty"));
            }
            for (j, task) in u.tasks.iter().enumerate() {
                if !(task.r.is_finite() && task.r > 0.0) {
                    return invalid(format!("users[{i}].tasks[{j}].r = {} must be > 0", task.r));
                }
                for (name, v) in [("t", &task.t), ("e", &task.e)] {
                    if v.len() != aps.len() {
                        return invalid(format!(
                            "users[{i}].tasks[{j}].{name} has {} entries, expected {}",
                            v.len(),
                            aps.len()
                        ));
                    }
                    if let Some(m) = v.iter().position(|&x| !nonneg_or_inf(x)) {
                        return invalid(format!("users[{i}].tasks[{j}].{name}[{m}] = {} is invalid", v[m]));
                    }
                }
            }
        }
        Ok(Self { users, aps, ecss, delta })
    }

    pub fn users(&self) -> &[MobileUser] {
        &self.users
    }

    pub fn aps(&self) -> &[AccessPoint] {
        &self.aps
    }

    pub fn ecss(&self) -> &[EdgeServer] {
        &self.ecss
    }

    pub fn delta(&self) -> &[Vec<f64>] {
        &self.delta
    }

    pub fn n_users(&self) -> usize {
        self.users.len()
    }

    pub fn n_aps(&self) -> usize {
        self.aps.len()
    }

    pub fn n_ecss(&self) -> usize {
        self.ecss.len()
    }

    pub fn total_tasks(&self) -> usize {
        self.users.iter().map(|u| u.tasks.len()).sum()
    }

    /// All task ids in user-major order.
    pub fn task_ids(&self) -> impl Iterator<Item = TaskId> + '_ {
        self.users
            .iter()
            .enumerate()
            .flat_map(|(i, u)| (0..u.tasks.len()).map(move |j| TaskId::new(i, j)))
    }

    pub fn user(&self, i: usize) -> Result<&MobileUser> {
        self.users
            .get(i)
            .ok_or_else(|| Error::IndexOutOfRange(format!("user {i} (have {})", self.users.len())))
    }

    pub fn task(&self, id: TaskId) -> Result<&Task> {
        self.user(id.user)?
            .tasks
            .get(id.task)
            .ok_or_else(|| Error::IndexOutOfRange(format!("task {id}")))
    }

    /// Whether the path (ap, ecs) can carry `id` at all, ignoring capacities.
    /// Indices must be valid.
    pub fn path_available(&self, id: TaskId, ap: usize, ecs: usize) -> bool {
        let task = &self.users[id.user].tasks[id.task];
        task.t[ap].is_finite() && task.e[ap].is_finite() && self.delta[ap][ecs].is_finite()
    }

    /// Weighted cost of a path; indices must be valid. `+inf` when the path
    /// is unavailable.
    pub(crate) fn cost_unchecked(&self, id: TaskId, ap: usize, ecs: usize) -> f64 {
        if !self.path_available(id, ap, ecs) {
            return f64::INFINITY;
        }
        let u = &self.users[id.user];
        let task = &u.tasks[id.task];
        u.alpha * task.t[ap] + u.beta * task.e[ap] + u.gamma * self.delta[ap][ecs]
    }

    pub fn with_eta(&self, eta: f64) -> Result<Self> {
        let mut users = self.users.clone();
        for u in &mut users {
            u.eta = eta;
        }
        Scenario::new(users, self.aps.clone(), self.ecss.clone(), self.delta.clone())
    }
}

/// One offloading path: the AP the task associates with and the serving ECS.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct Path {
    pub ap: usize,
    pub ecs: usize,
}

impl Path {
    pub const fn new(ap: usize, ecs: usize) -> Self {
        Self { ap, ecs }
    }
}

/// Per-task offloading decision; `None` means the task was not offloaded.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Assignment {
    paths: Vec<Vec<Option<Path>>>,
}

impl Assignment {
    /// All tasks unassigned, shaped after `scenario`.
    pub fn empty(scenario: &Scenario) -> Self {
        Self {
            paths: scenario.users().iter().map(|u| vec![None; u.tasks.len()]).collect(),
        }
    }

    pub fn from_paths(paths: Vec<Vec<Option<Path>>>) -> Self {
        Self { paths }
    }

    pub fn paths(&self) -> &[Vec<Option<Path>>] {
        &self.paths
    }

    pub fn get(&self, id: TaskId) -> Option<Path> {
        self.paths.get(id.user).and_then(|u| u.get(id.task)).copied().flatten()
    }

    /// # Panics
    /// When `id` is outside the assignment's shape.
    pub fn set(&mut self, id: TaskId, path: Option<Path>) {
        self.paths[id.user][id.task] = path;
    }

    pub fn iter(&self) -> impl Iterator<Item = (TaskId, Option<Path>)> + '_ {
        self.paths
            .iter()
            .enumerate()
            .flat_map(|(i, u)| u.iter().enumerate().map(move |(j, p)| (TaskId::new(i, j), *p)))
    }

    pub fn total_tasks(&self) -> usize {
        self.paths.iter().map(Vec::len).sum()
    }

    pub fn assigned_count(&self) -> usize {
        self.iter().filter(|(_, p)| p.is_some()).count()
    }

    pub fn is_complete(&self) -> bool {
        self.iter().all(|(_, p)| p.is_some())
    }

    /// Tasks held by each ECS, in task-id order.
    pub fn tasks_on_ecs(&self, n_ecss: usize) -> Vec<Vec<TaskId>> {
        let mut out = vec![Vec::new(); n_ecss];
        for (id, p) in self.iter() {
            if let Some(p) = p {
                if p.ecs < n_ecss {
                    out[p.ecs].push(id);
                }
            }
        }
        out
    }
}

/// Cost components of one task on one path. `total` is the user-weighted sum.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct CostBreakdown {
    pub delay: f64,
    pub energy: f64,
    pub access: f64,
    pub total: f64,
}

fn check_path(scenario: &Scenario, ap: usize, ecs: usize) -> Result<()> {
    if ap >= scenario.n_aps() {
        return Err(Error::IndexOutOfRange(format!("AP {ap} (have {})", scenario.n_aps())));
    }
    if ecs >= scenario.n_ecss() {
        return Err(Error::IndexOutOfRange(format!("ECS {ecs} (have {})", scenario.n_ecss())));
    }
    Ok(())
}

/// Offloading cost of task `id` through AP `ap` to ECS `ecs`.
pub fn path_cost(scenario: &Scenario, id: TaskId, ap: usize, ecs: usize) -> Result<CostBreakdown> {
    let task = scenario.task(id)?;
    check_path(scenario, ap, ecs)?;
    Ok(CostBreakdown {
        delay: task.t[ap],
        energy: task.e[ap],
        access: scenario.delta()[ap][ecs],
        total: scenario.cost_unchecked(id, ap, ecs),
    })
}

/// Sum of offloading costs over all tasks of `user`. Every task must be assigned.
pub fn user_total_cost(scenario: &Scenario, assignment: &Assignment, user: usize) -> Result<f64> {
    let u = scenario.user(user)?;
    let mut sum = 0.0;
    for j in 0..u.tasks.len() {
        let id = TaskId::new(user, j);
        let p = assignment.get(id).ok_or(Error::Unassigned(id))?;
        sum += path_cost(scenario, id, p.ap, p.ecs)?.total;
    }
    Ok(sum)
}

/// Total offloading cost of the system.
pub fn op1_objective(scenario: &Scenario, assignment: &Assignment) -> Result<f64> {
    (0..scenario.n_users())
        .map(|i| user_total_cost(scenario, assignment, i))
        .sum()
}

/// Largest η-weighted average per-task cost over users.
pub fn op2_objective(scenario: &Scenario, assignment: &Assignment) -> Result<f64> {
    let mut worst = f64::NEG_INFINITY;
    for (i, u) in scenario.users().iter().enumerate() {
        let v = u.eta * user_total_cost(scenario, assignment, i)? / u.tasks.len() as f64;
        worst = worst.max(v);
    }
    Ok(worst)
}

/// Per-user cost over offloaded tasks only; unassigned tasks contribute 0.
pub fn offloaded_user_costs(scenario: &Scenario, assignment: &Assignment) -> Vec<f64> {
    let mut out = vec![0.0; scenario.n_users()];
    for (id, p) in assignment.iter() {
        if let Some(p) = p {
            if let Ok(c) = path_cost(scenario, id, p.ap, p.ecs) {
                if id.user < out.len() {
                    out[id.user] += c.total;
                }
            }
        }
    }
    out
}

/// A broken constraint in an assignment.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum Violation {
    Shape { detail: String },
    Unassigned { task: TaskId },
    PathOutOfRange { task: TaskId, ap: usize, ecs: usize },
    PathUnavailable { task: TaskId, ap: usize, ecs: usize },
    EcsCapacity { ecs: usize, demand: f64, capacity: f64 },
    ApConnections { ap: usize, connections: u64, capacity: u32 },
}

impl fmt::Display for Violation {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Violation::Shape { detail } => write!(f, "shape mismatch: {detail}"),
            Violation::Unassigned { task } => write!(f, "task {task} is not assigned"),
            Violation::PathOutOfRange { task, ap, ecs } => {
                write!(f, "task {task} uses out-of-range path (AP {ap}, ECS {ecs})")
            }
            Violation::PathUnavailable { task, ap, ecs } => {
                write!(f, "task {task} uses unavailable path (AP {ap}, ECS {ecs})")
            }
            Violation::EcsCapacity { ecs, demand, capacity } => {
                write!(f, "ECS {ecs} overloaded: demand {demand} > capacity {capacity}")
            }
            Violation::ApConnections { ap, connections, capacity } => {
                write!(f, "AP {ap} overloaded: {connections} connections > {capacity}")
            }
        }
    }
}

/// Every constraint violation of `assignment`; empty iff it is a feasible
/// complete assignment.
pub fn validate_assignment(scenario: &Scenario, assignment: &Assignment) -> Vec<Violation> {
    let mut out = Vec::new();
    let paths = assignment.paths();
    if paths.len() != scenario.n_users() {
        out.push(Violation::Shape {
            detail: format!("{} users in assignment, {} in scenario", paths.len(), scenario.n_users()),
        });
    }
    let mut demand = vec![0.0; scenario.n_ecss()];
    let mut conns = vec![0u64; scenario.n_aps()];
    for id in scenario.task_ids() {
        match assignment.get(id) {
            None => out.push(Violation::Unassigned { task: id }),
            Some(p) if p.ap >= scenario.n_aps() || p.ecs >= scenario.n_ecss() => {
                out.push(Violation::PathOutOfRange { task: id, ap: p.ap, ecs: p.ecs })
            }
            Some(p) => {
                if !scenario.path_available(id, p.ap, p.ecs) {
                    out.push(Violation::PathUnavailable { task: id, ap: p.ap, ecs: p.ecs });
                }
                demand[p.ecs] += scenario.users()[id.user].tasks[id.task].r;
                conns[p.ap] += 1;
            }
        }
    }
    for (i, u) in paths.iter().enumerate() {
        let expected = scenario.users().get(i).map_or(0, |u| u.tasks.len());
        if u.len() != expected && i < scenario.n_users() {
            out.push(Violation::Shape {
                detail: format!("user {i} has {} tasks in assignment, {expected} in scenario", u.len()),
            });
        }
    }
    for (n, (&d, s)) in demand.iter().zip(scenario.ecss()).enumerate() {
        if !fits(d, s.cap) {
            out.push(Violation::EcsCapacity { ecs: n, demand: d, capacity: s.cap });
        }
    }
    for (m, (&c, a)) in conns.iter().zip(scenario.aps()).enumerate() {
        if c > u64::from(a.q) {
            out.push(Violation::ApConnections { ap: m, connections: c, capacity: a.q });
        }
    }
    out
}

/// Outcome of the aggregate-resource test. Passing it is necessary for a
/// feasible complete assignment but not sufficient: demands may not pack
/// into the individual servers.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct FeasibilityCheck {
    pub holds: bool,
    pub total_demand: f64,
    pub total_capacity: f64,
    pub task_count: usize,
    pub total_connections: u64,
    pub diagnostics: Vec<String>,
}

pub fn necessary_feasibility(scenario: &Scenario) -> FeasibilityCheck {
    let total_demand: f64 = scenario.task_ids().map(|id| scenario.users()[id.user].tasks[id.task].r).sum();
    let total_capacity: f64 = scenario.ecss().iter().map(|s| s.cap).sum();
    let task_count = scenario.total_tasks();
    let total_connections: u64 = scenario.aps().iter().map(|a| u64::from(a.q)).sum();
    let mut diagnostics = Vec::new();
    if !fits(total_demand, total_capacity) {
        diagnostics.push(format!(
            "compute: total demand {total_demand} exceeds total ECS capacity {total_capacity}"
        ));
    }
    if task_count as u64 > total_connections {
        diagnostics.push(format!(
            "connections: {task_count} tasks exceed total AP connections {total_connections}"
        ));
    }
    FeasibilityCheck {
        holds: diagnostics.is_empty(),
        total_demand,
        total_capacity,
        task_count,
        total_connections,
        diagnostics,
    }
}

/// `null` <-> `+inf` for cost vectors.
mod inf_vec {
    use serde::{Deserialize, Deserializer, Serialize, Serializer};

    pub fn serialize<S: Serializer>(v: &[f64], s: S) -> Result<S::Ok, S::Error> {
        v.iter()
            .map(|&x| x.is_finite().then_some(x))
            .collect::<Vec<_>>()
            .serialize(s)
    }

    pub fn deserialize<'de, D: Deserializer<'de>>(d: D) -> Result<Vec<f64>, D::Error> {
        let raw = Vec::<Option<f64>>::deserialize(d)?;
        Ok(raw.into_iter().map(|x| x.unwrap_or(f64::INFINITY)).collect())
    }
}

mod inf_matrix {
    use serde::{Deserialize, Deserializer, Serialize, Serializer};

    pub fn serialize<S: Serializer>(v: &[Vec<f64>], s: S) -> Result<S::Ok, S::Error> {
        v.iter()
            .map(|row| row.iter().map(|&x| x.is_finite().then_some(x)).collect::<Vec<_>>())
            .collect::<Vec<_>>()
            .serialize(s)
    }

    pub fn deserialize<'de, D: Deserializer<'de>>(d: D) -> Result<Vec<Vec<f64>>, D::Error> {
        let raw = Vec::<Vec<Option<f64>>>::deserialize(d)?;
        Ok(raw
            .into_iter()
            .map(|row| row.into_iter().map(|x| x.unwrap_or(f64::INFINITY)).collect())
            .collect())
    }
}
