//! LP relaxations of the offloading problems, used as lower bounds.
//!
//! Binary path variables `x` are relaxed to `[0, 1]`. The total-cost
//! relaxation keeps the ECS, AP and assign-once rows. The min-max relaxation
//! adds an auxiliary `y` and one row per user bounding its weighted average
//! cost by `y`. Paths with an infinite cost, and paths to a server too small
//! for the task on its own, are left out (their `x` is 0). No integral
//! solution can use them, so the bounds stay valid, and an instance where
//! some task fits nowhere comes out infeasible rather than being split
//! across servers.
//!
//! The solver is a dense two-phase tableau simplex. It uses Dantzig pricing
//! and falls back to Bland's rule while pivots stay degenerate, which rules
//! out cycling. Problems here are small, so dense storage is fine.

use std::fmt::Write as _;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::model::{fits, Scenario, TaskId};
use crate::report::RunReport;

pub const FEASIBILITY_TOL: f64 = 1e-7;
pub const OPTIMALITY_TOL: f64 = 1e-9;
/// Entries smaller than this are never used as pivots.
const PIVOT_TOL: f64 = 1e-9;
/// Degenerate pivots in a row before switching to Bland's rule.
const DEGENERATE_STREAK: usize = 25;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum Sense {
    Le,
    Eq,
    Ge,
}

/// A linear constraint `Σ coeff·x  (sense)  rhs` over sparse coefficients.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Row {
    pub name: String,
    pub coeffs: Vec<(usize, f64)>,
    pub sense: Sense,
    pub rhs: f64,
}

/// What an LP column stands for.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum VarKey {
    X { task: TaskId, ap: usize, ecs: usize },
    Y,
    /// Column of a hand-built problem.
    Free { index: usize },
}

impl VarKey {
    fn lp_name(&self) -> String {
        match self {
            VarKey::X { task, ap, ecs } => format!("x_{}_{}_{}_{}", task.user, task.task, ap, ecs),
            VarKey::Y => "y".into(),
            VarKey::Free { index } => format!("v{index}"),
        }
    }
}

/// `minimize c·x` subject to `rows`, `0 ≤ x ≤ upper`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LpProblem {
    pub objective: Vec<f64>,
    /// `None` means unbounded above.
    pub upper: Vec<Option<f64>>,
    pub rows: Vec<Row>,
    pub keys: Vec<VarKey>,
}

impl LpProblem {
    pub fn n_vars(&self) -> usize {
        self.objective.len()
    }

    pub fn column(&self, key: VarKey) -> Option<usize> {
        self.keys.iter().position(|k| *k == key)
    }

    /// `rhs − activity` for `≤` rows, `activity − rhs` for `≥` rows and
    /// `|activity − rhs|` for equalities. Nonnegative slack means satisfied.
    pub fn row_slacks(&self, x: &[f64]) -> Vec<f64> {
        self.rows
            .iter()
            .map(|row| {
                let act: f64 = row.coeffs.iter().map(|&(j, a)| a * x[j]).sum();
                match row.sense {
                    Sense::Le => row.rhs - act,
                    Sense::Ge => act - row.rhs,
                    Sense::Eq => -(act - row.rhs).abs(),
                }
            })
            .collect()
    }

    /// CPLEX LP text format, for cross-checking with external solvers.
    pub fn to_lp_format(&self) -> String {
        let names: Vec<String> = self.keys.iter().map(VarKey::lp_name).collect();
        let term = |a: f64, j: usize, first: bool| {
            let sign = if a < 0.0 { "-" } else if first { "" } else { "+" };
            format!("{sign} {} {}", a.abs(), names[j])
        };
        let mut out = String::from("Minimize\n obj:");
        let mut first = true;
        for (j, &c) in self.objective.iter().enumerate() {
            if c != 0.0 {
                let _ = write!(out, " {}", term(c, j, first));
                first = false;
            }
        }
        if first {
            let _ = write!(out, " 0 {}", names.first().map_or("v0", String::as_str));
        }
        out.push_str("\nSubject To\n");
        for row in &self.rows {
            let _ = write!(out, " {}:", row.name);
            for (k, &(j, a)) in row.coeffs.iter().enumerate() {
                let _ = write!(out, " {}", term(a, j, k == 0));
            }
            let op = match row.sense {
                Sense::Le => "<=",
                Sense::Eq => "=",
                Sense::Ge => ">=",
            };
            let _ = writeln!(out, " {op} {}", row.rhs);
        }
        out.push_str("Bounds\n");
        for (j, ub) in self.upper.iter().enumerate() {
            match ub {
                Some(u) => {
                    let _ = writeln!(out, " 0 <= {} <= {u}", names[j]);
                }
                None => {
                    let _ = writeln!(out, " {} >= 0", names[j]);
                }
            }
        }
        out.push_str("End\n");
        out
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum LpStatus {
    Optimal,
    Infeasible,
    Unbounded,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LpSolution {
    pub status: LpStatus,
    /// Optimal objective value; `None` unless optimal.
    pub value: Option<f64>,
    /// Column values; empty unless optimal.
    pub x: Vec<f64>,
    /// Every `[0, 1]`-bounded column lies within tolerance of 0 or 1.
    pub is_integral: bool,
    pub iterations: usize,
}

impl LpSolution {
    fn without_point(status: LpStatus, iterations: usize) -> Self {
        Self { status, value: None, x: Vec::new(), is_integral: false, iterations }
    }
}

#[derive(Debug, Clone, Copy)]
pub struct SimplexOptions {
    pub feasibility_tol: f64,
    pub optimality_tol: f64,
    /// Pivot cap over both phases; scales with problem size when `None`.
    pub max_iterations: Option<usize>,
}

impl Default for SimplexOptions {
    fn default() -> Self {
        Self { feasibility_tol: FEASIBILITY_TOL, optimality_tol: OPTIMALITY_TOL, max_iterations: None }
    }
}

struct Tableau {
    m: usize,
    width: usize,
    cells: Vec<f64>,
    basis: Vec<usize>,
}

impl Tableau {
    fn at(&self, i: usize, j: usize) -> f64 {
        self.cells[i * self.width + j]
    }

    fn rhs(&self, i: usize) -> f64 {
        self.at(i, self.width - 1)
    }

    fn pivot(&mut self, r: usize, c: usize) {
        let w = self.width;
        let p = self.cells[r * w + c];
        for v in &mut self.cells[r * w..(r + 1) * w] {
            *v /= p;
        }
        let (before, rest) = self.cells.split_at_mut(r * w);
        let (prow, after) = rest.split_at_mut(w);
        for row in before.chunks_exact_mut(w).chain(after.chunks_exact_mut(w)) {
            let f = row[c];
            if f != 0.0 {
                for (v, &pv) in row.iter_mut().zip(prow.iter()) {
                    *v -= f * pv;
                }
                row[c] = 0.0;
            }
        }
        self.basis[r] = c;
    }

    /// Runs simplex pivots on the objective row `m` until optimal.
    /// Returns `Ok(false)` when unbounded.
    fn optimize(&mut self, allowed: usize, opts: &SimplexOptions, budget: &mut usize, phase: &'static str, cap: usize) -> Result<bool> {
        let mut streak = 0;
        loop {
            let z = self.m;
            let entering = if streak >= DEGENERATE_STREAK {
                (0..allowed).find(|&j| self.at(z, j) < -opts.optimality_tol)
            } else {
                (0..allowed)
                    .filter(|&j| self.at(z, j) < -opts.optimality_tol)
                    .min_by(|&a, &b| self.at(z, a).total_cmp(&self.at(z, b)))
            };
            let Some(c) = entering else { return Ok(true) };
            let mut leave: Option<(usize, f64)> = None;
            for i in 0..self.m {
                let a = self.at(i, c);
                if a > PIVOT_TOL {
                    let ratio = self.rhs(i).max(0.0) / a;
                    let better = match leave {
                        None => true,
                        Some((l, best)) => ratio < best - 1e-12 || (ratio <= best + 1e-12 && self.basis[i] < self.basis[l]),
                    };
                    if better {
                        leave = Some((i, ratio));
                    }
                }
            }
            let Some((r, ratio)) = leave else { return Ok(false) };
            if *budget >= cap {
                return Err(Error::NonConvergence { iterations: *budget, phase });
            }
            *budget += 1;
            streak = if ratio <= 1e-12 { streak + 1 } else { 0 };
            self.pivot(r, c);
        }
    }
}

/// An upper bound on column `j` that some assign-once style row already
/// enforces: an equality with nonnegative coefficients, coefficient 1 on
/// `j`, and right-hand side equal to the bound.
fn implied_upper(p: &LpProblem, j: usize, u: f64, by_col: &[Vec<usize>]) -> bool {
    by_col[j].iter().any(|&ri| {
        let row = &p.rows[ri];
        row.sense == Sense::Eq
            && row.rhs == u
            && row.coeffs.iter().all(|&(_, a)| a >= 0.0)
            && row.coeffs.iter().any(|&(k, a)| k == j && a == 1.0)
    })
}

type SparseRow = (Vec<(usize, f64)>, Sense, f64);

/// Solves `p` with the two-phase simplex method.
pub fn simplex(p: &LpProblem, opts: &SimplexOptions) -> Result<LpSolution> {
    let n = p.n_vars();
    if p.upper.len() != n || p.keys.len() != n {
        return Err(Error::InvalidParameter("LP column arrays differ in length".into()));
    }
    if let Some(bad) = p.rows.iter().flat_map(|r| &r.coeffs).find(|&&(j, a)| j >= n || !a.is_finite()) {
        return Err(Error::InvalidParameter(format!("bad LP coefficient {bad:?}")));
    }
    let mut by_col = vec![Vec::new(); n];
    for (ri, row) in p.rows.iter().enumerate() {
        for &(j, _) in &row.coeffs {
            by_col[j].push(ri);
        }
    }
    let mut rows: Vec<SparseRow> =
        p.rows.iter().map(|r| (r.coeffs.clone(), r.sense, r.rhs)).collect();
    for (j, ub) in p.upper.iter().enumerate() {
        if let Some(u) = *ub {
            if !implied_upper(p, j, u, &by_col) {
                rows.push((vec![(j, 1.0)], Sense::Le, u));
            }
        }
    }
    for (coeffs, sense, rhs) in &mut rows {
        if *rhs < 0.0 {
            *rhs = -*rhs;
            coeffs.iter_mut().for_each(|(_, a)| *a = -*a);
            *sense = match *sense {
                Sense::Le => Sense::Ge,
                Sense::Ge => Sense::Le,
                Sense::Eq => Sense::Eq,
            };
        }
    }

    let m = rows.len();
    let n_slack = rows.iter().filter(|r| r.1 != Sense::Eq).count();
    let n_art = rows.iter().filter(|r| r.1 != Sense::Le).count();
    let real = n + n_slack;
    let total = real + n_art;
    let width = total + 1;
    let mut t = Tableau { m, width, cells: vec![0.0; (m + 1) * width], basis: vec![0; m] };
    let (mut s, mut a) = (n, real);
    for (i, (coeffs, sense, rhs)) in rows.iter().enumerate() {
        for &(j, v) in coeffs {
            t.cells[i * width + j] += v;
        }
        t.cells[i * width + total] = *rhs;
        match sense {
            Sense::Le => {
                t.cells[i * width + s] = 1.0;
                t.basis[i] = s;
                s += 1;
            }
            Sense::Ge => {
                t.cells[i * width + s] = -1.0;
                s += 1;
                t.cells[i * width + a] = 1.0;
                t.basis[i] = a;
                a += 1;
            }
            Sense::Eq => {
                t.cells[i * width + a] = 1.0;
                t.basis[i] = a;
                a += 1;
            }
        }
    }
    let cap = opts.max_iterations.unwrap_or(1000 + 50 * (m + total));
    let mut iterations = 0;

    // Phase 1: minimize the sum of artificials.
    let z = m * width;
    for i in 0..m {
        if t.basis[i] >= real {
            for j in 0..width {
                if j < real || j == total {
                    t.cells[z + j] -= t.cells[i * width + j];
                }
            }
        }
    }
    if n_art > 0 {
        t.optimize(total, opts, &mut iterations, "phase 1", cap)?;
        let scale = 1.0 + rows.iter().map(|r| r.2.abs()).fold(0.0, f64::max);
        if -t.rhs(m) > opts.feasibility_tol * scale {
            return Ok(LpSolution::without_point(LpStatus::Infeasible, iterations));
        }
        for i in 0..m {
            if t.basis[i] >= real {
                if let Some(j) = (0..real).find(|&j| t.at(i, j).abs() > PIVOT_TOL) {
                    t.pivot(i, j);
                }
            }
        }
    }

    // Phase 2: original objective, artificials barred.
    for j in 0..width {
        t.cells[z + j] = if j < n { p.objective[j] } else { 0.0 };
    }
    for i in 0..m {
        let cb = if t.basis[i] < n { p.objective[t.basis[i]] } else { 0.0 };
        if cb != 0.0 {
            for j in 0..width {
                t.cells[z + j] -= cb * t.cells[i * width + j];
            }
        }
    }
    if !t.optimize(real, opts, &mut iterations, "phase 2", cap)? {
        return Ok(LpSolution::without_point(LpStatus::Unbounded, iterations));
    }

    let mut x = vec![0.0; n];
    for i in 0..m {
        if t.basis[i] < n {
            x[t.basis[i]] = t.rhs(i).max(0.0);
        }
    }
    let value = p.objective.iter().zip(&x).map(|(c, v)| c * v).sum();
    let is_integral = p
        .upper
        .iter()
        .zip(&x)
        .filter(|(u, _)| **u == Some(1.0))
        .all(|(_, v)| (v - v.round()).abs() <= opts.feasibility_tol);
    Ok(LpSolution { status: LpStatus::Optimal, value: Some(value), x, is_integral, iterations })
}

/// Columns of the relaxation: every usable path of every task.
fn path_columns(scenario: &Scenario) -> (Vec<VarKey>, Vec<f64>) {
    let mut keys = Vec::new();
    let mut cost = Vec::new();
    for task in scenario.task_ids() {
        let r = scenario.users()[task.user].tasks[task.task].r;
        for ap in 0..scenario.n_aps() {
            for (ecs, server) in scenario.ecss().iter().enumerate() {
                let c = scenario.cost_unchecked(task, ap, ecs);
                if c.is_finite() && fits(r, server.cap) {
                    keys.push(VarKey::X { task, ap, ecs });
                    cost.push(c);
                }
            }
        }
    }
    (keys, cost)
}

fn resource_rows(scenario: &Scenario, keys: &[VarKey]) -> Vec<Row> {
    let mut ecs_rows: Vec<Row> = scenario
        .ecss()
        .iter()
        .enumerate()
        .map(|(n, s)| Row { name: format!("ecs{n}"), coeffs: Vec::new(), sense: Sense::Le, rhs: s.cap })
        .collect();
    let mut ap_rows: Vec<Row> = scenario
        .aps()
        .iter()
        .enumerate()
        .map(|(m, a)| Row { name: format!("ap{m}"), coeffs: Vec::new(), sense: Sense::Le, rhs: a.q as f64 })
        .collect();
    let ids: Vec<TaskId> = scenario.task_ids().collect();
    let mut task_rows: Vec<Row> = ids
        .iter()
        .map(|id| Row { name: format!("task_{}_{}", id.user, id.task), coeffs: Vec::new(), sense: Sense::Eq, rhs: 1.0 })
        .collect();
    let mut flat = 0;
    for (col, key) in keys.iter().enumerate() {
        let VarKey::X { task, ap, ecs } = *key else { continue };
        while ids[flat] != task {
            flat += 1;
        }
        ecs_rows[ecs].coeffs.push((col, scenario.users()[task.user].tasks[task.task].r));
        ap_rows[ap].coeffs.push((col, 1.0));
        task_rows[flat].coeffs.push((col, 1.0));
    }
    ecs_rows.into_iter().chain(ap_rows).chain(task_rows).collect()
}

/// Total-cost relaxation.
pub fn build_op1_lp(scenario: &Scenario) -> LpProblem {
    let (keys, cost) = path_columns(scenario);
    let rows = resource_rows(scenario, &keys);
    LpProblem { upper: vec![Some(1.0); keys.len()], objective: cost, rows, keys }
}

/// Min-max relaxation: minimize `y` with `Σ_i π·x ≤ y·|S_i|/η_i` per user.
pub fn build_op3_lp(scenario: &Scenario) -> LpProblem {
    let (mut keys, cost) = path_columns(scenario);
    let mut rows = resource_rows(scenario, &keys);
    let y = keys.len();
    let mut user_rows: Vec<Row> = (0..scenario.n_users())
        .map(|i| Row { name: format!("user{i}"), coeffs: Vec::new(), sense: Sense::Le, rhs: 0.0 })
        .collect();
    for (col, key) in keys.iter().enumerate() {
        if let VarKey::X { task, .. } = key {
            user_rows[task.user].coeffs.push((col, cost[col]));
        }
    }
    for (row, u) in user_rows.iter_mut().zip(scenario.users()) {
        row.coeffs.push((y, -(u.tasks.len() as f64) / u.eta));
    }
    user_rows.retain(|r| r.coeffs.len() > 1);
    rows.extend(user_rows);
    keys.push(VarKey::Y);
    let mut objective = vec![0.0; y + 1];
    objective[y] = 1.0;
    let mut upper = vec![Some(1.0); y];
    upper.push(None);
    LpProblem { objective, upper, rows, keys }
}

/// Lower bound on the total cost of any feasible assignment.
pub fn solve_elr(scenario: &Scenario) -> Result<LpSolution> {
    simplex(&build_op1_lp(scenario), &SimplexOptions::default())
}

/// Lower bound on the min-max objective of any feasible assignment.
pub fn solve_flr(scenario: &Scenario) -> Result<LpSolution> {
    simplex(&build_op3_lp(scenario), &SimplexOptions::default())
}

/// Report for a relaxation: `bound` is the LP value; cost statistics come
/// from the fractional point.
pub fn lp_report(name: &str, scenario: &Scenario, problem: &LpProblem, sol: &LpSolution) -> RunReport {
    let mut per_user = vec![0.0; scenario.n_users()];
    let mut assigned = 0.0;
    for (key, &v) in problem.keys.iter().zip(&sol.x) {
        if let VarKey::X { task, ap, ecs } = *key {
            per_user[task.user] += v * scenario.cost_unchecked(task, ap, ecs);
            assigned += v;
        }
    }
    let optimal = sol.status == LpStatus::Optimal;
    let total = scenario.total_tasks();
    let op2 = scenario
        .users()
        .iter()
        .zip(&per_user)
        .map(|(u, c)| u.eta * c / u.tasks.len() as f64)
        .fold(f64::NEG_INFINITY, f64::max);
    RunReport {
        algorithm: name.to_string(),
        seed: None,
        objective: optimal.then(|| per_user.iter().sum()),
        op2_objective: (optimal && scenario.n_users() > 0).then_some(op2),
        jain: if optimal { crate::metrics::jain_index(&per_user).ok() } else { None },
        offloading_ratio: if total == 0 { 1.0 } else { assigned / total as f64 },
        iterations: sol.iterations,
        unassigned: if optimal { 0 } else { total },
        bound: sol.value,
        lp_status: Some(sol.status),
        rounds: None,
        proposals: None,
        messages: None,
        stable: None,
        unstable_possible: false,
        assignment: None,
        per_user_costs: per_user,
    }
}

pub fn elr(scenario: &Scenario) -> Result<RunReport> {
    let p = build_op1_lp(scenario);
    let sol = simplex(&p, &SimplexOptions::default())?;
    Ok(lp_report("elr", scenario, &p, &sol))
}

pub fn flr(scenario: &Scenario) -> Result<RunReport> {
    let p = build_op3_lp(scenario);
    let sol = simplex(&p, &SimplexOptions::default())?;
    Ok(lp_report("flr", scenario, &p, &sol))
}
