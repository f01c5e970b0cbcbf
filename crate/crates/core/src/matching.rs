//! Distributed many-to-one matching between tasks and edge servers.
//!
//! Tasks propose, servers decide. A server ranks the tasks asking for it by
//! their declared offloading cost, cheapest first, and keeps the longest
//! prefix of that ranking that fits its capacity ([`ocpr_select`]). Holds are
//! tentative: a later, cheaper proposal may evict a held task, which then
//! proposes to its next-best server.
//!
//! For a fixed server a task only ever needs its cheapest AP, so its strategy
//! set has one entry per server ([`reduced_strategies`]). AP connection
//! budgets are ignored by this solver.
//!
//! When every task has the same demand the outcome is a stable matching
//! and does not depend on message order. With unequal demands the result
//! may contain blocking pairs; reports flag this with `unstable_possible`.

use std::io::Write;

use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::error::Result;
use crate::model::{fits, Assignment, Path, Scenario, TaskId};
use crate::report::RunReport;

/// A service request from a task to a server through a given AP.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Proposal {
    pub task: TaskId,
    pub ecs: usize,
    pub ap: usize,
    pub cost: f64,
    pub demand: f64,
}

/// How much a server can hold.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum Capacity {
    /// At most this many tasks (all demands equal).
    Slots(usize),
    /// Total demand must fit this amount.
    Resource(f64),
}

fn preference(a: &Proposal, b: &Proposal) -> std::cmp::Ordering {
    a.cost.total_cmp(&b.cost).then(a.task.cmp(&b.task))
}

/// Splits `asking` into accepted and rejected requests.
///
/// Requests are ranked by ascending cost, then task id. The accepted set is
/// the longest prefix of the ranking within capacity; once a request
/// overflows, it and everything ranked after it are rejected.
pub fn ocpr_select(capacity: Capacity, asking: &[Proposal]) -> (Vec<Proposal>, Vec<Proposal>) {
    let mut ranked = asking.to_vec();
    ranked.sort_by(preference);
    let cut = match capacity {
        Capacity::Slots(w) => w.min(ranked.len()),
        Capacity::Resource(cap) => {
            let mut used = 0.0;
            ranked
                .iter()
                .position(|p| {
                    used += p.demand;
                    !fits(used, cap)
                })
                .unwrap_or(ranked.len())
        }
    };
    let rejected = ranked.split_off(cut);
    (ranked, rejected)
}

/// One strategy of a task: a server and the cheapest AP to reach it.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Strategy {
    pub ecs: usize,
    pub ap: usize,
    pub cost: f64,
}

/// Per-server cheapest paths for `task`, skipping rejected servers and
/// servers whose full capacity is below the task's demand.
pub fn reduced_strategies(scenario: &Scenario, task: TaskId, rejected: &[bool]) -> Vec<Strategy> {
    let r = scenario.users()[task.user].tasks[task.task].r;
    let mut out = Vec::with_capacity(scenario.n_ecss());
    for (n, server) in scenario.ecss().iter().enumerate() {
        if rejected.get(n).copied().unwrap_or(false) || !fits(r, server.cap) {
            continue;
        }
        let mut best: Option<Strategy> = None;
        for m in 0..scenario.n_aps() {
            let cost = scenario.cost_unchecked(task, m, n);
            if cost.is_finite() && best.is_none_or(|b| cost < b.cost) {
                best = Some(Strategy { ecs: n, ap: m, cost });
            }
        }
        out.extend(best);
    }
    out
}

/// Capacity model used for every server: slots when all demands are equal.
fn capacities(scenario: &Scenario) -> (bool, Vec<Capacity>) {
    let mut demands = scenario.task_ids().map(|id| scenario.users()[id.user].tasks[id.task].r);
    let equal = match demands.next() {
        Some(r0) => demands.all(|r| r == r0).then_some(r0),
        None => Some(1.0),
    };
    match equal {
        Some(r) => (
            true,
            scenario
                .ecss()
                .iter()
                .map(|s| {
                    let mut w = (s.cap / r).floor() as usize;
                    while fits((w + 1) as f64 * r, s.cap) {
                        w += 1;
                    }
                    Capacity::Slots(w)
                })
                .collect(),
        ),
        None => (false, scenario.ecss().iter().map(|s| Capacity::Resource(s.cap)).collect()),
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum MessageKind {
    Propose,
    Reject,
}

/// One message of the matching exchange.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct TraceRecord {
    pub round: usize,
    pub kind: MessageKind,
    pub task: TaskId,
    pub ecs: usize,
    pub ap: usize,
    pub u: f64,
}

/// Writes one JSON object per line.
pub fn write_trace_jsonl<W: Write>(trace: &[TraceRecord], mut sink: W) -> Result<()> {
    for rec in trace {
        serde_json::to_writer(&mut sink, rec)?;
        sink.write_all(b"\n")?;
    }
    Ok(())
}

#[derive(Debug, Clone, Default)]
pub struct AdmaConfig {
    /// Seeds the per-round shuffle of message delivery order.
    pub seed: u64,
    /// Round in which each task (in [`Scenario::task_ids`] order) starts
    /// proposing. Everyone starts in round 0 when `None`.
    pub arrivals: Option<Vec<usize>>,
    pub record_trace: bool,
}

#[derive(Debug, Clone)]
pub struct AdmaOutcome {
    pub assignment: Assignment,
    pub report: RunReport,
    pub trace: Vec<TraceRecord>,
    /// Proposals sent by each task, in order, as `(round, cost)`.
    pub proposal_costs: Vec<Vec<(usize, f64)>>,
    /// Largest number of tasks held by each server after any of its decisions.
    pub peak_held: Vec<usize>,
}

/// Runs the matching with everyone arriving at once and delivery seed 0.
pub fn adma(scenario: &Scenario) -> (Assignment, RunReport) {
    let out = adma_with(scenario, &AdmaConfig::default());
    (out.assignment, out.report)
}

pub fn adma_with(scenario: &Scenario, config: &AdmaConfig) -> AdmaOutcome {
    let ids: Vec<TaskId> = scenario.task_ids().collect();
    let n_ecss = scenario.n_ecss();
    let (equal_r, caps) = capacities(scenario);
    let arrival = |k: usize| config.arrivals.as_ref().and_then(|a| a.get(k).copied()).unwrap_or(0);
    let last_arrival = (0..ids.len()).map(arrival).max().unwrap_or(0);

    let mut rng = ChaCha8Rng::seed_from_u64(config.seed);
    let mut rejected = vec![vec![false; n_ecss]; ids.len()];
    let mut matched: Vec<Option<usize>> = vec![None; ids.len()];
    let mut exhausted = vec![false; ids.len()];
    let mut held: Vec<Vec<(usize, Proposal)>> = vec![Vec::new(); n_ecss];
    let mut trace = Vec::new();
    let mut proposal_costs = vec![Vec::new(); ids.len()];
    let mut peak_held = vec![0; n_ecss];
    let (mut proposals, mut rejections, mut rounds) = (0usize, 0usize, 0usize);

    let mut round = 0usize;
    loop {
        let mut outgoing: Vec<(usize, Proposal)> = Vec::new();
        for (k, &id) in ids.iter().enumerate() {
            if arrival(k) > round || matched[k].is_some() || exhausted[k] {
                continue;
            }
            let best = reduced_strategies(scenario, id, &rejected[k])
                .into_iter()
                .reduce(|a, b| if b.cost < a.cost { b } else { a });
            match best {
                Some(s) => outgoing.push((
                    k,
                    Proposal {
                        task: id,
                        ecs: s.ecs,
                        ap: s.ap,
                        cost: s.cost,
                        demand: scenario.users()[id.user].tasks[id.task].r,
                    },
                )),
                None => exhausted[k] = true,
            }
        }
        if outgoing.is_empty() {
            if round < last_arrival {
                round += 1;
                continue;
            }
            break;
        }
        rounds += 1;
        outgoing.shuffle(&mut rng);
        for (k, p) in outgoing {
            proposals += 1;
            proposal_costs[k].push((round, p.cost));
            if config.record_trace {
                trace.push(TraceRecord { round, kind: MessageKind::Propose, task: p.task, ecs: p.ecs, ap: p.ap, u: p.cost });
            }
            let n = p.ecs;
            let mut asking: Vec<Proposal> = held[n].iter().map(|(_, q)| *q).collect();
            asking.push(p);
            let (accepted, refused) = ocpr_select(caps[n], &asking);
            let index_of = |q: &Proposal| if q.task == p.task { k } else { held[n].iter().find(|(_, h)| h.task == q.task).map(|(i, _)| *i).expect("held") };
            let accepted: Vec<(usize, Proposal)> = accepted.iter().map(|q| (index_of(q), *q)).collect();
            let refused: Vec<(usize, Proposal)> = refused.iter().map(|q| (index_of(q), *q)).collect();
            for &(i, _) in &accepted {
                matched[i] = Some(n);
            }
            for &(i, q) in &refused {
                matched[i] = None;
                rejected[i][n] = true;
                rejections += 1;
                if config.record_trace {
                    trace.push(TraceRecord { round, kind: MessageKind::Reject, task: q.task, ecs: n, ap: q.ap, u: q.cost });
                }
            }
            held[n] = accepted;
            peak_held[n] = peak_held[n].max(held[n].len());
        }
        round += 1;
    }

    let mut assignment = Assignment::empty(scenario);
    for server in &held {
        for (_, p) in server {
            assignment.set(p.task, Some(Path::new(p.ap, p.ecs)));
        }
    }
    let mut report = RunReport::for_assignment("adma", scenario, &assignment, rounds);
    report.rounds = Some(rounds);
    report.proposals = Some(proposals);
    report.messages = Some(proposals + rejections);
    report.stable = Some(is_stable(scenario, &assignment));
    report.unstable_possible = !equal_r;
    AdmaOutcome { assignment, report, trace, proposal_costs, peak_held }
}

/// Task-server pairs that would both rather be matched to each other.
///
/// `(s, c)` blocks when `s` has a strictly cheaper path to `c` than its
/// current one (unassigned tasks prefer any reachable server) and either `c`
/// has room for `s`, or `c` ranks `s` above the costliest task it holds.
/// Room is counted in slots when all demands are equal and in resource units
/// otherwise.
pub fn find_blocking_pairs(scenario: &Scenario, assignment: &Assignment) -> Vec<(TaskId, usize)> {
    let (_, caps) = capacities(scenario);
    let n_ecss = scenario.n_ecss();
    let mut held_demand = vec![0.0; n_ecss];
    let mut held_count = vec![0usize; n_ecss];
    let mut worst: Vec<Option<(f64, TaskId)>> = vec![None; n_ecss];
    let mut current = Vec::new();
    for id in scenario.task_ids() {
        let path = assignment.get(id).filter(|p| p.ap < scenario.n_aps() && p.ecs < n_ecss);
        let cost = path.map_or(f64::INFINITY, |p| scenario.cost_unchecked(id, p.ap, p.ecs));
        if let Some(p) = path {
            held_demand[p.ecs] += scenario.users()[id.user].tasks[id.task].r;
            held_count[p.ecs] += 1;
            let key = (cost, id);
            if worst[p.ecs].is_none_or(|w| w.0.total_cmp(&cost).then(w.1.cmp(&id)).is_lt()) {
                worst[p.ecs] = Some(key);
            }
        }
        current.push((id, path.map(|p| p.ecs), cost));
    }
    let mut out = Vec::new();
    for (id, matched_to, cost_now) in current {
        let r = scenario.users()[id.user].tasks[id.task].r;
        let none_rejected = vec![false; n_ecss];
        for s in reduced_strategies(scenario, id, &none_rejected) {
            let c = s.ecs;
            if Some(c) == matched_to || !(s.cost < cost_now) {
                continue;
            }
            let room = match caps[c] {
                Capacity::Slots(w) => held_count[c] < w,
                Capacity::Resource(cap) => fits(held_demand[c] + r, cap),
            };
            let outranks = worst[c].is_some_and(|(wc, wid)| s.cost.total_cmp(&wc).then(id.cmp(&wid)).is_lt());
            if room || outranks {
                out.push((id, c));
            }
        }
    }
    out
}

pub fn is_stable(scenario: &Scenario, assignment: &Assignment) -> bool {
    find_blocking_pairs(scenario, assignment).is_empty()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::greedy::cga;
    use crate::model::{validate_assignment, AccessPoint, EdgeServer, MobileUser, Task};
    use crate::scenario::{fixtures, generate, CapacityPolicy, GenParams};

    fn ask(k: usize, cost: f64, demand: f64) -> Proposal {
        Proposal { task: TaskId::new(k, 0), ecs: 0, ap: 0, cost, demand }
    }

    fn tasks_of(v: &[Proposal]) -> Vec<usize> {
        let mut out: Vec<usize> = v.iter().map(|p| p.task.user).collect();
        out.sort_unstable();
        out
    }

    #[test]
    fn ocpr_table_values_at_second_server() {
        let asking = [ask(2, 2.0, 2.0), ask(3, 3.0, 10.0), ask(4, 4.0, 3.0), ask(5, 5.0, 1.0)];
        let (acc, rej) = ocpr_select(Capacity::Resource(12.0), &asking);
        assert_eq!(tasks_of(&acc), vec![2, 3]);
        assert_eq!(tasks_of(&rej), vec![4, 5]);
    }

    #[test]
    fn ocpr_table_values_at_first_server() {
        let (acc, rej) = ocpr_select(Capacity::Resource(10.0), &[ask(3, 3.0, 10.0), ask(1, 1.0, 1.0)]);
        assert_eq!(tasks_of(&acc), vec![1]);
        assert_eq!(tasks_of(&rej), vec![3]);
    }

    #[test]
    fn ocpr_under_capacity_accepts_all() {
        let asking = [ask(0, 5.0, 1.0), ask(1, 1.0, 1.0)];
        let (acc, rej) = ocpr_select(Capacity::Slots(2), &asking);
        assert_eq!(acc.len(), 2);
        assert!(rej.is_empty());
        let (acc, rej) = ocpr_select(Capacity::Slots(1), &asking);
        assert_eq!(tasks_of(&acc), vec![1]);
        assert_eq!(tasks_of(&rej), vec![0]);
    }

    #[test]
    fn ocpr_ties_prefer_lower_id() {
        let (acc, _) = ocpr_select(Capacity::Slots(1), &[ask(3, 1.0, 1.0), ask(2, 1.0, 1.0)]);
        assert_eq!(acc[0].task.user, 2);
    }

    fn three_aps_two_servers() -> Scenario {
        let task = Task { r: 1.0, t: vec![1.0, 2.0, 0.5], e: vec![1.0, 0.0, 2.0] };
        Scenario::new(
            vec![MobileUser { alpha: 1.0, beta: 2.0, gamma: 1.0, eta: 1.0, tasks: vec![task] }],
            vec![AccessPoint { q: 1 }; 3],
            vec![EdgeServer { cap: 2.0 }, EdgeServer { cap: 2.0 }],
            vec![vec![4.0, 1.0], vec![3.0, 3.5], vec![1.0, 2.0]],
        )
        .unwrap()
    }

    #[test]
    fn strategies_one_per_server_and_minimal() {
        let s = three_aps_two_servers();
        let id = TaskId::new(0, 0);
        let st = reduced_strategies(&s, id, &[false, false]);
        assert_eq!(st.len(), 2);
        for entry in &st {
            let brute = (0..3).map(|m| s.cost_unchecked(id, m, entry.ecs)).fold(f64::INFINITY, f64::min);
            assert_eq!(entry.cost, brute);
        }
        assert!(reduced_strategies(&s, id, &[true, true]).is_empty());
        assert_eq!(reduced_strategies(&s, id, &[true, false]).len(), 1);
    }

    #[test]
    fn example3_narrated_sequence() {
        let s = fixtures::example3();
        let cfg = AdmaConfig { seed: 0, arrivals: Some(fixtures::example3_arrivals()), record_trace: true };
        let out = adma_with(&s, &cfg);
        let on = out.assignment.tasks_on_ecs(2);
        let users = |v: &Vec<TaskId>| v.iter().map(|t| t.user).collect::<Vec<_>>();
        assert_eq!(users(&on[0]), vec![0]);
        assert_eq!(users(&on[1]), vec![1, 5]);
        assert_eq!(out.report.stable, Some(false));
        assert!(out.report.unstable_possible);
        let bp = find_blocking_pairs(&s, &out.assignment);
        assert!(bp.contains(&(TaskId::new(3, 0), 1)));
        assert!(bp.contains(&(TaskId::new(4, 0), 1)));
        assert!(!is_stable(&s, &out.assignment));
        assert!(out.trace.iter().any(|t| t.kind == MessageKind::Reject && t.task == TaskId::new(2, 0) && t.ecs == 0));
    }

    #[test]
    fn single_task_is_stable() {
        let s = three_aps_two_servers();
        let (a, r) = adma(&s);
        assert!(a.is_complete());
        assert_eq!(r.stable, Some(true));
        assert!(find_blocking_pairs(&s, &a).is_empty());
    }

    #[test]
    fn ample_capacity_matches_greedy() {
        let mut p = GenParams::small_system(3.0);
        p.ecs_capacity = CapacityPolicy::Fixed { value: 1000.0 };
        p.ap_capacity = CapacityPolicy::Fixed { value: 1000.0 };
        for seed in 0..40 {
            let s = generate(&p, seed).unwrap();
            let (a, _) = adma(&s);
            let (b, _) = cga(&s);
            assert_eq!(a, b, "seed {seed}");
        }
    }

    #[test]
    fn equal_demand_runs_are_stable_and_bounded() {
        let mut p = GenParams::small_system(4.0);
        p.equal_r = true;
        p.ecs_capacity = CapacityPolicy::Ample { multiplier: 1.0 };
        for seed in 0..100 {
            let s = generate(&p, seed).unwrap();
            let out = adma_with(&s, &AdmaConfig { seed, ..Default::default() });
            assert!(find_blocking_pairs(&s, &out.assignment).is_empty(), "seed {seed}");
            let bound = s.total_tasks() * s.n_ecss();
            assert!(out.report.proposals.unwrap() <= bound);
            assert!(out.report.rounds.unwrap() <= bound);
            for costs in &out.proposal_costs {
                assert!(costs.windows(2).all(|w| w[0].1 <= w[1].1));
            }
            let caps = capacities(&s).1;
            for (n, &peak) in out.peak_held.iter().enumerate() {
                let Capacity::Slots(w) = caps[n] else { panic!("expected slots") };
                assert!(peak <= w);
            }
            let v = validate_assignment(&s, &out.assignment);
            assert!(v.iter().all(|v| !matches!(v, crate::model::Violation::EcsCapacity { .. })));
        }
    }

    #[test]
    fn trace_is_json_lines() {
        let s = fixtures::example3();
        let cfg = AdmaConfig { seed: 0, arrivals: Some(fixtures::example3_arrivals()), record_trace: true };
        let out = adma_with(&s, &cfg);
        let mut buf = Vec::new();
        write_trace_jsonl(&out.trace, &mut buf).unwrap();
        let text = String::from_utf8(buf).unwrap();
        assert_eq!(text.lines().count(), out.trace.len());
        let first: serde_json::Value = serde_json::from_str(text.lines().next().unwrap()).unwrap();
        assert_eq!(first["kind"], "propose");
        assert!(first.get("u").is_some());
    }
}
