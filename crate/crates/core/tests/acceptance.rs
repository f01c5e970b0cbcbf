//! Acceptance suite. Prints one PASS/FAIL line per criterion and exits
//! nonzero if any fails. Tolerances and batch sizes are pinned below.

use std::process::ExitCode;
use std::time::{Duration, Instant};

use rayon::prelude::*;

use offload_core::experiment::{run_sweep, Algorithm, RunOptions, SweepResult, SweepSpec, SweptParam};
use offload_core::fairness::{fga_with, FgaConfig};
use offload_core::greedy::{cga, mga};
use offload_core::matching::{adma_with, find_blocking_pairs, is_stable, AdmaConfig};
use offload_core::metrics::{jain_index, AlgoSummary};
use offload_core::model::{necessary_feasibility, op2_objective, validate_assignment, TaskId};
use offload_core::oracle::{brute_force_op1, brute_force_op2, OracleBudget};
use offload_core::relaxation::{solve_elr, solve_flr, LpStatus};
use offload_core::scenario::{fixtures, generate, CapacityPolicy, GenParams, Interval};

/// Slack allowed when comparing a bound against an objective.
const BOUND_SLACK: f64 = 1e-7;
/// Exact-value fixtures.
const FIXTURE_TOL: f64 = 1e-12;

const SANDWICH_INSTANCES: usize = 500;
const STABILITY_INSTANCES: usize = 500;
const ORDER_SEEDS: u64 = 5;
const SMALL_SYSTEM_SEEDS: usize = 1000;
const EQUAL_R_SEEDS: usize = 200;
const TASK_SWEEP_SEEDS: usize = 200;
const STARVED_SEEDS: usize = 300;
/// Relative ADMA/CGA gap allowed at the lightest load.
const LIGHT_LOAD_GAP: f64 = 0.02;

struct Outcome {
    pass: bool,
    detail: String,
}

fn outcome(pass: bool, detail: impl Into<String>) -> Outcome {
    Outcome { pass, detail: detail.into() }
}

fn check(name: &str, limit: Duration, f: impl FnOnce() -> Outcome) -> bool {
    let start = Instant::now();
    let out = f();
    let took = start.elapsed();
    let in_time = took <= limit;
    let pass = out.pass && in_time;
    println!(
        "{} {name}: {} [{:.2}s, limit {}s{}]",
        if pass { "PASS" } else { "FAIL" },
        out.detail,
        took.as_secs_f64(),
        limit.as_secs(),
        if in_time { "" } else { ", too slow" }
    );
    pass
}

/// Number of strict decreases along a curve that should be non-decreasing.
fn inversions(series: &[(f64, f64)]) -> usize {
    series.windows(2).filter(|w| w[1].1 < w[0].1).count()
}

fn fmt_series(series: &[(f64, f64)]) -> String {
    series.iter().map(|(x, y)| format!("{x}:{y:.4}")).collect::<Vec<_>>().join(" ")
}

fn sweep(algorithms: Vec<Algorithm>, param: SweptParam, values: Vec<f64>, seeds: usize, base: GenParams) -> SweepResult {
    let spec = SweepSpec {
        algorithms,
        param,
        values,
        seeds,
        first_seed: 0,
        base,
        r_half_width: 1.0,
        options: RunOptions::default(),
    };
    run_sweep(&spec).expect("sweep runs")
}

fn grid() -> Vec<f64> {
    (2..=10).map(f64::from).collect()
}

fn fixture_infeasible() -> Outcome {
    let s = fixtures::example1();
    let elr = solve_elr(&s).unwrap().status;
    let o1 = brute_force_op1(&s, OracleBudget::default()).unwrap();
    let o2 = brute_force_op2(&s, OracleBudget::default()).unwrap();
    let aggregate = necessary_feasibility(&s).holds;
    outcome(
        elr == LpStatus::Infeasible && o1.value().is_none() && o2.value().is_none() && aggregate,
        format!("elr={elr:?} oracle1={:?} oracle2={:?} aggregate_test={aggregate}", o1.value(), o2.value()),
    )
}

fn fixture_greedy_gap() -> Outcome {
    let s = fixtures::example2();
    let (_, r) = cga(&s);
    let cga_cost = r.objective.unwrap_or(f64::NAN);
    let opt = brute_force_op1(&s, OracleBudget::default()).unwrap();
    let opt_cost = opt.value().unwrap_or(f64::NAN);
    let target = opt.assignment().cloned();
    // Resource exponent fixed at 3; cost exponent swept.
    let zeta = 3.0;
    let eps_grid = [1.0, 1.5, 2.0, 2.5, 3.0, 3.5, 4.0, 4.5, 5.0];
    let matching: Vec<f64> = eps_grid
        .iter()
        .copied()
        .filter(|&eps| Some(mga(&s, eps, zeta).unwrap().0) == target)
        .collect();
    outcome(
        (cga_cost - 7.0).abs() < FIXTURE_TOL && (opt_cost - 6.5).abs() < FIXTURE_TOL && !matching.is_empty(),
        format!("cga={cga_cost} oracle={opt_cost} mga(zeta=3) matches oracle at eps={matching:?}"),
    )
}

fn fixture_unstable_matching() -> Outcome {
    let s = fixtures::example3();
    let cfg = AdmaConfig { seed: 0, arrivals: Some(fixtures::example3_arrivals()), record_trace: false };
    let out = adma_with(&s, &cfg);
    let held: Vec<Vec<usize>> = out
        .assignment
        .tasks_on_ecs(2)
        .iter()
        .map(|v| v.iter().map(|t| t.user + 1).collect())
        .collect();
    let blocking = find_blocking_pairs(&s, &out.assignment);
    let has = |user: usize, ecs: usize| blocking.contains(&(TaskId::new(user, 0), ecs));
    let stable = is_stable(&s, &out.assignment);
    outcome(
        held == vec![vec![1], vec![2, 6]] && !stable && has(3, 1) && has(4, 1),
        format!(
            "c1={:?} c2={:?} stable={stable} blocking={:?}",
            held[0],
            held[1],
            blocking.iter().map(|(t, c)| format!("(s{},c{})", t.user + 1, c + 1)).collect::<Vec<_>>()
        ),
    )
}

fn sandwich() -> Outcome {
    let mut p = GenParams::small_system(4.0);
    p.n_users = 3;
    p.n_aps = 2;
    p.n_ecss = 2;
    p.tasks_per_user = (1, 2);
    p.ecs_capacity = CapacityPolicy::Ample { multiplier: 1.1 };
    p.ap_capacity = CapacityPolicy::Ample { multiplier: 1.0 };
    let budget = OracleBudget::default();
    let mut feasible = 0;
    let mut compared = [0usize; 5];
    let mut failures = Vec::new();
    let mut seed = 0u64;
    while feasible < SANDWICH_INSTANCES {
        let s = generate(&p, seed).unwrap();
        seed += 1;
        let Some(opt1) = brute_force_op1(&s, budget).unwrap().value() else { continue };
        feasible += 1;
        let opt2 = brute_force_op2(&s, budget).unwrap().value().expect("same feasible set");
        let elr = solve_elr(&s).unwrap();
        let flr = solve_flr(&s).unwrap();
        if elr.value.is_none_or(|v| v > opt1 + BOUND_SLACK) {
            failures.push(format!("seed {}: elr {:?} > opt {opt1}", seed - 1, elr.value));
        }
        if flr.value.is_none_or(|v| v > opt2 + BOUND_SLACK) {
            failures.push(format!("seed {}: flr {:?} > opt2 {opt2}", seed - 1, flr.value));
        }
        let (fa, fr) = fga_with(&s, &FgaConfig { seed, y: None }).unwrap();
        let adma = adma_with(&s, &AdmaConfig { seed, ..Default::default() });
        let adma_cost = (adma.assignment.is_complete() && validate_assignment(&s, &adma.assignment).is_empty())
            .then_some(adma.report.objective)
            .flatten();
        let heuristics = [
            ("cga", cga(&s).1.objective),
            ("mga", mga(&s, 1.5, 1.0).unwrap().1.objective),
            ("fga", fr.objective),
            ("adma", adma_cost),
        ];
        for (k, (name, cost)) in heuristics.iter().enumerate() {
            if let Some(c) = cost {
                compared[k] += 1;
                if *c < opt1 - BOUND_SLACK {
                    failures.push(format!("seed {}: {name} {c} < opt {opt1}", seed - 1));
                }
            }
        }
        if fa.is_complete() {
            compared[4] += 1;
            let v = op2_objective(&s, &fa).unwrap();
            if v < opt2 - BOUND_SLACK {
                failures.push(format!("seed {}: fga op2 {v} < opt2 {opt2}", seed - 1));
            }
        }
    }
    outcome(
        failures.is_empty(),
        format!(
            "{feasible} feasible of {seed} generated; full runs compared cga/mga/fga/adma/fga-op2 = {compared:?}; slack {BOUND_SLACK}; {}",
            failures.first().map_or("no violations".into(), |f| format!("first violation {f}"))
        ),
    )
}

fn stability() -> Outcome {
    let failures: Vec<String> = (0..STABILITY_INSTANCES as u64)
        .into_par_iter()
        .filter_map(|seed| {
            let mut p = GenParams::small_system(2.0 + (seed % 9) as f64);
            p.n_ecss = 1 + (seed % 4) as usize;
            p.n_aps = 1 + ((seed / 4) % 8) as usize;
            p.n_users = 1 + ((seed / 32) % 10) as usize;
            p.tasks_per_user = (1, 4);
            p.equal_r = true;
            p.ecs_capacity = CapacityPolicy::Ample { multiplier: 0.4 + 0.1 * (seed % 10) as f64 };
            let s = generate(&p, seed).unwrap();
            let bound = s.total_tasks() * s.n_ecss();
            let first = adma_with(&s, &AdmaConfig { seed: 0, ..Default::default() });
            if first.report.rounds.unwrap() > bound {
                return Some(format!("seed {seed}: {} rounds > {bound}", first.report.rounds.unwrap()));
            }
            if !find_blocking_pairs(&s, &first.assignment).is_empty() {
                return Some(format!("seed {seed}: blocking pair"));
            }
            for order in 1..ORDER_SEEDS {
                if adma_with(&s, &AdmaConfig { seed: order, ..Default::default() }).assignment != first.assignment {
                    return Some(format!("seed {seed}: outcome depends on message order"));
                }
            }
            None
        })
        .collect();
    outcome(
        failures.is_empty(),
        format!(
            "{STABILITY_INSTANCES} equal-demand instances x {ORDER_SEEDS} delivery orders; {}",
            failures.first().cloned().unwrap_or("all stable, order-independent, within round bound".into())
        ),
    )
}

fn small_system_trends() -> Outcome {
    let mut base = GenParams::small_system(4.0);
    base.ecs_capacity = CapacityPolicy::Fixed { value: 100.0 };
    let algos = vec![Algorithm::Cga, Algorithm::Fga, Algorithm::Elr, Algorithm::Flr];
    let res = sweep(algos.clone(), SweptParam::MeanR, grid(), SMALL_SYSTEM_SEEDS, base);
    let cost = |a| res.series(a, |s: &AlgoSummary| s.mean_cost);
    let jain = |a| res.series(a, |s: &AlgoSummary| s.mean_jain);
    let mut problems = Vec::new();
    for &a in &algos {
        let inv = inversions(&cost(a));
        if inv > 1 {
            problems.push(format!("{a} cost has {inv} inversions: {}", fmt_series(&cost(a))));
        }
    }
    let (elr, cg, fg) = (cost(Algorithm::Elr), cost(Algorithm::Cga), cost(Algorithm::Fga));
    for k in 0..elr.len() {
        if !(elr[k].1 <= cg[k].1 && cg[k].1 <= fg[k].1) {
            problems.push(format!("order broken at r={}: elr {} cga {} fga {}", elr[k].0, elr[k].1, cg[k].1, fg[k].1));
        }
    }
    let (jc, jf) = (jain(Algorithm::Cga), jain(Algorithm::Fga));
    for k in 0..jc.len() {
        if jf[k].1 < jc[k].1 {
            problems.push(format!("jain fga {} < cga {} at r={}", jf[k].1, jc[k].1, jc[k].0));
        }
    }
    outcome(
        problems.is_empty(),
        format!(
            "{SMALL_SYSTEM_SEEDS} seeds/point; cost cga {} | fga {} | elr {} | flr {}; jain cga {} | fga {}{}",
            fmt_series(&cg),
            fmt_series(&fg),
            fmt_series(&elr),
            fmt_series(&cost(Algorithm::Flr)),
            fmt_series(&jc),
            fmt_series(&jf),
            problems.first().map_or(String::new(), |p| format!("; {p}"))
        ),
    )
}

fn equal_demand_trend() -> Outcome {
    let mut base = GenParams::large_system(4.0, 3);
    base.equal_r = true;
    base.ap_capacity = CapacityPolicy::Fixed { value: 60.0 };
    base.ecs_capacity = CapacityPolicy::Fixed { value: 200.0 };
    let res = sweep(vec![Algorithm::Cga, Algorithm::Adma], SweptParam::MeanR, grid(), EQUAL_R_SEEDS, base);
    let c = res.series(Algorithm::Cga, |s| s.mean_cost);
    let a = res.series(Algorithm::Adma, |s| s.mean_cost);
    let ordered = c.iter().zip(&a).all(|(c, a)| a.1 >= c.1 - BOUND_SLACK);
    let gap = (a[0].1 - c[0].1) / c[0].1;
    outcome(
        ordered && gap < LIGHT_LOAD_GAP,
        format!(
            "{EQUAL_R_SEEDS} seeds/point; cga {} | adma {}; relative gap at lightest load {gap:.2e} (limit {LIGHT_LOAD_GAP})",
            fmt_series(&c),
            fmt_series(&a)
        ),
    )
}

fn tasks_per_user_fairness() -> Outcome {
    let mut base = GenParams::large_system(4.0, 2);
    base.ecs_capacity = CapacityPolicy::Fixed { value: 250.0 };
    base.ap_capacity = CapacityPolicy::Fixed { value: 40.0 };
    let res = sweep(vec![Algorithm::Cga, Algorithm::Fga], SweptParam::TasksPerUser, grid(), TASK_SWEEP_SEEDS, base);
    let jf = res.series(Algorithm::Fga, |s| s.mean_jain);
    let inv = inversions(&jf);
    outcome(
        inv <= 1,
        format!(
            "{TASK_SWEEP_SEEDS} seeds/point; jain fga {} ({inv} inversions); jain cga {}",
            fmt_series(&jf),
            fmt_series(&res.series(Algorithm::Cga, |s| s.mean_jain))
        ),
    )
}

fn starved_ratio() -> Outcome {
    // Demands in [4, 8] against servers of 30, so packing varies by instance.
    let mut base = GenParams::large_system(6.0, 5);
    base.r = Interval::around(6.0, 2.0);
    base.ecs_capacity = CapacityPolicy::Fixed { value: 30.0 };
    base.ap_capacity = CapacityPolicy::Fixed { value: 100.0 };
    let users: Vec<f64> = (1..=8).map(f64::from).collect();
    let res = sweep(vec![Algorithm::Cga, Algorithm::Fga], SweptParam::NUsers, users, STARVED_SEEDS, base);
    let rc = res.series(Algorithm::Cga, |s| s.mean_ratio);
    let rf = res.series(Algorithm::Fga, |s| s.mean_ratio);
    let monotone = |v: &[(f64, f64)]| v.windows(2).all(|w| w[1].1 <= w[0].1 + 1e-12);
    let mean = |v: &[(f64, f64)]| v.iter().map(|p| p.1).sum::<f64>() / v.len() as f64;
    outcome(
        monotone(&rc) && monotone(&rf) && mean(&rc) >= mean(&rf),
        format!(
            "{STARVED_SEEDS} seeds/point; ratio cga {} (mean {:.4}) | fga {} (mean {:.4})",
            fmt_series(&rc),
            mean(&rc),
            fmt_series(&rf),
            mean(&rf)
        ),
    )
}

fn unit_properties() -> Outcome {
    let mut problems = Vec::new();
    // Jain identities.
    let j_equal = jain_index(&[2.5; 7]).unwrap();
    let j_spike = jain_index(&[0.0, 0.0, 4.0, 0.0]).unwrap();
    let v = [1.0, 3.0, 4.5, 0.2];
    let scaled: Vec<f64> = v.iter().map(|x| x * 37.0).collect();
    if (j_equal - 1.0).abs() > 1e-12 || (j_spike - 0.25).abs() > 1e-12 {
        problems.push(format!("jain identities {j_equal} {j_spike}"));
    }
    if (jain_index(&v).unwrap() - jain_index(&scaled).unwrap()).abs() > 1e-12 {
        problems.push("jain not scale invariant".into());
    }
    // Integral relaxation is optimal; greedy iteration caps.
    let mut p = GenParams::small_system(4.0);
    p.n_users = 3;
    p.n_aps = 2;
    p.tasks_per_user = (1, 2);
    let mut integral = 0;
    for seed in 0..300 {
        let s = generate(&p, seed).unwrap();
        let elr = solve_elr(&s).unwrap();
        if elr.is_integral {
            integral += 1;
            let opt = brute_force_op1(&s, OracleBudget::default()).unwrap().value();
            if opt.is_none_or(|o| (o - elr.value.unwrap()).abs() > BOUND_SLACK) {
                problems.push(format!("seed {seed}: integral elr {:?} vs oracle {opt:?}", elr.value));
            }
        }
        let big = generate(&GenParams::small_system(2.0 + (seed % 9) as f64), seed).unwrap();
        let cap = big.total_tasks();
        if cga(&big).1.iterations > cap || fga_with(&big, &FgaConfig { seed, y: None }).unwrap().1.iterations > cap {
            problems.push(format!("seed {seed}: iteration cap exceeded"));
        }
    }
    // Identical sweeps give identical bytes.
    let spec = SweepSpec {
        algorithms: vec![Algorithm::Cga, Algorithm::Mga, Algorithm::Fga, Algorithm::Adma, Algorithm::Elr, Algorithm::Flr],
        param: SweptParam::MeanR,
        values: vec![2.0, 5.0, 9.0],
        seeds: 20,
        first_seed: 7,
        base: GenParams::small_system(4.0),
        r_half_width: 1.0,
        options: RunOptions::default(),
    };
    let a = run_sweep(&spec).unwrap().to_csv();
    let b = run_sweep(&spec).unwrap().to_csv();
    if a != b {
        problems.push("sweep csv differs between identical runs".into());
    }
    outcome(
        problems.is_empty(),
        format!(
            "jain(equal)={j_equal} jain(spike of 4)={j_spike}; {integral} integral relaxations matched the oracle; csv bytes identical={}{}",
            a == b,
            problems.first().map_or(String::new(), |p| format!("; {p}"))
        ),
    )
}

fn main() -> ExitCode {
    let secs = Duration::from_secs;
    let results = [
        check("fixture-infeasible-despite-aggregate-test", secs(1), fixture_infeasible),
        check("fixture-greedy-gap", secs(1), fixture_greedy_gap),
        check("fixture-unstable-matching", secs(1), fixture_unstable_matching),
        check("bound-sandwich", secs(120), sandwich),
        check("equal-demand-stability", secs(600), stability),
        check("small-system-cost-and-fairness-trends", secs(600), small_system_trends),
        check("equal-demand-matching-vs-greedy", secs(600), equal_demand_trend),
        check("fairness-vs-tasks-per-user", secs(600), tasks_per_user_fairness),
        check("starved-offloading-ratio", secs(300), starved_ratio),
        check("unit-properties", secs(60), unit_properties),
    ];
    let failed = results.iter().filter(|&&ok| !ok).count();
    println!("acceptance: {} passed, {failed} failed", results.len() - failed);
    if failed == 0 {
        ExitCode::SUCCESS
    } else {
        ExitCode::FAILURE
    }
}
