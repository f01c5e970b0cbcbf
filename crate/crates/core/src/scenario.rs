//! Seeded scenario generation and JSON persistence.
//!
//! All random draws are uniform on closed intervals. Generation is a pure
//! function of `(GenParams, seed)`: it uses ChaCha8 seeded from the 64-bit
//! seed, with task data on stream 0 and access costs on stream 1.

use std::io::{Read, Write};

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::model::{AccessPoint, EdgeServer, MobileUser, Scenario, Task};

/// Identifier of the generator written into scenario metadata.
pub const RNG_ID: &str = "chacha8/rand_chacha-0.3/seed_from_u64/streams-v1";
pub const SCHEMA_VERSION: u32 = 1;

/// Closed real interval `[lo, hi]`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Interval {
    pub lo: f64,
    pub hi: f64,
}

impl Interval {
    pub const fn new(lo: f64, hi: f64) -> Self {
        Self { lo, hi }
    }

    pub const fn constant(v: f64) -> Self {
        Self { lo: v, hi: v }
    }

    /// `[mean - half_width, mean + half_width]`, clipped below at `mean / 2`.
    pub fn around(mean: f64, half_width: f64) -> Self {
        Self { lo: (mean - half_width).max(mean / 2.0), hi: mean + half_width }
    }

    fn sample(&self, rng: &mut ChaCha8Rng) -> f64 {
        if self.lo == self.hi {
            self.lo
        } else {
            rng.gen_range(self.lo..=self.hi)
        }
    }

    fn check(&self, name: &str) -> Result<()> {
        if !(self.lo.is_finite() && self.hi.is_finite() && self.lo >= 0.0 && self.lo <= self.hi) {
            return Err(Error::InvalidParameter(format!(
                "{name} = [{}, {}] must satisfy 0 <= lo <= hi",
                self.lo, self.hi
            )));
        }
        Ok(())
    }
}

/// How AP connection budgets or ECS capacities are set.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "policy", rename_all = "snake_case")]
pub enum CapacityPolicy {
    /// Total = multiplier x total demand (tasks for APs, compute for ECSs),
    /// split evenly.
    Ample { multiplier: f64 },
    /// As `Ample`, with a factor meant to be below one.
    Starved { factor: f64 },
    /// The same absolute value for every AP or ECS.
    Fixed { value: f64 },
}

impl CapacityPolicy {
    fn scale(&self) -> Option<f64> {
        match *self {
            CapacityPolicy::Ample { multiplier } => Some(multiplier),
            CapacityPolicy::Starved { factor } => Some(factor),
            CapacityPolicy::Fixed { .. } => None,
        }
    }

    fn raw_value(&self) -> f64 {
        match *self {
            CapacityPolicy::Ample { multiplier } => multiplier,
            CapacityPolicy::Starved { factor } => factor,
            CapacityPolicy::Fixed { value } => value,
        }
    }

    fn check(&self, name: &str) -> Result<()> {
        let v = self.raw_value();
        if !(v.is_finite() && v >= 0.0) {
            return Err(Error::InvalidParameter(format!("{name} value {v} must be finite and >= 0")));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GenParams {
    pub n_users: usize,
    pub n_aps: usize,
    pub n_ecss: usize,
    /// Inclusive range of tasks per user.
    pub tasks_per_user: (usize, usize),
    pub r: Interval,
    pub t: Interval,
    pub e: Interval,
    pub delta: Interval,
    pub alpha: Interval,
    pub beta: Interval,
    pub gamma: Interval,
    pub eta: Interval,
    /// Draw one demand for every task in the scenario.
    pub equal_r: bool,
    pub ap_capacity: CapacityPolicy,
    pub ecs_capacity: CapacityPolicy,
}

impl GenParams {
    /// Two ECSs, three APs, five users with three tasks each; delay and
    /// energy in [2, 6], access cost in [1, 6], demand `r_mean +- 1`.
    pub fn small_system(r_mean: f64) -> Self {
        Self {
            n_users: 5,
            n_aps: 3,
            n_ecss: 2,
            tasks_per_user: (3, 3),
            r: Interval::around(r_mean, 1.0),
            t: Interval::new(2.0, 6.0),
            e: Interval::new(2.0, 6.0),
            delta: Interval::new(1.0, 6.0),
            alpha: Interval::constant(1.0),
            beta: Interval::constant(1.0),
            gamma: Interval::constant(1.0),
            eta: Interval::constant(1.0),
            equal_r: false,
            ap_capacity: CapacityPolicy::Ample { multiplier: 1.2 },
            ecs_capacity: CapacityPolicy::Ample { multiplier: 1.2 },
        }
    }

    /// Four ECSs, eight APs and twenty users, other ranges as
    /// [`GenParams::small_system`].
    pub fn large_system(r_mean: f64, tasks_per_user: usize) -> Self {
        Self {
            n_users: 20,
            n_aps: 8,
            n_ecss: 4,
            tasks_per_user: (tasks_per_user, tasks_per_user),
            ..Self::small_system(r_mean)
        }
    }

    pub fn validate(&self) -> Result<()> {
        if self.n_aps == 0 || self.n_ecss == 0 {
            return Err(Error::InvalidParameter("need at least one AP and one ECS".into()));
        }
        if self.n_users == 0 {
            return Err(Error::InvalidParameter("need at least one user".into()));
        }
        let (lo, hi) = self.tasks_per_user;
        if lo == 0 || lo > hi {
            return Err(Error::InvalidParameter(format!("tasks_per_user = ({lo}, {hi}) must satisfy 1 <= lo <= hi")));
        }
        for (name, iv) in [
            ("r", self.r),
            ("t", self.t),
            ("e", self.e),
            ("delta", self.delta),
            ("alpha", self.alpha),
            ("beta", self.beta),
            ("gamma", self.gamma),
            ("eta", self.eta),
        ] {
            iv.check(name)?;
        }
        if self.r.lo <= 0.0 {
            return Err(Error::InvalidParameter("r.lo must be > 0".into()));
        }
        if self.eta.lo <= 0.0 {
            return Err(Error::InvalidParameter("eta.lo must be > 0".into()));
        }
        if self.alpha.lo + self.beta.lo + self.gamma.lo <= 0.0 {
            return Err(Error::InvalidParameter("alpha, beta and gamma lower bounds are all zero".into()));
        }
        self.ap_capacity.check("ap_capacity")?;
        self.ecs_capacity.check("ecs_capacity")?;
        Ok(())
    }
}

/// Draws a scenario. Deterministic in `(params, seed)`.
pub fn generate(params: &GenParams, seed: u64) -> Result<Scenario> {
    params.validate()?;
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(0);
    let shared_r = params.equal_r.then(|| params.r.sample(&mut rng));
    let mut users = Vec::with_capacity(params.n_users);
    for _ in 0..params.n_users {
        let alpha = params.alpha.sample(&mut rng);
        let beta = params.beta.sample(&mut rng);
        let gamma = params.gamma.sample(&mut rng);
        let eta = params.eta.sample(&mut rng);
        let (lo, hi) = params.tasks_per_user;
        let count = if lo == hi { lo } else { rng.gen_range(lo..=hi) };
        let tasks = (0..count)
            .map(|_| {
                let r = shared_r.unwrap_or_else(|| params.r.sample(&mut rng));
                let t = (0..params.n_aps).map(|_| params.t.sample(&mut rng)).collect();
                let e = (0..params.n_aps).map(|_| params.e.sample(&mut rng)).collect();
                Task { r, t, e }
            })
            .collect();
        users.push(MobileUser { alpha, beta, gamma, eta, tasks });
    }
    rng.set_stream(1);
    rng.set_word_pos(0);
    let delta = (0..params.n_aps)
        .map(|_| (0..params.n_ecss).map(|_| params.delta.sample(&mut rng)).collect())
        .collect();

    let n_tasks: usize = users.iter().map(|u| u.tasks.len()).sum();
    let demand: f64 = users.iter().flat_map(|u| u.tasks.iter().map(|t| t.r)).sum();
    let q = match params.ap_capacity.scale() {
        Some(k) => (k * n_tasks as f64 / params.n_aps as f64).ceil(),
        None => params.ap_capacity.raw_value().round(),
    };
    let cap = match params.ecs_capacity.scale() {
        Some(k) => k * demand / params.n_ecss as f64,
        None => params.ecs_capacity.raw_value(),
    };
    let aps = vec![AccessPoint { q: q.min(u32::MAX as f64) as u32 }; params.n_aps];
    let ecss = vec![EdgeServer { cap }; params.n_ecss];
    Scenario::new(users, aps, ecss, delta)
}

/// Provenance stored next to a generated scenario.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Metadata {
    pub seed: u64,
    pub params: GenParams,
    pub rng: String,
    pub schema_version: u32,
}

impl Metadata {
    pub fn new(params: &GenParams, seed: u64) -> Self {
        Self { seed, params: params.clone(), rng: RNG_ID.to_string(), schema_version: SCHEMA_VERSION }
    }
}

#[derive(Serialize)]
struct Envelope<'a> {
    schema_version: u32,
    #[serde(skip_serializing_if = "Option::is_none")]
    metadata: Option<&'a Metadata>,
    #[serde(flatten)]
    scenario: &'a Scenario,
}

/// Pretty JSON for a scenario, with optional metadata envelope.
pub fn to_json(scenario: &Scenario, metadata: Option<&Metadata>) -> Result<String> {
    let env = Envelope { schema_version: SCHEMA_VERSION, metadata, scenario };
    Ok(serde_json::to_string_pretty(&env)?)
}

pub fn save<W: Write>(scenario: &Scenario, metadata: Option<&Metadata>, mut sink: W) -> Result<()> {
    sink.write_all(to_json(scenario, metadata)?.as_bytes())?;
    sink.write_all(b"\n")?;
    Ok(())
}

/// Reads a scenario, with or without envelope.
pub fn load<R: Read>(source: R) -> Result<Scenario> {
    Ok(load_with_metadata(source)?.0)
}

pub fn load_with_metadata<R: Read>(source: R) -> Result<(Scenario, Option<Metadata>)> {
    let value: serde_json::Value = serde_json::from_reader(source)?;
    from_value(value)
}

pub fn from_json_str(s: &str) -> Result<Scenario> {
    Ok(from_value(serde_json::from_str(s)?)?.0)
}

fn from_value(mut value: serde_json::Value) -> Result<(Scenario, Option<Metadata>)> {
    let metadata = match value.as_object_mut().and_then(|o| o.remove("metadata")) {
        Some(m) => Some(serde_json::from_value(m)?),
        None => None,
    };
    if let Some(v) = value.get("schema_version").and_then(|v| v.as_u64()) {
        if v != u64::from(SCHEMA_VERSION) {
            return Err(Error::InvalidScenario(format!("unsupported schema_version {v}")));
        }
    }
    let scenario = serde_json::from_value(value).map_err(|e| {
        // surface our own validation message unwrapped
        Error::InvalidScenario(e.to_string())
    })?;
    Ok((scenario, metadata))
}

/// Small hand-built instances with known answers.
pub mod fixtures {
    use crate::model::{AccessPoint, EdgeServer, MobileUser, Scenario, Task};

    const INF: f64 = f64::INFINITY;

    fn user(tasks: Vec<Task>) -> MobileUser {
        MobileUser { alpha: 1.0, beta: 1.0, gamma: 1.0, eta: 1.0, tasks }
    }

    /// Two servers with capacities 3 and 4, two tasks with demands 1 and 5.
    /// Aggregate capacity suffices but the demand-5 task fits nowhere.
    pub fn example1() -> Scenario {
        let task = |r| Task { r, t: vec![1.0], e: vec![1.0] };
        Scenario::new(
            vec![user(vec![task(1.0), task(5.0)])],
            vec![AccessPoint { q: 2 }],
            vec![EdgeServer { cap: 3.0 }, EdgeServer { cap: 4.0 }],
            vec![vec![1.0, 1.0]],
        )
        .expect("fixture is valid")
    }

    /// One user, three tasks with demands (3, 2, 2) and servers with
    /// capacities (4, 6). AP 0 reaches only ECS 0 and AP 1 only ECS 1, so the
    /// delay on each AP is the task's cost on the matching server:
    /// (1, 2, 2) on ECS 0 and (2.5, 3, 3) on ECS 1.
    ///
    /// Greedy placement costs 7, the optimum is 6.5.
    pub fn example2() -> Scenario {
        let task = |r, u1, u2| Task { r, t: vec![u1, u2], e: vec![0.0, 0.0] };
        Scenario::new(
            vec![user(vec![task(3.0, 1.0, 2.5), task(2.0, 2.0, 3.0), task(2.0, 2.0, 3.0)])],
            vec![AccessPoint { q: 3 }, AccessPoint { q: 3 }],
            vec![EdgeServer { cap: 4.0 }, EdgeServer { cap: 6.0 }],
            vec![vec![0.0, INF], vec![INF, 0.0]],
        )
        .expect("fixture is valid")
    }

    /// Six single-task users on two servers with capacities (10, 12). Costs
    /// are (1, 2, 3, 4, 5, 2.5) and demands (1, 2, 10, 3, 1, 3). Task 0 only
    /// reaches ECS 0, task 2 reaches both at the same cost, the others only
    /// reach ECS 1.
    pub fn example3() -> Scenario {
        let task = |r, c1, c2| Task { r, t: vec![c1, c2], e: vec![0.0, 0.0] };
        Scenario::new(
            vec![
                user(vec![task(1.0, 1.0, INF)]),
                user(vec![task(2.0, INF, 2.0)]),
                user(vec![task(10.0, 3.0, 3.0)]),
                user(vec![task(3.0, INF, 4.0)]),
                user(vec![task(1.0, INF, 5.0)]),
                user(vec![task(3.0, INF, 2.5)]),
            ],
            vec![AccessPoint { q: 6 }, AccessPoint { q: 6 }],
            vec![EdgeServer { cap: 10.0 }, EdgeServer { cap: 12.0 }],
            vec![vec![0.0, INF], vec![INF, 0.0]],
        )
        .expect("fixture is valid")
    }

    /// Round in which each task of [`example3`] enters the matching: the
    /// first five at once, the sixth after two rounds of rejections.
    pub fn example3_arrivals() -> Vec<usize> {
        vec![0, 0, 0, 0, 0, 2]
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::model::necessary_feasibility;

    #[test]
    fn small_system_shape_and_ranges() {
        let p = GenParams::small_system(4.0);
        let s = generate(&p, 11).unwrap();
        assert_eq!((s.n_users(), s.n_aps(), s.n_ecss(), s.total_tasks()), (5, 3, 2, 15));
        for u in s.users() {
            for t in &u.tasks {
                assert!((3.0..=5.0).contains(&t.r));
                assert!(t.t.iter().chain(&t.e).all(|x| (2.0..=6.0).contains(x)));
            }
        }
        assert!(s.delta().iter().flatten().all(|d| (1.0..=6.0).contains(d)));
    }

    #[test]
    fn same_seed_same_bytes() {
        let p = GenParams::small_system(6.0);
        let a = to_json(&generate(&p, 3).unwrap(), Some(&Metadata::new(&p, 3))).unwrap();
        let b = to_json(&generate(&p, 3).unwrap(), Some(&Metadata::new(&p, 3))).unwrap();
        assert_eq!(a, b);
        assert_ne!(generate(&p, 3).unwrap(), generate(&p, 4).unwrap());
    }

    #[test]
    fn ample_policy_passes_aggregate_test() {
        let p = GenParams::small_system(6.0);
        for seed in 0..1000 {
            assert!(necessary_feasibility(&generate(&p, seed).unwrap()).holds, "seed {seed}");
        }
    }

    #[test]
    fn equal_r_draws_one_demand() {
        let mut p = GenParams::large_system(5.0, 3);
        p.equal_r = true;
        let s = generate(&p, 9).unwrap();
        let r0 = s.users()[0].tasks[0].r;
        assert!(s.users().iter().flat_map(|u| &u.tasks).all(|t| t.r == r0));
    }

    #[test]
    fn fixed_and_starved_policies() {
        let mut p = GenParams::small_system(4.0);
        p.ecs_capacity = CapacityPolicy::Fixed { value: 17.0 };
        p.ap_capacity = CapacityPolicy::Fixed { value: 2.0 };
        let s = generate(&p, 0).unwrap();
        assert!(s.ecss().iter().all(|e| e.cap == 17.0));
        assert!(s.aps().iter().all(|a| a.q == 2));
        p.ecs_capacity = CapacityPolicy::Starved { factor: 0.5 };
        let s = generate(&p, 0).unwrap();
        assert!(!necessary_feasibility(&s).holds);
    }

    #[test]
    fn invalid_params_rejected() {
        let mut p = GenParams::small_system(4.0);
        p.t = Interval::new(3.0, 2.0);
        assert!(generate(&p, 0).is_err());
        let mut p = GenParams::small_system(4.0);
        p.tasks_per_user = (0, 2);
        assert!(generate(&p, 0).is_err());
        let mut p = GenParams::small_system(4.0);
        p.eta = Interval::constant(0.0);
        assert!(generate(&p, 0).is_err());
    }

    #[test]
    fn round_trip() {
        let p = GenParams::small_system(5.0);
        let s = generate(&p, 21).unwrap();
        let meta = Metadata::new(&p, 21);
        let mut buf = Vec::new();
        save(&s, Some(&meta), &mut buf).unwrap();
        let (back, m) = load_with_metadata(buf.as_slice()).unwrap();
        assert_eq!(back, s);
        assert_eq!(m, Some(meta));
    }

    #[test]
    fn missing_delta_is_named() {
        let err = from_json_str(r#"{"users": [], "aps": [{"q": 1}], "ecss": [{"cap": 1.0}]}"#).unwrap_err();
        assert!(err.to_string().contains("delta"), "{err}");
    }

    #[test]
    fn invalid_content_is_reported() {
        let err = from_json_str(r#"{"users": [], "aps": [{"q": 1}], "ecss": [{"cap": 1.0}], "delta": [[1.0, 2.0]]}"#)
            .unwrap_err();
        assert!(err.to_string().contains("delta[0]"), "{err}");
    }
}
