//! Instance sets shared by the solver benchmarks.

use offload_core::scenario::{generate, GenParams};
use offload_core::Scenario;

/// `count` scenarios from consecutive seeds starting at 0.
pub fn batch(params: &GenParams, count: u64) -> Vec<Scenario> {
    (0..count).map(|seed| generate(params, seed).expect("valid generator parameters")).collect()
}

/// The small system at a moderate load.
pub fn small(count: u64) -> Vec<Scenario> {
    batch(&GenParams::small_system(6.0), count)
}

/// The large system with `tasks` tasks per user.
pub fn large(tasks: usize, count: u64) -> Vec<Scenario> {
    batch(&GenParams::large_system(6.0, tasks), count)
}

/// Tiny instances the exhaustive oracle can handle quickly.
pub fn tiny(count: u64) -> Vec<Scenario> {
    let mut p = GenParams::small_system(4.0);
    p.n_users = 3;
    p.n_aps = 2;
    p.tasks_per_user = (2, 2);
    batch(&p, count)
}
