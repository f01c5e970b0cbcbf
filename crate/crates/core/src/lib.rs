//! Task offloading in an imbalanced edge cloud.
//!
//! Mobile users own several compute tasks. Each task must be relayed by one
//! wireless access point (AP) to one edge cloud server (ECS). APs have a
//! connection budget, servers a compute budget, and every AP-server link has
//! an access cost. A task's offloading cost is the user-weighted sum of its
//! delay, energy and access cost.
//!
//! The crate solves two problems over that model:
//!
//! * **efficiency**: minimize total cost ([`model::op1_objective`]), with the
//!   centralized greedy [`greedy::cga`], its resource-aware variant
//!   [`greedy::mga`], and the distributed matching [`matching::adma`];
//! * **fairness**: minimize the largest weighted average cost per user
//!   ([`model::op2_objective`]), with [`fairness::fga`].
//!
//! [`relaxation`] provides LP lower bounds for both problems through a
//! built-in simplex solver and [`oracle`] solves small instances exactly.
//! [`scenario`] generates seeded random instances and [`experiment`] runs
//! batched sweeps that aggregate into CSV via [`metrics`].
//!
//! ```
//! use offload_core::{greedy, model, scenario::{generate, GenParams}};
//!
//! let s = generate(&GenParams::small_system(4.0), 7).unwrap();
//! let (assignment, report) = greedy::cga(&s);
//! assert!(model::validate_assignment(&s, &assignment).is_empty());
//! assert_eq!(report.objective, Some(model::op1_objective(&s, &assignment).unwrap()));
//! ```

// `!(x > 0.0)` style checks are deliberate: they also reject NaN.
#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod error;
pub mod experiment;
pub mod fairness;
pub mod greedy;
pub mod matching;
pub mod metrics;
pub mod model;
pub mod oracle;
pub mod relaxation;
pub mod report;
pub mod scenario;

pub use error::{Error, Result};
pub use model::{Assignment, CostBreakdown, Path, Scenario, TaskId};
pub use report::RunReport;
