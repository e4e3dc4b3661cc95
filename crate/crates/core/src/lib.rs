//! Parallel Monte-Carlo tree search that tracks unobserved samples.
//!
//! Dispatched-but-unfinished simulations are counted per node and folded into
//! the UCT score, so concurrent workers spread over the tree instead of
//! piling onto the same path. Sequential UCT and leaf, tree and root
//! parallelization are included for comparison.

pub mod baselines;
pub mod env;
pub mod policy;
pub mod runtime;
pub mod tree;

pub use baselines::{LeafPPlanner, RootPPlanner, SequentialPlanner, TreePConfig, TreePPlanner};
pub use env::{ActionId, DelayWrapper, EnvError, Environment, StepOutcome, SyntheticTreeEnv, TilePuzzleEnv};
pub use policy::{PolicyConfig, ScoreMode};
pub use runtime::{PlanConfig, PlanError, PlanOutcome, Planner, RunReport, RuntimeMode, WuUctPlanner};
pub use tree::{NodeId, NodeStats, SearchTree, TreeLimits};
