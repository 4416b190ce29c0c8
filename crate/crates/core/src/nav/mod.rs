//! Hierarchical navigation: global goal selection, planning, local control
//! and per-step rewards.

pub mod controller;
pub mod frontier;
pub mod planner;
pub mod policy;
pub mod reward;

pub use controller::{local_controller, sweep_blocked, ControllerParams, Surroundings};
pub use frontier::{select_global_goal, GlobalGoal, GoalChoice, GoalSource};
pub use planner::{extract_local_goal, plan, LocalGoal, Path, PlanError};
pub use policy::{Body, Decision, NavGoal, NavPolicy, PolicyConfig, StrategyKind};
pub use reward::{coverage_reward, local_reward};
