//! Matrix-based social-contract rule engine.
//!
//! Rules are named, identified, optionally mutable linear constraints bound
//! to the action they govern. The engine covers construction, evaluation
//! against decision subjects, action-stratified retrieval and pruning,
//! block-diagonal stacking, and slack-based mutation.

mod cache;
mod comparator;
mod entity;
pub mod file;
mod rule;
mod stacked;

pub use cache::{EngineMode, RuleCache};
pub use comparator::{Comparator, EQ_TOLERANCE};
pub use entity::{Binding, Entity};
pub use rule::{
    null_rule, ActionKind, EvalMode, EvalResult, EvalStats, Rule, RuleError, RuleId,
    ACTION_KIND_COUNT,
};
pub use stacked::{all_pass, stack, StackedInput, StackedRuleSystem};
