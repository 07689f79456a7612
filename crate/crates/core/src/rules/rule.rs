//! The matrix rule representation and the operations on a single rule.
//!
//! A rule is `matrix (n×m) × inputs (m) <comparators (n)> 0`: every clause
//! (row) is a weighted sum of the bound inputs compared against zero, and the
//! rule passes when all clauses hold. The final input is always the constant
//! 1, so affine bounds live in the last matrix column.

use std::fmt;

use thiserror::Error;
use uuid::Uuid;

use super::comparator::Comparator;
use super::entity::{Binding, Entity};

/// The governed decision kinds a rule can be bound to.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum ActionKind {
    TargetSelection,
    Allocation,
    Election,
    Admission,
    MovementDirective,
}

pub const ACTION_KIND_COUNT: usize = 5;

impl ActionKind {
    pub const ALL: [ActionKind; ACTION_KIND_COUNT] = [
        ActionKind::TargetSelection,
        ActionKind::Allocation,
        ActionKind::Election,
        ActionKind::Admission,
        ActionKind::MovementDirective,
    ];

    pub fn index(self) -> usize {
        match self {
            ActionKind::TargetSelection => 0,
            ActionKind::Allocation => 1,
            ActionKind::Election => 2,
            ActionKind::Admission => 3,
            ActionKind::MovementDirective => 4,
        }
    }

    pub fn name(self) -> &'static str {
        match self {
            ActionKind::TargetSelection => "target-selection",
            ActionKind::Allocation => "allocation",
            ActionKind::Election => "election",
            ActionKind::Admission => "admission",
            ActionKind::MovementDirective => "movement-directive",
        }
    }

    pub fn from_name(name: &str) -> Option<ActionKind> {
        ActionKind::ALL.into_iter().find(|a| a.name() == name)
    }
}

impl fmt::Display for ActionKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

/// Unique rule identifier with UUID semantics.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct RuleId(Uuid);

impl RuleId {
    pub fn generate() -> RuleId {
        RuleId(Uuid::new_v4())
    }

    pub fn parse(s: &str) -> Option<RuleId> {
        Uuid::parse_str(s).ok().map(RuleId)
    }
}

impl fmt::Display for RuleId {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}", self.0)
    }
}

#[derive(Debug, Error, Clone, PartialEq)]
pub enum RuleError {
    #[error("dimension mismatch: {0}")]
    DimensionMismatch(String),
    #[error("the last input binding must be the constant column")]
    MissingConstantColumn,
    #[error("rule {0} is immutable")]
    ImmutableRule(RuleId),
    #[error("index ({row}, {col:?}) out of range for a {rows}x{cols} matrix")]
    IndexOutOfRange {
        row: usize,
        col: Option<usize>,
        rows: usize,
        cols: usize,
    },
    #[error("binding `{binding}` is undefined for a {entity} entity")]
    GetterUndefined {
        binding: &'static str,
        entity: &'static str,
    },
    #[error("cannot stack an empty rule list")]
    EmptyRuleList,
    #[error("rule id {0} already registered")]
    DuplicateRuleId(RuleId),
    #[error("rule id {0} not registered")]
    UnknownRuleId(RuleId),
}

/// How an undefined binding is treated during evaluation.
///
/// `Strict` is the stratified engine: hitting an undefined getter means a
/// rule was evaluated against the wrong entity kind, which is a bug in the
/// ruleset/action wiring. `Lenient` is the full-cache sweep used by the
/// non-stratified benchmark arm, where off-action rules pass by default.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum EvalMode {
    #[default]
    Strict,
    Lenient,
}

/// Work counters for the cost accounting: one rule evaluation touches at most
/// `n*m` matrix entries.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub struct EvalStats {
    pub rules_evaluated: u64,
    pub entries_visited: u64,
}

impl EvalStats {
    pub fn merge(&mut self, other: EvalStats) {
        self.rules_evaluated += other.rules_evaluated;
        self.entries_visited += other.entries_visited;
    }
}

/// Per-clause outcome of one evaluation. Evaluation short-circuits after the
/// first failing clause, so `clauses` holds results up to and including it.
#[derive(Debug, Clone, PartialEq)]
pub struct EvalResult {
    pub passed: bool,
    pub clauses: Vec<bool>,
}

/// A named, identified, optionally mutable constraint bound to one action.
#[derive(Debug, Clone, PartialEq)]
pub struct Rule {
    id: RuleId,
    name: String,
    mutable: bool,
    action: ActionKind,
    inputs: Vec<Binding>,
    matrix: Vec<Vec<f64>>,
    comparators: Vec<Comparator>,
}

impl Rule {
    /// Builds a rule with a freshly generated id. The matrix must be
    /// rectangular with one row per comparator and one column per input, and
    /// the last input must be the constant column.
    pub fn new(
        name: impl Into<String>,
        action: ActionKind,
        mutable: bool,
        inputs: Vec<Binding>,
        matrix: Vec<Vec<f64>>,
        comparators: Vec<Comparator>,
    ) -> Result<Rule, RuleError> {
        Rule::with_id(
            RuleId::generate(),
            name,
            action,
            mutable,
            inputs,
            matrix,
            comparators,
        )
    }

    /// As [`Rule::new`] but reusing an existing id (persistence round-trips).
    pub fn with_id(
        id: RuleId,
        name: impl Into<String>,
        action: ActionKind,
        mutable: bool,
        inputs: Vec<Binding>,
        matrix: Vec<Vec<f64>>,
        comparators: Vec<Comparator>,
    ) -> Result<Rule, RuleError> {
        let n = matrix.len();
        let m = inputs.len();
        if n == 0 || m == 0 {
            return Err(RuleError::DimensionMismatch(
                "matrix needs at least one clause and one input".into(),
            ));
        }
        if let Some(bad) = matrix.iter().find(|row| row.len() != m) {
            return Err(RuleError::DimensionMismatch(format!(
                "row of width {} in a matrix with {} inputs",
                bad.len(),
                m
            )));
        }
        if comparators.len() != n {
            return Err(RuleError::DimensionMismatch(format!(
                "{} comparators for {} clauses",
                comparators.len(),
                n
            )));
        }
        if *inputs.last().expect("m >= 1") != Binding::One {
            return Err(RuleError::MissingConstantColumn);
        }
        Ok(Rule {
            id,
            name: name.into(),
            mutable,
            action,
            inputs,
            matrix,
            comparators,
        })
    }

    pub fn id(&self) -> RuleId {
        self.id
    }

    pub fn name(&self) -> &str {
        &self.name
    }

    pub fn is_mutable(&self) -> bool {
        self.mutable
    }

    pub fn action(&self) -> ActionKind {
        self.action
    }

    pub fn inputs(&self) -> &[Binding] {
        &self.inputs
    }

    pub fn matrix(&self) -> &[Vec<f64>] {
        &self.matrix
    }

    pub fn comparators(&self) -> &[Comparator] {
        &self.comparators
    }

    /// Number of clauses (matrix rows).
    pub fn clause_count(&self) -> usize {
        self.matrix.len()
    }

    /// Number of inputs (matrix columns, constant column included).
    pub fn input_count(&self) -> usize {
        self.inputs.len()
    }

    /// Entry in the constant column of `row`: the affine bound of that
    /// clause, and the value slack manipulation scales.
    pub fn constant_entry(&self, row: usize) -> Option<f64> {
        self.matrix.get(row).map(|r| r[self.inputs.len() - 1])
    }

    /// Returns a copy with `mutable` forced off; used by the immutable
    /// experiment arm.
    pub fn frozen(&self) -> Rule {
        let mut rule = self.clone();
        rule.mutable = false;
        rule
    }

    /// Evaluates the rule against `entity`, strictly, reporting per-clause
    /// results.
    pub fn evaluate(&self, entity: &Entity) -> Result<EvalResult, RuleError> {
        self.evaluate_with(entity, EvalMode::Strict, &mut EvalStats::default())
    }

    /// Evaluation with explicit mode and work accounting.
    pub fn evaluate_with(
        &self,
        entity: &Entity,
        mode: EvalMode,
        stats: &mut EvalStats,
    ) -> Result<EvalResult, RuleError> {
        stats.rules_evaluated += 1;
        let mut clauses = Vec::with_capacity(self.matrix.len());
        for (row, cmp) in self.matrix.iter().zip(&self.comparators) {
            let ok = match self.clause_value(row, entity, mode, stats)? {
                Some(value) => cmp.holds(value),
                // Undefined getter under Lenient: the clause passes by default.
                None => true,
            };
            clauses.push(ok);
            if !ok {
                return Ok(EvalResult { passed: false, clauses });
            }
        }
        Ok(EvalResult { passed: true, clauses })
    }

    /// Allocation-free pass/fail check; the hot path used by pruning.
    pub fn passes(
        &self,
        entity: &Entity,
        mode: EvalMode,
        stats: &mut EvalStats,
    ) -> Result<bool, RuleError> {
        stats.rules_evaluated += 1;
        for (row, cmp) in self.matrix.iter().zip(&self.comparators) {
            let ok = match self.clause_value(row, entity, mode, stats)? {
                Some(value) => cmp.holds(value),
                None => true,
            };
            if !ok {
                return Ok(false);
            }
        }
        Ok(true)
    }

    /// Row dot product against the resolved input vector. `Ok(None)` means an
    /// undefined binding was tolerated (Lenient mode).
    fn clause_value(
        &self,
        row: &[f64],
        entity: &Entity,
        mode: EvalMode,
        stats: &mut EvalStats,
    ) -> Result<Option<f64>, RuleError> {
        let mut acc = 0.0;
        for (weight, binding) in row.iter().zip(&self.inputs) {
            stats.entries_visited += 1;
            match binding.resolve(entity) {
                Some(value) => acc += weight * value,
                None => match mode {
                    EvalMode::Strict => {
                        return Err(RuleError::GetterUndefined {
                            binding: binding.name(),
                            entity: entity.kind_name(),
                        })
                    }
                    EvalMode::Lenient => return Ok(None),
                },
            }
        }
        Ok(Some(acc))
    }

    /// Evaluates directly on a resolved input vector (no entity). Used by the
    /// stacked system and by test oracles.
    pub fn evaluate_vector(&self, inputs: &[f64]) -> Result<EvalResult, RuleError> {
        if inputs.len() != self.inputs.len() {
            return Err(RuleError::DimensionMismatch(format!(
                "{} input values for {} bindings",
                inputs.len(),
                self.inputs.len()
            )));
        }
        let mut clauses = Vec::with_capacity(self.matrix.len());
        for (row, cmp) in self.matrix.iter().zip(&self.comparators) {
            let value: f64 = row.iter().zip(inputs).map(|(w, x)| w * x).sum();
            let ok = cmp.holds(value);
            clauses.push(ok);
            if !ok {
                return Ok(EvalResult { passed: false, clauses });
            }
        }
        Ok(EvalResult { passed: true, clauses })
    }

    /// Returns a copy with one matrix entry replaced. The original is
    /// untouched; id, name and action carry over.
    pub fn mutate_entry(&self, row: usize, col: usize, value: f64) -> Result<Rule, RuleError> {
        if !self.mutable {
            return Err(RuleError::ImmutableRule(self.id));
        }
        if row >= self.matrix.len() || col >= self.inputs.len() {
            return Err(RuleError::IndexOutOfRange {
                row,
                col: Some(col),
                rows: self.matrix.len(),
                cols: self.inputs.len(),
            });
        }
        let mut rule = self.clone();
        rule.matrix[row][col] = value;
        Ok(rule)
    }

    /// Scales the constant-column entry of `row` by `1 + fraction`. A
    /// positive fraction loosens a bound encoded as a negative constant, a
    /// negative fraction tightens it.
    pub fn apply_slack(&self, row: usize, fraction: f64) -> Result<Rule, RuleError> {
        if !self.mutable {
            return Err(RuleError::ImmutableRule(self.id));
        }
        if row >= self.matrix.len() {
            return Err(RuleError::IndexOutOfRange {
                row,
                col: None,
                rows: self.matrix.len(),
                cols: self.inputs.len(),
            });
        }
        let col = self.inputs.len() - 1;
        let current = self.matrix[row][col];
        self.mutate_entry(row, col, current * (1.0 + fraction))
    }
}

/// The always-true rule: an all-zeros matrix equated with the zero vector.
/// Whatever the inputs, every clause reduces to `0 == 0`.
pub fn null_rule(
    name: impl Into<String>,
    action: ActionKind,
    inputs: Vec<Binding>,
) -> Result<Rule, RuleError> {
    let width = inputs.len();
    Rule::new(
        name,
        action,
        false,
        inputs,
        vec![vec![0.0; width]],
        vec![Comparator::Eq],
    )
}

#[cfg(test)]
mod tests {
    use super::*;

    fn lootbox_100() -> Rule {
        Rule::new(
            "lootbox-100",
            ActionKind::TargetSelection,
            true,
            vec![Binding::Distance, Binding::Payoff, Binding::One],
            vec![vec![1.0, 0.0, -100.0], vec![1.5, -1.0, 0.0]],
            vec![Comparator::Leq, Comparator::Leq],
        )
        .unwrap()
    }

    #[test]
    fn build_rejects_ragged_matrix() {
        let err = Rule::new(
            "bad",
            ActionKind::TargetSelection,
            true,
            vec![Binding::Distance, Binding::One],
            vec![vec![1.0, 2.0], vec![1.0]],
            vec![Comparator::Leq, Comparator::Leq],
        )
        .unwrap_err();
        assert!(matches!(err, RuleError::DimensionMismatch(_)));
    }

    #[test]
    fn build_rejects_comparator_count_mismatch() {
        let err = Rule::new(
            "bad",
            ActionKind::TargetSelection,
            true,
            vec![Binding::Distance, Binding::Payoff, Binding::One],
            vec![vec![1.0, 0.0, -100.0], vec![1.5, -1.0, 0.0]],
            vec![Comparator::Leq],
        )
        .unwrap_err();
        assert!(matches!(err, RuleError::DimensionMismatch(_)));
    }

    #[test]
    fn build_rejects_missing_constant_column() {
        let err = Rule::new(
            "bad",
            ActionKind::TargetSelection,
            true,
            vec![Binding::Distance, Binding::Payoff],
            vec![vec![1.0, 0.0]],
            vec![Comparator::Leq],
        )
        .unwrap_err();
        assert_eq!(err, RuleError::MissingConstantColumn);
    }

    #[test]
    fn lootbox_example_passes_within_bounds() {
        // clause 1: 50 - 100 = -50 <= 0; clause 2: 1.5*50 - 80 = -5 <= 0
        let rule = lootbox_100();
        let res = rule
            .evaluate(&Entity::Lootbox { distance: 50.0, payoff: 80.0 })
            .unwrap();
        assert!(res.passed);
        assert_eq!(res.clauses, vec![true, true]);
    }

    #[test]
    fn lootbox_example_fails_distance_and_short_circuits() {
        // clause 1: 120 - 100 = 20 > 0, so clause 2 is never evaluated
        let rule = lootbox_100();
        let res = rule
            .evaluate(&Entity::Lootbox { distance: 120.0, payoff: 500.0 })
            .unwrap();
        assert!(!res.passed);
        assert_eq!(res.clauses, vec![false]);
    }

    #[test]
    fn lootbox_example_fails_payoff_clause() {
        // clause 2: 1.5*60 - 80 = 10 > 0
        let rule = lootbox_100();
        let res = rule
            .evaluate(&Entity::Lootbox { distance: 60.0, payoff: 80.0 })
            .unwrap();
        assert!(!res.passed);
        assert_eq!(res.clauses, vec![true, false]);
    }

    #[test]
    fn lootbox_example_boundary_passes() {
        // 100 - 100 = 0 <= 0 and 150 - 150 = 0 <= 0
        let rule = lootbox_100();
        let res = rule
            .evaluate(&Entity::Lootbox { distance: 100.0, payoff: 150.0 })
            .unwrap();
        assert!(res.passed);
    }

    #[test]
    fn null_rule_passes_for_every_entity() {
        let rules = [
            null_rule(
                "null-target",
                ActionKind::TargetSelection,
                vec![Binding::Distance, Binding::Payoff, Binding::One],
            )
            .unwrap(),
            null_rule(
                "null-election",
                ActionKind::Election,
                vec![Binding::Energy, Binding::Contribution, Binding::One],
            )
            .unwrap(),
            null_rule(
                "null-movement",
                ActionKind::MovementDirective,
                vec![Binding::Heading, Binding::Intensity, Binding::One],
            )
            .unwrap(),
        ];
        let entities = [
            Entity::Lootbox { distance: 1e9, payoff: -3.0 },
            Entity::Agent { energy: 0.0, contribution: 42.0 },
            Entity::Directive { heading: -1.2, intensity: 0.7 },
        ];
        let mut stats = EvalStats::default();
        for rule in &rules {
            for entity in &entities {
                // Off-kind combinations only make sense leniently.
                assert!(rule.passes(entity, EvalMode::Lenient, &mut stats).unwrap());
            }
        }
    }

    #[test]
    fn strict_mode_rejects_undefined_getter() {
        let rule = lootbox_100();
        let err = rule
            .evaluate(&Entity::Agent { energy: 10.0, contribution: 0.0 })
            .unwrap_err();
        assert!(matches!(err, RuleError::GetterUndefined { binding: "distance", .. }));
    }

    #[test]
    fn lenient_mode_passes_clause_on_undefined_getter() {
        let rule = lootbox_100();
        let mut stats = EvalStats::default();
        let res = rule
            .evaluate_with(
                &Entity::Agent { energy: 10.0, contribution: 0.0 },
                EvalMode::Lenient,
                &mut stats,
            )
            .unwrap();
        assert!(res.passed);
    }

    #[test]
    fn eval_cost_bounded_by_matrix_size() {
        let rule = lootbox_100();
        let mut stats = EvalStats::default();
        rule.passes(
            &Entity::Lootbox { distance: 50.0, payoff: 80.0 },
            EvalMode::Strict,
            &mut stats,
        )
        .unwrap();
        assert_eq!(stats.rules_evaluated, 1);
        assert!(stats.entries_visited <= (rule.clause_count() * rule.input_count()) as u64);
    }

    #[test]
    fn mutate_entry_changes_exactly_one_entry() {
        let rule = lootbox_100();
        let tightened = rule.mutate_entry(0, 2, -50.0).unwrap();
        assert_eq!(tightened.matrix()[0][2], -50.0);
        assert_eq!(tightened.id(), rule.id());
        assert_eq!(tightened.name(), rule.name());
        assert_eq!(tightened.action(), rule.action());
        assert_eq!(tightened.matrix()[0][0], rule.matrix()[0][0]);
        assert_eq!(tightened.matrix()[0][1], rule.matrix()[0][1]);
        assert_eq!(tightened.matrix()[1], rule.matrix()[1]);
        // original untouched
        assert_eq!(rule.matrix()[0][2], -100.0);

        let loosened = rule.mutate_entry(0, 2, -200.0).unwrap();
        assert_eq!(loosened.matrix()[0][2], -200.0);
    }

    #[test]
    fn mutate_entry_rejects_immutable_and_bad_indices() {
        let rule = lootbox_100();
        let frozen = rule.frozen();
        assert!(matches!(
            frozen.mutate_entry(0, 2, -50.0),
            Err(RuleError::ImmutableRule(_))
        ));
        assert!(matches!(
            rule.mutate_entry(2, 0, 1.0),
            Err(RuleError::IndexOutOfRange { .. })
        ));
        assert!(matches!(
            rule.mutate_entry(0, 3, 1.0),
            Err(RuleError::IndexOutOfRange { .. })
        ));
    }

    #[test]
    fn apply_slack_scales_the_constant_column() {
        let radius = Rule::new(
            "radius-1000",
            ActionKind::TargetSelection,
            true,
            vec![Binding::Distance, Binding::One],
            vec![vec![1.0, -1000.0]],
            vec![Comparator::Leq],
        )
        .unwrap();

        let widened = radius.apply_slack(0, 0.05).unwrap();
        assert_eq!(widened.constant_entry(0), Some(-1050.0));
        let shrunk = radius.apply_slack(0, -0.05).unwrap();
        assert_eq!(shrunk.constant_entry(0), Some(-950.0));
        let unchanged = radius.apply_slack(0, 0.0).unwrap();
        assert_eq!(unchanged, radius);
    }

    #[test]
    fn slack_compounds_geometrically() {
        let mut radius = Rule::new(
            "radius-1000",
            ActionKind::TargetSelection,
            true,
            vec![Binding::Distance, Binding::One],
            vec![vec![1.0, -1000.0]],
            vec![Comparator::Leq],
        )
        .unwrap();
        for _ in 0..3 {
            radius = radius.apply_slack(0, 0.05).unwrap();
        }
        assert_eq!(radius.constant_entry(0), Some(-1157.625));
    }

    #[test]
    fn ids_are_unique_across_builds() {
        let a = lootbox_100();
        let b = lootbox_100();
        assert_ne!(a.id(), b.id());
    }
}
