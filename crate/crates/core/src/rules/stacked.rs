//! Block-diagonal stacking of rules into one sparse constraint system.
//!
//! Each source rule keeps a disjoint block of columns for its non-constant
//! inputs; all constant terms share the final merged column. Evaluating the
//! stacked system is the conjunction of evaluating every source rule on its
//! own slice.

use super::comparator::Comparator;
use super::entity::{Binding, Entity};
use super::rule::{EvalMode, EvalStats, Rule, RuleError, RuleId};

/// One column of the merged input vector: which source rule's entity the
/// binding reads. `source_rule` is `None` for the shared constant column.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct StackedInput {
    pub source_rule: Option<usize>,
    pub binding: Binding,
}

#[derive(Debug, Clone, PartialEq)]
struct SparseRow {
    /// (column, weight) pairs in ascending column order; zeros are not stored.
    entries: Vec<(usize, f64)>,
}

/// Rules stacked into a single sparse matrix with per-row provenance.
#[derive(Debug, Clone, PartialEq)]
pub struct StackedRuleSystem {
    rows: Vec<SparseRow>,
    comparators: Vec<Comparator>,
    inputs: Vec<StackedInput>,
    source_rule_ids: Vec<RuleId>,
    source_count: usize,
    cols: usize,
}

/// Stacks `rules` block-diagonally. Rule `i`'s non-constant columns occupy a
/// disjoint range; comparators concatenate in rule order.
pub fn stack(rules: &[Rule]) -> Result<StackedRuleSystem, RuleError> {
    if rules.is_empty() {
        return Err(RuleError::EmptyRuleList);
    }

    let merged_width: usize = rules.iter().map(|r| r.input_count() - 1).sum::<usize>() + 1;
    let const_col = merged_width - 1;

    let mut inputs = Vec::with_capacity(merged_width);
    let mut rows = Vec::new();
    let mut comparators = Vec::new();
    let mut source_rule_ids = Vec::new();

    let mut offset = 0;
    for (rule_idx, rule) in rules.iter().enumerate() {
        let own_width = rule.input_count() - 1;
        for &binding in &rule.inputs()[..own_width] {
            inputs.push(StackedInput { source_rule: Some(rule_idx), binding });
        }
        for (row, &cmp) in rule.matrix().iter().zip(rule.comparators()) {
            let mut entries = Vec::new();
            for (j, &weight) in row[..own_width].iter().enumerate() {
                if weight != 0.0 {
                    entries.push((offset + j, weight));
                }
            }
            let constant = row[own_width];
            if constant != 0.0 {
                entries.push((const_col, constant));
            }
            rows.push(SparseRow { entries });
            comparators.push(cmp);
            source_rule_ids.push(rule.id());
        }
        offset += own_width;
    }
    inputs.push(StackedInput { source_rule: None, binding: Binding::One });

    Ok(StackedRuleSystem {
        rows,
        comparators,
        inputs,
        source_rule_ids,
        source_count: rules.len(),
        cols: merged_width,
    })
}

impl StackedRuleSystem {
    pub fn row_count(&self) -> usize {
        self.rows.len()
    }

    pub fn col_count(&self) -> usize {
        self.cols
    }

    pub fn comparators(&self) -> &[Comparator] {
        &self.comparators
    }

    pub fn inputs(&self) -> &[StackedInput] {
        &self.inputs
    }

    /// Which rule each row came from.
    pub fn source_rule_ids(&self) -> &[RuleId] {
        &self.source_rule_ids
    }

    pub fn source_count(&self) -> usize {
        self.source_count
    }

    /// Dense copy of the stacked matrix, zeros included.
    pub fn to_dense(&self) -> Vec<Vec<f64>> {
        self.rows
            .iter()
            .map(|row| {
                let mut dense = vec![0.0; self.cols];
                for &(col, w) in &row.entries {
                    dense[col] = w;
                }
                dense
            })
            .collect()
    }

    /// Evaluates against one entity per source rule; true iff every stacked
    /// clause holds, which is the conjunction of the source rules.
    pub fn evaluate(&self, entities: &[Entity]) -> Result<bool, RuleError> {
        if entities.len() != self.source_count {
            return Err(RuleError::DimensionMismatch(format!(
                "{} entities for {} stacked rules",
                entities.len(),
                self.source_count
            )));
        }
        let mut joint = Vec::with_capacity(self.cols);
        for input in &self.inputs {
            let value = match input.source_rule {
                Some(idx) => {
                    let entity = &entities[idx];
                    input.binding.resolve(entity).ok_or(RuleError::GetterUndefined {
                        binding: input.binding.name(),
                        entity: entity.kind_name(),
                    })?
                }
                None => 1.0,
            };
            joint.push(value);
        }
        Ok(self.evaluate_vector(&joint))
    }

    /// Evaluates against a pre-resolved joint input vector.
    pub fn evaluate_vector(&self, joint: &[f64]) -> bool {
        debug_assert_eq!(joint.len(), self.cols);
        self.rows.iter().zip(&self.comparators).all(|(row, cmp)| {
            let value: f64 = row.entries.iter().map(|&(col, w)| w * joint[col]).sum();
            cmp.holds(value)
        })
    }
}

/// Conjunction of evaluating each rule separately on its own entity, with
/// the same strict semantics as [`StackedRuleSystem::evaluate`].
pub fn all_pass(rules: &[Rule], entities: &[Entity]) -> Result<bool, RuleError> {
    debug_assert_eq!(rules.len(), entities.len());
    let mut stats = EvalStats::default();
    for (rule, entity) in rules.iter().zip(entities) {
        if !rule.passes(entity, EvalMode::Strict, &mut stats)? {
            return Ok(false);
        }
    }
    Ok(true)
}
