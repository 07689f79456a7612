//! Action-stratified rule registry.
//!
//! Rules live in per-action buckets in registration order, so the rules
//! constraining one decision kind come back in constant time without
//! scanning unrelated buckets. The non-stratified sweep (benchmark arm)
//! visits every bucket instead and tolerates off-action rules leniently.

use std::collections::HashMap;

use super::entity::Entity;
use super::rule::{ActionKind, EvalMode, EvalStats, Rule, RuleError, RuleId, ACTION_KIND_COUNT};

/// Whether rule retrieval is stratified by action or sweeps the full cache.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum EngineMode {
    #[default]
    Stratified,
    FullSweep,
}

impl EngineMode {
    fn eval_mode(self) -> EvalMode {
        match self {
            EngineMode::Stratified => EvalMode::Strict,
            EngineMode::FullSweep => EvalMode::Lenient,
        }
    }
}

/// Registry mapping action kind -> active rules, with an id index.
#[derive(Debug, Clone, Default)]
pub struct RuleCache {
    buckets: [Vec<Rule>; ACTION_KIND_COUNT],
    index: HashMap<RuleId, (usize, usize)>,
}

impl RuleCache {
    pub fn new() -> RuleCache {
        RuleCache::default()
    }

    pub fn from_rules(rules: impl IntoIterator<Item = Rule>) -> Result<RuleCache, RuleError> {
        let mut cache = RuleCache::new();
        for rule in rules {
            cache.insert(rule)?;
        }
        Ok(cache)
    }

    /// Registers a rule in its action bucket. Ids must be unique per cache.
    pub fn insert(&mut self, rule: Rule) -> Result<(), RuleError> {
        if self.index.contains_key(&rule.id()) {
            return Err(RuleError::DuplicateRuleId(rule.id()));
        }
        let bucket = rule.action().index();
        let pos = self.buckets[bucket].len();
        self.index.insert(rule.id(), (bucket, pos));
        self.buckets[bucket].push(rule);
        Ok(())
    }

    /// Replaces the registered rule carrying `rule.id()`, keeping its bucket
    /// position (mutations do not reorder evaluation).
    pub fn replace(&mut self, rule: Rule) -> Result<(), RuleError> {
        let (bucket, pos) = *self
            .index
            .get(&rule.id())
            .ok_or(RuleError::UnknownRuleId(rule.id()))?;
        debug_assert_eq!(self.buckets[bucket][pos].action(), rule.action());
        self.buckets[bucket][pos] = rule;
        Ok(())
    }

    pub fn get(&self, id: RuleId) -> Option<&Rule> {
        let (bucket, pos) = *self.index.get(&id)?;
        Some(&self.buckets[bucket][pos])
    }

    /// First rule with the given name, in bucket-then-registration order.
    pub fn find_by_name(&self, name: &str) -> Option<&Rule> {
        self.iter().find(|r| r.name() == name)
    }

    /// The rules bound to `action`, in registration order. Constant-time
    /// bucket lookup; unknown actions simply yield an empty slice.
    pub fn rules_for_action(&self, action: ActionKind) -> &[Rule] {
        &self.buckets[action.index()]
    }

    /// All rules, bucket by bucket in action order.
    pub fn iter(&self) -> impl Iterator<Item = &Rule> {
        self.buckets.iter().flatten()
    }

    pub fn len(&self) -> usize {
        self.buckets.iter().map(Vec::len).sum()
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    /// Copy of the cache with every rule's mutability forced off.
    pub fn frozen(&self) -> RuleCache {
        let mut cache = RuleCache::new();
        for rule in self.iter() {
            cache.insert(rule.frozen()).expect("ids unique in source");
        }
        cache
    }

    /// True when every rule relevant to `(entity, action)` under `mode`
    /// passes. An empty relevant set admits everything.
    pub fn admits(
        &self,
        entity: &Entity,
        action: ActionKind,
        mode: EngineMode,
        stats: &mut EvalStats,
    ) -> Result<bool, RuleError> {
        let eval = mode.eval_mode();
        match mode {
            EngineMode::Stratified => {
                for rule in self.rules_for_action(action) {
                    if !rule.passes(entity, eval, stats)? {
                        return Ok(false);
                    }
                }
            }
            EngineMode::FullSweep => {
                for rule in self.iter() {
                    if !rule.passes(entity, eval, stats)? {
                        return Ok(false);
                    }
                }
            }
        }
        Ok(true)
    }

    /// Indices of the candidates admitted by the rules for `action`, in the
    /// input order.
    pub fn prune_indices(
        &self,
        candidates: &[Entity],
        action: ActionKind,
        mode: EngineMode,
        stats: &mut EvalStats,
    ) -> Result<Vec<usize>, RuleError> {
        let mut survivors = Vec::with_capacity(candidates.len());
        for (idx, entity) in candidates.iter().enumerate() {
            if self.admits(entity, action, mode, stats)? {
                survivors.push(idx);
            }
        }
        Ok(survivors)
    }

    /// As [`RuleCache::prune_indices`] but returning the surviving entities.
    pub fn prune(
        &self,
        candidates: &[Entity],
        action: ActionKind,
        mode: EngineMode,
        stats: &mut EvalStats,
    ) -> Result<Vec<Entity>, RuleError> {
        Ok(self
            .prune_indices(candidates, action, mode, stats)?
            .into_iter()
            .map(|i| candidates[i])
            .collect())
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::rules::rule::null_rule;
    use crate::rules::{Binding, Comparator};
    use rand::rngs::StdRng;
    use rand::{Rng, SeedableRng};

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

    fn null_for(action: ActionKind, tag: usize) -> Rule {
        let inputs = match action {
            ActionKind::TargetSelection => vec![Binding::Distance, Binding::Payoff, Binding::One],
            ActionKind::MovementDirective => vec![Binding::Heading, Binding::Intensity, Binding::One],
            _ => vec![Binding::Energy, Binding::Contribution, Binding::One],
        };
        null_rule(format!("null-{}-{}", action, tag), action, inputs).unwrap()
    }

    #[test]
    fn buckets_partition_rules_by_action() {
        let mut cache = RuleCache::new();
        for i in 0..1000 {
            let action = ActionKind::ALL[i % ACTION_KIND_COUNT];
            cache.insert(null_for(action, i)).unwrap();
        }
        assert_eq!(cache.len(), 1000);
        for action in ActionKind::ALL {
            assert_eq!(cache.rules_for_action(action).len(), 200);
        }
    }

    #[test]
    fn empty_cache_yields_empty_bucket() {
        let cache = RuleCache::new();
        assert!(cache.rules_for_action(ActionKind::Election).is_empty());
    }

    #[test]
    fn lookup_returns_only_matching_rules() {
        let mut cache = RuleCache::new();
        for i in 0..3 {
            cache.insert(null_for(ActionKind::TargetSelection, i)).unwrap();
        }
        for i in 0..2 {
            cache.insert(null_for(ActionKind::Election, i)).unwrap();
        }
        let election = cache.rules_for_action(ActionKind::Election);
        assert_eq!(election.len(), 2);
        assert!(election.iter().all(|r| r.action() == ActionKind::Election));
    }

    #[test]
    fn duplicate_ids_are_rejected() {
        let rule = lootbox_100();
        let mut cache = RuleCache::new();
        cache.insert(rule.clone()).unwrap();
        assert!(matches!(
            cache.insert(rule),
            Err(RuleError::DuplicateRuleId(_))
        ));
    }

    #[test]
    fn replace_keeps_registration_order() {
        let mut cache = RuleCache::new();
        let a = null_for(ActionKind::TargetSelection, 0);
        let b = lootbox_100();
        let c = null_for(ActionKind::TargetSelection, 1);
        cache.insert(a.clone()).unwrap();
        cache.insert(b.clone()).unwrap();
        cache.insert(c.clone()).unwrap();

        let widened = b.apply_slack(0, 0.05).unwrap();
        cache.replace(widened.clone()).unwrap();

        let bucket = cache.rules_for_action(ActionKind::TargetSelection);
        assert_eq!(bucket[0].id(), a.id());
        assert_eq!(bucket[1].id(), b.id());
        assert_eq!(bucket[1].constant_entry(0), Some(-105.0));
        assert_eq!(bucket[2].id(), c.id());
    }

    #[test]
    fn prune_keeps_order_and_applies_all_rules() {
        // A: in range and worth it; B: too far; C: 1.5*60 = 90 > 80 payoff.
        let cache = RuleCache::from_rules([lootbox_100()]).unwrap();
        let candidates = [
            Entity::Lootbox { distance: 50.0, payoff: 80.0 },
            Entity::Lootbox { distance: 120.0, payoff: 200.0 },
            Entity::Lootbox { distance: 60.0, payoff: 80.0 },
        ];
        let mut stats = EvalStats::default();
        let surviving = cache
            .prune_indices(&candidates, ActionKind::TargetSelection, EngineMode::Stratified, &mut stats)
            .unwrap();
        assert_eq!(surviving, vec![0]);
    }

    #[test]
    fn empty_ruleset_admits_everything() {
        let cache = RuleCache::new();
        let candidates = [
            Entity::Lootbox { distance: 1e6, payoff: 0.1 },
            Entity::Lootbox { distance: 3.0, payoff: 9.0 },
        ];
        let mut stats = EvalStats::default();
        let surviving = cache
            .prune_indices(&candidates, ActionKind::TargetSelection, EngineMode::Stratified, &mut stats)
            .unwrap();
        assert_eq!(surviving, vec![0, 1]);
        assert_eq!(stats.rules_evaluated, 0);
    }

    #[test]
    fn null_rules_admit_everything() {
        let cache = RuleCache::from_rules([null_for(ActionKind::TargetSelection, 0)]).unwrap();
        let candidates = [
            Entity::Lootbox { distance: 1e6, payoff: 0.1 },
            Entity::Lootbox { distance: 3.0, payoff: 9.0 },
        ];
        let mut stats = EvalStats::default();
        let surviving = cache
            .prune_indices(&candidates, ActionKind::TargetSelection, EngineMode::Stratified, &mut stats)
            .unwrap();
        assert_eq!(surviving, vec![0, 1]);
    }

    /// Stratified pruning and a full-cache sweep agree whenever the
    /// off-action rules are null rules (they pass by default either way).
    #[test]
    fn stratified_and_full_sweep_agree_on_randomized_caches() {
        let mut rng = StdRng::seed_from_u64(0x5eed);
        for _ in 0..50 {
            let mut cache = RuleCache::new();
            // One real constraint on target selection with random bounds.
            let bound = rng.gen_range(10.0..200.0);
            let rate = rng.gen_range(0.5..3.0);
            cache
                .insert(
                    Rule::new(
                        "target-window",
                        ActionKind::TargetSelection,
                        true,
                        vec![Binding::Distance, Binding::Payoff, Binding::One],
                        vec![vec![1.0, 0.0, -bound], vec![rate, -1.0, 0.0]],
                        vec![Comparator::Leq, Comparator::Leq],
                    )
                    .unwrap(),
                )
                .unwrap();
            // A random pile of null rules on other actions.
            for i in 0..rng.gen_range(0..20) {
                let action = ActionKind::ALL[rng.gen_range(1..ACTION_KIND_COUNT)];
                cache.insert(null_for(action, i)).unwrap();
            }

            let candidates: Vec<Entity> = (0..30)
                .map(|_| Entity::Lootbox {
                    distance: rng.gen_range(0.0..300.0),
                    payoff: rng.gen_range(0.0..200.0),
                })
                .collect();

            let mut s1 = EvalStats::default();
            let mut s2 = EvalStats::default();
            let stratified = cache
                .prune_indices(&candidates, ActionKind::TargetSelection, EngineMode::Stratified, &mut s1)
                .unwrap();
            let full = cache
                .prune_indices(&candidates, ActionKind::TargetSelection, EngineMode::FullSweep, &mut s2)
                .unwrap();
            assert_eq!(stratified, full);
            assert!(s2.rules_evaluated >= s1.rules_evaluated);
        }
    }

    #[test]
    fn frozen_cache_rejects_slack() {
        let cache = RuleCache::from_rules([lootbox_100()]).unwrap().frozen();
        let rule = cache.find_by_name("lootbox-100").unwrap();
        assert!(matches!(
            rule.apply_slack(0, 0.05),
            Err(RuleError::ImmutableRule(_))
        ));
    }
}
