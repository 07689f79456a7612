//! Institutional machinery bound to each megabike: membership, elections,
//! rule-governed target selection, loot allocation, amendment resolution,
//! and exclusion/admission.

use std::collections::{BTreeMap, HashMap};

use rand::seq::SliceRandom;
use rand::Rng;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::agents::{
    vote_among, vote_for_target, AgentPool, Ballot, MutationProposal, TargetCandidate,
};
use crate::rules::{ActionKind, EngineMode, Entity, EvalStats, RuleCache, RuleError, RuleId};
use crate::types::{AgentId, BikeId, Energy, LootboxId};
use crate::world::{GridPosition, Lootbox};

#[derive(Debug, Error, Clone, PartialEq)]
pub enum GovernanceError {
    #[error("bike has no occupants")]
    NoOccupants,
    #[error("lootbox already consumed")]
    AlreadyConsumed,
    #[error(transparent)]
    Rule(#[from] RuleError),
}

/// How an acquired payoff is divided among the crew.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum AllocationPolicy {
    #[default]
    Equal,
    Contribution,
}

/// A governed vehicle: occupants, their mutually agreed contract, and its
/// kinematic state.
#[derive(Debug, Clone)]
pub struct Megabike {
    pub id: BikeId,
    pub seats: usize,
    pub occupants: Vec<AgentId>,
    pub leader: Option<AgentId>,
    pub position: GridPosition,
    pub heading: f64,
    pub ruleset: RuleCache,
    pub terminated: bool,
}

impl Megabike {
    pub fn new(id: BikeId, seats: usize, occupants: Vec<AgentId>, start: GridPosition) -> Megabike {
        debug_assert!(!occupants.is_empty() && occupants.len() <= seats);
        Megabike {
            id,
            seats,
            occupants,
            leader: None,
            position: start,
            heading: 0.0,
            ruleset: RuleCache::new(),
            terminated: false,
        }
    }

    pub fn free_seats(&self) -> usize {
        self.seats.saturating_sub(self.occupants.len())
    }

    pub fn living_occupants<'a>(&'a self, pool: &'a AgentPool) -> impl Iterator<Item = AgentId> + 'a {
        self.occupants.iter().copied().filter(|&id| pool.get(id).is_alive())
    }

    pub fn living_count(&self, pool: &AgentPool) -> usize {
        self.living_occupants(pool).count()
    }
}

/// Partitions agents into bikes of `seats` by seeded shuffle. Each bike
/// adopts a deep copy of the base ruleset, so contracts diverge independently
/// from here on.
pub fn form_bikes(
    agent_ids: &[AgentId],
    seats: usize,
    base_ruleset: &RuleCache,
    start: GridPosition,
    rng: &mut impl Rng,
) -> Vec<Megabike> {
    debug_assert!(seats >= 1);
    let mut shuffled = agent_ids.to_vec();
    shuffled.shuffle(rng);
    shuffled
        .chunks(seats)
        .enumerate()
        .map(|(i, chunk)| {
            let mut bike = Megabike::new(BikeId(i as u32), seats, chunk.to_vec(), start);
            bike.ruleset = base_ruleset.clone();
            bike
        })
        .collect()
}

fn plurality<C: Copy + Ord>(ballots: &[Ballot<C>]) -> Vec<(C, usize)> {
    let mut counts: BTreeMap<C, usize> = BTreeMap::new();
    for b in ballots {
        *counts.entry(b.choice).or_default() += 1;
    }
    let mut tally: Vec<(C, usize)> = counts.into_iter().collect();
    tally.sort_by(|a, b| b.1.cmp(&a.1).then(a.0.cmp(&b.0)));
    tally
}

/// Plurality winner among occupant ballots, ties to the lowest agent id.
/// With no ballots at all, the lowest living occupant id wins by default.
pub fn elect_leader(
    bike: &mut Megabike,
    pool: &AgentPool,
    ballots: &[Ballot<AgentId>],
) -> Result<AgentId, GovernanceError> {
    let living: Vec<AgentId> = bike.living_occupants(pool).collect();
    if living.is_empty() {
        return Err(GovernanceError::NoOccupants);
    }
    let valid: Vec<Ballot<AgentId>> = ballots
        .iter()
        .filter(|b| living.contains(&b.voter) && living.contains(&b.choice))
        .copied()
        .collect();
    let winner = plurality(&valid)
        .first()
        .map(|&(c, _)| c)
        .unwrap_or_else(|| *living.iter().min().expect("non-empty"));
    bike.leader = Some(winner);
    Ok(winner)
}

/// Outcome of a governed target decision.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct TargetDecision {
    pub target: Option<LootboxId>,
    /// Ballots cast to reach it; zero when pruning left at most one option.
    pub ballots_cast: u64,
}

/// Governed lootbox targeting: prune the unconsumed boxes through the bike's
/// TargetSelection rules, vote only if more than one survives. Plurality
/// ties break to the nearest candidate, then the lowest id.
pub fn select_target(
    bike: &Megabike,
    lootboxes: &[Lootbox],
    pool: &AgentPool,
    mode: EngineMode,
    stats: &mut EvalStats,
) -> Result<TargetDecision, GovernanceError> {
    let candidates: Vec<TargetCandidate> = lootboxes
        .iter()
        .filter(|b| !b.is_consumed())
        .map(|b| TargetCandidate {
            id: b.id,
            distance: bike.position.distance_to(b.position),
            payoff: b.payoff(),
        })
        .collect();
    let entities: Vec<Entity> = candidates
        .iter()
        .map(|c| Entity::Lootbox { distance: c.distance, payoff: c.payoff.units() })
        .collect();
    let surviving =
        bike.ruleset.prune_indices(&entities, ActionKind::TargetSelection, mode, stats)?;

    match surviving.len() {
        0 => Ok(TargetDecision { target: None, ballots_cast: 0 }),
        1 => Ok(TargetDecision { target: Some(candidates[surviving[0]].id), ballots_cast: 0 }),
        _ => {
            let pruned: Vec<TargetCandidate> = surviving.iter().map(|&i| candidates[i]).collect();
            let ballots: Vec<Ballot<LootboxId>> = bike
                .living_occupants(pool)
                .map(|id| vote_for_target(pool.get(id), &pruned).expect("pruned is non-empty"))
                .collect();
            let tally = plurality(&ballots);
            let top_count = tally.first().map(|&(_, n)| n).unwrap_or(0);
            let winner = tally
                .iter()
                .take_while(|&&(_, n)| n == top_count)
                .map(|&(id, _)| {
                    let c = pruned.iter().find(|c| c.id == id).expect("tallied candidate");
                    (c.id, c.distance)
                })
                .min_by(|a, b| a.1.total_cmp(&b.1).then(a.0.cmp(&b.0)))
                .map(|(id, _)| id);
            Ok(TargetDecision { target: winner, ballots_cast: ballots.len() as u64 })
        }
    }
}

/// Splits `payoff` across `recipients` exactly: every milli-unit of the
/// payoff is handed out, with the integer remainder credited to the last
/// recipient.
pub fn split_payoff(
    payoff: Energy,
    recipients: &[(AgentId, f64)],
    policy: AllocationPolicy,
) -> Vec<(AgentId, Energy)> {
    if recipients.is_empty() {
        return Vec::new();
    }
    let total = payoff.millis();
    let n = recipients.len() as i64;
    let weight_sum: f64 = recipients.iter().map(|(_, w)| w.max(0.0)).sum();

    let mut shares: Vec<i64> = match policy {
        AllocationPolicy::Contribution if weight_sum > 0.0 => recipients
            .iter()
            .map(|(_, w)| ((total as f64) * (w.max(0.0) / weight_sum)).floor() as i64)
            .collect(),
        // Equal split is also the fallback when nobody has contributed yet.
        _ => vec![total / n; recipients.len()],
    };
    let handed_out: i64 = shares.iter().sum();
    debug_assert!(handed_out <= total);
    *shares.last_mut().expect("non-empty") += total - handed_out;

    recipients
        .iter()
        .zip(shares)
        .map(|(&(id, _), millis)| (id, Energy::from_millis(millis)))
        .collect()
}

/// Consumes the lootbox and credits the split to the recipients.
pub fn allocate_loot(
    lootbox: &mut Lootbox,
    recipients: &[(AgentId, f64)],
    policy: AllocationPolicy,
    pool: &mut AgentPool,
    e_max: Energy,
) -> Result<Vec<(AgentId, Energy)>, GovernanceError> {
    let payoff = lootbox.consume().ok_or(GovernanceError::AlreadyConsumed)?;
    let split = split_payoff(payoff, recipients, policy);
    for &(id, amount) in &split {
        pool.get_mut(id).credit(amount, e_max);
    }
    Ok(split)
}

/// Resolves amendment proposals: grouped by (rule, row, sign), a group
/// carrying a strict majority of the living occupants is enacted exactly
/// once. At most one enactment per rule per round; losers are dropped.
/// Returns the enacted rule ids.
pub fn resolve_mutations(
    bike: &mut Megabike,
    living_occupants: usize,
    proposals: &[MutationProposal],
) -> Vec<RuleId> {
    let mut seen: Vec<(AgentId, RuleId)> = Vec::new();
    let mut groups: HashMap<(RuleId, usize, bool), (usize, f64)> = HashMap::new();
    for p in proposals {
        // one proposal per agent per rule per round
        if seen.contains(&(p.proposer, p.rule)) {
            continue;
        }
        seen.push((p.proposer, p.rule));
        let entry = groups.entry((p.rule, p.row, p.fraction > 0.0)).or_insert((0, p.fraction));
        entry.0 += 1;
    }

    let mut keys: Vec<(RuleId, usize, bool)> = groups.keys().copied().collect();
    keys.sort();

    let mut enacted = Vec::new();
    for key in keys {
        let (votes, fraction) = groups[&key];
        if votes * 2 <= living_occupants {
            continue;
        }
        let (rule_id, row, _) = key;
        if enacted.contains(&rule_id) {
            continue;
        }
        let Some(rule) = bike.ruleset.get(rule_id) else { continue };
        let Ok(amended) = rule.apply_slack(row, fraction) else { continue };
        bike.ruleset.replace(amended).expect("rule id registered");
        enacted.push(rule_id);
    }
    enacted
}

/// Election of a leader through the governed path: occupants are pruned by
/// the bike's Election rules first; a single survivor is seated without a
/// vote, otherwise the (pruned) candidates go to a uniform ballot.
pub fn assign_leader(
    bike: &mut Megabike,
    pool: &AgentPool,
    mode: EngineMode,
    stats: &mut EvalStats,
    rng: &mut impl Rng,
) -> Result<(AgentId, u64), GovernanceError> {
    let living: Vec<AgentId> = bike.living_occupants(pool).collect();
    if living.is_empty() {
        return Err(GovernanceError::NoOccupants);
    }
    let entities: Vec<Entity> = living
        .iter()
        .map(|&id| {
            let a = pool.get(id);
            Entity::Agent { energy: a.energy().units(), contribution: a.contribution() }
        })
        .collect();
    let surviving = bike.ruleset.prune_indices(&entities, ActionKind::Election, mode, stats)?;
    let candidates: Vec<AgentId> = if surviving.is_empty() {
        living.clone()
    } else {
        surviving.iter().map(|&i| living[i]).collect()
    };

    if candidates.len() == 1 {
        bike.leader = Some(candidates[0]);
        return Ok((candidates[0], 0));
    }
    let ballots: Vec<Ballot<AgentId>> = living
        .iter()
        .map(|&id| vote_among(pool.get(id), &candidates, rng).expect("non-empty candidates"))
        .collect();
    let cast = ballots.len() as u64;
    let winner = elect_leader(bike, pool, &ballots)?;
    Ok((winner, cast))
}

/// Applies exclusion votes and the automatic removal of eliminated agents,
/// then admits unseated living agents to free seats in ascending bike-id
/// order.
pub fn exclusion_and_admission(
    bikes: &mut [Megabike],
    pool: &mut AgentPool,
    exclusion_votes: &[Ballot<AgentId>],
) {
    let mut expelled_now: Vec<AgentId> = Vec::new();
    for bike in bikes.iter_mut() {
        if bike.terminated {
            continue;
        }
        let living = bike.living_count(pool);
        let votes: Vec<Ballot<AgentId>> = exclusion_votes
            .iter()
            .filter(|b| {
                bike.occupants.contains(&b.voter)
                    && bike.occupants.contains(&b.choice)
                    && pool.get(b.voter).is_alive()
            })
            .copied()
            .collect();
        let expelled: Vec<AgentId> = plurality(&votes)
            .into_iter()
            .filter(|&(_, n)| n * 2 > living)
            .map(|(id, _)| id)
            .collect();

        bike.occupants.retain(|&id| {
            let agent = pool.get(id);
            agent.is_alive() && !expelled.contains(&id)
        });
        for id in expelled {
            pool.get_mut(id).bike = None;
            expelled_now.push(id);
        }
        if let Some(leader) = bike.leader {
            if !bike.occupants.contains(&leader) {
                bike.leader = None;
            }
        }
    }

    // Admission: unseated living agents, lowest bike id first. An agent
    // expelled this round waits at least until the next one.
    let unseated: Vec<AgentId> = pool
        .living()
        .filter(|a| a.bike.is_none())
        .map(|a| a.id)
        .filter(|id| !expelled_now.contains(id))
        .collect();
    let mut queue = unseated;
    queue.sort();
    for agent_id in queue {
        let Some(bike) = bikes
            .iter_mut()
            .filter(|b| !b.terminated && b.free_seats() > 0)
            .min_by_key(|b| b.id)
        else {
            break;
        };
        bike.occupants.push(agent_id);
        pool.get_mut(agent_id).bike = Some(bike.id);
    }
}
