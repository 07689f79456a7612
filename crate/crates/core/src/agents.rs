//! Agent state, per-round action selection, ballots, and the slack-proposal
//! policy.

use rand::Rng;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::rules::{Rule, RuleId};
use crate::types::{AgentId, BikeId, Energy, LootboxId};

/// Fraction by which one approved amendment scales a constraint bound.
pub const SLACK_STEP: f64 = 0.05;

/// Agent tuning block of the simulation config.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, rename_all = "camelCase")]
pub struct AgentParams {
    /// Energy capacity, whole units.
    pub e_max: f64,
    /// Energy at initialisation, whole units.
    pub initial_energy: f64,
    /// Energy spent per unit of pedal effort per round.
    pub pedal_cost: f64,
    /// Basal energy drain per round while alive.
    pub idle_cost: f64,
    /// Probability of free-riding (pedalling zero) on a given round.
    pub p_defect: f64,
}

impl Default for AgentParams {
    fn default() -> AgentParams {
        AgentParams {
            e_max: 100.0,
            initial_energy: 50.0,
            pedal_cost: 1.0,
            idle_cost: 1.0,
            p_defect: 0.0,
        }
    }
}

impl AgentParams {
    pub fn e_max_energy(&self) -> Energy {
        Energy::from_units(self.e_max)
    }

    pub fn initial(&self) -> Energy {
        Energy::from_units(self.initial_energy)
    }

    pub fn pedal_cost_energy(&self) -> Energy {
        Energy::from_units(self.pedal_cost)
    }

    pub fn idle_cost_energy(&self) -> Energy {
        Energy::from_units(self.idle_cost)
    }
}

/// An energy-bearing actor. Energy stays in [0, e_max]; hitting zero
/// eliminates the agent for good.
#[derive(Debug, Clone, PartialEq)]
pub struct Agent {
    pub id: AgentId,
    energy: Energy,
    pub bike: Option<BikeId>,
    contribution: f64,
    alive: bool,
}

impl Agent {
    pub fn new(id: AgentId, energy: Energy) -> Agent {
        Agent { id, energy, bike: None, contribution: 0.0, alive: !energy.is_zero() }
    }

    pub fn energy(&self) -> Energy {
        self.energy
    }

    pub fn is_alive(&self) -> bool {
        self.alive
    }

    /// Cumulative pedal effort; non-decreasing while alive.
    pub fn contribution(&self) -> f64 {
        self.contribution
    }

    /// Deducts energy, eliminating the agent when the ledger hits zero.
    pub fn spend(&mut self, amount: Energy) {
        if !self.alive {
            return;
        }
        self.energy = self.energy.saturating_sub(amount);
        if self.energy.is_zero() {
            self.alive = false;
            self.bike = None;
        }
    }

    /// Credits loot income, clamped to capacity.
    pub fn credit(&mut self, amount: Energy, e_max: Energy) {
        if !self.alive {
            return;
        }
        self.energy = (self.energy + amount).min(e_max);
    }

    fn add_contribution(&mut self, effort: f64) {
        debug_assert!(effort >= 0.0);
        self.contribution += effort;
    }

    /// Kills the agent outright (threat capture).
    pub fn terminate(&mut self) {
        self.alive = false;
        self.bike = None;
        self.energy = Energy::ZERO;
    }
}

/// Pool of all agents in a run, indexed by id.
#[derive(Debug, Clone)]
pub struct AgentPool {
    agents: Vec<Agent>,
}

impl AgentPool {
    pub fn new(count: usize, initial: Energy) -> AgentPool {
        AgentPool {
            agents: (0..count).map(|i| Agent::new(AgentId(i as u32), initial)).collect(),
        }
    }

    pub fn get(&self, id: AgentId) -> &Agent {
        &self.agents[id.0 as usize]
    }

    pub fn get_mut(&mut self, id: AgentId) -> &mut Agent {
        &mut self.agents[id.0 as usize]
    }

    pub fn iter(&self) -> impl Iterator<Item = &Agent> {
        self.agents.iter()
    }

    pub fn living(&self) -> impl Iterator<Item = &Agent> {
        self.agents.iter().filter(|a| a.is_alive())
    }

    pub fn living_count(&self) -> usize {
        self.agents.iter().filter(|a| a.is_alive()).count()
    }

    pub fn len(&self) -> usize {
        self.agents.len()
    }

    pub fn is_empty(&self) -> bool {
        self.agents.is_empty()
    }
}

/// One round of pedal/brake/steer. An agent never pedals and brakes in the
/// same round.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct PedalAction {
    pub agent: AgentId,
    pub pedal: f64,
    pub brake: f64,
    pub steer_vote: f64,
}

impl PedalAction {
    pub fn pedalling(agent: AgentId, effort: f64, heading: f64) -> PedalAction {
        PedalAction { agent, pedal: effort.clamp(0.0, 1.0), brake: 0.0, steer_vote: heading }
    }

    pub fn braking(agent: AgentId, effort: f64, heading: f64) -> PedalAction {
        PedalAction { agent, pedal: 0.0, brake: effort.clamp(0.0, 1.0), steer_vote: heading }
    }

    pub fn coasting(agent: AgentId, heading: f64) -> PedalAction {
        PedalAction { agent, pedal: 0.0, brake: 0.0, steer_vote: heading }
    }
}

/// A cast vote for one candidate out of a presented set.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct Ballot<C> {
    pub voter: AgentId,
    pub choice: C,
}

/// The leader's round instruction: heading plus pedal intensity.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct MovementDirective {
    pub heading: f64,
    pub intensity: f64,
}

impl MovementDirective {
    pub fn hold(heading: f64) -> MovementDirective {
        MovementDirective { heading, intensity: 0.0 }
    }
}

/// A proposed amendment: scale the constant bound of `(rule, row)` by
/// `1 + fraction`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct MutationProposal {
    pub proposer: AgentId,
    pub rule: RuleId,
    pub row: usize,
    pub fraction: f64,
}

#[derive(Debug, Error, Clone, PartialEq, Eq)]
pub enum VoteError {
    #[error("no candidates to vote on")]
    EmptyCandidates,
}

/// Compliant action selection under the leader's directive: pedal at the
/// directed intensity (paying `pedal_cost * pedal`), or free-ride with
/// probability `p_defect`. Dead or unseated agents emit nothing.
pub fn decide_action(
    agent: &mut Agent,
    directive: &MovementDirective,
    params: &AgentParams,
    rng: &mut impl Rng,
) -> Option<PedalAction> {
    if !agent.is_alive() || agent.bike.is_none() {
        return None;
    }
    let defects = params.p_defect > 0.0 && rng.gen_bool(params.p_defect.clamp(0.0, 1.0));
    let effort = if defects { 0.0 } else { directive.intensity.clamp(0.0, 1.0) };
    if effort > 0.0 {
        let cost = Energy::from_millis(
            (effort * params.pedal_cost_energy().millis() as f64).round() as i64,
        );
        agent.spend(cost);
        agent.add_contribution(effort);
    }
    Some(PedalAction::pedalling(agent.id, effort, directive.heading))
}

/// The slack-proposal policy: below half capacity ask for +5% slack on the
/// rule's bound, at or above half ask for -5%. Immutable rules draw no
/// proposal.
pub fn propose_slack(agent: &Agent, rule: &Rule, e_max: Energy) -> Option<MutationProposal> {
    if !rule.is_mutable() || !agent.is_alive() {
        return None;
    }
    let fraction = if agent.energy().millis() * 2 < e_max.millis() {
        SLACK_STEP
    } else {
        -SLACK_STEP
    };
    Some(MutationProposal { proposer: agent.id, rule: rule.id(), row: 0, fraction })
}

/// A lootbox candidate as scored by the default voting policy.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct TargetCandidate {
    pub id: LootboxId,
    pub distance: f64,
    pub payoff: Energy,
}

/// Default target preference: highest `payoff / (distance + 1)`, ties to the
/// lowest lootbox id.
pub fn vote_for_target(
    agent: &Agent,
    candidates: &[TargetCandidate],
) -> Result<Ballot<LootboxId>, VoteError> {
    let best = candidates
        .iter()
        .min_by(|a, b| {
            let score_a = a.payoff.units() / (a.distance + 1.0);
            let score_b = b.payoff.units() / (b.distance + 1.0);
            score_b.total_cmp(&score_a).then(a.id.cmp(&b.id))
        })
        .ok_or(VoteError::EmptyCandidates)?;
    Ok(Ballot { voter: agent.id, choice: best.id })
}

/// Default preference for non-lootbox candidates: uniformly at random from
/// the presented set (seeded).
pub fn vote_among<C: Copy>(
    agent: &Agent,
    candidates: &[C],
    rng: &mut impl Rng,
) -> Result<Ballot<C>, VoteError> {
    if candidates.is_empty() {
        return Err(VoteError::EmptyCandidates);
    }
    let choice = candidates[rng.gen_range(0..candidates.len())];
    Ok(Ballot { voter: agent.id, choice })
}
