//! The game loop: per-iteration phases (self-selection, social arrangements,
//! role assignment) around an operation phase of governed rounds.

use std::time::Instant;

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use thiserror::Error;

use crate::agents::{decide_action, propose_slack, AgentPool, MovementDirective, PedalAction};
use crate::governance::{
    allocate_loot, assign_leader, form_bikes, resolve_mutations, select_target, Megabike,
};
use crate::rules::{ActionKind, EngineMode, Entity, EvalStats, RuleCache, RuleError};
use crate::sim::config::{ConfigError, SimConfig};
use crate::sim::metrics::{
    deliberation_sessions_avoided, Phase, PhaseEvent, RoundRecord, RunMetrics, RunSummary,
    TraceHasher,
};
use crate::types::{AgentId, Energy};
use crate::world::{advance_threat, spawn_lootboxes, step_kinematics, GridPosition};
use crate::rules::ACTION_KIND_COUNT;

#[derive(Debug, Error)]
pub enum SimError {
    #[error(transparent)]
    Config(#[from] ConfigError),
    #[error("rule evaluation failed: {0}")]
    Rule(#[from] RuleError),
    #[error("governance failed: {0}")]
    Governance(#[from] crate::governance::GovernanceError),
}

// Substream indices of the master seed; toggling one feature never perturbs
// the draws of another.
const STREAM_WORLD: u64 = 1;
const STREAM_MEMBERSHIP: u64 = 2;
const STREAM_AGENTS: u64 = 3;

struct Streams {
    world: ChaCha8Rng,
    membership: ChaCha8Rng,
    agents: ChaCha8Rng,
}

impl Streams {
    fn from_seed(seed: u64) -> Streams {
        let make = |stream: u64| {
            let mut rng = ChaCha8Rng::seed_from_u64(seed);
            rng.set_stream(stream);
            rng
        };
        Streams {
            world: make(STREAM_WORLD),
            membership: make(STREAM_MEMBERSHIP),
            agents: make(STREAM_AGENTS),
        }
    }
}

// Trace event tags.
const TRACE_MEMBER: u64 = 1;
const TRACE_LEADER: u64 = 2;
const TRACE_TARGET: u64 = 3;
const TRACE_DIRECTIVE: u64 = 4;
const TRACE_AMEND: u64 = 5;
const TRACE_ACQUIRE: u64 = 6;
const TRACE_TERMINATE: u64 = 7;

/// Runs a full game from the config, loading the configured base ruleset.
pub fn run_game(config: &SimConfig) -> Result<RunMetrics, SimError> {
    config.validate()?;
    let base = config.base_ruleset()?;
    run_game_with_ruleset(config, &base)
}

/// Runs a full game with an explicit base ruleset (the experiment harness
/// builds synthetic rulesets programmatically).
pub fn run_game_with_ruleset(
    config: &SimConfig,
    base_ruleset: &RuleCache,
) -> Result<RunMetrics, SimError> {
    config.validate()?;
    let mode = if config.stratified { EngineMode::Stratified } else { EngineMode::FullSweep };
    let world = &config.world;
    let agent_params = &config.agent;
    let e_max = agent_params.e_max_energy();
    let idle_cost = agent_params.idle_cost_energy();
    let agent_count = config.agent_count as usize;
    let seats = config.seats as usize;

    let mut streams = Streams::from_seed(config.seed);
    let mut pool = AgentPool::new(agent_count, agent_params.initial());
    let mut survival_rounds = vec![0u32; agent_count];

    let mut records: Vec<RoundRecord> = Vec::new();
    let mut phases: Vec<PhaseEvent> = Vec::new();
    let mut trace = TraceHasher::default();
    let mut iteration_nanos: Vec<u64> = Vec::new();

    let mut total_loot = Energy::ZERO;
    let mut total_rules_evaluated: u64 = 0;
    let mut ballots_cast: u64 = 0;
    let mut last_alive_round: u32 = 0;
    let mut final_radius_bound: f64 = 0.0;
    let mut deadlocked = false;

    #[cfg(debug_assertions)]
    let mut audit = EnergyAudit::new(&pool);

    'iterations: for iteration in 1..=config.max_iterations {
        if pool.living_count() == 0 {
            // Nobody left to negotiate membership; the run cannot proceed.
            break;
        }
        let iteration_start = Instant::now();

        // --- self-selection phase: negotiate membership, fresh world state.
        phases.push(PhaseEvent { iteration, phase: Phase::SelfSelection });
        let living_ids: Vec<AgentId> = pool.living().map(|a| a.id).collect();
        let mut bikes = form_bikes(
            &living_ids,
            seats,
            base_ruleset,
            GridPosition::ORIGIN,
            &mut streams.membership,
        );
        for bike in &bikes {
            trace.update_u64(TRACE_MEMBER);
            trace.update_u64(bike.id.0 as u64);
            for &id in &bike.occupants {
                pool.get_mut(id).bike = Some(bike.id);
                trace.update_u64(id.0 as u64);
            }
        }
        let mut lootboxes =
            spawn_lootboxes(config.lootbox_ratio, agent_count, world, &mut streams.world);
        let mut threat =
            world.spawn_threat(bikes.first().map(|b| b.position).unwrap_or(GridPosition::ORIGIN));

        // --- action phase: the bikes' social arrangements are the adopted
        // ruleset deep-copies; amendments later in the iteration stay local.
        phases.push(PhaseEvent { iteration, phase: Phase::SocialArrangements });

        // --- role assignment.
        phases.push(PhaseEvent { iteration, phase: Phase::RoleAssignment });
        let mut role_stats = EvalStats::default();
        for bike in bikes.iter_mut() {
            let (leader, cast) =
                assign_leader(bike, &pool, mode, &mut role_stats, &mut streams.agents)?;
            ballots_cast += cast;
            trace.update_u64(TRACE_LEADER);
            trace.update_u64(bike.id.0 as u64);
            trace.update_u64(leader.0 as u64);
        }
        total_rules_evaluated += role_stats.rules_evaluated;

        // --- operation phase.
        phases.push(PhaseEvent { iteration, phase: Phase::Operation });
        let mut stall_streak: u32 = 0;
        let mut prev_min_gap = min_threat_gap(&threat.position, &bikes);

        for round in 1..=config.max_rounds {
            let mut any_alive = false;
            for agent in pool.living() {
                survival_rounds[agent.id.0 as usize] += 1;
                any_alive = true;
            }
            if !any_alive {
                break;
            }
            last_alive_round = last_alive_round.max(round);

            let live_bikes: Vec<usize> = bikes
                .iter()
                .enumerate()
                .filter(|(_, b)| !b.terminated && b.living_count(&pool) > 0)
                .map(|(i, _)| i)
                .collect();
            if live_bikes.is_empty() {
                break;
            }

            let bike_count = bikes.len();
            let mut bike_stats = vec![EvalStats::default(); bike_count];
            let mut bike_nanos = vec![0u64; bike_count];
            let mut bike_loot = vec![Energy::ZERO; bike_count];
            let mut moved_any = false;
            let mut any_feasible_target = false;

            // Per-bike governed decisions and crew actions.
            for &bike_idx in &live_bikes {
                let timer = Instant::now();
                let stats = &mut bike_stats[bike_idx];

                // Rule amendment: one proposal per living occupant per round.
                if config.mutable {
                    if let Some(rule_name) = &config.amendable_rule {
                        let bike = &bikes[bike_idx];
                        let proposals: Vec<_> = match bike.ruleset.find_by_name(rule_name) {
                            Some(rule) => bike
                                .living_occupants(&pool)
                                .filter_map(|id| propose_slack(pool.get(id), rule, e_max))
                                .collect(),
                            None => Vec::new(),
                        };
                        if !proposals.is_empty() {
                            let living = bike.living_count(&pool);
                            let bike = &mut bikes[bike_idx];
                            for rule_id in resolve_mutations(bike, living, &proposals) {
                                let bound = bike
                                    .ruleset
                                    .get(rule_id)
                                    .and_then(|r| r.constant_entry(0))
                                    .unwrap_or(0.0);
                                trace.update_u64(TRACE_AMEND);
                                trace.update_u64(bike.id.0 as u64);
                                trace.update_u64(bound.to_bits());
                            }
                        }
                    }
                }

                // Target decision: prune, then vote only if needed.
                let bike = &bikes[bike_idx];
                let decision = select_target(bike, &lootboxes, &pool, mode, stats)?;
                ballots_cast += decision.ballots_cast;
                trace.update_u64(TRACE_TARGET);
                trace.update_u64(bike.id.0 as u64);
                trace.update_u64(decision.target.map(|t| t.0 as u64 + 1).unwrap_or(0));
                if decision.target.is_some() {
                    any_feasible_target = true;
                }

                // Movement directive from the leader, checked against the
                // contract's movement rules.
                let proposed = match decision.target {
                    Some(target) => {
                        let target_pos = lootboxes[target.0 as usize].position;
                        MovementDirective {
                            heading: bike.position.heading_to(target_pos),
                            intensity: 1.0,
                        }
                    }
                    None => MovementDirective::hold(bike.heading),
                };
                let admitted = bike.ruleset.admits(
                    &Entity::Directive {
                        heading: proposed.heading,
                        intensity: proposed.intensity,
                    },
                    ActionKind::MovementDirective,
                    mode,
                    stats,
                )?;
                let directive =
                    if admitted { proposed } else { MovementDirective::hold(bike.heading) };
                trace.update_u64(TRACE_DIRECTIVE);
                trace.update_u64(directive.heading.to_bits());
                trace.update_u64(directive.intensity.to_bits());

                // Crew actions and kinematics.
                let occupant_ids = bikes[bike_idx].occupants.clone();
                let mut forces: Vec<PedalAction> = Vec::with_capacity(occupant_ids.len());
                for id in occupant_ids {
                    if let Some(action) = decide_action(
                        pool.get_mut(id),
                        &directive,
                        agent_params,
                        &mut streams.agents,
                    ) {
                        #[cfg(debug_assertions)]
                        audit.note_pedal(id, action.pedal, agent_params);
                        forces.push(action);
                    }
                }
                let bike = &mut bikes[bike_idx];
                bike.heading = directive.heading;
                let next = step_kinematics(bike.position, bike.heading, &forces, world);
                if next != bike.position {
                    moved_any = true;
                }
                bike.position = next;

                bike_nanos[bike_idx] += timer.elapsed().as_nanos() as u64;
            }

            // Environment: basal drain, starved crews, then the threat.
            if !idle_cost.is_zero() {
                for idx in 0..pool.len() {
                    let agent = pool.get_mut(AgentId(idx as u32));
                    if agent.is_alive() {
                        agent.spend(idle_cost);
                        #[cfg(debug_assertions)]
                        audit.note_idle(AgentId(idx as u32), idle_cost);
                    }
                }
            }
            for bike in bikes.iter_mut() {
                if !bike.terminated && bike.living_count(&pool) == 0 {
                    bike.terminated = true;
                }
            }

            let threat_targets: Vec<(usize, GridPosition)> = bikes
                .iter()
                .enumerate()
                .filter(|(_, b)| !b.terminated)
                .map(|(i, b)| (i, b.position))
                .collect();
            let positions: Vec<GridPosition> =
                threat_targets.iter().map(|&(_, p)| p).collect();
            let (next_threat, captured) = advance_threat(&threat, &positions, world);
            threat = next_threat;
            for pos_idx in captured {
                let (bike_idx, _) = threat_targets[pos_idx];
                let bike = &mut bikes[bike_idx];
                bike.terminated = true;
                trace.update_u64(TRACE_TERMINATE);
                trace.update_u64(bike.id.0 as u64);
                for id in bike.occupants.clone() {
                    #[cfg(debug_assertions)]
                    audit.note_termination(id, &pool);
                    pool.get_mut(id).terminate();
                }
            }
            let min_gap_after = min_threat_gap(&threat.position, &bikes);

            // Lootbox acquisition and governed allocation.
            for box_idx in 0..lootboxes.len() {
                if lootboxes[box_idx].is_consumed() {
                    continue;
                }
                let box_pos = lootboxes[box_idx].position;
                let winner = bikes
                    .iter()
                    .enumerate()
                    .filter(|(_, b)| {
                        !b.terminated
                            && b.position.distance_to(box_pos) <= world.acquisition_radius
                    })
                    .map(|(i, b)| (i, b.id))
                    .min_by_key(|&(_, id)| id);
                let Some((bike_idx, bike_id)) = winner else { continue };

                let timer = Instant::now();
                let bike = &bikes[bike_idx];
                let living: Vec<AgentId> = bike.living_occupants(&pool).collect();
                let entities: Vec<Entity> = living
                    .iter()
                    .map(|&id| {
                        let a = pool.get(id);
                        Entity::Agent {
                            energy: a.energy().units(),
                            contribution: a.contribution(),
                        }
                    })
                    .collect();
                let eligible = bike.ruleset.prune_indices(
                    &entities,
                    ActionKind::Allocation,
                    mode,
                    &mut bike_stats[bike_idx],
                )?;
                let recipients: Vec<(AgentId, f64)> = eligible
                    .iter()
                    .map(|&i| (living[i], pool.get(living[i]).contribution()))
                    .collect();

                let lootbox = &mut lootboxes[box_idx];
                if recipients.is_empty() {
                    // Reached, but the contract admits no recipient: the
                    // payoff is forfeited.
                    lootbox.consume();
                } else {
                    let payoff = lootbox.payoff();
                    let granted =
                        allocate_loot(lootbox, &recipients, config.allocation, &mut pool, e_max)
                            .expect("box checked unconsumed");
                    #[cfg(debug_assertions)]
                    for &(id, amount) in &granted {
                        audit.note_credit(id, amount, e_max, &pool);
                    }
                    let _ = granted;
                    bike_loot[bike_idx] += payoff;
                    total_loot += payoff;
                }
                trace.update_u64(TRACE_ACQUIRE);
                trace.update_u64(lootbox.id.0 as u64);
                trace.update_u64(bike_id.0 as u64);
                bike_nanos[bike_idx] += timer.elapsed().as_nanos() as u64;
            }

            // Admission/exclusion: drop the dead, then admit unseated living
            // agents wherever a bike's contract accepts them.
            apply_round_membership(&mut bikes, &mut pool, mode, &mut bike_stats)?;

            // Deadlock bookkeeping: a stalled round moves nothing, offers no
            // feasible target, and leaves the threat no closer than before.
            let closing = min_gap_after < prev_min_gap;
            prev_min_gap = min_gap_after;
            if !moved_any && !any_feasible_target && !closing {
                stall_streak += 1;
            } else {
                stall_streak = 0;
            }
            if stall_streak >= config.stall_rounds_deadlock {
                deadlocked = true;
            }

            // One record per bike that began the round live.
            for &bike_idx in &live_bikes {
                let bike = &bikes[bike_idx];
                let energy_total: Energy =
                    bike.living_occupants(&pool).map(|id| pool.get(id).energy()).sum();
                records.push(RoundRecord {
                    iteration,
                    round,
                    bike: bike.id,
                    alive_agents: bike.living_count(&pool) as u32,
                    energy_total: energy_total.units(),
                    loot_acquired: bike_loot[bike_idx].units(),
                    radius_bound: amendable_bound(bike, config),
                    rules_evaluated: bike_stats[bike_idx].rules_evaluated,
                    wall_clock_nanos: bike_nanos[bike_idx],
                });
                total_rules_evaluated += bike_stats[bike_idx].rules_evaluated;
            }

            #[cfg(debug_assertions)]
            audit.check(&pool);

            if bikes.iter().all(|b| b.terminated) || deadlocked {
                break;
            }
        }

        if !bikes.is_empty() {
            final_radius_bound = bikes
                .iter()
                .map(|b| amendable_bound(b, config))
                .sum::<f64>()
                / bikes.len() as f64;
        }
        iteration_nanos.push(iteration_start.elapsed().as_nanos() as u64);
        if deadlocked {
            break 'iterations;
        }
    }

    let iterations_executed = iteration_nanos.len() as u32;
    let avg_survival_rounds =
        survival_rounds.iter().map(|&r| r as f64).sum::<f64>() / agent_count as f64;
    let runtime_per_iteration_nanos = if iteration_nanos.is_empty() {
        0
    } else {
        iteration_nanos.iter().sum::<u64>() / iteration_nanos.len() as u64
    };

    Ok(RunMetrics {
        records,
        summary: RunSummary {
            avg_survival_rounds,
            last_alive_round,
            total_loot: total_loot.units(),
            runtime_per_iteration_nanos,
            iterations_executed,
            deliberation_sessions_avoided: deliberation_sessions_avoided(
                config.max_iterations as u64,
                config.max_rounds as u64,
                ACTION_KIND_COUNT as u64,
            ),
            ballots_cast,
            final_radius_bound,
            rules_evaluated: total_rules_evaluated,
            trace_hash: trace.finish(),
            deadlocked,
        },
        config_iterations: config.max_iterations,
        config_rounds: config.max_rounds,
        phases,
    })
}

/// |constant| of the amendable rule's first clause in this bike's contract.
fn amendable_bound(bike: &Megabike, config: &SimConfig) -> f64 {
    config
        .amendable_rule
        .as_ref()
        .and_then(|name| bike.ruleset.find_by_name(name))
        .and_then(|rule| rule.constant_entry(0))
        .map(f64::abs)
        .unwrap_or(0.0)
}

fn min_threat_gap(threat_pos: &GridPosition, bikes: &[Megabike]) -> f64 {
    bikes
        .iter()
        .filter(|b| !b.terminated)
        .map(|b| threat_pos.distance_to(b.position))
        .fold(f64::INFINITY, f64::min)
}

/// Removes eliminated occupants, then walks unseated living agents into free
/// seats (lowest bike id first) wherever the bike's admission rules accept
/// them. Default agent policy casts no exclusion votes.
fn apply_round_membership(
    bikes: &mut [Megabike],
    pool: &mut AgentPool,
    mode: EngineMode,
    bike_stats: &mut [EvalStats],
) -> Result<(), SimError> {
    for bike in bikes.iter_mut() {
        bike.occupants.retain(|&id| pool.get(id).is_alive());
        if let Some(leader) = bike.leader {
            if !bike.occupants.contains(&leader) {
                bike.leader = None;
            }
        }
    }

    let mut unseated: Vec<AgentId> =
        pool.living().filter(|a| a.bike.is_none()).map(|a| a.id).collect();
    unseated.sort();
    for agent_id in unseated {
        let agent = pool.get(agent_id);
        let entity = Entity::Agent {
            energy: agent.energy().units(),
            contribution: agent.contribution(),
        };
        let mut chosen = None;
        for (idx, bike) in bikes.iter().enumerate() {
            if bike.terminated || bike.free_seats() == 0 {
                continue;
            }
            if bike.ruleset.admits(&entity, ActionKind::Admission, mode, &mut bike_stats[idx])? {
                chosen = Some(idx);
                break;
            }
        }
        if let Some(idx) = chosen {
            bikes[idx].occupants.push(agent_id);
            pool.get_mut(agent_id).bike = Some(bikes[idx].id);
        }
    }
    Ok(())
}

/// Debug-build ledger audit: every agent's energy must equal
/// `initial - idle - pedal + loot`, clamped to [0, e_max] step by step.
#[cfg(debug_assertions)]
struct EnergyAudit {
    expected: Vec<Energy>,
}

#[cfg(debug_assertions)]
impl EnergyAudit {
    fn new(pool: &AgentPool) -> EnergyAudit {
        EnergyAudit { expected: pool.iter().map(|a| a.energy()).collect() }
    }

    fn note_pedal(&mut self, id: AgentId, pedal: f64, params: &crate::agents::AgentParams) {
        let cost = Energy::from_millis(
            (pedal * params.pedal_cost_energy().millis() as f64).round() as i64,
        );
        let e = &mut self.expected[id.0 as usize];
        *e = e.saturating_sub(cost);
    }

    fn note_idle(&mut self, id: AgentId, idle: Energy) {
        let e = &mut self.expected[id.0 as usize];
        *e = e.saturating_sub(idle);
    }

    fn note_credit(&mut self, id: AgentId, amount: Energy, e_max: Energy, _pool: &AgentPool) {
        let e = &mut self.expected[id.0 as usize];
        *e = (*e + amount).min(e_max);
    }

    fn note_termination(&mut self, id: AgentId, _pool: &AgentPool) {
        self.expected[id.0 as usize] = Energy::ZERO;
    }

    fn check(&self, pool: &AgentPool) {
        for agent in pool.iter() {
            debug_assert_eq!(
                agent.energy(),
                self.expected[agent.id.0 as usize],
                "energy ledger diverged for {}",
                agent.id
            );
        }
    }
}

/// True when the phase log follows the iteration structure: self-selection,
/// social arrangements, role assignment, then the operation phase, with no
/// operation event before that iteration's role assignment.
pub fn phases_follow_game_loop(phases: &[PhaseEvent]) -> bool {
    let expected = [
        Phase::SelfSelection,
        Phase::SocialArrangements,
        Phase::RoleAssignment,
        Phase::Operation,
    ];
    if phases.len() % expected.len() != 0 {
        return false;
    }
    let mut last_iteration = 0;
    for (chunk_idx, chunk) in phases.chunks(expected.len()).enumerate() {
        let iteration = chunk[0].iteration;
        if iteration <= last_iteration && chunk_idx > 0 {
            return false;
        }
        last_iteration = iteration;
        if chunk.iter().map(|e| e.phase).ne(expected.iter().copied()) {
            return false;
        }
        if chunk.iter().any(|e| e.iteration != iteration) {
            return false;
        }
    }
    true
}
