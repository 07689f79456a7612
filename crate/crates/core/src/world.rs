//! The gridworld: lootbox placement, megabike kinematics, and the threat.

use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::agents::PedalAction;
use crate::types::{Energy, LootboxId};

/// A point in the unbounded gridworld, in grid units.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct GridPosition {
    pub x: f64,
    pub y: f64,
}

impl GridPosition {
    pub const ORIGIN: GridPosition = GridPosition { x: 0.0, y: 0.0 };

    pub fn distance_to(self, other: GridPosition) -> f64 {
        ((self.x - other.x).powi(2) + (self.y - other.y).powi(2)).sqrt()
    }

    /// Heading from `self` toward `target`, radians.
    pub fn heading_to(self, target: GridPosition) -> f64 {
        (target.y - self.y).atan2(target.x - self.x)
    }

    pub fn step(self, heading: f64, length: f64) -> GridPosition {
        GridPosition {
            x: self.x + length * heading.cos(),
            y: self.y + length * heading.sin(),
        }
    }
}

/// A reward object: fixed payoff, consumed at most once.
#[derive(Debug, Clone, PartialEq)]
pub struct Lootbox {
    pub id: LootboxId,
    pub position: GridPosition,
    payoff: Energy,
    consumed: bool,
}

impl Lootbox {
    pub fn new(id: LootboxId, position: GridPosition, payoff: Energy) -> Lootbox {
        Lootbox { id, position, payoff, consumed: false }
    }

    pub fn payoff(&self) -> Energy {
        self.payoff
    }

    pub fn is_consumed(&self) -> bool {
        self.consumed
    }

    /// Marks the box consumed; false->true exactly once. Returns the payoff,
    /// or `None` when it was already taken.
    pub fn consume(&mut self) -> Option<Energy> {
        if self.consumed {
            None
        } else {
            self.consumed = true;
            Some(self.payoff)
        }
    }
}

/// The pursuing hazard. Advances every round toward the nearest bike.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ThreatState {
    pub position: GridPosition,
    pub speed: f64,
}

/// World tuning block of the simulation config.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, rename_all = "camelCase")]
pub struct WorldParams {
    /// Side of the square spawn region centred on the origin.
    pub world_side: f64,
    pub threat_speed: f64,
    /// Bikes within this distance of the threat are terminated.
    pub capture_radius: f64,
    /// Bikes within this distance of a lootbox acquire it that round.
    pub acquisition_radius: f64,
    /// Distance behind the first bike where the threat spawns.
    pub threat_spawn_gap: f64,
    /// Inclusive payoff range, whole energy units.
    pub payoff_range: [f64; 2],
    /// Grid units of displacement per unit of net pedal force.
    #[serde(rename = "K")]
    pub force_to_displacement: f64,
}

impl Default for WorldParams {
    fn default() -> WorldParams {
        WorldParams {
            world_side: 2000.0,
            threat_speed: 2.0,
            capture_radius: 10.0,
            acquisition_radius: 5.0,
            threat_spawn_gap: 50.0,
            payoff_range: [10.0, 50.0],
            force_to_displacement: 1.0,
        }
    }
}

impl WorldParams {
    /// Threat spawned `threat_spawn_gap` units behind `front`, on -x.
    pub fn spawn_threat(&self, front: GridPosition) -> ThreatState {
        ThreatState {
            position: GridPosition { x: front.x - self.threat_spawn_gap, y: front.y },
            speed: self.threat_speed,
        }
    }
}

/// Places `floor(ratio * agent_count)` lootboxes uniformly at random in the
/// spawn square, payoffs uniform over the whole-unit range.
pub fn spawn_lootboxes(
    ratio: f64,
    agent_count: usize,
    params: &WorldParams,
    rng: &mut impl Rng,
) -> Vec<Lootbox> {
    let count = (ratio * agent_count as f64).floor() as usize;
    let half = params.world_side / 2.0;
    let lo = params.payoff_range[0].round() as i64;
    let hi = params.payoff_range[1].round() as i64;
    (0..count)
        .map(|i| {
            let x = rng.gen_range(-half..=half);
            let y = rng.gen_range(-half..=half);
            let payoff = Energy::from_millis(rng.gen_range(lo..=hi) * 1000);
            Lootbox::new(LootboxId(i as u32), GridPosition { x, y }, payoff)
        })
        .collect()
}

/// Net forward force of a crew: pedal total minus brake total, floored at
/// zero. Individual inputs are clamped to [0, 1].
pub fn net_forward_force(forces: &[PedalAction]) -> f64 {
    let pedal: f64 = forces.iter().map(|f| f.pedal.clamp(0.0, 1.0)).sum();
    let brake: f64 = forces.iter().map(|f| f.brake.clamp(0.0, 1.0)).sum();
    (pedal - brake).max(0.0)
}

/// Displacement along `heading` from the crew's net force; the heading has
/// already been set by the governed steering directive this round.
pub fn step_kinematics(
    position: GridPosition,
    heading: f64,
    forces: &[PedalAction],
    params: &WorldParams,
) -> GridPosition {
    let displacement = net_forward_force(forces) * params.force_to_displacement;
    position.step(heading, displacement)
}

/// Moves the threat toward the nearest of `bike_positions` and reports which
/// bikes (by index) end up within the capture radius.
pub fn advance_threat(
    threat: &ThreatState,
    bike_positions: &[GridPosition],
    params: &WorldParams,
) -> (ThreatState, Vec<usize>) {
    if bike_positions.is_empty() {
        return (*threat, Vec::new());
    }
    let nearest = bike_positions
        .iter()
        .enumerate()
        .min_by(|(_, a), (_, b)| {
            threat
                .position
                .distance_to(**a)
                .total_cmp(&threat.position.distance_to(**b))
        })
        .map(|(i, _)| i)
        .expect("non-empty");
    let target = bike_positions[nearest];
    let gap = threat.position.distance_to(target);
    let position = if gap <= threat.speed {
        target
    } else {
        threat.position.step(threat.position.heading_to(target), threat.speed)
    };
    let moved = ThreatState { position, speed: threat.speed };
    let captured = bike_positions
        .iter()
        .enumerate()
        .filter(|(_, p)| moved.position.distance_to(**p) <= params.capture_radius)
        .map(|(i, _)| i)
        .collect();
    (moved, captured)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::agents::PedalAction;
    use crate::types::AgentId;
    use rand::rngs::StdRng;
    use rand::SeedableRng;

    #[test]
    fn ratio_zero_spawns_nothing() {
        let mut rng = StdRng::seed_from_u64(1);
        assert!(spawn_lootboxes(0.0, 100, &WorldParams::default(), &mut rng).is_empty());
    }

    #[test]
    fn ratio_two_and_a_half_spawns_250_for_100_agents() {
        let mut rng = StdRng::seed_from_u64(1);
        let boxes = spawn_lootboxes(2.5, 100, &WorldParams::default(), &mut rng);
        assert_eq!(boxes.len(), 250);
        for b in &boxes {
            assert!(b.position.x.abs() <= 1000.0 && b.position.y.abs() <= 1000.0);
            let units = b.payoff().units();
            assert!((10.0..=50.0).contains(&units));
            assert_eq!(units.fract(), 0.0);
        }
    }

    #[test]
    fn spawn_is_deterministic_for_a_fixed_seed() {
        let params = WorldParams::default();
        let a = spawn_lootboxes(0.5, 100, &params, &mut StdRng::seed_from_u64(7));
        let b = spawn_lootboxes(0.5, 100, &params, &mut StdRng::seed_from_u64(7));
        assert_eq!(a, b);
        assert_eq!(a.len(), 50);
    }

    fn pedal(agent: u32, effort: f64) -> PedalAction {
        PedalAction::pedalling(AgentId(agent), effort, 0.0)
    }

    fn brake(agent: u32, effort: f64) -> PedalAction {
        PedalAction::braking(AgentId(agent), effort, 0.0)
    }

    #[test]
    fn no_effort_means_no_displacement() {
        let params = WorldParams::default();
        let forces: Vec<PedalAction> = (0..8).map(|i| pedal(i, 0.0)).collect();
        let pos = step_kinematics(GridPosition::ORIGIN, 0.0, &forces, &params);
        assert_eq!(pos, GridPosition::ORIGIN);
    }

    #[test]
    fn brakes_cancel_pedals() {
        let params = WorldParams::default();
        let forces = vec![pedal(0, 1.0), pedal(1, 1.0), brake(2, 1.0), brake(3, 1.0)];
        let pos = step_kinematics(GridPosition::ORIGIN, 0.0, &forces, &params);
        assert_eq!(pos, GridPosition::ORIGIN);
        // and the floor holds when brakes dominate
        let braked = vec![pedal(0, 0.5), brake(1, 1.0), brake(2, 1.0)];
        let pos = step_kinematics(GridPosition::ORIGIN, 0.0, &braked, &params);
        assert_eq!(pos, GridPosition::ORIGIN);
    }

    #[test]
    fn eight_full_pedals_move_eight_units_along_heading() {
        let params = WorldParams::default();
        let forces: Vec<PedalAction> = (0..8).map(|i| pedal(i, 1.0)).collect();
        let pos = step_kinematics(GridPosition::ORIGIN, 0.0, &forces, &params);
        assert!((pos.x - 8.0).abs() < 1e-12);
        assert!(pos.y.abs() < 1e-12);
    }

    #[test]
    fn stationary_bike_is_captured_on_round_twenty() {
        let params = WorldParams::default();
        let bike = GridPosition::ORIGIN;
        let mut threat = params.spawn_threat(bike);
        let mut captured_round = None;
        for round in 1..=30 {
            let (next, captured) = advance_threat(&threat, &[bike], &params);
            threat = next;
            if !captured.is_empty() {
                captured_round = Some(round);
                break;
            }
        }
        // gap 50, speed 2, capture radius 10 -> ceil((50-10)/2) = 20 rounds
        assert_eq!(captured_round, Some(20));
    }

    #[test]
    fn threat_without_bikes_is_unchanged() {
        let params = WorldParams::default();
        let threat = params.spawn_threat(GridPosition::ORIGIN);
        let (next, captured) = advance_threat(&threat, &[], &params);
        assert_eq!(next, threat);
        assert!(captured.is_empty());
    }

    #[test]
    fn faster_bike_is_never_caught_and_gap_is_monotone_when_stationary() {
        let params = WorldParams::default();
        let mut fleeing = GridPosition::ORIGIN;
        let mut threat = params.spawn_threat(fleeing);
        for _ in 0..100 {
            let before = threat.position.distance_to(fleeing);
            fleeing = fleeing.step(0.0, 8.0);
            let (next, captured) = advance_threat(&threat, &[fleeing], &params);
            threat = next;
            assert!(captured.is_empty());
            assert!(threat.position.distance_to(fleeing) >= before - 1e-9);
        }

        let stationary = GridPosition { x: 500.0, y: 300.0 };
        let mut threat = params.spawn_threat(stationary);
        let mut last_gap = threat.position.distance_to(stationary);
        for _ in 0..100 {
            let (next, _) = advance_threat(&threat, &[stationary], &params);
            threat = next;
            let gap = threat.position.distance_to(stationary);
            assert!(gap <= last_gap + 1e-9);
            last_gap = gap;
        }
    }

    #[test]
    fn lootbox_consumes_exactly_once() {
        let mut b = Lootbox::new(
            LootboxId(0),
            GridPosition::ORIGIN,
            Energy::from_units(40.0),
        );
        assert_eq!(b.consume(), Some(Energy::from_units(40.0)));
        assert_eq!(b.consume(), None);
        assert!(b.is_consumed());
    }
}
