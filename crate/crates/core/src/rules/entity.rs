//! Decision subjects and the fixed input-binding vocabulary.
//!
//! Rules read quantitative features of whatever object a decision concerns
//! (a lootbox, an agent, a movement directive) through named bindings. A
//! binding resolves to a scalar for the entity kinds it is defined on and to
//! nothing elsewhere; what happens on an undefined binding is decided by the
//! evaluation mode (see [`crate::rules::EvalMode`]).

use std::fmt;

/// A decision subject, flattened to the scalar features rules can read.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum Entity {
    /// A lootbox as seen from the deciding megabike. `distance` is in grid
    /// units from the bike, `payoff` in energy units.
    Lootbox { distance: f64, payoff: f64 },
    /// An agent under consideration (election, allocation, admission).
    /// `energy` in energy units, `contribution` as cumulative pedal effort.
    Agent { energy: f64, contribution: f64 },
    /// A movement directive proposed by the leader: heading in radians,
    /// pedal intensity in [0, 1].
    Directive { heading: f64, intensity: f64 },
}

impl Entity {
    pub fn kind_name(&self) -> &'static str {
        match self {
            Entity::Lootbox { .. } => "lootbox",
            Entity::Agent { .. } => "agent",
            Entity::Directive { .. } => "directive",
        }
    }
}

/// Named getter from an entity to a real-valued scalar.
///
/// The last binding of every rule's input vector must be [`Binding::One`],
/// the homogeneous constant column that makes affine constraints expressible.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum Binding {
    Distance,
    Payoff,
    Energy,
    Contribution,
    Heading,
    Intensity,
    One,
}

impl Binding {
    pub const ALL: [Binding; 7] = [
        Binding::Distance,
        Binding::Payoff,
        Binding::Energy,
        Binding::Contribution,
        Binding::Heading,
        Binding::Intensity,
        Binding::One,
    ];

    /// Resolves the binding against `entity`. Deterministic for a fixed
    /// entity state; `None` when the feature does not exist on that kind.
    pub fn resolve(self, entity: &Entity) -> Option<f64> {
        match (self, entity) {
            (Binding::One, _) => Some(1.0),
            (Binding::Distance, Entity::Lootbox { distance, .. }) => Some(*distance),
            (Binding::Payoff, Entity::Lootbox { payoff, .. }) => Some(*payoff),
            (Binding::Energy, Entity::Agent { energy, .. }) => Some(*energy),
            (Binding::Contribution, Entity::Agent { contribution, .. }) => Some(*contribution),
            (Binding::Heading, Entity::Directive { heading, .. }) => Some(*heading),
            (Binding::Intensity, Entity::Directive { intensity, .. }) => Some(*intensity),
            _ => None,
        }
    }

    pub fn name(self) -> &'static str {
        match self {
            Binding::Distance => "distance",
            Binding::Payoff => "payoff",
            Binding::Energy => "energy",
            Binding::Contribution => "contribution",
            Binding::Heading => "heading",
            Binding::Intensity => "intensity",
            Binding::One => "const",
        }
    }

    pub fn from_name(name: &str) -> Option<Binding> {
        Binding::ALL.into_iter().find(|b| b.name() == name)
    }
}

impl fmt::Display for Binding {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}
