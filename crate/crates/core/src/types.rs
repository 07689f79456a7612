//! Shared identifier newtypes and the exact energy ledger type.

use std::fmt;
use std::iter::Sum;
use std::ops::{Add, AddAssign, Sub, SubAssign};

use serde::{Deserialize, Serialize};

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
pub struct AgentId(pub u32);

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
pub struct BikeId(pub u32);

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
pub struct LootboxId(pub u32);

impl fmt::Display for AgentId {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "a{}", self.0)
    }
}

impl fmt::Display for BikeId {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "b{}", self.0)
    }
}

impl fmt::Display for LootboxId {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "l{}", self.0)
    }
}

/// Energy in integer milli-units.
///
/// All agent/lootbox bookkeeping runs on this type so that ledger audits and
/// payoff splits are exact integer arithmetic: allocations sum to the payoff
/// with zero float slack, and traces are identical across platforms.
#[derive(
    Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Default, Serialize, Deserialize,
)]
#[serde(transparent)]
pub struct Energy(i64);

impl Energy {
    pub const ZERO: Energy = Energy(0);

    pub const fn from_millis(millis: i64) -> Energy {
        Energy(millis)
    }

    /// Converts whole energy units (the unit used in configs and rule inputs)
    /// to milli-unit resolution, rounding to the nearest milli.
    pub fn from_units(units: f64) -> Energy {
        Energy((units * 1000.0).round() as i64)
    }

    pub const fn millis(self) -> i64 {
        self.0
    }

    pub fn units(self) -> f64 {
        self.0 as f64 / 1000.0
    }

    pub const fn is_zero(self) -> bool {
        self.0 == 0
    }

    pub fn saturating_sub(self, rhs: Energy) -> Energy {
        Energy((self.0 - rhs.0).max(0))
    }

    pub fn min(self, rhs: Energy) -> Energy {
        Energy(self.0.min(rhs.0))
    }

    /// Fraction of `self` relative to `total`, as a float in [0, 1] for
    /// threshold tests and reporting.
    pub fn ratio_of(self, total: Energy) -> f64 {
        if total.0 == 0 {
            0.0
        } else {
            self.0 as f64 / total.0 as f64
        }
    }
}

impl Add for Energy {
    type Output = Energy;
    fn add(self, rhs: Energy) -> Energy {
        Energy(self.0 + rhs.0)
    }
}

impl AddAssign for Energy {
    fn add_assign(&mut self, rhs: Energy) {
        self.0 += rhs.0;
    }
}

impl Sub for Energy {
    type Output = Energy;
    fn sub(self, rhs: Energy) -> Energy {
        Energy(self.0 - rhs.0)
    }
}

impl SubAssign for Energy {
    fn sub_assign(&mut self, rhs: Energy) {
        self.0 -= rhs.0;
    }
}

impl Sum for Energy {
    fn sum<I: Iterator<Item = Energy>>(iter: I) -> Energy {
        Energy(iter.map(|e| e.0).sum())
    }
}

impl fmt::Display for Energy {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}", self.units())
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn energy_unit_conversion_round_trips() {
        assert_eq!(Energy::from_units(100.0).millis(), 100_000);
        assert_eq!(Energy::from_units(0.5).millis(), 500);
        assert_eq!(Energy::from_millis(1234).units(), 1.234);
    }

    #[test]
    fn saturating_sub_floors_at_zero() {
        let e = Energy::from_millis(300);
        assert_eq!(e.saturating_sub(Energy::from_millis(500)), Energy::ZERO);
        assert_eq!(
            e.saturating_sub(Energy::from_millis(100)),
            Energy::from_millis(200)
        );
    }

    #[test]
    fn ratio_of_handles_zero_total() {
        assert_eq!(Energy::from_millis(10).ratio_of(Energy::ZERO), 0.0);
        assert_eq!(
            Energy::from_millis(50_000).ratio_of(Energy::from_millis(100_000)),
            0.5
        );
    }
}
