//! Clause comparators: each rule clause is compared against zero.

use std::fmt;

use serde::{Deserialize, Serialize};

/// Absolute tolerance for equality clauses, so that `0 == 0` stays true under
/// float arithmetic.
pub const EQ_TOLERANCE: f64 = 1e-9;

/// Relational operator applied to a clause value against zero.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum Comparator {
    Lt,
    Gt,
    Leq,
    Geq,
    Eq,
}

impl Comparator {
    pub const ALL: [Comparator; 5] = [
        Comparator::Lt,
        Comparator::Gt,
        Comparator::Leq,
        Comparator::Geq,
        Comparator::Eq,
    ];

    /// True when `value <op> 0` holds. Equality uses [`EQ_TOLERANCE`]; the
    /// strict/weak inequalities are exact arithmetic comparisons.
    pub fn holds(self, value: f64) -> bool {
        match self {
            Comparator::Lt => value < 0.0,
            Comparator::Gt => value > 0.0,
            Comparator::Leq => value <= 0.0,
            Comparator::Geq => value >= 0.0,
            Comparator::Eq => value.abs() <= EQ_TOLERANCE,
        }
    }

    /// Token used in ruleset files.
    pub fn token(self) -> &'static str {
        match self {
            Comparator::Lt => "<",
            Comparator::Gt => ">",
            Comparator::Leq => "<=",
            Comparator::Geq => ">=",
            Comparator::Eq => "=",
        }
    }

    pub fn from_token(token: &str) -> Option<Comparator> {
        match token {
            "<" => Some(Comparator::Lt),
            ">" => Some(Comparator::Gt),
            "<=" => Some(Comparator::Leq),
            ">=" => Some(Comparator::Geq),
            "=" => Some(Comparator::Eq),
            _ => None,
        }
    }
}

impl fmt::Display for Comparator {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.token())
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn holds_matches_scalar_semantics() {
        assert!(Comparator::Lt.holds(-0.1));
        assert!(!Comparator::Lt.holds(0.0));
        assert!(Comparator::Gt.holds(0.1));
        assert!(!Comparator::Gt.holds(0.0));
        assert!(Comparator::Leq.holds(0.0));
        assert!(!Comparator::Leq.holds(1e-6));
        assert!(Comparator::Geq.holds(0.0));
        assert!(!Comparator::Geq.holds(-1e-6));
    }

    #[test]
    fn eq_uses_absolute_tolerance() {
        assert!(Comparator::Eq.holds(0.0));
        assert!(Comparator::Eq.holds(5e-10));
        assert!(Comparator::Eq.holds(-5e-10));
        assert!(!Comparator::Eq.holds(2e-9));
    }

    #[test]
    fn tokens_round_trip() {
        for c in Comparator::ALL {
            assert_eq!(Comparator::from_token(c.token()), Some(c));
        }
        assert_eq!(Comparator::from_token("=="), None);
    }
}
