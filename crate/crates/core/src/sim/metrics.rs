//! Per-round records, run summaries, and their CSV form.

use std::fs;
use std::io;
use std::path::Path;

use crate::rules::ACTION_KIND_COUNT;
use crate::types::BikeId;

/// One record per live bike per round.
#[derive(Debug, Clone, PartialEq)]
pub struct RoundRecord {
    pub iteration: u32,
    pub round: u32,
    pub bike: BikeId,
    pub alive_agents: u32,
    /// Total energy of the bike's living occupants, whole units.
    pub energy_total: f64,
    /// Payoff acquired by this bike this round, whole units.
    pub loot_acquired: f64,
    /// Magnitude of the amendable rule's constant bound (0 when absent).
    pub radius_bound: f64,
    pub rules_evaluated: u64,
    pub wall_clock_nanos: u64,
}

/// Which Algorithm-1 phase an event belongs to.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord)]
pub enum Phase {
    SelfSelection,
    SocialArrangements,
    RoleAssignment,
    Operation,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct PhaseEvent {
    pub iteration: u32,
    pub phase: Phase,
}

#[derive(Debug, Clone, PartialEq, Default)]
pub struct RunSummary {
    /// Mean over all agents of the number of rounds begun alive.
    pub avg_survival_rounds: f64,
    /// Last round with at least one living agent.
    pub last_alive_round: u32,
    /// Total payoff acquired over the run, whole units.
    pub total_loot: f64,
    /// Mean wall-clock per executed iteration, operation phases included.
    pub runtime_per_iteration_nanos: u64,
    pub iterations_executed: u32,
    pub deliberation_sessions_avoided: u64,
    pub ballots_cast: u64,
    /// Mean over bikes of the amendable bound at each bike's last live round.
    pub final_radius_bound: f64,
    pub rules_evaluated: u64,
    /// Order-sensitive digest of every governed decision taken; two runs
    /// made the same decisions iff their hashes match.
    pub trace_hash: u64,
    pub deadlocked: bool,
}

#[derive(Debug, Clone, PartialEq)]
pub struct RunMetrics {
    pub records: Vec<RoundRecord>,
    pub summary: RunSummary,
    pub config_iterations: u32,
    pub config_rounds: u32,
    pub phases: Vec<PhaseEvent>,
}

/// Deliberation sessions saved by replacing per-round deliberation with one
/// contract negotiation per iteration: `i*j*k - i`.
pub fn deliberation_sessions_avoided(iterations: u64, rounds: u64, decision_kinds: u64) -> u64 {
    iterations * rounds * decision_kinds - iterations
}

/// As configured for this run, with the engine's five governed decision
/// kinds.
pub fn count_deliberation_avoided(metrics: &RunMetrics) -> u64 {
    deliberation_sessions_avoided(
        metrics.config_iterations as u64,
        metrics.config_rounds as u64,
        ACTION_KIND_COUNT as u64,
    )
}

/// Formats with six significant digits, plain notation, no trailing zeros.
pub fn fmt_sig6(value: f64) -> String {
    if value == 0.0 {
        return "0".to_string();
    }
    if !value.is_finite() {
        return value.to_string();
    }
    let exponent = value.abs().log10().floor() as i32;
    if exponent > 5 {
        let scale = 10f64.powi(exponent - 5);
        let rounded = (value / scale).round() * scale;
        return format!("{rounded:.0}");
    }
    let decimals = (5 - exponent).clamp(0, 17) as usize;
    let mut s = format!("{value:.decimals$}");
    if s.contains('.') {
        while s.ends_with('0') {
            s.pop();
        }
        if s.ends_with('.') {
            s.pop();
        }
    }
    s
}

pub const ROUND_CSV_HEADER: &str =
    "iteration,round,bikeID,aliveAgents,energyTotal,lootAcquired,radiusBound,rulesEvaluated,wallClockNanos";

/// Renders the per-round records as CSV (header + rows, newline-terminated).
pub fn round_records_csv(metrics: &RunMetrics) -> String {
    let mut out = String::with_capacity(64 * (metrics.records.len() + 1));
    out.push_str(ROUND_CSV_HEADER);
    out.push('\n');
    for r in &metrics.records {
        out.push_str(&format!(
            "{},{},{},{},{},{},{},{},{}\n",
            r.iteration,
            r.round,
            r.bike.0,
            r.alive_agents,
            fmt_sig6(r.energy_total),
            fmt_sig6(r.loot_acquired),
            fmt_sig6(r.radius_bound),
            r.rules_evaluated,
            r.wall_clock_nanos,
        ));
    }
    out
}

pub fn write_round_records_csv(metrics: &RunMetrics, path: impl AsRef<Path>) -> io::Result<()> {
    fs::write(path, round_records_csv(metrics))
}

/// Incremental FNV-1a digest for decision traces.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct TraceHasher(u64);

impl Default for TraceHasher {
    fn default() -> TraceHasher {
        TraceHasher(0xcbf29ce484222325)
    }
}

impl TraceHasher {
    pub fn update(&mut self, bytes: &[u8]) {
        for &b in bytes {
            self.0 ^= b as u64;
            self.0 = self.0.wrapping_mul(0x100000001b3);
        }
    }

    pub fn update_u64(&mut self, value: u64) {
        self.update(&value.to_le_bytes());
    }

    pub fn finish(&self) -> u64 {
        self.0
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn deliberation_formula_matches_the_examples() {
        assert_eq!(deliberation_sessions_avoided(100, 100, 5), 49_900);
        assert_eq!(deliberation_sessions_avoided(1, 1, 1), 0);
        assert_eq!(deliberation_sessions_avoided(2, 3, 5), 28);
    }

    #[test]
    fn six_significant_digits() {
        assert_eq!(fmt_sig6(0.0), "0");
        assert_eq!(fmt_sig6(20.0), "20");
        assert_eq!(fmt_sig6(0.05), "0.05");
        // exact halfway value rounds to even
        assert_eq!(fmt_sig6(1157.625), "1157.62");
        assert_eq!(fmt_sig6(1234567.0), "1234570");
        assert_eq!(fmt_sig6(0.000123456789), "0.000123457");
        assert_eq!(fmt_sig6(-42.125), "-42.125");
    }

    #[test]
    fn csv_has_header_and_one_line_per_record() {
        let metrics = RunMetrics {
            records: vec![RoundRecord {
                iteration: 1,
                round: 1,
                bike: BikeId(0),
                alive_agents: 8,
                energy_total: 400.0,
                loot_acquired: 0.0,
                radius_bound: 1000.0,
                rules_evaluated: 13,
                wall_clock_nanos: 999,
            }],
            summary: RunSummary::default(),
            config_iterations: 1,
            config_rounds: 1,
            phases: Vec::new(),
        };
        let csv = round_records_csv(&metrics);
        let lines: Vec<&str> = csv.lines().collect();
        assert_eq!(lines.len(), 2);
        assert_eq!(lines[0], ROUND_CSV_HEADER);
        assert_eq!(lines[1], "1,1,0,8,400,0,1000,13,999");
        assert!(csv.ends_with('\n'));
    }

    #[test]
    fn trace_hash_is_order_sensitive() {
        let mut a = TraceHasher::default();
        a.update_u64(1);
        a.update_u64(2);
        let mut b = TraceHasher::default();
        b.update_u64(2);
        b.update_u64(1);
        assert_ne!(a.finish(), b.finish());
    }
}
