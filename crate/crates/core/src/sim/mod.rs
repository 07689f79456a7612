//! Game-loop orchestration, configuration, and metrics capture.

mod config;
mod metrics;
mod runner;

pub use config::{default_base_ruleset, radius_rule, ConfigError, SimConfig, DEFAULT_RADIUS_RULE};
pub use metrics::{
    count_deliberation_avoided, deliberation_sessions_avoided, fmt_sig6, round_records_csv,
    write_round_records_csv, Phase, PhaseEvent, RoundRecord, RunMetrics, RunSummary, TraceHasher,
    ROUND_CSV_HEADER,
};
pub use runner::{phases_follow_game_loop, run_game, run_game_with_ruleset, SimError};
