//! Simulation configuration, mirrored one-to-one by the TOML config file.

use std::fs;
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::agents::AgentParams;
use crate::governance::AllocationPolicy;
use crate::rules::file::{load_ruleset_cache, RulesetError};
use crate::rules::{ActionKind, Binding, Comparator, Rule, RuleCache};
use crate::world::WorldParams;

pub const DEFAULT_RADIUS_RULE: &str = "radius-1000";

#[derive(Debug, Error)]
pub enum ConfigError {
    #[error("invalid config: {0}")]
    Invalid(String),
    #[error("io error: {0}")]
    Io(#[from] std::io::Error),
    #[error("config parse error: {0}")]
    Parse(String),
    #[error(transparent)]
    Ruleset(#[from] RulesetError),
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, rename_all = "camelCase")]
pub struct SimConfig {
    pub max_iterations: u32,
    pub max_rounds: u32,
    pub agent_count: u32,
    pub seats: u32,
    pub lootbox_ratio: f64,
    /// Base ruleset file; the built-in radius rule when absent.
    pub ruleset_path: Option<PathBuf>,
    /// Whether agents may amend rules at runtime. The immutable arm freezes
    /// every rule in the adopted contract.
    pub mutable: bool,
    /// Stratified retrieval (the engine's normal regime) versus the
    /// full-cache sweep used as the benchmark's worst-case arm.
    pub stratified: bool,
    pub seed: u64,
    /// Name of the rule the slack-proposal policy targets.
    pub amendable_rule: Option<String>,
    pub allocation: AllocationPolicy,
    /// Consecutive fully stalled rounds (no movement, no feasible target,
    /// threat not closing) before the run is declared deadlocked.
    pub stall_rounds_deadlock: u32,
    pub world: WorldParams,
    pub agent: AgentParams,
}

impl Default for SimConfig {
    fn default() -> SimConfig {
        SimConfig {
            max_iterations: 100,
            max_rounds: 100,
            agent_count: 100,
            seats: 8,
            lootbox_ratio: 1.0,
            ruleset_path: None,
            mutable: true,
            stratified: true,
            seed: 0,
            amendable_rule: Some(DEFAULT_RADIUS_RULE.to_string()),
            allocation: AllocationPolicy::Equal,
            stall_rounds_deadlock: 10,
            world: WorldParams::default(),
            agent: AgentParams::default(),
        }
    }
}

impl SimConfig {
    pub fn validate(&self) -> Result<(), ConfigError> {
        if self.max_iterations < 1 {
            return Err(ConfigError::Invalid("maxIterations must be >= 1".into()));
        }
        if self.max_rounds < 1 {
            return Err(ConfigError::Invalid("maxRounds must be >= 1".into()));
        }
        if self.agent_count < 1 {
            return Err(ConfigError::Invalid("agentCount must be >= 1".into()));
        }
        if self.seats < 1 {
            return Err(ConfigError::Invalid("seats must be >= 1".into()));
        }
        if !(self.lootbox_ratio >= 0.0) {
            return Err(ConfigError::Invalid("lootboxRatio must be >= 0".into()));
        }
        if !(0.0..=1.0).contains(&self.agent.p_defect) {
            return Err(ConfigError::Invalid("pDefect must lie in [0, 1]".into()));
        }
        if self.world.payoff_range[0] > self.world.payoff_range[1] {
            return Err(ConfigError::Invalid("payoffRange must be ordered".into()));
        }
        Ok(())
    }

    pub fn load(path: impl AsRef<Path>) -> Result<SimConfig, ConfigError> {
        let text = fs::read_to_string(path)?;
        let config: SimConfig =
            toml::from_str(&text).map_err(|e| ConfigError::Parse(e.to_string()))?;
        config.validate()?;
        Ok(config)
    }

    pub fn save(&self, path: impl AsRef<Path>) -> Result<(), ConfigError> {
        let text = toml::to_string_pretty(self)
            .map_err(|e| ConfigError::Parse(e.to_string()))?;
        Ok(fs::write(path, text)?)
    }

    /// The ruleset every bike adopts at the start of an iteration, with the
    /// immutable arm's freeze already applied.
    pub fn base_ruleset(&self) -> Result<RuleCache, ConfigError> {
        let cache = match &self.ruleset_path {
            Some(path) => load_ruleset_cache(path)?,
            None => default_base_ruleset(),
        };
        Ok(if self.mutable { cache } else { cache.frozen() })
    }
}

/// The stock contract: eligible lootboxes must lie within 1000 grid units.
pub fn default_base_ruleset() -> RuleCache {
    RuleCache::from_rules([radius_rule(1000.0)]).expect("fresh ids are unique")
}

/// `distance <= radius` target-selection rule, mutable.
pub fn radius_rule(radius: f64) -> Rule {
    Rule::new(
        DEFAULT_RADIUS_RULE,
        ActionKind::TargetSelection,
        true,
        vec![Binding::Distance, Binding::One],
        vec![vec![1.0, -radius]],
        vec![Comparator::Leq],
    )
    .expect("well-formed by construction")
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn zero_agents_is_invalid() {
        let config = SimConfig { agent_count: 0, ..SimConfig::default() };
        assert!(matches!(config.validate(), Err(ConfigError::Invalid(_))));
    }

    #[test]
    fn defaults_validate() {
        SimConfig::default().validate().unwrap();
    }

    #[test]
    fn toml_round_trip() {
        let config = SimConfig {
            seed: 42,
            lootbox_ratio: 1.5,
            mutable: false,
            ..SimConfig::default()
        };
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("sim.toml");
        config.save(&path).unwrap();
        assert_eq!(SimConfig::load(&path).unwrap(), config);
    }

    #[test]
    fn partial_config_files_fill_in_defaults() {
        let text = "agentCount = 8\nseed = 7\n[world]\nthreatSpeed = 3.0\n";
        let config: SimConfig = toml::from_str(text).unwrap();
        assert_eq!(config.agent_count, 8);
        assert_eq!(config.seed, 7);
        assert_eq!(config.world.threat_speed, 3.0);
        assert_eq!(config.world.capture_radius, 10.0);
        assert_eq!(config.max_rounds, 100);
    }

    #[test]
    fn default_ruleset_contains_the_radius_rule() {
        let cache = default_base_ruleset();
        let rule = cache.find_by_name(DEFAULT_RADIUS_RULE).unwrap();
        assert_eq!(rule.action(), ActionKind::TargetSelection);
        assert!(rule.is_mutable());
        assert_eq!(rule.constant_entry(0), Some(-1000.0));
    }

    #[test]
    fn immutable_arm_freezes_the_base_ruleset() {
        let config = SimConfig { mutable: false, ..SimConfig::default() };
        let cache = config.base_ruleset().unwrap();
        assert!(!cache.find_by_name(DEFAULT_RADIUS_RULE).unwrap().is_mutable());
    }
}
