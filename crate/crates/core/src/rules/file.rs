//! Ruleset definition files: TOML with one `[[rule]]` table per rule.
//!
//! ```toml
//! [[rule]]
//! name = "radius-1000"
//! action = "target-selection"
//! mutable = true
//! inputs = ["distance", "const"]
//! matrix = [[1.0, -1000.0]]
//! comparators = ["<="]
//! ```
//!
//! `id` is optional on load (a fresh one is generated) and always written on
//! save, so `load(save(rule)) == rule` bit-exactly, floats included.

use std::fs;
use std::path::Path;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use super::cache::RuleCache;
use super::comparator::Comparator;
use super::entity::Binding;
use super::rule::{ActionKind, Rule, RuleError, RuleId};

#[derive(Debug, Error)]
pub enum RulesetError {
    #[error("io error: {0}")]
    Io(#[from] std::io::Error),
    #[error("ruleset parse error: {0}")]
    Parse(String),
    #[error("rule `{rule}`: unknown binding `{token}`")]
    UnknownBinding { rule: String, token: String },
    #[error("rule `{rule}`: unknown action `{token}`")]
    UnknownAction { rule: String, token: String },
    #[error("rule `{rule}`: unknown comparator `{token}`")]
    UnknownComparator { rule: String, token: String },
    #[error("rule `{rule}`: bad rule id `{token}`")]
    BadRuleId { rule: String, token: String },
    #[error("rule `{rule}`: {source}")]
    Invalid {
        rule: String,
        #[source]
        source: RuleError,
    },
}

#[derive(Debug, Serialize, Deserialize)]
struct RulesetDoc {
    #[serde(default)]
    rule: Vec<RuleDoc>,
}

#[derive(Debug, Serialize, Deserialize)]
struct RuleDoc {
    #[serde(default, skip_serializing_if = "Option::is_none")]
    id: Option<String>,
    name: String,
    action: String,
    mutable: bool,
    inputs: Vec<String>,
    matrix: Vec<Vec<f64>>,
    comparators: Vec<String>,
}

impl RuleDoc {
    fn from_rule(rule: &Rule) -> RuleDoc {
        RuleDoc {
            id: Some(rule.id().to_string()),
            name: rule.name().to_string(),
            action: rule.action().name().to_string(),
            mutable: rule.is_mutable(),
            inputs: rule.inputs().iter().map(|b| b.name().to_string()).collect(),
            matrix: rule.matrix().to_vec(),
            comparators: rule.comparators().iter().map(|c| c.token().to_string()).collect(),
        }
    }

    fn into_rule(self) -> Result<Rule, RulesetError> {
        let name = self.name;
        let action = ActionKind::from_name(&self.action).ok_or_else(|| {
            RulesetError::UnknownAction { rule: name.clone(), token: self.action.clone() }
        })?;
        let inputs = self
            .inputs
            .iter()
            .map(|token| {
                Binding::from_name(token).ok_or_else(|| RulesetError::UnknownBinding {
                    rule: name.clone(),
                    token: token.clone(),
                })
            })
            .collect::<Result<Vec<_>, _>>()?;
        let comparators = self
            .comparators
            .iter()
            .map(|token| {
                Comparator::from_token(token).ok_or_else(|| RulesetError::UnknownComparator {
                    rule: name.clone(),
                    token: token.clone(),
                })
            })
            .collect::<Result<Vec<_>, _>>()?;
        let id = match &self.id {
            Some(token) => RuleId::parse(token).ok_or_else(|| RulesetError::BadRuleId {
                rule: name.clone(),
                token: token.clone(),
            })?,
            None => RuleId::generate(),
        };
        Rule::with_id(id, name.clone(), action, self.mutable, inputs, self.matrix, comparators)
            .map_err(|source| RulesetError::Invalid { rule: name, source })
    }
}

pub fn parse_ruleset(text: &str) -> Result<Vec<Rule>, RulesetError> {
    let doc: RulesetDoc =
        toml::from_str(text).map_err(|e| RulesetError::Parse(e.to_string()))?;
    doc.rule.into_iter().map(RuleDoc::into_rule).collect()
}

pub fn render_ruleset(rules: &[Rule]) -> String {
    let doc = RulesetDoc { rule: rules.iter().map(RuleDoc::from_rule).collect() };
    toml::to_string_pretty(&doc).expect("ruleset documents always serialize")
}

pub fn load_ruleset(path: impl AsRef<Path>) -> Result<Vec<Rule>, RulesetError> {
    parse_ruleset(&fs::read_to_string(path)?)
}

pub fn save_ruleset(path: impl AsRef<Path>, rules: &[Rule]) -> Result<(), RulesetError> {
    Ok(fs::write(path, render_ruleset(rules))?)
}

/// Loads a ruleset file straight into a cache, enforcing id uniqueness.
pub fn load_ruleset_cache(path: impl AsRef<Path>) -> Result<RuleCache, RulesetError> {
    let rules = load_ruleset(&path)?;
    RuleCache::from_rules(rules).map_err(|source| RulesetError::Invalid {
        rule: path.as_ref().display().to_string(),
        source,
    })
}
