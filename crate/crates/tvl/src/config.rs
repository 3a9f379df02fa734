//! Solver configuration, read from `key = value` lines.

use crate::linear::SmallSolutionConstants;
use crate::par::ExecMode;
use serde::{Deserialize, Serialize};
use thiserror::Error;

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct Config {
    /// Largest core (partial model) enumerated by the C² procedures.
    pub core_cap: usize,
    /// Bound on every variable in bounded integer searches.
    pub search_box: usize,
    pub automaton_state_budget: usize,
    pub oracle_max_size: usize,
    pub small_solution_constants: SmallSolutionConstants,
    pub allow_empty: bool,
    pub seed: u64,
    pub exec: ExecMode,
}

impl Default for Config {
    fn default() -> Self {
        Config {
            core_cap: 3,
            search_box: 16,
            automaton_state_budget: 1_000_000,
            oracle_max_size: 5,
            small_solution_constants: SmallSolutionConstants::default(),
            allow_empty: false,
            seed: 0,
            exec: ExecMode::Parallel,
        }
    }
}

#[derive(Debug, Error, PartialEq, Eq)]
pub enum ConfigError {
    #[error("line {line}: expected `key = value`")]
    Syntax { line: usize },
    #[error("line {line}: unknown key `{key}`")]
    UnknownKey { line: usize, key: String },
    #[error("line {line}: bad value `{value}` for `{key}`")]
    BadValue { line: usize, key: String, value: String },
}

impl Config {
    /// Overrides defaults with `key = value` lines; `#` starts a comment.
    pub fn from_kv(text: &str) -> Result<Config, ConfigError> {
        let mut c = Config::default();
        for (idx, raw) in text.lines().enumerate() {
            let line = idx + 1;
            let content = raw.split('#').next().unwrap_or("").trim();
            if content.is_empty() {
                continue;
            }
            let (key, value) = content.split_once('=').ok_or(ConfigError::Syntax { line })?;
            let (key, value) = (key.trim(), value.trim());
            let bad = || ConfigError::BadValue {
                line,
                key: key.to_string(),
                value: value.to_string(),
            };
            let num = || value.parse::<u64>().map_err(|_| bad());
            match key {
                "core_cap" => c.core_cap = num()? as usize,
                "search_box" => c.search_box = num()? as usize,
                "automaton_state_budget" => c.automaton_state_budget = num()? as usize,
                "oracle_max_size" => c.oracle_max_size = num()? as usize,
                "c1" => c.small_solution_constants.c1 = num()? as u32,
                "c2" => c.small_solution_constants.c2 = num()? as u32,
                "allow_empty" => c.allow_empty = value.parse::<bool>().map_err(|_| bad())?,
                "seed" => c.seed = num()?,
                "exec" => {
                    c.exec = match value {
                        "parallel" => ExecMode::Parallel,
                        "sequential" => ExecMode::Sequential,
                        _ => return Err(bad()),
                    }
                }
                _ => {
                    return Err(ConfigError::UnknownKey {
                        line,
                        key: key.to_string(),
                    })
                }
            }
        }
        Ok(c)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn parses_overrides() {
        let c = Config::from_kv("core_cap = 5\n# comment\nallow_empty=true\nc2 = 2\n").unwrap();
        assert_eq!(c.core_cap, 5);
        assert!(c.allow_empty);
        assert_eq!(c.small_solution_constants.c2, 2);
        assert_eq!(c.search_box, 16);
        assert!(matches!(Config::from_kv("bogus = 1"), Err(ConfigError::UnknownKey { .. })));
        assert!(matches!(Config::from_kv("seed"), Err(ConfigError::Syntax { line: 1 })));
    }
}
