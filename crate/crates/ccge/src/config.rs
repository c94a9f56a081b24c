//! Experiment configuration: TOML files plus `key=value` overrides.

use std::fs;
use std::path::{Path, PathBuf};

use anyhow::{anyhow, bail, Context, Result};
use ccge_core::trainer::TrainConfig;
use serde::{Deserialize, Serialize};
use toml::{Table, Value};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ExperimentConfig {
    /// Root seeds used by `ablate`.
    pub seeds: Vec<u64>,
    pub output: PathBuf,
    /// Deterministic-policy episodes after training (split evenly across sides).
    pub eval_episodes: usize,
    /// Evaluation episodes sampled by `export-clusters`.
    pub cluster_episodes: usize,
    pub train: TrainConfig,
}

impl Default for ExperimentConfig {
    fn default() -> Self {
        Self {
            seeds: vec![0, 1, 2, 3, 4],
            output: PathBuf::from("runs"),
            eval_episodes: 100,
            cluster_episodes: 20,
            train: TrainConfig::default(),
        }
    }
}

impl ExperimentConfig {
    /// Reads `path` (defaults when `None`), applies `overrides` and validates.
    pub fn load(path: Option<&Path>, overrides: &[String]) -> Result<Self> {
        let mut table = match path {
            Some(p) => {
                let text = fs::read_to_string(p).with_context(|| format!("reading config {}", p.display()))?;
                text.parse::<Table>().with_context(|| format!("parsing config {}", p.display()))?
            }
            None => Table::new(),
        };
        for o in overrides {
            apply_override(&mut table, o)?;
        }
        let cfg: Self = Value::Table(table).try_into().context("invalid configuration")?;
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn validate(&self) -> Result<()> {
        self.train.validate().map_err(|e| anyhow!("{e}"))?;
        if self.eval_episodes == 0 {
            bail!("eval_episodes must be positive");
        }
        Ok(())
    }

    pub fn to_toml(&self) -> Result<String> {
        Ok(toml::to_string_pretty(self)?)
    }
}

/// Sets a dotted `key=value` path inside `table`. The value is read as a
/// TOML literal when it parses as one, otherwise as a bare string.
pub fn apply_override(table: &mut Table, spec: &str) -> Result<()> {
    let (key, raw) = spec.split_once('=').ok_or_else(|| anyhow!("override `{spec}` is not key=value"))?;
    let key = key.trim();
    if key.is_empty() {
        bail!("override `{spec}` has an empty key");
    }
    let value = format!("v = {}", raw.trim())
        .parse::<Table>()
        .ok()
        .and_then(|mut t| t.remove("v"))
        .unwrap_or_else(|| Value::String(raw.trim().to_string()));
    let parts: Vec<&str> = key.split('.').collect();
    let mut node = table;
    for part in &parts[..parts.len() - 1] {
        let entry = node.entry(part.to_string()).or_insert_with(|| Value::Table(Table::new()));
        node = entry.as_table_mut().ok_or_else(|| anyhow!("override `{key}`: `{part}` is not a table"))?;
    }
    node.insert(parts[parts.len() - 1].to_string(), value);
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn overrides_reach_nested_fields() {
        let cfg = ExperimentConfig::load(
            None,
            &["train.ppo.learning_rate=1e-4".into(), "train.variant=single_state".into(), "seeds=[7]".into()],
        )
        .unwrap();
        assert_eq!(cfg.train.ppo.learning_rate, 1e-4);
        assert_eq!(cfg.train.variant, ccge_core::trainer::Variant::SingleState);
        assert_eq!(cfg.seeds, vec![7]);
    }

    #[test]
    fn bad_keys_are_rejected() {
        assert!(ExperimentConfig::load(None, &["train.nonsense=1".into()]).is_err());
        assert!(ExperimentConfig::load(None, &["novalue".into()]).is_err());
        assert!(ExperimentConfig::load(None, &["train.num_envs=0".into()]).is_err());
    }

    #[test]
    fn resolved_config_round_trips() {
        let cfg = ExperimentConfig::default();
        let text = cfg.to_toml().unwrap();
        let back: ExperimentConfig = toml::from_str(&text).unwrap();
        assert_eq!(back, cfg);
    }
}
