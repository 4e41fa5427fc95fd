//! Run configuration: defaults, then a TOML file, then `key=value`
//! overrides. Unknown keys are rejected by name.

use std::path::Path;

use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};
use toml::{Table, Value};

use crate::env::EnvConfig;
use crate::error::{Error, Result};
use crate::intrinsic::IntrinsicConfig;
use crate::train::{PpoHyper, TrainConfig};

/// Environment variable that replaces the default output root.
pub const OUTPUT_ROOT_VAR: &str = "CCL_OUTPUT_ROOT";

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct RunConfig {
    /// Master seed of a single run.
    pub seed: u64,
    /// Seeds used by sweeps.
    pub seeds: Vec<u64>,
    /// Root directory for run directories.
    pub output_dir: String,
    pub env: EnvConfig,
    pub intrinsic: IntrinsicConfig,
    pub ppo: PpoHyper,
    pub train: TrainConfig,
}

impl Default for RunConfig {
    fn default() -> Self {
        Self {
            seed: 0,
            seeds: vec![0],
            output_dir: "runs".into(),
            env: EnvConfig::default(),
            intrinsic: IntrinsicConfig::default(),
            ppo: PpoHyper::default(),
            train: TrainConfig::default(),
        }
    }
}

impl RunConfig {
    pub fn validate(&self) -> Result<()> {
        self.env.validate()?;
        self.intrinsic.validate()?;
        self.ppo.validate()?;
        self.train.validate()?;
        self.ppo.episodes_per_rollout(self.env.episode_length())?;
        if self.seeds.is_empty() {
            return Err(Error::Config("seeds must not be empty".into()));
        }
        Ok(())
    }

    /// This config with `key=value` overrides applied.
    pub fn with_overrides(&self, overrides: &[String]) -> Result<RunConfig> {
        let mut table = Table::try_from(self).map_err(|e| Error::Config(e.to_string()))?;
        apply_overrides(&mut table, overrides)?;
        from_table(table, "config")
    }

    pub fn to_toml(&self) -> Result<String> {
        toml::to_string(self).map_err(|e| Error::Config(e.to_string()))
    }

    /// SHA-256 of the resolved config with the iteration budget blanked, so
    /// extending a run keeps its checkpoints valid.
    pub fn hash(&self) -> String {
        let mut c = self.clone();
        c.train.iterations = 0;
        let text = serde_json::to_string(&c).expect("config serializes");
        let digest = Sha256::digest(text.as_bytes());
        digest.iter().map(|b| format!("{b:02x}")).collect()
    }
}

fn defaults_table() -> Result<Table> {
    let mut cfg = RunConfig::default();
    if let Ok(root) = std::env::var(OUTPUT_ROOT_VAR) {
        cfg.output_dir = root;
    }
    Table::try_from(cfg).map_err(|e| Error::Config(e.to_string()))
}

fn leaf_paths(table: &Table, prefix: &str, out: &mut Vec<String>) {
    for (k, v) in table {
        let path = if prefix.is_empty() {
            k.clone()
        } else {
            format!("{prefix}.{k}")
        };
        match v {
            Value::Table(t) => leaf_paths(t, &path, out),
            _ => out.push(path),
        }
    }
}

fn merge(base: &mut Table, top: Table) {
    for (k, v) in top {
        match (base.get_mut(&k), v) {
            (Some(Value::Table(b)), Value::Table(t)) => merge(b, t),
            (_, v) => {
                base.insert(k, v);
            }
        }
    }
}

fn lookup<'a>(table: &'a Table, path: &str) -> Option<&'a Value> {
    let mut parts = path.split('.');
    let mut cur = table.get(parts.next()?)?;
    for p in parts {
        cur = cur.as_table()?.get(p)?;
    }
    Some(cur)
}

fn set(table: &mut Table, path: &str, value: Value) {
    let parts: Vec<&str> = path.split('.').collect();
    let mut cur = table;
    for p in &parts[..parts.len() - 1] {
        cur = cur
            .entry(p.to_string())
            .or_insert_with(|| Value::Table(Table::new()))
            .as_table_mut()
            .expect("path prefix is a table");
    }
    cur.insert(parts[parts.len() - 1].to_string(), value);
}

fn parse_value(raw: &str) -> Value {
    match toml::from_str::<Table>(&format!("v = {raw}")) {
        Ok(mut t) => t.remove("v").unwrap_or_else(|| Value::String(raw.into())),
        Err(_) => Value::String(raw.into()),
    }
}

/// Resolves a possibly bare key to its full dotted path.
fn resolve_key(key: &str, leaves: &[String]) -> Result<String> {
    if leaves.iter().any(|l| l == key) {
        return Ok(key.to_string());
    }
    if key.contains('.') {
        return Err(Error::Config(format!("unknown key `{key}`")));
    }
    let hits: Vec<&String> = leaves.iter().filter(|l| l.rsplit('.').next() == Some(key)).collect();
    match hits.as_slice() {
        [one] => Ok((*one).clone()),
        [] => Err(Error::Config(format!("unknown key `{key}`"))),
        many => Err(Error::Config(format!(
            "ambiguous key `{key}`: qualify it as one of {}",
            many.iter().map(|s| s.as_str()).collect::<Vec<_>>().join(", ")
        ))),
    }
}

/// Applies `key=value` overrides onto `table`. Bare keys resolve when they
/// name exactly one setting.
fn apply_overrides(table: &mut Table, overrides: &[String]) -> Result<()> {
    let mut leaves = Vec::new();
    leaf_paths(table, "", &mut leaves);
    for item in overrides {
        let (key, raw) = item
            .split_once('=')
            .ok_or_else(|| Error::Config(format!("override `{item}` is not of the form key=value")))?;
        let path = resolve_key(key.trim(), &leaves)?;
        let mut value = parse_value(raw.trim());
        if let Some(old) = lookup(table, &path) {
            value = match (old, value) {
                (Value::Float(_), Value::Integer(i)) => Value::Float(i as f64),
                (Value::String(_), v) if !v.is_str() => Value::String(raw.trim().to_string()),
                (old, v) if std::mem::discriminant(old) == std::mem::discriminant(&v) => v,
                (old, v) => {
                    return Err(Error::Config(format!(
                        "key `{path}` expects {}, got {} `{}`",
                        old.type_str(),
                        v.type_str(),
                        raw.trim()
                    )))
                }
            };
        }
        set(table, &path, value);
    }
    Ok(())
}

fn from_table(table: Table, origin: &str) -> Result<RunConfig> {
    let cfg: RunConfig = Value::Table(table)
        .try_into()
        .map_err(|e: toml::de::Error| Error::Config(format!("{origin}: {}", e.message())))?;
    cfg.validate()?;
    Ok(cfg)
}

/// Defaults, then the TOML text (if any), then overrides.
pub fn parse_config_str(text: Option<&str>, overrides: &[String]) -> Result<RunConfig> {
    let mut table = defaults_table()?;
    if let Some(text) = text {
        let file: Table = toml::from_str(text).map_err(|e| Error::Config(format!("config file: {}", e.message())))?;
        let mut file_leaves = Vec::new();
        leaf_paths(&file, "", &mut file_leaves);
        // Reject unknown keys up front so the message names the full path.
        let mut known = Vec::new();
        leaf_paths(&table, "", &mut known);
        for leaf in &file_leaves {
            if !known.contains(leaf) {
                return Err(Error::Config(format!("unknown key `{leaf}`")));
            }
        }
        merge(&mut table, file);
    }
    apply_overrides(&mut table, overrides)?;
    from_table(table, "config")
}

pub fn parse_config(path: Option<&Path>, overrides: &[String]) -> Result<RunConfig> {
    let text = match path {
        Some(p) => Some(std::fs::read_to_string(p).map_err(|e| Error::io(p, e))?),
        None => None,
    };
    parse_config_str(text.as_deref(), overrides)
}
