//! Experiment configuration: a flat JSON schema parsed key by key so every
//! error names the offending key.
//!
//! ```json
//! { "defense": "ras-spec", "rate": 3, "entries": 1, "window": 4,
//!   "scenario": "spectre-fr", "secret": 30, "seed": 1 }
//! ```
//!
//! | key | applies to | default |
//! |-----|------------|---------|
//! | `defense` | all | required |
//! | `scenario` | all | required: an attack name or `"trace"` |
//! | `seed` | all | required |
//! | `rate`, `entries`, `window` | `ras-spec`, `ras-plus` | required |
//! | `window` | `random-fill` | required |
//! | `nofill_clear` | `ras-spec`, `ras-plus` | `true` |
//! | `hierarchy` | all | default two-level hierarchy; partial objects merge |
//! | `output_dir` | all | `"out"` |
//! | `secret`, `step`, `key`, `trials`, `target_byte`, `threshold_z`, `dummy_victim`, `collision_l1_mshrs`, `force_fill` | attacks | attack defaults |
//! | `trace`, `model`, `trace_len`, `squash_delay` | `trace` | default locality model, 40000 records, 20 cycles |

use std::path::PathBuf;

use serde::de::DeserializeOwned;
use serde::{Deserialize, Serialize};
use serde_json::{Map, Value};
use sha2::{Digest, Sha256};

use crate::attacks::{AttackKind, AttackParams};
use crate::error::{Error, Result};
use crate::hierarchy::{DefenseKind, DefenseMode, HierarchyConfig};
use crate::kernel::Cycle;
use crate::workloads::{LocalityModel, ReplayOptions};

pub const DEFAULT_TRACE_LEN: usize = 40_000;

const COMMON_KEYS: &[&str] = &["defense", "scenario", "seed", "hierarchy", "output_dir"];
const SHB_KEYS: &[&str] = &["rate", "entries", "window", "nofill_clear"];
const ATTACK_KEYS: &[&str] = &[
    "secret",
    "step",
    "key",
    "trials",
    "target_byte",
    "threshold_z",
    "dummy_victim",
    "collision_l1_mshrs",
    "force_fill",
];
const TRACE_KEYS: &[&str] = &["trace", "model", "trace_len", "squash_delay"];

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum TraceSource {
    File(PathBuf),
    Model { model: LocalityModel, len: usize },
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "type", rename_all = "kebab-case")]
pub enum Scenario {
    Attack { attack: AttackKind, params: AttackParams },
    Trace { source: TraceSource, squash_delay: Cycle },
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ExperimentConfig {
    pub hierarchy: HierarchyConfig,
    pub seed: u64,
    pub scenario: Scenario,
    pub output_dir: PathBuf,
}

impl ExperimentConfig {
    pub fn attack(kind: AttackKind, defense: DefenseMode, params: AttackParams) -> Self {
        Self {
            hierarchy: HierarchyConfig::new(defense),
            seed: params.seed,
            scenario: Scenario::Attack { attack: kind, params },
            output_dir: PathBuf::from("out"),
        }
    }

    pub fn trace_model(defense: DefenseMode, model: LocalityModel, len: usize, seed: u64) -> Self {
        Self {
            hierarchy: HierarchyConfig::new(defense),
            seed,
            scenario: Scenario::Trace {
                source: TraceSource::Model { model, len },
                squash_delay: ReplayOptions::default().squash_delay,
            },
            output_dir: PathBuf::from("out"),
        }
    }

    pub fn defense(&self) -> &DefenseMode {
        &self.hierarchy.defense
    }

    /// Replaces the seed everywhere it is used.
    pub fn with_seed(mut self, seed: u64) -> Self {
        self.seed = seed;
        if let Scenario::Attack { params, .. } = &mut self.scenario {
            params.seed = seed;
        }
        self
    }

    pub fn with_output_dir(mut self, dir: impl Into<PathBuf>) -> Self {
        self.output_dir = dir.into();
        self
    }

    pub fn scenario_name(&self) -> &'static str {
        match &self.scenario {
            Scenario::Attack { attack, .. } => attack.name(),
            Scenario::Trace { .. } => "trace",
        }
    }

    /// Short identity used in sweep errors and logs.
    pub fn label(&self) -> String {
        format!("{}/{}/seed{}", self.scenario_name(), self.defense().label(), self.seed)
    }

    pub fn validate(&self) -> Result<()> {
        self.hierarchy.validate()?;
        match &self.scenario {
            Scenario::Attack { params, .. } => {
                if params.trials == 0 {
                    return Err(Error::config("trials", "must be at least 1"));
                }
                if params.target_byte >= 16 {
                    return Err(Error::config("target_byte", "must be below 16"));
                }
                if params.step == 0 {
                    return Err(Error::config("step", "must be positive"));
                }
                if params.seed != self.seed {
                    return Err(Error::config("seed", "attack seed differs from experiment seed"));
                }
            }
            Scenario::Trace { source, .. } => {
                if let TraceSource::Model { model, len } = source {
                    model.validate()?;
                    if *len == 0 {
                        return Err(Error::config("trace_len", "must be at least 1"));
                    }
                }
            }
        }
        Ok(())
    }

    /// SHA-256 over the canonical JSON form, excluding the output directory.
    pub fn hash(&self) -> String {
        let mut c = self.clone();
        c.output_dir = PathBuf::new();
        let json = serde_json::to_string(&c).expect("config serializes");
        Sha256::digest(json.as_bytes()).iter().map(|b| format!("{b:02x}")).collect()
    }
}

fn field<T: DeserializeOwned>(obj: &Map<String, Value>, key: &str) -> Result<Option<T>> {
    match obj.get(key) {
        None => Ok(None),
        Some(v) => serde_json::from_value(v.clone()).map(Some).map_err(|e| Error::config(key, e.to_string())),
    }
}

fn required<T: DeserializeOwned>(obj: &Map<String, Value>, key: &str) -> Result<T> {
    field(obj, key)?.ok_or_else(|| Error::config(key, "missing required key"))
}

fn reject_keys(obj: &Map<String, Value>, keys: &[&str], why: &str) -> Result<()> {
    match keys.iter().find(|k| obj.contains_key(**k)) {
        Some(k) => Err(Error::config(*k, why)),
        None => Ok(()),
    }
}

fn parse_key(hex: &str) -> Result<[u8; 16]> {
    let hex = hex.strip_prefix("0x").unwrap_or(hex);
    if hex.len() != 32 {
        return Err(Error::config("key", "expected 32 hex digits"));
    }
    let mut key = [0u8; 16];
    for (i, b) in key.iter_mut().enumerate() {
        *b = u8::from_str_radix(&hex[2 * i..2 * i + 2], 16).map_err(|_| Error::config("key", "not hexadecimal"))?;
    }
    Ok(key)
}

/// Overlays `patch` onto `base`, refusing keys `base` does not have.
fn merge(base: &mut Value, patch: &Value, path: &str) -> Result<()> {
    let (Value::Object(b), Value::Object(p)) = (&mut *base, patch) else {
        *base = patch.clone();
        return Ok(());
    };
    for (k, v) in p {
        let sub = format!("{path}.{k}");
        match b.get_mut(k) {
            Some(slot) if slot.is_object() => {
                if !v.is_object() {
                    return Err(Error::config(sub, "expected an object"));
                }
                merge(slot, v, &sub)?;
            }
            Some(slot) => *slot = v.clone(),
            None => return Err(Error::config(sub, "unknown key")),
        }
    }
    Ok(())
}

fn parse_hierarchy(obj: &Map<String, Value>, defense: DefenseMode) -> Result<HierarchyConfig> {
    let mut cfg = HierarchyConfig::new(defense);
    let Some(patch) = obj.get("hierarchy") else {
        return Ok(cfg);
    };
    if !patch.is_object() {
        return Err(Error::config("hierarchy", "expected an object"));
    }
    if patch.get("defense").is_some() {
        return Err(Error::config("hierarchy.defense", "set the defense with the top-level keys"));
    }
    let mut base = serde_json::to_value(cfg).expect("hierarchy serializes");
    merge(&mut base, patch, "hierarchy")?;
    cfg = serde_json::from_value(base).map_err(|e| Error::config("hierarchy", e.to_string()))?;
    Ok(cfg)
}

fn parse_defense(obj: &Map<String, Value>) -> Result<DefenseMode> {
    let name: String = required(obj, "defense")?;
    let kind = DefenseKind::parse(&name).ok_or_else(|| Error::config("defense", format!("unknown defense `{name}`")))?;
    let mode = match kind {
        DefenseKind::BaselineLru | DefenseKind::SaRandomRepl => {
            reject_keys(obj, SHB_KEYS, "only valid for ras-spec, ras-plus and random-fill")?;
            if kind == DefenseKind::BaselineLru {
                DefenseMode::baseline()
            } else {
                DefenseMode::sa_random()
            }
        }
        DefenseKind::RandomFill => {
            reject_keys(obj, &["rate", "entries", "nofill_clear"], "not used by random-fill")?;
            DefenseMode::random_fill(required(obj, "window")?)
        }
        DefenseKind::RasSpec | DefenseKind::RasPlus => {
            let rate = required(obj, "rate")?;
            let entries = required(obj, "entries")?;
            let window = required(obj, "window")?;
            let mut m = if kind == DefenseKind::RasSpec {
                DefenseMode::ras_spec(rate, entries, window)
            } else {
                DefenseMode::ras_plus(rate, entries, window)
            };
            m.nofill_clear = field(obj, "nofill_clear")?.unwrap_or(true);
            m
        }
    };
    mode.validate()?;
    Ok(mode)
}

fn parse_attack(obj: &Map<String, Value>, kind: AttackKind, seed: u64) -> Result<Scenario> {
    reject_keys(obj, TRACE_KEYS, "only valid for the trace scenario")?;
    let d = AttackParams::default();
    let key = match field::<String>(obj, "key")? {
        Some(hex) => parse_key(&hex)?,
        None => d.key,
    };
    let params = AttackParams {
        secret: field(obj, "secret")?.unwrap_or(d.secret),
        step: field(obj, "step")?.unwrap_or(d.step),
        key,
        trials: field(obj, "trials")?.unwrap_or(d.trials),
        target_byte: field(obj, "target_byte")?.unwrap_or(d.target_byte),
        threshold_z: field(obj, "threshold_z")?.unwrap_or(d.threshold_z),
        dummy_victim: field(obj, "dummy_victim")?.unwrap_or(d.dummy_victim),
        collision_l1_mshrs: field(obj, "collision_l1_mshrs")?.unwrap_or(d.collision_l1_mshrs),
        force_fill: field(obj, "force_fill")?.unwrap_or(d.force_fill),
        seed,
    };
    Ok(Scenario::Attack { attack: kind, params })
}

fn parse_trace_scenario(obj: &Map<String, Value>) -> Result<Scenario> {
    reject_keys(obj, ATTACK_KEYS, "only valid for attack scenarios")?;
    let path: Option<PathBuf> = field(obj, "trace")?;
    let model: Option<LocalityModel> = field(obj, "model")?;
    let len: Option<usize> = field(obj, "trace_len")?;
    let source = match (path, model) {
        (Some(_), Some(_)) => return Err(Error::config("model", "give either `trace` or `model`, not both")),
        (Some(p), None) => {
            if len.is_some() {
                return Err(Error::config("trace_len", "only valid with a generated trace"));
            }
            TraceSource::File(p)
        }
        (None, m) => TraceSource::Model { model: m.unwrap_or_default(), len: len.unwrap_or(DEFAULT_TRACE_LEN) },
    };
    let squash_delay = field(obj, "squash_delay")?.unwrap_or(ReplayOptions::default().squash_delay);
    Ok(Scenario::Trace { source, squash_delay })
}

/// Parses and validates one experiment from its JSON text.
pub fn parse_config(text: &str) -> Result<ExperimentConfig> {
    let value: Value = serde_json::from_str(text).map_err(|e| Error::config("<root>", e.to_string()))?;
    let Value::Object(obj) = value else {
        return Err(Error::config("<root>", "expected a JSON object"));
    };
    if let Some(k) = obj.keys().find(|k| {
        ![COMMON_KEYS, SHB_KEYS, ATTACK_KEYS, TRACE_KEYS].iter().any(|set| set.contains(&k.as_str()))
    }) {
        return Err(Error::config(k.as_str(), "unknown key"));
    }
    let defense = parse_defense(&obj)?;
    let hierarchy = parse_hierarchy(&obj, defense)?;
    let seed: u64 = required(&obj, "seed")?;
    let name: String = required(&obj, "scenario")?;
    let scenario = if name == "trace" {
        parse_trace_scenario(&obj)?
    } else {
        let kind =
            AttackKind::parse(&name).ok_or_else(|| Error::config("scenario", format!("unknown scenario `{name}`")))?;
        parse_attack(&obj, kind, seed)?
    };
    let output_dir = field(&obj, "output_dir")?.unwrap_or_else(|| PathBuf::from("out"));
    let cfg = ExperimentConfig { hierarchy, seed, scenario, output_dir };
    cfg.validate()?;
    Ok(cfg)
}
