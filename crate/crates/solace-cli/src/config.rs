//! Scenario config files: TOML onto the engine's run types, plus dotted
//! `--set` overrides.
//!
//! A file holds environment paths, one default scenario, an optional named
//! scenario list for batches, and the simulation tables. Every section
//! rejects unknown keys. Relative paths resolve against the working
//! directory, so the bundled config runs from the repository root.

use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};
use solace::engine::{RunSpec, Scenario, SimConfig};
use solace::geo::{load_environment, BlockingRule, Environment, GeoConfig, GeoPaths};
use solace::population::{PopulationSpec, TimeOfDay};
use solace::quake::DamageModel;
use solace::social::BondTable;

use crate::CliError;

/// Where the four environment layers live, plus loader tuning.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct EnvironmentSection {
    pub buildings: PathBuf,
    pub roads: PathBuf,
    pub safe_areas: PathBuf,
    pub soil: PathBuf,
    /// Road endpoints closer than this merge into one node (meters).
    pub snap_tolerance: f64,
    /// Spatial index cell size (meters).
    pub cell_size: f64,
}

impl Default for EnvironmentSection {
    fn default() -> Self {
        let geo = GeoConfig::default();
        EnvironmentSection {
            buildings: "districts/district_a/buildings.geojson".into(),
            roads: "districts/district_a/roads.geojson".into(),
            safe_areas: "districts/district_a/safe_areas.geojson".into(),
            soil: "districts/district_a/soil.geojson".into(),
            snap_tolerance: geo.snap_tolerance,
            cell_size: geo.cell_size,
        }
    }
}

/// One config file: a full run description plus named scenario variants.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ConfigFile {
    pub environment: EnvironmentSection,
    /// Scenario used by `run` unless --scenario picks from the list.
    pub scenario: Scenario,
    /// Named variants for `batch`; share every table below.
    pub scenarios: Vec<Scenario>,
    pub population: PopulationSpec,
    pub bonds: BondTable,
    pub behavior: solace::behavior::BehaviorConfig,
    pub damage: DamageModel,
    pub sim: SimConfig,
    /// Baseline perception distance in meters.
    pub pd_normal: f64,
    pub blocking: BlockingRule,
}

impl Default for ConfigFile {
    fn default() -> Self {
        let spec = RunSpec::default();
        ConfigFile {
            environment: EnvironmentSection::default(),
            scenario: spec.scenario,
            scenarios: stock_scenarios(),
            population: spec.population,
            bonds: spec.bonds,
            behavior: spec.behavior,
            damage: spec.damage,
            sim: spec.sim,
            pd_normal: spec.pd_normal,
            blocking: spec.blocking,
        }
    }
}

/// The four standard comparison scenarios: daytime baseline, night, day
/// with disabled residents included, and a stronger daytime quake.
pub fn stock_scenarios() -> Vec<Scenario> {
    let s1 = Scenario::default();
    let s2 = Scenario {
        name: "S2".into(),
        time_of_day: TimeOfDay::Night,
        ..s1.clone()
    };
    let s3 = Scenario {
        name: "S3".into(),
        include_disabled: true,
        ..s1.clone()
    };
    let s4 = Scenario {
        name: "S4".into(),
        intensity: 8,
        ..s1.clone()
    };
    vec![s1, s2, s3, s4]
}

impl ConfigFile {
    /// Assemble the engine-facing spec for one scenario.
    pub fn run_spec(&self, scenario: Scenario) -> RunSpec {
        RunSpec {
            scenario,
            population: self.population.clone(),
            bonds: self.bonds.clone(),
            behavior: self.behavior.clone(),
            damage: self.damage.clone(),
            sim: self.sim,
            pd_normal: self.pd_normal,
            blocking: self.blocking,
        }
    }

    pub fn scenario_named(&self, name: &str) -> Result<&Scenario, CliError> {
        self.scenarios
            .iter()
            .find(|s| s.name == name)
            .ok_or_else(|| {
                let known: Vec<&str> = self.scenarios.iter().map(|s| s.name.as_str()).collect();
                CliError::Config(format!(
                    "scenario `{name}` not in config (defines: {})",
                    if known.is_empty() {
                        "none".to_string()
                    } else {
                        known.join(", ")
                    }
                ))
            })
    }

    pub fn load_environment(&self) -> Result<Environment, CliError> {
        let e = &self.environment;
        load_environment(
            &GeoPaths {
                buildings: e.buildings.clone(),
                roads: e.roads.clone(),
                safe_areas: e.safe_areas.clone(),
                soil: e.soil.clone(),
            },
            GeoConfig {
                snap_tolerance: e.snap_tolerance,
                cell_size: e.cell_size,
            },
        )
        .map_err(|err| CliError::Environment(err.to_string()))
    }

    pub fn to_toml(&self) -> Result<String, CliError> {
        toml::to_string_pretty(self)
            .map_err(|e| CliError::Config(format!("serializing effective config: {e}")))
    }
}

/// Read a config file and apply `--set key=value` overrides before
/// deserializing, so overridden documents face the same unknown-key and
/// type checks as written ones.
pub fn load_config(path: &Path, sets: &[String]) -> Result<ConfigFile, CliError> {
    let text = std::fs::read_to_string(path)
        .map_err(|e| CliError::Config(format!("reading {}: {e}", path.display())))?;
    let mut doc: toml::Value = toml::from_str(&text)
        .map_err(|e| CliError::Config(format!("{}: {e}", path.display())))?;
    for entry in sets {
        apply_override(&mut doc, entry)
            .map_err(|e| CliError::Config(format!("--set {entry}: {e}")))?;
    }
    doc.try_into()
        .map_err(|e| CliError::Config(format!("{}: {e}", path.display())))
}

/// Apply one `key.path=value` override to a parsed document. Path segments
/// descend tables by key; inside arrays a segment picks the element whose
/// `name` or `kind` equals it (or by zero-based index).
fn apply_override(doc: &mut toml::Value, entry: &str) -> Result<(), String> {
    let (key, raw) = entry
        .split_once('=')
        .ok_or_else(|| "expected KEY=VALUE".to_string())?;
    let key = key.trim();
    if key.is_empty() {
        return Err("empty key".into());
    }
    let segments: Vec<&str> = key.split('.').collect();

    let mut cursor = doc;
    for (i, segment) in segments.iter().enumerate() {
        let last = i + 1 == segments.len();
        let walked = &segments[..=i].join(".");
        match cursor {
            toml::Value::Table(table) => {
                if last {
                    table.insert(segment.to_string(), parse_scalar(raw));
                    return Ok(());
                }
                cursor = table
                    .entry(segment.to_string())
                    .or_insert_with(|| toml::Value::Table(Default::default()));
            }
            toml::Value::Array(items) => {
                let found = match segment.parse::<usize>() {
                    Ok(idx) => items.get_mut(idx),
                    Err(_) => items.iter_mut().find(|v| {
                        ["name", "kind"]
                            .iter()
                            .any(|k| v.get(k).and_then(toml::Value::as_str) == Some(*segment))
                    }),
                };
                cursor = found.ok_or(format!("no element `{segment}` under `{walked}`"))?;
                if last {
                    *cursor = parse_scalar(raw);
                    return Ok(());
                }
            }
            other => {
                return Err(format!(
                    "`{walked}` is a {}, cannot descend into it",
                    other.type_str()
                ))
            }
        }
    }
    unreachable!("loop returns on the last segment");
}

/// Parse an override value as TOML (so `8`, `0.7`, `true`, `[6, 0.25]` and
/// inline tables all work); anything unparseable is taken as a string.
fn parse_scalar(raw: &str) -> toml::Value {
    toml::from_str::<toml::Table>(&format!("v = {raw}"))
        .ok()
        .and_then(|mut t| t.remove("v"))
        .unwrap_or_else(|| toml::Value::String(raw.trim().to_string()))
}

/// `7` is one seed; `1..30` is an inclusive range.
pub fn parse_seeds(raw: &str) -> Result<Vec<u64>, CliError> {
    let bad = |msg: &str| CliError::Config(format!("seeds `{raw}`: {msg}"));
    if let Some((lo, hi)) = raw.split_once("..") {
        let lo: u64 = lo.trim().parse().map_err(|_| bad("start is not a number"))?;
        let hi: u64 = hi.trim().parse().map_err(|_| bad("end is not a number"))?;
        if lo > hi {
            return Err(bad("start exceeds end"));
        }
        Ok((lo..=hi).collect())
    } else {
        let seed: u64 = raw.trim().parse().map_err(|_| bad("not a number"))?;
        Ok(vec![seed])
    }
}
