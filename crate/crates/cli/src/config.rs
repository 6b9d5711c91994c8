//! Run configuration: a TOML file with `[input]`, `[grid]`, `[adf]`,
//! `[[selector]]`, `[evaluation]`, `[[query]]` and `[output]` sections.
//!
//! ```toml
//! [input]
//! synth = { seed = 7, days = 10 }
//!
//! [grid]
//! reduced = "group<=1 & w=48"
//!
//! [[selector]]
//! mode = 13
//! lambda = 0.9
//! c1 = 0.5
//! c2 = 0.75
//!
//! [[query]]
//! name = "w96"
//! h1 = "w=96"
//! ```

use std::collections::BTreeSet;
use std::path::{Path, PathBuf};

use adafore_core::adaptive::{PenaltyType, SelectorConfig};
use adafore_core::market_data::{SynthParams, VolumeMode};
use adafore_core::model_zoo::{enumerate_models, ModelSpec};
use adafore_core::{ClassQuery, ModelPredicate};
use chrono::NaiveDate;
use serde::{Deserialize, Serialize};

use crate::error::{CliError, CliResult};
use crate::reduced::parse_reduced_grid;

/// Environment variable that may set the output directory.
pub const OUT_ENV: &str = "ADAFORE_OUT";

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RunConfig {
    pub input: InputConfig,
    #[serde(default)]
    pub grid: GridConfig,
    #[serde(default)]
    pub adf: AdfConfig,
    #[serde(default, rename = "selector")]
    pub selectors: Vec<SelectorEntry>,
    #[serde(default)]
    pub evaluation: EvalConfig,
    #[serde(default, rename = "query")]
    pub queries: Vec<QueryEntry>,
    /// Not stored with the outputs, so artifacts do not depend on where
    /// they were written.
    #[serde(default, skip_serializing)]
    pub output: OutputConfig,
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct InputConfig {
    /// Tick CSV path, relative to the working directory.
    pub ticks: Option<PathBuf>,
    /// `per-entry` (default) or `cumulative`.
    pub volume: Option<String>,
    pub synth: Option<SynthConfig>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SynthConfig {
    #[serde(default = "default_seed")]
    pub seed: u64,
    #[serde(default = "default_days")]
    pub days: usize,
    pub start_date: Option<String>,
    pub start_price: Option<f64>,
    pub tick_vol: Option<f64>,
    pub jump_scale: Option<f64>,
    pub lunch_jump_scale: Option<f64>,
    pub spread: Option<f64>,
    pub flow_coupling: Option<f64>,
}

fn default_seed() -> u64 {
    1
}

fn default_days() -> usize {
    10
}

impl Default for SynthConfig {
    fn default() -> Self {
        SynthConfig {
            seed: default_seed(),
            days: default_days(),
            start_date: None,
            start_price: None,
            tick_vol: None,
            jump_scale: None,
            lunch_jump_scale: None,
            spread: None,
            flow_coupling: None,
        }
    }
}

impl SynthConfig {
    pub fn params(&self) -> CliResult<SynthParams> {
        let mut p = SynthParams::default();
        if let Some(d) = &self.start_date {
            p.start_date = NaiveDate::parse_from_str(d, "%Y-%m-%d").map_err(|_| CliError::Validation(format!("bad synth start_date {d:?}")))?;
        }
        let set = |slot: &mut f64, v: Option<f64>| {
            if let Some(v) = v {
                *slot = v;
            }
        };
        set(&mut p.start_price, self.start_price);
        set(&mut p.tick_vol, self.tick_vol);
        set(&mut p.jump_scale, self.jump_scale);
        set(&mut p.lunch_jump_scale, self.lunch_jump_scale);
        set(&mut p.spread, self.spread);
        set(&mut p.flow_coupling, self.flow_coupling);
        Ok(p)
    }
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct GridConfig {
    pub groups: Option<Vec<u8>>,
    pub windows: Option<Vec<usize>>,
    /// Model codes or a filter; see [`crate::reduced`].
    pub reduced: Option<String>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct AdfConfig {
    pub window: usize,
    pub d_max: usize,
}

impl Default for AdfConfig {
    fn default() -> Self {
        AdfConfig { window: 96, d_max: 2 }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SelectorEntry {
    /// 13 or 14.
    pub mode: u8,
    /// Penalty type 1-3; group 14 only.
    #[serde(rename = "type")]
    pub kind: Option<u8>,
    pub lambda: f64,
    pub c1: f64,
    pub c2: f64,
    pub c3_frac: Option<f64>,
    pub c4_frac: Option<f64>,
    pub c5_frac: Option<f64>,
    pub loss_window: Option<usize>,
    pub warm_up: Option<usize>,
    pub filter_band: Option<f64>,
}

impl SelectorEntry {
    pub fn to_config(&self) -> CliResult<SelectorConfig> {
        let invalid = |e: adafore_core::Error| CliError::Validation(e.to_string());
        let mut cfg = match self.mode {
            13 => {
                if self.kind.is_some() {
                    return Err(CliError::Validation("group-13 selectors take no penalty type".into()));
                }
                SelectorConfig::group13(self.lambda, self.c1, self.c2)
            }
            14 => {
                let kind = PenaltyType::from_number(self.kind.ok_or_else(|| CliError::Validation("group-14 selector needs a type".into()))?).map_err(invalid)?;
                SelectorConfig::group14(kind, self.lambda, self.c1, self.c2)
            }
            m => return Err(CliError::Validation(format!("selector mode must be 13 or 14, got {m}"))),
        };
        for (slot, v) in cfg.fractions.iter_mut().zip([self.c3_frac, self.c4_frac, self.c5_frac]) {
            if let Some(v) = v {
                *slot = v;
            }
        }
        if let Some(v) = self.loss_window {
            cfg.loss_window = v;
        }
        if let Some(v) = self.warm_up {
            cfg.warm_up = v;
        }
        if let Some(v) = self.filter_band {
            cfg.filter_band = v;
        }
        cfg.validate().map_err(invalid)?;
        Ok(cfg)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct EvalConfig {
    /// Include every fixed model of the grid in the report.
    pub fixed_models: bool,
}

impl Default for EvalConfig {
    fn default() -> Self {
        EvalConfig { fixed_models: true }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct QueryEntry {
    pub name: String,
    pub h1: String,
    #[serde(default = "default_h0")]
    pub h0: String,
    /// Selections per test period.
    #[serde(default = "default_period")]
    pub period: usize,
}

fn default_h0() -> String {
    "all".into()
}

fn default_period() -> usize {
    180
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct OutputConfig {
    pub dir: PathBuf,
}

impl Default for OutputConfig {
    fn default() -> Self {
        OutputConfig { dir: PathBuf::from("out") }
    }
}

impl RunConfig {
    pub fn from_toml(text: &str) -> CliResult<Self> {
        toml::from_str(text).map_err(|e| CliError::Validation(format!("config: {e}")))
    }

    pub fn load(path: &Path) -> CliResult<Self> {
        let text = std::fs::read_to_string(path).map_err(|e| CliError::Validation(format!("{}: {e}", path.display())))?;
        Self::from_toml(&text)
    }

    pub fn to_toml(&self) -> String {
        toml::to_string(self).expect("config serializes")
    }
}

/// Command-line settings that take precedence over the file.
#[derive(Debug, Clone, Default)]
pub struct Overrides {
    pub out: Option<PathBuf>,
    pub seed: Option<u64>,
    pub reduced_grid: Option<String>,
}

/// Where ticks come from.
#[derive(Debug, Clone, PartialEq)]
pub enum TickSource {
    File { path: PathBuf, volume: VolumeMode },
    Synth { seed: u64, days: usize, params: SynthParams },
}

#[derive(Debug, Clone, PartialEq)]
pub struct NamedQuery {
    pub query: ClassQuery,
    pub period: usize,
}

/// A validated configuration ready to run.
#[derive(Debug, Clone)]
pub struct Plan {
    /// The configuration after overrides, as stored next to the outputs.
    pub config: RunConfig,
    pub source: TickSource,
    pub universe: Vec<ModelSpec>,
    pub selectors: Vec<SelectorConfig>,
    pub queries: Vec<NamedQuery>,
    pub out: PathBuf,
}

impl Plan {
    /// Applies overrides and checks everything that can be checked without
    /// touching data.
    pub fn new(mut config: RunConfig, overrides: &Overrides) -> CliResult<Plan> {
        if let Some(seed) = overrides.seed {
            match &mut config.input.synth {
                Some(s) => s.seed = seed,
                None if config.input.ticks.is_none() => {
                    config.input.synth = Some(SynthConfig { seed, ..SynthConfig::default() });
                }
                None => return Err(CliError::Validation("--seed applies to synthetic input only".into())),
            }
        }
        if let Some(r) = &overrides.reduced_grid {
            config.grid.reduced = Some(r.clone());
        }
        if let Some(out) = overrides.out.clone().or_else(|| std::env::var_os(OUT_ENV).map(PathBuf::from)) {
            config.output.dir = out;
        }

        let source = match (&config.input.ticks, &config.input.synth) {
            (Some(_), Some(_)) => return Err(CliError::Validation("[input] takes either ticks or synth, not both".into())),
            (None, None) => return Err(CliError::Validation("[input] needs ticks or synth".into())),
            (Some(path), None) => {
                if !path.is_file() {
                    return Err(CliError::Validation(format!("tick file {} not found", path.display())));
                }
                let volume = match config.input.volume.as_deref() {
                    None | Some("per-entry") => VolumeMode::PerEntry,
                    Some("cumulative") => VolumeMode::Cumulative,
                    Some(v) => return Err(CliError::Validation(format!("volume must be per-entry or cumulative, got {v:?}"))),
                };
                TickSource::File { path: path.clone(), volume }
            }
            (None, Some(s)) => {
                if s.days == 0 {
                    return Err(CliError::Validation("synth days must be positive".into()));
                }
                TickSource::Synth {
                    seed: s.seed,
                    days: s.days,
                    params: s.params()?,
                }
            }
        };

        let universe = build_universe(&config.grid)?;

        let selectors = config.selectors.iter().map(SelectorEntry::to_config).collect::<CliResult<Vec<_>>>()?;
        let mut codes = BTreeSet::new();
        for s in &selectors {
            if !codes.insert(s.code()) {
                return Err(CliError::Validation(format!("duplicate selector {}", s.code())));
            }
        }

        let mut names = BTreeSet::new();
        let mut queries = Vec::new();
        for q in &config.queries {
            if !names.insert(q.name.clone()) {
                return Err(CliError::Validation(format!("duplicate query name {:?}", q.name)));
            }
            if q.name.is_empty() || !q.name.chars().all(|c| c.is_ascii_alphanumeric() || c == '-' || c == '_') {
                return Err(CliError::Validation(format!("query name {:?} must be alphanumeric", q.name)));
            }
            if q.period == 0 {
                return Err(CliError::Validation(format!("query {}: period must be positive", q.name)));
            }
            let parse = |s: &str| s.parse::<ModelPredicate>().map_err(|e| CliError::Validation(e.to_string()));
            let query = ClassQuery {
                name: q.name.clone(),
                h1: parse(&q.h1)?,
                h0: parse(&q.h0)?,
            };
            query.class_sizes(&universe).map_err(|e| CliError::Validation(e.to_string()))?;
            queries.push(NamedQuery { query, period: q.period });
        }

        if config.adf.window < adafore_core::stationarity::ADF_MIN_LEN + config.adf.d_max {
            return Err(CliError::Validation(format!(
                "adf window {} too short for {} differences",
                config.adf.window, config.adf.d_max
            )));
        }

        let out = config.output.dir.clone();
        Ok(Plan {
            config,
            source,
            universe,
            selectors,
            queries,
            out,
        })
    }

    /// Largest window of the grid, i.e. the first usable forecast origin.
    pub fn min_history(&self) -> usize {
        self.universe.iter().map(|s| s.w).max().unwrap_or(0)
    }
}

fn build_universe(grid: &GridConfig) -> CliResult<Vec<ModelSpec>> {
    let mut specs = enumerate_models();
    if let Some(groups) = &grid.groups {
        specs.retain(|s| groups.contains(&s.group));
    }
    if let Some(windows) = &grid.windows {
        specs.retain(|s| windows.contains(&s.w));
    }
    if let Some(r) = &grid.reduced {
        let keep = parse_reduced_grid(r)?;
        specs.retain(|s| keep.contains(s));
    }
    if specs.is_empty() {
        return Err(CliError::Validation("model grid is empty".into()));
    }
    Ok(specs)
}
