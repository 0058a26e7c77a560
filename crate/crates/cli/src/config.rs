//! Pipeline configuration: a TOML file with `${VAR}` interpolation in string
//! values. Relative paths resolve against the config file's directory.

use std::collections::BTreeMap;
use std::path::{Path, PathBuf};
use std::sync::LazyLock;

use regex::Regex;
use serde::{Deserialize, Serialize};
use trajlens_core::context::{ContextKind, FilterPolicy};
use trajlens_core::ingest::Format;
use trajlens_core::segmentation::CostWeights;
use trajlens_core::tasks::regions::DEFAULT_GRID;
use trajlens_core::tasks::{AnomalyParams, TaskKind};
use trajlens_core::tokenize::{Rgb, StyleSheet};
use trajlens_gateway::{Backend, GatewayConfig};
use trajlens_prompt::MAX_SEEDS;

use crate::error::CliError;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct DataConfig {
    pub trajectories: PathBuf,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub format: Option<Format>,
    /// Road network, POIs and traffic lights as GeoJSON. Without it every
    /// contextual layer is empty.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub context: Option<PathBuf>,
    /// Dataset region; picks default filter thresholds.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub region: Option<String>,
    /// City name offered to prompts as the `city` fact.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub city: Option<String>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "lowercase", deny_unknown_fields)]
pub enum TilesConfig {
    Checkerboard {
        #[serde(default = "default_light")]
        light: Rgb,
        #[serde(default = "default_dark")]
        dark: Rgb,
        #[serde(default = "default_squares")]
        squares: u32,
    },
    Dir {
        root: PathBuf,
    },
    Http {
        url: String,
        cache: PathBuf,
    },
}

fn default_light() -> Rgb {
    Rgb([0xF2, 0xEF, 0xE9])
}

fn default_dark() -> Rgb {
    Rgb([0xE4, 0xE0, 0xD8])
}

fn default_squares() -> u32 {
    4
}

impl Default for TilesConfig {
    fn default() -> Self {
        TilesConfig::Checkerboard {
            light: default_light(),
            dark: default_dark(),
            squares: default_squares(),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct TokenizeConfig {
    /// Clip padding as a fraction of the sub-trajectory extent.
    pub delta: f64,
    pub layers: Vec<ContextKind>,
    pub tiles: TilesConfig,
}

impl Default for TokenizeConfig {
    fn default() -> Self {
        Self {
            delta: trajlens_core::multiview::DEFAULT_DELTA,
            layers: ContextKind::ALL.to_vec(),
            tiles: TilesConfig::default(),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct TaskConfig {
    pub kind: TaskKind,
    /// Prompt file; the shipped prompt for `kind` when unset.
    #[serde(skip_serializing_if = "Option::is_none")]
    pub prompt: Option<PathBuf>,
    /// Extra prompt facts; `city` and `region_grid` are filled in when
    /// missing.
    pub facts: BTreeMap<String, String>,
    /// Rows and columns of the destination-region grid.
    pub region_grid: u16,
}

impl Default for TaskConfig {
    fn default() -> Self {
        Self {
            kind: TaskKind::Tte,
            prompt: None,
            facts: BTreeMap::new(),
            region_grid: DEFAULT_GRID,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct OptimizeConfig {
    /// Number of labelled trajectories, in dataset order, used as seeds.
    pub seeds: usize,
    /// Satisfaction threshold; the task default when unset.
    #[serde(skip_serializing_if = "Option::is_none")]
    pub target: Option<f64>,
    pub max_rounds: u32,
    pub tte_tolerance: f64,
}

impl Default for OptimizeConfig {
    fn default() -> Self {
        Self {
            seeds: 5,
            target: None,
            max_rounds: 3,
            tte_tolerance: 0.2,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct Config {
    pub data: DataConfig,
    /// Output directory. Not part of the recorded config snapshot so runs
    /// into different directories stay comparable.
    #[serde(skip_serializing)]
    pub output: PathBuf,
    pub seed: u64,
    pub jobs: Option<usize>,
    pub segmentation: CostWeights,
    /// Per-layer thresholds; region defaults (or 100 m) when unset.
    #[serde(skip_serializing_if = "Option::is_none")]
    pub filter: Option<FilterPolicy>,
    pub tokenize: TokenizeConfig,
    pub style: StyleSheet,
    pub task: TaskConfig,
    pub optimize: OptimizeConfig,
    pub anomaly: AnomalyParams,
    pub gateway: GatewayConfig,
}

impl Default for Config {
    fn default() -> Self {
        Self {
            data: DataConfig {
                trajectories: PathBuf::new(),
                format: None,
                context: None,
                region: None,
                city: None,
            },
            output: PathBuf::from("out"),
            seed: 0,
            jobs: None,
            segmentation: CostWeights::default(),
            filter: None,
            tokenize: TokenizeConfig::default(),
            style: StyleSheet::default(),
            task: TaskConfig::default(),
            optimize: OptimizeConfig::default(),
            anomaly: AnomalyParams::default(),
            gateway: GatewayConfig::default(),
        }
    }
}

/// Values given on the command line; each replaces the file's value.
#[derive(Debug, Clone, Default)]
pub struct Overrides {
    pub output: Option<PathBuf>,
    pub jobs: Option<usize>,
    pub seed: Option<u64>,
    pub task: Option<TaskKind>,
    pub trajectories: Option<PathBuf>,
    pub backend: Option<Backend>,
    pub fixtures: Option<PathBuf>,
    pub model: Option<String>,
    pub prompt: Option<PathBuf>,
    pub image_px: Option<u32>,
    pub max_rounds: Option<u32>,
}

static VAR: LazyLock<Regex> = LazyLock::new(|| Regex::new(r"\$\{([A-Za-z_][A-Za-z0-9_]*)\}").unwrap());

/// Replaces `${VAR}` in every string value using `lookup`. Unset variables
/// are collected into `missing`.
pub fn interpolate(value: &mut toml::Value, lookup: &dyn Fn(&str) -> Option<String>, missing: &mut Vec<String>) {
    match value {
        toml::Value::String(s) => {
            let replaced = VAR.replace_all(s, |c: &regex::Captures| match lookup(&c[1]) {
                Some(v) => v,
                None => {
                    missing.push(c[1].to_string());
                    String::new()
                }
            });
            *s = replaced.into_owned();
        }
        toml::Value::Array(items) => items.iter_mut().for_each(|v| interpolate(v, lookup, missing)),
        toml::Value::Table(t) => t.iter_mut().for_each(|(_, v)| interpolate(v, lookup, missing)),
        _ => {}
    }
}

fn env_lookup(name: &str) -> Option<String> {
    std::env::var(name).ok()
}

/// A parsed config together with the directory its relative paths refer to.
#[derive(Debug, Clone)]
pub struct Loaded {
    pub config: Config,
    pub base: PathBuf,
}

impl Loaded {
    pub fn parse(text: &str, base: &Path, lookup: &dyn Fn(&str) -> Option<String>) -> Result<Self, CliError> {
        let mut value: toml::Value = toml::from_str(text).map_err(|e| CliError::Config(vec![e.to_string()]))?;
        let mut missing = Vec::new();
        interpolate(&mut value, lookup, &mut missing);
        if !missing.is_empty() {
            missing.sort();
            missing.dedup();
            return Err(CliError::Config(
                missing
                    .into_iter()
                    .map(|v| format!("environment variable {v} is not set"))
                    .collect(),
            ));
        }
        let config: Config = value
            .try_into()
            .map_err(|e: toml::de::Error| CliError::Config(vec![e.to_string()]))?;
        Ok(Self {
            config,
            base: base.to_path_buf(),
        })
    }

    pub fn load(path: &Path) -> Result<Self, CliError> {
        let text = std::fs::read_to_string(path)
            .map_err(|e| CliError::Config(vec![format!("cannot read config {}: {e}", path.display())]))?;
        let base = path.parent().map(Path::to_path_buf).unwrap_or_default();
        Self::parse(&text, &base, &env_lookup)
    }

    pub fn apply(&mut self, o: &Overrides) {
        let c = &mut self.config;
        let cwd = std::env::current_dir().unwrap_or_default();
        // command-line paths are relative to the working directory
        let abs = |p: &PathBuf| if p.is_absolute() { p.clone() } else { cwd.join(p) };
        if let Some(v) = &o.output {
            c.output = abs(v);
        }
        if let Some(v) = o.jobs {
            c.jobs = Some(v);
        }
        if let Some(v) = o.seed {
            c.seed = v;
        }
        if let Some(v) = o.task {
            c.task.kind = v;
        }
        if let Some(v) = &o.trajectories {
            c.data.trajectories = abs(v);
        }
        if let Some(v) = o.backend {
            c.gateway.backend = v;
        }
        if let Some(v) = &o.fixtures {
            c.gateway.fixtures = Some(abs(v));
        }
        if let Some(v) = &o.model {
            c.gateway.model = v.clone();
        }
        if let Some(v) = &o.prompt {
            c.task.prompt = Some(abs(v));
        }
        if let Some(v) = o.image_px {
            c.style.image_px = v;
        }
        if let Some(v) = o.max_rounds {
            c.optimize.max_rounds = v;
        }
    }

    pub fn resolve(&self, p: &Path) -> PathBuf {
        if p.is_absolute() {
            p.to_path_buf()
        } else {
            self.base.join(p)
        }
    }

    pub fn output_dir(&self) -> PathBuf {
        self.resolve(&self.config.output)
    }

    pub fn trajectories_path(&self) -> PathBuf {
        self.resolve(&self.config.data.trajectories)
    }

    pub fn format(&self) -> Option<Format> {
        self.config
            .data
            .format
            .or_else(|| Format::from_path(&self.config.data.trajectories))
    }

    pub fn filter_policy(&self) -> FilterPolicy {
        self.config
            .filter
            .or_else(|| self.config.data.region.as_deref().and_then(FilterPolicy::for_region))
            .unwrap_or_default()
    }

    /// Gateway config with its fixture path resolved.
    pub fn gateway_config(&self) -> GatewayConfig {
        let mut g = self.config.gateway.clone();
        g.fixtures = g.fixtures.as_deref().map(|p| self.resolve(p));
        g
    }

    /// Every violated constraint.
    pub fn violations(&self) -> Vec<String> {
        let c = &self.config;
        let mut v = Vec::new();
        let must_exist = |v: &mut Vec<String>, what: &str, p: &Path| {
            let p = self.resolve(p);
            if !p.exists() {
                v.push(format!("{what} {} does not exist", p.display()));
            }
        };
        if c.data.trajectories.as_os_str().is_empty() {
            v.push("data.trajectories is required".into());
        } else {
            must_exist(&mut v, "data.trajectories", &c.data.trajectories);
            if self.format().is_none() {
                v.push("data.format is unset and cannot be inferred from the file extension".into());
            }
        }
        if let Some(p) = &c.data.context {
            must_exist(&mut v, "data.context", p);
        }
        if let Some(r) = &c.data.region {
            if c.filter.is_none() && FilterPolicy::for_region(r).is_none() {
                v.push(format!("data.region {r:?} has no default thresholds; set [filter]"));
            }
        }
        if let Err(e) = self.filter_policy().validate() {
            v.push(format!("filter: {e}"));
        }
        if let Err(e) = c.segmentation.validate() {
            v.push(format!("segmentation: {e}"));
        }
        if !(c.tokenize.delta.is_finite() && (0.0..=10.0).contains(&c.tokenize.delta)) {
            v.push(format!("tokenize.delta must be in [0, 10] (got {})", c.tokenize.delta));
        }
        if c.tokenize.layers.is_empty() {
            v.push("tokenize.layers must not be empty".into());
        }
        let mut layers = c.tokenize.layers.clone();
        layers.sort();
        layers.dedup();
        if layers.len() != c.tokenize.layers.len() {
            v.push("tokenize.layers has duplicates".into());
        }
        match &c.tokenize.tiles {
            TilesConfig::Dir { root } => must_exist(&mut v, "tokenize.tiles.root", root),
            TilesConfig::Http { url, .. } => {
                if !url.contains("{z}") || !url.contains("{x}") || !url.contains("{y}") {
                    v.push("tokenize.tiles.url must contain {z}, {x} and {y}".into());
                }
            }
            TilesConfig::Checkerboard { squares, .. } => {
                if *squares == 0 {
                    v.push("tokenize.tiles.squares must be >= 1".into());
                }
            }
        }
        if let Err(e) = c.style.validate() {
            v.push(format!("style: {e}"));
        }
        if let Some(p) = &c.task.prompt {
            must_exist(&mut v, "task.prompt", p);
        }
        if c.task.region_grid == 0 || c.task.region_grid > 100 {
            v.push(format!(
                "task.region_grid must be in 1..=100 (got {})",
                c.task.region_grid
            ));
        }
        if c.optimize.seeds == 0 || c.optimize.seeds > MAX_SEEDS {
            v.push(format!(
                "optimize.seeds must be in 1..={MAX_SEEDS} (got {})",
                c.optimize.seeds
            ));
        }
        if c.optimize.max_rounds == 0 {
            v.push("optimize.max_rounds must be >= 1".into());
        }
        if !(c.optimize.tte_tolerance.is_finite() && c.optimize.tte_tolerance >= 0.0) {
            v.push("optimize.tte_tolerance must be >= 0".into());
        }
        if let Err(e) = c.anomaly.validate() {
            v.push(format!("anomaly: {e}"));
        }
        if c.jobs == Some(0) {
            v.push("jobs must be >= 1".into());
        }
        v.extend(c.gateway.violations());
        if c.gateway.backend == Backend::Mock {
            if let Some(p) = &c.gateway.fixtures {
                must_exist(&mut v, "gateway.fixtures", p);
            }
        }
        v
    }

    pub fn validate(&self) -> Result<(), CliError> {
        let v = self.violations();
        if v.is_empty() {
            Ok(())
        } else {
            Err(CliError::Config(v))
        }
    }
}
