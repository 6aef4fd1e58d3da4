use std::fmt;
use std::path::{Path, PathBuf};

use serde::Deserialize;
use wvaml::learner::ModelClass;
use wvaml::mdp::{load_mdp, mdp_from_json, GeneratorConfig};
use wvaml::FiniteMdp;

/// Bundled instance used when a config names neither a file nor a generator.
pub const EXAMPLE_MDP: &str = include_str!("../data/example_mdp.json");

/// Marks errors that map to exit status 2.
#[derive(Debug)]
pub struct ConfigError(pub String);

impl fmt::Display for ConfigError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(&self.0)
    }
}

impl std::error::Error for ConfigError {}

pub fn config_error(msg: impl Into<String>) -> anyhow::Error {
    ConfigError(msg.into()).into()
}

#[derive(Debug, Clone, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct FitSection {
    #[serde(default = "default_iters")]
    pub iters: usize,
    #[serde(default = "default_step")]
    pub step_size: f64,
    #[serde(default = "default_fd")]
    pub fd_epsilon: f64,
    #[serde(default = "default_log_every")]
    pub log_every: usize,
    #[serde(default = "default_class")]
    pub class: ModelClass,
    #[serde(default = "default_init_scale")]
    pub init_scale: f64,
}

fn default_iters() -> usize {
    2000
}
fn default_step() -> f64 {
    0.1
}
fn default_fd() -> f64 {
    1e-5
}
fn default_log_every() -> usize {
    100
}
fn default_class() -> ModelClass {
    ModelClass::Full
}
fn default_init_scale() -> f64 {
    0.5
}

impl Default for FitSection {
    fn default() -> Self {
        serde_json::from_str("{}").expect("all fields have defaults")
    }
}

/// Parameters of a verification grid.
#[derive(Debug, Clone, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct GridSection {
    /// State count for duality cells and upper bound for MDP cells.
    #[serde(default = "default_grid_n")]
    pub n: usize,
    #[serde(default = "default_grid_m")]
    pub m_max: usize,
    #[serde(default = "default_gamma_max")]
    pub gamma_max: f64,
}

fn default_grid_n() -> usize {
    15
}
fn default_grid_m() -> usize {
    3
}
fn default_gamma_max() -> f64 {
    0.95
}

impl Default for GridSection {
    fn default() -> Self {
        serde_json::from_str("{}").expect("all fields have defaults")
    }
}

/// One JSON file per invocation; every field is optional.
#[derive(Debug, Clone, Default, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ExperimentConfig {
    pub seed: Option<u64>,
    pub trials: Option<usize>,
    pub tol: Option<f64>,
    pub out: Option<PathBuf>,
    /// MDP file; relative paths resolve against the config file's directory.
    pub mdp: Option<PathBuf>,
    pub generator: Option<GeneratorConfig>,
    pub operator: Option<String>,
    pub delta: Option<f64>,
    pub max_iter: Option<usize>,
    pub kind: Option<String>,
    pub kinds: Option<Vec<String>>,
    #[serde(default)]
    pub fit: FitSection,
    #[serde(default)]
    pub grid: GridSection,
}

/// Flag values; `Some` wins over the config file.
#[derive(Debug, Clone, Default)]
pub struct Overrides {
    pub seed: Option<u64>,
    pub out: Option<PathBuf>,
    pub trials: Option<usize>,
    pub tol: Option<f64>,
}

impl ExperimentConfig {
    pub fn load(path: Option<&Path>, flags: &Overrides) -> anyhow::Result<Self> {
        let mut cfg = match path {
            None => Self::default(),
            Some(p) => {
                let text = std::fs::read_to_string(p)
                    .map_err(|e| config_error(format!("cannot read config {}: {e}", p.display())))?;
                let mut cfg: Self = serde_json::from_str(&text)
                    .map_err(|e| config_error(format!("malformed config {}: {e}", p.display())))?;
                if let (Some(mdp), Some(dir)) = (&cfg.mdp, p.parent()) {
                    if mdp.is_relative() {
                        cfg.mdp = Some(dir.join(mdp));
                    }
                }
                cfg
            }
        };
        if flags.seed.is_some() {
            cfg.seed = flags.seed;
        }
        if flags.out.is_some() {
            cfg.out = flags.out.clone();
        }
        if flags.trials.is_some() {
            cfg.trials = flags.trials;
        }
        if flags.tol.is_some() {
            cfg.tol = flags.tol;
        }
        cfg.validate()?;
        Ok(cfg)
    }

    fn validate(&self) -> anyhow::Result<()> {
        if let Some(p) = &self.mdp {
            if !p.is_file() {
                return Err(config_error(format!("mdp file not found: {}", p.display())));
            }
        }
        if self.mdp.is_some() && self.generator.is_some() {
            return Err(config_error("give either `mdp` or `generator`, not both"));
        }
        if let Some(t) = self.tol {
            if !(t > 0.0 && t.is_finite()) {
                return Err(config_error(format!("tol must be positive, got {t}")));
            }
        }
        if self.trials == Some(0) {
            return Err(config_error("trials must be at least 1"));
        }
        if let Some(d) = self.delta {
            if !(d > 0.0) {
                return Err(config_error(format!("delta must be positive, got {d}")));
            }
        }
        if self.grid.n < 2 || self.grid.m_max < 1 || !(0.0..1.0).contains(&self.grid.gamma_max) {
            return Err(config_error("grid needs n >= 2, m_max >= 1 and gamma_max in [0, 1)"));
        }
        Ok(())
    }

    pub fn seed(&self) -> u64 {
        self.seed.unwrap_or(0)
    }

    pub fn out_dir(&self) -> PathBuf {
        self.out.clone().unwrap_or_else(|| PathBuf::from("out"))
    }

    /// The configured MDP: a file, a generator or the bundled example.
    pub fn mdp(&self) -> anyhow::Result<FiniteMdp> {
        if let Some(p) = &self.mdp {
            return load_mdp(p).map_err(|e| config_error(format!("cannot load mdp {}: {e}", p.display())));
        }
        if let Some(g) = &self.generator {
            return Ok(wvaml::mdp::generate(g).map_err(|e| config_error(format!("bad generator: {e}")))?.mdp);
        }
        Ok(mdp_from_json(EXAMPLE_MDP)?)
    }

    /// Generator parameters for `gen-mdp`; the top-level seed replaces the
    /// generator's own.
    pub fn generator(&self) -> GeneratorConfig {
        let mut g = self.generator.clone().unwrap_or_else(|| GeneratorConfig::new(8, 2, 0.9, 0.3, 0));
        if let Some(seed) = self.seed {
            g.seed = seed;
        }
        g
    }
}
