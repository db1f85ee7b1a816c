//! Flat `key = value` configuration, merged with command-line overrides.

use std::collections::BTreeMap;
use std::path::{Path, PathBuf};
use std::time::Duration;

use heston_lab::engine::EngineConfig;
use heston_lab::{HestonParams, ModelPreset, Payoff, SchemeKind};

#[derive(Debug, thiserror::Error)]
pub enum ConfigError {
    #[error("cannot read config file {path}: {source}")]
    Io {
        path: PathBuf,
        source: std::io::Error,
    },
    #[error("{path}:{line}: expected `key = value`")]
    Syntax { path: PathBuf, line: usize },
    #[error("unknown config key `{0}`")]
    UnknownKey(String),
    #[error("bad value for `{key}`: {msg}")]
    Value { key: String, msg: String },
}

const KEYS: &[&str] = &[
    "model",
    "scheme",
    "payoff",
    "grid",
    "steps",
    "samples",
    "seed",
    "threads",
    "out",
    "summary_out",
    "epsilon",
    "mc_grid",
    "mc_samples",
    "max_paths",
    "time_budget",
    "s0",
    "v0",
    "kappa",
    "theta",
    "sigma",
    "rho",
    "r",
    "maturity",
    "strike",
];

const PARAM_KEYS: &[&str] = &["s0", "v0", "kappa", "theta", "sigma", "rho", "r", "maturity", "strike"];

fn canonical_key(key: &str) -> &str {
    match key {
        "grid_sizes" => "grid",
        "n" | "n_steps" => "steps",
        "m" => "samples",
        "output_path" => "out",
        "mu" => "r",
        "t" => "maturity",
        "k" => "strike",
        other => other,
    }
}

/// Raw key/value pairs; later insertions win.
#[derive(Debug, Clone, Default)]
pub struct RawConfig {
    values: BTreeMap<String, String>,
}

impl RawConfig {
    pub fn from_file(path: &Path) -> Result<Self, ConfigError> {
        let text = std::fs::read_to_string(path).map_err(|source| ConfigError::Io {
            path: path.to_owned(),
            source,
        })?;
        let mut raw = Self::default();
        for (i, line) in text.lines().enumerate() {
            let line = line.split('#').next().unwrap_or("").trim();
            if line.is_empty() {
                continue;
            }
            let (k, v) = line.split_once('=').ok_or_else(|| ConfigError::Syntax {
                path: path.to_owned(),
                line: i + 1,
            })?;
            raw.set(k.trim(), v.trim())?;
        }
        Ok(raw)
    }

    pub fn set(&mut self, key: &str, value: &str) -> Result<(), ConfigError> {
        let lower = key.to_ascii_lowercase();
        let key = canonical_key(&lower);
        if !KEYS.contains(&key) {
            return Err(ConfigError::UnknownKey(key.to_owned()));
        }
        self.values.insert(key.to_owned(), value.to_owned());
        Ok(())
    }

    pub fn get(&self, key: &str) -> Option<&str> {
        self.values.get(key).map(String::as_str)
    }

    fn parse<T: std::str::FromStr>(&self, key: &str) -> Result<Option<T>, ConfigError>
    where
        T::Err: std::fmt::Display,
    {
        self.get(key)
            .map(|v| {
                v.parse::<T>().map_err(|e| ConfigError::Value {
                    key: key.to_owned(),
                    msg: format!("`{v}`: {e}"),
                })
            })
            .transpose()
    }

    fn parse_list<T: std::str::FromStr>(&self, key: &str) -> Result<Option<Vec<T>>, ConfigError>
    where
        T::Err: std::fmt::Display,
    {
        self.get(key)
            .map(|v| {
                v.split(',')
                    .map(str::trim)
                    .filter(|s| !s.is_empty())
                    .map(|s| {
                        s.parse::<T>().map_err(|e| ConfigError::Value {
                            key: key.to_owned(),
                            msg: format!("`{s}`: {e}"),
                        })
                    })
                    .collect()
            })
            .transpose()
    }
}

/// One parameter set with the name that goes into the `model` column.
#[derive(Debug, Clone, Copy)]
pub struct NamedModel {
    pub name: &'static str,
    pub params: HestonParams,
}

#[derive(Debug, Clone)]
pub struct StudyConfig {
    pub models: Vec<NamedModel>,
    /// False when `model` came from neither the file nor the flags.
    pub model_explicit: bool,
    pub schemes: Vec<SchemeKind>,
    pub payoffs: Vec<Payoff>,
    /// `None` when neither the file nor the flags set a grid.
    pub grid_sizes: Option<Vec<usize>>,
    pub steps: Option<usize>,
    pub samples: Option<u64>,
    pub seed: u64,
    pub threads: usize,
    pub output_path: Option<PathBuf>,
    pub summary_path: Option<PathBuf>,
    pub epsilons: Option<Vec<f64>>,
    pub mc_grid: usize,
    pub mc_samples: u64,
    pub max_paths: Option<u64>,
    pub time_budget: Option<Duration>,
}

pub const DEFAULT_SEED: u64 = 20_240_601;

impl StudyConfig {
    pub fn from_raw(raw: &RawConfig) -> Result<Self, ConfigError> {
        let models = resolve_models(raw)?;
        let schemes = raw
            .parse_list::<SchemeKind>("scheme")?
            .unwrap_or_else(|| vec![SchemeKind::Symmetrized]);
        let payoffs = raw.parse_list::<Payoff>("payoff")?.unwrap_or_else(|| vec![Payoff::Call]);
        if schemes.is_empty() || payoffs.is_empty() {
            return Err(ConfigError::Value {
                key: "scheme/payoff".into(),
                msg: "empty list".into(),
            });
        }
        let time_budget = raw
            .parse::<f64>("time_budget")?
            .map(|s| {
                if s > 0.0 && s.is_finite() {
                    Ok(Duration::from_secs_f64(s))
                } else {
                    Err(ConfigError::Value {
                        key: "time_budget".into(),
                        msg: format!("must be a positive number of seconds, got {s}"),
                    })
                }
            })
            .transpose()?;
        Ok(Self {
            models,
            model_explicit: raw.get("model").is_some(),
            schemes,
            payoffs,
            grid_sizes: raw.parse_list("grid")?,
            steps: raw.parse("steps")?,
            samples: raw.parse("samples")?,
            seed: raw.parse("seed")?.unwrap_or(DEFAULT_SEED),
            threads: raw.parse("threads")?.unwrap_or(0),
            output_path: raw.get("out").map(PathBuf::from),
            summary_path: raw.get("summary_out").map(PathBuf::from),
            epsilons: raw.parse_list("epsilon")?,
            mc_grid: raw.parse("mc_grid")?.unwrap_or(128),
            mc_samples: raw.parse("mc_samples")?.unwrap_or(1_000_000),
            max_paths: raw.parse("max_paths")?,
            time_budget,
        })
    }

    pub fn engine(&self) -> EngineConfig {
        let mut cfg = EngineConfig::with_threads(self.threads);
        cfg.max_paths = self.max_paths;
        cfg.time_budget = self.time_budget;
        cfg
    }

    pub fn single_scheme(&self) -> Result<SchemeKind, ConfigError> {
        match self.schemes.as_slice() {
            [one] => Ok(*one),
            _ => Err(ConfigError::Value {
                key: "scheme".into(),
                msg: "this command takes exactly one scheme".into(),
            }),
        }
    }
}

fn resolve_models(raw: &RawConfig) -> Result<Vec<NamedModel>, ConfigError> {
    let name = raw.get("model").unwrap_or("model1");
    let presets: Vec<ModelPreset> = if name.eq_ignore_ascii_case("all") {
        ModelPreset::ALL.to_vec()
    } else {
        vec![name.parse::<ModelPreset>().map_err(|e| ConfigError::Value {
            key: "model".into(),
            msg: e.to_string(),
        })?]
    };
    let overridden = PARAM_KEYS.iter().any(|k| raw.get(k).is_some());
    if overridden && presets.len() > 1 {
        return Err(ConfigError::Value {
            key: "model".into(),
            msg: "inline parameters need a single base preset".into(),
        });
    }
    presets
        .into_iter()
        .map(|preset| {
            let mut p = preset.params();
            for &key in PARAM_KEYS {
                if let Some(v) = raw.parse::<f64>(key)? {
                    let slot = match key {
                        "s0" => &mut p.s0,
                        "v0" => &mut p.v0,
                        "kappa" => &mut p.kappa,
                        "theta" => &mut p.theta,
                        "sigma" => &mut p.sigma,
                        "rho" => &mut p.rho,
                        "r" => &mut p.r,
                        "maturity" => &mut p.maturity,
                        _ => &mut p.strike,
                    };
                    *slot = v;
                }
            }
            p.validate().map_err(|e| ConfigError::Value {
                key: "model".into(),
                msg: e.to_string(),
            })?;
            Ok(NamedModel {
                name: if overridden { "custom" } else { preset.name() },
                params: p,
            })
        })
        .collect()
}

/// `out.csv` becomes `out_summary.csv`.
pub fn derived_summary_path(out: &Path) -> PathBuf {
    let stem = out.file_stem().and_then(|s| s.to_str()).unwrap_or("out");
    let name = match out.extension().and_then(|e| e.to_str()) {
        Some(ext) => format!("{stem}_summary.{ext}"),
        None => format!("{stem}_summary"),
    };
    out.with_file_name(name)
}
